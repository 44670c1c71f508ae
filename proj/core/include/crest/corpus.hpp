#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crest/types.hpp"

namespace crest::corpus {

// --- JSON persistence -------------------------------------------------------
//
// Schema: {"id": string, "label": string|null, "sections": {name: [tokens]}}
// with exactly the six canonical section names. Absent section = empty array.
// Loading rejects unknown keys and non-string tokens, naming the offending
// path in the ParseError.

std::string save_resume_json(const Resume& resume);
Resume load_resume_json(const std::string& bytes);

std::string save_jobs_json(const std::vector<JobDescription>& jobs);
std::vector<JobDescription> load_jobs_json(const std::string& bytes);

std::string save_applications_json(const std::vector<Application>& applications);
std::vector<Application> load_applications_json(const std::string& bytes);

// --- Level deduplication ----------------------------------------------------

struct LeveledApplication {
  std::string applicant_id;
  CompetenceLabel applied_level = CompetenceLabel::kNQ;
  Resume resume;
};

// Keeps one resume per applicant: the one applied at the highest level.
// Within-level duplicates (same applicant id) collapse to the first row.
// Output preserves first-appearance order of applicants.
std::vector<Resume> dedup_across_levels(const std::vector<LeveledApplication>& rows);

// --- Synthetic corpus -------------------------------------------------------

struct SynthSpec {
  std::array<int, kNumLabels> counts{};  // resumes per label, indexed by CompetenceLabel
  int vocab_size = 400;                  // noise vocabulary ("tok0000"..)
  double signal = 0.9;                   // probability a resume carries its label marker
  std::uint64_t seed = 0;

  int total() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
};

// Largest-remainder scaling of label proportions to integer counts summing to
// total exactly.
std::array<int, kNumLabels> scale_label_counts(const std::array<double, kNumLabels>& proportions,
                                               int total);

struct Corpus {
  std::vector<Resume> resumes;
  std::vector<JobDescription> jobs;
  std::vector<Application> applications;
};

// Marker token planted into WorkExperience when the signal fires.
std::string marker_token(CompetenceLabel label);
// Marker token planted into synthetic job descriptions of the given level.
std::string jd_marker_token(CompetenceLabel level);

// Deterministic in SynthSpec. Every resume is labeled; WorkExperience carries
// the label marker with probability = signal; section presence follows fixed
// per-section rates; each applicant applies to 1-3 distinct levels.
Corpus generate_synthetic_corpus(const SynthSpec& spec);

// --- Corpus directory -------------------------------------------------------
//
// Layout: one "<applicant_id>.json" per resume plus "jobs.json" and
// "applications.json" at the directory root.

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace crest::corpus
