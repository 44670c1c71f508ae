#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crest/corpus.hpp"
#include "crest/types.hpp"

namespace crest::splitter {

struct SplitRatios {
  double trn = 0.75;
  double dev = 0.10;
  double tst = 0.15;

  void validate() const;  // nonnegative, trn > 0, sums to 1 within 1e-9
  // "75:10:15" — integer-percent triple, colon-separated.
  static SplitRatios parse(const std::string& text);
};

// Three disjoint id sets. T1 carries resume ids; T2 carries application ids
// ("applicant/job").
struct SplitBundle {
  std::string task;  // "t1" | "t2"
  std::uint64_t seed = 0;
  std::vector<std::string> trn;
  std::vector<std::string> dev;
  std::vector<std::string> tst;
};

struct SetCounts {
  int trn = 0;
  int dev = 0;
  int tst = 0;
  int total() const { return trn + dev + tst; }
};

// Everything verify_split recomputes from scratch; `violations` is empty
// exactly when the bundle is sound.
struct SplitReport {
  bool ok = true;
  std::vector<std::string> violations;
  SetCounts sizes;
  double trn_ratio = 0.0;
  double dev_ratio = 0.0;
  double tst_ratio = 0.0;
  // Key: label name for T1, "<level>|Y" / "<level>|N" for T2.
  std::map<std::string, SetCounts> cells;
  // max over sets x cells of |in-set proportion - input proportion|
  double max_cell_delta = 0.0;
};

// Per-label proportional allocation with largest-remainder rounding
// (remainder ties favor TRN, then DEV). Labels with fewer than three
// resumes go wholly to TRN. Every resume must be labeled.
SplitBundle split_t1(const std::vector<Resume>& resumes, const SplitRatios& ratios,
                     std::uint64_t seed);

// Overlap-free application split: draft a stratified split at a trial TRN
// ratio, move every applicant straddling the boundary wholly into TRN, and
// bisect the trial ratio until the achieved ratio lands within `tolerance`
// of the target; the evaluation remainder is divided applicant-atomically
// into DEV/TST along the same (level x match) cells. Throws DataError after
// 50 iterations without convergence, reporting the best ratio reached.
SplitBundle split_t2(const std::vector<Application>& applications,
                     const std::vector<Resume>& resumes,
                     const std::vector<JobDescription>& jobs, const SplitRatios& ratios,
                     std::uint64_t seed, double tolerance = 0.05);

// Recomputes disjointness, coverage, overlap-freedom (T2), and distribution
// deltas directly from the inputs; never throws on a bad bundle — it reports.
SplitReport verify_split(const SplitBundle& bundle, const std::vector<Resume>& resumes,
                         const std::vector<JobDescription>& jobs,
                         const std::vector<Application>& applications);

void save_manifest(const std::filesystem::path& path, const SplitBundle& bundle,
                   const SplitReport& report);
SplitBundle load_manifest(const std::filesystem::path& path);

// Manifest ids resolved back to corpus rows, in manifest order.
std::vector<const Resume*> resumes_for(const std::vector<std::string>& ids,
                                       const std::vector<Resume>& resumes);

struct MatchExample {
  const Resume* resume = nullptr;
  const JobDescription* jd = nullptr;
  bool match = false;
};

std::vector<MatchExample> applications_for(const std::vector<std::string>& ids,
                                           const corpus::Corpus& data);

}  // namespace crest::splitter
