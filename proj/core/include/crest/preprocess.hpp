#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "crest/types.hpp"

namespace crest::preprocess {

// --- Stopwords ---------------------------------------------------------------

// Built-in list of ~120 English function words.
const std::unordered_set<std::string>& default_stopwords();
// One token per line; '#' comments ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

// --- Document frequencies ----------------------------------------------------

// Presence counts over whole resumes: how many training resumes contain each
// token at least once. Build from the TRN split only.
struct DocFreqTable {
  std::unordered_map<std::string, int> counts;
  int num_docs = 0;
  std::unordered_set<std::string> stopwords;
  // Distinct tokens ordered by (count desc, token asc); basis for the
  // top-fraction sets used by pruning.
  std::vector<std::string> ranking;

  int count_of(const std::string& token) const {
    auto it = counts.find(token);
    return it == counts.end() ? 0 : it->second;
  }

  // The highest-DF floor(fraction * |vocabulary|) tokens.
  std::unordered_set<std::string> top_fraction(double fraction) const;
};

DocFreqTable build_df_table(const std::vector<Resume>& training_resumes,
                            std::unordered_set<std::string> stopwords);

std::string save_df_json(const DocFreqTable& df);
DocFreqTable load_df_json(const std::string& bytes);

// --- Token budgets (trimming) ------------------------------------------------

// Proportional per-section token allowances under a shared cap:
//   T = sum of lengths (+ jd length), n_i = floor(min(cap, T) * len_i / T).
// When T <= cap every allowance equals its length (identity regime).
struct TokenBudget {
  std::vector<int> per_section;
  std::optional<int> jd;
  int cap = 0;

  int total() const {
    int t = 0;
    for (int n : per_section) t += n;
    return t + jd.value_or(0);
  }
};

TokenBudget compute_budget(const std::vector<int>& section_lengths, int cap);
TokenBudget compute_budget_with_jd(const std::vector<int>& section_lengths, int jd_length,
                                   int cap);

// Whole-context input assembly: "[CLS]" followed by the head of each section
// under budgets computed at cap max_len-1, so the result never exceeds
// max_len. max_len must be >= 2.
TokenList trim(const Resume& resume, int max_len);
// Same, with the job description sharing the budget and appended last.
TokenList trim_with_jd(const Resume& resume, const JobDescription& jd, int max_len);

// --- Pruning -------------------------------------------------------------

// Staged removal applied only while the section exceeds cap:
//   (1) stopwords, (2) tokens in the top 5% of the DF ranking, (3) top 30%.
// Order is preserved; the result is a subsequence of the input. The full
// variant adds a guarantee step: head-truncate to cap if the stages were not
// enough.
TokenList prune_section_stages(const TokenList& section, int cap, const DocFreqTable& df);
TokenList prune_section(const TokenList& section, int cap, const DocFreqTable& df);

// --- Chunking ------------------------------------------------------------

// ceil(|section| / chunk_len) chunks, all full length except possibly the
// last; concatenation reproduces the input. Empty section -> no chunks.
std::vector<TokenList> chunk_section(const TokenList& section, int chunk_len);

inline int chunk_count(std::size_t section_len, int chunk_len) {
  return static_cast<int>((section_len + static_cast<std::size_t>(chunk_len) - 1) /
                          static_cast<std::size_t>(chunk_len));
}

// Total chunks across the six sections (the batching key K).
int total_chunks(const Resume& resume, int chunk_len);

// --- Length statistics -----------------------------------------------

struct SectionLengthStats {
  int count = 0;       // nonempty sections observed
  double mean = 0.0;
  double stddev = 0.0;  // population
  int max = 0;
  double ratio_within = 1.0;  // fraction with length <= cap
};

struct PruningStats {
  int cap = 0;
  std::array<SectionLengthStats, kNumSections> before{};
  std::array<SectionLengthStats, kNumSections> after{};  // stages only, no truncation
};

PruningStats pruning_stats(const std::vector<Resume>& resumes, const DocFreqTable& df, int cap);
std::string render_pruning_stats(const PruningStats& stats);
std::string pruning_stats_csv(const PruningStats& stats);

}  // namespace crest::preprocess
