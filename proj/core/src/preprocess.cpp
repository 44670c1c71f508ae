#include "crest/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "crest/errors.hpp"
#include "json.hpp"

namespace crest::preprocess {

using nlohmann::json;

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",       "about",   "above",  "after",   "again",   "against", "all",    "am",
      "an",      "and",     "any",    "are",     "as",      "at",      "be",     "because",
      "been",    "before",  "being",  "below",   "between", "both",    "but",    "by",
      "can",     "cannot",  "could",  "did",     "do",      "does",    "doing",  "down",
      "during",  "each",    "few",    "for",     "from",    "further", "had",    "has",
      "have",    "having",  "he",     "her",     "here",    "hers",    "herself","him",
      "himself", "his",     "how",    "i",       "if",      "in",      "into",   "is",
      "it",      "its",     "itself", "just",    "me",      "more",    "most",   "my",
      "myself",  "no",      "nor",    "not",     "now",     "of",      "off",    "on",
      "once",    "only",    "or",     "other",   "our",     "ours",    "ourselves",
      "out",     "over",    "own",    "same",    "she",     "should",  "so",     "some",
      "such",    "than",    "that",   "the",     "their",   "theirs",  "them",   "themselves",
      "then",    "there",   "these",  "they",    "this",    "those",   "through","to",
      "too",     "under",   "until",  "up",      "very",    "was",     "we",     "were",
      "what",    "when",    "where",  "which",   "while",   "who",     "whom",   "why",
      "will",    "with",    "would",  "you",     "your",    "yours",   "yourself",
      "yourselves",
  };
  return kStopwords;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file: " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    words.insert(line);
  }
  return words;
}

std::unordered_set<std::string> DocFreqTable::top_fraction(double fraction) const {
  const auto k = static_cast<std::size_t>(fraction * static_cast<double>(ranking.size()));
  std::unordered_set<std::string> top;
  top.reserve(k);
  for (std::size_t i = 0; i < k && i < ranking.size(); ++i) top.insert(ranking[i]);
  return top;
}

namespace {

void build_ranking(DocFreqTable& df) {
  df.ranking.clear();
  df.ranking.reserve(df.counts.size());
  for (const auto& [token, count] : df.counts) df.ranking.push_back(token);
  std::sort(df.ranking.begin(), df.ranking.end(), [&](const std::string& a, const std::string& b) {
    const int ca = df.counts.at(a);
    const int cb = df.counts.at(b);
    if (ca != cb) return ca > cb;
    return a < b;
  });
}

}  // namespace

DocFreqTable build_df_table(const std::vector<Resume>& training_resumes,
                            std::unordered_set<std::string> stopwords) {
  if (training_resumes.empty()) throw DataError("df table: empty training corpus");
  DocFreqTable df;
  df.num_docs = static_cast<int>(training_resumes.size());
  df.stopwords = std::move(stopwords);
  std::unordered_set<std::string> seen;
  for (const auto& resume : training_resumes) {
    seen.clear();
    for (const auto& section : resume.sections) {
      for (const auto& token : section) seen.insert(token);
    }
    for (const auto& token : seen) ++df.counts[token];
  }
  build_ranking(df);
  return df;
}

std::string save_df_json(const DocFreqTable& df) {
  json j;
  j["num_docs"] = df.num_docs;
  json counts = json::object();
  for (const auto& token : df.ranking) counts[token] = df.counts.at(token);
  j["counts"] = counts;
  std::vector<std::string> stop(df.stopwords.begin(), df.stopwords.end());
  std::sort(stop.begin(), stop.end());
  j["stopwords"] = stop;
  return j.dump() + "\n";
}

DocFreqTable load_df_json(const std::string& bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("num_docs") || !j.contains("counts"))
    throw ParseError("df table: malformed JSON");
  DocFreqTable df;
  df.num_docs = j["num_docs"].get<int>();
  for (const auto& [token, count] : j["counts"].items()) {
    df.counts[token] = count.get<int>();
  }
  if (j.contains("stopwords")) {
    for (const auto& w : j["stopwords"]) df.stopwords.insert(w.get<std::string>());
  }
  build_ranking(df);
  return df;
}

namespace {

TokenBudget budget_impl(const std::vector<int>& lengths, std::optional<int> jd_length, int cap) {
  if (cap < 1) throw DataError("budget: cap must be >= 1");
  std::int64_t total = jd_length.value_or(0);
  for (int len : lengths) {
    if (len < 0) throw DataError("budget: negative section length");
    total += len;
  }
  TokenBudget budget;
  budget.cap = cap;
  budget.per_section.resize(lengths.size(), 0);
  if (jd_length) budget.jd = 0;
  if (total == 0) return budget;

  const std::int64_t window = std::min<std::int64_t>(cap, total);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    budget.per_section[i] = static_cast<int>(window * lengths[i] / total);
  }
  if (jd_length) budget.jd = static_cast<int>(window * (*jd_length) / total);
  return budget;
}

}  // namespace

TokenBudget compute_budget(const std::vector<int>& section_lengths, int cap) {
  return budget_impl(section_lengths, std::nullopt, cap);
}

TokenBudget compute_budget_with_jd(const std::vector<int>& section_lengths, int jd_length,
                                   int cap) {
  if (jd_length < 0) throw DataError("budget: negative jd length");
  return budget_impl(section_lengths, jd_length, cap);
}

namespace {

std::vector<int> section_lengths_of(const Resume& resume) {
  std::vector<int> lengths(kNumSections);
  for (int i = 0; i < kNumSections; ++i)
    lengths[static_cast<std::size_t>(i)] = static_cast<int>(resume.sections[static_cast<std::size_t>(i)].size());
  return lengths;
}

void append_head(TokenList& out, const TokenList& section, int n) {
  out.insert(out.end(), section.begin(), section.begin() + n);
}

}  // namespace

TokenList trim(const Resume& resume, int max_len) {
  if (max_len < 2) throw DataError("trim: max_len must leave room for the [CLS] position");
  const auto budget = compute_budget(section_lengths_of(resume), max_len - 1);
  TokenList input;
  input.reserve(static_cast<std::size_t>(budget.total()) + 1);
  input.emplace_back(kClsToken);
  for (int i = 0; i < kNumSections; ++i)
    append_head(input, resume.sections[static_cast<std::size_t>(i)],
                budget.per_section[static_cast<std::size_t>(i)]);
  return input;
}

TokenList trim_with_jd(const Resume& resume, const JobDescription& jd, int max_len) {
  if (max_len < 2) throw DataError("trim: max_len must leave room for the [CLS] position");
  const auto budget = compute_budget_with_jd(section_lengths_of(resume),
                                             static_cast<int>(jd.tokens.size()), max_len - 1);
  TokenList input;
  input.reserve(static_cast<std::size_t>(budget.total()) + 1);
  input.emplace_back(kClsToken);
  for (int i = 0; i < kNumSections; ++i)
    append_head(input, resume.sections[static_cast<std::size_t>(i)],
                budget.per_section[static_cast<std::size_t>(i)]);
  append_head(input, jd.tokens, budget.jd.value_or(0));
  return input;
}

namespace {

TokenList drop_tokens(const TokenList& section, const std::unordered_set<std::string>& victims) {
  TokenList kept;
  kept.reserve(section.size());
  for (const auto& token : section) {
    if (!victims.count(token)) kept.push_back(token);
  }
  return kept;
}

}  // namespace

TokenList prune_section_stages(const TokenList& section, int cap, const DocFreqTable& df) {
  if (cap < 0) throw DataError("prune: cap must be nonnegative");
  if (static_cast<int>(section.size()) <= cap) return section;

  TokenList pruned = drop_tokens(section, df.stopwords);
  if (static_cast<int>(pruned.size()) <= cap) return pruned;

  pruned = drop_tokens(pruned, df.top_fraction(0.05));
  if (static_cast<int>(pruned.size()) <= cap) return pruned;

  return drop_tokens(pruned, df.top_fraction(0.30));
}

TokenList prune_section(const TokenList& section, int cap, const DocFreqTable& df) {
  TokenList pruned = prune_section_stages(section, cap, df);
  if (static_cast<int>(pruned.size()) > cap) pruned.resize(static_cast<std::size_t>(cap));
  return pruned;
}

std::vector<TokenList> chunk_section(const TokenList& section, int chunk_len) {
  if (chunk_len < 1) throw DataError("chunk: chunk_len must be >= 1");
  std::vector<TokenList> chunks;
  const std::size_t len = static_cast<std::size_t>(chunk_len);
  chunks.reserve((section.size() + len - 1) / len);
  for (std::size_t start = 0; start < section.size(); start += len) {
    const std::size_t stop = std::min(section.size(), start + len);
    chunks.emplace_back(section.begin() + static_cast<std::ptrdiff_t>(start),
                        section.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return chunks;
}

int total_chunks(const Resume& resume, int chunk_len) {
  int k = 0;
  for (const auto& section : resume.sections) k += chunk_count(section.size(), chunk_len);
  return k;
}

namespace {

SectionLengthStats stats_of(const std::vector<int>& lengths, int cap) {
  SectionLengthStats s;
  s.count = static_cast<int>(lengths.size());
  if (lengths.empty()) return s;
  double sum = 0.0;
  int within = 0;
  for (int len : lengths) {
    sum += len;
    s.max = std::max(s.max, len);
    if (len <= cap) ++within;
  }
  s.mean = sum / s.count;
  double sq = 0.0;
  for (int len : lengths) sq += (len - s.mean) * (len - s.mean);
  s.stddev = std::sqrt(sq / s.count);
  s.ratio_within = static_cast<double>(within) / s.count;
  return s;
}

}  // namespace

PruningStats pruning_stats(const std::vector<Resume>& resumes, const DocFreqTable& df, int cap) {
  PruningStats stats;
  stats.cap = cap;
  for (int i = 0; i < kNumSections; ++i) {
    std::vector<int> before;
    std::vector<int> after;
    for (const auto& resume : resumes) {
      const auto& section = resume.sections[static_cast<std::size_t>(i)];
      if (section.empty()) continue;
      before.push_back(static_cast<int>(section.size()));
      after.push_back(static_cast<int>(prune_section_stages(section, cap, df).size()));
    }
    stats.before[static_cast<std::size_t>(i)] = stats_of(before, cap);
    stats.after[static_cast<std::size_t>(i)] = stats_of(after, cap);
  }
  return stats;
}

namespace {

void append_stats_row(std::ostringstream& out, std::string_view name,
                      const SectionLengthStats& s) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-16s %10.2f (+/-%8.2f) %6d %9.2f%%\n", std::string(name).c_str(),
                s.mean, s.stddev, s.max, 100.0 * s.ratio_within);
  out << buf;
}

}  // namespace

std::string render_pruning_stats(const PruningStats& stats) {
  std::ostringstream out;
  out << "Section lengths before pruning (cap " << stats.cap << ")\n";
  out << "Section              Average (+/-  stdev)    Max     Ratio\n";
  for (int i = 0; i < kNumSections; ++i)
    append_stats_row(out, to_string(kAllSections[static_cast<std::size_t>(i)]),
                     stats.before[static_cast<std::size_t>(i)]);
  out << "\nSection lengths after pruning (cap " << stats.cap << ")\n";
  out << "Section              Average (+/-  stdev)    Max     Ratio\n";
  for (int i = 0; i < kNumSections; ++i)
    append_stats_row(out, to_string(kAllSections[static_cast<std::size_t>(i)]),
                     stats.after[static_cast<std::size_t>(i)]);
  return out.str();
}

std::string pruning_stats_csv(const PruningStats& stats) {
  std::ostringstream out;
  out << "phase,section,count,mean,stddev,max,ratio_within\n";
  const auto row = [&](const char* phase, SectionKind kind, const SectionLengthStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.4f,%.4f,%d,%.6f\n", phase,
                  std::string(to_string(kind)).c_str(), s.count, s.mean, s.stddev, s.max,
                  s.ratio_within);
    out << buf;
  };
  for (int i = 0; i < kNumSections; ++i)
    row("before", kAllSections[static_cast<std::size_t>(i)], stats.before[static_cast<std::size_t>(i)]);
  for (int i = 0; i < kNumSections; ++i)
    row("after", kAllSections[static_cast<std::size_t>(i)], stats.after[static_cast<std::size_t>(i)]);
  return out.str();
}

}  // namespace crest::preprocess
