#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "crest/corpus.hpp"
#include "crest/errors.hpp"
#include "crest/preprocess.hpp"
#include "crest/rng.hpp"
#include "test_util.hpp"

using namespace crest;
using crest::testutil::is_subsequence;
using crest::testutil::make_resume;
using crest::testutil::spit;
using crest::testutil::TempDir;

namespace {

// The document-frequency scenario frozen by tests/oracles/oracle_pruning.py:
// twenty distinct tokens, counts 4,4,3,3,3,2,2,2,2,1x11.
std::vector<Resume> oracle_docs() {
  const std::vector<TokenList> docs = {
      {"alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel", "india", "julia",
       "kilo", "lima", "mike", "nov", "oscar", "papa", "quebec", "romeo", "sierra", "tango"},
      {"alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel", "india"},
      {"alpha", "bravo", "charlie", "delta", "echo"},
      {"alpha", "bravo"},
  };
  std::vector<Resume> resumes;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    resumes.push_back(make_resume("d" + std::to_string(i),
                                  {{SectionKind::kWorkExperience, docs[i]}}));
  }
  return resumes;
}

const TokenList kOracleSection = {
    "the",  "alpha", "julia",  "of",    "bravo", "kilo",  "charlie", "and",   "lima",
    "alpha", "delta", "mike",  "echo",  "fox",   "nov",   "golf",    "oscar", "the",
    "hotel", "papa",  "india", "quebec", "romeo", "sierra", "tango",  "julia"};

preprocess::DocFreqTable oracle_df() {
  return preprocess::build_df_table(oracle_docs(), {"the", "of", "and"});
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("default stopwords are plausible function words") {
  const auto& stop = preprocess::default_stopwords();
  CHECK(stop.count("the") == 1);
  CHECK(stop.count("of") == 1);
  CHECK(stop.count("and") == 1);
  CHECK(stop.count("herself") == 1);
  CHECK(stop.count("nurse") == 0);
  CHECK(stop.size() > 100);
}

TEST_CASE("stopword files skip comments and blanks") {
  TempDir dir("stopwords");
  spit(dir / "stop.txt", "# function words\nthe\nof \r\n\nand\n");
  auto words = preprocess::load_stopwords(dir / "stop.txt");
  CHECK(words == std::unordered_set<std::string>{"the", "of", "and"});
  CHECK_THROWS_AS(preprocess::load_stopwords(dir / "nope.txt"), DataError);
}

TEST_CASE("df table matches the frozen oracle") {
  auto df = oracle_df();
  CHECK(df.num_docs == 4);
  CHECK(df.counts.size() == 20);
  CHECK(df.count_of("alpha") == 4);
  CHECK(df.count_of("echo") == 3);
  CHECK(df.count_of("india") == 2);
  CHECK(df.count_of("tango") == 1);
  CHECK(df.count_of("absent") == 0);

  // ranking: count desc, then token asc
  const std::vector<std::string> expected_ranking = {
      "alpha", "bravo", "charlie", "delta", "echo",   "fox",   "golf",
      "hotel", "india", "julia",   "kilo",  "lima",   "mike",  "nov",
      "oscar", "papa",  "quebec",  "romeo", "sierra", "tango"};
  CHECK(df.ranking == expected_ranking);

  CHECK(df.top_fraction(0.05) == std::unordered_set<std::string>{"alpha"});
  CHECK(df.top_fraction(0.30) ==
        std::unordered_set<std::string>{"alpha", "bravo", "charlie", "delta", "echo", "fox"});
  CHECK(df.top_fraction(0.0).empty());
  CHECK(df.top_fraction(1.0).size() == 20);

  CHECK_THROWS_AS(preprocess::build_df_table({}, {}), DataError);
}

TEST_CASE("df counts distinct presence, not occurrences") {
  auto df = preprocess::build_df_table(
      {make_resume("r", {{SectionKind::kSkills, {"echo", "echo", "echo"}},
                         {SectionKind::kOthers, {"echo"}}})},
      {});
  CHECK(df.count_of("echo") == 1);
}

TEST_CASE("df table JSON round-trips") {
  auto df = oracle_df();
  auto back = preprocess::load_df_json(preprocess::save_df_json(df));
  CHECK(back.num_docs == df.num_docs);
  CHECK(back.counts == df.counts);
  CHECK(back.ranking == df.ranking);
  CHECK(back.stopwords == df.stopwords);
  CHECK_THROWS_AS(preprocess::load_df_json("[]"), ParseError);
  CHECK_THROWS_AS(preprocess::load_df_json("{"), ParseError);
}

TEST_CASE("budget allocation matches the frozen oracle") {
  auto check = [](const std::vector<int>& lengths, int cap, const std::vector<int>& want) {
    auto budget = preprocess::compute_budget(lengths, cap);
    CHECK(budget.per_section == want);
    CHECK_FALSE(budget.jd.has_value());
    CHECK(budget.cap == cap);
  };
  check({120, 45, 310, 80, 15, 220}, 128, {19, 7, 50, 12, 2, 35});
  check({10, 5, 0, 3}, 128, {10, 5, 0, 3});
  check({0, 0, 0, 0, 0, 0}, 128, {0, 0, 0, 0, 0, 0});
  check({1, 1, 1, 1, 1, 1}, 3, {0, 0, 0, 0, 0, 0});
  check({997, 1}, 128, {127, 0});
  check({64, 64}, 127, {63, 63});

  auto with_jd = preprocess::compute_budget_with_jd({100, 200}, 50, 128);
  CHECK(with_jd.per_section == std::vector<int>{36, 73});
  CHECK(with_jd.jd == 18);
  auto identity = preprocess::compute_budget_with_jd({10, 10}, 10, 128);
  CHECK(identity.per_section == std::vector<int>{10, 10});
  CHECK(identity.jd == 10);
  auto big = preprocess::compute_budget_with_jd({300, 0, 300}, 150, 256);
  CHECK(big.per_section == std::vector<int>{102, 0, 102});
  CHECK(big.jd == 51);

  CHECK_THROWS_AS(preprocess::compute_budget({1}, 0), DataError);
  CHECK_THROWS_AS(preprocess::compute_budget({-1}, 8), DataError);
  CHECK_THROWS_AS(preprocess::compute_budget_with_jd({1}, -1, 8), DataError);
}

TEST_CASE("budget soundness holds over random cases") {
  rng::Rng rng(404);
  for (int it = 0; it < 200; ++it) {
    const int n = rng.uniform_int(1, 8);
    std::vector<int> lengths;
    std::int64_t total = 0;
    for (int i = 0; i < n; ++i) {
      lengths.push_back(rng.uniform_int(0, 900));
      total += lengths.back();
    }
    const int cap = rng.uniform_int(1, 512);
    auto budget = preprocess::compute_budget(lengths, cap);
    CHECK(budget.total() <= cap);
    if (total <= cap) CHECK(budget.per_section == lengths);
  }
}

TEST_CASE("trim prepends [CLS] and respects max_len") {
  Resume resume = make_resume("t", {{SectionKind::kProfile, {"a", "b"}},
                                    {SectionKind::kSkills, {"c"}}});
  auto input = preprocess::trim(resume, 16);
  CHECK(input == TokenList{"[CLS]", "a", "b", "c"});

  // Oversized resume: budgets computed at max_len-1
  TokenList big(500, "x");
  Resume huge = make_resume("h", {{SectionKind::kWorkExperience, big},
                                  {SectionKind::kOthers, big}});
  auto trimmed = preprocess::trim(huge, 128);
  CHECK(static_cast<int>(trimmed.size()) <= 128);
  CHECK(trimmed.front() == "[CLS]");
  CHECK_THROWS_AS(preprocess::trim(resume, 1), DataError);
}

TEST_CASE("trim_with_jd appends the job description last") {
  Resume resume = make_resume("t", {{SectionKind::kProfile, {"a"}}});
  JobDescription jd{"j", CompetenceLabel::kCRC1, {"x", "y"}};
  auto input = preprocess::trim_with_jd(resume, jd, 32);
  CHECK(input == TokenList{"[CLS]", "a", "x", "y"});

  TokenList big(300, "r");
  Resume huge = make_resume("h", {{SectionKind::kWorkExperience, big}});
  JobDescription long_jd{"j2", CompetenceLabel::kCRC2, TokenList(300, "q")};
  auto shared = preprocess::trim_with_jd(huge, long_jd, 64);
  CHECK(static_cast<int>(shared.size()) <= 64);
  // both sides survive the shared budget
  CHECK(std::count(shared.begin(), shared.end(), "r") > 0);
  CHECK(std::count(shared.begin(), shared.end(), "q") > 0);
}

TEST_CASE("pruning stages match the frozen oracle") {
  auto df = oracle_df();
  REQUIRE(kOracleSection.size() == 26);

  // above the length: untouched
  CHECK(preprocess::prune_section_stages(kOracleSection, 30, df) == kOracleSection);
  CHECK(preprocess::prune_section_stages(kOracleSection, 26, df) == kOracleSection);

  // stage 1 only: stopwords drop 4 tokens -> 22
  const TokenList after_stage1 = {
      "alpha", "julia", "bravo", "kilo",  "charlie", "lima",  "alpha", "delta",
      "mike",  "echo",  "fox",   "nov",   "golf",    "oscar", "hotel", "papa",
      "india", "quebec", "romeo", "sierra", "tango",  "julia"};
  CHECK(preprocess::prune_section_stages(kOracleSection, 25, df) == after_stage1);

  // stage 2: top-5% {alpha} also dropped -> 20
  const TokenList after_stage2 = {
      "julia", "bravo", "kilo",  "charlie", "lima",  "delta", "mike",
      "echo",  "fox",   "nov",   "golf",    "oscar", "hotel", "papa",
      "india", "quebec", "romeo", "sierra", "tango", "julia"};
  CHECK(preprocess::prune_section_stages(kOracleSection, 20, df) == after_stage2);

  // stage 3: top-30% dropped -> 15, still above cap 10; guarantee truncates
  const TokenList after_stage3 = {
      "julia", "kilo",  "lima",  "mike",  "nov",    "golf",  "oscar", "hotel",
      "papa",  "india", "quebec", "romeo", "sierra", "tango", "julia"};
  CHECK(preprocess::prune_section_stages(kOracleSection, 10, df) == after_stage3);
  const TokenList truncated(after_stage3.begin(), after_stage3.begin() + 10);
  CHECK(preprocess::prune_section(kOracleSection, 10, df) == truncated);

  CHECK_THROWS_AS(preprocess::prune_section_stages(kOracleSection, -1, df), DataError);
}

TEST_CASE("pruning is an order-preserving subset within the cap") {
  auto df = oracle_df();
  const std::vector<std::string> pool = {"the", "alpha", "bravo", "julia", "tango",
                                         "of", "mike", "echo", "unseen"};
  rng::Rng rng(77);
  for (int it = 0; it < 100; ++it) {
    TokenList section;
    const int len = rng.uniform_int(0, 120);
    for (int i = 0; i < len; ++i)
      section.push_back(pool[rng.below(pool.size())]);
    const int cap = rng.uniform_int(0, 60);
    auto pruned = preprocess::prune_section(section, cap, df);
    CHECK(static_cast<int>(pruned.size()) <= cap);
    CHECK(is_subsequence(pruned, section));
    if (static_cast<int>(section.size()) <= cap) CHECK(pruned == section);
  }
}

TEST_CASE("chunking round-trips") {
  rng::Rng rng(88);
  for (int it = 0; it < 50; ++it) {
    const int len = rng.uniform_int(0, 200);
    TokenList section;
    for (int i = 0; i < len; ++i) section.push_back("t" + std::to_string(i));
    const int chunk_len = rng.uniform_int(1, 64);
    auto chunks = preprocess::chunk_section(section, chunk_len);
    CHECK(static_cast<int>(chunks.size()) ==
          preprocess::chunk_count(section.size(), chunk_len));
    TokenList joined;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      if (c + 1 < chunks.size())
        CHECK(static_cast<int>(chunks[c].size()) == chunk_len);
      else
        CHECK(!chunks[c].empty());
      joined.insert(joined.end(), chunks[c].begin(), chunks[c].end());
    }
    CHECK(joined == section);
  }
  CHECK(preprocess::chunk_section({}, 8).empty());
  CHECK_THROWS_AS(preprocess::chunk_section({"a"}, 0), DataError);
}

TEST_CASE("total_chunks sums per-section chunk counts") {
  Resume resume = make_resume("c", {{SectionKind::kProfile, TokenList(10, "p")},
                                    {SectionKind::kWorkExperience, TokenList(33, "w")}});
  CHECK(preprocess::total_chunks(resume, 16) == 1 + 3);
  CHECK(preprocess::total_chunks(Resume{}, 16) == 0);
}

TEST_CASE("pruning stats improve monotonically and render") {
  corpus::SynthSpec spec;
  spec.counts = {10, 10, 10, 10, 10};
  spec.seed = 21;
  auto data = corpus::generate_synthetic_corpus(spec);
  auto df = preprocess::build_df_table(data.resumes, preprocess::default_stopwords());
  auto stats = preprocess::pruning_stats(data.resumes, df, 32);
  CHECK(stats.cap == 32);
  for (int s = 0; s < kNumSections; ++s) {
    const auto& before = stats.before[static_cast<std::size_t>(s)];
    const auto& after = stats.after[static_cast<std::size_t>(s)];
    CHECK(before.count == after.count);
    if (before.count == 0) continue;
    CHECK(after.mean <= before.mean);
    CHECK(after.max <= before.max);
    CHECK(after.ratio_within >= before.ratio_within);
  }
  const std::string rendered = preprocess::render_pruning_stats(stats);
  CHECK(rendered.find("WorkExperience") != std::string::npos);
  const std::string csv = preprocess::pruning_stats_csv(stats);
  CHECK(csv.rfind("phase,section,count,mean,stddev,max,ratio_within\n", 0) == 0);
}

}  // TEST_SUITE
