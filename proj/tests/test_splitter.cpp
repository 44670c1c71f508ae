#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"

#include "crest/corpus.hpp"
#include "crest/errors.hpp"
#include "crest/splitter.hpp"
#include "test_util.hpp"

using namespace crest;
using crest::testutil::make_resume;
using crest::testutil::slurp;
using crest::testutil::spit;
using crest::testutil::TempDir;
using json = nlohmann::json;

namespace {

std::vector<Resume> resumes_with_counts(const std::array<int, kNumLabels>& counts) {
  std::vector<Resume> out;
  int serial = 0;
  for (int label = 0; label < kNumLabels; ++label) {
    for (int i = 0; i < counts[static_cast<std::size_t>(label)]; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "a%05d", serial++);
      out.push_back(make_resume(id, {{SectionKind::kSkills, {"tok"}}},
                                static_cast<CompetenceLabel>(label)));
    }
  }
  return out;
}

std::map<CompetenceLabel, splitter::SetCounts> label_counts(
    const splitter::SplitBundle& bundle, const std::vector<Resume>& resumes) {
  std::map<std::string, CompetenceLabel> labels;
  for (const auto& r : resumes) labels[r.applicant_id] = *r.annotated_label;
  std::map<CompetenceLabel, splitter::SetCounts> out;
  for (const auto& id : bundle.trn) out[labels.at(id)].trn++;
  for (const auto& id : bundle.dev) out[labels.at(id)].dev++;
  for (const auto& id : bundle.tst) out[labels.at(id)].tst++;
  return out;
}

}  // namespace

TEST_SUITE("splitter") {

TEST_CASE("ratio parsing and validation") {
  auto r = splitter::SplitRatios::parse("75:10:15");
  CHECK(r.trn == doctest::Approx(0.75));
  CHECK(r.dev == doctest::Approx(0.10));
  CHECK(r.tst == doctest::Approx(0.15));
  auto r2 = splitter::SplitRatios::parse("80:10:10");
  CHECK(r2.trn == doctest::Approx(0.80));

  CHECK_THROWS_AS(splitter::SplitRatios::parse("75:25"), DataError);
  CHECK_THROWS_AS(splitter::SplitRatios::parse("75:10:16"), DataError);
  CHECK_THROWS_AS(splitter::SplitRatios::parse("a:b:c"), DataError);
  CHECK_THROWS_AS(splitter::SplitRatios::parse(""), DataError);

  splitter::SplitRatios bad;
  bad.trn = 0.0;
  bad.dev = 0.5;
  bad.tst = 0.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = {};
  bad.tst = 0.2;  // sums to 1.05
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("per-label allocation matches the frozen largest-remainder table") {
  // Label totals 475/2014/382/524/30 at 75:10:15. Expected per-set counts:
  // floor allocation plus one extra seat per label by largest remainder,
  // remainder ties resolved toward TRN then DEV. Worked out by hand:
  //   475  -> 356/48/71     2014 -> 1511/201/302   382 -> 287/38/57
  //   524  -> 393/52/79     30   -> 23/3/4
  const std::array<int, kNumLabels> totals = {475, 2014, 382, 524, 30};
  const auto resumes = resumes_with_counts(totals);
  const auto bundle = splitter::split_t1(resumes, splitter::SplitRatios{}, 42);
  CHECK(bundle.task == "t1");
  CHECK(bundle.seed == 42);

  const auto by_label = label_counts(bundle, resumes);
  const std::array<std::array<int, 3>, kNumLabels> expected = {{
      {356, 48, 71},
      {1511, 201, 302},
      {287, 38, 57},
      {393, 52, 79},
      {23, 3, 4},
  }};
  for (int label = 0; label < kNumLabels; ++label) {
    const auto& got = by_label.at(static_cast<CompetenceLabel>(label));
    CAPTURE(label);
    CHECK(got.trn == expected[static_cast<std::size_t>(label)][0]);
    CHECK(got.dev == expected[static_cast<std::size_t>(label)][1]);
    CHECK(got.tst == expected[static_cast<std::size_t>(label)][2]);
    CHECK(got.total() == totals[static_cast<std::size_t>(label)]);
  }

  // disjoint and exhaustive
  std::set<std::string> seen;
  for (const auto* ids : {&bundle.trn, &bundle.dev, &bundle.tst})
    for (const auto& id : *ids) CHECK(seen.insert(id).second);
  CHECK(seen.size() == resumes.size());

  const auto report = splitter::verify_split(bundle, resumes, {}, {});
  CHECK(report.ok);
  CHECK(report.violations.empty());
  CHECK(report.sizes.total() == static_cast<int>(resumes.size()));
  CHECK(report.trn_ratio == doctest::Approx(0.75).epsilon(0.01));
  CHECK(report.max_cell_delta <= 0.02);
}

TEST_CASE("labels with fewer than three resumes stay in TRN") {
  const auto resumes = resumes_with_counts({2, 10, 1, 0, 10});
  const auto bundle = splitter::split_t1(resumes, splitter::SplitRatios{}, 1);
  const auto by_label = label_counts(bundle, resumes);
  CHECK(by_label.at(CompetenceLabel::kNQ).trn == 2);
  CHECK(by_label.at(CompetenceLabel::kNQ).dev == 0);
  CHECK(by_label.at(CompetenceLabel::kNQ).tst == 0);
  CHECK(by_label.at(CompetenceLabel::kCRC2).trn == 1);
  CHECK(by_label.at(CompetenceLabel::kCRC2).total() == 1);
}

TEST_CASE("split_t1 rejects bad input") {
  CHECK_THROWS_AS(splitter::split_t1({}, splitter::SplitRatios{}, 1), DataError);
  std::vector<Resume> resumes = {make_resume("x", {{SectionKind::kSkills, {"tok"}}})};
  CHECK_THROWS_AS(splitter::split_t1(resumes, splitter::SplitRatios{}, 1), DataError);
}

TEST_CASE("split_t1 is seed-deterministic and seed-sensitive") {
  const auto resumes = resumes_with_counts({30, 30, 30, 30, 30});
  const auto a = splitter::split_t1(resumes, splitter::SplitRatios{}, 9);
  const auto b = splitter::split_t1(resumes, splitter::SplitRatios{}, 9);
  CHECK(a.trn == b.trn);
  CHECK(a.dev == b.dev);
  CHECK(a.tst == b.tst);
  const auto c = splitter::split_t1(resumes, splitter::SplitRatios{}, 10);
  CHECK(a.trn != c.trn);  // same sizes, different membership
  CHECK(a.trn.size() == c.trn.size());
}

TEST_CASE("verify_split reports violations instead of throwing") {
  const auto resumes = resumes_with_counts({5, 5, 5, 5, 5});
  auto bundle = splitter::split_t1(resumes, splitter::SplitRatios{}, 3);

  SUBCASE("duplicated id across sets") {
    bundle.dev.push_back(bundle.trn.front());
    const auto report = splitter::verify_split(bundle, resumes, {}, {});
    CHECK_FALSE(report.ok);
    CHECK_FALSE(report.violations.empty());
  }
  SUBCASE("id missing from every set") {
    bundle.trn.pop_back();
    const auto report = splitter::verify_split(bundle, resumes, {}, {});
    CHECK_FALSE(report.ok);
  }
  SUBCASE("unknown id") {
    bundle.tst.push_back("phantom");
    const auto report = splitter::verify_split(bundle, resumes, {}, {});
    CHECK_FALSE(report.ok);
  }
}

TEST_CASE("split_t2 keeps every applicant inside one set") {
  corpus::SynthSpec spec;
  // large enough that the per-cell delta bound below is statistically meaningful
  spec.counts = {150, 150, 150, 150, 150};
  spec.seed = 77;
  const auto data = corpus::generate_synthetic_corpus(spec);
  REQUIRE_FALSE(data.applications.empty());

  const auto bundle =
      splitter::split_t2(data.applications, data.resumes, data.jobs, splitter::SplitRatios{}, 5);
  CHECK(bundle.task == "t2");

  // id sets are disjoint and cover all applications
  std::set<std::string> seen;
  for (const auto* ids : {&bundle.trn, &bundle.dev, &bundle.tst})
    for (const auto& id : *ids) CHECK(seen.insert(id).second);
  CHECK(seen.size() == data.applications.size());

  // applicant atomicity: no applicant shows up in two different sets
  std::map<std::string, int> applicant_set;
  int set_index = 0;
  for (const auto* ids : {&bundle.trn, &bundle.dev, &bundle.tst}) {
    for (const auto& id : *ids) {
      const auto applicant = id.substr(0, id.find('/'));
      const auto [it, inserted] = applicant_set.emplace(applicant, set_index);
      if (!inserted) CHECK(it->second == set_index);
    }
    ++set_index;
  }

  const auto report = splitter::verify_split(bundle, data.resumes, data.jobs, data.applications);
  CHECK(report.ok);
  CHECK(std::abs(report.trn_ratio - 0.75) <= 0.05);
  CHECK(report.max_cell_delta <= 0.05);
  // cells are keyed by level and match flag
  CHECK_FALSE(report.cells.empty());
  for (const auto& [key, counts] : report.cells) {
    CHECK((key.find("|Y") != std::string::npos || key.find("|N") != std::string::npos));
    CHECK(counts.total() > 0);
  }

  const auto again =
      splitter::split_t2(data.applications, data.resumes, data.jobs, splitter::SplitRatios{}, 5);
  CHECK(bundle.trn == again.trn);
  CHECK(bundle.dev == again.dev);
  CHECK(bundle.tst == again.tst);
}

TEST_CASE("split_t2 input validation") {
  corpus::SynthSpec spec;
  spec.counts = {4, 4, 4, 4, 4};
  spec.seed = 3;
  const auto data = corpus::generate_synthetic_corpus(spec);
  CHECK_THROWS_AS(
      splitter::split_t2({}, data.resumes, data.jobs, splitter::SplitRatios{}, 1), DataError);
  CHECK_THROWS_AS(splitter::split_t2(data.applications, data.resumes, data.jobs,
                                     splitter::SplitRatios{}, 1, 0.0),
                  DataError);
  auto orphaned = data.applications;
  orphaned.push_back({"nobody", data.jobs[0].job_id, true});
  CHECK_THROWS_AS(splitter::split_t2(orphaned, data.resumes, data.jobs,
                                     splitter::SplitRatios{}, 1),
                  DataError);
}

TEST_CASE("manifests round-trip through disk") {
  TempDir dir("manifest");
  const auto resumes = resumes_with_counts({10, 10, 10, 10, 10});
  const auto bundle = splitter::split_t1(resumes, splitter::SplitRatios{}, 21);
  const auto report = splitter::verify_split(bundle, resumes, {}, {});
  const auto path = dir / "split.json";
  splitter::save_manifest(path, bundle, report);

  const json j = json::parse(slurp(path));
  for (const char* key : {"task", "seed", "trn", "dev", "tst", "report"}) CHECK(j.contains(key));

  const auto back = splitter::load_manifest(path);
  CHECK(back.task == bundle.task);
  CHECK(back.seed == bundle.seed);
  CHECK(back.trn == bundle.trn);
  CHECK(back.dev == bundle.dev);
  CHECK(back.tst == bundle.tst);

  CHECK_THROWS_AS(splitter::load_manifest(dir / "absent.json"), DataError);
  spit(dir / "garbage.json", "][");
  CHECK_THROWS_AS(splitter::load_manifest(dir / "garbage.json"), ParseError);
  json missing = j;
  missing.erase("dev");
  spit(dir / "missing.json", missing.dump());
  CHECK_THROWS_AS(splitter::load_manifest(dir / "missing.json"), ParseError);
  json badtask = j;
  badtask["task"] = "t3";
  spit(dir / "badtask.json", badtask.dump());
  CHECK_THROWS_AS(splitter::load_manifest(dir / "badtask.json"), ParseError);
}

TEST_CASE("manifest ids resolve back to corpus rows in order") {
  const auto resumes = resumes_with_counts({3, 3, 3, 3, 3});
  const std::vector<std::string> ids = {resumes[4].applicant_id, resumes[0].applicant_id};
  const auto rows = splitter::resumes_for(ids, resumes);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]->applicant_id == resumes[4].applicant_id);
  CHECK(rows[1]->applicant_id == resumes[0].applicant_id);
  CHECK_THROWS_AS(splitter::resumes_for({"phantom"}, resumes), DataError);

  corpus::SynthSpec spec;
  spec.counts = {4, 4, 4, 4, 4};
  spec.seed = 8;
  const auto data = corpus::generate_synthetic_corpus(spec);
  const auto& app = data.applications.front();
  const auto examples = splitter::applications_for({app.id()}, data);
  REQUIRE(examples.size() == 1);
  CHECK(examples[0].resume->applicant_id == app.applicant_id);
  CHECK(examples[0].jd->job_id == app.job_id);
  CHECK(examples[0].match == app.match);
  CHECK_THROWS_AS(splitter::applications_for({"ghost/j-x"}, data), DataError);
}

}  // TEST_SUITE
