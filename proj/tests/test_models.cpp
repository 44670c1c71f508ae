#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"

#include "crest/encoder.hpp"
#include "crest/errors.hpp"
#include "crest/models.hpp"
#include "crest/preprocess.hpp"
#include "test_util.hpp"

using namespace crest;
using crest::testutil::make_resume;
using crest::testutil::slurp;
using crest::testutil::spit;
using crest::testutil::TempDir;
using json = nlohmann::json;

namespace {

encoder::EncoderConfig tiny_config() {
  encoder::EncoderConfig config;
  config.hidden = 8;
  config.layers = 1;
  config.heads = 2;
  config.ff_dim = 16;
  config.max_len = 16;
  config.chunk_len = 4;
  return config;
}

struct Fixture {
  std::vector<Resume> resumes;
  std::vector<JobDescription> jobs;
  encoder::Vocabulary vocab;
  preprocess::DocFreqTable df;
  encoder::EncoderConfig config = tiny_config();

  Fixture() {
    resumes.push_back(make_resume(
        "r1",
        {{SectionKind::kProfile, {"seasoned", "nurse", "seeking", "clinic", "role"}},
         {SectionKind::kWorkExperience,
          {"ward", "rotation", "icu", "triage", "charting", "meds", "rounds", "audit", "intake"}},
         {SectionKind::kSkills, {"phlebotomy", "triage"}}},
        CompetenceLabel::kCRC2));
    resumes.push_back(make_resume(
        "r2", {{SectionKind::kEducation, {"bsn", "nursing", "school"}}}, CompetenceLabel::kNQ));
    jobs.push_back({"job-1", CompetenceLabel::kCRC2, {"clinic", "nurse", "triage", "meds"}});
    vocab = encoder::Vocabulary::build(resumes, jobs);
    df = preprocess::build_df_table(resumes, preprocess::default_stopwords());
  }
};

}  // namespace

TEST_SUITE("models") {

TEST_CASE("the twelve variants carry exact names in fixed order") {
  const std::vector<std::string> expected = {"Wr",    "P",       "P+I",       "C",
                                             "C+I",   "Wrb",     "P+I+J",     "P+I+J+A",
                                             "P+I+J+A-E", "C+I+J", "C+I+J+A", "C+I+J+A-E"};
  const auto& all = models::ModelVariant::all();
  REQUIRE(all.size() == expected.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].name() == expected[i]);
    CHECK(all[i].valid());
    CHECK(models::ModelVariant::parse(expected[i]) == all[i]);
  }

  const auto wr = models::ModelVariant::parse("Wr");
  CHECK(wr.base == models::BaseInput::kWhole);
  CHECK_FALSE(wr.is_t2());
  CHECK(wr.num_classes() == kNumLabels);
  CHECK_FALSE(wr.uses_units());
  CHECK_FALSE(wr.concat_jd());

  const auto wrb = models::ModelVariant::parse("Wrb");
  CHECK(wrb.is_t2());
  CHECK(wrb.num_classes() == 2);
  CHECK_FALSE(wrb.concat_jd());  // single trimmed sequence, no separate jd CLS

  const auto cija = models::ModelVariant::parse("C+I+J+A");
  CHECK(cija.base == models::BaseInput::kChunked);
  CHECK(cija.with_sections);
  CHECK(cija.with_jd);
  CHECK(cija.with_attention);
  CHECK_FALSE(cija.minus_embedding);
  CHECK(cija.concat_jd());
  CHECK(cija.num_classes() == 2);

  CHECK(models::ModelVariant::parse("P+I+J+A-E").minus_embedding);
  CHECK_THROWS_AS(models::ModelVariant::parse("C+J"), DataError);
  CHECK_THROWS_AS(models::ModelVariant::parse("wr"), DataError);
  CHECK_THROWS_AS(models::ModelVariant::parse(""), DataError);

  models::ModelVariant bogus;  // chunked base
  bogus.minus_embedding = true;  // -E without +A is not in the table
  CHECK_FALSE(bogus.valid());
}

TEST_CASE("init_model sizes the head and attention blocks per variant") {
  Fixture fx;
  auto t1 = models::init_model(models::ModelVariant::parse("C+I"), fx.config,
                               fx.vocab.size(), 7);
  CHECK(t1.head.weight.value.rows() == fx.config.hidden);
  CHECK(t1.head.weight.value.cols() == kNumLabels);
  CHECK_FALSE(t1.r2b.has_value());
  CHECK_FALSE(t1.b2r.has_value());

  auto t2 = models::init_model(models::ModelVariant::parse("C+I+J+A"), fx.config,
                               fx.vocab.size(), 7);
  CHECK(t2.head.weight.value.rows() == 2 * fx.config.hidden);
  CHECK(t2.head.weight.value.cols() == 2);
  REQUIRE(t2.r2b.has_value());
  REQUIRE(t2.b2r.has_value());
  CHECK(t2.r2b->wq.name == "r2b.wq");
  CHECK(t2.b2r->wo.name == "b2r.wo");
  CHECK(t2.tensors().size() == t1.tensors().size() + 16);  // two attention blocks

  auto wrb = models::init_model(models::ModelVariant::parse("Wrb"), fx.config,
                                fx.vocab.size(), 7);
  CHECK(wrb.head.weight.value.rows() == fx.config.hidden);  // no jd concat for Wrb

  auto again = models::init_model(models::ModelVariant::parse("C+I+J+A"), fx.config,
                                  fx.vocab.size(), 7);
  CHECK((t2.head.weight.value.array() == again.head.weight.value.array()).all());
  auto other = models::init_model(models::ModelVariant::parse("C+I+J+A"), fx.config,
                                  fx.vocab.size(), 8);
  CHECK_FALSE((t2.head.weight.value.array() == other.head.weight.value.array()).all());

  models::ModelVariant bogus;
  bogus.minus_embedding = true;
  CHECK_THROWS_AS(models::init_model(bogus, fx.config, fx.vocab.size(), 1), DataError);
}

TEST_CASE("build_units walks sections in order and respects the base input") {
  Fixture fx;
  const Resume& resume = fx.resumes[0];

  SUBCASE("pruned base gives one unit per nonempty section") {
    auto units = models::build_units(models::ModelVariant::parse("P+I"), resume, fx.df,
                                     fx.vocab, fx.config);
    REQUIRE(units.size() == 3);  // Profile, WorkExperience, Skills
    CHECK(units[0].section_index == 0);
    CHECK(units[1].section_index == 2);
    CHECK(units[2].section_index == 4);
    for (const auto& u : units) {
      CHECK(u.chunk_index == 0);
      CHECK(u.section_id == u.section_index);
      CHECK(static_cast<int>(u.token_ids.size()) <= fx.config.max_len - 1);
    }
    // short sections survive pruning verbatim
    CHECK(units[2].token_ids ==
          fx.vocab.ids_of(resume.sections[static_cast<std::size_t>(SectionKind::kSkills)]));
  }

  SUBCASE("chunked base cuts sections into length-L chunks that concatenate back") {
    auto units = models::build_units(models::ModelVariant::parse("C"), resume, fx.df,
                                     fx.vocab, fx.config);
    // Profile(5) -> 2 chunks, WorkExperience(9) -> 3 chunks, Skills(2) -> 1 chunk
    REQUIRE(units.size() == 6);
    std::vector<int> rebuilt;
    int expected_chunk = 0;
    for (const auto& u : units) {
      if (u.section_index == 2) {
        CHECK(u.chunk_index == expected_chunk++);
        rebuilt.insert(rebuilt.end(), u.token_ids.begin(), u.token_ids.end());
        CHECK(static_cast<int>(u.token_ids.size()) <= fx.config.chunk_len);
      }
    }
    CHECK(expected_chunk == 3);
    CHECK(rebuilt == fx.vocab.ids_of(
                         resume.sections[static_cast<std::size_t>(SectionKind::kWorkExperience)]));
  }

  SUBCASE("whole-input variants have no units") {
    CHECK_THROWS_AS(models::build_units(models::ModelVariant::parse("Wr"), resume, fx.df,
                                        fx.vocab, fx.config),
                    DataError);
  }
}

TEST_CASE("jd_input_ids prepends [CLSB] and truncates to the window") {
  Fixture fx;
  auto ids = models::jd_input_ids(fx.jobs[0], fx.vocab, fx.config);
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == encoder::kJdClsId);
  CHECK(ids[1] == fx.vocab.id_of("clinic"));

  JobDescription longjd{"j-long", CompetenceLabel::kCRC1,
                        TokenList(40, std::string("clinic"))};
  auto trimmed = models::jd_input_ids(longjd, fx.vocab, fx.config);
  CHECK(static_cast<int>(trimmed.size()) == fx.config.max_len);
}

TEST_CASE("forward_t1 produces five logits for every 5-way variant") {
  Fixture fx;
  for (const char* name : {"Wr", "P", "P+I", "C", "C+I"}) {
    CAPTURE(name);
    auto variant = models::ModelVariant::parse(name);
    auto params = models::init_model(variant, fx.config, fx.vocab.size(), 11);
    nn::Graph g;
    auto out = models::forward_t1(g, variant, fx.resumes[0], fx.df, fx.vocab, params);
    CHECK(g.value(out.logits).rows() == 1);
    CHECK(g.value(out.logits).cols() == kNumLabels);
    CHECK(g.value(out.logits).allFinite());
    if (variant.uses_units()) {
      CHECK(out.pooled >= 0);
      CHECK(out.unit_cls.size() >= 1);
    }
    auto v1 = models::logits_t1(variant, fx.resumes[0], fx.df, fx.vocab, params);
    auto v2 = models::logits_t1(variant, fx.resumes[0], fx.df, fx.vocab, params);
    CHECK((v1.array() == v2.array()).all());
    CHECK((g.value(out.logits).row(0).array() == v1.array()).all());
  }

  auto variant = models::ModelVariant::parse("C+I");
  auto params = models::init_model(variant, fx.config, fx.vocab.size(), 11);
  nn::Graph g;
  Resume empty;
  empty.applicant_id = "hollow";
  CHECK_THROWS_AS(models::forward_t1(g, variant, empty, fx.df, fx.vocab, params), DataError);
  auto t2variant = models::ModelVariant::parse("C+I+J");
  auto t2params = models::init_model(t2variant, fx.config, fx.vocab.size(), 11);
  CHECK_THROWS_AS(models::forward_t1(g, t2variant, fx.resumes[0], fx.df, fx.vocab, t2params),
                  DataError);
}

TEST_CASE("forward_t2 produces two logits for every matching variant") {
  Fixture fx;
  for (const char* name : {"Wrb", "P+I+J", "P+I+J+A", "P+I+J+A-E", "C+I+J", "C+I+J+A",
                           "C+I+J+A-E"}) {
    CAPTURE(name);
    auto variant = models::ModelVariant::parse(name);
    auto params = models::init_model(variant, fx.config, fx.vocab.size(), 13);
    nn::Graph g;
    auto out = models::forward_t2(g, variant, fx.resumes[0], fx.jobs[0], fx.df, fx.vocab, params);
    CHECK(g.value(out.logits).rows() == 1);
    CHECK(g.value(out.logits).cols() == 2);
    CHECK(g.value(out.logits).allFinite());
    if (variant.uses_units()) CHECK(out.jd_cls >= 0);
    auto v1 = models::logits_t2(variant, fx.resumes[0], fx.jobs[0], fx.df, fx.vocab, params);
    CHECK((g.value(out.logits).row(0).array() == v1.array()).all());
  }

  auto variant = models::ModelVariant::parse("C+I+J");
  auto params = models::init_model(variant, fx.config, fx.vocab.size(), 13);
  nn::Graph g;
  JobDescription hollow{"j-0", CompetenceLabel::kCRC1, {}};
  CHECK_THROWS_AS(
      models::forward_t2(g, variant, fx.resumes[0], hollow, fx.df, fx.vocab, params), DataError);
  auto t1variant = models::ModelVariant::parse("C+I");
  auto t1params = models::init_model(t1variant, fx.config, fx.vocab.size(), 13);
  CHECK_THROWS_AS(
      models::forward_t2(g, t1variant, fx.resumes[0], fx.jobs[0], fx.df, fx.vocab, t1params),
      DataError);
}

TEST_CASE("forward_units enforces the jd contract") {
  Fixture fx;
  auto variant = models::ModelVariant::parse("C+I+J");
  auto params = models::init_model(variant, fx.config, fx.vocab.size(), 3);
  auto units = models::build_units(variant, fx.resumes[0], fx.df, fx.vocab, fx.config);
  nn::Graph g;
  CHECK_THROWS_AS(models::forward_units(g, variant, units, nullptr, params), DataError);

  auto t1variant = models::ModelVariant::parse("C+I");
  auto t1params = models::init_model(t1variant, fx.config, fx.vocab.size(), 3);
  const auto jd_ids = models::jd_input_ids(fx.jobs[0], fx.vocab, fx.config);
  CHECK_THROWS_AS(models::forward_units(g, t1variant, units, &jd_ids, t1params), DataError);
  CHECK_THROWS_AS(models::forward_units(g, t1variant, {}, nullptr, t1params), DataError);
}

TEST_CASE("section identity reaches the pool only through the [SECi]/section embedding") {
  Fixture fx;
  auto with_sections = models::ModelVariant::parse("C+I");
  auto without = models::ModelVariant::parse("C");
  auto params_i = models::init_model(with_sections, fx.config, fx.vocab.size(), 17);
  auto params_c = models::init_model(without, fx.config, fx.vocab.size(), 17);

  auto units = models::build_units(with_sections, fx.resumes[0], fx.df, fx.vocab, fx.config);
  REQUIRE(units.size() >= 2);
  auto permuted = units;
  // move every unit's identity to a different section
  for (auto& u : permuted) u.section_id = (u.section_id + 1) % kNumSections;

  nn::Graph g1, g2;
  auto base_i = models::forward_units(g1, with_sections, units, nullptr, params_i);
  auto perm_i = models::forward_units(g2, with_sections, permuted, nullptr, params_i);
  const double delta_i = (g1.value(base_i.logits) - g2.value(perm_i.logits))
                             .cwiseAbs()
                             .maxCoeff();
  CHECK(delta_i > 1e-6);

  nn::Graph g3, g4;
  auto base_c = models::forward_units(g3, without, units, nullptr, params_c);
  auto perm_c = models::forward_units(g4, without, permuted, nullptr, params_c);
  CHECK((g3.value(base_c.logits).array() == g4.value(perm_c.logits).array()).all());
}

TEST_CASE("minus-embedding pooling differs from plus-attention by the CLS sum") {
  Fixture fx;
  auto plus = models::ModelVariant::parse("C+I+J+A");
  auto minus = models::ModelVariant::parse("C+I+J+A-E");
  auto params_plus = models::init_model(plus, fx.config, fx.vocab.size(), 23);
  auto params_minus = models::init_model(minus, fx.config, fx.vocab.size(), 23);
  // same seed + same tensor layout -> identical parameter values by construction
  auto plus_tensors = params_plus.tensors();
  auto minus_tensors = params_minus.tensors();
  REQUIRE(plus_tensors.size() == minus_tensors.size());
  for (std::size_t i = 0; i < plus_tensors.size(); ++i) {
    REQUIRE(plus_tensors[i]->name == minus_tensors[i]->name);
    REQUIRE((plus_tensors[i]->value.array() == minus_tensors[i]->value.array()).all());
  }

  auto units = models::build_units(plus, fx.resumes[0], fx.df, fx.vocab, fx.config);
  const auto jd_ids = models::jd_input_ids(fx.jobs[0], fx.vocab, fx.config);
  nn::Graph g1, g2;
  auto out_plus = models::forward_units(g1, plus, units, &jd_ids, params_plus);
  auto out_minus = models::forward_units(g2, minus, units, &jd_ids, params_minus);

  nn::Matrix cls_sum = nn::Matrix::Zero(1, fx.config.hidden);
  for (auto id : out_plus.unit_cls) cls_sum += g1.value(id);
  const nn::Matrix diff = g1.value(out_plus.pooled) - g2.value(out_minus.pooled);
  CHECK((diff - cls_sum).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("argmax picks the first of tied maxima") {
  Eigen::RowVectorXd v(4);
  v << 0.5, 2.0, 2.0, -1.0;
  CHECK(models::argmax(v) == 1);
  v << -3.0, -3.0, -3.0, -3.0;
  CHECK(models::argmax(v) == 0);
  CHECK_THROWS_AS(models::argmax(Eigen::RowVectorXd()), DataError);
}

TEST_CASE("checkpoints round-trip every tensor bitwise") {
  Fixture fx;
  TempDir dir("ckpt");
  auto variant = models::ModelVariant::parse("C+I+J+A");
  auto params = models::init_model(variant, fx.config, fx.vocab.size(), 29);
  const auto path = dir / "model.ckpt";
  models::save_checkpoint(path, params, fx.vocab, fx.df);

  auto ckpt = models::load_checkpoint(path);
  CHECK(ckpt.params.variant == variant);
  CHECK(ckpt.params.enc.config.hidden == fx.config.hidden);
  CHECK(ckpt.params.enc.config.chunk_len == fx.config.chunk_len);
  CHECK(ckpt.vocab.tokens() == fx.vocab.tokens());
  CHECK(preprocess::save_df_json(ckpt.df) == preprocess::save_df_json(fx.df));

  auto orig = params.tensors();
  auto back = ckpt.params.tensors();
  REQUIRE(orig.size() == back.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CAPTURE(orig[i]->name);
    CHECK(orig[i]->name == back[i]->name);
    CHECK((orig[i]->value.array() == back[i]->value.array()).all());
  }

  // loaded checkpoints predict identically
  auto before = models::logits_t2(variant, fx.resumes[0], fx.jobs[0], fx.df, fx.vocab, params);
  auto after = models::logits_t2(ckpt.params.variant, fx.resumes[0], fx.jobs[0], ckpt.df,
                                 ckpt.vocab, ckpt.params);
  CHECK((before.array() == after.array()).all());
}

TEST_CASE("checkpoint loader rejects damaged containers") {
  Fixture fx;
  TempDir dir("ckpt-bad");
  auto variant = models::ModelVariant::parse("P+I");
  auto params = models::init_model(variant, fx.config, fx.vocab.size(), 31);
  const auto path = dir / "model.ckpt";
  models::save_checkpoint(path, params, fx.vocab, fx.df);
  const json good = json::parse(slurp(path));

  CHECK_THROWS_AS(models::load_checkpoint(dir / "absent.ckpt"), DataError);

  spit(dir / "garbage.ckpt", "not json at all");
  CHECK_THROWS_AS(models::load_checkpoint(dir / "garbage.ckpt"), ParseError);

  json bad = good;
  bad["format"] = "something-else";
  spit(dir / "format.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "format.ckpt"), ParseError);

  bad = good;
  bad["version"] = 2;
  spit(dir / "version.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "version.ckpt"), ParseError);

  bad = good;
  bad["variant"] = "Q+Z";
  spit(dir / "variant.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "variant.ckpt"), DataError);

  bad = good;
  bad["tensors"].erase("head.bias");
  spit(dir / "missing.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "missing.ckpt"), ParseError);

  bad = good;
  bad["tensors"]["stowaway"] = bad["tensors"]["head.bias"];
  spit(dir / "extra.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "extra.ckpt"), ParseError);

  bad = good;
  bad["tensors"]["head.bias"]["cols"] = 99;
  spit(dir / "shape.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "shape.ckpt"), ParseError);

  bad = good;
  bad["tensors"]["head.bias"]["data"].push_back(0.0);
  spit(dir / "length.ckpt", bad.dump());
  CHECK_THROWS_AS(models::load_checkpoint(dir / "length.ckpt"), ParseError);
}

}  // TEST_SUITE
