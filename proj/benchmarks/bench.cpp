// Micro-benchmarks over the hot paths: token budgeting, pruning, chunking,
// sequence encoding, and full variant forward passes.

#include <benchmark/benchmark.h>

#include "crest/corpus.hpp"
#include "crest/encoder.hpp"
#include "crest/models.hpp"
#include "crest/nn/graph.hpp"
#include "crest/preprocess.hpp"

namespace {

using namespace crest;

struct Fixture {
  corpus::Corpus data;
  encoder::Vocabulary vocab;
  preprocess::DocFreqTable df;
  encoder::EncoderConfig config;

  Fixture() {
    corpus::SynthSpec spec;
    spec.counts = {8, 8, 8, 8, 8};
    spec.seed = 7;
    data = corpus::generate_synthetic_corpus(spec);
    vocab = encoder::Vocabulary::build(data.resumes, data.jobs);
    df = preprocess::build_df_table(data.resumes, preprocess::default_stopwords());
    config.hidden = 32;
    config.layers = 2;
    config.heads = 4;
    config.ff_dim = 64;
    config.max_len = 64;
    config.chunk_len = 16;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void bm_compute_budget(benchmark::State& state) {
  std::vector<int> lengths = {120, 45, 310, 80, 15, 220};
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess::compute_budget(lengths, 128));
  }
}
BENCHMARK(bm_compute_budget);

void bm_trim(benchmark::State& state) {
  const Fixture& f = fixture();
  const Resume& resume = f.data.resumes.front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess::trim(resume, 128));
  }
}
BENCHMARK(bm_trim);

void bm_prune_section(benchmark::State& state) {
  Fixture& f = fixture();
  const TokenList& section = f.data.resumes.front().section(SectionKind::kWorkExperience);
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess::prune_section(section, 31, f.df));
  }
}
BENCHMARK(bm_prune_section);

void bm_chunk_section(benchmark::State& state) {
  Fixture& f = fixture();
  const TokenList& section = f.data.resumes.front().section(SectionKind::kWorkExperience);
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess::chunk_section(section, 16));
  }
}
BENCHMARK(bm_chunk_section);

void bm_encode_sequence(benchmark::State& state) {
  Fixture& f = fixture();
  models::ModelVariant variant = models::ModelVariant::parse("Wr");
  models::ModelParams params = models::init_model(variant, f.config, f.vocab.size(), 11);
  std::vector<int> ids = {static_cast<int>(encoder::kClsId)};
  for (int i = 0; i < f.config.max_len - 1; ++i)
    ids.push_back(encoder::kNumReservedIds + (i % 50));
  for (auto _ : state) {
    nn::Graph g;
    benchmark::DoNotOptimize(encoder::encode_sequence(g, ids, params.enc));
  }
}
BENCHMARK(bm_encode_sequence);

void bm_forward_variant(benchmark::State& state, const char* name) {
  Fixture& f = fixture();
  models::ModelVariant variant = models::ModelVariant::parse(name);
  models::ModelParams params = models::init_model(variant, f.config, f.vocab.size(), 11);
  const Resume& resume = f.data.resumes.front();
  const JobDescription& jd = f.data.jobs.front();
  for (auto _ : state) {
    nn::Graph g;
    if (variant.is_t2()) {
      benchmark::DoNotOptimize(
          models::forward_t2(g, variant, resume, jd, f.df, f.vocab, params));
    } else {
      benchmark::DoNotOptimize(models::forward_t1(g, variant, resume, f.df, f.vocab, params));
    }
  }
}
BENCHMARK_CAPTURE(bm_forward_variant, whole, "Wr");
BENCHMARK_CAPTURE(bm_forward_variant, pruned_sections, "P+I");
BENCHMARK_CAPTURE(bm_forward_variant, chunked_sections, "C+I");
BENCHMARK_CAPTURE(bm_forward_variant, matching_attention, "C+I+J+A");

void bm_backward(benchmark::State& state) {
  Fixture& f = fixture();
  models::ModelVariant variant = models::ModelVariant::parse("C+I");
  models::ModelParams params = models::init_model(variant, f.config, f.vocab.size(), 11);
  const Resume& resume = f.data.resumes.front();
  for (auto _ : state) {
    nn::Graph g;
    models::Forward fwd = models::forward_t1(g, variant, resume, f.df, f.vocab, params);
    nn::NodeId loss = g.cross_entropy(fwd.logits, 0);
    g.backward(loss);
    benchmark::DoNotOptimize(params.enc.tok_emb.grad);
  }
}
BENCHMARK(bm_backward);

}  // namespace

BENCHMARK_MAIN();
