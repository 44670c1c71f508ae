#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crest/encoder.hpp"
#include "crest/models.hpp"
#include "crest/preprocess.hpp"
#include "crest/types.hpp"

namespace crest::training {

struct TrainConfig {
  double lr = 1e-3;       // desk-scale default; published-scale runs used 2e-5
  double momentum = 0.9;
  bool adam = false;      // adaptive optimizer behind a flag
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 20;
  int grad_accum = 1;     // optimizer step every this many batches
  // Batch size for a group with total chunk count K: first entry whose
  // max-K bound covers K; 1 beyond the last bound.
  std::vector<std::pair<int, int>> batch_schedule = {{4, 8}, {8, 4}, {16, 2}};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  // Stop a seed's run once the end-of-epoch training accuracy reaches this.
  std::optional<double> early_stop_trn_acc;
  encoder::EncoderConfig enc;

  void validate() const;
};

// key=value lines (# comments) or a JSON object; keys: lr, momentum,
// optimizer (sgd|adam), adam_beta1/2, adam_eps, epochs, grad_accum,
// batch_schedule ("4:8,8:4,16:2"), seeds ("1,2,3"), early_stop_trn_acc,
// hidden, layers, heads, ff_dim, max_len, chunk_len.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
void set_config_key(TrainConfig& config, const std::string& key, const std::string& value);
// CREST_<KEY> environment variables override any config key.
void apply_env_overrides(TrainConfig& config);

int batch_size_for(const TrainConfig& config, int chunk_count);

struct Batch {
  std::vector<int> example_indices;
  int chunk_count = 0;  // shared K of every member
};

// Groups example indices by K and cuts each group into schedule-sized
// batches; every index lands in exactly one batch. Group order follows
// ascending K; indices keep the order given.
std::vector<Batch> batch_by_chunk_count(const std::vector<int>& chunk_counts,
                                        const TrainConfig& config);

// Softmax + negative log likelihood, independent of the graph op (used to
// cross-check it and by evaluation passes).
double cross_entropy(const Eigen::RowVectorXd& logits, int gold);

// One supervised example; jd is null for the 5-way task.
struct Example {
  const Resume* resume = nullptr;
  const JobDescription* jd = nullptr;
  int gold = 0;  // label index, or 0=N / 1=Y
};

// The batching key: chunks for chunked bases, non-empty sections for pruned,
// 1 for whole-input variants.
int chunk_key(const models::ModelVariant& variant, const Resume& resume,
              const encoder::EncoderConfig& config);

struct EpochMetrics {
  int epoch = 0;            // 0 = before any update
  std::string split;        // "trn" | "dev"
  double accuracy = 0.0;
  double loss = 0.0;        // mean per-example cross-entropy
  std::uint64_t seed = 0;
};

// Header "epoch,split,accuracy,loss,seed" + fixed-precision rows.
std::string metrics_csv(const std::vector<EpochMetrics>& rows);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<int> predictions;
};

// Full forward pass over `examples` with the current parameters.
EvalResult evaluate(const models::ModelVariant& variant, const std::vector<Example>& examples,
                    const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                    models::ModelParams& params);

struct SeedResult {
  std::uint64_t seed = 0;
  models::ModelParams best_params;  // deep copy at the best-DEV epoch
  double best_dev_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<EpochMetrics> metrics;
};

// One seed: momentum-SGD (or Adam) over K-homogeneous batches with gradient
// accumulation; epoch-0 metrics row records the untrained model; best-DEV
// checkpoint retained (ties keep the earlier epoch). NumericError on
// non-finite loss.
SeedResult train_one_seed(const models::ModelVariant& variant,
                          const std::vector<Example>& trn, const std::vector<Example>& dev,
                          const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                          const TrainConfig& config, std::uint64_t seed);

struct TrainResult {
  std::vector<SeedResult> seeds;
  std::size_t best_index = 0;  // highest DEV accuracy; ties keep earlier seed
  std::vector<double> dev_accuracies;
};

TrainResult train(const models::ModelVariant& variant, const std::vector<Example>& trn,
                  const std::vector<Example>& dev, const preprocess::DocFreqTable& df,
                  const encoder::Vocabulary& vocab, const TrainConfig& config);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Central finite differences (epsilon default 1e-5) against the analytic
// gradients of the summed loss over `examples`. At least `min_samples`
// coordinates per tensor (all of them for small tensors). `tensor_filter`
// restricts checking to names containing the substring; `corrupt_tensor`
// negates that tensor's analytic gradient first — a self-test hook proving
// the checker catches wrong gradients. Differences below 1e-9 in absolute
// value count as zero error (finite-difference noise floor).
GradCheckResult grad_check(const models::ModelVariant& variant,
                           const std::vector<Example>& examples,
                           const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                           const TrainConfig& config, std::uint64_t seed,
                           double epsilon = 1e-5, int min_samples = 100,
                           const std::string& tensor_filter = "",
                           const std::string& corrupt_tensor = "");

}  // namespace crest::training
