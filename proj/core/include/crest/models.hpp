#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crest/encoder.hpp"
#include "crest/preprocess.hpp"
#include "crest/types.hpp"

namespace crest::models {

// How the resume text reaches the encoder: one trimmed sequence, one pruned
// sequence per section, or length-L chunks of every section.
enum class BaseInput { kWhole, kPruned, kChunked };

// One of the twelve model shapes. `with_jd` doubles as the task switch:
// variants that see a job description decide match/no-match (2 classes),
// the rest label competence (5 classes).
struct ModelVariant {
  BaseInput base = BaseInput::kChunked;
  bool with_sections = false;   // add the section-identity embedding per unit
  bool with_jd = false;         // job-description input (binary matching task)
  bool with_attention = false;  // resume<->jd cross-attention terms
  bool minus_embedding = false; // ablation: drop unit CLS terms from the pool

  bool is_t2() const { return with_jd; }
  int num_classes() const { return with_jd ? 2 : kNumLabels; }
  // 2h when the jd CLS embedding is concatenated ahead of the pooled vector.
  bool concat_jd() const { return with_jd && base != BaseInput::kWhole; }
  bool uses_units() const { return base != BaseInput::kWhole; }
  bool valid() const;

  std::string name() const;
  static ModelVariant parse(const std::string& name);  // DataError on unknown
  static const std::vector<ModelVariant>& all();       // the twelve, fixed order

  bool operator==(const ModelVariant&) const = default;
};

// Final affine map onto class logits; softmax lives in the loss/eval code.
struct DecoderHead {
  nn::Parameter weight;  // input_dim x num_classes
  nn::Parameter bias;    // 1 x num_classes
  std::vector<nn::Parameter*> tensors() { return {&weight, &bias}; }
};

struct ModelParams {
  ModelVariant variant;
  encoder::EncoderParams enc;
  std::optional<encoder::AttentionParams> r2b;  // resume-to-jd attention
  std::optional<encoder::AttentionParams> b2r;  // jd-to-resume attention
  DecoderHead head;

  std::vector<nn::Parameter*> tensors();  // stable, documented order
};

// Fresh parameters for a variant; every random draw comes from `seed`.
ModelParams init_model(const ModelVariant& variant, const encoder::EncoderConfig& config,
                       int vocab_size, std::uint64_t seed);

// One encoder input: a pruned section (chunk_index 0) or a single chunk.
// section_index/chunk_index locate the unit in the resume and fix the pooling
// order; section_id picks the section-identity embedding (and the [SECi] CLS
// for pruned units) and normally equals section_index.
struct Unit {
  int section_index = 0;
  int chunk_index = 0;
  int section_id = 0;
  std::vector<int> token_ids;  // content only; the CLS id is prepended later
};

// Units in section-major, chunk-minor order. Pruned bases prune each section
// to max_len-1 (CLS slot reserved); chunked bases cut raw sections into
// length-L chunks. Empty sections produce no units.
std::vector<Unit> build_units(const ModelVariant& variant, const Resume& resume,
                              const preprocess::DocFreqTable& df,
                              const encoder::Vocabulary& vocab,
                              const encoder::EncoderConfig& config);

// Graph nodes a forward pass exposes for inspection and tests.
struct Forward {
  nn::NodeId logits = -1;
  nn::NodeId pooled = -1;             // fused resume vector (unit-based variants)
  std::vector<nn::NodeId> unit_cls;   // per-unit CLS embeddings, pooling order
  nn::NodeId jd_cls = -1;             // [CLSB] embedding (jd variants)
};

// logits = e * W + b for a 1 x input_dim embedding.
nn::NodeId decode(nn::Graph& g, nn::NodeId embedding, DecoderHead& head);

// Cross-attention readouts: R2B queries the chunk sequence against the jd
// and is read at the chunk CLS row; B2R queries the jd against the chunk and
// is read at the [CLSB] row. Both return 1 x h.
nn::NodeId cross_attention_r2b(nn::Graph& g, nn::NodeId chunk_seq, nn::NodeId jd_seq,
                               ModelParams& params);
nn::NodeId cross_attention_b2r(nn::Graph& g, nn::NodeId chunk_seq, nn::NodeId jd_seq,
                               ModelParams& params);

// Shared fusion path over prebuilt units. `jd_ids` must be null for 5-way
// variants and non-null for jd variants. Pooling accumulates the per-unit
// fused vectors sequentially in the order given.
Forward forward_units(nn::Graph& g, const ModelVariant& variant, const std::vector<Unit>& units,
                      const std::vector<int>* jd_ids, ModelParams& params,
                      encoder::EncodeTrace* trace = nullptr);

// Competence-level forward (5 logits). DataError on an all-empty resume or a
// jd-bearing variant.
Forward forward_t1(nn::Graph& g, const ModelVariant& variant, const Resume& resume,
                   const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                   ModelParams& params, encoder::EncodeTrace* trace = nullptr);

// Match/no-match forward (2 logits). DataError on empty resume or empty jd.
Forward forward_t2(nn::Graph& g, const ModelVariant& variant, const Resume& resume,
                   const JobDescription& jd, const preprocess::DocFreqTable& df,
                   const encoder::Vocabulary& vocab, ModelParams& params,
                   encoder::EncodeTrace* trace = nullptr);

// [CLSB] + jd tokens, head-truncated to the encoder window.
std::vector<int> jd_input_ids(const JobDescription& jd, const encoder::Vocabulary& vocab,
                              const encoder::EncoderConfig& config);

// Evaluation helpers: run a throwaway graph and return detached logits.
Eigen::RowVectorXd logits_t1(const ModelVariant& variant, const Resume& resume,
                             const preprocess::DocFreqTable& df,
                             const encoder::Vocabulary& vocab, ModelParams& params);
Eigen::RowVectorXd logits_t2(const ModelVariant& variant, const Resume& resume,
                             const JobDescription& jd, const preprocess::DocFreqTable& df,
                             const encoder::Vocabulary& vocab, ModelParams& params);

// Index of the largest logit; ties resolve to the lowest index.
int argmax(const Eigen::RowVectorXd& logits);

// Checkpoint container: variant, encoder config, vocabulary, document
// frequencies, and every named tensor — everything `predict` needs.
struct Checkpoint {
  ModelParams params;
  encoder::Vocabulary vocab;
  preprocess::DocFreqTable df;
};

void save_checkpoint(const std::filesystem::path& path, ModelParams& params,
                     const encoder::Vocabulary& vocab, const preprocess::DocFreqTable& df);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace crest::models
