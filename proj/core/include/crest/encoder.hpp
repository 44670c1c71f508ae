#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "crest/nn/graph.hpp"
#include "crest/rng.hpp"
#include "crest/types.hpp"

namespace crest::encoder {

// Reserved vocabulary slots, fixed across every corpus. [PAD] is kept for
// format stability even though per-example graphs never pad.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;       // [CLS]  — whole-resume sequences
inline constexpr int kJdClsId = 3;     // [CLSB] — job-description sequences
inline constexpr int kChunkClsId = 4;  // [CLSC] — shared by every chunk
inline constexpr int kSectionClsBase = 5;  // [SEC0]..[SEC5] occupy ids 5..10
inline constexpr int kNumReservedIds = 11;

// Token -> dense id map. Ids 0..10 are reserved; corpus tokens follow in
// lexicographic order so the same training set always yields the same file.
class Vocabulary {
 public:
  Vocabulary();  // reserved tokens only

  // Distinct section/jd tokens of the training material, sorted, appended
  // after the reserved block.
  static Vocabulary build(const std::vector<Resume>& training_resumes,
                          const std::vector<JobDescription>& jobs = {});

  // Rebuild from a saved id-ordered token list; validates the reserved block.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id_of(const std::string& token) const;  // [UNK] id when absent
  const std::string& token_of(int id) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> ids_of(const TokenList& tokens) const;

  // Token-per-line file with a header comment naming the reserved block.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Lowercase text -> ids, splitting on whitespace/punctuation boundaries.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

struct EncoderConfig {
  int hidden = 64;    // h
  int layers = 2;
  int heads = 4;
  int ff_dim = 256;
  int max_len = 128;  // N — hard input-length cap
  int chunk_len = 32; // L — chunk content length; N >= L+1 leaves the CLS slot

  // Throws DataError unless positive, hidden % heads == 0, max_len >= chunk_len + 1.
  void validate() const;
};

// One multi-head attention block's projections (shared shape between the
// encoder's self-attention and the resume<->jd cross-attention).
struct AttentionParams {
  nn::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  std::vector<nn::Parameter*> tensors();
};

struct LayerParams {
  nn::Parameter ln1_gain, ln1_bias;
  AttentionParams attn;
  nn::Parameter ln2_gain, ln2_bias;
  nn::Parameter ff_w1, ff_b1, ff_w2, ff_b2;
  std::vector<nn::Parameter*> tensors();
};

struct EncoderParams {
  EncoderConfig config;
  nn::Parameter tok_emb;  // V x h
  nn::Parameter pos_emb;  // N x h, learned positions
  nn::Parameter sec_emb;  // 6 x h — the section-identity embedding table
  std::vector<LayerParams> layers;
  nn::Parameter lnf_gain, lnf_bias;  // final pre-norm stack normalization
  std::vector<nn::Parameter*> tensors();
};

// Weights ~ U(-1/sqrt(h), 1/sqrt(h)) drawn in a fixed member order from `rng`;
// biases zero; layer-norm gains one.
AttentionParams init_attention(const std::string& prefix, int hidden, rng::Rng& rng);
EncoderParams init_encoder(const EncoderConfig& config, int vocab_size, rng::Rng& rng);

// Captured post-softmax attention weights (one matrix per layer x head, in
// order), for inspection and the row-stochasticity check.
struct EncodeTrace {
  std::vector<nn::Matrix> attention;
};

// Multi-head attention reading queries from `queries` (n_q x h) and
// keys/values from `keys_values` (n_kv x h); returns an n_q x h node.
nn::NodeId multi_head_attention(nn::Graph& g, nn::NodeId queries, nn::NodeId keys_values,
                                AttentionParams& params, int heads,
                                EncodeTrace* trace = nullptr);

// Pre-norm transformer over a token-id sequence whose position 0 is the
// caller's CLS token. Returns an n x h node; row 0 is the sequence embedding.
// Throws DataError when the sequence is empty or longer than config.max_len.
nn::NodeId encode_sequence(nn::Graph& g, const std::vector<int>& ids, EncoderParams& params,
                           EncodeTrace* trace = nullptr);

// Row `section_id` of the section table as a 1 x h node; id must be in 0..5.
nn::NodeId section_embedding(nn::Graph& g, int section_id, EncoderParams& params);

}  // namespace crest::encoder
