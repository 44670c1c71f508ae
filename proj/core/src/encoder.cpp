#include "crest/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "crest/errors.hpp"
#include "crest/segmenter.hpp"

namespace crest::encoder {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {
      std::string(kPadToken),           std::string(kUnkToken),
      std::string(kClsToken),           std::string(kJdClsToken),
      std::string(kChunkClsToken),      std::string(kSectionClsTokens[0]),
      std::string(kSectionClsTokens[1]), std::string(kSectionClsTokens[2]),
      std::string(kSectionClsTokens[3]), std::string(kSectionClsTokens[4]),
      std::string(kSectionClsTokens[5]),
  };
  return kReserved;
}

constexpr const char* kVocabHeader = "# crest-vocab v1 reserved=11";

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& token : reserved_tokens()) {
    ids_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
  }
}

Vocabulary Vocabulary::build(const std::vector<Resume>& training_resumes,
                             const std::vector<JobDescription>& jobs) {
  Vocabulary vocab;
  std::set<std::string> distinct;
  for (const auto& resume : training_resumes) {
    for (const auto& section : resume.sections)
      distinct.insert(section.begin(), section.end());
  }
  for (const auto& jd : jobs) distinct.insert(jd.tokens.begin(), jd.tokens.end());
  for (const auto& token : distinct) {
    if (vocab.ids_.count(token)) continue;  // a corpus token shadowing a reserved name
    vocab.ids_.emplace(token, static_cast<int>(vocab.tokens_.size()));
    vocab.tokens_.push_back(token);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size())
    throw ParseError("vocabulary list: missing reserved block");
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  for (const auto& token : tokens) {
    if (vocab.ids_.count(token)) throw ParseError("vocabulary list: duplicate token: " + token);
    vocab.ids_.emplace(token, static_cast<int>(vocab.tokens_.size()));
    vocab.tokens_.push_back(token);
  }
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (vocab.tokens_[i] != reserved[i])
      throw ParseError("vocabulary list: reserved slot " + std::to_string(i) + " holds '" +
                       vocab.tokens_[i] + "', expected '" + reserved[i] + "'");
  }
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) throw DataError("vocabulary: id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::ids_of(const TokenList& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(id_of(token));
  return ids;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path.string());
  out << kVocabHeader << "\n";
  for (const auto& token : tokens_) out << token << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("vocabulary file is empty");
  while (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kVocabHeader) throw ParseError("vocabulary file: unrecognized header: " + line);
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.ids_.clear();
  while (std::getline(in, line)) {
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (vocab.ids_.count(line)) throw ParseError("vocabulary file: duplicate token: " + line);
    vocab.ids_.emplace(line, static_cast<int>(vocab.tokens_.size()));
    vocab.tokens_.push_back(line);
  }
  const auto& reserved = reserved_tokens();
  if (vocab.tokens_.size() < reserved.size())
    throw ParseError("vocabulary file: missing reserved block");
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (vocab.tokens_[i] != reserved[i])
      throw ParseError("vocabulary file: reserved slot " + std::to_string(i) +
                       " holds '" + vocab.tokens_[i] + "', expected '" + reserved[i] + "'");
  }
  return vocab;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  return vocab.ids_of(segmenter::tokenize_words(text));
}

void EncoderConfig::validate() const {
  if (hidden < 1 || layers < 1 || heads < 1 || ff_dim < 1 || max_len < 2 || chunk_len < 1)
    throw DataError("encoder config: all dimensions must be positive (max_len >= 2)");
  if (hidden % heads != 0) throw DataError("encoder config: hidden must be divisible by heads");
  if (max_len < chunk_len + 1)
    throw DataError("encoder config: max_len must be >= chunk_len + 1 for the chunk CLS slot");
}

namespace {

nn::Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, rng::Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

nn::Parameter weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound,
                     rng::Rng& rng) {
  return nn::Parameter(name, uniform_matrix(rows, cols, bound, rng));
}

nn::Parameter zeros(const std::string& name, Eigen::Index cols) {
  return nn::Parameter(name, nn::Matrix::Zero(1, cols));
}

nn::Parameter ones(const std::string& name, Eigen::Index cols) {
  return nn::Parameter(name, nn::Matrix::Ones(1, cols));
}

}  // namespace

AttentionParams init_attention(const std::string& prefix, int hidden, rng::Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  AttentionParams p;
  p.wq = weight(prefix + ".wq", hidden, hidden, bound, rng);
  p.bq = zeros(prefix + ".bq", hidden);
  p.wk = weight(prefix + ".wk", hidden, hidden, bound, rng);
  p.bk = zeros(prefix + ".bk", hidden);
  p.wv = weight(prefix + ".wv", hidden, hidden, bound, rng);
  p.bv = zeros(prefix + ".bv", hidden);
  p.wo = weight(prefix + ".wo", hidden, hidden, bound, rng);
  p.bo = zeros(prefix + ".bo", hidden);
  return p;
}

std::vector<nn::Parameter*> AttentionParams::tensors() {
  return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo};
}

std::vector<nn::Parameter*> LayerParams::tensors() {
  std::vector<nn::Parameter*> out = {&ln1_gain, &ln1_bias};
  for (auto* t : attn.tensors()) out.push_back(t);
  out.insert(out.end(), {&ln2_gain, &ln2_bias, &ff_w1, &ff_b1, &ff_w2, &ff_b2});
  return out;
}

std::vector<nn::Parameter*> EncoderParams::tensors() {
  std::vector<nn::Parameter*> out = {&tok_emb, &pos_emb, &sec_emb};
  for (auto& layer : layers)
    for (auto* t : layer.tensors()) out.push_back(t);
  out.push_back(&lnf_gain);
  out.push_back(&lnf_bias);
  return out;
}

EncoderParams init_encoder(const EncoderConfig& config, int vocab_size, rng::Rng& rng) {
  config.validate();
  if (vocab_size < kNumReservedIds) throw DataError("encoder init: vocab smaller than reserved block");
  const int h = config.hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  EncoderParams params;
  params.config = config;
  params.tok_emb = weight("tok_emb", vocab_size, h, bound, rng);
  params.pos_emb = weight("pos_emb", config.max_len, h, bound, rng);
  params.sec_emb = weight("sec_emb", kNumSections, h, bound, rng);
  params.layers.reserve(static_cast<std::size_t>(config.layers));
  for (int i = 0; i < config.layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    LayerParams layer;
    layer.ln1_gain = ones(prefix + ".ln1.gain", h);
    layer.ln1_bias = zeros(prefix + ".ln1.bias", h);
    layer.attn = init_attention(prefix + ".attn", h, rng);
    layer.ln2_gain = ones(prefix + ".ln2.gain", h);
    layer.ln2_bias = zeros(prefix + ".ln2.bias", h);
    layer.ff_w1 = weight(prefix + ".ff.w1", h, config.ff_dim, bound, rng);
    layer.ff_b1 = zeros(prefix + ".ff.b1", config.ff_dim);
    layer.ff_w2 = weight(prefix + ".ff.w2", config.ff_dim, h, bound, rng);
    layer.ff_b2 = zeros(prefix + ".ff.b2", h);
    params.layers.push_back(std::move(layer));
  }
  params.lnf_gain = ones("lnf.gain", h);
  params.lnf_bias = zeros("lnf.bias", h);
  return params;
}

nn::NodeId multi_head_attention(nn::Graph& g, nn::NodeId queries, nn::NodeId keys_values,
                                AttentionParams& params, int heads, EncodeTrace* trace) {
  const Eigen::Index h = g.value(queries).cols();
  if (g.value(keys_values).cols() != h)
    throw NumericError("attention: query/key hidden dims disagree");
  if (heads < 1 || h % heads != 0) throw NumericError("attention: heads must divide hidden dim");
  const Eigen::Index dh = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const nn::NodeId q = g.add_rowwise(g.matmul(queries, g.param(params.wq)), g.param(params.bq));
  const nn::NodeId k = g.add_rowwise(g.matmul(keys_values, g.param(params.wk)), g.param(params.bk));
  const nn::NodeId v = g.add_rowwise(g.matmul(keys_values, g.param(params.wv)), g.param(params.bv));

  std::vector<nn::NodeId> contexts;
  contexts.reserve(static_cast<std::size_t>(heads));
  for (int head = 0; head < heads; ++head) {
    const Eigen::Index start = head * dh;
    const nn::NodeId qh = g.slice_cols(q, start, dh);
    const nn::NodeId kh = g.slice_cols(k, start, dh);
    const nn::NodeId vh = g.slice_cols(v, start, dh);
    const nn::NodeId weights = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), scale));
    if (trace) trace->attention.push_back(g.value(weights));
    contexts.push_back(g.matmul(weights, vh));
  }
  const nn::NodeId merged = g.concat_cols(contexts);
  return g.add_rowwise(g.matmul(merged, g.param(params.wo)), g.param(params.bo));
}

nn::NodeId encode_sequence(nn::Graph& g, const std::vector<int>& ids, EncoderParams& params,
                           EncodeTrace* trace) {
  const auto& config = params.config;
  if (ids.empty()) throw DataError("encode: empty sequence");
  if (static_cast<int>(ids.size()) > config.max_len)
    throw DataError("encode: sequence length " + std::to_string(ids.size()) +
                    " exceeds max input length " + std::to_string(config.max_len));

  std::vector<Eigen::Index> token_rows;
  std::vector<Eigen::Index> position_rows;
  token_rows.reserve(ids.size());
  position_rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    token_rows.push_back(ids[i]);  // bounds enforced by Graph::rows
    position_rows.push_back(static_cast<Eigen::Index>(i));
  }
  nn::NodeId x = g.add(g.rows(g.param(params.tok_emb), std::move(token_rows)),
                       g.rows(g.param(params.pos_emb), std::move(position_rows)));

  for (auto& layer : params.layers) {
    const nn::NodeId normed1 =
        g.layer_norm(x, g.param(layer.ln1_gain), g.param(layer.ln1_bias));
    const nn::NodeId attended =
        multi_head_attention(g, normed1, normed1, layer.attn, config.heads, trace);
    x = g.add(x, attended);

    const nn::NodeId normed2 =
        g.layer_norm(x, g.param(layer.ln2_gain), g.param(layer.ln2_bias));
    const nn::NodeId hidden =
        g.gelu(g.add_rowwise(g.matmul(normed2, g.param(layer.ff_w1)), g.param(layer.ff_b1)));
    const nn::NodeId projected =
        g.add_rowwise(g.matmul(hidden, g.param(layer.ff_w2)), g.param(layer.ff_b2));
    x = g.add(x, projected);
  }
  return g.layer_norm(x, g.param(params.lnf_gain), g.param(params.lnf_bias));
}

nn::NodeId section_embedding(nn::Graph& g, int section_id, EncoderParams& params) {
  if (section_id < 0 || section_id >= kNumSections)
    throw DataError("section embedding: id out of range: " + std::to_string(section_id));
  return g.row(g.param(params.sec_emb), section_id);
}

}  // namespace crest::encoder
