#include "crest/models.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "crest/errors.hpp"
#include "json.hpp"

namespace crest::models {

using nlohmann::json;

bool ModelVariant::valid() const {
  const auto& all_variants = all();
  return std::find(all_variants.begin(), all_variants.end(), *this) != all_variants.end();
}

std::string ModelVariant::name() const {
  std::string out;
  switch (base) {
    case BaseInput::kWhole: out = with_jd ? "Wrb" : "Wr"; break;
    case BaseInput::kPruned: out = "P"; break;
    case BaseInput::kChunked: out = "C"; break;
  }
  if (base != BaseInput::kWhole) {
    if (with_sections) out += "+I";
    if (with_jd) out += "+J";
    if (with_attention) out += "+A";
    if (minus_embedding) out += "-E";
  }
  return out;
}

const std::vector<ModelVariant>& ModelVariant::all() {
  static const std::vector<ModelVariant> kVariants = {
      {BaseInput::kWhole, false, false, false, false},    // Wr
      {BaseInput::kPruned, false, false, false, false},   // P
      {BaseInput::kPruned, true, false, false, false},    // P+I
      {BaseInput::kChunked, false, false, false, false},  // C
      {BaseInput::kChunked, true, false, false, false},   // C+I
      {BaseInput::kWhole, false, true, false, false},     // Wrb
      {BaseInput::kPruned, true, true, false, false},     // P+I+J
      {BaseInput::kPruned, true, true, true, false},      // P+I+J+A
      {BaseInput::kPruned, true, true, true, true},       // P+I+J+A-E
      {BaseInput::kChunked, true, true, false, false},    // C+I+J
      {BaseInput::kChunked, true, true, true, false},     // C+I+J+A
      {BaseInput::kChunked, true, true, true, true},      // C+I+J+A-E
  };
  return kVariants;
}

ModelVariant ModelVariant::parse(const std::string& name) {
  for (const auto& variant : all()) {
    if (variant.name() == name) return variant;
  }
  throw DataError("unknown model variant: " + name);
}

std::vector<nn::Parameter*> ModelParams::tensors() {
  std::vector<nn::Parameter*> out = enc.tensors();
  if (r2b)
    for (auto* t : r2b->tensors()) out.push_back(t);
  if (b2r)
    for (auto* t : b2r->tensors()) out.push_back(t);
  for (auto* t : head.tensors()) out.push_back(t);
  return out;
}

ModelParams init_model(const ModelVariant& variant, const encoder::EncoderConfig& config,
                       int vocab_size, std::uint64_t seed) {
  if (!variant.valid()) throw DataError("invalid model variant flags");
  rng::Rng rng(seed);
  ModelParams params;
  params.variant = variant;
  params.enc = encoder::init_encoder(config, vocab_size, rng);
  if (variant.with_attention) {
    params.r2b = encoder::init_attention("r2b", config.hidden, rng);
    params.b2r = encoder::init_attention("b2r", config.hidden, rng);
  }
  const int input_dim = variant.concat_jd() ? 2 * config.hidden : config.hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  nn::Matrix w(input_dim, variant.num_classes());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  params.head.weight = nn::Parameter("head.weight", std::move(w));
  params.head.bias = nn::Parameter("head.bias", nn::Matrix::Zero(1, variant.num_classes()));
  return params;
}

std::vector<Unit> build_units(const ModelVariant& variant, const Resume& resume,
                              const preprocess::DocFreqTable& df,
                              const encoder::Vocabulary& vocab,
                              const encoder::EncoderConfig& config) {
  if (!variant.uses_units()) throw DataError("whole-input variant has no units");
  std::vector<Unit> units;
  for (int i = 0; i < kNumSections; ++i) {
    const TokenList& section = resume.sections[static_cast<std::size_t>(i)];
    if (section.empty()) continue;
    if (variant.base == BaseInput::kPruned) {
      const TokenList pruned = preprocess::prune_section(section, config.max_len - 1, df);
      units.push_back(Unit{i, 0, i, vocab.ids_of(pruned)});
    } else {
      const auto chunks = preprocess::chunk_section(section, config.chunk_len);
      for (std::size_t j = 0; j < chunks.size(); ++j)
        units.push_back(Unit{i, static_cast<int>(j), i, vocab.ids_of(chunks[j])});
    }
  }
  return units;
}

nn::NodeId decode(nn::Graph& g, nn::NodeId embedding, DecoderHead& head) {
  return g.add_rowwise(g.matmul(embedding, g.param(head.weight)), g.param(head.bias));
}

namespace {

nn::NodeId cross_attention(nn::Graph& g, nn::NodeId queries, nn::NodeId keys_values,
                           std::optional<encoder::AttentionParams>& params, int heads) {
  if (!params) throw DataError("variant carries no cross-attention parameters");
  const nn::NodeId attended = encoder::multi_head_attention(g, queries, keys_values, *params, heads);
  return g.row(attended, 0);
}

}  // namespace

nn::NodeId cross_attention_r2b(nn::Graph& g, nn::NodeId chunk_seq, nn::NodeId jd_seq,
                               ModelParams& params) {
  return cross_attention(g, chunk_seq, jd_seq, params.r2b, params.enc.config.heads);
}

nn::NodeId cross_attention_b2r(nn::Graph& g, nn::NodeId chunk_seq, nn::NodeId jd_seq,
                               ModelParams& params) {
  return cross_attention(g, jd_seq, chunk_seq, params.b2r, params.enc.config.heads);
}

std::vector<int> jd_input_ids(const JobDescription& jd, const encoder::Vocabulary& vocab,
                              const encoder::EncoderConfig& config) {
  std::vector<int> ids;
  const std::size_t budget =
      std::min(jd.tokens.size(), static_cast<std::size_t>(config.max_len - 1));
  ids.reserve(budget + 1);
  ids.push_back(encoder::kJdClsId);
  for (std::size_t i = 0; i < budget; ++i) ids.push_back(vocab.id_of(jd.tokens[i]));
  return ids;
}

Forward forward_units(nn::Graph& g, const ModelVariant& variant, const std::vector<Unit>& units,
                      const std::vector<int>* jd_ids, ModelParams& params,
                      encoder::EncodeTrace* trace) {
  if (!variant.valid()) throw DataError("invalid model variant flags");
  if (!variant.uses_units()) throw DataError("whole-input variant has no units");
  if (units.empty()) throw DataError("empty resume");
  if (variant.with_jd && jd_ids == nullptr)
    throw DataError("variant " + variant.name() + " requires a job description");
  if (!variant.with_jd && jd_ids != nullptr)
    throw DataError("variant " + variant.name() + " takes no job description");

  Forward out;
  nn::NodeId jd_seq = -1;
  if (jd_ids) {
    jd_seq = encoder::encode_sequence(g, *jd_ids, params.enc, trace);
    out.jd_cls = g.row(jd_seq, 0);
  }

  nn::NodeId pooled = -1;
  for (const Unit& unit : units) {
    if (unit.section_id < 0 || unit.section_id >= kNumSections)
      throw DataError("unit section id out of range");
    std::vector<int> ids;
    ids.reserve(unit.token_ids.size() + 1);
    ids.push_back(variant.base == BaseInput::kPruned
                      ? encoder::kSectionClsBase + unit.section_id
                      : encoder::kChunkClsId);
    ids.insert(ids.end(), unit.token_ids.begin(), unit.token_ids.end());

    const nn::NodeId seq = encoder::encode_sequence(g, ids, params.enc, trace);
    const nn::NodeId cls = g.row(seq, 0);
    out.unit_cls.push_back(cls);

    nn::NodeId fused = -1;
    const auto accumulate = [&](nn::NodeId term) {
      fused = fused < 0 ? term : g.add(fused, term);
    };
    if (!variant.minus_embedding) accumulate(cls);
    if (variant.with_sections)
      accumulate(encoder::section_embedding(g, unit.section_id, params.enc));
    if (variant.with_attention) {
      accumulate(cross_attention_r2b(g, seq, jd_seq, params));
      accumulate(cross_attention_b2r(g, seq, jd_seq, params));
    }
    pooled = pooled < 0 ? fused : g.add(pooled, fused);
  }
  out.pooled = pooled;

  const nn::NodeId decoder_in =
      variant.concat_jd() ? g.concat_cols({out.jd_cls, pooled}) : pooled;
  out.logits = decode(g, decoder_in, params.head);
  return out;
}

Forward forward_t1(nn::Graph& g, const ModelVariant& variant, const Resume& resume,
                   const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                   ModelParams& params, encoder::EncodeTrace* trace) {
  if (variant.with_jd)
    throw DataError("variant " + variant.name() + " requires a job description");
  if (resume.empty()) throw DataError("empty resume: " + resume.applicant_id);

  if (variant.base == BaseInput::kWhole) {
    const TokenList tokens = preprocess::trim(resume, params.enc.config.max_len);
    Forward out;
    const nn::NodeId seq = encoder::encode_sequence(g, vocab.ids_of(tokens), params.enc, trace);
    out.logits = decode(g, g.row(seq, 0), params.head);
    return out;
  }
  const auto units = build_units(variant, resume, df, vocab, params.enc.config);
  return forward_units(g, variant, units, nullptr, params, trace);
}

Forward forward_t2(nn::Graph& g, const ModelVariant& variant, const Resume& resume,
                   const JobDescription& jd, const preprocess::DocFreqTable& df,
                   const encoder::Vocabulary& vocab, ModelParams& params,
                   encoder::EncodeTrace* trace) {
  if (!variant.with_jd)
    throw DataError("variant " + variant.name() + " takes no job description");
  if (resume.empty()) throw DataError("empty resume: " + resume.applicant_id);
  if (jd.tokens.empty()) throw DataError("empty job description: " + jd.job_id);

  if (variant.base == BaseInput::kWhole) {
    const TokenList tokens = preprocess::trim_with_jd(resume, jd, params.enc.config.max_len);
    Forward out;
    const nn::NodeId seq = encoder::encode_sequence(g, vocab.ids_of(tokens), params.enc, trace);
    out.logits = decode(g, g.row(seq, 0), params.head);
    return out;
  }
  const auto units = build_units(variant, resume, df, vocab, params.enc.config);
  const auto jd_ids = jd_input_ids(jd, vocab, params.enc.config);
  return forward_units(g, variant, units, &jd_ids, params, trace);
}

Eigen::RowVectorXd logits_t1(const ModelVariant& variant, const Resume& resume,
                             const preprocess::DocFreqTable& df,
                             const encoder::Vocabulary& vocab, ModelParams& params) {
  nn::Graph g;
  const Forward out = forward_t1(g, variant, resume, df, vocab, params);
  return g.value(out.logits).row(0);
}

Eigen::RowVectorXd logits_t2(const ModelVariant& variant, const Resume& resume,
                             const JobDescription& jd, const preprocess::DocFreqTable& df,
                             const encoder::Vocabulary& vocab, ModelParams& params) {
  nn::Graph g;
  const Forward out = forward_t2(g, variant, resume, jd, df, vocab, params);
  return g.value(out.logits).row(0);
}

int argmax(const Eigen::RowVectorXd& logits) {
  if (logits.size() == 0) throw DataError("argmax of empty logits");
  int best = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = i;
  return best;
}

namespace {

json tensor_to_json(const nn::Parameter& p) {
  json t;
  t["rows"] = p.value.rows();
  t["cols"] = p.value.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(p.value.size()));
  for (Eigen::Index i = 0; i < p.value.rows(); ++i)
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) data.push_back(p.value(i, j));
  t["data"] = std::move(data);
  return t;
}

void tensor_from_json(const json& t, nn::Parameter& p) {
  const Eigen::Index rows = t.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = t.at("cols").get<Eigen::Index>();
  if (rows != p.value.rows() || cols != p.value.cols())
    throw ParseError("checkpoint tensor " + p.name + ": shape mismatch");
  const auto& data = t.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ParseError("checkpoint tensor " + p.name + ": data length mismatch");
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) p.value(i, j) = data[k++].get<double>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ModelParams& params,
                     const encoder::Vocabulary& vocab, const preprocess::DocFreqTable& df) {
  json j;
  j["format"] = "crest-checkpoint";
  j["version"] = 1;
  j["variant"] = params.variant.name();
  const auto& config = params.enc.config;
  j["config"] = {{"hidden", config.hidden},   {"layers", config.layers},
                 {"heads", config.heads},     {"ff_dim", config.ff_dim},
                 {"max_len", config.max_len}, {"chunk_len", config.chunk_len}};
  j["vocab"] = vocab.tokens();
  j["df"] = json::parse(preprocess::save_df_json(df));
  json tensors = json::object();
  for (const auto* t : params.tensors()) tensors[t->name] = tensor_to_json(*t);
  j["tensors"] = std::move(tensors);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j = json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("checkpoint: malformed JSON");
  if (j.value("format", "") != "crest-checkpoint")
    throw ParseError("checkpoint: unrecognized format tag");
  if (j.value("version", 0) != 1) throw ParseError("checkpoint: unsupported version");

  const ModelVariant variant = ModelVariant::parse(j.at("variant").get<std::string>());
  const json& jc = j.at("config");
  encoder::EncoderConfig config;
  config.hidden = jc.at("hidden").get<int>();
  config.layers = jc.at("layers").get<int>();
  config.heads = jc.at("heads").get<int>();
  config.ff_dim = jc.at("ff_dim").get<int>();
  config.max_len = jc.at("max_len").get<int>();
  config.chunk_len = jc.at("chunk_len").get<int>();
  config.validate();

  encoder::Vocabulary vocab =
      encoder::Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
  preprocess::DocFreqTable df = preprocess::load_df_json(j.at("df").dump());
  Checkpoint ckpt{init_model(variant, config, vocab.size(), 0), std::move(vocab), std::move(df)};
  const json& tensors = j.at("tensors");
  std::size_t used = 0;
  for (auto* t : ckpt.params.tensors()) {
    if (!tensors.contains(t->name))
      throw ParseError("checkpoint: missing tensor: " + t->name);
    tensor_from_json(tensors.at(t->name), *t);
    ++used;
  }
  if (used != tensors.size()) throw ParseError("checkpoint: extra tensors present");
  return ckpt;
}

}  // namespace crest::models
