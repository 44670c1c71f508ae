#include "crest/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "crest/errors.hpp"
#include "crest/eval.hpp"
#include "crest/rng.hpp"
#include "json.hpp"

namespace crest::training {

using nlohmann::json;

void TrainConfig::validate() const {
  if (lr < 0.0) throw DataError("train config: negative learning rate");
  if (momentum < 0.0 || momentum >= 1.0) throw DataError("train config: momentum must be in [0,1)");
  if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0)
    throw DataError("train config: adam betas must be in (0,1)");
  if (adam_eps <= 0.0) throw DataError("train config: adam eps must be positive");
  if (epochs < 0) throw DataError("train config: negative epoch count");
  if (grad_accum < 1) throw DataError("train config: grad_accum must be >= 1");
  if (seeds.empty()) throw DataError("train config: seeds must be nonempty");
  int prev_bound = 0;
  for (const auto& [bound, size] : batch_schedule) {
    if (bound <= prev_bound) throw DataError("train config: batch schedule bounds must ascend");
    if (size < 1) throw DataError("train config: batch sizes must be >= 1");
    prev_bound = bound;
  }
  if (early_stop_trn_acc && (*early_stop_trn_acc <= 0.0 || *early_stop_trn_acc > 1.0))
    throw DataError("train config: early_stop_trn_acc must be in (0,1]");
  enc.validate();
}

namespace {

std::string trimmed(const std::string& text) {
  std::size_t start = 0;
  std::size_t stop = text.size();
  while (start < stop && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  while (stop > start && std::isspace(static_cast<unsigned char>(text[stop - 1]))) --stop;
  return text.substr(start, stop - start);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw DataError("config key " + key + ": not a number: " + value);
  }
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw DataError("config key " + key + ": not an integer: " + value);
  }
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : value) {
    if (c == sep) {
      parts.push_back(trimmed(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(trimmed(current));
  return parts;
}

}  // namespace

void set_config_key(TrainConfig& config, const std::string& key, const std::string& value) {
  if (key == "lr") {
    config.lr = to_double(key, value);
  } else if (key == "momentum") {
    config.momentum = to_double(key, value);
  } else if (key == "optimizer") {
    if (value == "sgd") config.adam = false;
    else if (value == "adam") config.adam = true;
    else throw DataError("config key optimizer: expected sgd or adam, got " + value);
  } else if (key == "adam_beta1") {
    config.adam_beta1 = to_double(key, value);
  } else if (key == "adam_beta2") {
    config.adam_beta2 = to_double(key, value);
  } else if (key == "adam_eps") {
    config.adam_eps = to_double(key, value);
  } else if (key == "epochs") {
    config.epochs = to_int(key, value);
  } else if (key == "grad_accum") {
    config.grad_accum = to_int(key, value);
  } else if (key == "batch_schedule") {
    std::vector<std::pair<int, int>> schedule;
    for (const auto& part : split_list(value, ',')) {
      const std::size_t colon = part.find(':');
      if (colon == std::string::npos)
        throw DataError("config key batch_schedule: expected maxK:size pairs, got " + part);
      schedule.emplace_back(to_int(key, trimmed(part.substr(0, colon))),
                            to_int(key, trimmed(part.substr(colon + 1))));
    }
    config.batch_schedule = std::move(schedule);
  } else if (key == "seeds") {
    std::vector<std::uint64_t> seeds;
    for (const auto& part : split_list(value, ','))
      seeds.push_back(static_cast<std::uint64_t>(to_int(key, part)));
    config.seeds = std::move(seeds);
  } else if (key == "early_stop_trn_acc") {
    config.early_stop_trn_acc = to_double(key, value);
  } else if (key == "hidden") {
    config.enc.hidden = to_int(key, value);
  } else if (key == "layers") {
    config.enc.layers = to_int(key, value);
  } else if (key == "heads") {
    config.enc.heads = to_int(key, value);
  } else if (key == "ff_dim") {
    config.enc.ff_dim = to_int(key, value);
  } else if (key == "max_len") {
    config.enc.max_len = to_int(key, value);
  } else if (key == "chunk_len") {
    config.enc.chunk_len = to_int(key, value);
  } else {
    throw DataError("unknown config key: " + key);
  }
}

namespace {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = {
      "lr",        "momentum",   "optimizer", "adam_beta1", "adam_beta2",
      "adam_eps",  "epochs",     "grad_accum", "batch_schedule", "seeds",
      "early_stop_trn_acc", "hidden", "layers", "heads", "ff_dim",
      "max_len",   "chunk_len",
  };
  return kKeys;
}

std::string json_scalar_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  const std::string body = trimmed(text);
  if (!body.empty() && body[0] == '{') {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("train config: malformed JSON");
    for (const auto& [key, value] : j.items()) {
      if (value.is_array()) {
        std::string joined;
        for (const auto& element : value) {
          if (!joined.empty()) joined += ",";
          if (element.is_array()) {  // batch_schedule pairs: [[4,8],[8,4]]
            if (element.size() != 2)
              throw ParseError("train config: schedule entries need two numbers");
            joined += element[0].dump() + ":" + element[1].dump();
          } else {
            joined += json_scalar_to_string(element);
          }
        }
        set_config_key(config, key, joined);
      } else {
        set_config_key(config, key, json_scalar_to_string(value));
      }
    }
  } else {
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
      const std::string entry = trimmed(line);
      if (entry.empty() || entry[0] == '#') continue;
      const std::size_t eq = entry.find('=');
      if (eq == std::string::npos)
        throw ParseError("train config: expected key=value, got: " + entry);
      set_config_key(config, trimmed(entry.substr(0, eq)), trimmed(entry.substr(eq + 1)));
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_env_overrides(TrainConfig& config) {
  for (const auto& key : config_keys()) {
    std::string name = "CREST_";
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (const char* value = std::getenv(name.c_str())) set_config_key(config, key, value);
  }
  config.validate();
}

int batch_size_for(const TrainConfig& config, int chunk_count) {
  for (const auto& [bound, size] : config.batch_schedule)
    if (chunk_count <= bound) return size;
  return 1;
}

std::vector<Batch> batch_by_chunk_count(const std::vector<int>& chunk_counts,
                                        const TrainConfig& config) {
  std::map<int, std::vector<int>> groups;  // K -> example indices, input order
  for (std::size_t i = 0; i < chunk_counts.size(); ++i)
    groups[chunk_counts[i]].push_back(static_cast<int>(i));
  std::vector<Batch> batches;
  for (const auto& [k, members] : groups) {
    const int size = batch_size_for(config, k);
    for (std::size_t start = 0; start < members.size(); start += static_cast<std::size_t>(size)) {
      Batch batch;
      batch.chunk_count = k;
      const std::size_t stop = std::min(members.size(), start + static_cast<std::size_t>(size));
      batch.example_indices.assign(members.begin() + static_cast<std::ptrdiff_t>(start),
                                   members.begin() + static_cast<std::ptrdiff_t>(stop));
      batches.push_back(std::move(batch));
    }
  }
  return batches;
}

double cross_entropy(const Eigen::RowVectorXd& logits, int gold) {
  if (gold < 0 || gold >= logits.size()) throw DataError("cross entropy: label out of range");
  const double peak = logits.maxCoeff();
  double denom = 0.0;
  for (int i = 0; i < logits.size(); ++i) denom += std::exp(logits(i) - peak);
  return std::log(denom) + peak - logits(gold);
}

int chunk_key(const models::ModelVariant& variant, const Resume& resume,
              const encoder::EncoderConfig& config) {
  switch (variant.base) {
    case models::BaseInput::kWhole:
      return 1;
    case models::BaseInput::kPruned: {
      int sections = 0;
      for (const auto& section : resume.sections)
        if (!section.empty()) ++sections;
      return sections;
    }
    case models::BaseInput::kChunked:
      return preprocess::total_chunks(resume, config.chunk_len);
  }
  return 1;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::ostringstream out;
  out << "epoch,split,accuracy,loss,seed\n";
  for (const auto& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%llu\n", row.epoch, row.split.c_str(),
                  row.accuracy, row.loss, static_cast<unsigned long long>(row.seed));
    out << buf;
  }
  return out.str();
}

namespace {

nn::NodeId forward_example(nn::Graph& g, const models::ModelVariant& variant, const Example& ex,
                           const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                           models::ModelParams& params) {
  if (variant.with_jd) {
    if (ex.jd == nullptr)
      throw DataError("variant " + variant.name() + " requires a job description");
    return models::forward_t2(g, variant, *ex.resume, *ex.jd, df, vocab, params).logits;
  }
  if (ex.jd != nullptr)
    throw DataError("variant " + variant.name() + " takes no job description");
  return models::forward_t1(g, variant, *ex.resume, df, vocab, params).logits;
}

}  // namespace

EvalResult evaluate(const models::ModelVariant& variant, const std::vector<Example>& examples,
                    const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                    models::ModelParams& params) {
  if (examples.empty()) throw DataError("evaluate: no examples");
  EvalResult result;
  result.predictions.reserve(examples.size());
  std::vector<int> golds;
  golds.reserve(examples.size());
  double loss_sum = 0.0;
  for (const auto& ex : examples) {
    nn::Graph g;
    const nn::NodeId logits_node = forward_example(g, variant, ex, df, vocab, params);
    const Eigen::RowVectorXd logits = g.value(logits_node).row(0);
    result.predictions.push_back(models::argmax(logits));
    golds.push_back(ex.gold);
    loss_sum += cross_entropy(logits, ex.gold);
  }
  result.accuracy = eval::accuracy(result.predictions, golds);
  result.loss = loss_sum / static_cast<double>(examples.size());
  return result;
}

namespace {

// Momentum-SGD or Adam over the model's tensor list.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const std::vector<nn::Parameter*>& tensors)
      : config_(config) {
    for (const auto* t : tensors) {
      velocity_.push_back(nn::Matrix::Zero(t->value.rows(), t->value.cols()));
      if (config_.adam) second_.push_back(nn::Matrix::Zero(t->value.rows(), t->value.cols()));
    }
  }

  void step(const std::vector<nn::Parameter*>& tensors) {
    ++steps_;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      nn::Parameter& p = *tensors[i];
      if (config_.adam) {
        velocity_[i] = config_.adam_beta1 * velocity_[i] + (1.0 - config_.adam_beta1) * p.grad;
        second_[i] = config_.adam_beta2 * second_[i] +
                     (1.0 - config_.adam_beta2) * p.grad.cwiseProduct(p.grad);
        const double bias1 = 1.0 - std::pow(config_.adam_beta1, steps_);
        const double bias2 = 1.0 - std::pow(config_.adam_beta2, steps_);
        const nn::Matrix mhat = velocity_[i] / bias1;
        const nn::Matrix vhat = second_[i] / bias2;
        p.value.array() -=
            config_.lr * mhat.array() / (vhat.array().sqrt() + config_.adam_eps);
      } else {
        velocity_[i] = config_.momentum * velocity_[i] + p.grad;
        p.value -= config_.lr * velocity_[i];
      }
      p.zero_grad();
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<nn::Matrix> velocity_;
  std::vector<nn::Matrix> second_;
  int steps_ = 0;
};

}  // namespace

SeedResult train_one_seed(const models::ModelVariant& variant,
                          const std::vector<Example>& trn, const std::vector<Example>& dev,
                          const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                          const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  if (trn.empty()) throw DataError("train: empty training set");

  SeedResult result;
  result.seed = seed;
  models::ModelParams params = models::init_model(variant, config.enc, vocab.size(), seed);
  auto tensors = params.tensors();
  Optimizer optimizer(config, tensors);

  std::vector<int> keys(trn.size());
  for (std::size_t i = 0; i < trn.size(); ++i)
    keys[i] = chunk_key(variant, *trn[i].resume, config.enc);

  const auto record = [&](int epoch, const char* split, const EvalResult& ev) {
    result.metrics.push_back(EpochMetrics{epoch, split, ev.accuracy, ev.loss, seed});
  };
  const auto consider_best = [&](int epoch, double dev_accuracy) {
    if (result.best_epoch < 0 || dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = dev_accuracy;
      result.best_epoch = epoch;
      result.best_params = params;  // deep copy of every tensor
    }
  };

  result.best_epoch = -1;
  const EvalResult trn0 = evaluate(variant, trn, df, vocab, params);
  record(0, "trn", trn0);
  if (!dev.empty()) {
    const EvalResult dev0 = evaluate(variant, dev, df, vocab, params);
    record(0, "dev", dev0);
    consider_best(0, dev0.accuracy);
  } else {
    consider_best(0, trn0.accuracy);
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<int> order(trn.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng::Rng shuffler(rng::Rng::derive(seed, 100 + static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order);
    std::vector<int> permuted_keys(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      permuted_keys[i] = keys[static_cast<std::size_t>(order[i])];

    int pending = 0;
    for (const auto& batch : batch_by_chunk_count(permuted_keys, config)) {
      const double scale =
          1.0 / (static_cast<double>(batch.example_indices.size()) * config.grad_accum);
      for (int position : batch.example_indices) {
        const Example& ex = trn[static_cast<std::size_t>(order[static_cast<std::size_t>(position)])];
        nn::Graph g;
        const nn::NodeId logits = forward_example(g, variant, ex, df, vocab, params);
        const nn::NodeId loss = g.cross_entropy(logits, ex.gold);
        const double raw = g.value(loss)(0, 0);
        if (!std::isfinite(raw))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " (seed " +
                             std::to_string(seed) + ")");
        g.backward(g.scale(loss, scale));
      }
      if (++pending == config.grad_accum) {
        optimizer.step(tensors);
        pending = 0;
      }
    }
    if (pending > 0) optimizer.step(tensors);

    const EvalResult trn_eval = evaluate(variant, trn, df, vocab, params);
    record(epoch, "trn", trn_eval);
    if (!dev.empty()) {
      const EvalResult dev_eval = evaluate(variant, dev, df, vocab, params);
      record(epoch, "dev", dev_eval);
      consider_best(epoch, dev_eval.accuracy);
    } else {
      consider_best(epoch, trn_eval.accuracy);
    }
    if (config.early_stop_trn_acc && trn_eval.accuracy >= *config.early_stop_trn_acc) break;
  }
  return result;
}

TrainResult train(const models::ModelVariant& variant, const std::vector<Example>& trn,
                  const std::vector<Example>& dev, const preprocess::DocFreqTable& df,
                  const encoder::Vocabulary& vocab, const TrainConfig& config) {
  TrainResult result;
  for (const std::uint64_t seed : config.seeds) {
    result.seeds.push_back(train_one_seed(variant, trn, dev, df, vocab, config, seed));
    result.dev_accuracies.push_back(result.seeds.back().best_dev_accuracy);
    if (result.seeds.back().best_dev_accuracy >
        result.seeds[result.best_index].best_dev_accuracy)
      result.best_index = result.seeds.size() - 1;
  }
  return result;
}

GradCheckResult grad_check(const models::ModelVariant& variant,
                           const std::vector<Example>& examples,
                           const preprocess::DocFreqTable& df, const encoder::Vocabulary& vocab,
                           const TrainConfig& config, std::uint64_t seed, double epsilon,
                           int min_samples, const std::string& tensor_filter,
                           const std::string& corrupt_tensor) {
  if (examples.empty()) throw DataError("grad check: no examples");
  models::ModelParams params = models::init_model(variant, config.enc, vocab.size(), seed);
  auto tensors = params.tensors();

  const auto total_loss_graph = [&](nn::Graph& g) {
    nn::NodeId total = -1;
    for (const auto& ex : examples) {
      const nn::NodeId loss =
          g.cross_entropy(forward_example(g, variant, ex, df, vocab, params), ex.gold);
      total = total < 0 ? loss : g.add(total, loss);
    }
    return total;
  };
  const auto loss_value = [&]() {
    nn::Graph g;
    return g.value(total_loss_graph(g))(0, 0);
  };

  for (auto* t : tensors) t->zero_grad();
  {
    nn::Graph g;
    g.backward(total_loss_graph(g));
  }
  std::unordered_map<std::string, nn::Matrix> analytic;
  for (const auto* t : tensors) analytic.emplace(t->name, t->grad);

  GradCheckResult result;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    nn::Parameter& p = *tensors[ti];
    if (!tensor_filter.empty() && p.name.find(tensor_filter) == std::string::npos) continue;
    nn::Matrix expected = analytic.at(p.name);
    if (p.name == corrupt_tensor) expected = -expected;

    const Eigen::Index size = p.value.size();
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) coords[static_cast<std::size_t>(i)] = i;
    const std::size_t samples =
        std::min<std::size_t>(coords.size(), static_cast<std::size_t>(min_samples));
    rng::Rng picker(rng::Rng::derive(seed, 7000 + ti));
    for (std::size_t i = 0; i < samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(picker.below(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }

    for (std::size_t i = 0; i < samples; ++i) {
      const Eigen::Index flat = coords[i];
      const Eigen::Index r = flat / p.value.cols();
      const Eigen::Index c = flat % p.value.cols();
      const double original = p.value(r, c);
      p.value(r, c) = original + epsilon;
      const double plus = loss_value();
      p.value(r, c) = original - epsilon;
      const double minus = loss_value();
      p.value(r, c) = original;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = expected(r, c);
      const double diff = std::abs(a - numeric);
      const double rel = diff <= 1e-9 ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = p.name;
      }
    }
  }
  return result;
}

}  // namespace crest::training
