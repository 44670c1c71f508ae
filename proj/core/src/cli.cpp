#include "crest/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crest/corpus.hpp"
#include "crest/errors.hpp"
#include "crest/eval.hpp"
#include "crest/models.hpp"
#include "crest/preprocess.hpp"
#include "crest/segmenter.hpp"
#include "crest/splitter.hpp"
#include "crest/training.hpp"
#include "crest/types.hpp"

namespace crest::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Caller-contract violations that CLI11 cannot catch itself (e.g. a T2
// checkpoint used without --jd). Mapped to kUsageError.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << bytes;
}

// ---------------------------------------------------------------------------
// synth

corpus::SynthSpec load_synth_spec(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("synth spec " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("synth spec must be a JSON object");
  corpus::SynthSpec spec;
  for (const auto& [key, value] : doc.items()) {
    if (key == "counts") {
      if (value.is_array()) {
        if (value.size() != kNumLabels)
          throw ParseError("counts array must have " + std::to_string(kNumLabels) + " entries");
        for (int i = 0; i < kNumLabels; ++i) spec.counts[static_cast<std::size_t>(i)] = value[static_cast<std::size_t>(i)].get<int>();
      } else if (value.is_object()) {
        for (const auto& [name, count] : value.items()) {
          auto label = label_from_string(name);
          if (!label) throw ParseError("unknown label in counts: " + name);
          spec.counts[static_cast<std::size_t>(*label)] = count.get<int>();
        }
      } else {
        throw ParseError("counts must be an array or an object keyed by label");
      }
    } else if (key == "vocab_size") {
      spec.vocab_size = value.get<int>();
    } else if (key == "signal") {
      spec.signal = value.get<double>();
    } else if (key == "seed") {
      spec.seed = value.get<std::uint64_t>();
    } else {
      throw ParseError("unknown synth spec key: " + key);
    }
  }
  return spec;
}

int do_synth(const fs::path& spec_path, const fs::path& out_dir) {
  corpus::SynthSpec spec = load_synth_spec(spec_path);
  corpus::Corpus data = corpus::generate_synthetic_corpus(spec);
  corpus::save_corpus(data, out_dir);
  std::printf("synth: %zu resumes, %zu jobs, %zu applications -> %s\n", data.resumes.size(),
              data.jobs.size(), data.applications.size(), out_dir.string().c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// segment

int do_segment(const fs::path& in_dir, const fs::path& rules_path, const fs::path& out_dir) {
  if (!fs::is_directory(in_dir)) throw DataError("not a directory: " + in_dir.string());
  segmenter::HeaderRuleSet rules =
      rules_path.empty() ? segmenter::default_rules() : segmenter::load_rules(rules_path);
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw DataError("no .txt files in " + in_dir.string());
  fs::create_directories(out_dir);
  for (const auto& path : inputs) {
    Resume resume;
    resume.applicant_id = path.stem().string();
    resume.sections = segmenter::segment(read_file(path), rules);
    write_file(out_dir / (path.stem().string() + ".json"), corpus::save_resume_json(resume));
  }
  std::printf("segment: %zu resumes -> %s\n", inputs.size(), out_dir.string().c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// split

int do_split(const std::string& task, const fs::path& corpus_dir, const std::string& ratios_text,
             std::uint64_t seed, double tolerance, const fs::path& out_path) {
  splitter::SplitRatios ratios = splitter::SplitRatios::parse(ratios_text);
  corpus::Corpus data = corpus::load_corpus(corpus_dir);
  splitter::SplitBundle bundle;
  if (task == "t1") {
    bundle = splitter::split_t1(data.resumes, ratios, seed);
  } else {
    bundle = splitter::split_t2(data.applications, data.resumes, data.jobs, ratios, seed,
                                tolerance);
  }
  splitter::SplitReport report =
      splitter::verify_split(bundle, data.resumes, data.jobs, data.applications);
  if (!report.ok)
    throw DataError("split verification failed: " + report.violations.front());
  splitter::save_manifest(out_path, bundle, report);
  std::printf("split %s: trn %d dev %d tst %d (ratios %.4f/%.4f/%.4f) -> %s\n",
              bundle.task.c_str(), report.sizes.trn, report.sizes.dev, report.sizes.tst,
              report.trn_ratio, report.dev_ratio, report.tst_ratio, out_path.string().c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// train / eval shared material

models::ModelVariant parse_variant(const std::string& name) {
  try {
    return models::ModelVariant::parse(name);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

void check_task(const models::ModelVariant& variant, const std::string& manifest_task) {
  const std::string variant_task = variant.is_t2() ? "t2" : "t1";
  if (variant_task != manifest_task)
    throw UsageError("variant " + variant.name() + " is a " + variant_task +
                     " model but the split manifest is for " + manifest_task);
}

// Resolves one manifest id list into supervised examples. T1 requires every
// resume to carry a label; T2 resolves "applicant/job" pairs.
std::vector<training::Example> examples_for(const std::string& task,
                                            const std::vector<std::string>& ids,
                                            const corpus::Corpus& data) {
  std::vector<training::Example> examples;
  examples.reserve(ids.size());
  if (task == "t1") {
    for (const Resume* resume : splitter::resumes_for(ids, data.resumes)) {
      if (!resume->annotated_label)
        throw DataError("resume without a label in split: " + resume->applicant_id);
      examples.push_back({resume, nullptr, static_cast<int>(*resume->annotated_label)});
    }
  } else {
    for (const auto& row : splitter::applications_for(ids, data)) {
      examples.push_back({row.resume, row.jd, row.match ? 1 : 0});
    }
  }
  return examples;
}

// The resumes statistics (vocabulary, document frequencies) may be computed
// from: each distinct TRN resume exactly once.
std::vector<Resume> distinct_resumes(const std::vector<training::Example>& examples) {
  std::vector<Resume> out;
  std::set<std::string> seen;
  for (const auto& example : examples) {
    if (seen.insert(example.resume->applicant_id).second) out.push_back(*example.resume);
  }
  return out;
}

int do_train(const std::string& variant_name, const fs::path& corpus_dir,
             const fs::path& splits_path, const fs::path& config_path, const fs::path& out_path,
             fs::path metrics_path) {
  models::ModelVariant variant = parse_variant(variant_name);
  corpus::Corpus data = corpus::load_corpus(corpus_dir);
  splitter::SplitBundle manifest = splitter::load_manifest(splits_path);
  check_task(variant, manifest.task);

  training::TrainConfig config =
      config_path.empty() ? training::TrainConfig{} : training::load_config(config_path);
  training::apply_env_overrides(config);

  std::vector<training::Example> trn = examples_for(manifest.task, manifest.trn, data);
  std::vector<training::Example> dev = examples_for(manifest.task, manifest.dev, data);
  if (trn.empty()) throw DataError("empty training split");

  std::vector<Resume> trn_resumes = distinct_resumes(trn);
  encoder::Vocabulary vocab =
      variant.is_t2() ? encoder::Vocabulary::build(trn_resumes, data.jobs)
                      : encoder::Vocabulary::build(trn_resumes);
  preprocess::DocFreqTable df =
      preprocess::build_df_table(trn_resumes, preprocess::default_stopwords());

  training::TrainResult result = training::train(variant, trn, dev, df, vocab, config);

  training::SeedResult& best = result.seeds[result.best_index];
  models::save_checkpoint(out_path, best.best_params, vocab, df);

  if (metrics_path.empty()) metrics_path = out_path.string() + ".metrics.csv";
  std::vector<training::EpochMetrics> rows;
  for (const auto& seed_result : result.seeds)
    rows.insert(rows.end(), seed_result.metrics.begin(), seed_result.metrics.end());
  write_file(metrics_path, training::metrics_csv(rows));

  const char* selection = dev.empty() ? "trn" : "dev";
  for (const auto& seed_result : result.seeds) {
    std::printf("seed %llu: %s accuracy %.4f (best epoch %d)\n",
                static_cast<unsigned long long>(seed_result.seed), selection,
                seed_result.best_dev_accuracy, seed_result.best_epoch);
  }
  eval::SeedReport report = eval::multi_seed_report(result.dev_accuracies);
  std::printf("%s accuracy: %s\n", selection, report.formatted.c_str());
  std::printf("checkpoint: %s (seed %llu)\n", out_path.string().c_str(),
              static_cast<unsigned long long>(best.seed));
  std::printf("metrics: %s\n", metrics_path.string().c_str());
  return kOk;
}

int do_eval(const fs::path& ckpt_path, const fs::path& corpus_dir, const fs::path& splits_path,
            const std::string& split, const fs::path& confusion_path) {
  models::Checkpoint ckpt = models::load_checkpoint(ckpt_path);
  corpus::Corpus data = corpus::load_corpus(corpus_dir);
  splitter::SplitBundle manifest = splitter::load_manifest(splits_path);
  check_task(ckpt.params.variant, manifest.task);

  const std::vector<std::string>& ids =
      split == "trn" ? manifest.trn : (split == "dev" ? manifest.dev : manifest.tst);
  std::vector<training::Example> examples = examples_for(manifest.task, ids, data);
  if (examples.empty()) throw DataError("split " + split + " is empty");

  training::EvalResult result =
      training::evaluate(ckpt.params.variant, examples, ckpt.df, ckpt.vocab, ckpt.params);
  std::printf("split %s: accuracy %.4f loss %.4f n %zu\n", split.c_str(), result.accuracy,
              result.loss, examples.size());

  if (!confusion_path.empty()) {
    std::vector<std::string> labels;
    if (manifest.task == "t1") {
      for (CompetenceLabel label : kAllLabels) labels.emplace_back(to_string(label));
    } else {
      labels = {"N", "Y"};
    }
    std::vector<int> golds;
    golds.reserve(examples.size());
    for (const auto& example : examples) golds.push_back(example.gold);
    eval::ConfusionMatrix matrix = eval::confusion(result.predictions, golds, labels);
    write_file(confusion_path, eval::confusion_csv(matrix));
    std::printf("confusion: %s\n", confusion_path.string().c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

// Accepts either a bare job-description object or a one-element jobs array.
JobDescription load_single_jd(const fs::path& path) {
  std::string bytes = read_file(path);
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError("job description " + path.string() + ": " + e.what());
  }
  if (doc.is_object()) {
    std::vector<JobDescription> jobs = corpus::load_jobs_json(json::array({doc}).dump());
    return jobs.front();
  }
  std::vector<JobDescription> jobs = corpus::load_jobs_json(bytes);
  if (jobs.size() != 1)
    throw DataError("expected exactly one job description in " + path.string() + ", found " +
                    std::to_string(jobs.size()));
  return jobs.front();
}

std::vector<double> softmax_probs(const Eigen::RowVectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::RowVectorXd exps = (logits.array() - shift).exp().matrix();
  exps /= exps.sum();
  return {exps.data(), exps.data() + exps.size()};
}

int do_predict(const fs::path& ckpt_path, const fs::path& resume_path, const fs::path& jd_path) {
  models::Checkpoint ckpt = models::load_checkpoint(ckpt_path);
  Resume resume = corpus::load_resume_json(read_file(resume_path));

  ordered_json out;
  if (ckpt.params.variant.is_t2()) {
    if (jd_path.empty()) throw UsageError("job description required for variant " +
                                          ckpt.params.variant.name() + " (pass --jd)");
    JobDescription jd = load_single_jd(jd_path);
    Eigen::RowVectorXd logits = models::logits_t2(ckpt.params.variant, resume, jd, ckpt.df,
                                                  ckpt.vocab, ckpt.params);
    std::vector<double> probs = softmax_probs(logits);
    out["match"] = models::argmax(logits) == 1 ? "Y" : "N";
    out["probs"] = ordered_json{{"N", probs[0]}, {"Y", probs[1]}};
  } else {
    if (!jd_path.empty()) throw UsageError("variant " + ckpt.params.variant.name() +
                                           " takes no job description (drop --jd)");
    Eigen::RowVectorXd logits =
        models::logits_t1(ckpt.params.variant, resume, ckpt.df, ckpt.vocab, ckpt.params);
    std::vector<double> probs = softmax_probs(logits);
    out["label"] = std::string(to_string(kAllLabels[static_cast<std::size_t>(models::argmax(logits))]));
    ordered_json dist;
    for (int i = 0; i < kNumLabels; ++i)
      dist[std::string(to_string(kAllLabels[static_cast<std::size_t>(i)]))] = probs[static_cast<std::size_t>(i)];
    out["probs"] = dist;
  }
  std::cout << out.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// stats

int do_stats(const fs::path& corpus_dir, bool pruning, int cap, const fs::path& csv_path) {
  corpus::Corpus data = corpus::load_corpus(corpus_dir);
  if (data.resumes.empty()) throw DataError("corpus has no resumes: " + corpus_dir.string());
  if (!pruning) {
    std::array<int, kNumLabels> counts{};
    int unlabeled = 0;
    for (const auto& resume : data.resumes) {
      if (resume.annotated_label)
        ++counts[static_cast<std::size_t>(*resume.annotated_label)];
      else
        ++unlabeled;
    }
    std::printf("resumes: %zu\n", data.resumes.size());
    for (int i = 0; i < kNumLabels; ++i)
      std::printf("  %-5s %d\n", std::string(to_string(kAllLabels[static_cast<std::size_t>(i)])).c_str(),
                  counts[static_cast<std::size_t>(i)]);
    if (unlabeled > 0) std::printf("  (unlabeled) %d\n", unlabeled);
    std::printf("jobs: %zu\napplications: %zu\n", data.jobs.size(), data.applications.size());
    return kOk;
  }
  preprocess::DocFreqTable df =
      preprocess::build_df_table(data.resumes, preprocess::default_stopwords());
  preprocess::PruningStats stats = preprocess::pruning_stats(data.resumes, df, cap);
  std::fputs(preprocess::render_pruning_stats(stats).c_str(), stdout);
  if (!csv_path.empty()) {
    write_file(csv_path, preprocess::pruning_stats_csv(stats));
    std::printf("csv: %s\n", csv_path.string().c_str());
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"resume screening toolkit: 5-way competence classification and "
               "resume-to-job matching"};
  app.require_subcommand(0, 1);

  std::string synth_spec, synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("--spec", synth_spec, "synth spec JSON (counts, vocab_size, signal, seed)")
      ->required();
  synth->add_option("--out", synth_out, "corpus output directory")->required();

  std::string seg_in, seg_rules, seg_out;
  CLI::App* segment = app.add_subcommand("segment", "split raw resume text into sections");
  segment->add_option("--in", seg_in, "directory of .txt resumes")->required();
  segment->add_option("--rules", seg_rules, "header rules file (pattern<TAB>section)");
  segment->add_option("--out", seg_out, "directory for resume JSON files")->required();

  std::string split_task = "t1", split_corpus, split_ratios = "75:10:15", split_out;
  std::uint64_t split_seed = 0;
  double split_tolerance = 0.05;
  CLI::App* split = app.add_subcommand("split", "write a train/dev/test manifest");
  split->add_option("--task", split_task, "t1 (resumes) or t2 (applications)")
      ->check(CLI::IsMember({"t1", "t2"}));
  split->add_option("--corpus", split_corpus, "corpus directory")->required();
  split->add_option("--ratios", split_ratios, "integer percents, e.g. 75:10:15");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--tolerance", split_tolerance, "achieved-TRN-ratio tolerance (t2)");
  split->add_option("--out", split_out, "manifest path")->required();

  std::string train_variant, train_corpus, train_splits, train_config, train_out, train_metrics;
  CLI::App* train = app.add_subcommand("train", "train one model variant");
  train->add_option("--variant", train_variant,
                    "Wr, P, P+I, C, C+I, Wrb, P+I+J, P+I+J+A, P+I+J+A-E, C+I+J, C+I+J+A, C+I+J+A-E")
      ->required();
  train->add_option("--corpus", train_corpus, "corpus directory")->required();
  train->add_option("--splits", train_splits, "split manifest")->required();
  train->add_option("--config", train_config, "config file (key=value or JSON)");
  train->add_option("--out", train_out, "checkpoint output path")->required();
  train->add_option("--metrics", train_metrics, "metrics CSV path (default <out>.metrics.csv)");

  std::string eval_ckpt, eval_corpus, eval_splits, eval_split = "tst", eval_confusion;
  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  evalc->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  evalc->add_option("--corpus", eval_corpus, "corpus directory")->required();
  evalc->add_option("--splits", eval_splits, "split manifest")->required();
  evalc->add_option("--split", eval_split, "trn, dev, or tst")
      ->check(CLI::IsMember({"trn", "dev", "tst"}));
  evalc->add_option("--confusion", eval_confusion, "confusion matrix CSV output");

  std::string pred_ckpt, pred_resume, pred_jd;
  CLI::App* predict = app.add_subcommand("predict", "classify one resume JSON");
  predict->add_option("--ckpt", pred_ckpt, "checkpoint path")->required();
  predict->add_option("--resume", pred_resume, "resume JSON file")->required();
  predict->add_option("--jd", pred_jd, "job description JSON (matching checkpoints)");

  std::string stats_corpus, stats_csv;
  bool stats_pruning = false;
  int stats_cap = 128;
  CLI::App* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("--corpus", stats_corpus, "corpus directory")->required();
  stats->add_flag("--pruning", stats_pruning, "per-section lengths before/after pruning");
  stats->add_option("--cap", stats_cap, "pruning length cap (with --pruning)");
  stats->add_option("--csv", stats_csv, "also write the table as CSV (with --pruning)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error: usage: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (synth->parsed()) return do_synth(synth_spec, synth_out);
    if (segment->parsed()) return do_segment(seg_in, seg_rules, seg_out);
    if (split->parsed())
      return do_split(split_task, split_corpus, split_ratios, split_seed, split_tolerance,
                      split_out);
    if (train->parsed())
      return do_train(train_variant, train_corpus, train_splits, train_config, train_out,
                      train_metrics);
    if (evalc->parsed())
      return do_eval(eval_ckpt, eval_corpus, eval_splits, eval_split, eval_confusion);
    if (predict->parsed()) return do_predict(pred_ckpt, pred_resume, pred_jd);
    if (stats->parsed()) return do_stats(stats_corpus, stats_pruning, stats_cap, stats_csv);
    std::cout << app.help();
    return kOk;
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kUsageError;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return kNumericError;
  } catch (const ParseError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kDataError;
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace crest::cli
