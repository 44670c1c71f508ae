#include "crest/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "crest/errors.hpp"
#include "crest/rng.hpp"
#include "json.hpp"

namespace crest::corpus {

using nlohmann::json;

namespace {

json parse_json(const std::string& bytes, const std::string& what) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ParseError(what + ": malformed JSON");
  return j;
}

TokenList parse_token_array(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ParseError(path + ": expected an array of strings");
  TokenList tokens;
  tokens.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string())
      throw ParseError(path + "[" + std::to_string(i) + "]: token must be a string");
    tokens.push_back(arr[i].get<std::string>());
  }
  return tokens;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << bytes;
}

}  // namespace

std::string save_resume_json(const Resume& resume) {
  json sections = json::object();
  for (SectionKind kind : kAllSections) {
    sections[std::string(to_string(kind))] = resume.section(kind);
  }
  json j;
  j["id"] = resume.applicant_id;
  if (resume.annotated_label) {
    j["label"] = std::string(to_string(*resume.annotated_label));
  } else {
    j["label"] = nullptr;
  }
  j["sections"] = sections;
  return j.dump(2) + "\n";
}

Resume load_resume_json(const std::string& bytes) {
  json j = parse_json(bytes, "resume");
  if (!j.is_object()) throw ParseError("resume: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "id" && key != "label" && key != "sections")
      throw ParseError(key + ": unknown key");
  }
  Resume resume;
  if (!j.contains("id") || !j["id"].is_string())
    throw ParseError("id: required string");
  resume.applicant_id = j["id"].get<std::string>();
  if (resume.applicant_id.empty()) throw ParseError("id: must be nonempty");
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw ParseError("label: expected string or null");
    const std::string name = j["label"].get<std::string>();
    auto label = label_from_string(name);
    if (!label) throw ParseError("label: unknown label \"" + name + "\"");
    resume.annotated_label = *label;
  }
  if (!j.contains("sections") || !j["sections"].is_object())
    throw ParseError("sections: required object");
  for (const auto& [name, value] : j["sections"].items()) {
    auto kind = section_from_string(name);
    if (!kind) throw ParseError("sections." + name + ": unknown section");
    resume.section(*kind) = parse_token_array(value, "sections." + name);
  }
  return resume;
}

std::string save_jobs_json(const std::vector<JobDescription>& jobs) {
  json arr = json::array();
  for (const auto& job : jobs) {
    json j;
    j["id"] = job.job_id;
    j["level"] = std::string(to_string(job.level));
    j["tokens"] = job.tokens;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<JobDescription> load_jobs_json(const std::string& bytes) {
  json arr = parse_json(bytes, "jobs");
  if (!arr.is_array()) throw ParseError("jobs: expected a JSON array");
  std::vector<JobDescription> jobs;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "jobs[" + std::to_string(i) + "]";
    const json& j = arr[i];
    if (!j.is_object() || !j.contains("id") || !j.contains("level") || !j.contains("tokens"))
      throw ParseError(path + ": expected {id, level, tokens}");
    JobDescription job;
    if (!j["id"].is_string()) throw ParseError(path + ".id: expected string");
    job.job_id = j["id"].get<std::string>();
    if (!j["level"].is_string()) throw ParseError(path + ".level: expected string");
    auto level = label_from_string(j["level"].get<std::string>());
    if (!level || *level == CompetenceLabel::kNQ)
      throw ParseError(path + ".level: must be CRC1..CRC4");
    job.level = *level;
    job.tokens = parse_token_array(j["tokens"], path + ".tokens");
    if (job.tokens.empty()) throw ParseError(path + ".tokens: must be nonempty");
    jobs.push_back(std::move(job));
  }
  return jobs;
}

std::string save_applications_json(const std::vector<Application>& applications) {
  json arr = json::array();
  for (const auto& app : applications) {
    json j;
    j["applicant_id"] = app.applicant_id;
    j["job_id"] = app.job_id;
    j["match"] = app.match ? "Y" : "N";
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<Application> load_applications_json(const std::string& bytes) {
  json arr = parse_json(bytes, "applications");
  if (!arr.is_array()) throw ParseError("applications: expected a JSON array");
  std::vector<Application> apps;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "applications[" + std::to_string(i) + "]";
    const json& j = arr[i];
    if (!j.is_object() || !j.contains("applicant_id") || !j.contains("job_id") ||
        !j.contains("match"))
      throw ParseError(path + ": expected {applicant_id, job_id, match}");
    Application app;
    if (!j["applicant_id"].is_string()) throw ParseError(path + ".applicant_id: expected string");
    app.applicant_id = j["applicant_id"].get<std::string>();
    if (!j["job_id"].is_string()) throw ParseError(path + ".job_id: expected string");
    app.job_id = j["job_id"].get<std::string>();
    if (!j["match"].is_string()) throw ParseError(path + ".match: expected \"Y\" or \"N\"");
    const std::string m = j["match"].get<std::string>();
    if (m != "Y" && m != "N") throw ParseError(path + ".match: expected \"Y\" or \"N\"");
    app.match = (m == "Y");
    apps.push_back(std::move(app));
  }
  return apps;
}

std::vector<Resume> dedup_across_levels(const std::vector<LeveledApplication>& rows) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<CompetenceLabel, const Resume*>> best;
  for (const auto& row : rows) {
    auto it = best.find(row.applicant_id);
    if (it == best.end()) {
      order.push_back(row.applicant_id);
      best.emplace(row.applicant_id, std::make_pair(row.applied_level, &row.resume));
    } else if (static_cast<int>(row.applied_level) > static_cast<int>(it->second.first)) {
      it->second = {row.applied_level, &row.resume};
    }
    // Same or lower level for a seen applicant: within-level duplicate or
    // superseded application; first occurrence at the retained level wins.
  }
  std::vector<Resume> result;
  result.reserve(order.size());
  for (const auto& id : order) result.push_back(*best.at(id).second);
  return result;
}

std::array<int, kNumLabels> scale_label_counts(const std::array<double, kNumLabels>& proportions,
                                               int total) {
  double sum = 0.0;
  for (double p : proportions) sum += p;
  if (sum <= 0.0 || total < 0) throw DataError("scale_label_counts: invalid proportions/total");

  std::array<int, kNumLabels> counts{};
  std::array<double, kNumLabels> remainders{};
  int allocated = 0;
  for (int i = 0; i < kNumLabels; ++i) {
    const double exact = static_cast<double>(total) * proportions[i] / sum;
    counts[i] = static_cast<int>(exact);
    remainders[i] = exact - counts[i];
    allocated += counts[i];
  }
  std::array<int, kNumLabels> idx{};
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (int k = 0; allocated < total; ++k) {
    ++counts[idx[k % kNumLabels]];
    ++allocated;
  }
  return counts;
}

std::string marker_token(CompetenceLabel label) {
  std::string name(to_string(label));
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return "marker_" + name;
}

std::string jd_marker_token(CompetenceLabel level) {
  std::string name(to_string(level));
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return "jdmarker_" + name;
}

namespace {

// Presence rates per section (Profile, Education, WorkExperience, Activities,
// Skills, Others). The first three are near-always present, the rest sparse.
constexpr std::array<double, kNumSections> kPresenceRate = {0.95, 0.96, 0.98,
                                                            0.42, 0.37, 0.33};
// Token-count range per section when present.
constexpr std::array<std::pair<int, int>, kNumSections> kLengthRange = {{
    {8, 30},   // Profile
    {10, 40},  // Education
    {20, 80},  // WorkExperience
    {5, 25},   // Activities
    {5, 25},   // Skills
    {5, 20},   // Others
}};
constexpr int kMarkerCopies = 3;
constexpr int kJobsPerLevel = 3;

const std::vector<std::string>& distractors() {
  static const std::vector<std::string> kPool = {
      "clinical", "research",  "study",    "patient", "data",
      "trial",    "protocol",  "hospital", "care",    "team",
  };
  return kPool;
}

std::string noise_token(rng::Rng& rng, int vocab_size) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tok%04d",
                static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size))));
  return buf;
}

TokenList random_tokens(rng::Rng& rng, int count, int vocab_size) {
  TokenList tokens;
  tokens.reserve(static_cast<std::size_t>(count));
  const auto& pool = distractors();
  for (int i = 0; i < count; ++i) {
    if (rng.bernoulli(0.25)) {
      tokens.push_back(pool[rng.below(pool.size())]);
    } else {
      tokens.push_back(noise_token(rng, vocab_size));
    }
  }
  return tokens;
}

}  // namespace

Corpus generate_synthetic_corpus(const SynthSpec& spec) {
  if (spec.total() <= 0) throw DataError("synthetic corpus: zero total resume count");
  if (spec.vocab_size <= 0) throw DataError("synthetic corpus: vocab_size must be positive");
  if (spec.signal < 0.0 || spec.signal > 1.0)
    throw DataError("synthetic corpus: signal must be in [0,1]");

  rng::Rng rng(rng::Rng::derive(spec.seed, 0));
  Corpus out;

  // Jobs first so applications can reference them.
  for (int lv = 1; lv <= 4; ++lv) {
    const auto level = static_cast<CompetenceLabel>(lv);
    for (int k = 0; k < kJobsPerLevel; ++k) {
      JobDescription job;
      job.level = level;
      std::string level_name(to_string(level));
      std::transform(level_name.begin(), level_name.end(), level_name.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      job.job_id = "j-" + level_name + "-" + std::to_string(k);
      const int len = rng.uniform_int(20, 60);
      job.tokens = random_tokens(rng, len, spec.vocab_size);
      // Plant the level marker at a few fixed-count random positions.
      for (int c = 0; c < kMarkerCopies; ++c) {
        const auto pos = static_cast<std::size_t>(rng.below(job.tokens.size() + 1));
        job.tokens.insert(job.tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                          jd_marker_token(level));
      }
      out.jobs.push_back(std::move(job));
    }
  }

  int serial = 0;
  for (int li = 0; li < kNumLabels; ++li) {
    const auto label = static_cast<CompetenceLabel>(li);
    for (int n = 0; n < spec.counts[li]; ++n, ++serial) {
      Resume resume;
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "a%05d", serial);
      resume.applicant_id = idbuf;
      resume.annotated_label = label;

      for (int si = 0; si < kNumSections; ++si) {
        if (!rng.bernoulli(kPresenceRate[si])) continue;
        const auto [lo, hi] = kLengthRange[si];
        resume.sections[si] = random_tokens(rng, rng.uniform_int(lo, hi), spec.vocab_size);
      }
      if (rng.bernoulli(spec.signal)) {
        auto& work = resume.section(SectionKind::kWorkExperience);
        if (work.empty()) {
          const auto [lo, hi] = kLengthRange[static_cast<int>(SectionKind::kWorkExperience)];
          work = random_tokens(rng, rng.uniform_int(lo, hi), spec.vocab_size);
        }
        for (int c = 0; c < kMarkerCopies; ++c) {
          const auto pos = static_cast<std::size_t>(rng.below(work.size() + 1));
          work.insert(work.begin() + static_cast<std::ptrdiff_t>(pos), marker_token(label));
        }
      }

      // 1-3 applications to distinct levels; biased toward the true level so
      // both Y and N labels occur at useful rates.
      int napps = 1;
      {
        const double u = rng.uniform();
        if (u >= 0.80) napps = (u < 0.95) ? 2 : 3;
      }
      std::vector<int> levels = {1, 2, 3, 4};
      rng.shuffle(levels);
      if (label != CompetenceLabel::kNQ && rng.bernoulli(0.6)) {
        // Move the true level to the front so it is among the applied ones.
        auto it = std::find(levels.begin(), levels.end(), static_cast<int>(label));
        std::iter_swap(levels.begin(), it);
      }
      for (int a = 0; a < napps; ++a) {
        const auto level = static_cast<CompetenceLabel>(levels[static_cast<std::size_t>(a)]);
        const int job_index =
            (levels[static_cast<std::size_t>(a)] - 1) * kJobsPerLevel +
            static_cast<int>(rng.below(kJobsPerLevel));
        Application app;
        app.applicant_id = resume.applicant_id;
        app.job_id = out.jobs[static_cast<std::size_t>(job_index)].job_id;
        app.match = (level == label);
        out.applications.push_back(std::move(app));
      }
      out.resumes.push_back(std::move(resume));
    }
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& resume : corpus.resumes) {
    write_file(dir / (resume.applicant_id + ".json"), save_resume_json(resume));
  }
  write_file(dir / "jobs.json", save_jobs_json(corpus.jobs));
  write_file(dir / "applications.json", save_applications_json(corpus.applications));
}

Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("corpus: not a directory: " + dir.string());
  Corpus corpus;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const auto name = entry.path().filename().string();
    if (name == "jobs.json" || name == "applications.json") continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    try {
      corpus.resumes.push_back(load_resume_json(read_file(p)));
    } catch (const ParseError& e) {
      throw ParseError(p.filename().string() + ": " + e.what());
    }
  }
  if (std::filesystem::exists(dir / "jobs.json"))
    corpus.jobs = load_jobs_json(read_file(dir / "jobs.json"));
  if (std::filesystem::exists(dir / "applications.json"))
    corpus.applications = load_applications_json(read_file(dir / "applications.json"));
  return corpus;
}

}  // namespace crest::corpus
