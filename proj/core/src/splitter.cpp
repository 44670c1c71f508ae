#include "crest/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "crest/errors.hpp"
#include "crest/rng.hpp"
#include "json.hpp"

namespace crest::splitter {

using nlohmann::json;

void SplitRatios::validate() const {
  if (trn <= 0.0 || dev < 0.0 || tst < 0.0) throw DataError("split ratios must be nonnegative with trn > 0");
  if (std::abs(trn + dev + tst - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
}

SplitRatios SplitRatios::parse(const std::string& text) {
  std::array<double, 3> parts{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t stop = i < 2 ? text.find(':', start) : text.size();
    if (stop == std::string::npos) throw DataError("split ratios: expected trn:dev:tst, got " + text);
    try {
      parts[static_cast<std::size_t>(i)] = std::stod(text.substr(start, stop - start));
    } catch (const std::exception&) {
      throw DataError("split ratios: not a number in " + text);
    }
    start = stop + 1;
  }
  const double sum = parts[0] + parts[1] + parts[2];
  SplitRatios ratios;
  if (std::abs(sum - 100.0) < 1e-6) {
    ratios = {parts[0] / 100.0, parts[1] / 100.0, parts[2] / 100.0};
  } else if (std::abs(sum - 1.0) < 1e-9) {
    ratios = {parts[0], parts[1], parts[2]};
  } else {
    throw DataError("split ratios must sum to 1 (or 100): " + text);
  }
  ratios.validate();
  return ratios;
}

namespace {

// floor quotas, then hand out the leftover by largest fractional remainder;
// remainder ties break toward the earlier set (TRN, then DEV).
std::array<int, 3> largest_remainder(int n, const std::array<double, 3>& shares) {
  std::array<int, 3> counts{};
  std::array<double, 3> fracs{};
  int assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = n * shares[static_cast<std::size_t>(s)];
    counts[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(exact));
    fracs[static_cast<std::size_t>(s)] = exact - std::floor(exact);
    assigned += counts[static_cast<std::size_t>(s)];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fracs[static_cast<std::size_t>(a)] > fracs[static_cast<std::size_t>(b)]; });
  for (int extra = 0; extra < n - assigned; ++extra)
    ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(extra % 3)])];
  return counts;
}

}  // namespace

SplitBundle split_t1(const std::vector<Resume>& resumes, const SplitRatios& ratios,
                     std::uint64_t seed) {
  ratios.validate();
  if (resumes.empty()) throw DataError("split: no resumes");

  std::array<std::vector<std::string>, kNumLabels> groups;
  for (const auto& resume : resumes) {
    if (!resume.annotated_label)
      throw DataError("split: unlabeled resume: " + resume.applicant_id);
    groups[static_cast<std::size_t>(*resume.annotated_label)].push_back(resume.applicant_id);
  }

  rng::Rng rng(seed);
  std::unordered_map<std::string, int> assignment;  // id -> set index
  for (int label = 0; label < kNumLabels; ++label) {
    auto& ids = groups[static_cast<std::size_t>(label)];
    if (ids.empty()) continue;
    rng.shuffle(ids);
    const int n = static_cast<int>(ids.size());
    std::array<int, 3> counts{};
    if (n < 3) {
      counts = {n, 0, 0};  // too few to stratify; all to TRN, never dropped
    } else {
      counts = largest_remainder(n, {ratios.trn, ratios.dev, ratios.tst});
    }
    int cursor = 0;
    for (int set = 0; set < 3; ++set)
      for (int k = 0; k < counts[static_cast<std::size_t>(set)]; ++k)
        assignment.emplace(ids[static_cast<std::size_t>(cursor++)], set);
  }

  SplitBundle bundle;
  bundle.task = "t1";
  bundle.seed = seed;
  for (const auto& resume : resumes) {
    switch (assignment.at(resume.applicant_id)) {
      case 0: bundle.trn.push_back(resume.applicant_id); break;
      case 1: bundle.dev.push_back(resume.applicant_id); break;
      default: bundle.tst.push_back(resume.applicant_id); break;
    }
  }
  return bundle;
}

namespace {

std::string cell_key(CompetenceLabel level, bool match) {
  return std::string(to_string(level)) + "|" + (match ? "Y" : "N");
}

}  // namespace

SplitBundle split_t2(const std::vector<Application>& applications,
                     const std::vector<Resume>& resumes,
                     const std::vector<JobDescription>& jobs, const SplitRatios& ratios,
                     std::uint64_t seed, double tolerance) {
  ratios.validate();
  if (tolerance <= 0.0) throw DataError("split: tolerance must be positive");
  if (applications.empty()) throw DataError("split: no applications");

  std::unordered_set<std::string> resume_ids;
  for (const auto& r : resumes) resume_ids.insert(r.applicant_id);
  std::unordered_map<std::string, const JobDescription*> job_by_id;
  for (const auto& j : jobs) job_by_id.emplace(j.job_id, &j);

  // Applications grouped into (applied level x match) cells, shuffled once;
  // the bisection below re-drafts from the same ordering every iteration.
  std::map<std::string, std::vector<int>> cells;
  for (std::size_t i = 0; i < applications.size(); ++i) {
    const auto& app = applications[i];
    if (!resume_ids.count(app.applicant_id))
      throw DataError("split: application references unknown resume: " + app.applicant_id);
    const auto job_it = job_by_id.find(app.job_id);
    if (job_it == job_by_id.end())
      throw DataError("split: application references unknown job: " + app.job_id);
    cells[cell_key(job_it->second->level, app.match)].push_back(static_cast<int>(i));
  }
  rng::Rng rng(seed);
  for (auto& [key, members] : cells) rng.shuffle(members);

  std::unordered_map<std::string, std::vector<int>> by_applicant;
  int multi_mass = 0;
  for (std::size_t i = 0; i < applications.size(); ++i)
    by_applicant[applications[i].applicant_id].push_back(static_cast<int>(i));
  for (const auto& [id, members] : by_applicant)
    if (members.size() > 1) multi_mass += static_cast<int>(members.size());

  const double target = ratios.trn;
  const int total = static_cast<int>(applications.size());
  // Overlap promotion only ever grows TRN, so start below the target by half
  // the estimated overlap mass and bisect from there.
  double trial = std::max(0.0, target - 0.5 * static_cast<double>(multi_mass) / total);
  double lo = 0.0;
  double hi = target;
  double best_ratio = -1.0;
  std::vector<char> in_trn(applications.size(), 0);

  bool converged = false;
  for (int iteration = 0; iteration < 50 && !converged; ++iteration) {
    std::fill(in_trn.begin(), in_trn.end(), 0);
    for (const auto& [key, members] : cells) {
      const int take = static_cast<int>(std::floor(trial * static_cast<double>(members.size())));
      for (int k = 0; k < take; ++k) in_trn[static_cast<std::size_t>(members[static_cast<std::size_t>(k)])] = 1;
    }
    // Applicants straddling the draft boundary move wholly into TRN.
    for (const auto& [id, members] : by_applicant) {
      bool any_trn = false;
      bool any_eval = false;
      for (int i : members) (in_trn[static_cast<std::size_t>(i)] ? any_trn : any_eval) = true;
      if (any_trn && any_eval)
        for (int i : members) in_trn[static_cast<std::size_t>(i)] = 1;
    }
    int trn_count = 0;
    for (char flag : in_trn) trn_count += flag;
    const double achieved = static_cast<double>(trn_count) / total;
    if (best_ratio < 0.0 || std::abs(achieved - target) < std::abs(best_ratio - target))
      best_ratio = achieved;
    if (std::abs(achieved - target) <= tolerance) {
      converged = true;
    } else if (achieved > target) {
      hi = trial;
      trial = 0.5 * (lo + hi);
    } else {
      lo = trial;
      trial = 0.5 * (lo + hi);
    }
  }
  if (!converged) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "t2 split did not converge after 50 iterations; best TRN ratio %.4f (target %.4f)",
                  best_ratio, target);
    throw DataError(buf);
  }

  // Divide the evaluation remainder into DEV/TST applicant-atomically while
  // tracking per-cell quotas.
  const double dev_share =
      ratios.dev + ratios.tst > 0.0 ? ratios.dev / (ratios.dev + ratios.tst) : 0.0;
  std::map<std::string, double> dev_need;    // cell -> fractional DEV quota
  std::map<std::string, int> dev_have;
  std::unordered_map<std::string, int> eval_group_size;
  for (std::size_t i = 0; i < applications.size(); ++i) {
    if (in_trn[i]) continue;
    const auto& app = applications[i];
    dev_need[cell_key(job_by_id.at(app.job_id)->level, app.match)] += dev_share;
    ++eval_group_size[app.applicant_id];
  }

  std::vector<char> in_dev(applications.size(), 0);
  // Multi-application evaluation groups first (largest first, id-ordered),
  // each placed where its cells still have the most unfilled quota.
  std::vector<std::pair<std::string, int>> multi_groups;
  for (const auto& [id, size] : eval_group_size)
    if (size > 1) multi_groups.emplace_back(id, size);
  std::sort(multi_groups.begin(), multi_groups.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [applicant, size] : multi_groups) {
    double dev_deficit = 0.0;
    for (int i : by_applicant.at(applicant)) {
      if (in_trn[static_cast<std::size_t>(i)]) continue;
      const auto& app = applications[static_cast<std::size_t>(i)];
      const std::string key = cell_key(job_by_id.at(app.job_id)->level, app.match);
      dev_deficit += dev_need[key] - dev_have[key];
    }
    if (dev_deficit > 0.5 * size) {
      for (int i : by_applicant.at(applicant)) {
        if (in_trn[static_cast<std::size_t>(i)]) continue;
        in_dev[static_cast<std::size_t>(i)] = 1;
        const auto& app = applications[static_cast<std::size_t>(i)];
        ++dev_have[cell_key(job_by_id.at(app.job_id)->level, app.match)];
      }
    }
  }
  // Single-application groups fill each cell's remaining DEV quota in the
  // shuffled cell order.
  for (const auto& [key, members] : cells) {
    int quota = static_cast<int>(std::llround(dev_need[key])) - dev_have[key];
    for (int i : members) {
      if (quota <= 0) break;
      if (in_trn[static_cast<std::size_t>(i)] || in_dev[static_cast<std::size_t>(i)]) continue;
      if (eval_group_size[applications[static_cast<std::size_t>(i)].applicant_id] > 1) continue;
      in_dev[static_cast<std::size_t>(i)] = 1;
      --quota;
    }
  }

  SplitBundle bundle;
  bundle.task = "t2";
  bundle.seed = seed;
  for (std::size_t i = 0; i < applications.size(); ++i) {
    const std::string id = applications[i].id();
    if (in_trn[i]) {
      bundle.trn.push_back(id);
    } else if (in_dev[i]) {
      bundle.dev.push_back(id);
    } else {
      bundle.tst.push_back(id);
    }
  }
  return bundle;
}

namespace {

void count_cell(std::map<std::string, SetCounts>& cells, const std::string& key, int set) {
  SetCounts& c = cells[key];
  if (set == 0) ++c.trn;
  else if (set == 1) ++c.dev;
  else ++c.tst;
}

}  // namespace

SplitReport verify_split(const SplitBundle& bundle, const std::vector<Resume>& resumes,
                         const std::vector<JobDescription>& jobs,
                         const std::vector<Application>& applications) {
  SplitReport report;
  const bool t2 = bundle.task == "t2";

  // Universe of ids and their distribution cell.
  std::unordered_map<std::string, std::string> cell_of;
  if (t2) {
    std::unordered_map<std::string, const JobDescription*> job_by_id;
    for (const auto& j : jobs) job_by_id.emplace(j.job_id, &j);
    for (const auto& app : applications) {
      const auto it = job_by_id.find(app.job_id);
      if (it == job_by_id.end()) {
        report.violations.push_back("application references unknown job: " + app.job_id);
        continue;
      }
      cell_of[app.id()] = cell_key(it->second->level, app.match);
    }
  } else {
    for (const auto& resume : resumes) {
      cell_of[resume.applicant_id] =
          resume.annotated_label ? std::string(to_string(*resume.annotated_label)) : "unlabeled";
    }
  }

  const std::array<const std::vector<std::string>*, 3> sets = {&bundle.trn, &bundle.dev, &bundle.tst};
  const std::array<const char*, 3> set_names = {"trn", "dev", "tst"};
  std::unordered_map<std::string, int> seen;  // id -> set
  std::unordered_map<std::string, int> applicant_set;
  for (int s = 0; s < 3; ++s) {
    for (const auto& id : *sets[static_cast<std::size_t>(s)]) {
      const auto cell_it = cell_of.find(id);
      if (cell_it == cell_of.end()) {
        report.violations.push_back(std::string("unknown id in ") + set_names[static_cast<std::size_t>(s)] + ": " + id);
        continue;
      }
      const auto [it, inserted] = seen.emplace(id, s);
      if (!inserted) {
        report.violations.push_back("id in both " + std::string(set_names[static_cast<std::size_t>(it->second)]) +
                                    " and " + set_names[static_cast<std::size_t>(s)] + ": " + id);
        continue;
      }
      count_cell(report.cells, cell_it->second, s);
      if (t2) {
        const std::string applicant = id.substr(0, id.find('/'));
        const auto [ait, ainserted] = applicant_set.emplace(applicant, s);
        if (!ainserted && ait->second != s)
          report.violations.push_back("applicant spans " + std::string(set_names[static_cast<std::size_t>(ait->second)]) +
                                      " and " + set_names[static_cast<std::size_t>(s)] + ": " + applicant);
      }
    }
  }
  for (const auto& [id, cell] : cell_of) {
    if (!seen.count(id)) report.violations.push_back("id missing from every set: " + id);
  }

  report.sizes.trn = static_cast<int>(bundle.trn.size());
  report.sizes.dev = static_cast<int>(bundle.dev.size());
  report.sizes.tst = static_cast<int>(bundle.tst.size());
  const int total = report.sizes.total();
  if (total > 0) {
    report.trn_ratio = static_cast<double>(report.sizes.trn) / total;
    report.dev_ratio = static_cast<double>(report.sizes.dev) / total;
    report.tst_ratio = static_cast<double>(report.sizes.tst) / total;
  }

  const double universe = static_cast<double>(cell_of.size());
  for (const auto& [key, counts] : report.cells) {
    const double input_share = universe > 0 ? counts.total() / universe : 0.0;
    const std::array<int, 3> per_set = {counts.trn, counts.dev, counts.tst};
    const std::array<int, 3> sizes = {report.sizes.trn, report.sizes.dev, report.sizes.tst};
    for (int s = 0; s < 3; ++s) {
      if (sizes[static_cast<std::size_t>(s)] == 0) continue;
      const double share = static_cast<double>(per_set[static_cast<std::size_t>(s)]) /
                           sizes[static_cast<std::size_t>(s)];
      report.max_cell_delta = std::max(report.max_cell_delta, std::abs(share - input_share));
    }
  }

  report.ok = report.violations.empty();
  return report;
}

void save_manifest(const std::filesystem::path& path, const SplitBundle& bundle,
                   const SplitReport& report) {
  json j;
  j["task"] = bundle.task;
  j["seed"] = bundle.seed;
  j["trn"] = bundle.trn;
  j["dev"] = bundle.dev;
  j["tst"] = bundle.tst;
  json cells = json::object();
  for (const auto& [key, counts] : report.cells)
    cells[key] = {{"trn", counts.trn}, {"dev", counts.dev}, {"tst", counts.tst}};
  j["report"] = {{"ok", report.ok},
                 {"violations", report.violations},
                 {"sizes", {{"trn", report.sizes.trn}, {"dev", report.sizes.dev}, {"tst", report.sizes.tst}}},
                 {"ratios", {{"trn", report.trn_ratio}, {"dev", report.dev_ratio}, {"tst", report.tst_ratio}}},
                 {"cells", std::move(cells)},
                 {"max_cell_delta", report.max_cell_delta}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write split manifest: " + path.string());
  out << j.dump(2) << "\n";
}

SplitBundle load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open split manifest: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json j = json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("split manifest: malformed JSON");
  for (const char* key : {"task", "trn", "dev", "tst"})
    if (!j.contains(key)) throw ParseError(std::string("split manifest: missing key: ") + key);
  SplitBundle bundle;
  bundle.task = j["task"].get<std::string>();
  if (bundle.task != "t1" && bundle.task != "t2")
    throw ParseError("split manifest: task must be t1 or t2");
  bundle.seed = j.value("seed", std::uint64_t{0});
  bundle.trn = j["trn"].get<std::vector<std::string>>();
  bundle.dev = j["dev"].get<std::vector<std::string>>();
  bundle.tst = j["tst"].get<std::vector<std::string>>();
  return bundle;
}

std::vector<const Resume*> resumes_for(const std::vector<std::string>& ids,
                                       const std::vector<Resume>& resumes) {
  std::unordered_map<std::string, const Resume*> by_id;
  for (const auto& resume : resumes) by_id.emplace(resume.applicant_id, &resume);
  std::vector<const Resume*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("manifest id not in corpus: " + id);
    out.push_back(it->second);
  }
  return out;
}

std::vector<MatchExample> applications_for(const std::vector<std::string>& ids,
                                           const corpus::Corpus& data) {
  std::unordered_map<std::string, const Resume*> resume_by_id;
  for (const auto& resume : data.resumes) resume_by_id.emplace(resume.applicant_id, &resume);
  std::unordered_map<std::string, const JobDescription*> job_by_id;
  for (const auto& job : data.jobs) job_by_id.emplace(job.job_id, &job);
  std::unordered_map<std::string, const Application*> app_by_id;
  for (const auto& app : data.applications) app_by_id.emplace(app.id(), &app);

  std::vector<MatchExample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto app_it = app_by_id.find(id);
    if (app_it == app_by_id.end()) throw DataError("manifest id not in corpus: " + id);
    const auto resume_it = resume_by_id.find(app_it->second->applicant_id);
    const auto job_it = job_by_id.find(app_it->second->job_id);
    if (resume_it == resume_by_id.end())
      throw DataError("application references unknown resume: " + app_it->second->applicant_id);
    if (job_it == job_by_id.end())
      throw DataError("application references unknown job: " + app_it->second->job_id);
    out.push_back(MatchExample{resume_it->second, job_it->second, app_it->second->match});
  }
  return out;
}

}  // namespace crest::splitter
