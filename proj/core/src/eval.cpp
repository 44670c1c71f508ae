#include "crest/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "crest/errors.hpp"

namespace crest::eval {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& golds) {
  if (predictions.empty()) throw DataError("accuracy: no predictions");
  if (predictions.size() != golds.size())
    throw DataError("accuracy: prediction/gold counts disagree");
  int matches = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == golds[i]) ++matches;
  return static_cast<double>(matches) / static_cast<double>(predictions.size());
}

int ConfusionMatrix::total() const {
  int n = 0;
  for (const auto& row : counts)
    for (int c : row) n += c;
  return n;
}

int ConfusionMatrix::diagonal() const {
  int n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const int n = total();
  if (n == 0) throw DataError("confusion matrix is empty");
  return static_cast<double>(diagonal()) / static_cast<double>(n);
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& golds,
                          std::vector<std::string> labels) {
  if (predictions.size() != golds.size())
    throw DataError("confusion: prediction/gold counts disagree");
  if (labels.empty()) throw DataError("confusion: no labels");
  const int d = static_cast<int>(labels.size());
  ConfusionMatrix matrix;
  matrix.labels = std::move(labels);
  matrix.counts.assign(static_cast<std::size_t>(d), std::vector<int>(static_cast<std::size_t>(d), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int gold = golds[i];
    const int pred = predictions[i];
    if (gold < 0 || gold >= d || pred < 0 || pred >= d)
      throw DataError("confusion: label index out of range");
    ++matrix.counts[static_cast<std::size_t>(gold)][static_cast<std::size_t>(pred)];
  }
  return matrix;
}

std::string confusion_csv(const ConfusionMatrix& matrix) {
  std::ostringstream out;
  out << "gold";
  for (const auto& label : matrix.labels) out << "," << label;
  out << "\n";
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    out << matrix.labels[i];
    for (int c : matrix.counts[i]) out << "," << c;
    out << "\n";
  }
  return out.str();
}

std::string render_confusion(const ConfusionMatrix& matrix) {
  std::size_t width = 4;
  for (const auto& label : matrix.labels) width = std::max(width, label.size());
  for (const auto& row : matrix.counts)
    for (int c : row) width = std::max(width, std::to_string(c).size());
  const auto pad = [&](const std::string& cell) {
    return std::string(width + 2 - cell.size(), ' ') + cell;
  };
  std::ostringstream out;
  out << pad("gold");
  for (const auto& label : matrix.labels) out << pad(label);
  out << "\n";
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    out << pad(matrix.labels[i]);
    for (int c : matrix.counts[i]) out << pad(std::to_string(c));
    out << "\n";
  }
  return out.str();
}

SeedReport multi_seed_report(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw DataError("seed report: no accuracies");
  SeedReport report;
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  report.mean = sum / static_cast<double>(accuracies.size());
  double sq = 0.0;
  for (double a : accuracies) sq += (a - report.mean) * (a - report.mean);
  report.stddev = std::sqrt(sq / static_cast<double>(accuracies.size()));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f (±%.2f)", 100.0 * report.mean,
                100.0 * report.stddev);
  report.formatted = buf;
  return report;
}

SeedReport parse_seed_report(const std::string& formatted) {
  double mean = 0.0;
  double stddev = 0.0;
  if (std::sscanf(formatted.c_str(), "%lf (±%lf)", &mean, &stddev) != 2)
    throw ParseError("seed report: cannot parse: " + formatted);
  SeedReport report;
  report.mean = mean / 100.0;
  report.stddev = stddev / 100.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f (±%.2f)", mean, stddev);
  report.formatted = buf;
  return report;
}

}  // namespace crest::eval
