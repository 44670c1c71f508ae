#pragma once

#include <string>
#include <vector>

namespace crest::eval {

// matches / total. DataError on empty or length-mismatched input.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& golds);

// Rows are gold labels, columns predictions, in the given label order
// (NQ,CRC1..CRC4 for 5-way; N,Y for matching).
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> counts;

  int total() const;
  int diagonal() const;
  double accuracy() const;  // diagonal()/total()
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& golds,
                          std::vector<std::string> labels);

// CSV: header row of predicted labels, one row per gold label.
std::string confusion_csv(const ConfusionMatrix& matrix);
// Aligned text table for terminals.
std::string render_confusion(const ConfusionMatrix& matrix);

// Mean and population standard deviation over per-seed accuracies
// (fractions in [0,1]), formatted on the percent scale: "73.00 (±0.82)".
struct SeedReport {
  double mean = 0.0;    // fraction
  double stddev = 0.0;  // fraction, population form
  std::string formatted;
};

SeedReport multi_seed_report(const std::vector<double>& accuracies);
// Inverse of the formatting; round-trips multi_seed_report output.
SeedReport parse_seed_report(const std::string& formatted);

}  // namespace crest::eval
