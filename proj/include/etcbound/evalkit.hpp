#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "etcbound/types.hpp"

namespace etcbound::eval {

// |a ∩ b| / |a ∪ b|; 0 when the union is empty.
double interval_iou(const Interval& a, const Interval& b);

inline const std::vector<double> kActivityNetThresholds = {0.1, 0.3, 0.5};
inline const std::vector<double> kCharadesThresholds = {0.3, 0.5, 0.7};

struct Histogram {
  std::vector<double> edges;          // n_bins + 1
  std::vector<std::size_t> counts;    // n_bins
  std::size_t skipped = 0;            // zero-length ground truths

  std::size_t total() const;
  // Count in bins whose lower edge is >= lo (within 1e-12).
  std::size_t mass_from(double lo) const;
  std::string to_csv() const;
};

// Per instance |pred ∩ gt| / |gt|, binned into n_bins equal-width bins on
// [0,1]; the last bin is closed.
Histogram intersection_ratio_histogram(std::span<const Interval> predictions, std::span<const Interval> gts,
                                       std::size_t n_bins = 10);

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<double> recall;  // aligned with thresholds
  std::size_t n_instances = 0;
  double mean_iou = 0.0;
  Histogram histogram;

  double recall_at(double threshold) const;
  nlohmann::json to_json() const;
  // One-row table: label | R1@n ... | mIoU
  std::string to_table(const std::string& label) const;
};

// recall(n) = fraction of instances with IoU strictly greater than n.
// Throws DataError on a length mismatch.
EvalReport rank1_at_iou(std::span<const Interval> predictions, std::span<const Interval> gts,
                        std::span<const double> thresholds = kActivityNetThresholds, std::size_t n_bins = 10);

std::string threshold_label(double threshold);

}  // namespace etcbound::eval
