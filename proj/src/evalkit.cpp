#include "etcbound/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace etcbound::eval {

double interval_iou(const Interval& a, const Interval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.sta, b.sta));
  const double uni = std::max(a.end, b.end) - std::min(a.sta, b.sta);
  // For overlapping intervals the hull equals the union; otherwise inter = 0.
  const double union_len = inter > 0.0 ? uni : a.length() + b.length();
  if (!(union_len > 0.0)) return 0.0;
  return inter / union_len;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::size_t Histogram::mass_from(double lo) const {
  std::size_t n = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (edges[b] >= lo - 1e-12) n += counts[b];
  }
  return n;
}

std::string Histogram::to_csv() const {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < counts.size(); ++b) os << edges[b] << ',' << edges[b + 1] << ',' << counts[b] << '\n';
  return os.str();
}

Histogram intersection_ratio_histogram(std::span<const Interval> predictions, std::span<const Interval> gts,
                                       std::size_t n_bins) {
  if (predictions.size() != gts.size()) {
    throw DataError("histogram: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(gts.size()) + " ground truths");
  }
  if (n_bins == 0) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(n_bins, 0);
  for (std::size_t b = 0; b <= n_bins; ++b) h.edges.push_back(static_cast<double>(b) / static_cast<double>(n_bins));
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const double len = gts[i].length();
    if (!(len > 0.0)) {
      ++h.skipped;
      continue;
    }
    const double inter =
        std::max(0.0, std::min(predictions[i].end, gts[i].end) - std::max(predictions[i].sta, gts[i].sta));
    const double r = std::clamp(inter / len, 0.0, 1.0);
    auto bin = static_cast<std::size_t>(std::floor(r * static_cast<double>(n_bins)));
    h.counts[std::min(bin, n_bins - 1)]++;
  }
  return h;
}

double EvalReport::recall_at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - threshold) < 1e-12) return recall[i];
  }
  throw DataError("threshold " + threshold_label(threshold) + " not in report");
}

std::string threshold_label(double threshold) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "R1@%g", threshold);
  return buf;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["n_instances"] = n_instances;
  j["mean_iou"] = mean_iou;
  nlohmann::json rec = nlohmann::json::object();
  for (std::size_t i = 0; i < thresholds.size(); ++i) rec[threshold_label(thresholds[i])] = recall[i];
  j["recall"] = rec;
  j["thresholds"] = thresholds;
  j["histogram"] = {{"edges", histogram.edges}, {"counts", histogram.counts}, {"skipped", histogram.skipped}};
  return j;
}

std::string EvalReport::to_table(const std::string& label) const {
  std::ostringstream os;
  char buf[64];
  os << "| Variant |";
  for (double t : thresholds) os << ' ' << threshold_label(t) << " |";
  os << " mIoU |\n|---|";
  for (std::size_t i = 0; i <= thresholds.size(); ++i) os << "---|";
  os << "\n| " << label << " |";
  for (double r : recall) {
    std::snprintf(buf, sizeof(buf), " %.2f |", 100.0 * r);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), " %.2f |\n", 100.0 * mean_iou);
  os << buf;
  return os.str();
}

EvalReport rank1_at_iou(std::span<const Interval> predictions, std::span<const Interval> gts,
                        std::span<const double> thresholds, std::size_t n_bins) {
  if (predictions.size() != gts.size()) {
    throw DataError("evaluation: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(gts.size()) + " ground truths");
  }
  EvalReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  report.recall.assign(thresholds.size(), 0.0);
  report.n_instances = gts.size();
  std::vector<std::size_t> hits(thresholds.size(), 0);
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const double iou = interval_iou(predictions[i], gts[i]);
    iou_sum += iou;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (iou > thresholds[t]) ++hits[t];
    }
  }
  if (!gts.empty()) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      report.recall[t] = static_cast<double>(hits[t]) / static_cast<double>(gts.size());
    }
    report.mean_iou = iou_sum / static_cast<double>(gts.size());
  }
  report.histogram = intersection_ratio_histogram(predictions, gts, n_bins);
  return report;
}

}  // namespace etcbound::eval
