#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "etcbound/diff.hpp"
#include "etcbound/rng.hpp"
#include "etcbound/types.hpp"

namespace etcbound::model {

using diff::Tape;
using diff::Var;

// Two-layer perceptron head producing (center, width) through a sigmoid.
//
// Input layout (2C + 2): query-attended pooled frame feature (C), query
// embedding (C), attended mean frame time, attended time spread. The
// attention weights are softmax(attention_scale * cos(query, frame)).
struct PredictorParams {
  std::size_t feature_dim = 0;
  std::size_t hidden = 16;
  std::vector<double> w1;  // hidden x input_dim, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // 2 x hidden
  std::vector<double> b2;  // 2
  double k = 50.0;         // soft-window sharpness
  double attention_scale = 10.0;

  std::size_t input_dim() const { return 2 * feature_dim + 2; }
  std::size_t num_weights() const;

  // Flat learnable vector in the order w1, b1, w2, b2.
  std::vector<double> pack() const;
  void unpack(std::span<const double> flat);

  static PredictorParams zeros(std::size_t feature_dim, std::size_t hidden);
  // Gaussian weights with variance 1/fan_in, zero biases.
  static PredictorParams initialized(std::size_t feature_dim, std::size_t hidden, Rng& rng);

  // Throws ConfigError.
  void validate() const;
  bool operator==(const PredictorParams&) const = default;
};

// Learnable leaves of one PredictorParams bound onto a tape (pack() order).
struct BoundParams {
  const PredictorParams* params = nullptr;
  std::vector<Var> leaves;

  static BoundParams bind(Tape& tape, const PredictorParams& params);
  std::vector<double> gradient() const;
};

struct BoundaryVar {
  Var center;
  Var width;

  TemporalBoundary value() const { return {center.value(), width.value()}; }
  Var sta() const { return center - width * 0.5; }
  Var end() const { return center + width * 0.5; }
};

// Attention-pooled encoder output (constant w.r.t. the head parameters).
std::vector<double> encode_inputs(const GroundingInstance& instance,
                                  std::span<const double> query_embedding, double attention_scale);

BoundaryVar predict_boundary(Tape& tape, const BoundParams& bound, std::span<const double> encoded);
BoundaryVar predict_boundary(Tape& tape, const BoundParams& bound, const GroundingInstance& instance,
                             std::span<const double> query_embedding);
TemporalBoundary predict_boundary_value(const PredictorParams& params,
                                        const GroundingInstance& instance,
                                        std::span<const double> query_embedding);

// m_i = sigmoid(k (t_i - lo)) * sigmoid(k (hi - t_i)), one fused node per frame.
std::vector<Var> soft_window(Tape& tape, Var lo, Var hi, std::span<const double> timeline, double k);
double soft_window_value(double lo, double hi, double t, double k);

// Window over the unclamped [c - w/2, c + w/2].
std::vector<Var> soft_window_mask(const BoundaryVar& b, std::span<const double> timeline, double k);

// Flanking windows [sta - tau w, sta] and [end, end + tau w].
std::pair<std::vector<Var>, std::vector<Var>> shifted_outside_masks(const BoundaryVar& b, double tau,
                                                                    std::span<const double> timeline,
                                                                    double k);

// Mask-weighted mean of the frame features.
std::vector<Var> pool_boundary_feature(const GroundingInstance& instance, std::span<const Var> mask);

}  // namespace etcbound::model
