#include "etcbound/boundary_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace etcbound::model {

std::size_t PredictorParams::num_weights() const {
  return hidden * input_dim() + hidden + 2 * hidden + 2;
}

std::vector<double> PredictorParams::pack() const {
  std::vector<double> flat;
  flat.reserve(num_weights());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.insert(flat.end(), b2.begin(), b2.end());
  return flat;
}

void PredictorParams::unpack(std::span<const double> flat) {
  if (flat.size() != num_weights()) {
    throw ConfigError("predictor expects " + std::to_string(num_weights()) + " weights, got " +
                      std::to_string(flat.size()));
  }
  auto it = flat.begin();
  auto take = [&it](std::vector<double>& dst, std::size_t n) {
    dst.assign(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
  };
  take(w1, hidden * input_dim());
  take(b1, hidden);
  take(w2, 2 * hidden);
  take(b2, 2);
}

PredictorParams PredictorParams::zeros(std::size_t feature_dim, std::size_t hidden) {
  PredictorParams p;
  p.feature_dim = feature_dim;
  p.hidden = hidden;
  p.w1.assign(hidden * p.input_dim(), 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(2 * hidden, 0.0);
  p.b2.assign(2, 0.0);
  return p;
}

PredictorParams PredictorParams::initialized(std::size_t feature_dim, std::size_t hidden, Rng& rng) {
  PredictorParams p = zeros(feature_dim, hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(p.input_dim()));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : p.w1) w = s1 * normal(rng);
  for (double& w : p.w2) w = s2 * normal(rng);
  return p;
}

void PredictorParams::validate() const {
  if (feature_dim == 0) throw ConfigError("predictor feature_dim must be positive");
  if (hidden < 2) throw ConfigError("predictor hidden width must be >= 2");
  if (!(k > 0.0)) throw ConfigError("soft-window sharpness k must be > 0");
  if (!(attention_scale >= 0.0)) throw ConfigError("attention_scale must be >= 0");
  if (w1.size() != hidden * input_dim() || b1.size() != hidden || w2.size() != 2 * hidden ||
      b2.size() != 2) {
    throw ConfigError("predictor weight shapes do not match feature_dim/hidden");
  }
  for (double v : pack()) {
    if (!std::isfinite(v)) throw ConfigError("predictor weights contain non-finite values");
  }
}

BoundParams BoundParams::bind(Tape& tape, const PredictorParams& params) {
  const auto flat = params.pack();
  return {&params, tape.variables(flat)};
}

std::vector<double> BoundParams::gradient() const {
  std::vector<double> g(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) g[i] = leaves[i].adjoint();
  return g;
}

std::vector<double> encode_inputs(const GroundingInstance& instance,
                                  std::span<const double> query_embedding, double attention_scale) {
  const std::size_t T = instance.num_frames;
  const std::size_t C = instance.dim;
  if (T == 0) throw ConfigError("cannot encode an instance without frames");
  if (query_embedding.size() != C) {
    throw ConfigError("query embedding dimension " + std::to_string(query_embedding.size()) +
                      " != frame feature dimension " + std::to_string(C));
  }
  std::vector<double> logits(T);
  for (std::size_t i = 0; i < T; ++i) {
    logits[i] = attention_scale * diff::cosine_value(query_embedding, instance.frame(i));
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    z += l;
  }
  std::vector<double> out(2 * C + 2, 0.0);
  double t_mean = 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double a = logits[i] / z;
    const auto f = instance.frame(i);
    for (std::size_t j = 0; j < C; ++j) out[j] += a * f[j];
    t_mean += a * frame_time(i, T);
  }
  double t_var = 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double d = frame_time(i, T) - t_mean;
    t_var += (logits[i] / z) * d * d;
  }
  std::copy(query_embedding.begin(), query_embedding.end(), out.begin() + static_cast<std::ptrdiff_t>(C));
  out[2 * C] = t_mean;
  out[2 * C + 1] = std::sqrt(t_var);
  return out;
}

BoundaryVar predict_boundary(Tape& tape, const BoundParams& bound, std::span<const double> encoded) {
  const PredictorParams& p = *bound.params;
  const std::size_t D = p.input_dim();
  const std::size_t H = p.hidden;
  if (encoded.size() != D) {
    throw ConfigError("encoded input has " + std::to_string(encoded.size()) + " values, head expects " +
                      std::to_string(D));
  }
  std::span<const Var> leaves(bound.leaves);
  const auto w1 = leaves.subspan(0, H * D);
  const auto b1 = leaves.subspan(H * D, H);
  const auto w2 = leaves.subspan(H * D + H, 2 * H);
  const auto b2 = leaves.subspan(H * D + 3 * H, 2);

  std::vector<Var> hidden(H);
  for (std::size_t h = 0; h < H; ++h) {
    hidden[h] = diff::tanh(diff::weighted_sum(w1.subspan(h * D, D), encoded) + b1[h]);
  }
  const Var zc = diff::dot(w2.subspan(0, H), hidden) + b2[0];
  const Var zw = diff::dot(w2.subspan(H, H), hidden) + b2[1];
  (void)tape;
  return {diff::sigmoid(zc), diff::sigmoid(zw)};
}

BoundaryVar predict_boundary(Tape& tape, const BoundParams& bound, const GroundingInstance& instance,
                             std::span<const double> query_embedding) {
  const auto encoded = encode_inputs(instance, query_embedding, bound.params->attention_scale);
  return predict_boundary(tape, bound, encoded);
}

TemporalBoundary predict_boundary_value(const PredictorParams& params,
                                        const GroundingInstance& instance,
                                        std::span<const double> query_embedding) {
  Tape tape;
  const auto bound = BoundParams::bind(tape, params);
  return predict_boundary(tape, bound, instance, query_embedding).value();
}

double soft_window_value(double lo, double hi, double t, double k) {
  return diff::sigmoid_value(k * (t - lo)) * diff::sigmoid_value(k * (hi - t));
}

std::vector<Var> soft_window(Tape& tape, Var lo, Var hi, std::span<const double> timeline, double k) {
  std::vector<Var> mask;
  mask.reserve(timeline.size());
  for (double t : timeline) {
    const double xa = k * (t - lo.value());
    const double xb = k * (hi.value() - t);
    const double sa = diff::sigmoid_value(xa);
    const double sb = diff::sigmoid_value(xb);
    // sigmoid'(x) = sigmoid(x) sigmoid(-x), accurate in both tails.
    const double da = sa * diff::sigmoid_value(-xa);
    const double db = sb * diff::sigmoid_value(-xb);
    mask.push_back(tape.push(sa * sb, {{lo, -k * da * sb}, {hi, k * db * sa}}));
  }
  return mask;
}

std::vector<Var> soft_window_mask(const BoundaryVar& b, std::span<const double> timeline, double k) {
  Tape& tape = *b.center.tape();
  return soft_window(tape, b.sta(), b.end(), timeline, k);
}

std::pair<std::vector<Var>, std::vector<Var>> shifted_outside_masks(const BoundaryVar& b, double tau,
                                                                    std::span<const double> timeline,
                                                                    double k) {
  Tape& tape = *b.center.tape();
  const Var sta = b.sta();
  const Var end = b.end();
  const Var reach = b.width * tau;
  return {soft_window(tape, sta - reach, sta, timeline, k), soft_window(tape, end, end + reach, timeline, k)};
}

std::vector<Var> pool_boundary_feature(const GroundingInstance& instance, std::span<const Var> mask) {
  const std::size_t T = instance.num_frames;
  const std::size_t C = instance.dim;
  if (mask.size() != T) throw ConfigError("mask length does not match frame count");
  std::vector<Var> pooled(C);
  std::vector<double> column(T);
  for (std::size_t j = 0; j < C; ++j) {
    for (std::size_t i = 0; i < T; ++i) column[i] = instance.features[i * C + j];
    pooled[j] = diff::weighted_mean(mask, column);
  }
  return pooled;
}

}  // namespace etcbound::model
