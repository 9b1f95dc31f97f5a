#include "etcbound/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace etcbound::loss {

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (!(delta_mil >= 0.0)) throw ConfigError("delta_mil must be >= 0");
  if (!(delta_pcl >= 0.0)) throw ConfigError("delta_pcl must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
}

double mil_loss(const MatchScorePair& pair, double delta) {
  return std::max(delta, pair.m_neg - pair.m_pos);
}

Var mil_loss(Var m_pos, Var m_neg, double delta) { return diff::floor_at(m_neg - m_pos, delta); }

Var mutual_loss(const BoundaryVar& p_o, const BoundaryVar& p_n) {
  const Var cn = diff::stop_gradient(p_n.center);
  const Var wn = diff::stop_gradient(p_n.width);
  const Var co = diff::stop_gradient(p_o.center);
  const Var wo = diff::stop_gradient(p_o.width);
  const Var first = (diff::square(p_o.center - cn) + diff::square(p_o.width - wn)) * 0.5;
  const Var second = (diff::square(p_n.center - co) + diff::square(p_n.width - wo)) * 0.5;
  return first + second;
}

double mutual_loss(const TemporalBoundary& p_o, const TemporalBoundary& p_n) {
  const double dc = p_o.center - p_n.center;
  const double dw = p_o.width - p_n.width;
  const double mse = 0.5 * (dc * dc + dw * dw);
  return mse + mse;
}

namespace {

double total_weight(std::span<const Var> mask) {
  double s = 0.0;
  for (Var m : mask) s += m.value();
  return s;
}

}  // namespace

PclTerms pcl_terms(const BoundaryVar& b, const FrameScoreSequence& scores, double tau, double delta,
                   std::span<const double> timeline, double k) {
  if (scores.scores.size() != timeline.size()) {
    throw ConfigError("score sequence length does not match the timeline");
  }
  diff::Tape& tape = *b.center.tape();
  const auto inside = model::soft_window_mask(b, timeline, k);
  const auto [out1, out2] = model::shifted_outside_masks(b, tau, timeline, k);

  PclTerms terms;
  // The inside window always has positive weight in exact arithmetic; guard
  // against total underflow anyway.
  terms.s_in = total_weight(inside) > 0.0 ? diff::weighted_mean(inside, scores.scores) : tape.constant(0.0);

  auto flank = [&](const std::vector<Var>& mask, Var& mean_out, bool& degenerate, Var& hinge,
                   Var& diff_out) {
    degenerate = total_weight(mask) < kDegenerateWindowWeight;
    if (degenerate) {
      mean_out = tape.constant(0.0);
      hinge = tape.constant(delta);
      diff_out = tape.constant(0.0);
      return;
    }
    mean_out = diff::weighted_mean(mask, scores.scores);
    diff_out = mean_out - terms.s_in;
    hinge = diff::floor_at(diff_out, delta);
  };
  Var h1, h2, d1, d2;
  flank(out1, terms.s_out1, terms.out1_degenerate, h1, d1);
  flank(out2, terms.s_out2, terms.out2_degenerate, h2, d2);
  terms.loss = h1 + h2;
  terms.contrast = d1 + d2;
  return terms;
}

Var pcl_loss(const BoundaryVar& b, const FrameScoreSequence& scores, double tau, double delta,
             std::span<const double> timeline, double k) {
  return pcl_terms(b, scores, tau, delta, timeline, k).loss;
}

std::optional<HardPcl> hard_pcl(const TemporalBoundary& b, std::span<const double> scores, double tau,
                                double delta, std::span<const double> timeline) {
  if (scores.size() != timeline.size()) throw ConfigError("score sequence length does not match the timeline");
  const double sta = b.raw_sta();
  const double end = b.raw_end();
  const double reach = tau * b.width;
  double in_sum = 0.0, o1_sum = 0.0, o2_sum = 0.0;
  std::size_t in_n = 0, o1_n = 0, o2_n = 0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const double t = timeline[i];
    if (t >= sta && t <= end) {
      in_sum += scores[i];
      ++in_n;
    } else if (t >= sta - reach && t < sta) {
      o1_sum += scores[i];
      ++o1_n;
    } else if (t > end && t <= end + reach) {
      o2_sum += scores[i];
      ++o2_n;
    }
  }
  if (in_n == 0) return std::nullopt;
  HardPcl out;
  out.s_in = in_sum / static_cast<double>(in_n);
  out.out1_empty = o1_n == 0;
  out.out2_empty = o2_n == 0;
  out.loss = 0.0;
  out.contrast = 0.0;
  if (out.out1_empty) {
    out.loss += delta;
  } else {
    out.s_out1 = o1_sum / static_cast<double>(o1_n);
    out.loss += std::max(out.s_out1 - out.s_in, delta);
    out.contrast += out.s_out1 - out.s_in;
  }
  if (out.out2_empty) {
    out.loss += delta;
  } else {
    out.s_out2 = o2_sum / static_cast<double>(o2_n);
    out.loss += std::max(out.s_out2 - out.s_in, delta);
    out.contrast += out.s_out2 - out.s_in;
  }
  return out;
}

double total_loss(double l_go, double l_gn, double l_m, double l_c, double l_cf, const LossWeights& w) {
  return l_go + l_gn + w.alpha * l_m + w.beta * (l_c + l_cf);
}

Var total_loss(Var l_go, Var l_gn, Var l_m, Var l_c, Var l_cf, const LossWeights& w) {
  return l_go + l_gn + l_m * w.alpha + (l_c + l_cf) * w.beta;
}

}  // namespace etcbound::loss
