#pragma once

#include <optional>
#include <span>

#include "etcbound/boundary_model.hpp"
#include "etcbound/diff.hpp"
#include "etcbound/types.hpp"

namespace etcbound::loss {

using diff::Var;
using model::BoundaryVar;

struct LossWeights {
  double alpha = 0.25;      // mutual learning
  double beta = 0.05;       // proposal-level contrast
  double delta_mil = 0.2;   // MIL threshold
  double tau = 0.25;        // flank width as a fraction of w
  double delta_pcl = 0.15;  // contrast threshold

  static LossWeights activitynet_style() { return {}; }
  static LossWeights charades_style() { return {0.5, 0.1, 0.2, 0.25, 0.15}; }

  // Throws ConfigError.
  void validate() const;
};

// max(delta, m_neg - m_pos), literally; never below delta.
double mil_loss(const MatchScorePair& pair, double delta);
Var mil_loss(Var m_pos, Var m_neg, double delta);

// MSE(p_o, sg(p_n)) + MSE(p_n, sg(p_o)), MSE averaged over (c, w).
Var mutual_loss(const BoundaryVar& p_o, const BoundaryVar& p_n);
double mutual_loss(const TemporalBoundary& p_o, const TemporalBoundary& p_n);

// Below this total mask weight a flanking window counts as off-timeline.
inline constexpr double kDegenerateWindowWeight = 1e-8;

struct PclTerms {
  Var s_in;
  Var s_out1;
  Var s_out2;
  bool out1_degenerate = false;
  bool out2_degenerate = false;
  // max(s_out1 - s_in, delta) + max(s_out2 - s_in, delta)
  Var loss;
  // (s_out1 - s_in) + (s_out2 - s_in) before the hinge; degenerate sides add 0.
  Var contrast;
};

// Window means are mask-weighted means of the scores. An off-timeline flank
// contributes exactly delta with no gradient.
PclTerms pcl_terms(const BoundaryVar& b, const FrameScoreSequence& scores, double tau, double delta,
                   std::span<const double> timeline, double k);
Var pcl_loss(const BoundaryVar& b, const FrameScoreSequence& scores, double tau, double delta,
             std::span<const double> timeline, double k);

// Reference evaluator with hard windows: inside [sta, end], flanks
// [sta - tau w, sta) and (end, end + tau w], over the unclamped boundary.
struct HardPcl {
  double s_in = 0.0;
  double s_out1 = 0.0;
  double s_out2 = 0.0;
  bool out1_empty = false;
  bool out2_empty = false;
  double loss = 0.0;
  double contrast = 0.0;
};

// nullopt when no frame centre falls inside the boundary.
std::optional<HardPcl> hard_pcl(const TemporalBoundary& b, std::span<const double> scores, double tau,
                                double delta, std::span<const double> timeline);

double total_loss(double l_go, double l_gn, double l_m, double l_c, double l_cf, const LossWeights& w);
Var total_loss(Var l_go, Var l_gn, Var l_m, Var l_c, Var l_cf, const LossWeights& w);

}  // namespace etcbound::loss
