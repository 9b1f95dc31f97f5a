#include "doctest.h"

#include <cmath>
#include <vector>

#include "etcbound/losses.hpp"
#include "helpers.hpp"

using namespace etcbound;
using namespace etcbound::loss;
using diff::Tape;
using diff::Var;

namespace {

const std::vector<double> kStep = {0, 0, 0, 1, 1, 1, 1, 0, 0, 0};

FrameScoreSequence seq(std::vector<double> s) { return {std::move(s), ScoreKind::QDM}; }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("MIL hand values") {
    CHECK(mil_loss({0.9, 0.1}, 0.2) == 0.2);
    CHECK(mil_loss({0.5, 0.5}, 0.2) == 0.2);
    CHECK(mil_loss({0.1, 0.9}, 0.2) == doctest::Approx(0.8).epsilon(1e-15));
    Tape t;
    Var l = mil_loss(t.variable(0.1), t.variable(0.9), 0.2);
    CHECK(l.value() == mil_loss({0.1, 0.9}, 0.2));
  }

  TEST_CASE("MIL gradient pushes the positive up and the negative down") {
    Tape t;
    Var pos = t.variable(0.1), neg = t.variable(0.9);
    t.backward(mil_loss(pos, neg, 0.2));
    CHECK(pos.adjoint() == -1.0);
    CHECK(neg.adjoint() == 1.0);
  }

  TEST_CASE("mutual loss hand values") {
    CHECK(mutual_loss(TemporalBoundary{0.5, 0.4}, TemporalBoundary{0.5, 0.4}) == 0.0);
    CHECK(mutual_loss(TemporalBoundary{0.5, 0.4}, TemporalBoundary{0.6, 0.2}) == 0.05);
    Tape t;
    BoundaryVar po{t.variable(0.5), t.variable(0.4)}, pn{t.variable(0.6), t.variable(0.2)};
    CHECK(mutual_loss(po, pn).value() == mutual_loss(TemporalBoundary{0.5, 0.4}, TemporalBoundary{0.6, 0.2}));
  }

  TEST_CASE("mutual loss gradient on p_o only sees its own MSE term") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const TemporalBoundary o{uniform01(rng), uniform01(rng)}, n{uniform01(rng), uniform01(rng)};
      Tape t;
      BoundaryVar po{t.variable(o.center), t.variable(o.width)};
      BoundaryVar pn{t.variable(n.center), t.variable(n.width)};
      t.backward(mutual_loss(po, pn));
      // Finite differences of MSE(p_o, const p_n).
      auto mse = [&](double c, double w) {
        return 0.5 * ((c - n.center) * (c - n.center) + (w - n.width) * (w - n.width));
      };
      const double h = 1e-6;
      const double dc = (mse(o.center + h, o.width) - mse(o.center - h, o.width)) / (2 * h);
      const double dw = (mse(o.center, o.width + h) - mse(o.center, o.width - h)) / (2 * h);
      CHECK(po.center.adjoint() == doctest::Approx(dc).epsilon(1e-6));
      CHECK(po.width.adjoint() == doctest::Approx(dw).epsilon(1e-6));
      CHECK(pn.center.adjoint() == doctest::Approx(-dc).epsilon(1e-6));
    }
  }

  TEST_CASE("mutual loss is symmetric and zero only on agreement") {
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
      const TemporalBoundary a{uniform01(rng), uniform01(rng)}, b{uniform01(rng), uniform01(rng)};
      CHECK(mutual_loss(a, b) == mutual_loss(b, a));
      CHECK(mutual_loss(a, b) > 0.0);
      CHECK(mutual_loss(a, a) == 0.0);
    }
  }

  TEST_CASE("PCL step example with the hard evaluator") {
    const auto tl = make_timeline(10);
    auto hard = hard_pcl({0.5, 0.4}, kStep, 0.25, 0.15, tl);
    REQUIRE(hard.has_value());
    CHECK(hard->s_in == 1.0);
    CHECK(hard->s_out1 == 0.0);
    CHECK(hard->s_out2 == 0.0);
    CHECK(hard->loss == 0.30);
  }

  TEST_CASE("PCL step example with sharp soft windows") {
    const auto tl = make_timeline(10);
    Tape t;
    BoundaryVar b{t.variable(0.5), t.variable(0.4)};
    Var l = pcl_loss(b, seq(kStep), 0.25, 0.15, tl, 500.0);
    CHECK(std::abs(l.value() - 0.30) < 1e-3);
  }

  TEST_CASE("constant scores floor at two delta") {
    const auto tl = make_timeline(10);
    Tape t;
    BoundaryVar b{t.variable(0.5), t.variable(0.4)};
    CHECK(pcl_loss(b, seq(std::vector<double>(10, 0.0)), 0.25, 0.15, tl, 500.0).value() ==
          doctest::Approx(0.30).epsilon(1e-15));
    auto hard = hard_pcl({0.5, 0.4}, std::vector<double>(10, 0.0), 0.25, 0.15, tl);
    CHECK(hard->loss == 0.30);
  }

  TEST_CASE("off-timeline flank contributes delta without gradient") {
    const auto tl = make_timeline(64);
    Tape t;
    BoundaryVar b{t.variable(0.1), t.variable(0.4)};
    Rng rng(23);
    auto terms = pcl_terms(b, seq(testutil::random_scores(rng, 64)), 0.25, 0.15, tl, 500.0);
    CHECK(terms.out1_degenerate);
    CHECK_FALSE(terms.out2_degenerate);
    CHECK(terms.loss.value() >= 0.30);
  }

  TEST_CASE("hard evaluator rejects boundaries without frames") {
    const auto tl = make_timeline(10);
    CHECK_FALSE(hard_pcl({0.5, 0.01}, kStep, 0.25, 0.15, tl).has_value());
  }

  TEST_CASE("total loss composition") {
    LossWeights w;
    CHECK(total_loss(0.2, 0.2, 0.05, 0.30, 0.30, w) == 0.4425);
    LossWeights zero = w;
    zero.alpha = zero.beta = 0.0;
    CHECK(total_loss(0.2, 0.3, 7.0, 9.0, 11.0, zero) == 0.5);
    Tape t;
    Var v = total_loss(t.variable(0.2), t.variable(0.2), t.variable(0.05), t.variable(0.30), t.variable(0.30), w);
    CHECK(v.value() == total_loss(0.2, 0.2, 0.05, 0.30, 0.30, w));
  }

  TEST_CASE("loss weight presets and validation") {
    auto a = LossWeights::activitynet_style();
    CHECK(a.alpha == 0.25);
    CHECK(a.beta == 0.05);
    CHECK(a.tau == 0.25);
    CHECK(a.delta_pcl == 0.15);
    auto c = LossWeights::charades_style();
    CHECK(c.alpha == 0.5);
    CHECK(c.beta == 0.1);
    CHECK_NOTHROW(a.validate());
    auto bad = a;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = a;
    bad.alpha = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("structural floors hold on 1000 random inputs") {
    Rng rng(24);
    const auto tl = make_timeline(32);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const double delta = uniform(rng, 0.0, 0.5);
      if (mil_loss({uniform(rng, -1, 1), uniform(rng, -1, 1)}, delta) < delta) ++violations;
      Tape t;
      BoundaryVar b{t.variable(uniform(rng, 0.01, 0.99)), t.variable(uniform(rng, 0.01, 0.99))};
      if (pcl_loss(b, seq(testutil::random_scores(rng, 32)), 0.25, delta, tl, uniform(rng, 10, 1000)).value() <
          2 * delta)
        ++violations;
    }
    CHECK(violations == 0);
  }

  TEST_CASE("pre-hinge differences scale with the scores") {
    Rng rng(25);
    const auto tl = make_timeline(32);
    for (int i = 0; i < 100; ++i) {
      auto s = testutil::random_scores(rng, 32);
      const double a = uniform(rng, 0.1, 5.0);
      auto scaled = s;
      for (double& v : scaled) v *= a;
      const double c = uniform(rng, 0.3, 0.7), w = uniform(rng, 0.1, 0.4);
      Tape t;
      BoundaryVar b{t.variable(c), t.variable(w)};
      auto base = pcl_terms(b, seq(s), 0.25, 0.15, tl, 100.0);
      auto sc = pcl_terms(b, seq(scaled), 0.25, 0.15, tl, 100.0);
      CHECK(sc.s_out1.value() - sc.s_in.value() ==
            doctest::Approx(a * (base.s_out1.value() - base.s_in.value())).epsilon(1e-12));
      CHECK(sc.s_out2.value() - sc.s_in.value() ==
            doctest::Approx(a * (base.s_out2.value() - base.s_in.value())).epsilon(1e-12));
    }
  }

  TEST_CASE("PCL gradient moves the centre toward a score bump") {
    const auto tl = make_timeline(64);
    std::vector<double> s(64, 0.0);
    const double c_star = 0.6, sigma = 0.08, w = 0.2;
    for (std::size_t i = 0; i < 64; ++i) s[i] = std::exp(-0.5 * std::pow((tl[i] - c_star) / sigma, 2));
    int checked = 0;
    // Off-centre boundaries whose window still covers the peak.
    for (double c = c_star - w / 2; c <= c_star + w / 2 + 1e-12; c += 0.005) {
      if (std::abs(c - c_star) < 0.05) continue;
      Tape t;
      BoundaryVar b{t.variable(c), t.variable(w)};
      Var l = pcl_loss(b, seq(s), 0.25, 0.15, tl, 50.0);
      t.backward(l);
      const double g = b.center.adjoint();
      if (std::abs(g) < 1e-6) continue;  // hinge-flat
      ++checked;
      if (c < c_star)
        CHECK_MESSAGE(g < 0.0, "c=" << c);
      else
        CHECK_MESSAGE(g > 0.0, "c=" << c);
    }
    CHECK(checked > 10);
  }

  TEST_CASE("PCL pushes away from a bump on its convex tail") {
    const auto tl = make_timeline(64);
    std::vector<double> s(64, 0.0);
    for (std::size_t i = 0; i < 64; ++i) s[i] = std::exp(-0.5 * std::pow((tl[i] - 0.6) / 0.08, 2));
    Tape t;
    BoundaryVar b{t.variable(0.38), t.variable(0.2)};
    Var l = pcl_loss(b, seq(s), 0.25, 0.15, tl, 50.0);
    t.backward(l);
    CHECK(l.value() > 0.30);
    CHECK(b.center.adjoint() > 0.0);
  }

  TEST_CASE("PCL passes grad_check in (c, w) on random inputs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed + 300);
      const auto tl = make_timeline(24);
      auto s = seq(testutil::random_scores(rng, 24));
      std::vector<double> x = {uniform(rng, 0.3, 0.7), uniform(rng, 0.15, 0.4)};
      auto r = diff::grad_check(
          [&](Tape&, std::span<const Var> v) { return pcl_loss({v[0], v[1]}, s, 0.25, 0.0, tl, 50.0); }, x);
      if (r.min_kink_distance < 1e-3) continue;
      CHECK_MESSAGE(r.passed(), "seed " << seed << ": " << r.summary());
    }
  }
}
