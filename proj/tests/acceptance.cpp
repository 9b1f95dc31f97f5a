// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "etcbound/cli.hpp"
#include "etcbound/evalkit.hpp"
#include "etcbound/io.hpp"
#include "etcbound/losses.hpp"
#include "etcbound/synthbench.hpp"
#include "etcbound/trainer.hpp"

using namespace etcbound;
using diff::Tape;
using diff::Var;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
  std::printf("%s %-22s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Gradient validation

GroundingInstance random_instance(Rng& rng, std::size_t T, std::size_t C) {
  GroundingInstance inst;
  inst.video_id = "g";
  inst.num_frames = T;
  inst.dim = C;
  inst.features.resize(T * C);
  for (double& f : inst.features) f = normal(rng);
  inst.query_tokens = {"q"};
  inst.query_embedding.resize(C);
  for (double& q : inst.query_embedding) q = normal(rng);
  return inst;
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

Outcome gradient_validation() {
  const auto t0 = Clock::now();
  constexpr std::size_t T = 16, C = 6, H = 4;
  constexpr double kKinkExclusion = 1e-3;
  const char* names[] = {"mil", "mutual", "pcl_qdm", "pcl_qfm", "total"};
  std::size_t checked[5] = {0}, excluded[5] = {0}, failed[5] = {0};
  std::string first_failure;

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, "gradcheck"));
    const auto inst = random_instance(rng, T, C);
    const auto timeline = inst.timeline();
    const auto desc = random_vector(rng, C);
    const auto q_neg = random_vector(rng, C);
    const auto d_neg = random_vector(rng, C);
    FrameScoreSequence qdm{std::vector<double>(T), ScoreKind::QDM};
    for (double& s : qdm.scores) s = uniform01(rng);
    const auto qfm = match::qfm_scores(inst.query_embedding, inst);
    auto po = model::PredictorParams::initialized(C, H, rng);
    auto pn = model::PredictorParams::initialized(C, H, rng);
    const auto enc_o = model::encode_inputs(inst, inst.query_embedding, po.attention_scale);
    const auto enc_n = model::encode_inputs(inst, desc, pn.attention_scale);
    const std::size_t n_o = po.num_weights();
    std::vector<double> flat = po.pack();
    const auto flat_n = pn.pack();
    flat.insert(flat.end(), flat_n.begin(), flat_n.end());

    // Odd seeds use thresholds that keep every hinge active.
    const bool active = seed % 2 == 1;
    loss::LossWeights w;
    const double delta_mil = active ? -2.0 : w.delta_mil;
    const double delta_pcl = active ? -2.0 : w.delta_pcl;
    const double k = 50.0;

    auto heads = [&](std::span<const Var> v) {
      model::BoundParams bo{&po, std::vector<Var>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n_o))};
      model::BoundParams bn{&pn, std::vector<Var>(v.begin() + static_cast<std::ptrdiff_t>(n_o), v.end())};
      Tape& tape = *v[0].tape();
      return std::pair{model::predict_boundary(tape, bo, enc_o), model::predict_boundary(tape, bn, enc_n)};
    };
    TemporalBoundary base_o, base_n;
    {
      Tape tape;
      const auto [p_o, p_n] = heads(tape.variables(flat));
      base_o = {p_o.center.value(), p_o.width.value()};
      base_n = {p_n.center.value(), p_n.width.value()};
    }

    // Finite-difference reference for the stop-gradient mutual term: squared
    // error against the partner prediction frozen at the evaluation point.
    auto frozen_mutual = [](const model::BoundaryVar& p_o, const model::BoundaryVar& p_n, TemporalBoundary fo,
                            TemporalBoundary fn) {
      auto sq = [](Var a, double b) { return (a - b) * (a - b); };
      return (sq(p_o.center, fn.center) + sq(p_o.width, fn.width)) * 0.5 +
             (sq(p_n.center, fo.center) + sq(p_n.width, fo.width)) * 0.5;
    };

    auto build = [&](std::span<const Var> v, int which, bool reference) {
      const auto [p_o, p_n] = heads(v);
      const auto feat_o = model::pool_boundary_feature(inst, model::soft_window_mask(p_o, timeline, k));
      const auto feat_n = model::pool_boundary_feature(inst, model::soft_window_mask(p_n, timeline, k));
      const Var l_go = loss::mil_loss(diff::cosine(feat_o, inst.query_embedding), diff::cosine(feat_o, q_neg),
                                      delta_mil);
      const Var l_gn = loss::mil_loss(diff::cosine(feat_n, desc), diff::cosine(feat_n, d_neg), delta_mil);
      const Var l_m = reference ? frozen_mutual(p_o, p_n, base_o, base_n) : loss::mutual_loss(p_o, p_n);
      const Var l_c = loss::pcl_loss(p_o, qdm, w.tau, delta_pcl, timeline, k);
      const Var l_cf = loss::pcl_loss(p_o, qfm, w.tau, delta_pcl, timeline, k);
      switch (which) {
        case 0: return l_go + l_gn;
        case 1: return l_m;
        case 2: return l_c;
        case 3: return l_cf;
        default: return loss::total_loss(l_go, l_gn, l_m, l_c, l_cf, w);
      }
    };

    const diff::GradCheckOptions opts;
    for (int which = 0; which < 5; ++which) {
      auto r = diff::grad_check([&](Tape&, std::span<const Var> v) { return build(v, which, false); }, flat);
      if (which == 1 || which == 4) {
        const auto ref =
            diff::grad_check([&](Tape&, std::span<const Var> v) { return build(v, which, true); }, flat);
        r.failing.clear();
        r.max_rel_error = 0.0;
        r.numeric = ref.numeric;
        r.min_kink_distance = std::min(r.min_kink_distance, ref.min_kink_distance);
        for (std::size_t i = 0; i < r.analytic.size(); ++i) {
          const double a = r.analytic[i], n = r.numeric[i];
          const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opts.scale_floor});
          r.max_rel_error = std::max(r.max_rel_error, rel);
          if (rel > opts.tolerance) r.failing.push_back(i);
        }
      }
      if (r.min_kink_distance < kKinkExclusion) {
        ++excluded[which];
        continue;
      }
      ++checked[which];
      if (!r.failing.empty()) {
        ++failed[which];
        if (first_failure.empty())
          first_failure = fmt("%s seed %llu: max rel error %.3g", names[which], (unsigned long long)seed,
                              r.max_rel_error);
      }
    }
  }
  const double secs = seconds_since(t0);
  std::size_t total_failed = 0, min_checked = 100;
  std::string counts;
  for (int i = 0; i < 5; ++i) {
    total_failed += failed[i];
    min_checked = std::min(min_checked, checked[i]);
    counts += fmt("%s %zu/%zu ", names[i], checked[i] - failed[i], checked[i]);
    if (excluded[i]) counts += fmt("(%zu near kinks) ", excluded[i]);
  }
  Outcome o;
  o.pass = total_failed == 0 && min_checked >= 50 && secs < 30.0;
  o.detail = counts + fmt("in %.1fs", secs);
  if (!first_failure.empty()) o.detail += "; first failure " + first_failure;
  return o;
}

// ---------------------------------------------------------------------------
// Hand values

Outcome hand_values() {
  std::vector<std::string> bad;
  const std::vector<double> step = {0, 0, 0, 1, 1, 1, 1, 0, 0, 0};
  const auto tl = make_timeline(10);
  Tape t;
  model::BoundaryVar b{t.variable(0.5), t.variable(0.4)};
  const double soft = loss::pcl_loss(b, {step, ScoreKind::QDM}, 0.25, 0.15, tl, 500.0).value();
  if (!(std::abs(soft - 0.30) <= 1e-3)) bad.push_back(fmt("soft pcl %.6f", soft));
  const auto hard = loss::hard_pcl({0.5, 0.4}, step, 0.25, 0.15, tl);
  if (!hard || hard->loss != 0.30) bad.push_back("hard pcl");
  const double m = loss::mutual_loss(TemporalBoundary{0.5, 0.4}, TemporalBoundary{0.6, 0.2});
  if (m != 0.05) bad.push_back(fmt("mutual %.17g", m));
  const double total = loss::total_loss(0.2, 0.2, 0.05, 0.30, 0.30, loss::LossWeights{});
  if (total != 0.4425) bad.push_back(fmt("total %.17g", total));
  const double iou = eval::interval_iou({0.2, 0.6}, {0.4, 0.8});
  if (!(std::abs(iou - 1.0 / 3.0) <= 1e-12)) bad.push_back(fmt("iou %.17g", iou));
  Outcome o;
  o.pass = bad.empty();
  o.detail = fmt("pcl soft %.6f hard %.2f, mutual %.17g, total %.17g, iou %.15f", soft, hard ? hard->loss : -1.0, m,
                 total, iou);
  for (const auto& s : bad) o.detail += "; mismatch " + s;
  return o;
}

// ---------------------------------------------------------------------------
// Structural floors

Outcome structural_floors() {
  Rng rng(make_stream(20240601, "floors"));
  std::size_t pcl_viol = 0, mil_viol = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t T = 1 + uniform_index(rng, 200);
    const auto tl = make_timeline(T);
    std::vector<double> s(T);
    for (double& v : s) v = uniform01(rng);
    const double delta = uniform(rng, 0.0, 0.5);
    const double tau = uniform(rng, 0.05, 1.0);
    Tape t;
    model::BoundaryVar b{t.variable(uniform(rng, 1e-3, 1 - 1e-3)), t.variable(uniform(rng, 1e-3, 1 - 1e-3))};
    const double k = uniform(rng, 10.0, 2000.0);
    if (loss::pcl_loss(b, {s, ScoreKind::QFM}, tau, delta, tl, k).value() < 2 * delta) ++pcl_viol;

    const double d_mil = uniform(rng, 0.0, 0.5);
    const MatchScorePair pair{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    if (loss::mil_loss(pair, d_mil) < d_mil) ++mil_viol;
    Tape t2;
    if (loss::mil_loss(t2.variable(pair.m_pos), t2.variable(pair.m_neg), d_mil).value() < d_mil) ++mil_viol;
  }
  return {pcl_viol == 0 && mil_viol == 0,
          fmt("pcl >= 2*delta violations %zu/1000, mil >= Delta violations %zu/2000", pcl_viol, mil_viol)};
}

// ---------------------------------------------------------------------------
// Oracle equivalence

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(make_stream(7, "oracle-equivalence"));
  std::size_t agree = 0;
  double worst = 1.0;
  for (std::uint64_t n = 0; n < 100; ++n) {
    const auto u = synth::unimodal_scores(64, rng);
    const auto oracle = synth::oracle_boundary(u.scores, 128);
    synth::DescentConfig dc;
    dc.seed = n;
    const auto desc = synth::descend_pcl(u.scores, dc);
    const double iou = eval::interval_iou(clamp_interval(oracle.boundary), clamp_interval(desc.boundary));
    worst = std::min(worst, iou);
    if (iou >= 0.9) ++agree;
  }
  const double secs = seconds_since(t0);
  return {agree >= 95 && secs < 60.0, fmt("%zu/100 sequences with IoU >= 0.9 (worst %.3f) in %.1fs", agree, worst, secs)};
}

// ---------------------------------------------------------------------------
// Ablation trend and intersection-ratio histogram

struct VariantStats {
  double mean_iou = 0.0;
  std::size_t high_mass = 0;  // instances in the [0.8, 1.0] bins
  std::vector<double> per_seed;
};

constexpr const char* kVariants[] = {"none", "mutual", "pcl", "full"};

// Benchmark training settings (see README).
train::TrainConfig benchmark_config(std::uint64_t seed, const std::string& ablation) {
  train::TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = 0.01;
  cfg.batch_size = 8;
  cfg.ablation = train::Ablation::from_name(ablation);
  return cfg;
}

std::vector<VariantStats> run_ablation_sweep(double& secs) {
  const auto t0 = Clock::now();
  std::vector<VariantStats> stats(4);
  constexpr int kSeeds = 5;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    synth::SynthConfig sc;
    sc.n_instances = 700;
    sc.seed = seed;
    const auto out = synth::generate_dataset(sc);
    const auto [train_set, test_set] = synth::split(out.dataset, 500);
    const auto dict =
        expand::build_dictionary(out.dataset, synth::stub_captioner(out, sc), expand::ExpansionConfig{});
    const auto gts = train::ground_truths(test_set);
    for (int v = 0; v < 4; ++v) {
      const auto result = train::train(train_set, dict, benchmark_config(seed, kVariants[v]));
      const auto rep = eval::rank1_at_iou(train::infer(test_set, result.params_o), gts);
      stats[v].mean_iou += rep.mean_iou / kSeeds;
      stats[v].per_seed.push_back(rep.mean_iou);
      stats[v].high_mass += rep.histogram.mass_from(0.8);
    }
  }
  secs = seconds_since(t0);
  return stats;
}

Outcome ablation_trend(const std::vector<VariantStats>& s, double secs) {
  const double base = s[0].mean_iou, mutual = s[1].mean_iou, pcl = s[2].mean_iou, full = s[3].mean_iou;
  const bool ok = base <= pcl && base <= mutual && full >= base + 0.03 && secs < 600.0;
  std::string per_seed;
  for (int v = 0; v < 4; ++v) {
    per_seed += std::string(v ? "; " : "") + kVariants[v] + " [";
    for (std::size_t i = 0; i < s[v].per_seed.size(); ++i) per_seed += fmt(i ? " %.1f" : "%.1f", 100 * s[v].per_seed[i]);
    per_seed += "]";
  }
  return {ok, fmt("mIoU Base %.2f, +Mutual %.2f, +PCL %.2f, Full %.2f (Full - Base %+.2f) in %.0fs; per seed ", 100 * base,
                  100 * mutual, 100 * pcl, 100 * full, 100 * (full - base), secs) +
                  per_seed};
}

Outcome histogram_trend(const std::vector<VariantStats>& s) {
  return {s[3].high_mass > s[0].high_mass,
          fmt("instances with intersection ratio in [0.8, 1.0]: Full %zu vs Base %zu (of 1000)", s[3].high_mass,
              s[0].high_mass)};
}

// ---------------------------------------------------------------------------
// Determinism through the command-line pipeline

int run_quiet(std::vector<std::string> args) {
  args.insert(args.begin(), "etcbound");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return code;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "etcbound_acceptance_determinism";
  fs::remove_all(root);
  const auto data = (root / "data").string();
  if (run_quiet({"--seed", "3", "--out", data, "gen-data", "--n-instances", "120", "--n-train", "100"}) != 0 ||
      run_quiet({"--seed", "3", "--out", data, "build-dict", "--dataset", data + "/train.jsonl", "--truth",
                 data + "/truth.json"}) != 0) {
    return {false, "data preparation failed"};
  }
  for (const char* run : {"a", "b"}) {
    const std::vector<std::string> args = {"--seed", "3", "--threads", "2", "--out", (root / run).string(), "train", "--dataset",
                                           data + "/train.jsonl", "--dict", data + "/dict.jsonl", "--validation",
                                           data + "/test.jsonl", "--epochs", "6"};
    if (run_quiet(args) != 0) return {false, std::string("training run ") + run + " failed"};
  }
  std::vector<std::string> differing;
  for (const char* f : {"train_steps.jsonl", "train_epochs.jsonl", "checkpoint.json", "params_o.json",
                        "params_n.json", "run.json"}) {
    if (io::read_text(root / "a" / f) != io::read_text(root / "b" / f)) differing.push_back(f);
  }
  std::string detail = "6 artifacts compared byte for byte";
  for (const auto& f : differing) detail += "; differs: " + f;
  return {differing.empty(), detail};
}

}  // namespace

int main() {
  report("gradient-validation", gradient_validation());
  report("hand-value-oracles", hand_values());
  report("structural-floors", structural_floors());
  report("oracle-equivalence", oracle_equivalence());
  double secs = 0.0;
  const auto sweep = run_ablation_sweep(secs);
  report("ablation-trend", ablation_trend(sweep, secs));
  report("histogram-trend", histogram_trend(sweep));
  report("determinism", determinism());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
