#include "etcbound/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "etcbound/losses.hpp"
#include "etcbound/matchers.hpp"
#include "etcbound/optim.hpp"

namespace etcbound::synth {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n_instances == 0) throw ConfigError("n_instances must be positive");
  if (num_frames < 1 || num_frames > kMaxFrames) throw ConfigError("T must lie in [1, 200]");
  if (dim == 0) throw ConfigError("feature dimension must be positive");
  if (!(gt_width_min > 0.0 && gt_width_min <= gt_width_max && gt_width_max < 1.0)) {
    throw ConfigError("gt width range must satisfy 0 < min <= max < 1");
  }
  if (gt_width_min < 1.0 / static_cast<double>(num_frames)) {
    throw ConfigError("minimum gt width is narrower than one frame");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(partial_query_fraction > 0.0 && partial_query_fraction <= 1.0)) {
    throw ConfigError("partial_query_fraction must lie in (0, 1]");
  }
  if (event_types < 2) throw ConfigError("need at least two event types");
  if (tokens_per_event < 1 || tokens_per_event > kMaxQueryTokens) {
    throw ConfigError("tokens_per_event must lie in [1, 20]");
  }
  if (distractor_segments < 1 || distractor_segments >= event_types) {
    throw ConfigError("distractor_segments must lie in [1, event_types)");
  }
  if (!vocab.empty() && vocab.size() < event_types * tokens_per_event) {
    throw ConfigError("vocabulary too small for event_types * tokens_per_event distinct tokens");
  }
  if (!(description_dropout >= 0.0 && description_dropout < 1.0)) {
    throw ConfigError("description_dropout must lie in [0, 1)");
  }
}

json SynthConfig::to_json() const {
  json j;
  j["n_instances"] = n_instances;
  j["T"] = num_frames;
  j["C"] = dim;
  j["gt_width_range"] = {gt_width_min, gt_width_max};
  j["noise_sigma"] = noise_sigma;
  j["partial_query_fraction"] = partial_query_fraction;
  j["vocab"] = vocab;
  j["seed"] = seed;
  j["event_types"] = event_types;
  j["tokens_per_event"] = tokens_per_event;
  j["distractor_segments"] = distractor_segments;
  j["description_dropout"] = description_dropout;
  j["id_prefix"] = id_prefix;
  return j;
}

std::string SynthConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

namespace {

std::vector<std::string> default_vocab(std::size_t n) {
  std::vector<std::string> v;
  char buf[16];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "w%03zu", i);
    v.emplace_back(buf);
  }
  return v;
}

// Splits `frames` (ordered) into `parts` contiguous, non-empty runs where
// possible.
std::vector<std::vector<std::size_t>> contiguous_runs(const std::vector<std::size_t>& frames, std::size_t parts,
                                                      Rng& rng) {
  std::vector<std::vector<std::size_t>> runs;
  if (frames.empty()) return runs;
  parts = std::min(parts, frames.size());
  std::vector<std::size_t> cuts;
  if (parts > 1) {
    std::vector<std::size_t> positions(frames.size() - 1);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i + 1;
    shuffle(std::span<std::size_t>(positions), rng);
    cuts.assign(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(parts - 1));
    std::sort(cuts.begin(), cuts.end());
  }
  cuts.push_back(frames.size());
  std::size_t start = 0;
  for (std::size_t cut : cuts) {
    runs.emplace_back(frames.begin() + static_cast<std::ptrdiff_t>(start),
                      frames.begin() + static_cast<std::ptrdiff_t>(cut));
    start = cut;
  }
  return runs;
}

}  // namespace

SynthOutput generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t T = cfg.num_frames;
  const std::size_t K = cfg.tokens_per_event;

  auto vocab = cfg.vocab.empty() ? default_vocab(cfg.event_types * K) : cfg.vocab;
  Rng vocab_rng = make_stream(cfg.seed, "vocab");
  shuffle(std::span<std::string>(vocab), vocab_rng);
  std::vector<std::vector<std::string>> events(cfg.event_types);
  for (std::size_t e = 0; e < cfg.event_types; ++e) {
    events[e].assign(vocab.begin() + static_cast<std::ptrdiff_t>(e * K),
                     vocab.begin() + static_cast<std::ptrdiff_t>((e + 1) * K));
  }
  const match::TokenEmbedder embedder(cfg.dim);
  std::vector<std::vector<double>> event_embedding;
  for (const auto& ev : events) event_embedding.push_back(embedder.embed(ev));

  SynthOutput out;
  out.dataset.meta = ArtifactMeta{"dataset", cfg.hash(), cfg.seed};
  Rng rng = make_stream(cfg.seed, "data");
  const auto timeline = make_timeline(T);
  for (std::size_t n = 0; n < cfg.n_instances; ++n) {
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s%05zu", cfg.id_prefix.c_str(), n);
    InstanceTruth truth;
    truth.video_id = idbuf;
    truth.event_type = uniform_index(rng, cfg.event_types);

    std::vector<std::size_t> inside;
    for (;;) {
      const double w = uniform(rng, cfg.gt_width_min, cfg.gt_width_max);
      const double c = uniform(rng, 0.5 * w, 1.0 - 0.5 * w);
      truth.gt = {c - 0.5 * w, c + 0.5 * w};
      inside.clear();
      for (std::size_t i = 0; i < T; ++i) {
        if (timeline[i] >= truth.gt.sta && timeline[i] <= truth.gt.end) inside.push_back(i);
      }
      if (!inside.empty()) break;
    }

    std::vector<std::size_t> frame_type(T, truth.event_type);
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < T; ++i) {
      if (timeline[i] < truth.gt.sta || timeline[i] > truth.gt.end) outside.push_back(i);
    }
    std::vector<std::size_t> others;
    for (std::size_t e = 0; e < cfg.event_types; ++e) {
      if (e != truth.event_type) others.push_back(e);
    }
    shuffle(std::span<std::size_t>(others), rng);
    const auto runs = contiguous_runs(outside, cfg.distractor_segments, rng);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      for (std::size_t i : runs[r]) frame_type[i] = others[r];
    }

    truth.event_tokens = events[truth.event_type];
    GroundingInstance inst;
    inst.video_id = truth.video_id;
    inst.num_frames = T;
    inst.dim = cfg.dim;
    inst.features.resize(T * cfg.dim);
    for (std::size_t i = 0; i < T; ++i) {
      truth.frame_tokens.push_back(events[frame_type[i]]);
      const auto& base = event_embedding[frame_type[i]];
      for (std::size_t j = 0; j < cfg.dim; ++j) {
        inst.features[i * cfg.dim + j] = base[j] + cfg.noise_sigma * normal(rng);
      }
    }
    auto pool = truth.event_tokens;
    shuffle(std::span<std::string>(pool), rng);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.partial_query_fraction * static_cast<double>(K))));
    inst.query_tokens.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(keep, K)));
    inst.query_embedding = embedder.embed(inst.query_tokens);
    inst.gt = truth.gt;
    inst.validate();

    out.dataset.instances.push_back(std::move(inst));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

expand::FrameTokens SynthOutput::frame_tokens() const {
  expand::FrameTokens tokens;
  for (const auto& t : truth) tokens[t.video_id] = t.frame_tokens;
  return tokens;
}

json SynthOutput::truth_json(const ArtifactMeta& meta) const {
  json instances = json::array();
  for (const auto& t : truth) {
    instances.push_back({{"video_id", t.video_id},
                         {"gt", {t.gt.sta, t.gt.end}},
                         {"event_type", t.event_type},
                         {"event_tokens", t.event_tokens},
                         {"frame_tokens", t.frame_tokens}});
  }
  json meta_json = {{"kind", meta.kind}, {"config_hash", meta.config_hash}, {"seed", meta.seed}};
  return {{"meta", meta_json}, {"instances", instances}};
}

std::pair<Dataset, Dataset> split(const Dataset& all, std::size_t n_train) {
  if (n_train > all.size()) throw ConfigError("split point beyond dataset size");
  Dataset train, test;
  train.meta = all.meta;
  test.meta = all.meta;
  train.instances.assign(all.instances.begin(), all.instances.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.instances.assign(all.instances.begin() + static_cast<std::ptrdiff_t>(n_train), all.instances.end());
  return {std::move(train), std::move(test)};
}

expand::FrameTokens frame_tokens_from_truth_json(const json& j) {
  expand::FrameTokens tokens;
  try {
    for (const auto& inst : j.at("instances")) {
      tokens[inst.at("video_id").get<std::string>()] =
          inst.at("frame_tokens").get<std::vector<std::vector<std::string>>>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed truth file: ") + e.what());
  }
  return tokens;
}

expand::EchoCaptionProvider stub_captioner(const SynthOutput& out, const SynthConfig& cfg) {
  return expand::EchoCaptionProvider(out.frame_tokens(), cfg.description_dropout,
                                     derive_seed(cfg.seed, "captions"));
}

UnimodalSequence unimodal_scores(std::size_t num_frames, Rng& rng, double width_min, double width_max,
                                 double noise) {
  const double w = uniform(rng, width_min, width_max);
  const double sta = uniform(rng, 0.1, 0.9 - w);
  UnimodalSequence out;
  out.bump = {sta, sta + w};
  std::vector<double> raw(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    const double t = frame_time(i, num_frames);
    const double base = (t >= out.bump.sta && t <= out.bump.end) ? 1.0 : 0.0;
    raw[i] = base + noise * normal(rng);
  }
  out.scores = {match::minmax_normalize(raw), ScoreKind::QDM};
  return out;
}

namespace {

constexpr double kTieEps = 1e-12;

// Lexicographic (loss, contrast) comparison.
bool strictly_better(double loss_a, double contrast_a, double loss_b, double contrast_b) {
  if (loss_a < loss_b - kTieEps) return true;
  if (loss_a > loss_b + kTieEps) return false;
  return contrast_a < contrast_b - kTieEps;
}

}  // namespace

OracleResult oracle_boundary(const FrameScoreSequence& scores, std::size_t grid_resolution, double tau,
                             double delta) {
  if (grid_resolution < 1) throw ConfigError("grid resolution must be positive");
  const auto timeline = make_timeline(scores.scores.size());
  OracleResult best;
  bool have = false;
  const double G = static_cast<double>(grid_resolution);
  for (std::size_t i = 0; i < grid_resolution; ++i) {
    for (std::size_t j = 0; j < grid_resolution; ++j) {
      const TemporalBoundary b{(static_cast<double>(i) + 0.5) / G, (static_cast<double>(j) + 0.5) / G};
      const auto hp = loss::hard_pcl(b, scores.scores, tau, delta, timeline);
      if (!hp) continue;
      ++best.candidates;
      if (!have || strictly_better(hp->loss, hp->contrast, best.loss, best.contrast)) {
        best.boundary = b;
        best.loss = hp->loss;
        best.contrast = hp->contrast;
        have = true;
      }
    }
  }
  if (!have) throw DataError("oracle found no candidate covering a frame");
  return best;
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

DescentResult descend_pcl(const FrameScoreSequence& scores, const DescentConfig& cfg) {
  const auto timeline = make_timeline(scores.scores.size());
  Rng rng = make_stream(cfg.seed, "descent");
  DescentResult best;
  bool have = false;
  diff::Tape tape;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    std::vector<double> z = {logit(uniform(rng, 0.1, 0.9)), logit(uniform(rng, 0.1, 0.6))};
    optim::Adam adam(2);
    double soft = 0.0;
    for (std::size_t s = 0; s < cfg.steps; ++s) {
      const double frac = cfg.steps > 1 ? static_cast<double>(s) / static_cast<double>(cfg.steps - 1) : 1.0;
      const double k = cfg.k_start + (cfg.k_end - cfg.k_start) * frac;
      tape.clear();
      const auto zv = tape.variables(z);
      const model::BoundaryVar b{diff::sigmoid(zv[0]), diff::sigmoid(zv[1])};
      const auto terms = loss::pcl_terms(b, scores, cfg.tau, cfg.delta, timeline, k);
      const auto objective = terms.loss + terms.contrast * cfg.contrast_weight;
      tape.backward(objective);
      soft = terms.loss.value();
      const std::vector<double> g = {zv[0].adjoint(), zv[1].adjoint()};
      adam.step(z, g, cfg.lr);
    }
    const TemporalBoundary b{diff::sigmoid_value(z[0]), diff::sigmoid_value(z[1])};
    const auto hp = loss::hard_pcl(b, scores.scores, cfg.tau, cfg.delta, timeline);
    const double hl = hp ? hp->loss : std::numeric_limits<double>::infinity();
    const double hc = hp ? hp->contrast : std::numeric_limits<double>::infinity();
    if (!have || strictly_better(hl, hc, best.hard_loss, best.hard_contrast)) {
      best = {b, hl, hc, soft};
      have = true;
    }
  }
  return best;
}

}  // namespace etcbound::synth
