#include "etcbound/expand.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

#include "etcbound/diff.hpp"

namespace etcbound::expand {

const std::vector<std::string>& default_prompts() {
  static const std::vector<std::string> prompts = {
      "Generate captions for that video frame.",
      "Provide a detailed description of the following frame.",
      "Describe the following frame in detail.",
      "Elaborate on the details of this frame in your own words.",
      "Describe the image concisely.",
  };
  return prompts;
}

void ExpansionConfig::validate() const {
  if (n_p < 1) throw ConfigError("n_p must be >= 1");
  if (n_f < 1) throw ConfigError("n_f must be >= 1");
  if (prompts.empty()) throw ConfigError("prompt list is empty");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

EchoCaptionProvider::EchoCaptionProvider(FrameTokens tokens, double dropout, std::uint64_t seed)
    : tokens_(std::move(tokens)), dropout_(dropout), seed_(seed) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("caption dropout must lie in [0, 1)");
}

std::vector<std::string> EchoCaptionProvider::describe(const CaptionRequest& request) const {
  auto video = tokens_.find(request.video_id);
  if (video == tokens_.end() || request.frame_index >= video->second.size()) {
    throw DataError("echo provider has no tokens for video '" + request.video_id + "' frame " +
                    std::to_string(request.frame_index));
  }
  const auto& frame_tokens = video->second[request.frame_index];
  std::vector<std::string> out;
  out.reserve(request.prompts.size());
  for (std::size_t j = 0; j < request.prompts.size(); ++j) {
    Rng rng(derive_seed(seed_, request.video_id + "/" + std::to_string(request.frame_index) + "/" +
                                   std::to_string(j)));
    std::vector<std::string> kept;
    for (const auto& tok : frame_tokens) {
      if (dropout_ == 0.0 || uniform01(rng) >= dropout_) kept.push_back(tok);
    }
    if (kept.empty() && !frame_tokens.empty()) kept.push_back(frame_tokens[uniform_index(rng, frame_tokens.size())]);
    out.push_back(match::join_tokens(kept));
  }
  return out;
}

std::vector<std::string> ReplayCaptionProvider::describe(const CaptionRequest& request) const {
  const auto& stored = dict_.at(request.video_id, request.frame_index);
  if (stored.size() < request.prompts.size()) {
    throw DataError("replay dictionary holds " + std::to_string(stored.size()) + " descriptions for video '" +
                    request.video_id + "' frame " + std::to_string(request.frame_index) + ", need " +
                    std::to_string(request.prompts.size()));
  }
  std::vector<std::string> out;
  for (std::size_t j = 0; j < request.prompts.size(); ++j) out.push_back(stored[j].text);
  return out;
}

namespace {

std::string describe_missing(const std::vector<std::pair<std::string, std::size_t>>& missing,
                             const std::string& first_error) {
  std::ostringstream os;
  os << "dictionary build failed for " << missing.size() << " frame(s):";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
    os << " (" << missing[i].first << ", " << missing[i].second << ")";
  }
  if (missing.size() > 20) os << " ...";
  if (!first_error.empty()) os << "; first error: " << first_error;
  return os.str();
}

}  // namespace

DictionaryBuildError::DictionaryBuildError(std::vector<std::pair<std::string, std::size_t>> missing,
                                           const std::string& first_error)
    : DataError(describe_missing(missing, first_error)), missing_(std::move(missing)) {}

DescriptionDict build_dictionary(std::span<const Dataset* const> datasets, const CaptionProvider& provider,
                                 const ExpansionConfig& cfg) {
  cfg.validate();
  struct Job {
    const GroundingInstance* instance;
    std::size_t frame;
  };
  std::vector<Job> jobs;
  for (const Dataset* ds : datasets) {
    for (const auto& inst : ds->instances) {
      for (std::size_t f = 0; f < inst.num_frames; ++f) jobs.push_back({&inst, f});
    }
  }
  std::vector<std::string> prompts(cfg.n_p);
  for (std::size_t j = 0; j < cfg.n_p; ++j) prompts[j] = cfg.prompt_for(j);

  std::vector<std::optional<std::vector<std::string>>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      CaptionRequest req{job.instance->video_id, job.frame, job.instance->frame(job.frame), prompts};
      try {
        auto out = provider.describe(req);
        if (out.size() != cfg.n_p) {
          errors[i] = "provider returned " + std::to_string(out.size()) + " descriptions, expected " +
                      std::to_string(cfg.n_p);
          continue;
        }
        results[i] = std::move(out);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = std::min(cfg.max_in_flight, std::max<std::size_t>(1, jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  DescriptionDict dict;
  std::vector<std::pair<std::string, std::size_t>> missing;
  std::string first_error;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) {
      missing.emplace_back(jobs[i].instance->video_id, jobs[i].frame);
      if (first_error.empty()) first_error = errors[i];
      continue;
    }
    std::vector<Description> list;
    for (std::size_t j = 0; j < cfg.n_p; ++j) {
      list.push_back({static_cast<int>(j % cfg.prompts.size()), std::move((*results[i])[j])});
    }
    dict.set(jobs[i].instance->video_id, jobs[i].frame, std::move(list));
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw DictionaryBuildError(std::move(missing), first_error);
  }
  return dict;
}

DescriptionDict build_dictionary(const Dataset& dataset, const CaptionProvider& provider,
                                 const ExpansionConfig& cfg) {
  const Dataset* one[] = {&dataset};
  return build_dictionary(std::span<const Dataset* const>(one), provider, cfg);
}

std::vector<std::size_t> region_frames(const TemporalBoundary& b, std::size_t num_frames) {
  const Interval iv = clamp_interval(b);
  std::vector<std::size_t> frames;
  for (std::size_t i = 0; i < num_frames; ++i) {
    const double t = frame_time(i, num_frames);
    if (t >= iv.sta && t <= iv.end) frames.push_back(i);
  }
  if (frames.empty() && num_frames > 0) {
    std::size_t best = 0;
    double best_d = std::abs(frame_time(0, num_frames) - b.center);
    for (std::size_t i = 1; i < num_frames; ++i) {
      const double d = std::abs(frame_time(i, num_frames) - b.center);
      if (d < best_d) {
        best = i;
        best_d = d;
      }
    }
    frames.push_back(best);
  }
  return frames;
}

RegionSample sample_region_description(const DescriptionDict& dict, const std::string& video_id,
                                       std::size_t num_frames, const TemporalBoundary& b,
                                       const ExpansionConfig& cfg, Rng& rng) {
  auto candidates = region_frames(b, num_frames);
  const std::size_t take = std::min(cfg.n_f, candidates.size());
  // Partial Fisher-Yates: the first `take` slots become a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(candidates[i], candidates[i + uniform_index(rng, candidates.size() - i)]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());

  std::vector<const std::string*> pool;
  for (std::size_t f : candidates) {
    for (const auto& d : dict.at(video_id, f)) pool.push_back(&d.text);
  }
  if (pool.empty()) {
    throw DataError("no descriptions stored for the region of video '" + video_id + "'");
  }
  RegionSample out;
  out.text = *pool[uniform_index(rng, pool.size())];
  out.frames = std::move(candidates);
  out.pool_size = pool.size();
  return out;
}

ExpansionResult expand_step(diff::Tape& tape, const GroundingInstance& instance,
                            const model::BoundParams& params_o, const model::BoundParams& params_n,
                            const DescriptionDict& dict, const match::TokenEmbedder& embedder,
                            const ExpansionConfig& cfg, Rng& rng) {
  ExpansionResult out;
  out.p_o = model::predict_boundary(tape, params_o, instance, instance.query_embedding);
  const auto sample = sample_region_description(dict, instance.video_id, instance.num_frames,
                                                out.p_o.value(), cfg, rng);
  out.description = sample.text;
  out.expanded_embedding = embedder.embed_text(sample.text);
  out.p_n = model::predict_boundary(tape, params_n, instance, out.expanded_embedding);
  return out;
}

}  // namespace etcbound::expand
