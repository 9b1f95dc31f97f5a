#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "etcbound/boundary_model.hpp"
#include "etcbound/matchers.hpp"
#include "etcbound/rng.hpp"
#include "etcbound/types.hpp"

namespace etcbound::expand {

const std::vector<std::string>& default_prompts();

struct ExpansionConfig {
  std::size_t n_p = 5;  // descriptions per frame
  std::size_t n_f = 5;  // frames sampled per region
  std::vector<std::string> prompts = default_prompts();
  std::uint64_t rng_seed = 0;
  std::size_t max_in_flight = 4;

  void validate() const;
  // Prompt text used for the j-th description of a frame (prompts cycle).
  const std::string& prompt_for(std::size_t j) const { return prompts[j % prompts.size()]; }
};

struct CaptionRequest {
  std::string video_id;
  std::size_t frame_index = 0;
  std::span<const double> frame_features;
  std::vector<std::string> prompts;  // one per requested description
};

// Produces one description per requested prompt. Implementations must be
// safe to call concurrently.
class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  virtual std::vector<std::string> describe(const CaptionRequest& request) const = 0;
};

// Per-video, per-frame token lists (the synthetic "what is on screen").
using FrameTokens = std::map<std::string, std::vector<std::vector<std::string>>>;

// Offline stub: echoes the frame's tokens, optionally dropping each token
// with probability `dropout` (at least one token is kept). Output depends
// only on (seed, video, frame, description index).
class EchoCaptionProvider : public CaptionProvider {
 public:
  EchoCaptionProvider(FrameTokens tokens, double dropout = 0.0, std::uint64_t seed = 0);
  std::vector<std::string> describe(const CaptionRequest& request) const override;

 private:
  FrameTokens tokens_;
  double dropout_;
  std::uint64_t seed_;
};

// Replays descriptions from an existing dictionary file.
class ReplayCaptionProvider : public CaptionProvider {
 public:
  explicit ReplayCaptionProvider(DescriptionDict dict) : dict_(std::move(dict)) {}
  std::vector<std::string> describe(const CaptionRequest& request) const override;

 private:
  DescriptionDict dict_;
};

class DictionaryBuildError : public DataError {
 public:
  DictionaryBuildError(std::vector<std::pair<std::string, std::size_t>> missing, const std::string& first_error);
  const std::vector<std::pair<std::string, std::size_t>>& missing() const { return missing_; }

 private:
  std::vector<std::pair<std::string, std::size_t>> missing_;
};

// Captions every frame of every instance (n_p descriptions each). Requests
// fan out over cfg.max_in_flight workers; the result does not depend on the
// worker count. Throws DictionaryBuildError listing every failed frame.
DescriptionDict build_dictionary(std::span<const Dataset* const> datasets, const CaptionProvider& provider,
                                 const ExpansionConfig& cfg);
DescriptionDict build_dictionary(const Dataset& dataset, const CaptionProvider& provider,
                                 const ExpansionConfig& cfg);

// Frames whose centre lies in the clamped interval; falls back to the frame
// nearest the boundary centre when that set is empty.
std::vector<std::size_t> region_frames(const TemporalBoundary& b, std::size_t num_frames);

struct RegionSample {
  std::string text;
  std::vector<std::size_t> frames;  // frames whose descriptions formed the pool
  std::size_t pool_size = 0;
};

// Samples min(n_f, |region|) distinct frames, pools their descriptions and
// returns one uniformly at random.
RegionSample sample_region_description(const DescriptionDict& dict, const std::string& video_id,
                                       std::size_t num_frames, const TemporalBoundary& b,
                                       const ExpansionConfig& cfg, Rng& rng);

struct ExpansionResult {
  model::BoundaryVar p_o;
  model::BoundaryVar p_n;
  std::vector<double> expanded_embedding;
  std::string description;
};

// (1) p_o from the original query, (2) one description sampled from the
// region p_o covers, (3) p_n from the embedded description. The sampling step
// is discrete; no gradient reaches it.
ExpansionResult expand_step(diff::Tape& tape, const GroundingInstance& instance,
                            const model::BoundParams& params_o, const model::BoundParams& params_n,
                            const DescriptionDict& dict, const match::TokenEmbedder& embedder,
                            const ExpansionConfig& cfg, Rng& rng);

}  // namespace etcbound::expand
