#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "etcbound/expand.hpp"
#include "etcbound/types.hpp"

namespace etcbound::synth {

// Videos are a single ground-truth event (a fixed token set drawn from a pool
// of event types) surrounded by segments showing other event types. Queries
// name only part of the event's tokens.
struct SynthConfig {
  std::size_t n_instances = 500;
  std::size_t num_frames = 64;
  std::size_t dim = 16;
  double gt_width_min = 0.15;
  double gt_width_max = 0.45;
  double noise_sigma = 0.1;
  double partial_query_fraction = 0.5;
  std::vector<std::string> vocab;  // empty: "w000", "w001", ...
  std::uint64_t seed = 0;
  std::size_t event_types = 12;
  std::size_t tokens_per_event = 6;
  std::size_t distractor_segments = 1;  // contiguous runs over the non-event frames
  double description_dropout = 0.2;
  std::string id_prefix = "vid";

  void validate() const;
  nlohmann::json to_json() const;
  std::string hash() const;
};

struct InstanceTruth {
  std::string video_id;
  Interval gt;
  std::size_t event_type = 0;
  std::vector<std::string> event_tokens;
  std::vector<std::vector<std::string>> frame_tokens;
};

struct SynthOutput {
  Dataset dataset;
  std::vector<InstanceTruth> truth;

  expand::FrameTokens frame_tokens() const;
  nlohmann::json truth_json(const ArtifactMeta& meta) const;
};

SynthOutput generate_dataset(const SynthConfig& cfg);

// First n_train instances vs the rest; both keep the generator meta.
std::pair<Dataset, Dataset> split(const Dataset& all, std::size_t n_train);

expand::FrameTokens frame_tokens_from_truth_json(const nlohmann::json& j);

// Stub captioner with perfect grounding: echoes each frame's tokens.
expand::EchoCaptionProvider stub_captioner(const SynthOutput& out, const SynthConfig& cfg);

// One contiguous high region [bump.sta, bump.end] on a low floor plus small
// noise, min-max normalized.
struct UnimodalSequence {
  FrameScoreSequence scores;
  Interval bump;
};
UnimodalSequence unimodal_scores(std::size_t num_frames, Rng& rng, double width_min = 0.2,
                                 double width_max = 0.5, double noise = 0.03);

// Exhaustive grid minimizer of the hard-window contrast objective.
//
// Candidates are c_i = (i + 0.5)/G, w_j = (j + 0.5)/G. Order: hinged loss,
// then the un-hinged contrast sum(S_out - S_in), then smallest c, then
// smallest w. Candidates covering no frame centre are skipped.
struct OracleResult {
  TemporalBoundary boundary;
  double loss = 0.0;
  double contrast = 0.0;
  std::size_t candidates = 0;
};
OracleResult oracle_boundary(const FrameScoreSequence& scores, std::size_t grid_resolution, double tau = 0.25,
                             double delta = 0.15);

// Multi-restart Adam descent on the soft-window contrast loss, with the
// sharpness annealed linearly. The objective is pcl_loss plus
// contrast_weight * contrast, so inside the flat 2-delta region descent still
// follows the oracle's tie-break order.
struct DescentConfig {
  std::size_t restarts = 5;
  std::size_t steps = 500;
  double k_start = 50.0;
  double k_end = 500.0;
  double lr = 0.05;
  double contrast_weight = 0.3;
  double tau = 0.25;
  double delta = 0.15;
  std::uint64_t seed = 0;
};
struct DescentResult {
  TemporalBoundary boundary;
  double hard_loss = 0.0;
  double hard_contrast = 0.0;
  double soft_loss = 0.0;
};
DescentResult descend_pcl(const FrameScoreSequence& scores, const DescentConfig& cfg);

}  // namespace etcbound::synth
