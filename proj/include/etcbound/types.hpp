#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace etcbound {

// Malformed or contract-violating input data (exit code 3 at the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent configuration: dimension mismatches, out-of-range settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxFrames = 200;
inline constexpr std::size_t kMaxQueryTokens = 20;

struct Interval {
  double sta = 0.0;
  double end = 0.0;

  double length() const { return end - sta; }
  bool operator==(const Interval&) const = default;
};

// Learnable (center, width) boundary on the normalized [0,1] timeline.
struct TemporalBoundary {
  double center = 0.5;
  double width = 0.5;

  double raw_sta() const { return center - 0.5 * width; }
  double raw_end() const { return center + 0.5 * width; }
  bool operator==(const TemporalBoundary&) const = default;
};

// (max(0, c - w/2), min(1, c + w/2)).
Interval clamp_interval(const TemporalBoundary& b);

// Frame-center time t_i = (i + 0.5) / T.
inline double frame_time(std::size_t i, std::size_t num_frames) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(num_frames);
}
std::vector<double> make_timeline(std::size_t num_frames);

struct GroundingInstance {
  std::string video_id;
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::vector<double> features;  // num_frames x dim, row-major
  std::vector<std::string> query_tokens;
  std::vector<double> query_embedding;
  std::optional<Interval> gt;

  std::span<const double> frame(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  std::vector<double> timeline() const { return make_timeline(num_frames); }

  // Throws DataError on any broken invariant.
  void validate() const;
  bool operator==(const GroundingInstance&) const = default;
};

enum class ScoreKind { QDM, QFM };
const char* to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);

struct FrameScoreSequence {
  std::vector<double> scores;
  ScoreKind kind = ScoreKind::QDM;
  bool operator==(const FrameScoreSequence&) const = default;
};

struct MatchScorePair {
  double m_pos = 0.0;
  double m_neg = 0.0;
};

// Provenance written into every artifact file.
struct ArtifactMeta {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool operator==(const ArtifactMeta&) const = default;
};

struct Dataset {
  std::optional<ArtifactMeta> meta;
  std::vector<GroundingInstance> instances;

  std::size_t size() const { return instances.size(); }
  const GroundingInstance& find(const std::string& video_id) const;
};

struct Description {
  int prompt_id = 0;
  std::string text;
  bool operator==(const Description&) const = default;
};

// Per-(video, frame) caption store. Iteration is sorted by video id, then
// frame index; descriptions keep their generation order inside an entry.
class DescriptionDict {
 public:
  using Key = std::pair<std::string, std::size_t>;
  using Map = std::map<Key, std::vector<Description>>;

  void set(const std::string& video_id, std::size_t frame, std::vector<Description> descriptions);
  void append(const std::string& video_id, std::size_t frame, Description description);

  const std::vector<Description>* find(const std::string& video_id, std::size_t frame) const;
  // Throws DataError naming the missing entry.
  const std::vector<Description>& at(const std::string& video_id, std::size_t frame) const;

  // Frame indices in [0, num_frames) without an entry.
  std::vector<std::size_t> missing_frames(const std::string& video_id, std::size_t num_frames) const;

  std::size_t num_frames_stored() const { return entries_.size(); }
  std::size_t num_descriptions() const;
  const Map& entries() const { return entries_; }

  std::optional<ArtifactMeta> meta;

  bool operator==(const DescriptionDict& other) const { return entries_ == other.entries_; }

 private:
  Map entries_;
};

}  // namespace etcbound
