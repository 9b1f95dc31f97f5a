#include "etcbound/types.hpp"

#include <algorithm>
#include <cmath>

namespace etcbound {

Interval clamp_interval(const TemporalBoundary& b) {
  Interval out{std::max(0.0, b.raw_sta()), std::min(1.0, b.raw_end())};
  if (out.sta > out.end) out.sta = out.end;
  return out;
}

std::vector<double> make_timeline(std::size_t num_frames) {
  std::vector<double> t(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) t[i] = frame_time(i, num_frames);
  return t;
}

void GroundingInstance::validate() const {
  const std::string where = "instance '" + video_id + "': ";
  if (video_id.empty()) throw DataError("instance with empty video_id");
  if (num_frames < 1 || num_frames > kMaxFrames) {
    throw DataError(where + "frame count " + std::to_string(num_frames) + " outside [1, 200]");
  }
  if (dim == 0) throw DataError(where + "feature dimension is zero");
  if (features.size() != num_frames * dim) throw DataError(where + "ragged frame features");
  if (query_tokens.size() > kMaxQueryTokens) {
    throw DataError(where + "query has " + std::to_string(query_tokens.size()) + " tokens (max 20)");
  }
  if (query_embedding.size() != dim) {
    throw DataError(where + "query embedding dimension " + std::to_string(query_embedding.size()) +
                    " != feature dimension " + std::to_string(dim));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError(where + "non-finite frame feature");
  }
  for (double v : query_embedding) {
    if (!std::isfinite(v)) throw DataError(where + "non-finite query embedding");
  }
  if (gt && !(0.0 <= gt->sta && gt->sta <= gt->end && gt->end <= 1.0)) {
    throw DataError(where + "ground-truth interval outside [0,1] or reversed");
  }
}

const char* to_string(ScoreKind kind) { return kind == ScoreKind::QDM ? "QDM" : "QFM"; }

ScoreKind score_kind_from_string(const std::string& name) {
  if (name == "QDM") return ScoreKind::QDM;
  if (name == "QFM") return ScoreKind::QFM;
  throw DataError("unknown score kind '" + name + "'");
}

const GroundingInstance& Dataset::find(const std::string& video_id) const {
  for (const auto& inst : instances) {
    if (inst.video_id == video_id) return inst;
  }
  throw DataError("video '" + video_id + "' not in dataset");
}

void DescriptionDict::set(const std::string& video_id, std::size_t frame,
                          std::vector<Description> descriptions) {
  entries_[{video_id, frame}] = std::move(descriptions);
}

void DescriptionDict::append(const std::string& video_id, std::size_t frame, Description description) {
  entries_[{video_id, frame}].push_back(std::move(description));
}

const std::vector<Description>* DescriptionDict::find(const std::string& video_id,
                                                      std::size_t frame) const {
  auto it = entries_.find({video_id, frame});
  return it == entries_.end() ? nullptr : &it->second;
}

const std::vector<Description>& DescriptionDict::at(const std::string& video_id,
                                                    std::size_t frame) const {
  if (const auto* found = find(video_id, frame)) return *found;
  throw DataError("description dictionary has no entry for video '" + video_id + "' frame " +
                  std::to_string(frame));
}

std::vector<std::size_t> DescriptionDict::missing_frames(const std::string& video_id,
                                                         std::size_t num_frames) const {
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < num_frames; ++i) {
    const auto* found = find(video_id, i);
    if (found == nullptr || found->empty()) missing.push_back(i);
  }
  return missing;
}

std::size_t DescriptionDict::num_descriptions() const {
  std::size_t n = 0;
  for (const auto& [key, list] : entries_) n += list.size();
  return n;
}

}  // namespace etcbound
