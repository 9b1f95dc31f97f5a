#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "etcbound/types.hpp"

namespace etcbound::match {

// Deterministic hashed bag-of-tokens sentence embedding. Each token hashes to
// one of `hash_size` slots; each slot owns a fixed Gaussian direction in R^dim.
// The embedding is the L2-normalized sum of the token directions.
class TokenEmbedder {
 public:
  explicit TokenEmbedder(std::size_t dim, std::size_t hash_size = 4096);

  std::size_t dim() const { return dim_; }
  std::size_t hash_size() const { return hash_size_; }

  std::size_t slot(std::string_view token) const;
  // Zero vector for an empty token list.
  std::vector<double> embed(std::span<const std::string> tokens) const;
  std::vector<double> embed_text(std::string_view text) const;

 private:
  std::size_t dim_;
  std::size_t hash_size_;
  std::vector<double> table_;  // hash_size x dim
};

std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// (x - min) / (max - min); all zeros when the input is constant.
std::vector<double> minmax_normalize(std::span<const double> raw);

enum class DescriptionAggregation { Max, Mean };

// Per frame: aggregate cosine(embed(query), embed(description)) over the
// frame's descriptions, then min-max normalize over the video.
FrameScoreSequence qdm_scores(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                              const std::string& video_id, std::size_t num_frames,
                              const TokenEmbedder& embedder,
                              DescriptionAggregation aggregation = DescriptionAggregation::Max);

// Raw per-frame similarities before normalization (exposed for remote scorers
// and tests).
std::vector<double> qdm_raw(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                            const std::string& video_id, std::size_t num_frames,
                            const TokenEmbedder& embedder, DescriptionAggregation aggregation);

// Per frame cosine(query_embedding, frame feature), min-max normalized.
FrameScoreSequence qfm_scores(std::span<const double> query_embedding, const GroundingInstance& instance);

std::string query_hash(std::span<const std::string> query_tokens);

struct ScoreCacheEntry {
  std::string video_id;
  std::string query_hash;
  FrameScoreSequence sequence;
  bool operator==(const ScoreCacheEntry&) const = default;
};

struct InstanceScores {
  FrameScoreSequence qdm;
  FrameScoreSequence qfm;
};

// Both sequences for every instance, in dataset order.
std::vector<InstanceScores> score_dataset(const Dataset& dataset, const DescriptionDict& dict,
                                          const TokenEmbedder& embedder,
                                          DescriptionAggregation aggregation = DescriptionAggregation::Max);

std::vector<ScoreCacheEntry> to_cache_entries(const Dataset& dataset, std::span<const InstanceScores> scores);

}  // namespace etcbound::match
