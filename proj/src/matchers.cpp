#include "etcbound/matchers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "etcbound/diff.hpp"
#include "etcbound/rng.hpp"

namespace etcbound::match {

namespace {
constexpr std::uint64_t kEmbedderSalt = 0x5EEDB0A7D1C7ULL;
}

TokenEmbedder::TokenEmbedder(std::size_t dim, std::size_t hash_size)
    : dim_(dim), hash_size_(hash_size), table_(dim * hash_size) {
  if (dim == 0 || hash_size == 0) throw ConfigError("embedder dimension and hash size must be positive");
  for (std::size_t s = 0; s < hash_size_; ++s) {
    Rng rng(derive_seed(kEmbedderSalt, "slot" + std::to_string(s)));
    for (std::size_t j = 0; j < dim_; ++j) table_[s * dim_ + j] = normal(rng);
  }
}

std::size_t TokenEmbedder::slot(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % hash_size_);
}

std::vector<double> TokenEmbedder::embed(std::span<const std::string> tokens) const {
  std::vector<double> v(dim_, 0.0);
  for (const auto& tok : tokens) {
    const double* row = table_.data() + slot(tok) * dim_;
    for (std::size_t j = 0; j < dim_; ++j) v[j] += row[j];
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return v;
}

std::vector<double> TokenEmbedder::embed_text(std::string_view text) const {
  const auto tokens = tokenize(text);
  return embed(tokens);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / range;
  // Guarantee exact endpoints despite rounding.
  out[static_cast<std::size_t>(hi_it - raw.begin())] = 1.0;
  for (double& x : out) x = std::clamp(x, 0.0, 1.0);
  return out;
}

std::vector<double> qdm_raw(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                            const std::string& video_id, std::size_t num_frames,
                            const TokenEmbedder& embedder, DescriptionAggregation aggregation) {
  const auto missing = dict.missing_frames(video_id, num_frames);
  if (!missing.empty()) {
    std::ostringstream os;
    os << "description dictionary is missing video '" << video_id << "' frames [";
    for (std::size_t i = 0; i < missing.size(); ++i) os << (i ? "," : "") << missing[i];
    os << "]";
    throw DataError(os.str());
  }
  const auto q = embedder.embed(query_tokens);
  std::vector<double> raw(num_frames);
  for (std::size_t f = 0; f < num_frames; ++f) {
    const auto& descriptions = dict.at(video_id, f);
    double agg = aggregation == DescriptionAggregation::Max ? -2.0 : 0.0;
    for (const auto& d : descriptions) {
      const double s = diff::cosine_value(q, embedder.embed_text(d.text));
      if (aggregation == DescriptionAggregation::Max) {
        agg = std::max(agg, s);
      } else {
        agg += s;
      }
    }
    if (aggregation == DescriptionAggregation::Mean) agg /= static_cast<double>(descriptions.size());
    raw[f] = agg;
  }
  return raw;
}

FrameScoreSequence qdm_scores(std::span<const std::string> query_tokens, const DescriptionDict& dict,
                              const std::string& video_id, std::size_t num_frames,
                              const TokenEmbedder& embedder, DescriptionAggregation aggregation) {
  const auto raw = qdm_raw(query_tokens, dict, video_id, num_frames, embedder, aggregation);
  return {minmax_normalize(raw), ScoreKind::QDM};
}

FrameScoreSequence qfm_scores(std::span<const double> query_embedding, const GroundingInstance& instance) {
  if (query_embedding.size() != instance.dim) {
    throw ConfigError("query embedding dimension does not match frame features");
  }
  std::vector<double> raw(instance.num_frames);
  for (std::size_t i = 0; i < instance.num_frames; ++i) {
    raw[i] = diff::cosine_value(query_embedding, instance.frame(i));
  }
  return {minmax_normalize(raw), ScoreKind::QFM};
}

std::string query_hash(std::span<const std::string> query_tokens) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(join_tokens(query_tokens))));
  return buf;
}

std::vector<InstanceScores> score_dataset(const Dataset& dataset, const DescriptionDict& dict,
                                          const TokenEmbedder& embedder,
                                          DescriptionAggregation aggregation) {
  std::vector<InstanceScores> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    out.push_back({qdm_scores(inst.query_tokens, dict, inst.video_id, inst.num_frames, embedder, aggregation),
                   qfm_scores(inst.query_embedding, inst)});
  }
  return out;
}

std::vector<ScoreCacheEntry> to_cache_entries(const Dataset& dataset, std::span<const InstanceScores> scores) {
  std::vector<ScoreCacheEntry> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    const auto h = query_hash(inst.query_tokens);
    out.push_back({inst.video_id, h, scores[i].qdm});
    out.push_back({inst.video_id, h, scores[i].qfm});
  }
  return out;
}

}  // namespace etcbound::match
