#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "etcbound/boundary_model.hpp"
#include "etcbound/matchers.hpp"
#include "etcbound/types.hpp"

namespace etcbound::io {

using nlohmann::json;

json to_json(const GroundingInstance& instance);
GroundingInstance instance_from_json(const json& j);

json to_json(const ArtifactMeta& meta);
ArtifactMeta meta_from_json(const json& j);

// JSONL files may start with a {"meta": {...}} header line.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

// One line per description: {"video_id","frame_index","prompt_id","text"}.
void write_dictionary(const std::filesystem::path& path, const DescriptionDict& dict);
DescriptionDict read_dictionary(const std::filesystem::path& path);

void write_score_cache(const std::filesystem::path& path, const std::vector<match::ScoreCacheEntry>& entries,
                       const std::optional<ArtifactMeta>& meta = std::nullopt);
std::vector<match::ScoreCacheEntry> read_score_cache(const std::filesystem::path& path);

// {"w1","b1","w2","b2","k","seed","step", ...}
json params_to_json(const model::PredictorParams& params, std::uint64_t seed, std::uint64_t step);
model::PredictorParams params_from_json(const json& j);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

}  // namespace etcbound::io
