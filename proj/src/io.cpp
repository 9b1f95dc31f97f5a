#include "etcbound/io.hpp"

#include <fstream>
#include <sstream>

namespace etcbound::io {

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

json to_json(const GroundingInstance& instance) {
  json frames = json::array();
  for (std::size_t i = 0; i < instance.num_frames; ++i) {
    const auto f = instance.frame(i);
    frames.push_back(std::vector<double>(f.begin(), f.end()));
  }
  json j;
  j["video_id"] = instance.video_id;
  j["frames"] = std::move(frames);
  j["query_tokens"] = instance.query_tokens;
  j["query_embedding"] = instance.query_embedding;
  j["gt"] = instance.gt ? json::array({instance.gt->sta, instance.gt->end}) : json(nullptr);
  return j;
}

GroundingInstance instance_from_json(const json& j) {
  GroundingInstance inst;
  inst.video_id = j.at("video_id").get<std::string>();
  const auto& frames = j.at("frames");
  inst.num_frames = frames.size();
  inst.dim = inst.num_frames ? frames.at(0).size() : 0;
  inst.features.reserve(inst.num_frames * inst.dim);
  for (const auto& f : frames) {
    if (f.size() != inst.dim) throw DataError("instance '" + inst.video_id + "': ragged frame features");
    for (const auto& v : f) inst.features.push_back(v.get<double>());
  }
  inst.query_tokens = j.at("query_tokens").get<std::vector<std::string>>();
  inst.query_embedding = j.at("query_embedding").get<std::vector<double>>();
  if (j.contains("gt") && !j["gt"].is_null()) {
    const auto& g = j["gt"];
    if (g.size() != 2) throw DataError("instance '" + inst.video_id + "': gt must be [sta, end]");
    inst.gt = Interval{g[0].get<double>(), g[1].get<double>()};
  }
  inst.validate();
  return inst;
}

json to_json(const ArtifactMeta& meta) {
  return {{"kind", meta.kind}, {"config_hash", meta.config_hash}, {"seed", meta.seed}};
}

ArtifactMeta meta_from_json(const json& j) {
  return {j.at("kind").get<std::string>(), j.at("config_hash").get<std::string>(),
          j.at("seed").get<std::uint64_t>()};
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  if (dataset.meta) out << json{{"meta", to_json(*dataset.meta)}}.dump() << '\n';
  for (const auto& inst : dataset.instances) out << to_json(inst).dump() << '\n';
}

Dataset read_dataset(const std::filesystem::path& path) {
  Dataset ds;
  for_each_line(path, [&](const json& j) {
    if (j.contains("meta")) {
      ds.meta = meta_from_json(j["meta"]);
      return;
    }
    ds.instances.push_back(instance_from_json(j));
  });
  return ds;
}

void write_dictionary(const std::filesystem::path& path, const DescriptionDict& dict) {
  auto out = open_out(path);
  if (dict.meta) out << json{{"meta", to_json(*dict.meta)}}.dump() << '\n';
  for (const auto& [key, list] : dict.entries()) {
    for (const auto& d : list) {
      json j;
      j["video_id"] = key.first;
      j["frame_index"] = key.second;
      j["prompt_id"] = d.prompt_id;
      j["text"] = d.text;
      out << j.dump() << '\n';
    }
  }
}

DescriptionDict read_dictionary(const std::filesystem::path& path) {
  DescriptionDict dict;
  for_each_line(path, [&](const json& j) {
    if (j.contains("meta")) {
      dict.meta = meta_from_json(j["meta"]);
      return;
    }
    dict.append(j.at("video_id").get<std::string>(), j.at("frame_index").get<std::size_t>(),
                {j.at("prompt_id").get<int>(), j.at("text").get<std::string>()});
  });
  return dict;
}

void write_score_cache(const std::filesystem::path& path, const std::vector<match::ScoreCacheEntry>& entries,
                       const std::optional<ArtifactMeta>& meta) {
  auto out = open_out(path);
  if (meta) out << json{{"meta", to_json(*meta)}}.dump() << '\n';
  for (const auto& e : entries) {
    json j;
    j["video_id"] = e.video_id;
    j["query_hash"] = e.query_hash;
    j["kind"] = to_string(e.sequence.kind);
    j["scores"] = e.sequence.scores;
    out << j.dump() << '\n';
  }
}

std::vector<match::ScoreCacheEntry> read_score_cache(const std::filesystem::path& path) {
  std::vector<match::ScoreCacheEntry> entries;
  for_each_line(path, [&](const json& j) {
    if (j.contains("meta")) return;
    entries.push_back({j.at("video_id").get<std::string>(), j.at("query_hash").get<std::string>(),
                       {j.at("scores").get<std::vector<double>>(),
                        score_kind_from_string(j.at("kind").get<std::string>())}});
  });
  return entries;
}

json params_to_json(const model::PredictorParams& params, std::uint64_t seed, std::uint64_t step) {
  const std::size_t D = params.input_dim();
  const std::size_t H = params.hidden;
  json w1 = json::array();
  for (std::size_t h = 0; h < H; ++h) {
    w1.push_back(std::vector<double>(params.w1.begin() + static_cast<std::ptrdiff_t>(h * D),
                                     params.w1.begin() + static_cast<std::ptrdiff_t>((h + 1) * D)));
  }
  json w2 = json::array();
  for (std::size_t r = 0; r < 2; ++r) {
    w2.push_back(std::vector<double>(params.w2.begin() + static_cast<std::ptrdiff_t>(r * H),
                                     params.w2.begin() + static_cast<std::ptrdiff_t>((r + 1) * H)));
  }
  json j;
  j["w1"] = std::move(w1);
  j["b1"] = params.b1;
  j["w2"] = std::move(w2);
  j["b2"] = params.b2;
  j["k"] = params.k;
  j["attention_scale"] = params.attention_scale;
  j["feature_dim"] = params.feature_dim;
  j["hidden"] = params.hidden;
  j["seed"] = seed;
  j["step"] = step;
  return j;
}

model::PredictorParams params_from_json(const json& j) {
  model::PredictorParams p;
  try {
    p.feature_dim = j.at("feature_dim").get<std::size_t>();
    p.hidden = j.at("hidden").get<std::size_t>();
    p.w1.clear();
    for (const auto& row : j.at("w1")) {
      for (const auto& v : row) p.w1.push_back(v.get<double>());
    }
    p.b1 = j.at("b1").get<std::vector<double>>();
    p.w2.clear();
    for (const auto& row : j.at("w2")) {
      for (const auto& v : row) p.w2.push_back(v.get<double>());
    }
    p.b2 = j.at("b2").get<std::vector<double>>();
    p.k = j.at("k").get<double>();
    p.attention_scale = j.value("attention_scale", 10.0);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed parameter checkpoint: ") + e.what());
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid parameter checkpoint: ") + e.what());
  }
  return p;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace etcbound::io
