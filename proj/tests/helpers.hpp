#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "etcbound/rng.hpp"
#include "etcbound/types.hpp"

namespace testutil {

inline etcbound::GroundingInstance random_instance(etcbound::Rng& rng, std::size_t T, std::size_t C,
                                                   const std::string& id = "v0") {
  etcbound::GroundingInstance inst;
  inst.video_id = id;
  inst.num_frames = T;
  inst.dim = C;
  inst.features.resize(T * C);
  for (double& f : inst.features) f = etcbound::normal(rng);
  inst.query_tokens = {"a", "b"};
  inst.query_embedding.resize(C);
  for (double& q : inst.query_embedding) q = etcbound::normal(rng);
  return inst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "etcbound_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> random_scores(etcbound::Rng& rng, std::size_t T) {
  std::vector<double> s(T);
  for (double& x : s) x = etcbound::uniform01(rng);
  return s;
}

}  // namespace testutil
