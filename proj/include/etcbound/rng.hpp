#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace etcbound {

// Engine for every random stream in the project. Distributions are implemented
// here rather than via <random> adaptors so outputs do not depend on the
// standard library vendor.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view bytes);

// Independent sub-stream seed for a named consumer ("data", "init", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
Rng make_stream(std::uint64_t seed, std::string_view stream);

double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Unbiased integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);
// Standard normal via Box-Muller; consumes two draws per call.
double normal(Rng& rng);

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace etcbound
