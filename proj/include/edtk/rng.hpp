#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "edtk/tensor.hpp"

namespace edtk {

/// Deterministic generator. Uses only the raw mt19937_64 stream, whose output
/// is fixed by the standard, so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() { return engine_(); }

  template <typename T>
  void fill_uniform(BasicTensor<T>& t, double lo, double hi) {
    for (auto& v : t.data()) v = static_cast<T>(uniform(lo, hi));
  }

 private:
  std::mt19937_64 engine_;
};

/// Seed for the parameter at `path`, independent of construction order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : path) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace edtk
