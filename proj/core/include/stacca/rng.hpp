#pragma once

#include <cstdint>
#include <random>

namespace stacca {

// All randomness in a run flows from one root seed through named streams.
// A stream is identified by (root, stream id, a, b); distinct tuples give
// statistically independent mt19937_64 engines. Helpers below avoid
// std::uniform_*_distribution so draws are bit-identical across standard
// library implementations.
enum class Stream : std::uint64_t {
  GraphGen = 1,
  EnvReset = 2,
  EnvNoise = 3,
  PolicySample = 4,
  ParamInit = 5,
  Eval = 6,
  Shuffle = 7,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  RngStream(std::uint64_t root, Stream stream, std::uint64_t a = 0,
            std::uint64_t b = 0) {
    std::uint64_t s = root;
    std::uint64_t mixed = splitmix64(s);
    s ^= static_cast<std::uint64_t>(stream) * 0xda942042e4dd58b5ULL;
    mixed ^= splitmix64(s);
    s ^= a * 0x2545f4914f6cdd1dULL;
    mixed ^= splitmix64(s);
    s ^= b * 0x9e3779b97f4a7c15ULL;
    mixed ^= splitmix64(s);
    engine_.seed(mixed);
  }

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // uniform integer in [0, n)
  int next_int(int n) {
    auto wide = static_cast<unsigned __int128>(engine_());
    return static_cast<int>((wide * static_cast<std::uint64_t>(n)) >> 64);
  }

  // uniform in [lo, hi)
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stacca
