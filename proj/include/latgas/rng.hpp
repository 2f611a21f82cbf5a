#ifndef LATGAS_RNG_HPP
#define LATGAS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace latgas {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit Mersenne twister with bit-exact uniform and exponential draws
/// (no reliance on implementation-defined distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}

  /// Independent stream for (master seed, stream id).
  static Rng stream(std::uint64_t master, std::uint64_t id) {
    return Rng(master ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace latgas

#endif  // LATGAS_RNG_HPP
