#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace wdro {

/// Counter-based splittable random stream.
///
/// Output k of a stream with key K is mix64(K + k * GAMMA), the splitmix64
/// generator, so a stream is a pure function of (key, counter). Child streams
/// derive their key from the parent key alone, never from the parent's
/// position, which makes nested derivations order-independent: any scheduling
/// of work across threads sees identical draws as long as each unit of work
/// owns its own stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix64(seed + kGamma)), ctr_(0) {}

  /// Derives an independent child stream addressed by `word`.
  RngStream substream(std::uint64_t word) const {
    return RngStream(mix64(key_ ^ mix64(word * kGamma + kSplitTag)), 0);
  }

  std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGamma); }

  /// Uniform double in (0, 1]; never returns 0, so log() is safe.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair and
  /// caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

 private:
  RngStream(std::uint64_t key, int) : key_(key), ctr_(0) {}

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSplitTag = 0xd1342543de82ef95ULL;

  std::uint64_t key_;
  std::uint64_t ctr_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace wdro
