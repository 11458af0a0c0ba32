#pragma once

#include <cmath>
#include <cstdint>

namespace eimtrng {

// splitmix64 finalizer; the building block of all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// Keyed derivation: fold words into a running hash. Documented in the README
// so reports are reproducible across platforms.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a) {
  return mix64(master + 0x9e3779b97f4a7c15ull * (a + 1));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b, std::uint64_t c) {
  return derive_seed(derive_seed(master, a, b), c);
}

// Value-type splitmix64 stream. Bit-exact on every platform; copy to fork,
// split() to derive an independent stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // uniform in [0, 1) with 53 random bits
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // unbiased enough for simulation work (Lemire multiply-shift)
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller, no caching so the stream position stays predictable
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double next_lognormal(double median, double sigma) {
    return std::exp(std::log(median) + sigma * next_normal());
  }

  Rng split(std::uint64_t tag) const { return Rng(mix64(state_ ^ mix64(tag))); }

  std::uint64_t state() const { return state_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t state_;
};

}  // namespace eimtrng
