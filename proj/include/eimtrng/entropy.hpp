#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eimtrng/bits.hpp"
#include "eimtrng/characterize.hpp"
#include "eimtrng/dram_model.hpp"

namespace eimtrng {

inline constexpr std::size_t kKeyBits = 256;

struct KeyWindow {
  std::uint32_t column_offset = 0;
  std::uint32_t width = kKeyBits;
  std::uint32_t unpredictable_density = 0;
};

struct KeyMaterial {
  BitVector bits;
  KeyWindow window;
  std::uint32_t source_row = 0;
};

// Best contiguous window by unpredictable-cell count; ties break toward the
// lowest offset. Scans every valid offset via a prefix sum.
inline KeyWindow select_key_window(const std::vector<CellClass>& classes,
                                   std::uint32_t width = kKeyBits) {
  if (classes.size() < width)
    throw std::invalid_argument("select_key_window: row narrower than window");
  std::vector<std::uint32_t> prefix(classes.size() + 1, 0);
  for (std::size_t i = 0; i < classes.size(); ++i)
    prefix[i + 1] = prefix[i] + (classes[i] == CellClass::Unpredictable ? 1 : 0);

  KeyWindow best{0, width, prefix[width]};
  for (std::uint32_t off = 1; off + width <= classes.size(); ++off) {
    std::uint32_t density = prefix[off + width] - prefix[off];
    if (density > best.unpredictable_density) best = {off, width, density};
  }
  return best;
}

// Pure read of the post-resolution row bits inside the window.
inline KeyMaterial extract_key(const DramArray& array, const KeyWindow& window,
                               std::uint32_t source_row) {
  if (window.column_offset + window.width > array.cols())
    throw std::out_of_range("extract_key: window out of bounds");
  const BitVector& row = array.row_bits(source_row);
  KeyMaterial key;
  key.bits = BitVector(window.width);
  for (std::uint32_t i = 0; i < window.width; ++i)
    key.bits.set(i, row.get(window.column_offset + i));
  key.window = window;
  key.source_row = source_row;
  return key;
}

namespace detail {

// regularized upper incomplete gamma Q(a, x), series + continued fraction
inline double igamc(double a, double x) {
  if (x <= 0.0 || a <= 0.0) return 1.0;
  double lgamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    // P(a,x) by series, return 1 - P
    double sum = 1.0 / a, term = sum;
    for (int n = 1; n < 500; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - lgamma_a);
  }
  // Lentz continued fraction for Q
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - lgamma_a) * h;
}

}  // namespace detail

// Frequency (monobit) test.
inline double monobit_test(const BitVector& bits) {
  if (bits.size() < 100) throw std::invalid_argument("monobit_test: need >= 100 bits");
  double n = static_cast<double>(bits.size());
  double s = 2.0 * static_cast<double>(bits.popcount()) - n;
  return std::erfc(std::fabs(s) / std::sqrt(2.0 * n));
}

// Runs test; fails outright if the frequency prerequisite is violated.
inline double runs_test(const BitVector& bits) {
  if (bits.size() < 100) throw std::invalid_argument("runs_test: need >= 100 bits");
  double n = static_cast<double>(bits.size());
  double pi = static_cast<double>(bits.popcount()) / n;
  if (std::fabs(pi - 0.5) >= 2.0 / std::sqrt(n)) return 0.0;
  std::size_t runs = 1;
  for (std::size_t i = 1; i < bits.size(); ++i)
    if (bits.get(i) != bits.get(i - 1)) ++runs;
  double expected = 2.0 * n * pi * (1.0 - pi);
  return std::erfc(std::fabs(static_cast<double>(runs) - expected) /
                   (2.0 * std::sqrt(2.0 * n) * pi * (1.0 - pi)));
}

inline double block_frequency_test(const BitVector& bits, std::size_t block = 32) {
  if (block < 1 || bits.size() < block)
    throw std::invalid_argument("block_frequency_test: input shorter than block");
  std::size_t n_blocks = bits.size() / block;
  double chi2 = 0.0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < block; ++i) ones += bits.get(b * block + i);
    double pi = static_cast<double>(ones) / static_cast<double>(block);
    chi2 += (pi - 0.5) * (pi - 0.5);
  }
  chi2 *= 4.0 * static_cast<double>(block);
  return detail::igamc(static_cast<double>(n_blocks) / 2.0, chi2 / 2.0);
}

// Empirical binary Shannon entropy in bits per bit.
inline double shannon_entropy(const BitVector& bits) {
  if (bits.empty()) throw std::invalid_argument("shannon_entropy: empty input");
  double f = static_cast<double>(bits.popcount()) / static_cast<double>(bits.size());
  if (f <= 0.0 || f >= 1.0) return 0.0;
  return -f * std::log2(f) - (1.0 - f) * std::log2(1.0 - f);
}

inline constexpr double kRandomnessAlpha = 0.01;

inline nlohmann::json randomness_report(const BitVector& bits) {
  nlohmann::json tests = nlohmann::json::array();
  auto add = [&](const std::string& name, double p) {
    tests.push_back({{"test", name}, {"p_value", p}, {"pass", p >= kRandomnessAlpha}, {"alpha", kRandomnessAlpha}});
  };
  add("monobit", monobit_test(bits));
  add("runs", runs_test(bits));
  add("block_frequency", block_frequency_test(bits));
  tests.push_back({{"test", "shannon_entropy"}, {"bits_per_bit", shannon_entropy(bits)}});
  return tests;
}

}  // namespace eimtrng
