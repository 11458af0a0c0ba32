#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eimtrng/bits.hpp"
#include "eimtrng/config.hpp"
#include "eimtrng/errors.hpp"
#include "eimtrng/rng.hpp"

namespace eimtrng {

inline constexpr double kReferenceTempC = 45.0;

enum class FlipDirection : std::uint8_t { OneToZero, ZeroToOne };

// Per-cell physical vulnerability. threshold_hc is the activation count that
// drives the cell to the metastable midpoint; steepness controls how sharply
// the flip probability saturates around it.
struct CellParams {
  double threshold_hc = 0;
  double steepness = 0;
  FlipDirection flip_direction = FlipDirection::OneToZero;
  double temp_sensitivity = 0;

  void validate() const {
    if (!(threshold_hc > 0)) throw ConfigError("CellParams: threshold_hc must be > 0");
    if (!(steepness > 0)) throw ConfigError("CellParams: steepness must be > 0");
    if (!(temp_sensitivity >= 0)) throw ConfigError("CellParams: temp_sensitivity must be >= 0");
  }

  // Solve threshold_hc so p(hc) == target at the given steepness.
  static CellParams with_probability_at(double target_p, std::uint64_t hc, double steepness,
                                        FlipDirection dir = FlipDirection::OneToZero) {
    if (!(target_p > 0.0 && target_p < 1.0))
      throw std::invalid_argument("with_probability_at: p must be in (0,1)");
    double logit = std::log(target_p / (1.0 - target_p));
    return CellParams{static_cast<double>(hc) - steepness * logit, steepness, dir, 0.0};
  }
};

// Logistic flip law with a clipped linear temperature multiplier.
// p(0) = 0 exactly: zero activations cause zero disturbance.
inline double flip_probability(const CellParams& cell, std::uint64_t hc, double temperature_c) {
  if (hc == 0) return 0.0;
  double z = (static_cast<double>(hc) - cell.threshold_hc) / cell.steepness;
  double base = 1.0 / (1.0 + std::exp(-z));
  if (base <= 0.0) return 0.0;
  double tf = 1.0 + cell.temp_sensitivity * (temperature_c - kReferenceTempC) / kReferenceTempC;
  tf = std::clamp(tf, 0.0, 1.0 / base);
  return std::clamp(base * tf, 0.0, 1.0);
}

struct ProcessConfig {
  double vulnerable_fraction = 1e-4;
  double threshold_median = 600000.0;
  double threshold_sigma = 0.5;
  double steepness_median = 50000.0;
  double steepness_sigma = 0.6;
  double direction_bias = 0.5;  // probability a vulnerable cell is OneToZero
  double temp_sensitivity = 0.0;
  double temperature_celsius = kReferenceTempC;

  void validate() const {
    if (!(vulnerable_fraction >= 0.0 && vulnerable_fraction <= 1.0))
      throw ConfigError("vulnerable_fraction must be in [0,1]");
    if (!(threshold_median > 0) || !(threshold_sigma > 0))
      throw ConfigError("threshold distribution parameters must be positive");
    if (!(steepness_median > 0) || !(steepness_sigma > 0))
      throw ConfigError("steepness distribution parameters must be positive");
    if (!(direction_bias >= 0.0 && direction_bias <= 1.0))
      throw ConfigError("direction_bias must be in [0,1]");
    if (!(temp_sensitivity >= 0.0)) throw ConfigError("temp_sensitivity must be >= 0");
  }

  static ProcessConfig from_kv(const KeyValueFile& kv) {
    ProcessConfig c;
    c.vulnerable_fraction = kv.get_double("vulnerable_fraction", c.vulnerable_fraction);
    c.threshold_median = kv.get_double("threshold_median", c.threshold_median);
    c.threshold_sigma = kv.get_double("threshold_sigma", c.threshold_sigma);
    c.steepness_median = kv.get_double("steepness_median", c.steepness_median);
    c.steepness_sigma = kv.get_double("steepness_sigma", c.steepness_sigma);
    c.direction_bias = kv.get_double("direction_bias", c.direction_bias);
    c.temp_sensitivity = kv.get_double("temp_sensitivity", c.temp_sensitivity);
    c.temperature_celsius = kv.get_double("temperature_celsius", c.temperature_celsius);
    c.validate();
    return c;
  }
};

struct TimingParams {
  double t_ck_ns = 0.833;     // 2400 MT/s clock
  std::uint32_t t_ras = 39;   // cycles, ACT -> PRE minimum
  std::uint32_t t_rp = 17;    // cycles, PRE -> ACT minimum
  std::uint64_t t_refw = 76800000;  // cycles, refresh window (64 ms)
  bool auto_refresh = false;  // refresh disabled by default

  void validate() const {
    if (!(t_ck_ns > 0)) throw ConfigError("t_ck must be positive");
    if (t_ras < 1) throw ConfigError("t_ras must be >= 1");
    if (t_rp < 1) throw ConfigError("t_rp must be >= 1");
    if (t_refw < 1) throw ConfigError("t_refw must be >= 1");
  }
};

struct FlipEvent {
  std::uint32_t row;
  std::uint32_t col;
  bool old_bit;
  bool new_bit;
  friend bool operator==(const FlipEvent&, const FlipEvent&) = default;
};

// Named row-fill patterns of the trace DSL.
inline BitVector make_pattern(const std::string& name, std::uint32_t row, std::size_t cols) {
  BitVector v(cols);
  if (name == "ALL0") return v;
  if (name == "ALL1") {
    v.fill(true);
    return v;
  }
  if (name == "CHECKER") {
    for (std::size_t c = 0; c < cols; ++c) v.set(c, ((c + row) & 1) != 0);
    return v;
  }
  if (name == "ROWSTRIPE") {
    if (row & 1) v.fill(true);
    return v;
  }
  // hexstring: bytes repeated across the row, low nibble first
  if (!name.empty() && name.find_first_not_of("0123456789abcdefABCDEF") == std::string::npos) {
    std::vector<std::uint8_t> bytes;
    std::string h = name;
    if (h.size() & 1) h = "0" + h;
    for (std::size_t i = 0; i < h.size(); i += 2)
      bytes.push_back(static_cast<std::uint8_t>(std::stoul(h.substr(i, 2), nullptr, 16)));
    for (std::size_t c = 0; c < cols; ++c) {
      std::uint8_t byte = bytes[(c / 8) % bytes.size()];
      v.set(c, (byte >> (c & 7)) & 1);
    }
    return v;
  }
  throw ConfigError("unknown data pattern: " + name);
}

// 2-D bit array with a sparse map of vulnerable cells and per-row accumulated
// hammer counts. Single-writer; independent arrays are thread-safe.
class DramArray {
 public:
  DramArray(std::uint32_t rows, std::size_t cols, TimingParams timing = {},
            double temperature_c = kReferenceTempC)
      : rows_(rows), cols_(cols), timing_(timing), temperature_(temperature_c) {
    if (rows == 0 || cols == 0) throw ConfigError("DramArray: dims must be positive");
    timing_.validate();
    data_.assign(rows, BitVector(cols));
    vulnerable_.assign(rows, {});
    accumulated_hc_.assign(rows, 0);
  }

  std::uint32_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const TimingParams& timing() const { return timing_; }
  double temperature() const { return temperature_; }

  const BitVector& row_bits(std::uint32_t r) const {
    check_row(r);
    return data_[r];
  }

  std::uint64_t accumulated_hc(std::uint32_t r) const {
    check_row(r);
    return accumulated_hc_[r];
  }

  const std::vector<std::pair<std::uint32_t, CellParams>>& vulnerable_cells(std::uint32_t r) const {
    check_row(r);
    return vulnerable_[r];
  }

  std::size_t vulnerable_count() const {
    std::size_t n = 0;
    for (const auto& v : vulnerable_) n += v.size();
    return n;
  }

  void add_vulnerable(std::uint32_t r, std::uint32_t c, const CellParams& p) {
    check_row(r);
    if (c >= cols_) throw std::out_of_range("DramArray: column out of range");
    p.validate();
    auto& cells = vulnerable_[r];
    auto it = std::lower_bound(cells.begin(), cells.end(), c,
                               [](const auto& a, std::uint32_t col) { return a.first < col; });
    if (it != cells.end() && it->first == c)
      it->second = p;
    else
      cells.insert(it, {c, p});
  }

  // WR semantics: stores the row and resets its accumulated hammer count.
  void write_row(std::uint32_t r, const BitVector& bits) {
    check_row(r);
    if (bits.size() != cols_) throw ConfigError("write_row: width mismatch");
    data_[r] = bits;
    accumulated_hc_[r] = 0;
  }

  void write_row(std::uint32_t r, const std::string& pattern) {
    write_row(r, make_pattern(pattern, r, cols_));
  }

  // One ACT of `row` disturbs both physically adjacent rows.
  void activate(std::uint32_t row, std::uint64_t times = 1) {
    check_row(row);
    if (row > 0) accumulated_hc_[row - 1] += times;
    if (row + 1 < rows_) accumulated_hc_[row + 1] += times;
  }

  void refresh_all() {
    for (auto& hc : accumulated_hc_) hc = 0;
  }

  // Sense the victim row: every vulnerable cell still holding the charged
  // state for its flip direction draws a Bernoulli at the accrued HC. Sensing
  // restores the charge, so the row's accumulated HC resets afterwards.
  std::vector<FlipEvent> resolve_victim(std::uint32_t victim_row, Rng& rng) {
    check_row(victim_row);
    std::vector<FlipEvent> events;
    std::uint64_t hc = accumulated_hc_[victim_row];
    for (const auto& [col, cell] : vulnerable_[victim_row]) {
      bool bit = data_[victim_row].get(col);
      bool source = cell.flip_direction == FlipDirection::OneToZero;
      if (bit != source) continue;  // already at the leaked value
      double p = flip_probability(cell, hc, temperature_);
      if (p > 0.0 && rng.bernoulli(p)) {
        data_[victim_row].flip(col);
        events.push_back({victim_row, col, bit, !bit});
      }
    }
    accumulated_hc_[victim_row] = 0;
    return events;
  }

 private:
  void check_row(std::uint32_t r) const {
    if (r >= rows_) throw std::out_of_range("DramArray: row out of range");
  }

  std::uint32_t rows_;
  std::size_t cols_;
  TimingParams timing_;
  double temperature_;
  std::vector<BitVector> data_;
  std::vector<std::vector<std::pair<std::uint32_t, CellParams>>> vulnerable_;
  std::vector<std::uint64_t> accumulated_hc_;
};

// Instantiate process variation: each cell is vulnerable with probability
// vulnerable_fraction, with log-normal (tau, s) draws. Deterministic per seed.
inline DramArray sample_array(const ProcessConfig& config, std::uint32_t rows, std::size_t cols,
                              std::uint64_t seed, TimingParams timing = {}) {
  config.validate();
  DramArray array(rows, cols, timing, config.temperature_celsius);
  Rng rng(derive_seed(seed, 0x5a3d7e1f));
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!rng.bernoulli(config.vulnerable_fraction)) continue;
      CellParams cell;
      cell.threshold_hc = rng.next_lognormal(config.threshold_median, config.threshold_sigma);
      cell.steepness = rng.next_lognormal(config.steepness_median, config.steepness_sigma);
      cell.flip_direction = rng.bernoulli(config.direction_bias) ? FlipDirection::OneToZero
                                                                 : FlipDirection::ZeroToOne;
      cell.temp_sensitivity = config.temp_sensitivity;
      array.add_vulnerable(r, static_cast<std::uint32_t>(c), cell);
    }
  }
  return array;
}

}  // namespace eimtrng
