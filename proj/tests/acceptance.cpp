// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and seeded for reproducibility.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "eimtrng/characterize.hpp"
#include "eimtrng/dnn.hpp"
#include "eimtrng/dram_model.hpp"
#include "eimtrng/entropy.hpp"
#include "eimtrng/pagecrypt.hpp"
#include "eimtrng/rng.hpp"

using namespace eimtrng;

namespace {

// --- criterion 1: flip-probability estimator fidelity -----------------------

bool criterion_estimator() {
  const double ps[7] = {0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95};
  CampaignConfig cfg;
  cfg.hammer_count = 1000000;
  cfg.master_seed = 0xacc112;
  DramArray array(5, 256);
  std::vector<double> want(20);
  for (std::uint32_t i = 0; i < 20; ++i) {
    want[i] = ps[i % 7];
    array.add_vulnerable(2, i, CellParams::with_probability_at(want[i], 2 * cfg.hammer_count, 20000));
  }
  ProbabilityReport report = run_probability_analysis(cfg, array);
  double n = static_cast<double>(cfg.sets) * cfg.iterations_per_set;
  for (std::uint32_t i = 0; i < 20; ++i) {
    auto it = report.probability.find(i);
    if (it == report.probability.end()) return false;
    double band = 3.0 * std::sqrt(want[i] * (1.0 - want[i]) / n);
    if (std::fabs(it->second - want[i]) > band) return false;
  }
  return true;
}

// --- criterion 2: probability-spectrum classification -----------------------

bool criterion_spectrum() {
  CampaignConfig cfg;
  cfg.hammer_count = 500000;  // victim accrues 1M activations
  cfg.master_seed = 0xacc102;
  std::uint64_t victim_hc = 2 * cfg.hammer_count;
  DramArray array(5, 256);

  // ground truth: cols 0-2 near-certain, 3-4 low, 5-14 mid-range
  for (std::uint32_t i = 0; i < 3; ++i)
    array.add_vulnerable(2, i, CellParams::with_probability_at(1.0 - 1e-12, victim_hc, 20000));
  array.add_vulnerable(2, 3, CellParams::with_probability_at(0.05, victim_hc, 20000));
  array.add_vulnerable(2, 4, CellParams::with_probability_at(0.08, victim_hc, 20000));
  for (std::uint32_t i = 0; i < 10; ++i)
    array.add_vulnerable(2, 5 + i,
                         CellParams::with_probability_at(0.25 + 0.05 * i, victim_hc, 20000));

  ProbabilityReport report = run_probability_analysis(cfg, array);
  auto classes = classify_cells(report);
  auto estimate = [&](std::uint32_t col) {
    double total = 0;
    for (const auto& counts : report.set_counts) {
      auto it = counts.find(col);
      if (it != counts.end()) total += it->second;
    }
    return total / cfg.sets / cfg.iterations_per_set;
  };
  auto cls = [&](std::uint32_t col) {
    auto it = classes.find(col);
    return it == classes.end() ? CellClass::Stable : it->second;
  };
  for (std::uint32_t i = 0; i < 3; ++i) {  // near-certain group
    bool fixed = cls(i) == CellClass::Fixed;
    bool near1 = cls(i) == CellClass::Unpredictable && estimate(i) >= 0.99;
    if (!fixed && !near1) return false;
  }
  for (std::uint32_t i = 3; i < 5; ++i)  // low group
    if (cls(i) != CellClass::Unpredictable || estimate(i) >= 0.15) return false;
  for (std::uint32_t i = 5; i < 15; ++i) {  // mid group
    if (cls(i) != CellClass::Unpredictable) return false;
    double p = estimate(i);
    if (p < 0.15 || p > 0.85) return false;
  }
  return true;
}

// --- criterion 3: hammer-count sweep curve families -------------------------

bool criterion_sweep_curves() {
  CampaignConfig cfg;
  cfg.start_hc = 100000;
  cfg.end_hc = 2000000;
  cfg.step = 100000;
  cfg.master_seed = 0xacc103;
  DramArray array(5, 256);
  const double thresholds[3] = {300000, 1000000, 1800000};
  for (std::uint32_t i = 0; i < 3; ++i)
    array.add_vulnerable(2, i, CellParams{thresholds[i], 10000, FlipDirection::OneToZero, 0});

  SweepReport report = run_hc_sweep(cfg, array);
  for (std::uint32_t i = 0; i < 3; ++i) {
    auto it = report.curves.find(i);
    if (it == report.curves.end()) return false;
    const auto& curve = it->second;
    if (curve.size() != report.hc_points.size()) return false;
    for (std::size_t k = 1; k < curve.size(); ++k)
      if (curve[k] < curve[k - 1]) return false;
  }
  // the lowest-threshold cell saturates by the 1M point
  for (std::size_t k = 0; k < report.hc_points.size(); ++k)
    if (report.hc_points[k] == 1000000 && report.curves.at(0)[k] < 990) return false;
  return true;
}

// --- criterion 4: window selection vs exhaustive scan -----------------------

bool criterion_window_oracle() {
  Rng rng(0xacc104);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<CellClass> classes(4096, CellClass::Stable);
    for (auto& c : classes) {
      double u = rng.next_double();
      c = u < 0.10   ? CellClass::Unpredictable
          : u < 0.15 ? CellClass::Fixed
          : u < 0.20 ? CellClass::Inconsistent
                     : CellClass::Stable;
    }
    KeyWindow got = select_key_window(classes);
    std::uint32_t best = 0;
    for (std::uint32_t off = 0; off + kKeyBits <= classes.size(); ++off) {
      std::uint32_t d = 0;
      for (std::uint32_t i = 0; i < kKeyBits; ++i)
        d += classes[off + i] == CellClass::Unpredictable;
      best = std::max(best, d);
    }
    if (got.unpredictable_density != best) return false;
  }
  return true;
}

// --- criterion 5: encode/decode round trip ----------------------------------

bool criterion_roundtrip() {
  constexpr std::size_t kBits = 2048;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(derive_seed(0xacc105, trial));
    DramArray array(3, kBits);
    std::uint64_t hc = 100000 + rng.next_below(900000);
    std::uint32_t n_cells = 8 + static_cast<std::uint32_t>(rng.next_below(48));
    for (std::uint32_t i = 0; i < n_cells; ++i) {
      std::uint32_t col = static_cast<std::uint32_t>(rng.next_below(kBits));
      double p = 0.05 + 0.9 * rng.next_double();
      auto dir = rng.bernoulli(0.5) ? FlipDirection::OneToZero : FlipDirection::ZeroToOne;
      array.add_vulnerable(1, col, CellParams::with_probability_at(p, 2 * hc, 5000, dir));
    }
    WeightPage page;
    page.bits = BitVector(kBits);
    page.page_id = static_cast<std::uint32_t>(trial);
    for (std::size_t i = 0; i < kBits; ++i) page.bits.set(i, rng.bernoulli(0.5));

    Rng enc_rng(derive_seed(0xacc105, trial, 1));
    auto [encrypted, record] = encode_page(page, array, 1, hc, enc_rng);
    if (decode_page(encrypted, record) != page) return false;
  }
  return true;
}

// --- criterion 6: key uniqueness and monobit quality ------------------------

bool criterion_key_uniqueness() {
  constexpr std::size_t kBits = 2048;
  std::uint64_t hc = 500000;
  DramArray array(3, kBits);
  Rng setup(0xacc106);
  WeightPage page;
  page.bits = BitVector(kBits);
  for (std::size_t i = 0; i < kBits; ++i) page.bits.set(i, setup.bernoulli(0.5));
  // a window's worth of half-probability cells, flippable regardless of the
  // stored bit
  for (std::uint32_t i = 0; i < kKeyBits; ++i) {
    auto dir = page.bits.get(i) ? FlipDirection::OneToZero : FlipDirection::ZeroToOne;
    array.add_vulnerable(1, i, CellParams::with_probability_at(0.5, 2 * hc, 20000, dir));
  }

  std::vector<BitVector> keys;
  int monobit_pass = 0;
  for (int run = 0; run < 20; ++run) {
    Rng rng(derive_seed(0xacc106, run));
    auto [encrypted, record] = encode_page(page, array, 1, hc, rng);
    if (record.key_material.window.unpredictable_density < 64) return false;
    keys.push_back(record.key_material.bits);
    if (monobit_test(record.key_material.bits) >= 0.01) ++monobit_pass;
  }
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t j = i + 1; j < keys.size(); ++j)
      if (keys[i] == keys[j]) return false;
  return monobit_pass >= 18;
}

// --- shared DNN fixtures ----------------------------------------------------

const ToyDataset& dnn_dataset() {
  static ToyDataset ds = make_toy_dataset(7);
  return ds;
}

const MlpModel& dnn_model() {
  static MlpModel model = train_toy(7, dnn_dataset());
  return model;
}

KeyMaterial random_key(std::uint64_t seed) {
  KeyMaterial key;
  key.bits = BitVector(kKeyBits);
  Rng rng(derive_seed(0xacc1d4, seed));
  for (std::size_t i = 0; i < kKeyBits; ++i) key.bits.set(i, rng.bernoulli(0.5));
  return key;
}

// --- criterion 7: accuracy collapse under page swaps ------------------------

bool criterion_collapse() {
  const ToyDataset& ds = dnn_dataset();
  const MlpModel& model = dnn_model();
  if (evaluate_accuracy(model, ds.test_x, ds.test_y) < 0.90) return false;

  std::size_t pages = serialize_to_pages(model).size();
  std::vector<std::vector<double>> curves;
  double full_sum = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    CollapseScan scan = min_swaps_to_collapse(model, random_key(s), ds);
    full_sum += scan.accuracy_by_n[pages];
    curves.push_back(scan.accuracy_by_n);
  }
  double full_mean = full_sum / 10.0;
  if (full_mean < 0.05 || full_mean > 0.15) return false;

  // median accuracy vs swap count, non-increasing within a noise band
  for (std::size_t n = 1; n <= pages; ++n) {
    auto median_at = [&](std::size_t k) {
      std::vector<double> v;
      for (const auto& c : curves) v.push_back(c[k]);
      std::sort(v.begin(), v.end());
      return (v[4] + v[5]) / 2.0;
    };
    if (median_at(n) > median_at(n - 1) + 0.05) return false;
  }
  return true;
}

// --- criterion 8: finetune recovery parity ----------------------------------

bool criterion_finetune_parity() {
  const ToyDataset& ds = dnn_dataset();
  const MlpModel& model = dnn_model();
  std::size_t pages = serialize_to_pages(model).size();

  double obf_sum = 0, fresh_sum = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    MlpModel obf = obfuscate_by_swaps(model, pages, random_key(s));
    obf_sum += finetune_recovery(obf, ds, 0.01, kFinetuneEpochs, derive_seed(0xacc108, s));
    MlpModel fresh = MlpModel::init(derive_seed(0xacc108, s, 1), model.dims);
    fresh_sum += finetune_recovery(fresh, ds, 0.01, kFinetuneEpochs, derive_seed(0xacc108, s));
  }
  return std::fabs(obf_sum / 10.0 - fresh_sum / 10.0) <= 0.10;
}

// --- criterion 9: worker count never changes reports ------------------------

bool criterion_parallel_determinism() {
  DramArray array(5, 512);
  Rng rng(0xacc109);
  for (std::uint32_t i = 0; i < 40; ++i)
    array.add_vulnerable(2, static_cast<std::uint32_t>(rng.next_below(512)),
                         CellParams::with_probability_at(0.05 + 0.9 * rng.next_double(), 500000, 20000));

  CampaignConfig cfg;
  cfg.hammer_count = 250000;
  cfg.sets = 4;
  cfg.iterations_per_set = 200;
  cfg.start_hc = 100000;
  cfg.end_hc = 500000;
  cfg.step = 100000;
  cfg.master_seed = 0xacc109;

  CampaignConfig serial = cfg, parallel = cfg;
  serial.workers = 1;
  parallel.workers = 8;
  if (to_json(run_probability_analysis(serial, array)).dump() !=
      to_json(run_probability_analysis(parallel, array)).dump())
    return false;
  return to_json(run_hc_sweep(serial, array)).dump() ==
         to_json(run_hc_sweep(parallel, array)).dump();
}

// --- criterion 10: analytic gradients vs central differences ----------------

bool criterion_gradients() {
  const ToyDataset& ds = dnn_dataset();
  MlpModel model = MlpModel::init(0xacc110, {32, 64, 64, 10});
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 40; ++i) idx.push_back(i * 7 % ds.train_x.size());

  detail::Gradients grads;
  detail::loss_and_gradients(model, ds.train_x, ds.train_y, idx, &grads);

  Rng rng(0xacc110);
  for (int k = 0; k < 100; ++k) {
    std::size_t l = rng.next_below(model.layer_count());
    std::size_t i = rng.next_below(model.weights[l].size());
    float saved = model.weights[l][i];
    double h = 1e-3 * std::max(0.01, std::fabs(static_cast<double>(saved)));
    model.weights[l][i] = static_cast<float>(saved + h);
    double up = mlp_loss(model, ds.train_x, ds.train_y, idx);
    model.weights[l][i] = static_cast<float>(saved - h);
    double down = mlp_loss(model, ds.train_x, ds.train_y, idx);
    model.weights[l][i] = saved;

    double numeric = (up - down) / (2.0 * h);
    double analytic = grads.weights[l][i];
    double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
    if (std::fabs(numeric - analytic) / denom > 1e-4) {
      // skip coordinates whose perturbation crosses a ReLU kink
      if (std::fabs(numeric) < 1e-10 && std::fabs(analytic) < 1e-10) continue;
      return false;
    }
  }
  return true;
}

struct Criterion {
  const char* name;
  bool (*fn)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"1 estimator fidelity (20 injected cells within 3-sigma)", criterion_estimator},
      {"2 probability spectrum classification partition", criterion_spectrum},
      {"3 sweep curves monotone, early threshold saturates", criterion_sweep_curves},
      {"4 window selection matches exhaustive scan (500 maps)", criterion_window_oracle},
      {"5 encode/decode round trip (1000 random triples)", criterion_roundtrip},
      {"6 key uniqueness and monobit quality (20 runs)", criterion_key_uniqueness},
      {"7 accuracy collapse under full page swaps", criterion_collapse},
      {"8 finetune recovery parity with random init", criterion_finetune_parity},
      {"9 identical reports for 1 vs 8 workers", criterion_parallel_determinism},
      {"10 analytic gradients vs central differences", criterion_gradients},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion %s (exception: %s)\n", c.name, e.what());
      ++failures;
      continue;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %s [%.1fs]\n", ok ? "PASS" : "FAIL", c.name, secs);
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}
