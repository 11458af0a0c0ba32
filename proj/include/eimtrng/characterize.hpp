#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eimtrng/dram_model.hpp"
#include "eimtrng/engine.hpp"
#include "eimtrng/rng.hpp"

namespace eimtrng {

struct CampaignConfig {
  std::uint32_t victim_row = 2;
  std::uint32_t aggressor1 = 1;
  std::uint32_t aggressor2 = 3;
  std::uint64_t hammer_count = 1000000;  // probability analysis
  std::uint64_t start_hc = 100000;       // HC sweep
  std::uint64_t end_hc = 2000000;
  std::uint64_t step = 1000;
  std::uint32_t sets = 10;
  std::uint32_t iterations_per_set = 1000;
  std::string victim_pattern = "ALL1";
  std::string aggressor_pattern = "ALL0";
  std::uint64_t master_seed = 0;
  std::uint32_t workers = 1;

  void validate() const {
    if (iterations_per_set < 1) throw ConfigError("iterations_per_set must be >= 1");
    if (sets < 1) throw ConfigError("sets must be >= 1");
    if (start_hc > end_hc) throw ConfigError("start_hc must be <= end_hc");
    if (step < 1) throw ConfigError("step must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

struct ProbabilityReport {
  CampaignConfig config;
  // per-set flip counts, col -> count, only flipped columns present
  std::vector<std::map<std::uint32_t, std::uint32_t>> set_counts;
  // cols with 0 < count < iterations, per set
  std::vector<std::vector<std::uint32_t>> vulnerable_sets;
  std::vector<std::uint32_t> consistent_vulnerable_cells;  // intersection
  std::map<std::uint32_t, double> probability;             // consistent cells only
};

struct SweepReport {
  CampaignConfig config;
  std::vector<std::uint64_t> hc_points;
  std::vector<std::map<std::uint32_t, std::uint32_t>> counts;  // parallel to hc_points
  std::vector<std::vector<std::uint32_t>> vulnerable_sets;
  std::vector<std::uint32_t> consistent_vulnerable_cells;
  // per-cell curve: col -> mean flip count per hc point
  std::map<std::uint32_t, std::vector<std::uint32_t>> curves;
};

enum class CellClass : std::uint8_t { Stable, Fixed, Unpredictable, Inconsistent };

inline const char* to_string(CellClass c) {
  switch (c) {
    case CellClass::Stable: return "Stable";
    case CellClass::Fixed: return "Fixed";
    case CellClass::Unpredictable: return "Unpredictable";
    case CellClass::Inconsistent: return "Inconsistent";
  }
  return "?";
}

namespace detail {

// One independent trial: fresh data, hammer, sense. Returns flipped columns.
inline std::vector<std::uint32_t> run_trial(DramArray& array, const CampaignConfig& cfg,
                                            std::uint64_t hc, std::uint64_t trial_seed) {
  array.write_row(cfg.victim_row, cfg.victim_pattern);
  array.write_row(cfg.aggressor1, cfg.aggressor_pattern);
  array.write_row(cfg.aggressor2, cfg.aggressor_pattern);
  hammer(array, cfg.aggressor1, cfg.aggressor2, hc);
  Rng rng(trial_seed);
  std::vector<std::uint32_t> cols;
  for (const auto& ev : array.resolve_victim(cfg.victim_row, rng)) cols.push_back(ev.col);
  return cols;
}

// Runs `iterations` trials for each (group, hc) job across workers. Results
// are merged by commutative count addition, so worker count never changes
// the report. Trial seeds derive from (master_seed, group, iteration).
struct Job {
  std::uint64_t group;  // set index (probability analysis) or hc point index (sweep)
  std::uint64_t hc;
};

inline std::vector<std::map<std::uint32_t, std::uint32_t>> run_jobs(
    const DramArray& array_template, const CampaignConfig& cfg, const std::vector<Job>& jobs) {
  std::vector<std::map<std::uint32_t, std::uint32_t>> counts(jobs.size());
  std::uint64_t total = static_cast<std::uint64_t>(jobs.size()) * cfg.iterations_per_set;
  std::uint32_t workers = std::min<std::uint32_t>(cfg.workers, std::max<std::uint64_t>(total, 1));

  auto worker_fn = [&](std::uint32_t w, std::vector<std::map<std::uint32_t, std::uint32_t>>& out) {
    DramArray array = array_template;
    for (std::uint64_t t = w; t < total; t += workers) {
      std::uint64_t j = t / cfg.iterations_per_set;
      std::uint64_t i = t % cfg.iterations_per_set;
      std::uint64_t seed = derive_seed(cfg.master_seed, jobs[j].group, i);
      for (std::uint32_t col : run_trial(array, cfg, jobs[j].hc, seed)) ++out[j][col];
    }
  };

  if (workers == 1) {
    worker_fn(0, counts);
  } else {
    std::vector<std::vector<std::map<std::uint32_t, std::uint32_t>>> partial(
        workers, std::vector<std::map<std::uint32_t, std::uint32_t>>(jobs.size()));
    std::vector<std::thread> threads;
    for (std::uint32_t w = 0; w < workers; ++w)
      threads.emplace_back(worker_fn, w, std::ref(partial[w]));
    for (auto& th : threads) th.join();
    for (const auto& part : partial)
      for (std::size_t j = 0; j < jobs.size(); ++j)
        for (const auto& [col, n] : part[j]) counts[j][col] += n;
  }
  return counts;
}

inline std::vector<std::uint32_t> vulnerable_cols(const std::map<std::uint32_t, std::uint32_t>& counts,
                                                  std::uint32_t iterations) {
  std::vector<std::uint32_t> cols;
  for (const auto& [col, n] : counts)
    if (n > 0 && n < iterations) cols.push_back(col);
  return cols;
}

inline std::vector<std::uint32_t> intersect_all(const std::vector<std::vector<std::uint32_t>>& sets) {
  if (sets.empty()) return {};
  std::vector<std::uint32_t> acc = sets[0];
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::vector<std::uint32_t> next;
    std::set_intersection(acc.begin(), acc.end(), sets[i].begin(), sets[i].end(),
                          std::back_inserter(next));
    acc = std::move(next);
  }
  return acc;
}

}  // namespace detail

// Bit-flip probability analysis: sets x iterations independent hammer trials
// at one HC, per-set vulnerable sets, their intersection, and per-cell flip
// probability = mean count / iterations.
inline ProbabilityReport run_probability_analysis(const CampaignConfig& cfg,
                                                  const DramArray& array_template) {
  cfg.validate();
  std::vector<detail::Job> jobs;
  for (std::uint32_t s = 0; s < cfg.sets; ++s) jobs.push_back({s, cfg.hammer_count});

  ProbabilityReport report;
  report.config = cfg;
  report.set_counts = detail::run_jobs(array_template, cfg, jobs);
  for (const auto& counts : report.set_counts)
    report.vulnerable_sets.push_back(detail::vulnerable_cols(counts, cfg.iterations_per_set));
  report.consistent_vulnerable_cells = detail::intersect_all(report.vulnerable_sets);
  for (std::uint32_t col : report.consistent_vulnerable_cells) {
    double total = 0;
    for (const auto& counts : report.set_counts) {
      auto it = counts.find(col);
      if (it != counts.end()) total += it->second;
    }
    report.probability[col] = total / cfg.sets / cfg.iterations_per_set;
  }
  return report;
}

// Bit-flip count analysis across an inclusive HC range.
inline SweepReport run_hc_sweep(const CampaignConfig& cfg, const DramArray& array_template) {
  cfg.validate();
  SweepReport report;
  report.config = cfg;
  std::vector<detail::Job> jobs;
  for (std::uint64_t hc = cfg.start_hc; hc <= cfg.end_hc; hc += cfg.step) {
    report.hc_points.push_back(hc);
    jobs.push_back({static_cast<std::uint64_t>(jobs.size()), hc});
    if (hc > cfg.end_hc - cfg.step) break;  // overflow guard
  }
  report.counts = detail::run_jobs(array_template, cfg, jobs);
  std::set<std::uint32_t> observed;
  for (const auto& counts : report.counts) {
    report.vulnerable_sets.push_back(detail::vulnerable_cols(counts, cfg.iterations_per_set));
    for (const auto& [col, n] : counts) observed.insert(col);
  }
  report.consistent_vulnerable_cells = detail::intersect_all(report.vulnerable_sets);
  for (std::uint32_t col : observed) {
    auto& curve = report.curves[col];
    for (const auto& counts : report.counts) {
      auto it = counts.find(col);
      curve.push_back(it == counts.end() ? 0 : it->second);
    }
  }
  return report;
}

// Fixed: all sets at the iteration bound. Stable: zero everywhere.
// Unpredictable: strictly between in every set. Inconsistent: the rest.
inline std::map<std::uint32_t, CellClass> classify_cells(const ProbabilityReport& report) {
  std::set<std::uint32_t> observed;
  for (const auto& counts : report.set_counts)
    for (const auto& [col, n] : counts) observed.insert(col);

  std::map<std::uint32_t, CellClass> classes;
  std::uint32_t iters = report.config.iterations_per_set;
  for (std::uint32_t col : observed) {
    bool all_zero = true, all_full = true, all_between = true;
    for (const auto& counts : report.set_counts) {
      auto it = counts.find(col);
      std::uint32_t n = it == counts.end() ? 0 : it->second;
      all_zero = all_zero && n == 0;
      all_full = all_full && n == iters;
      all_between = all_between && n > 0 && n < iters;
    }
    classes[col] = all_zero      ? CellClass::Stable
                   : all_full    ? CellClass::Fixed
                   : all_between ? CellClass::Unpredictable
                                 : CellClass::Inconsistent;
  }
  return classes;
}

// Row-wide class vector (unobserved columns are Stable).
inline std::vector<CellClass> class_row(const std::map<std::uint32_t, CellClass>& classes,
                                        std::size_t cols) {
  std::vector<CellClass> row(cols, CellClass::Stable);
  for (const auto& [col, cls] : classes)
    if (col < cols) row[col] = cls;
  return row;
}

// --- serialization ---

inline nlohmann::json campaign_to_json(const CampaignConfig& cfg) {
  return {{"victim_row", cfg.victim_row},
          {"aggressor1", cfg.aggressor1},
          {"aggressor2", cfg.aggressor2},
          {"hammer_count", cfg.hammer_count},
          {"start_hc", cfg.start_hc},
          {"end_hc", cfg.end_hc},
          {"step", cfg.step},
          {"sets", cfg.sets},
          {"iterations_per_set", cfg.iterations_per_set},
          {"victim_pattern", cfg.victim_pattern},
          {"aggressor_pattern", cfg.aggressor_pattern},
          {"master_seed", cfg.master_seed}};
}

inline nlohmann::json to_json(const ProbabilityReport& report) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& counts : report.set_counts) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [col, n] : counts) c[std::to_string(col)] = n;
    sets.push_back({{"counts", c}});
  }
  nlohmann::json prob = nlohmann::json::object();
  for (const auto& [col, p] : report.probability) prob[std::to_string(col)] = p;
  return {{"config", campaign_to_json(report.config)},
          {"sets", sets},
          {"consistent", report.consistent_vulnerable_cells},
          {"probability", prob}};
}

inline nlohmann::json to_json(const SweepReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < report.hc_points.size(); ++i) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [col, n] : report.counts[i]) c[std::to_string(col)] = n;
    points.push_back({{"hc", report.hc_points[i]}, {"counts", c}});
  }
  return {{"config", campaign_to_json(report.config)},
          {"points", points},
          {"consistent", report.consistent_vulnerable_cells}};
}

inline std::string counts_csv(const ProbabilityReport& report) {
  std::ostringstream out;
  out << "col,set,count\n";
  for (std::size_t s = 0; s < report.set_counts.size(); ++s)
    for (const auto& [col, n] : report.set_counts[s]) out << col << "," << s << "," << n << "\n";
  return out.str();
}

inline std::string probability_csv(const ProbabilityReport& report) {
  std::ostringstream out;
  out << "col,probability\n";
  for (const auto& [col, p] : report.probability) out << col << "," << p << "\n";
  return out.str();
}

inline std::string sweep_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "hc,col,count\n";
  for (std::size_t i = 0; i < report.hc_points.size(); ++i)
    for (const auto& [col, n] : report.counts[i])
      out << report.hc_points[i] << "," << col << "," << n << "\n";
  return out.str();
}

}  // namespace eimtrng
