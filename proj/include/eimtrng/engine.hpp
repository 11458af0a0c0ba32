#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eimtrng/dram_model.hpp"
#include "eimtrng/errors.hpp"
#include "eimtrng/trace.hpp"

namespace eimtrng {

struct TimingViolation {
  std::uint64_t cycle;
  std::size_t line;
  std::string what;
};

struct ExecutionLog {
  std::uint64_t cycles = 0;
  std::map<std::uint32_t, std::uint64_t> act_counts;   // per-row ACT totals
  std::map<std::uint32_t, BitVector> reads;            // last RD result per row
  std::vector<TimingViolation> violations;

  std::uint64_t total_acts() const {
    std::uint64_t n = 0;
    for (const auto& [row, c] : act_counts) n += c;
    return n;
  }
};

// Executes a trace against an array. Commands advance the cycle counter by
// their full timing footprint: ACT holds the row open for tRAS, PRE closes it
// over tRP, RD/WR are row-buffered accesses costing tRAS + tRP on an idle
// bank. Strict mode turns violations (a second ACT with a row still open,
// RD/WR with a foreign row open) into errors; lax mode logs and proceeds.
class CommandEngine {
 public:
  CommandEngine(DramArray& array, Rng& rng, bool strict_timing)
      : array_(array), rng_(rng), strict_(strict_timing) {}

  ExecutionLog run(const Trace& trace) {
    exec_block(trace);
    return std::move(log_);
  }

 private:
  void exec_block(const Trace& trace) {
    for (const auto& cmd : trace) exec(cmd);
  }

  void exec(const Command& cmd) {
    const TimingParams& t = array_.timing();
    switch (cmd.kind) {
      case Command::Kind::Act: {
        check_row_arg(cmd);
        if (open_row_)
          violate(cmd, "ACT " + std::to_string(cmd.arg) + " issued with row " +
                           std::to_string(*open_row_) + " still open (PRE required)");
        if (log_.cycles < ready_cycle_)
          violate(cmd, "ACT issued before tRP elapsed since PRE");
        open_row_ = static_cast<std::uint32_t>(cmd.arg);
        act_cycle_ = log_.cycles;
        array_.activate(*open_row_);
        ++log_.act_counts[*open_row_];
        advance(t.t_ras);
        break;
      }
      case Command::Kind::Pre: {
        if (open_row_ && log_.cycles < act_cycle_ + t.t_ras)
          violate(cmd, "PRE issued before tRAS elapsed since ACT");
        open_row_.reset();
        advance(t.t_rp);
        ready_cycle_ = log_.cycles;
        break;
      }
      case Command::Kind::Write: {
        check_row_arg(cmd);
        require_idle(cmd, "WR");
        array_.write_row(static_cast<std::uint32_t>(cmd.arg), cmd.pattern);
        advance(static_cast<std::uint64_t>(t.t_ras) + t.t_rp);
        break;
      }
      case Command::Kind::Read: {
        check_row_arg(cmd);
        require_idle(cmd, "RD");
        auto row = static_cast<std::uint32_t>(cmd.arg);
        array_.resolve_victim(row, rng_);
        log_.reads[row] = array_.row_bits(row);
        advance(static_cast<std::uint64_t>(t.t_ras) + t.t_rp);
        break;
      }
      case Command::Kind::Nop:
        advance(cmd.arg);
        break;
      case Command::Kind::Repeat:
        // lazy expansion keeps memory bounded for million-iteration loops
        for (std::uint64_t i = 0; i < cmd.arg; ++i) exec_block(cmd.body);
        break;
    }
  }

  void require_idle(const Command& cmd, const char* op) {
    if (open_row_ && *open_row_ != cmd.arg)
      violate(cmd, std::string(op) + " " + std::to_string(cmd.arg) + " issued with row " +
                       std::to_string(*open_row_) + " open");
    open_row_.reset();
  }

  void check_row_arg(const Command& cmd) {
    if (cmd.arg >= array_.rows())
      throw std::out_of_range("trace line " + std::to_string(cmd.line) + ": row " +
                              std::to_string(cmd.arg) + " out of bounds");
  }

  void violate(const Command& cmd, const std::string& what) {
    if (strict_) throw TimingViolationError(log_.cycles, what);
    log_.violations.push_back({log_.cycles, cmd.line, what});
  }

  void advance(std::uint64_t cycles) {
    const TimingParams& t = array_.timing();
    if (t.auto_refresh) {
      std::uint64_t before = log_.cycles / t.t_refw;
      std::uint64_t after = (log_.cycles + cycles) / t.t_refw;
      if (after > before) array_.refresh_all();
    }
    log_.cycles += cycles;
  }

  DramArray& array_;
  Rng& rng_;
  bool strict_;
  ExecutionLog log_;
  std::optional<std::uint32_t> open_row_;
  std::uint64_t act_cycle_ = 0;
  std::uint64_t ready_cycle_ = 0;
};

inline ExecutionLog execute(const Trace& trace, DramArray& array, Rng& rng, bool strict_timing) {
  return CommandEngine(array, rng, strict_timing).run(trace);
}

// Double-sided hammer loop of the characterization procedures: hc iterations
// of ACT agg1 / PRE / ACT agg2 / PRE. Equivalent to executing that trace but
// O(1) in hc via bulk disturbance accounting.
inline void hammer(DramArray& array, std::uint32_t agg1, std::uint32_t agg2, std::uint64_t hc) {
  if (agg1 >= array.rows() || agg2 >= array.rows())
    throw std::out_of_range("hammer: aggressor row out of bounds");
  array.activate(agg1, hc);
  array.activate(agg2, hc);
}

inline Trace hammer_trace(std::uint32_t agg1, std::uint32_t agg2, std::uint64_t hc) {
  Command body_act1{Command::Kind::Act, agg1, {}, {}, 0};
  Command pre{Command::Kind::Pre, 0, {}, {}, 0};
  Command body_act2{Command::Kind::Act, agg2, {}, {}, 0};
  Command repeat{Command::Kind::Repeat, hc, {}, {body_act1, pre, body_act2, pre}, 0};
  return {repeat};
}

}  // namespace eimtrng
