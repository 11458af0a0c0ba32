#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eimtrng {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, std::size_t col, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ", col " +
                           std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  std::size_t line;
  std::size_t col;
};

struct TimingViolationError : std::runtime_error {
  TimingViolationError(std::uint64_t cycle, const std::string& msg)
      : std::runtime_error("cycle " + std::to_string(cycle) + ": " + msg),
        cycle(cycle) {}
  std::uint64_t cycle;
};

}  // namespace eimtrng
