#pragma once

#include <cctype>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eimtrng/errors.hpp"

namespace eimtrng {

// DDR4-style command-trace mini-language.
// Grammar: statements separated by `;` or newline; `ACT <uint>`, `PRE`,
// `WR <uint> <hexstring|pattern-name>`, `RD <uint>`, `NOP <uint>`,
// `REPEAT <uint> { ... }`; `#` comments to end of line.
struct Command {
  enum class Kind : std::uint8_t { Act, Pre, Write, Read, Nop, Repeat };
  Kind kind = Kind::Pre;
  std::uint64_t arg = 0;       // row index, NOP cycles, or REPEAT count
  std::string pattern;         // WR only
  std::vector<Command> body;   // REPEAT only
  std::size_t line = 0;        // source line, for violation reports

  friend bool operator==(const Command& a, const Command& b) {
    return a.kind == b.kind && a.arg == b.arg && a.pattern == b.pattern && a.body == b.body;
  }
};

using Trace = std::vector<Command>;

inline constexpr std::size_t kMaxRepeatDepth = 16;

namespace detail {

struct Token {
  std::string text;
  std::size_t line;
  std::size_t col;
  bool is_separator;  // ';' or newline
};

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> tokens;
  std::size_t line = 1, col = 1;
  std::size_t i = 0;
  while (i < src.size()) {
    char ch = src[i];
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (ch == '\n') {
      tokens.push_back({"\n", line, col, true});
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      ++i;
      ++col;
      continue;
    }
    if (ch == ';' || ch == '{' || ch == '}') {
      tokens.push_back({std::string(1, ch), line, col, ch == ';'});
      ++i;
      ++col;
      continue;
    }
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      std::size_t start = i, start_col = col;
      while (i < src.size() && std::isalnum(static_cast<unsigned char>(src[i]))) {
        ++i;
        ++col;
      }
      tokens.push_back({std::string(src.substr(start, i - start)), line, start_col, false});
      continue;
    }
    throw ParseError(line, col, std::string("unexpected character '") + ch + "'");
  }
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Trace parse_block(std::size_t depth, bool top_level) {
    if (depth > kMaxRepeatDepth)
      throw ParseError(peek_line(), peek_col(), "REPEAT nesting exceeds depth 16");
    Trace trace;
    while (pos_ < tokens_.size()) {
      if (tokens_[pos_].is_separator) {
        ++pos_;
        continue;
      }
      if (tokens_[pos_].text == "}") {
        if (top_level) throw ParseError(tokens_[pos_].line, tokens_[pos_].col, "unbalanced '}'");
        return trace;
      }
      trace.push_back(parse_statement(depth));
    }
    if (!top_level) throw ParseError(peek_line(), peek_col(), "unbalanced REPEAT: missing '}'");
    return trace;
  }

 private:
  Command parse_statement(std::size_t depth) {
    const Token& tok = tokens_[pos_];
    Command cmd;
    cmd.line = tok.line;
    if (tok.text == "ACT") {
      ++pos_;
      cmd.kind = Command::Kind::Act;
      cmd.arg = expect_uint("ACT row");
    } else if (tok.text == "PRE") {
      ++pos_;
      cmd.kind = Command::Kind::Pre;
    } else if (tok.text == "WR") {
      ++pos_;
      cmd.kind = Command::Kind::Write;
      cmd.arg = expect_uint("WR row");
      cmd.pattern = expect_word("WR data pattern");
    } else if (tok.text == "RD") {
      ++pos_;
      cmd.kind = Command::Kind::Read;
      cmd.arg = expect_uint("RD row");
    } else if (tok.text == "NOP") {
      ++pos_;
      cmd.kind = Command::Kind::Nop;
      cmd.arg = expect_uint("NOP cycles");
    } else if (tok.text == "REPEAT") {
      ++pos_;
      cmd.kind = Command::Kind::Repeat;
      cmd.arg = expect_uint("REPEAT count");
      expect_symbol("{");
      cmd.body = parse_block(depth + 1, false);
      expect_symbol("}");
    } else {
      throw ParseError(tok.line, tok.col, "unknown mnemonic \"" + tok.text + "\"");
    }
    return cmd;
  }

  std::uint64_t expect_uint(const std::string& what) {
    const Token& tok = expect_token(what);
    std::uint64_t v = 0;
    for (char c : tok.text) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw ParseError(tok.line, tok.col, "malformed operand for " + what + ": \"" + tok.text + "\"");
      v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
  }

  std::string expect_word(const std::string& what) { return expect_token(what).text; }

  const Token& expect_token(const std::string& what) {
    skip_newlines_only();
    if (pos_ >= tokens_.size() || tokens_[pos_].is_separator || tokens_[pos_].text == "{" ||
        tokens_[pos_].text == "}")
      throw ParseError(peek_line(), peek_col(), "expected " + what);
    return tokens_[pos_++];
  }

  void expect_symbol(const std::string& sym) {
    while (pos_ < tokens_.size() && tokens_[pos_].is_separator) ++pos_;
    if (pos_ >= tokens_.size() || tokens_[pos_].text != sym)
      throw ParseError(peek_line(), peek_col(), "expected '" + sym + "'");
    ++pos_;
  }

  void skip_newlines_only() {}  // operands must stay on the statement line

  std::size_t peek_line() const {
    return pos_ < tokens_.size() ? tokens_[pos_].line : (tokens_.empty() ? 1 : tokens_.back().line);
  }
  std::size_t peek_col() const {
    return pos_ < tokens_.size() ? tokens_[pos_].col
                                 : (tokens_.empty() ? 1 : tokens_.back().col + tokens_.back().text.size());
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Trace parse_trace(std::string_view source) {
  detail::Parser parser(detail::tokenize(source));
  return parser.parse_block(0, true);
}

inline void pretty_print_into(const Trace& trace, std::ostringstream& out, int indent) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  for (const auto& cmd : trace) {
    out << pad;
    switch (cmd.kind) {
      case Command::Kind::Act: out << "ACT " << cmd.arg; break;
      case Command::Kind::Pre: out << "PRE"; break;
      case Command::Kind::Write: out << "WR " << cmd.arg << " " << cmd.pattern; break;
      case Command::Kind::Read: out << "RD " << cmd.arg; break;
      case Command::Kind::Nop: out << "NOP " << cmd.arg; break;
      case Command::Kind::Repeat:
        out << "REPEAT " << cmd.arg << " {\n";
        pretty_print_into(cmd.body, out, indent + 1);
        out << pad << "}";
        break;
    }
    out << "\n";
  }
}

inline std::string pretty_print(const Trace& trace) {
  std::ostringstream out;
  pretty_print_into(trace, out, 0);
  return out.str();
}

}  // namespace eimtrng
