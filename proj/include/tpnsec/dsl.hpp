#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpnsec/cipn.hpp"
#include "tpnsec/net.hpp"
#include "tpnsec/verifier.hpp"

namespace tpnsec {

template <class T>
struct Parsed {
  std::optional<T> value;  // set only when there are no errors
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return value.has_value(); }
};

Parsed<Expr> parse_expr(std::string_view text, const std::string& file = {});

Parsed<Net> parse_net(std::string_view text, const std::string& file = {});
std::string print_net(const Net& net);

Parsed<CipnModel> parse_cipn(std::string_view text, const std::string& file = {});
std::string print_cipn(const CipnModel& m);

Parsed<std::vector<Property>> parse_properties(std::string_view text, const std::string& file = {});
std::string print_properties(const std::vector<Property>& props);

std::string print_interval(const TimeInterval& iv);

/// Reads a whole file; throws std::runtime_error when it cannot be opened.
std::string read_file(const std::string& path);

namespace dsl {

enum class Tok { Ident, String, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int column = 1;
};

/// Tokenizer shared by every format. Identifiers may contain `.` and `&`;
/// quoted strings are identifiers too. Numbers may carry a time unit.
class Lexer {
 public:
  Lexer(std::string_view text, std::string file, std::vector<Diagnostic>& diags);
  const Token& peek(std::size_t ahead = 0);
  Token next();
  bool at(std::string_view punct_or_word);
  bool accept(std::string_view punct_or_word);
  Token expect(std::string_view punct_or_word, const char* what);
  Token expect_id(const char* what);
  void error(const Token& at, const std::string& msg);
  bool failed() const { return failed_; }
  /// Skips tokens until one of the given words starts a line.
  void recover(std::initializer_list<std::string_view> words);
  const std::string& file() const { return file_; }

 private:
  Token scan();
  std::string_view text_;
  std::string file_;
  std::vector<Diagnostic>& diags_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  std::vector<Token> buf_;
  bool failed_ = false;
};

/// Error signalling inside the recursive-descent parsers; already reported.
struct Abort {};

Expr parse_expression(Lexer& lx);
std::int64_t parse_int(Lexer& lx);
Rational parse_time(Lexer& lx);
TimeInterval parse_interval(Lexer& lx);
std::vector<Update> parse_updates(Lexer& lx);
Property parse_property(Lexer& lx);

std::string print_updates(const std::vector<Update>& ups);

}  // namespace dsl

}  // namespace tpnsec
