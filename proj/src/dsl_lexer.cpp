#include <cctype>
#include <fstream>
#include <sstream>

#include "tpnsec/dsl.hpp"

namespace tpnsec {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace dsl {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '&'; }

}  // namespace

Lexer::Lexer(std::string_view text, std::string file, std::vector<Diagnostic>& diags)
    : text_(text), file_(std::move(file)), diags_(diags) {}

void Lexer::error(const Token& at, const std::string& msg) {
  failed_ = true;
  diags_.push_back({Severity::Error, file_, at.line, at.column, {}, msg});
}

Token Lexer::scan() {
  auto get = [&]() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  };
  for (;;) {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) get();
    if (pos_ >= text_.size()) return {Tok::End, "", line_, col_};
    bool comment = text_[pos_] == '#' || (text_[pos_] == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/');
    if (!comment) break;
    while (pos_ < text_.size() && text_[pos_] != '\n') get();
  }
  Token t;
  t.line = line_;
  t.column = col_;
  char c = text_[pos_];
  if (ident_start(c)) {
    t.kind = Tok::Ident;
    while (pos_ < text_.size() && ident_char(text_[pos_])) t.text += get();
    return t;
  }
  if (std::isdigit(static_cast<unsigned char>(c))) {
    t.kind = Tok::Number;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) t.text += get();
    };
    digits();
    if (pos_ + 1 < text_.size() && text_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      t.text += get();
      digits();
    }
    if (pos_ + 1 < text_.size() && text_[pos_] == '/' && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      t.text += get();
      digits();
    }
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) t.text += get();
    return t;
  }
  if (c == '"') {
    t.kind = Tok::String;
    get();
    for (;;) {
      if (pos_ >= text_.size() || text_[pos_] == '\n') {
        error(t, "unterminated string");
        return t;
      }
      char d = get();
      if (d == '"') break;
      if (d == '\\' && pos_ < text_.size()) d = get();
      t.text += d;
    }
    return t;
  }
  static const char* puncts[] = {"-->", "->", "=>", "==", "!=", "<=", ">=", "(", ")", "[", "]", "{",
                                 "}",   ",",  ":",  "=",  "<",  ">",  "+",  "-", "*", ";", "/"};
  for (const char* p : puncts) {
    std::string_view pv(p);
    if (text_.substr(pos_, pv.size()) == pv) {
      t.kind = Tok::Punct;
      for (std::size_t i = 0; i < pv.size(); ++i) t.text += get();
      return t;
    }
  }
  t.kind = Tok::Punct;
  t.text = std::string(1, get());
  error(t, std::string("unexpected character '") + t.text + "'");
  return scan();
}

const Token& Lexer::peek(std::size_t ahead) {
  while (buf_.size() <= ahead) buf_.push_back(scan());
  return buf_[ahead];
}

Token Lexer::next() {
  peek();
  Token t = buf_.front();
  buf_.erase(buf_.begin());
  return t;
}

bool Lexer::at(std::string_view w) {
  const Token& t = peek();
  return (t.kind == Tok::Punct || t.kind == Tok::Ident) && t.text == w;
}

bool Lexer::accept(std::string_view w) {
  if (!at(w)) return false;
  next();
  return true;
}

Token Lexer::expect(std::string_view w, const char* what) {
  if (!at(w)) {
    const Token& t = peek();
    error(t, std::string("expected ") + what + ", found " + (t.kind == Tok::End ? std::string("end of file") : "'" + t.text + "'"));
    throw Abort{};
  }
  return next();
}

Token Lexer::expect_id(const char* what) {
  const Token& t = peek();
  if (t.kind != Tok::Ident && t.kind != Tok::String) {
    error(t, std::string("expected ") + what + ", found " + (t.kind == Tok::End ? std::string("end of file") : "'" + t.text + "'"));
    throw Abort{};
  }
  return next();
}

void Lexer::recover(std::initializer_list<std::string_view> words) {
  for (;;) {
    const Token& t = peek();
    if (t.kind == Tok::End) return;
    if (t.kind == Tok::Ident && t.column == 1)
      for (auto w : words)
        if (t.text == w) return;
    next();
  }
}

std::int64_t parse_int(Lexer& lx) {
  bool neg = lx.accept("-");
  const Token& t = lx.peek();
  if (t.kind != Tok::Number) {
    lx.error(t, "expected an integer");
    throw Abort{};
  }
  Token n = lx.next();
  std::int64_t v = 0;
  for (char c : n.text) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      lx.error(n, "expected an integer, found '" + n.text + "'");
      throw Abort{};
    }
    if (v > (INT64_MAX - 9) / 10) {
      lx.error(n, "integer out of range");
      throw Abort{};
    }
    v = v * 10 + (c - '0');
  }
  return neg ? -v : v;
}

Rational parse_time(Lexer& lx) {
  const Token& t = lx.peek();
  if (t.kind != Tok::Number) {
    lx.error(t, "expected a time value");
    throw Abort{};
  }
  Token n = lx.next();
  auto v = parse_time_literal(n.text);
  if (!v) {
    lx.error(n, "malformed time literal '" + n.text + "' (units: ms, us, s)");
    throw Abort{};
  }
  return *v;
}

TimeInterval parse_interval(Lexer& lx) {
  Token open = lx.peek();
  TimeInterval iv;
  if (lx.accept("[")) {
    iv.lower_closed = true;
  } else if (lx.accept("(")) {
    iv.lower_closed = false;
  } else {
    lx.error(open, "expected '[' or '(' to start an interval");
    throw Abort{};
  }
  iv.lower = parse_time(lx);
  lx.expect(",", "','");
  if (lx.accept("inf")) {
    iv.upper = std::nullopt;
  } else {
    iv.upper = parse_time(lx);
  }
  if (lx.accept("]")) {
    iv.upper_closed = true;
  } else if (lx.accept(")")) {
    iv.upper_closed = false;
  } else {
    lx.error(lx.peek(), "expected ']' or ')' to close the interval");
    throw Abort{};
  }
  if (auto why = iv.check(); !why.empty()) {
    lx.error(open, "malformed interval " + iv.to_string() + ": " + why);
    throw Abort{};
  }
  return iv;
}

namespace {

Expr parse_or(Lexer& lx);
Expr parse_cmp(Lexer& lx);

Expr parse_primary(Lexer& lx) {
  const Token& t = lx.peek();
  if (t.kind == Tok::Number) return Expr::integer(parse_int(lx));
  if (t.kind == Tok::Punct && t.text == "-") return Expr::integer(parse_int(lx));
  if (lx.accept("(")) {
    Expr e = parse_expression(lx);
    lx.expect(")", "')'");
    return e;
  }
  if (t.kind == Tok::Ident) {
    if (t.text == "true" || t.text == "false") return Expr::boolean(lx.next().text == "true");
    if (t.text == "not") {
      lx.next();
      Token at = lx.peek();
      if (lx.at("(")) {
        // `not(...)` binds like a function call
        lx.next();
        Expr e = parse_expression(lx);
        lx.expect(")", "')'");
        return !e;
      }
      (void)at;
      return !parse_cmp(lx);
    }
    if (t.text == "M" && lx.peek(1).kind == Tok::Punct && lx.peek(1).text == "(") {
      lx.next();
      lx.next();
      Token p = lx.expect_id("place name");
      lx.expect(")", "')'");
      return Expr::mark(p.text);
    }
    static const char* reserved[] = {"and", "or", "inf"};
    for (const char* r : reserved)
      if (t.text == r) {
        lx.error(t, "unexpected keyword '" + t.text + "'");
        throw Abort{};
      }
    return Expr::var(lx.next().text);
  }
  if (t.kind == Tok::String) return Expr::var(lx.next().text);
  lx.error(t, t.kind == Tok::End ? std::string("expected an expression, found end of file")
                                 : "expected an expression, found '" + t.text + "'");
  throw Abort{};
}

Expr parse_sum(Lexer& lx) {
  Expr e = parse_primary(lx);
  for (;;) {
    if (lx.accept("+")) {
      e = plus(e, parse_primary(lx));
    } else if (lx.at("-") && lx.peek(1).kind == Tok::Number) {
      lx.next();
      Expr r = parse_primary(lx);
      if (r.op() != Op::Int) {
        lx.error(lx.peek(), "only literals may be subtracted");
        throw Abort{};
      }
      e = plus(e, Expr::integer(-r.value()));
    } else {
      return e;
    }
  }
}

Expr parse_cmp(Lexer& lx) {
  Token start = lx.peek();
  Expr l = parse_sum(lx);
  static const std::pair<const char*, Op> ops[] = {{"==", Op::Eq}, {"!=", Op::Ne}, {"<=", Op::Le},
                                                    {">=", Op::Ge}, {"<", Op::Lt},  {">", Op::Gt}};
  for (const auto& [s, op] : ops) {
    if (lx.accept(s)) {
      Expr r = parse_sum(lx);
      Expr e = Expr::binary(op, l, r);
      std::string err;
      type_of(e, &err);
      if (!err.empty()) {
        lx.error(start, err);
        throw Abort{};
      }
      return e;
    }
  }
  return l;
}

Expr parse_and(Lexer& lx) {
  Expr e = parse_cmp(lx);
  while (lx.accept("and")) e = e && parse_cmp(lx);
  return e;
}

Expr parse_or(Lexer& lx) {
  Expr e = parse_and(lx);
  while (lx.accept("or")) e = e || parse_and(lx);
  return e;
}

}  // namespace

Expr parse_expression(Lexer& lx) {
  Token start = lx.peek();
  Expr e = parse_or(lx);
  if (lx.at("=>") && !(lx.peek(1).kind == Tok::Ident && lx.peek(1).text == "AF")) {
    lx.next();
    e = !e || parse_expression(lx);
  }
  std::string err;
  type_of(e, &err);
  if (!err.empty()) {
    lx.error(start, err);
    throw Abort{};
  }
  return e;
}

std::vector<Update> parse_updates(Lexer& lx) {
  std::vector<Update> out;
  do {
    Token v = lx.expect_id("variable name");
    lx.expect("=", "'='");
    Token at = lx.peek();
    Expr e = parse_or(lx);
    std::string err;
    if (type_of(e, &err) != Type::Int || !err.empty()) {
      lx.error(at, "update of " + v.text + " must be an integer expression");
      throw Abort{};
    }
    for (const auto& u : out)
      if (u.var == v.text) {
        lx.error(v, "variable assigned twice: " + v.text);
        throw Abort{};
      }
    out.push_back({v.text, e});
  } while (lx.accept(","));
  return out;
}

std::string print_updates(const std::vector<Update>& ups) {
  std::string s;
  for (std::size_t i = 0; i < ups.size(); ++i) s += (i ? ", " : "") + quote_id(ups[i].var) + "=" + ups[i].value.to_string();
  return s;
}

Property parse_property(Lexer& lx) {
  lx.expect("property", "'property'");
  Token name = lx.expect_id("property name");
  lx.expect(":", "':'");
  if (lx.accept("deadlock_free")) return Property::deadlock_free(name.text);
  if (lx.at("bounded") && lx.peek(1).text == "(") {
    lx.next();
    lx.next();
    Token kt = lx.peek();
    auto k = parse_int(lx);
    if (k < 1) {
      lx.error(kt, "bound must be >= 1");
      throw Abort{};
    }
    std::vector<std::string> scope;
    if (lx.accept(",")) {
      lx.expect("{", "'{'");
      if (!lx.at("}")) {
        do scope.push_back(lx.expect_id("place name").text);
        while (lx.accept(","));
      }
      lx.expect("}", "'}'");
    }
    lx.expect(")", "')'");
    return Property::bounded(name.text, static_cast<int>(k), scope);
  }
  if (lx.at("AG") && lx.peek(1).text == "(") {
    lx.next();
    lx.next();
    Expr p = parse_or(lx);
    if (lx.at("=>") && lx.peek(1).text == "AF") {
      lx.next();
      lx.next();
      lx.expect("(", "'('");
      Expr q = parse_expression(lx);
      lx.expect(")", "')'");
      lx.expect(")", "')'");
      return Property::leads_to(name.text, p, q);
    }
    if (lx.accept("=>")) p = !p || parse_expression(lx);
    lx.expect(")", "')'");
    std::string err;
    if (type_of(p, &err) != Type::Bool || !err.empty()) {
      lx.error(name, "AG needs a boolean condition");
      throw Abort{};
    }
    return Property::ag(name.text, p);
  }
  Expr p = parse_expression(lx);
  lx.expect("-->", "'-->' (or AG(...), bounded(k), deadlock_free)");
  Expr q = parse_expression(lx);
  return Property::leads_to(name.text, p, q);
}

}  // namespace dsl
}  // namespace tpnsec
