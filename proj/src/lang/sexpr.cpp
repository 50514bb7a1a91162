#include "epolis/lang/sexpr.hpp"

#include <charconv>
#include <cctype>

#include "epolis/lang/value.hpp"

namespace epolis::lang {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    for (;;) {
      skip_blank();
      if (at_end()) break;
      if (peek() == ')') throw SyntaxError("unexpected ')'", here());
      out.push_back(read());
    }
    return out;
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek() const { return src_[i_]; }
  SourcePos here() const { return {line_, col_}; }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_blank() {
    while (!at_end()) {
      char c = peek();
      if (c == ';') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  bool at_amp_colon() const {
    return i_ + 1 < src_.size() && src_[i_] == '&' && src_[i_ + 1] == ':';
  }

  SExpr read() {
    SExpr e;
    e.pos = here();
    char c = peek();
    if (c == '(') {
      advance();
      e.kind = SExpr::Kind::List;
      for (;;) {
        skip_blank();
        if (at_end()) throw SyntaxError("unbalanced '(' (missing ')')", e.pos);
        if (peek() == ')') {
          advance();
          return e;
        }
        e.items.push_back(read());
      }
    }
    if (c == '"') return read_string();
    if (at_amp_colon()) {
      advance();
      advance();
      e.kind = SExpr::Kind::Symbol;
      e.text = "&:";
      return e;
    }
    return read_atom();
  }

  SExpr read_string() {
    SExpr e;
    e.pos = here();
    e.kind = SExpr::Kind::String;
    advance();
    for (;;) {
      if (at_end()) throw SyntaxError("unterminated string", e.pos);
      char c = peek();
      advance();
      if (c == '"') return e;
      if (c == '\\') {
        if (at_end()) throw SyntaxError("unterminated string", e.pos);
        char n = peek();
        advance();
        switch (n) {
          case 'n': e.text += '\n'; break;
          case 't': e.text += '\t'; break;
          default: e.text += n;
        }
      } else {
        e.text += c;
      }
    }
  }

  SExpr read_atom() {
    SExpr e;
    e.pos = here();
    std::size_t start = i_;
    while (!at_end()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"' ||
          c == ';' || at_amp_colon())
        break;
      advance();
    }
    std::string_view tok = src_.substr(start, i_ - start);
    classify(tok, e);
    return e;
  }

  static void classify(std::string_view tok, SExpr& e) {
    e.text = std::string(tok);
    e.kind = SExpr::Kind::Symbol;
    if (tok.empty()) return;
    std::string_view digits = tok;
    if (digits[0] == '+' || digits[0] == '-') digits.remove_prefix(1);
    if (digits.empty() || !(std::isdigit(static_cast<unsigned char>(digits[0])) || digits[0] == '.'))
      return;
    const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char* last = tok.data() + tok.size();
    std::int64_t iv = 0;
    auto ir = std::from_chars(first, last, iv);
    if (ir.ec == std::errc{} && ir.ptr == last) {
      e.kind = SExpr::Kind::Integer;
      e.integer = iv;
      return;
    }
    double dv = 0;
    auto dr = std::from_chars(first, last, dv);
    if (dr.ec == std::errc{} && dr.ptr == last) {
      e.kind = SExpr::Kind::Real;
      e.real = dv;
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

std::vector<SExpr> read_sexprs(std::string_view source) { return Reader(source).read_all(); }

std::string print_sexpr(const SExpr& e) {
  switch (e.kind) {
    case SExpr::Kind::Symbol: return e.text;
    case SExpr::Kind::Integer: return std::to_string(e.integer);
    case SExpr::Kind::Real: return format_value(Value{e.real});
    case SExpr::Kind::String: return format_value(Value{e.text});
    case SExpr::Kind::List: break;
  }
  std::string out = "(";
  for (std::size_t i = 0; i < e.items.size(); ++i) {
    if (i) out += ' ';
    out += print_sexpr(e.items[i]);
  }
  out += ')';
  return out;
}

}  // namespace epolis::lang
