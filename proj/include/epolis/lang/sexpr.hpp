#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epolis/error.hpp"

namespace epolis::lang {

// Raw s-expression tree produced by the reader. `;` starts a comment that runs
// to end of line. The two-character token `&:` is always split out, so both
// `?c&:(> ?c 1)` and `?c &: (> ?c 1)` read the same way.
struct SExpr {
  enum class Kind { List, Symbol, Integer, Real, String };

  Kind kind = Kind::List;
  std::string text;  // symbol spelling or string contents
  std::int64_t integer = 0;
  double real = 0.0;
  std::vector<SExpr> items;
  SourcePos pos;

  bool is_list() const { return kind == Kind::List; }
  bool is_symbol() const { return kind == Kind::Symbol; }
  bool is_symbol(std::string_view s) const { return kind == Kind::Symbol && text == s; }
  bool is_atom() const { return kind != Kind::List; }
};

std::vector<SExpr> read_sexprs(std::string_view source);

std::string print_sexpr(const SExpr& e);

}  // namespace epolis::lang
