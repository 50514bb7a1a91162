#include "epolis/lang/value.hpp"

#include <charconv>
#include <cmath>

namespace epolis::lang {

std::string_view to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::Symbol: return "symbol";
    case SlotKind::Integer: return "integer";
    case SlotKind::Real: return "real";
    case SlotKind::String: return "string";
    case SlotKind::PolyhedronRef: return "polyhedron-ref";
  }
  return "symbol";
}

std::optional<SlotKind> slot_kind_from_string(std::string_view text) {
  if (text == "symbol") return SlotKind::Symbol;
  if (text == "integer") return SlotKind::Integer;
  if (text == "real") return SlotKind::Real;
  if (text == "string") return SlotKind::String;
  if (text == "polyhedron-ref") return SlotKind::PolyhedronRef;
  return std::nullopt;
}

bool is_numeric(const Value& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

double as_real(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nan("");
}

bool values_equal(const Value& a, const Value& b) {
  if (is_numeric(a) && is_numeric(b)) {
    if (a.index() == b.index()) return a == b;
    return as_real(a) == as_real(b);
  }
  return a == b;
}

std::partial_ordering compare_values(const Value& a, const Value& b) {
  if (is_numeric(a) && is_numeric(b)) {
    const auto* ia = std::get_if<std::int64_t>(&a);
    const auto* ib = std::get_if<std::int64_t>(&b);
    if (ia && ib) return *ia <=> *ib;
    return as_real(a) <=> as_real(b);
  }
  if (a.index() != b.index()) return std::partial_ordering::unordered;
  if (const auto* sa = std::get_if<Symbol>(&a)) return sa->name <=> std::get<Symbol>(b).name;
  return std::get<std::string>(a) <=> std::get<std::string>(b);
}

std::optional<Value> coerce(const Value& v, SlotKind kind) {
  switch (kind) {
    case SlotKind::Integer:
    case SlotKind::PolyhedronRef:
      if (std::holds_alternative<std::int64_t>(v)) return v;
      return std::nullopt;
    case SlotKind::Real:
      if (std::holds_alternative<double>(v)) return v;
      if (const auto* i = std::get_if<std::int64_t>(&v)) return Value{static_cast<double>(*i)};
      return std::nullopt;
    case SlotKind::Symbol:
      if (std::holds_alternative<Symbol>(v)) return v;
      return std::nullopt;
    case SlotKind::String:
      if (std::holds_alternative<std::string>(v)) return v;
      return std::nullopt;
  }
  return std::nullopt;
}

namespace {

std::string format_real(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string out(buf, end);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

}  // namespace

std::string format_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, double>) return format_real(x);
        else if constexpr (std::is_same_v<T, Symbol>) return x.name;
        else return quote(x);
      },
      v);
}

Value default_value(SlotKind kind) {
  switch (kind) {
    case SlotKind::Integer:
    case SlotKind::PolyhedronRef: return std::int64_t{0};
    case SlotKind::Real: return 0.0;
    case SlotKind::Symbol: return Symbol{"nil"};
    case SlotKind::String: return std::string{};
  }
  return std::int64_t{0};
}

std::size_t ValueHash::operator()(const Value& v) const noexcept {
  std::size_t h = std::visit(
      [](const auto& x) -> std::size_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Symbol>) return std::hash<std::string>{}(x.name);
        else return std::hash<T>{}(x);
      },
      v);
  return h ^ (v.index() * 0x9e3779b97f4a7c15ULL);
}

}  // namespace epolis::lang
