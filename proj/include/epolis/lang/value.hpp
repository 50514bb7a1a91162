#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace epolis::lang {

enum class SlotKind { Symbol, Integer, Real, String, PolyhedronRef };

std::string_view to_string(SlotKind kind);
std::optional<SlotKind> slot_kind_from_string(std::string_view text);

struct Symbol {
  std::string name;
  friend bool operator==(const Symbol&, const Symbol&) = default;
  friend auto operator<=>(const Symbol&, const Symbol&) = default;
};

// A ground slot value. Polyhedron references are stored as integer region ids.
using Value = std::variant<std::int64_t, double, Symbol, std::string>;

inline Value sym(std::string name) { return Symbol{std::move(name)}; }

bool is_numeric(const Value& v);
double as_real(const Value& v);

// Numeric values compare across int/real; other kinds only against their own kind.
bool values_equal(const Value& a, const Value& b);
std::partial_ordering compare_values(const Value& a, const Value& b);

// Checks (and where lossless, coerces) a value against a slot kind.
std::optional<Value> coerce(const Value& v, SlotKind kind);

// Rule-language spelling: integers plain, reals always with '.', strings quoted.
std::string format_value(const Value& v);

Value default_value(SlotKind kind);

struct ValueHash {
  std::size_t operator()(const Value& v) const noexcept;
};

}  // namespace epolis::lang
