#pragma once

#include <string>
#include <vector>

namespace epolis::kb {

// Rule sources compiled into the library. Each becomes one recurring query of
// the same name; together they form the default 20-rule DAL program.
struct NamedProgram {
  std::string name;
  std::string source;
};
const std::vector<NamedProgram>& builtin_programs();

}  // namespace epolis::kb
