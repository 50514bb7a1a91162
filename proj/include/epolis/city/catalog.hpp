#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace epolis::city {

struct Doctrine {
  std::int64_t pid = 0;
  std::string name;
};

struct DilemmaChoice {
  std::string text;
  std::int64_t pid = 0;
};

// A catalog dilemma. Choices are numbered 1..5 locally; the layout turns them
// into city-wide cids once the dilemma is placed.
struct DilemmaSpec {
  std::string key;
  std::string title;
  std::string body;
  std::string media;
  std::vector<DilemmaChoice> choices;
};

struct Catalogs {
  std::vector<Doctrine> doctrines;
  std::vector<std::string> kinds;
  std::vector<DilemmaSpec> dilemmas;

  // The doctrines, spatial kinds and dilemmas shipped with the library.
  static const Catalogs& standard();
  // Reads doctrines.jsonl, kinds.jsonl and dilemmas.jsonl from `dir`.
  static Catalogs load(const std::string& dir);

  const Doctrine* doctrine(std::int64_t pid) const;
  std::int64_t pid_named(std::string_view name) const;  // throws UnknownId
  void validate() const;
};

// One record per line. `origin` names the source in error messages, which
// read "<origin>:<line>: <problem>".
std::vector<Doctrine> parse_doctrines(std::string_view text, const std::string& origin);
std::vector<std::string> parse_kinds(std::string_view text, const std::string& origin);
std::vector<DilemmaSpec> parse_dilemmas(std::string_view text, const std::string& origin);

}  // namespace epolis::city
