#include "epolis/city/catalog.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "epolis/error.hpp"

namespace epolis::city {

using nlohmann::json;

namespace {

// Calls `f(record, line)` for every non-blank line.
template <typename F>
void each_record(std::string_view text, const std::string& origin, F&& f) {
  std::size_t line = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    ++line;
    pos = end + 1;
    if (raw.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::Validation, origin + ":" + std::to_string(line) + ": " + why);
    };
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::exception& e) {
      throw fail(std::string("not a JSON record (") + e.what() + ")");
    }
    if (!j.is_object()) throw fail("record must be an object");
    try {
      f(j, fail);
    } catch (const json::exception& e) {
      throw fail(std::string("bad field: ") + e.what());
    }
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<Doctrine> parse_doctrines(std::string_view text, const std::string& origin) {
  std::vector<Doctrine> out;
  std::set<std::int64_t> seen;
  each_record(text, origin, [&](const json& j, auto fail) {
    Doctrine d{j.at("pid").get<std::int64_t>(), j.at("name").get<std::string>()};
    if (d.pid <= 0) throw fail("pid must be positive");
    if (d.name.empty()) throw fail("empty doctrine name");
    if (!seen.insert(d.pid).second) throw fail("duplicate pid " + std::to_string(d.pid));
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<std::string> parse_kinds(std::string_view text, const std::string& origin) {
  std::vector<std::string> out;
  each_record(text, origin, [&](const json& j, auto fail) {
    auto k = j.at("kind").get<std::string>();
    if (k.empty()) throw fail("empty kind");
    out.push_back(std::move(k));
  });
  return out;
}

std::vector<DilemmaSpec> parse_dilemmas(std::string_view text, const std::string& origin) {
  std::vector<DilemmaSpec> out;
  each_record(text, origin, [&](const json& j, auto fail) {
    DilemmaSpec d;
    d.key = j.at("key").get<std::string>();
    d.title = j.value("title", d.key);
    d.body = j.value("body", "");
    d.media = j.value("media", "");
    std::set<std::int64_t> pids;
    for (const auto& c : j.at("choices")) {
      DilemmaChoice ch{c.at("text").get<std::string>(), c.at("pid").get<std::int64_t>()};
      if (!pids.insert(ch.pid).second) throw fail("two choices share doctrine " + std::to_string(ch.pid));
      d.choices.push_back(std::move(ch));
    }
    if (d.choices.size() != 5) throw fail("a dilemma needs exactly 5 choices");
    out.push_back(std::move(d));
  });
  return out;
}

Catalogs Catalogs::load(const std::string& dir) {
  Catalogs c;
  c.doctrines = parse_doctrines(slurp(dir + "/doctrines.jsonl"), dir + "/doctrines.jsonl");
  c.kinds = parse_kinds(slurp(dir + "/kinds.jsonl"), dir + "/kinds.jsonl");
  c.dilemmas = parse_dilemmas(slurp(dir + "/dilemmas.jsonl"), dir + "/dilemmas.jsonl");
  c.validate();
  return c;
}

const Doctrine* Catalogs::doctrine(std::int64_t pid) const {
  for (const auto& d : doctrines)
    if (d.pid == pid) return &d;
  return nullptr;
}

std::int64_t Catalogs::pid_named(std::string_view name) const {
  for (const auto& d : doctrines)
    if (d.name == name) return d.pid;
  throw Error(ErrorCode::UnknownId, "no doctrine named " + std::string(name));
}

void Catalogs::validate() const {
  if (doctrines.size() != 5) throw Error(ErrorCode::Validation, "the doctrine catalog must hold 5 doctrines");
  for (const auto& d : dilemmas)
    for (const auto& c : d.choices)
      if (!doctrine(c.pid))
        throw Error(ErrorCode::Validation, "dilemma " + d.key + " uses unknown doctrine " + std::to_string(c.pid));
}

}  // namespace epolis::city
