#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "epolis/error.hpp"
#include "epolis/service/api.hpp"

namespace epolis::service {

using json = nlohmann::json;

ServiceConfig::Env ServiceConfig::process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

int port_from(const std::string& text, const std::string& origin) {
  try {
    std::size_t used = 0;
    int p = std::stoi(text, &used);
    if (used == text.size() && p >= 0 && p <= 65535) return p;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::Validation, origin + ": port must be an integer in [0, 65535], got '" + text + "'");
}

}  // namespace

ServiceConfig ServiceConfig::load(const std::optional<std::string>& path, const Env& env) {
  ServiceConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorCode::Io, "cannot read config " + *path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Validation, *path + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Validation, *path + ": expected an object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "host") c.host = v.get<std::string>();
        else if (key == "port") c.port = port_from(std::to_string(v.get<int>()), *path);
        else if (key == "data_dir") c.data_dir = v.get<std::string>();
        else if (key == "layout") c.layout = v.get<std::string>();
        else if (key == "log") c.log = v.get<std::string>();
        else if (key == "prefs") c.prefs = v.get<std::string>();
        else throw Error(ErrorCode::Validation, *path + ": unknown key '" + key + "'");
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Validation, *path + ": " + key + ": " + e.what());
      }
    }
  }
  if (auto v = env("EPOLIS_PORT")) c.port = port_from(*v, "EPOLIS_PORT");
  if (auto v = env("EPOLIS_DATA_DIR")) c.data_dir = *v;
  if (auto v = env("EPOLIS_LAYOUT")) c.layout = *v;
  return c;
}

std::string ServiceConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (std::filesystem::path(data_dir) / p).string();
}

json ServiceConfig::to_json() const {
  return {{"host", host}, {"port", port}, {"data_dir", data_dir}, {"layout", layout}, {"log", log}, {"prefs", prefs}};
}

}  // namespace epolis::service
