#include "epolis/store/prefs.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "epolis/error.hpp"

namespace epolis::store {

namespace {

void check_entry(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos)
    throw Error(ErrorCode::Validation, "bad preference key '" + key + "'");
  if (value.find('\n') != std::string::npos)
    throw Error(ErrorCode::Validation, "preference value for " + key + " contains a newline");
}

}  // namespace

std::map<std::string, std::string> parse_prefs(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorCode::Corrupt, origin + ":" + std::to_string(n) + ": expected key=value");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::string format_prefs(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

PrefsStore::PrefsStore(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  if (!in) return;
  std::stringstream ss;
  ss << in.rdbuf();
  values_ = parse_prefs(ss.str(), path_);
}

std::optional<std::string> PrefsStore::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::string> PrefsStore::all() const {
  std::lock_guard lock(mu_);
  return values_;
}

void PrefsStore::set(const std::string& key, const std::string& value) { set_many({{key, value}}); }

void PrefsStore::set_many(const std::map<std::string, std::string>& values) {
  std::vector<std::pair<std::string, std::string>> changed;
  std::vector<Watcher> watchers;
  {
    std::lock_guard lock(mu_);
    for (const auto& [k, v] : values) check_entry(k, v);
    for (const auto& [k, v] : values) {
      auto it = values_.find(k);
      if (it != values_.end() && it->second == v) continue;
      values_[k] = v;
      changed.emplace_back(k, v);
    }
    if (changed.empty()) return;
    write_file();
    for (const auto& [id, w] : watchers_) watchers.push_back(w);
  }
  for (const auto& [k, v] : changed)
    for (const auto& w : watchers) w(k, v);
}

std::size_t PrefsStore::watch(Watcher w) {
  std::lock_guard lock(mu_);
  watchers_[next_watch_] = std::move(w);
  return next_watch_++;
}

void PrefsStore::unwatch(std::size_t id) {
  std::lock_guard lock(mu_);
  watchers_.erase(id);
}

void PrefsStore::write_file() const {
  if (path_.empty()) return;
  std::string tmp = path_ + ".tmp";
  std::string text = format_prefs(values_);
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::Io, "cannot write " + tmp);
  std::size_t done = 0;
  while (done < text.size()) {
    ssize_t n = ::write(fd, text.data() + done, text.size() - done);
    if (n <= 0) {
      ::close(fd);
      throw Error(ErrorCode::Io, "short write to " + tmp);
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) throw Error(ErrorCode::Io, "cannot flush " + tmp);
  if (std::rename(tmp.c_str(), path_.c_str()) != 0) throw Error(ErrorCode::Io, "cannot replace " + path_);
}

}  // namespace epolis::store
