#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace epolis::store {

// Flat key=value store mirrored to a text file. Every commit rewrites the
// whole file through a temporary and a rename, so readers see either the old
// or the new content. An empty path keeps the store in memory.
class PrefsStore {
 public:
  explicit PrefsStore(std::string path = "");

  std::optional<std::string> get(const std::string& key) const;
  std::map<std::string, std::string> all() const;
  void set(const std::string& key, const std::string& value);
  // One commit for several keys. Unchanged values are not reported to watchers.
  void set_many(const std::map<std::string, std::string>& values);

  // Called once per changed key, in commit order.
  using Watcher = std::function<void(const std::string& key, const std::string& value)>;
  std::size_t watch(Watcher w);
  void unwatch(std::size_t id);

  const std::string& path() const { return path_; }

 private:
  void write_file() const;

  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> values_;
  std::map<std::size_t, Watcher> watchers_;
  std::size_t next_watch_ = 1;
};

std::map<std::string, std::string> parse_prefs(const std::string& text, const std::string& origin);
std::string format_prefs(const std::map<std::string, std::string>& values);

}  // namespace epolis::store
