#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "epolis/city/layout.hpp"

namespace epolis::city {

enum class BlockPhase { Disabled, DefaultEnabled, Transformed };

struct BlockState {
  BlockPhase phase = BlockPhase::Disabled;
  std::optional<std::int64_t> enabled_pid;

  friend bool operator==(const BlockState&, const BlockState&) = default;
};

// Which instance each block shows. Blocks without a dilemma start with their
// permanent instance; dilemma blocks start disabled.
class CityState {
 public:
  explicit CityState(const CityLayout& layout);

  const BlockState& state(std::int64_t sid) const;
  const std::map<std::int64_t, BlockState>& states() const { return states_; }
  std::size_t enabled_count(std::int64_t sid) const { return state(sid).enabled_pid ? 1 : 0; }

  // First outer-zone activation. Returns true when the block changed.
  bool enable_default(std::int64_t sid);
  // Enables the choice's doctrine instance. Returns the pid when the enabled
  // instance changed, nothing for a repeat. Throws InvalidChoice for a cid
  // that does not belong to the block's dilemma.
  std::optional<std::int64_t> apply_choice(std::int64_t sid, std::int64_t cid);
  // Forces a doctrine, as the simulator's infection does.
  bool set_doctrine(std::int64_t sid, std::int64_t pid);

  friend bool operator==(const CityState& a, const CityState& b) { return a.states_ == b.states_; }

 private:
  const CityLayout* layout_;
  std::map<std::int64_t, BlockState> states_;
};

}  // namespace epolis::city
