#include "epolis/city/state.hpp"

#include "epolis/error.hpp"

namespace epolis::city {

CityState::CityState(const CityLayout& layout) : layout_(&layout) {
  for (const auto& b : layout.blocks()) {
    BlockState s;
    if (b.permanent_pid) {
      s.phase = BlockPhase::Transformed;
      s.enabled_pid = b.permanent_pid;
    }
    states_[b.sid] = s;
  }
}

const BlockState& CityState::state(std::int64_t sid) const {
  auto it = states_.find(sid);
  if (it == states_.end()) throw Error(ErrorCode::UnknownId, "unknown sid " + std::to_string(sid));
  return it->second;
}

bool CityState::enable_default(std::int64_t sid) {
  state(sid);
  BlockState& s = states_[sid];
  if (s.phase != BlockPhase::Disabled) return false;
  s.phase = BlockPhase::DefaultEnabled;
  s.enabled_pid = layout_->default_pid();
  return true;
}

std::optional<std::int64_t> CityState::apply_choice(std::int64_t sid, std::int64_t cid) {
  const SmartSpatialType& b = layout_->block(sid);
  const Dilemma::Choice* c = b.did ? layout_->dilemma(*b.did).choice(cid) : nullptr;
  if (!c)
    throw Error(ErrorCode::InvalidChoice,
                "choice " + std::to_string(cid) + " does not belong to a dilemma of block " + std::to_string(sid));
  BlockState& s = states_[sid];
  if (s.phase == BlockPhase::Transformed && s.enabled_pid == c->pid) return std::nullopt;
  s.phase = BlockPhase::Transformed;
  s.enabled_pid = c->pid;
  return c->pid;
}

bool CityState::set_doctrine(std::int64_t sid, std::int64_t pid) {
  layout_->block(sid).siid_for(pid);
  BlockState& s = states_[sid];
  if (s.phase == BlockPhase::Transformed && s.enabled_pid == pid) return false;
  s.phase = BlockPhase::Transformed;
  s.enabled_pid = pid;
  return true;
}

}  // namespace epolis::city
