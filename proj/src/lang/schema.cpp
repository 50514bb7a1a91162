#include "epolis/lang/schema.hpp"

#include <algorithm>
#include <set>

namespace epolis::lang {

std::optional<std::size_t> TemplateDef::slot_index(std::string_view slot) const {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == slot) return i;
  return std::nullopt;
}

std::string canonical_template_name(std::string_view raw) {
  std::string name;
  for (char c : raw)
    if (c != ' ' && c != '\t' && c != '\n') name += c;
  static const std::map<std::string, std::string, std::less<>> aliases = {
      {"H_UserInDilema", "H_UserInDilemma"},
      {"H_UserInDilemaHist", "H_UserInDilemmaHist"},
      {"H_PrevalingChoice", "H_PrevailingChoice"},
  };
  if (auto it = aliases.find(name); it != aliases.end()) return it->second;
  return name;
}

std::string canonical_slot_name(std::string_view template_name, std::string_view raw) {
  std::string slot(raw);
  std::replace(slot.begin(), slot.end(), '-', '_');
  if (template_name == "L_PoliticisedUserChoice" && slot == "choice") return "cid";
  if (template_name == "L_NestedLocation" && slot == "prim") return "prid";
  return slot;
}

void validate_template(const TemplateDef& def) {
  if (def.name.empty()) throw SyntaxError("template name is empty", def.pos);
  std::set<std::string> seen;
  for (const auto& s : def.slots)
    if (!seen.insert(s.name).second)
      throw SyntaxError("duplicate slot '" + s.name + "' in template " + def.name, def.pos);
}

void Schema::add(TemplateDef def) {
  validate_template(def);
  if (by_name_.count(def.name))
    throw SyntaxError("duplicate template '" + def.name + "'", def.pos);
  by_name_.emplace(def.name, templates_.size());
  templates_.push_back(std::move(def));
}

void Schema::merge(const std::vector<TemplateDef>& defs) {
  for (const auto& d : defs) add(d);
}

const TemplateDef* Schema::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    it = by_name_.find(canonical_template_name(name));
    if (it == by_name_.end()) return nullptr;
  }
  return &templates_[it->second];
}

const TemplateDef& Schema::at(std::string_view name) const {
  const auto* t = find(name);
  if (!t) throw Error(ErrorCode::Validation, "unknown template '" + std::string(name) + "'");
  return *t;
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  const auto* t = find(name);
  if (!t) return std::nullopt;
  return static_cast<std::size_t>(t - templates_.data());
}

Schema Schema::builtin() {
  using K = SlotKind;
  auto def = [](std::string name, std::vector<SlotDef> slots) {
    return TemplateDef{std::move(name), std::move(slots), {}};
  };
  const SlotDef uid{"uid", K::Integer}, sid{"sid", K::Integer}, did{"did", K::Integer},
      pid{"pid", K::Integer}, cid{"cid", K::Integer}, rid{"rid", K::Integer},
      siid{"siid", K::Integer}, choice{"choice", K::Integer}, seq{"seq", K::Integer},
      time{"time", K::Integer}, start{"start_time", K::Integer}, end{"end_time", K::Integer},
      poly{"polyhedron", K::PolyhedronRef};

  Schema s;
  // Sensor layer.
  s.add(def("P_PlayerPosition", {uid, {"x", K::Real}, {"y", K::Real}, {"z", K::Real}}));
  s.add(def("L_AtomicLocation", {rid, sid, poly}));
  s.add(def("L_NestedLocation", {{"nrid", K::Integer}, {"prid", K::Integer}, sid, poly}));
  s.add(def("L_SpatialType", {sid, {"type", K::Symbol}}));
  s.add(def("L_PoliticisedSpatialType", {siid, sid, pid}));
  s.add(def("L_Dilemma", {did, sid}));
  s.add(def("L_UserChoice", {cid, uid, did, sid}));
  s.add(def("L_PoliticalDogma", {pid, {"name", K::Symbol}}));
  s.add(def("L_PoliticisedUserChoice", {cid, pid}));
  s.add(def("L_BoundaryCollision",
            {uid, sid, {"zone", K::Symbol}, {"event", K::Symbol}, seq, time}));
  s.add(def("L_ChoiceEvent", {uid, did, cid, sid, seq, time}));
  s.add(def("L_VoteEvent", {uid, {"verdict", K::Integer}, seq, time}));
  // Deductive layer.
  s.add(def("H_UserAtNestedLocation", {uid, rid, start}));
  s.add(def("H_UserAtSmartSpatialType", {uid, sid, start}));
  s.add(def("H_UserInDilemma", {uid, did, start}));
  s.add(def("H_UserAnsweredDilemma", {uid, did, choice, start}));
  s.add(def("H_SmartSpatialTypeTransformed", {sid, pid, start}));
  s.add(def("H_SameChoiceDifferentPlayer", {did, choice, {"count", K::Integer}, start}));
  s.add(def("H_PrevailingChoice", {did, choice, start}));
  s.add(def("H_ChoiceCounted", {uid, did, choice}));
  s.add(def("H_UserVoted", {uid, {"verdict", K::Integer}, start}));
  s.add(def("H_VoteCounted", {uid, {"verdict", K::Integer}}));
  s.add(def("H_SameVerdictDifferentPlayer", {{"verdict", K::Integer}, {"count", K::Integer}}));
  s.add(def("H_PrevailingVerdict", {{"verdict", K::Integer}, start}));
  s.add(def("H_AbnormalBehaviour", {uid, {"kind", K::Symbol}, start}));
  // Historical layer.
  s.add(def("H_UserInLocationHist", {uid, siid, sid, start, end}));
  s.add(def("H_UserInDilemmaHist", {uid, did, start, end}));
  s.add(def("H_UserInNestedLocationHist", {uid, rid, start, end}));
  s.add(def("H_UserChoiceHist", {uid, did, choice, start}));
  return s;
}

}  // namespace epolis::lang
