#include "statemachine.hpp"

#include <algorithm>
#include <cctype>

#include "text.hpp"

namespace psydial {

std::string_view to_string(Level l) { return l == Level::ILS ? "ILS" : "BLS"; }

std::string_view to_string(Category c) {
  switch (c) {
    case Category::affective_cognitive: return "affective_cognitive";
    case Category::physio_behavioral: return "physio_behavioral";
    case Category::impairment_risk: return "impairment_risk";
    case Category::comorbid_contributing: return "comorbid_contributing";
  }
  return "?";
}

std::optional<Level> parse_level(std::string_view s) {
  if (s == "ILS") return Level::ILS;
  if (s == "BLS") return Level::BLS;
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s) {
  for (auto c : {Category::affective_cognitive, Category::physio_behavioral, Category::impairment_risk,
                 Category::comorbid_contributing}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

bool is_symptom_category(Category c) { return c != Category::comorbid_contributing; }

std::string_view to_string(GroupVerdict v) { return v == GroupVerdict::positive ? "positive" : "absent"; }

StateMachineDef::RefKind StateMachineDef::classify(std::string_view ref) const {
  const std::string key(ref);
  if (nodes.count(key)) return RefKind::node;
  if (groups.count(key)) return RefKind::group;
  if (terminals.count(key)) return RefKind::terminal;
  if (stages.count(key)) return RefKind::stage;
  return RefKind::unknown;
}

const QuestionNode& StateMachineDef::node(std::string_view id) const {
  auto it = nodes.find(std::string(id));
  if (it == nodes.end()) throw PreconditionError("unknown node '" + std::string(id) + "'");
  return it->second;
}

const SubStateGroup& StateMachineDef::group(std::string_view id) const {
  auto it = groups.find(std::string(id));
  if (it == groups.end()) throw PreconditionError("unknown group '" + std::string(id) + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

GroupVerdict evaluate_group(int tally, const SubStateGroup& group) {
  return tally >= group.threshold ? GroupVerdict::positive : GroupVerdict::absent;
}

std::optional<std::string> resolve_clauses(const std::vector<ClauseRule>& rules, const EpisodeFlags& flags) {
  for (const auto& r : rules) {
    const bool all = std::all_of(r.all_of.begin(), r.all_of.end(), [&](const auto& f) { return flags.count(f) != 0; });
    const bool any = r.any_of.empty() ||
                     std::any_of(r.any_of.begin(), r.any_of.end(), [&](const auto& f) { return flags.count(f) != 0; });
    if (all && any) return r.terminal;
  }
  return std::nullopt;
}

std::optional<std::string> resolve_bipolar(const StateMachineDef& bd_def, const EpisodeFlags& flags) {
  if (bd_def.disorder != Disorder::BD) throw PreconditionError("resolve_bipolar needs the BD definition");
  return resolve_clauses(bd_def.rules, flags);
}

// ---------------------------------------------------------------------------

MachineRuntime::MachineRuntime(std::shared_ptr<const StateMachineDef> def) : def_(std::move(def)) {
  if (!def_) throw PreconditionError("runtime needs a definition");
  if (def_->classify(def_->entry) != StateMachineDef::RefKind::node)
    throw PreconditionError("entry '" + def_->entry + "' is not a question node");
  current_ = def_->entry;
}

MachineRuntime init_runtime(std::shared_ptr<const StateMachineDef> def) { return MachineRuntime(std::move(def)); }

const QuestionNode& MachineRuntime::current_topic() const {
  if (terminal_) throw StateError("machine " + std::string(to_string(def_->disorder)) + " already reached " + *terminal_);
  return def_->nodes.at(current_);
}

int MachineRuntime::position_in_group() const {
  if (!active_group_) return 0;
  const auto& g = def_->groups.at(*active_group_);
  return static_cast<int>(std::count_if(g.members.begin(), g.members.end(),
                                        [&](const auto& m) { return visited_.count(m) != 0; }));
}

std::vector<std::string> MachineRuntime::unvisited_members() const {
  std::vector<std::string> out;
  if (!active_group_) return out;
  for (const auto& m : def_->groups.at(*active_group_).members) {
    if (!visited_.count(m)) out.push_back(m);
  }
  return out;
}

std::string localized_random_pick(const MachineRuntime& rt, Rng& rng) {
  if (!rt.active_group_) throw StateError("cursor is not inside a sub-state group");
  auto pool = rt.unvisited_members();
  if (pool.empty()) throw StateError("group " + *rt.active_group_ + " has no unvisited member");
  return pool[rng.uniform_index(pool.size())];
}

TransitionOutcome MachineRuntime::move_to(const std::string& ref, Rng& rng) {
  using K = StateMachineDef::RefKind;
  switch (def_->classify(ref)) {
    case K::node:
      if (visited_.count(ref)) throw StateError("transition would revisit node " + ref);
      current_ = ref;
      active_group_.reset();
      return {TransitionOutcome::Kind::next_node, ref, std::nullopt};
    case K::group: {
      if (group_tallies_.count(ref)) throw StateError("transition would re-enter group " + ref);
      active_group_ = ref;
      group_tallies_[ref] = 0;
      current_ = localized_random_pick(*this, rng);
      return {TransitionOutcome::Kind::next_node, current_, std::nullopt};
    }
    case K::terminal: {
      const auto& t = def_->terminals.at(ref);
      flags_.insert(t.sets_flags.begin(), t.sets_flags.end());
      terminal_ = ref;
      active_group_.reset();
      current_.clear();
      return {TransitionOutcome::Kind::terminal, ref, std::nullopt};
    }
    case K::stage: {
      const auto& st = def_->stages.at(ref);
      flags_.insert(st.sets.begin(), st.sets.end());
      auto resolved = resolve_clauses(def_->rules, flags_);
      return move_to(resolved ? *resolved : st.fallback, rng);
    }
    case K::unknown:
      break;
  }
  throw StateError("unresolved reference '" + ref + "'");
}

TransitionOutcome MachineRuntime::apply_response(Answer answer, Rng& rng, std::string_view node_id) {
  if (terminal_) throw StateError("machine " + std::string(to_string(def_->disorder)) + " already reached " + *terminal_);
  if (!node_id.empty() && node_id != current_) {
    throw StateError("answer addresses " + std::string(node_id) + " but the current topic is " + current_);
  }
  if (visited_.count(current_)) throw StateError("node " + current_ + " was already answered");

  const std::string answered = current_;
  visited_.insert(answered);
  visit_order_.push_back(answered);
  responses_[answered] = answer;

  if (active_group_) {
    const std::string gid = *active_group_;
    if (answer == Answer::present) ++group_tallies_[gid];
    if (!unvisited_members().empty()) {
      current_ = localized_random_pick(*this, rng);
      return {TransitionOutcome::Kind::group_continues, current_, std::nullopt};
    }
    const auto& g = def_->groups.at(gid);
    const auto verdict = evaluate_group(group_tallies_[gid], g);
    group_verdicts_[gid] = verdict;
    active_group_.reset();
    auto out = move_to(verdict == GroupVerdict::positive ? g.positive_next : g.negative_next, rng);
    out.group_verdict = verdict;
    return out;
  }

  const auto& n = def_->nodes.at(answered);
  const auto& next = answer == Answer::present ? n.present_next : n.absent_next;
  if (!next) throw StateError("node " + answered + " has no successor for this answer");
  return move_to(*next, rng);
}

void MachineRuntime::inject_flags(const EpisodeFlags& flags) {
  if (terminal_) throw StateError("cannot inject flags into a terminated machine");
  flags_.insert(flags.begin(), flags.end());
}

// ---------------------------------------------------------------------------

std::string render_question(const StateMachineDef& def, const QuestionNode& node, int position_in_group) {
  std::string cue;
  if (node.group_id && position_in_group >= 1) {
    cue = std::string(kLooseCue);
  } else if (auto it = def.sections.find(node.section); it != def.sections.end()) {
    cue = it->second.cue;
  }
  std::string capital = cue;
  if (!capital.empty()) capital[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(capital[0])));
  std::string out = text::render_template(node.question_template, {{"cue", cue}, {"Cue", capital}});
  if (cue.empty()) {
    // A section without a temporal window leaves the placeholder's
    // surrounding spaces and commas behind.
    std::string tidy;
    for (char c : out) {
      if (c == ' ' && !tidy.empty() && tidy.back() == ' ') continue;
      if ((c == '?' || c == ',' || c == '.') && !tidy.empty() && tidy.back() == ' ') tidy.pop_back();
      if (c == ',' && tidy.empty()) continue;
      tidy.push_back(c);
    }
    out = text::trim(tidy);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  return out;
}

// ---------------------------------------------------------------------------

const StateMachineDef& MachineSet::at(Disorder d) const {
  auto it = defs.find(d);
  if (it == defs.end()) throw PreconditionError("no machine loaded for " + std::string(to_string(d)));
  return *it->second;
}

std::vector<const StateMachineDef*> MachineSet::all() const {
  std::vector<const StateMachineDef*> out;
  for (const auto& [_, d] : defs) out.push_back(d.get());
  return out;
}

MachineSet load_machine_set(const std::filesystem::path& dir) {
  static const std::array<std::pair<Disorder, const char*>, 4> kFiles{{
      {Disorder::MDD, "mdd.json"}, {Disorder::AD, "ad.json"}, {Disorder::BD, "bd.json"}, {Disorder::ADHD, "adhd.json"}}};
  MachineSet set;
  for (const auto& [d, file] : kFiles) {
    auto def = std::make_shared<StateMachineDef>(load_machine_def_file(dir / file));
    if (def->disorder != d)
      throw ValidationError({std::string(file) + ": declares disorder " + std::string(to_string(def->disorder))});
    set.defs.emplace(d, std::move(def));
  }
  return set;
}

ComorbidityProfile labels_from_terminals(const std::map<Disorder, std::string>& finals, const MachineSet& machines) {
  ComorbidityProfile out;
  for (const auto& [d, code] : finals) {
    const auto& def = machines.at(d);
    auto it = def.terminals.find(code);
    if (it == def.terminals.end())
      throw PreconditionError("unknown terminal '" + code + "' for " + std::string(to_string(d)));
    if (it->second.contributes) out.insert(*it->second.contributes);
  }
  return out;
}

}  // namespace psydial
