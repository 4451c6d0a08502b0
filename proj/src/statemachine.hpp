#pragma once

// Hierarchical diagnostic state machines: one declarative definition per
// disorder plus a runtime that walks it under binary answers.
//
// A definition has three levels. Sections (high-level states) carry the
// temporal cue used to phrase their questions. Question nodes are either
// intermediate-level (ILS, with explicit present/absent successors) or
// basic-level (BLS) members of a sub-state group. A group is asked in a
// localized random order and, once every member has been visited, is judged
// positive when the number of "present" answers reaches its threshold.
//
// Successor references may name a node, a group, a terminal diagnosis or a
// clause stage. Stages set episode flags and resolve to the terminal of the
// first determinative rule satisfied, or to their fallback terminal.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace psydial {

enum class Level : std::uint8_t { ILS, BLS };
enum class Category : std::uint8_t { affective_cognitive, physio_behavioral, impairment_risk, comorbid_contributing };

std::string_view to_string(Level l);
std::string_view to_string(Category c);
std::optional<Level> parse_level(std::string_view s);
std::optional<Category> parse_category(std::string_view s);

/// Categories whose nodes describe symptoms (everything but contributing factors).
bool is_symptom_category(Category c);

struct Section {
  std::string id;
  std::string title;
  std::string cue;
};

struct QuestionNode {
  std::string id;
  std::string section;
  Level level = Level::ILS;
  Category category = Category::affective_cognitive;
  std::string topic;
  std::string question_template;
  std::optional<std::string> group_id;
  std::optional<std::string> present_next;
  std::optional<std::string> absent_next;
};

struct SubStateGroup {
  std::string id;
  std::string section;
  std::vector<std::string> members;
  int threshold = 1;
  std::string positive_next;
  std::string negative_next;
};

struct TerminalDiagnosis {
  std::string code;
  std::string description;
  std::optional<Disorder> contributes;
  /// Episode flags this outcome exports to other machines (e.g. current_mde).
  std::vector<std::string> sets_flags;
};

struct ClauseRule {
  std::string id;
  std::string description;
  std::vector<std::string> all_of;
  std::vector<std::string> any_of;
  std::string terminal;
};

struct ClauseStage {
  std::string id;
  std::vector<std::string> sets;
  std::string fallback;
};

using EpisodeFlags = std::set<std::string>;

struct StateMachineDef {
  Disorder disorder = Disorder::MDD;
  std::string entry;
  std::vector<std::string> notes;
  std::map<std::string, Section> sections;
  std::map<std::string, QuestionNode> nodes;
  std::vector<std::string> node_order;  // document order
  std::map<std::string, SubStateGroup> groups;
  std::map<std::string, TerminalDiagnosis> terminals;
  std::vector<ClauseRule> rules;
  /// Flags injected from outside the machine (consulted by the rules).
  std::vector<std::string> clause_inputs;
  std::map<std::string, ClauseStage> stages;

  enum class RefKind { node, group, terminal, stage, unknown };
  RefKind classify(std::string_view ref) const;

  const QuestionNode& node(std::string_view id) const;
  const SubStateGroup& group(std::string_view id) const;
};

/// Parses a machine-definition document and validates it. Throws ParseError
/// (syntax or missing keys, with line/column when known) or ValidationError.
StateMachineDef load_machine_def(std::string_view document);
StateMachineDef load_machine_def_file(const std::filesystem::path& path);

/// Parses without running validate_machine (for tooling that reports issues).
StateMachineDef parse_machine_def(std::string_view document);

/// All invariant violations; empty iff the definition is sound (references
/// resolve, thresholds fit, every node reachable, every path terminates).
std::vector<std::string> validate_machine(const StateMachineDef& def);

/// One root-to-terminal route through a definition, with each group reduced to
/// its two outcomes and each stage branched over the injected flags.
struct EnumeratedPath {
  std::vector<std::string> steps;  // "A1+", "A00-", "D1_PAST_MANIC{past_mde}", ...
  std::string terminal;
};

/// Exhaustive path enumeration. Paths that revisit a state or dead-end are
/// reported through `problems`.
std::vector<EnumeratedPath> enumerate_paths(const StateMachineDef& def, std::vector<std::string>* problems = nullptr);

enum class GroupVerdict : std::uint8_t { positive, absent };
std::string_view to_string(GroupVerdict v);

GroupVerdict evaluate_group(int tally, const SubStateGroup& group);

/// Terminal of the first rule satisfied by `flags`, if any.
std::optional<std::string> resolve_clauses(const std::vector<ClauseRule>& rules, const EpisodeFlags& flags);

/// Bipolar determinative stage against the rules of a BD definition:
/// bipolar8 for a manic episode, else bipolar9 for a hypomanic plus a major
/// depressive episode, else nothing.
std::optional<std::string> resolve_bipolar(const StateMachineDef& bd_def, const EpisodeFlags& flags);

struct TransitionOutcome {
  enum class Kind { next_node, group_continues, terminal };
  Kind kind = Kind::next_node;
  /// Next node id, or the terminal code.
  std::string id;
  /// Set when this answer completed a group.
  std::optional<GroupVerdict> group_verdict;
};

/// Mutable traversal state of one machine within one session. Not thread
/// safe; may move between workers between turns.
class MachineRuntime {
 public:
  explicit MachineRuntime(std::shared_ptr<const StateMachineDef> def);

  const StateMachineDef& def() const { return *def_; }
  const std::shared_ptr<const StateMachineDef>& def_ptr() const { return def_; }

  bool terminated() const { return terminal_.has_value(); }
  const std::optional<std::string>& terminal() const { return terminal_; }

  /// Node awaiting an answer. Throws StateError once terminated.
  const QuestionNode& current_topic() const;

  /// Group containing the cursor, if any.
  const std::optional<std::string>& active_group() const { return active_group_; }

  /// Number of members of the active group visited before the current one.
  int position_in_group() const;

  /// Records an answer to the current node and moves the cursor. When
  /// `node_id` is given it must name the current, unvisited node.
  TransitionOutcome apply_response(Answer answer, Rng& rng, std::string_view node_id = {});

  /// Adds externally supplied episode flags (e.g. current_mde from the MDD
  /// machine). Only allowed before termination.
  void inject_flags(const EpisodeFlags& flags);

  const std::set<std::string>& visited() const { return visited_; }
  const std::vector<std::string>& visit_order() const { return visit_order_; }
  const std::map<std::string, Answer>& responses() const { return responses_; }
  const std::map<std::string, int>& group_tallies() const { return group_tallies_; }
  const EpisodeFlags& episode_flags() const { return flags_; }
  /// Verdicts of groups completed so far.
  const std::map<std::string, GroupVerdict>& group_verdicts() const { return group_verdicts_; }

 private:
  friend std::string localized_random_pick(const MachineRuntime& rt, Rng& rng);
  std::vector<std::string> unvisited_members() const;
  TransitionOutcome move_to(const std::string& ref, Rng& rng);

  std::shared_ptr<const StateMachineDef> def_;
  std::string current_;
  std::optional<std::string> active_group_;
  std::optional<std::string> terminal_;
  std::set<std::string> visited_;
  std::vector<std::string> visit_order_;
  std::map<std::string, Answer> responses_;
  std::map<std::string, int> group_tallies_;
  std::map<std::string, GroupVerdict> group_verdicts_;
  EpisodeFlags flags_;
};

MachineRuntime init_runtime(std::shared_ptr<const StateMachineDef> def);

/// Uniform choice among the unvisited members of the active group. Throws
/// StateError when the cursor is outside a group or the group is exhausted.
std::string localized_random_pick(const MachineRuntime& rt, Rng& rng);

/// Question text for a node. The first question of a group (and any
/// ungrouped question) carries the section's precise temporal cue; later
/// group questions use "recently".
std::string render_question(const StateMachineDef& def, const QuestionNode& node, int position_in_group);

inline constexpr std::string_view kLooseCue = "recently";

/// The four shipped machines, keyed by disorder.
struct MachineSet {
  std::map<Disorder, std::shared_ptr<const StateMachineDef>> defs;

  const StateMachineDef& at(Disorder d) const;
  std::vector<const StateMachineDef*> all() const;
};

/// Loads mdd.json, ad.json, bd.json and adhd.json from `dir`.
MachineSet load_machine_set(const std::filesystem::path& dir);

/// Union of the labels asserted by each machine's terminal.
ComorbidityProfile labels_from_terminals(const std::map<Disorder, std::string>& finals, const MachineSet& machines);

}  // namespace psydial
