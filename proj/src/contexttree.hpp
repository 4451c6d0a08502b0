#pragma once

// Background-inquiry tree asked around the diagnostic machines. Family and
// personal history leaves are required before a dialogue may end; experience
// leaves are optional and only asked when the tool agent triggers them.

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"
#include "rng.hpp"

namespace psydial {

enum class Branch : std::uint8_t { family_history, personal_history, experience_inquiry };
std::string_view to_string(Branch b);
std::optional<Branch> parse_branch(std::string_view s);

struct ContextLeaf {
  std::string id;
  Branch branch = Branch::family_history;
  std::string topic;
  std::string question_template;
  /// Leaves tagged with a gender apply only to patients of that gender.
  std::optional<Gender> gender;
  /// EMR section (or "experience" for the FED narrative) the scripted
  /// patient answers from.
  std::string answer_from;
};

struct ContextTreeDef {
  std::vector<ContextLeaf> leaves;  // document order within each branch

  const ContextLeaf& leaf(std::string_view id) const;
  bool has_leaf(std::string_view id) const;
  std::vector<const ContextLeaf*> branch(Branch b) const;
};

/// Throws ParseError for malformed documents and ValidationError when a
/// branch is missing or the gender coverage rule fails.
ContextTreeDef load_context_tree(std::string_view document);
ContextTreeDef load_context_tree_file(const std::filesystem::path& path);
std::vector<std::string> validate_context_tree(const ContextTreeDef& def);

class ContextTreeRuntime {
 public:
  ContextTreeRuntime(std::shared_ptr<const ContextTreeDef> def, Gender gender);

  const ContextTreeDef& def() const { return *def_; }
  Gender gender() const { return gender_; }

  /// Required leaves for this patient, in definition order.
  const std::vector<std::string>& required() const { return required_; }
  std::vector<std::string> unvisited_required() const;
  bool applicable(const ContextLeaf& leaf) const;

  /// Called by the orchestrator once the patient's reply is recorded.
  void mark_visited(std::string_view leaf_id);
  const std::set<std::string>& visited() const { return visited_; }

  int experience_triggered_count() const { return experience_count_; }

 private:
  friend std::optional<ContextLeaf> trigger_experience_branch(bool decision, ContextTreeRuntime& rt);

  std::shared_ptr<const ContextTreeDef> def_;
  Gender gender_;
  std::vector<std::string> required_;
  std::set<std::string> visited_;
  int experience_count_ = 0;
};

ContextTreeRuntime init_tree(std::shared_ptr<const ContextTreeDef> def, Gender gender);

/// Uniform choice over unvisited required leaves. Does not mark the leaf.
/// Throws StateError when every required leaf has been visited.
const ContextLeaf& next_leaf(const ContextTreeRuntime& rt, Rng& rng);

/// When `decision` holds, the next unused experience leaf (and the trigger
/// count goes up); nothing once the branch is exhausted.
std::optional<ContextLeaf> trigger_experience_branch(bool decision, ContextTreeRuntime& rt);

bool required_complete(const ContextTreeRuntime& rt);

}  // namespace psydial
