#include "contexttree.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace psydial {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::family_history: return "family_history";
    case Branch::personal_history: return "personal_history";
    case Branch::experience_inquiry: return "experience_inquiry";
  }
  return "?";
}

std::optional<Branch> parse_branch(std::string_view s) {
  for (auto b : {Branch::family_history, Branch::personal_history, Branch::experience_inquiry}) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

const ContextLeaf& ContextTreeDef::leaf(std::string_view id) const {
  for (const auto& l : leaves) {
    if (l.id == id) return l;
  }
  throw PreconditionError("unknown context-tree leaf '" + std::string(id) + "'");
}

bool ContextTreeDef::has_leaf(std::string_view id) const {
  return std::any_of(leaves.begin(), leaves.end(), [&](const auto& l) { return l.id == id; });
}

std::vector<const ContextLeaf*> ContextTreeDef::branch(Branch b) const {
  std::vector<const ContextLeaf*> out;
  for (const auto& l : leaves) {
    if (l.branch == b) out.push_back(&l);
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 6> kAnswerSources{"family_history",  "personal_history", "medical_history",
                                                         "medical_condition", "chief_complaint", "experience"};

}  // namespace

ContextTreeDef load_context_tree(std::string_view document) {
  if (document.find_first_not_of(" \t\r\n") == std::string_view::npos) throw ParseError("empty context tree", 1, 1);
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed context tree: ") + e.what());
  }
  auto br = doc.find("branches");
  if (!doc.is_object() || br == doc.end() || !br->is_object())
    throw ParseError("context tree: missing object 'branches'");

  ContextTreeDef def;
  std::vector<std::string> issues;
  // Branch order in the document is irrelevant; leaves are grouped by the
  // fixed branch order so runs do not depend on key ordering.
  for (auto b : {Branch::family_history, Branch::personal_history, Branch::experience_inquiry}) {
    auto it = br->find(std::string(to_string(b)));
    if (it == br->end()) {
      issues.push_back("context tree: missing branch " + std::string(to_string(b)));
      continue;
    }
    if (!it->is_array()) throw ParseError("context tree: branch " + std::string(to_string(b)) + " must be an array");
    for (const auto& lj : *it) {
      if (!lj.is_object()) throw ParseError("context tree: leaf must be an object");
      ContextLeaf leaf;
      leaf.branch = b;
      auto str = [&](const char* key, bool required) -> std::string {
        auto f = lj.find(key);
        if (f == lj.end() || f->is_null()) {
          if (required) throw ParseError(std::string("context tree: leaf missing '") + key + "'");
          return {};
        }
        if (!f->is_string()) throw ParseError(std::string("context tree: leaf key '") + key + "' must be a string");
        return f->get<std::string>();
      };
      leaf.id = str("id", true);
      leaf.topic = str("topic", false);
      leaf.question_template = str("template", true);
      leaf.answer_from = str("answer_from", false);
      if (leaf.answer_from.empty())
        leaf.answer_from = b == Branch::experience_inquiry ? "experience" : std::string(to_string(b));
      if (auto g = str("gender", false); !g.empty()) {
        auto parsed = parse_gender(g);
        if (!parsed || *parsed == Gender::unspecified)
          throw ParseError("context tree: leaf " + leaf.id + " has invalid gender '" + g + "'");
        leaf.gender = *parsed;
      }
      def.leaves.push_back(std::move(leaf));
    }
  }
  for (const auto& key : br->items()) {
    if (!parse_branch(key.key())) issues.push_back("context tree: unknown branch " + key.key());
  }
  auto more = validate_context_tree(def);
  for (auto& m : more) {
    if (std::find(issues.begin(), issues.end(), m) == issues.end()) issues.push_back(std::move(m));
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return def;
}

ContextTreeDef load_context_tree_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_context_tree(ss.str());
}

std::vector<std::string> validate_context_tree(const ContextTreeDef& def) {
  std::vector<std::string> issues;
  for (auto b : {Branch::family_history, Branch::personal_history, Branch::experience_inquiry}) {
    if (def.branch(b).empty()) issues.push_back("context tree: missing branch " + std::string(to_string(b)));
  }
  std::set<std::string> ids;
  for (const auto& l : def.leaves) {
    if (!ids.insert(l.id).second) issues.push_back("context tree: duplicate leaf id " + l.id);
    if (l.gender && l.branch != Branch::personal_history)
      issues.push_back("context tree: leaf " + l.id + " is gendered outside personal_history");
    if (std::find(kAnswerSources.begin(), kAnswerSources.end(), l.answer_from) == kAnswerSources.end())
      issues.push_back("context tree: leaf " + l.id + " answers from unknown source '" + l.answer_from + "'");
  }
  for (auto g : {Gender::male, Gender::female}) {
    auto personal = def.branch(Branch::personal_history);
    bool covered = std::any_of(personal.begin(), personal.end(),
                               [&](const ContextLeaf* l) { return !l->gender || *l->gender == g; });
    if (!personal.empty() && !covered)
      issues.push_back("context tree: no personal_history leaf applies to " + std::string(to_string(g)) + " patients");
  }
  return issues;
}

// ---------------------------------------------------------------------------

ContextTreeRuntime::ContextTreeRuntime(std::shared_ptr<const ContextTreeDef> def, Gender gender)
    : def_(std::move(def)), gender_(gender) {
  if (!def_) throw PreconditionError("context tree runtime needs a definition");
  auto issues = validate_context_tree(*def_);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  for (const auto& l : def_->leaves) {
    if (l.branch != Branch::experience_inquiry && applicable(l)) required_.push_back(l.id);
  }
}

bool ContextTreeRuntime::applicable(const ContextLeaf& leaf) const {
  return !leaf.gender || *leaf.gender == gender_;
}

std::vector<std::string> ContextTreeRuntime::unvisited_required() const {
  std::vector<std::string> out;
  for (const auto& id : required_) {
    if (!visited_.count(id)) out.push_back(id);
  }
  return out;
}

void ContextTreeRuntime::mark_visited(std::string_view leaf_id) {
  const auto& leaf = def_->leaf(leaf_id);
  if (!applicable(leaf)) throw StateError("leaf " + leaf.id + " does not apply to this patient");
  visited_.insert(leaf.id);
}

ContextTreeRuntime init_tree(std::shared_ptr<const ContextTreeDef> def, Gender gender) {
  return ContextTreeRuntime(std::move(def), gender);
}

const ContextLeaf& next_leaf(const ContextTreeRuntime& rt, Rng& rng) {
  auto pool = rt.unvisited_required();
  if (pool.empty()) throw StateError("every required context-tree leaf has been visited");
  return rt.def().leaf(pool[rng.uniform_index(pool.size())]);
}

std::optional<ContextLeaf> trigger_experience_branch(bool decision, ContextTreeRuntime& rt) {
  if (!decision) return std::nullopt;
  auto leaves = rt.def().branch(Branch::experience_inquiry);
  if (rt.experience_count_ >= static_cast<int>(leaves.size())) return std::nullopt;
  ContextLeaf leaf = *leaves[static_cast<std::size_t>(rt.experience_count_)];
  ++rt.experience_count_;
  return leaf;
}

bool required_complete(const ContextTreeRuntime& rt) { return rt.unvisited_required().empty(); }

}  // namespace psydial
