// Parsing, validation and path enumeration for machine-definition documents.

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "statemachine.hpp"

namespace psydial {

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view doc, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, doc.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (doc[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string get_string(const ordered_json& j, const char* key, const std::string& ctx, bool required = true) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ParseError(ctx + ": missing key '" + key + "'");
    return {};
  }
  if (!it->is_string()) throw ParseError(ctx + ": key '" + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> get_optional_string(const ordered_json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(ctx + ": key '" + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> get_string_list(const ordered_json& j, const char* key, const std::string& ctx) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw ParseError(ctx + ": key '" + key + "' must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(ctx + ": entries of '" + key + "' must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

const ordered_json& get_object(const ordered_json& j, const char* key, const std::string& ctx, bool required) {
  static const ordered_json kEmpty = ordered_json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ParseError(ctx + ": missing key '" + key + "'");
    return kEmpty;
  }
  if (!it->is_object()) throw ParseError(ctx + ": key '" + key + "' must be an object");
  return *it;
}

}  // namespace

StateMachineDef parse_machine_def(std::string_view document) {
  if (document.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ParseError("empty machine definition", 1, 1);
  ordered_json doc;
  try {
    doc = ordered_json::parse(document.begin(), document.end());
  } catch (const ordered_json::parse_error& e) {
    auto [line, col] = line_column(document, e.byte);
    throw ParseError(std::string("malformed machine definition: ") + e.what(), line, col);
  }
  if (!doc.is_object()) throw ParseError("machine definition must be an object", 1, 1);

  StateMachineDef def;
  const std::string dname = get_string(doc, "disorder", "machine");
  auto disorder = parse_disorder(dname);
  if (!disorder) throw ParseError("machine: unknown disorder '" + dname + "'");
  def.disorder = *disorder;
  def.entry = get_string(doc, "entry", "machine");
  def.notes = get_string_list(doc, "notes", "machine");

  for (const auto& [id, s] : get_object(doc, "sections", "machine", false).items()) {
    if (!s.is_object()) throw ParseError("section " + id + " must be an object");
    def.sections[id] = Section{id, get_string(s, "title", "section " + id, false), get_string(s, "cue", "section " + id, false)};
  }

  for (const auto& [id, n] : get_object(doc, "nodes", "machine", true).items()) {
    const std::string ctx = "node " + id;
    if (!n.is_object()) throw ParseError(ctx + " must be an object");
    QuestionNode q;
    q.id = id;
    q.section = get_string(n, "section", ctx, false);
    const auto level = get_string(n, "level", ctx);
    auto lv = parse_level(level);
    if (!lv) throw ParseError(ctx + ": unknown level '" + level + "'");
    q.level = *lv;
    const auto cat = get_string(n, "category", ctx);
    auto c = parse_category(cat);
    if (!c) throw ParseError(ctx + ": unknown category '" + cat + "'");
    q.category = *c;
    q.topic = get_string(n, "topic", ctx, false);
    q.question_template = get_string(n, "template", ctx);
    q.group_id = get_optional_string(n, "group", ctx);
    q.present_next = get_optional_string(n, "present_next", ctx);
    q.absent_next = get_optional_string(n, "absent_next", ctx);
    def.node_order.push_back(id);
    def.nodes.emplace(id, std::move(q));
  }

  for (const auto& [id, g] : get_object(doc, "groups", "machine", false).items()) {
    const std::string ctx = "group " + id;
    if (!g.is_object()) throw ParseError(ctx + " must be an object");
    SubStateGroup grp;
    grp.id = id;
    grp.section = get_string(g, "section", ctx, false);
    grp.members = get_string_list(g, "members", ctx);
    auto th = g.find("threshold");
    if (th == g.end() || !th->is_number_integer()) throw ParseError(ctx + ": threshold must be an integer");
    grp.threshold = th->get<int>();
    grp.positive_next = get_string(g, "positive_next", ctx);
    grp.negative_next = get_string(g, "negative_next", ctx);
    def.groups.emplace(id, std::move(grp));
  }

  for (const auto& [code, t] : get_object(doc, "terminals", "machine", true).items()) {
    const std::string ctx = "terminal " + code;
    if (!t.is_object()) throw ParseError(ctx + " must be an object");
    TerminalDiagnosis td;
    td.code = code;
    td.description = get_string(t, "description", ctx, false);
    if (auto c = get_optional_string(t, "contributes", ctx)) {
      auto d = parse_disorder(*c);
      if (!d) throw ParseError(ctx + ": unknown disorder '" + *c + "'");
      td.contributes = *d;
    }
    td.sets_flags = get_string_list(t, "sets", ctx);
    def.terminals.emplace(code, std::move(td));
  }

  const auto& clauses = get_object(doc, "clauses", "machine", false);
  if (auto it = clauses.find("rules"); it != clauses.end()) {
    if (!it->is_array()) throw ParseError("clauses: rules must be an array");
    for (const auto& r : *it) {
      if (!r.is_object()) throw ParseError("clauses: rule must be an object");
      ClauseRule rule;
      rule.id = get_string(r, "id", "rule");
      const std::string ctx = "rule " + rule.id;
      rule.description = get_string(r, "description", ctx, false);
      rule.all_of = get_string_list(r, "all_of", ctx);
      rule.any_of = get_string_list(r, "any_of", ctx);
      rule.terminal = get_string(r, "terminal", ctx);
      def.rules.push_back(std::move(rule));
    }
  }
  def.clause_inputs = get_string_list(clauses, "inputs", "clauses");
  for (const auto& [id, s] : get_object(clauses, "stages", "clauses", false).items()) {
    const std::string ctx = "stage " + id;
    if (!s.is_object()) throw ParseError(ctx + " must be an object");
    def.stages[id] = ClauseStage{id, get_string_list(s, "sets", ctx), get_string(s, "fallback", ctx)};
  }
  return def;
}

StateMachineDef load_machine_def(std::string_view document) {
  StateMachineDef def = parse_machine_def(document);
  auto issues = validate_machine(def);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return def;
}

StateMachineDef load_machine_def_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return load_machine_def(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
  }
}

// ---------------------------------------------------------------------------

namespace {

bool has_placeholder(const std::string& tmpl) {
  return tmpl.find("{cue}") != std::string::npos || tmpl.find("{Cue}") != std::string::npos;
}

void check_ref(const StateMachineDef& def, const std::string& ref, const std::string& from,
               std::vector<std::string>& issues) {
  using K = StateMachineDef::RefKind;
  switch (def.classify(ref)) {
    case K::unknown:
      issues.push_back(from + ": unresolved reference '" + ref + "'");
      break;
    case K::node: {
      const auto& n = def.nodes.at(ref);
      if (n.group_id)
        issues.push_back(from + ": successor '" + ref + "' is a member of group " + *n.group_id +
                         "; reference the group instead");
      break;
    }
    default:
      break;
  }
}

std::vector<std::string> successors(const StateMachineDef& def, const std::string& ref) {
  using K = StateMachineDef::RefKind;
  std::vector<std::string> out;
  switch (def.classify(ref)) {
    case K::node: {
      const auto& n = def.nodes.at(ref);
      if (n.present_next) out.push_back(*n.present_next);
      if (n.absent_next) out.push_back(*n.absent_next);
      break;
    }
    case K::group: {
      const auto& g = def.groups.at(ref);
      out.insert(out.end(), g.members.begin(), g.members.end());
      out.push_back(g.positive_next);
      out.push_back(g.negative_next);
      break;
    }
    case K::stage: {
      const auto& s = def.stages.at(ref);
      for (const auto& r : def.rules) out.push_back(r.terminal);
      out.push_back(s.fallback);
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_machine(const StateMachineDef& def) {
  using K = StateMachineDef::RefKind;
  std::vector<std::string> issues;

  // Identifiers must be unique across the four namespaces, otherwise a
  // successor reference would be ambiguous.
  std::map<std::string, int> seen;
  for (const auto& [id, _] : def.nodes) ++seen[id];
  for (const auto& [id, _] : def.groups) ++seen[id];
  for (const auto& [id, _] : def.terminals) ++seen[id];
  for (const auto& [id, _] : def.stages) ++seen[id];
  for (const auto& [id, count] : seen) {
    if (count > 1) issues.push_back("identifier '" + id + "' is used by more than one node, group, terminal or stage");
  }

  if (def.nodes.empty()) issues.push_back("definition has no nodes");
  if (def.terminals.empty()) issues.push_back("definition has no terminals");
  if (def.classify(def.entry) != K::node) {
    issues.push_back("entry '" + def.entry + "' is not a question node");
  } else if (def.nodes.at(def.entry).group_id) {
    issues.push_back("entry '" + def.entry + "' must not be a group member");
  }

  for (const auto& [id, n] : def.nodes) {
    const std::string from = "node " + id;
    if (!n.section.empty() && !def.sections.count(n.section))
      issues.push_back(from + ": unknown section '" + n.section + "'");
    if (n.question_template.find_first_not_of(" \t\r\n") == std::string::npos) issues.push_back(from + ": empty template");
    if (n.group_id) {
      auto g = def.groups.find(*n.group_id);
      if (g == def.groups.end()) {
        issues.push_back(from + ": unresolved group '" + *n.group_id + "'");
      } else if (std::find(g->second.members.begin(), g->second.members.end(), id) == g->second.members.end()) {
        issues.push_back(from + ": not listed among the members of group " + *n.group_id);
      }
      if (n.level != Level::BLS) issues.push_back(from + ": group members must be BLS nodes");
      if (n.present_next || n.absent_next)
        issues.push_back(from + ": group members take their successor from the group");
      if (!has_placeholder(n.question_template))
        issues.push_back(from + ": group member template lacks a {cue} placeholder");
    } else {
      if (!n.present_next || !n.absent_next) {
        issues.push_back(from + ": ungrouped node needs both present_next and absent_next");
      }
      if (n.present_next) check_ref(def, *n.present_next, from, issues);
      if (n.absent_next) check_ref(def, *n.absent_next, from, issues);
    }
  }

  for (const auto& [id, g] : def.groups) {
    const std::string from = "group " + id;
    if (g.members.empty()) issues.push_back(from + ": no members");
    if (g.threshold < 1) issues.push_back(from + ": threshold must be positive");
    if (g.threshold > static_cast<int>(g.members.size()))
      issues.push_back(from + ": threshold exceeds group size (" + std::to_string(g.threshold) + " > " +
                       std::to_string(g.members.size()) + ")");
    std::set<std::string> uniq;
    for (const auto& m : g.members) {
      if (!uniq.insert(m).second) issues.push_back(from + ": member '" + m + "' listed twice");
      auto n = def.nodes.find(m);
      if (n == def.nodes.end()) {
        issues.push_back(from + ": unresolved member '" + m + "'");
      } else if (n->second.group_id != id) {
        issues.push_back(from + ": member '" + m + "' does not name this group");
      }
    }
    check_ref(def, g.positive_next, from, issues);
    check_ref(def, g.negative_next, from, issues);
  }

  std::set<std::string> settable(def.clause_inputs.begin(), def.clause_inputs.end());
  for (const auto& [id, s] : def.stages) {
    settable.insert(s.sets.begin(), s.sets.end());
    if (def.classify(s.fallback) != K::terminal)
      issues.push_back("stage " + id + ": fallback '" + s.fallback + "' is not a terminal");
  }
  for (const auto& r : def.rules) {
    if (def.classify(r.terminal) != K::terminal)
      issues.push_back("rule " + r.id + ": unresolved terminal '" + r.terminal + "'");
    if (r.all_of.empty() && r.any_of.empty()) issues.push_back("rule " + r.id + ": has no conditions");
    for (const auto* list : {&r.all_of, &r.any_of}) {
      for (const auto& f : *list) {
        if (!settable.count(f)) issues.push_back("rule " + r.id + ": flag '" + f + "' is never set");
      }
    }
  }
  if (!def.stages.empty() && def.rules.empty()) issues.push_back("stages are declared but there are no rules");

  if (!issues.empty()) return issues;

  // Reachability by breadth-first search from the entry.
  std::set<std::string> reached{def.entry};
  std::deque<std::string> queue{def.entry};
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (auto& next : successors(def, cur)) {
      if (reached.insert(next).second) queue.push_back(next);
    }
  }
  for (const auto& id : def.node_order) {
    if (!reached.count(id)) issues.push_back("node " + id + " is unreachable from entry " + def.entry);
  }
  for (const auto& [id, _] : def.groups) {
    if (!reached.count(id)) issues.push_back("group " + id + " is unreachable from entry " + def.entry);
  }
  for (const auto& [id, _] : def.stages) {
    if (!reached.count(id)) issues.push_back("stage " + id + " is unreachable from entry " + def.entry);
  }

  std::vector<std::string> problems;
  enumerate_paths(def, &problems);
  issues.insert(issues.end(), problems.begin(), problems.end());
  return issues;
}

// ---------------------------------------------------------------------------

namespace {

struct PathWalker {
  const StateMachineDef& def;
  std::vector<EnumeratedPath>& out;
  std::vector<std::string>* problems;
  std::vector<std::string> steps;
  std::set<std::string> on_path;
  EpisodeFlags flags;

  void report(const std::string& msg) {
    if (problems && std::find(problems->begin(), problems->end(), msg) == problems->end())
      problems->push_back(msg);
  }

  void finish(const std::string& terminal) {
    out.push_back(EnumeratedPath{steps, terminal});
  }

  void walk(const std::string& ref) {
    using K = StateMachineDef::RefKind;
    const auto kind = def.classify(ref);
    if (kind == K::terminal) {
      finish(ref);
      return;
    }
    if (kind == K::unknown) {
      report("path dead-ends at unresolved reference '" + ref + "'");
      return;
    }
    if (on_path.count(ref)) {
      report("cycle: '" + ref + "' can be revisited");
      return;
    }
    on_path.insert(ref);
    if (kind == K::node) {
      const auto& n = def.nodes.at(ref);
      branch(ref + "+", n.present_next);
      branch(ref + "-", n.absent_next);
    } else if (kind == K::group) {
      const auto& g = def.groups.at(ref);
      // Members are leaves of the group; their answers only matter through
      // the verdict, so they are marked and the group is cut into 2 outcomes.
      for (const auto& m : g.members) {
        if (on_path.count(m)) report("cycle: group member '" + m + "' can be revisited");
      }
      branch(ref + "+", g.positive_next);
      branch(ref + "-", g.negative_next);
    } else {
      const auto& st = def.stages.at(ref);
      const std::size_t n_inputs = def.clause_inputs.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << n_inputs); ++mask) {
        EpisodeFlags local = flags;
        local.insert(st.sets.begin(), st.sets.end());
        std::string label = ref + "{";
        for (std::size_t i = 0; i < n_inputs; ++i) {
          if (mask & (std::size_t{1} << i)) {
            local.insert(def.clause_inputs[i]);
            label += (label.back() == '{' ? "" : ",") + def.clause_inputs[i];
          }
        }
        label += "}";
        auto resolved = resolve_clauses(def.rules, local);
        steps.push_back(label);
        finish(resolved ? *resolved : st.fallback);
        steps.pop_back();
      }
    }
    on_path.erase(ref);
  }

  void branch(const std::string& label, const std::optional<std::string>& next) {
    if (!next) {
      report("path dead-ends after " + label);
      return;
    }
    steps.push_back(label);
    walk(*next);
    steps.pop_back();
  }
};

}  // namespace

std::vector<EnumeratedPath> enumerate_paths(const StateMachineDef& def, std::vector<std::string>* problems) {
  std::vector<EnumeratedPath> out;
  PathWalker walker{def, out, problems, {}, {}, {}};
  walker.walk(def.entry);
  return out;
}

}  // namespace psydial
