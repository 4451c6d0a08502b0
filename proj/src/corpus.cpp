#include "corpus.hpp"

#include <fstream>
#include <sstream>
#include <tuple>

#include "text.hpp"

namespace psydial {

namespace {

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw IoError("cannot read " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno, e.byte);
    }
    try {
      f(j, lineno);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno, 1);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno, 1);
    }
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
}

std::string first_line_of(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  return {};
}

bool correct(const DialogueSession& s, const GoldLabels& gold) {
  const auto& key = gold.key == GoldLabels::Key::emr_id ? s.emr_id : s.session_id;
  auto it = gold.labels.find(key);
  return it != gold.labels.end() && it->second == s.predicted_labels;
}

}  // namespace

std::vector<DialogueSession> read_corpus(const std::filesystem::path& path) {
  std::vector<DialogueSession> out;
  for_each_line(path, [&](const json& j, std::size_t lineno) {
    auto s = session_from_json(j);
    if (auto issues = check_turn_invariants(s.turns); !issues.empty())
      throw ParseError("session " + s.session_id + ": " + issues.front(), lineno, 1);
    out.push_back(std::move(s));
  });
  return out;
}

GoldLabels load_gold(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("no such file or directory: " + path.string());
  GoldLabels g;
  bool session_keyed = false;
  if (path.extension() == ".jsonl") {
    try {
      const json first = json::parse(first_line_of(path));
      session_keyed = first.is_object() && first.contains("session_id") && first.contains("labels");
    } catch (const json::parse_error&) {
      // reported with a line number below
    }
  }
  if (session_keyed) {
    g.key = GoldLabels::Key::session_id;
    for_each_line(path, [&](const json& j, std::size_t) {
      if (!j.is_object() || !j.contains("session_id") || !j.at("session_id").is_string() || !j.contains("labels"))
        throw ParseError("gold entry needs a string session_id and labels");
      g.labels[j.at("session_id").get<std::string>()] = profile_from_json(j.at("labels"));
    });
    return g;
  }
  for (const auto& e : load_emrs(path)) g.labels[e.emr_id] = e.preliminary_diagnosis;
  return g;
}

AlignedLabels align(const std::vector<DialogueSession>& corpus, const GoldLabels& gold) {
  if (corpus.empty()) throw PreconditionError("corpus is empty");
  AlignedLabels out;
  std::vector<std::string> missing;
  for (const auto& s : corpus) {
    const auto& key = gold.key == GoldLabels::Key::emr_id ? s.emr_id : s.session_id;
    auto it = gold.labels.find(key);
    if (it == gold.labels.end()) {
      missing.push_back(key);
      continue;
    }
    out.session_ids.push_back(s.session_id);
    out.predicted.push_back(s.predicted_labels);
    out.gold.push_back(it->second);
  }
  if (!missing.empty()) {
    const char* what = gold.key == GoldLabels::Key::emr_id ? "EMR" : "session";
    std::vector<std::string> issues;
    if (out.predicted.empty()) issues.push_back(std::string("corpus and gold share no ") + what + " ids");
    issues.push_back(std::to_string(missing.size()) + " session(s) without gold labels");
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) issues.push_back(std::string("no gold for ") + what + " " + missing[i]);
    throw ValidationError(std::move(issues));
  }
  return out;
}

DiscordantPair discordant_by_session(const std::vector<DialogueSession>& treatment,
                                     const std::vector<DialogueSession>& baseline, const GoldLabels& gold) {
  std::map<std::string, const DialogueSession*> base;
  for (const auto& s : baseline) base[s.session_id] = &s;
  DiscordantPair d;
  for (const auto& s : treatment) {
    auto it = base.find(s.session_id);
    if (it == base.end()) continue;
    ++d.pairs;
    const bool a = correct(s, gold);
    const bool b = correct(*it->second, gold);
    if (a && !b) ++d.b;
    if (!a && b) ++d.c;
  }
  return d;
}

std::optional<DiscordantPair> discordant_by_strategy(const std::vector<DialogueSession>& corpus,
                                                     const GoldLabels& gold) {
  using Key = std::tuple<std::string, std::string, std::string, int>;
  std::map<Key, std::pair<const DialogueSession*, const DialogueSession*>> groups;
  for (const auto& s : corpus) {
    auto& slot = groups[{s.emr_id, s.fed.history_id, s.fed.experience_id, s.doctor_profile_id}];
    (s.strategy == Strategy::symptom_informed ? slot.first : slot.second) = &s;
  }
  DiscordantPair d;
  for (const auto& [key, p] : groups) {
    if (!p.first || !p.second) continue;
    ++d.pairs;
    const bool a = correct(*p.first, gold);
    const bool b = correct(*p.second, gold);
    if (a && !b) ++d.b;
    if (!a && b) ++d.c;
  }
  if (d.pairs == 0) return std::nullopt;
  return d;
}

}  // namespace psydial
