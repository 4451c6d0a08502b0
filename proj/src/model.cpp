#include "model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "knowledge.hpp"

namespace psydial {

ParseError::ParseError(std::string what, std::size_t line, std::size_t column)
    : Error(line == 0 ? std::move(what)
                      : what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
      line_(line),
      column_(column) {}

namespace {
std::string join_issues(const std::vector<std::string>& issues) {
  std::string out;
  for (const auto& i : issues) {
    if (!out.empty()) out += "; ";
    out += i;
  }
  return out;
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

// ---------------------------------------------------------------------------

std::string_view to_string(Disorder d) {
  switch (d) {
    case Disorder::MDD: return "MDD";
    case Disorder::AD: return "AD";
    case Disorder::BD: return "BD";
    case Disorder::ADHD: return "ADHD";
  }
  return "?";
}

std::optional<Disorder> parse_disorder(std::string_view s) {
  for (auto d : kAllDisorders) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

ComorbidityProfile::ComorbidityProfile(std::initializer_list<Disorder> labels) {
  for (auto d : labels) insert(d);
}

std::size_t ComorbidityProfile::size() const {
  std::size_t n = 0;
  for (auto d : kAllDisorders) n += contains(d) ? 1 : 0;
  return n;
}

std::vector<Disorder> ComorbidityProfile::labels() const {
  std::vector<Disorder> out;
  for (auto d : kAllDisorders) {
    if (contains(d)) out.push_back(d);
  }
  return out;
}

std::string to_string(const ComorbidityProfile& p) {
  std::string out = "{";
  for (auto d : p.labels()) {
    if (out.size() > 1) out += ",";
    out += to_string(d);
  }
  return out + "}";
}

json to_json(const ComorbidityProfile& p) {
  json arr = json::array();
  for (auto d : p.labels()) arr.push_back(std::string(to_string(d)));
  return arr;
}

ComorbidityProfile profile_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("label set must be an array");
  ComorbidityProfile p;
  for (const auto& v : j) {
    if (!v.is_string()) throw ParseError("label must be a string");
    auto d = parse_disorder(v.get<std::string>());
    if (!d) throw ParseError("unknown disorder label '" + v.get<std::string>() + "'");
    p.insert(*d);
  }
  return p;
}

const std::array<ComorbidityProfile, 6>& eligible_combinations() {
  using D = Disorder;
  static const std::array<ComorbidityProfile, 6> kCombos{
      ComorbidityProfile{D::AD, D::MDD},         ComorbidityProfile{D::BD, D::MDD},
      ComorbidityProfile{D::ADHD, D::AD, D::MDD}, ComorbidityProfile{D::ADHD, D::MDD},
      ComorbidityProfile{D::AD, D::BD, D::MDD},  ComorbidityProfile{D::ADHD, D::AD},
  };
  return kCombos;
}

bool is_dataset_eligible(const ComorbidityProfile& p) {
  const auto& combos = eligible_combinations();
  return std::find(combos.begin(), combos.end(), p) != combos.end();
}

// ---------------------------------------------------------------------------

std::string_view to_string(Answer a) { return a == Answer::present ? "present" : "absent"; }

std::optional<Answer> parse_answer(std::string_view s) {
  if (s == "present") return Answer::present;
  if (s == "absent") return Answer::absent;
  return std::nullopt;
}

std::string_view to_string(Role r) { return r == Role::doctor ? "doctor" : "patient"; }

std::string_view to_string(Strategy s) { return s == Strategy::random ? "random" : "symptom_informed"; }

std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "symptom_informed") return Strategy::symptom_informed;
  return std::nullopt;
}

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  if (s == "unspecified") return Gender::unspecified;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// EMR

namespace {

const json& require(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(ctx + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key, const std::string& ctx) {
  const auto& v = require(j, key, ctx);
  if (!v.is_string()) throw ParseError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

constexpr std::array<const char*, 5> kTextSections{"chief_complaint", "medical_condition", "medical_history",
                                                    "personal_history", "family_history"};

}  // namespace

json to_json(const Emr& emr) {
  ordered_json demo;
  demo["gender"] = std::string(to_string(emr.demographic.gender));
  demo["age"] = emr.demographic.age;
  demo["education"] = emr.demographic.education;
  demo["marital_status"] = emr.demographic.marital_status;
  demo["occupation"] = emr.demographic.occupation;

  ordered_json j;
  j["emr_id"] = emr.emr_id;
  j["demographic"] = demo;
  j["chief_complaint"] = emr.chief_complaint;
  j["medical_condition"] = emr.medical_condition;
  j["medical_history"] = emr.medical_history;
  j["personal_history"] = emr.personal_history;
  j["family_history"] = emr.family_history;
  j["preliminary_diagnosis"] = to_json(emr.preliminary_diagnosis);
  j["symptom_ids"] = emr.symptom_ids;
  return json::parse(j.dump());
}

Emr emr_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("EMR must be an object");
  Emr e;
  e.emr_id = require_string(j, "emr_id", "EMR");
  const std::string ctx = "EMR " + e.emr_id;
  const auto& demo = require(j, "demographic", ctx);
  if (!demo.is_object()) throw ParseError(ctx + ": demographic must be an object");
  auto g = parse_gender(require_string(demo, "gender", ctx));
  if (!g) throw ParseError(ctx + ": gender must be male, female or unspecified");
  e.demographic.gender = *g;
  const auto& age = require(demo, "age", ctx);
  if (!age.is_number_integer()) throw ParseError(ctx + ": age must be an integer");
  e.demographic.age = age.get<int>();
  e.demographic.education = require_string(demo, "education", ctx);
  e.demographic.marital_status = require_string(demo, "marital_status", ctx);
  e.demographic.occupation = require_string(demo, "occupation", ctx);
  e.chief_complaint = require_string(j, "chief_complaint", ctx);
  e.medical_condition = require_string(j, "medical_condition", ctx);
  e.medical_history = require_string(j, "medical_history", ctx);
  e.personal_history = require_string(j, "personal_history", ctx);
  e.family_history = require_string(j, "family_history", ctx);
  e.preliminary_diagnosis = profile_from_json(require(j, "preliminary_diagnosis", ctx));
  const auto& ids = require(j, "symptom_ids", ctx);
  if (!ids.is_array()) throw ParseError(ctx + ": symptom_ids must be an array");
  for (const auto& s : ids) {
    if (!s.is_string()) throw ParseError(ctx + ": symptom ids must be strings");
    e.symptom_ids.insert(s.get<std::string>());
  }
  return e;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
}

}  // namespace

std::vector<Emr> load_emrs(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IoError("no such file or directory: " + path.string());
  std::vector<Emr> out;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(emr_from_json(parse_json_text(read_file(f), f.string())));
    return out;
  }
  const std::string text = read_file(path);
  if (path.extension() == ".jsonl") {
    std::istringstream lines(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(emr_from_json(json::parse(line)));
      } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), lineno, e.byte);
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), lineno, 1);
      }
    }
    return out;
  }
  const json doc = parse_json_text(text, path.string());
  if (doc.is_array()) {
    for (const auto& e : doc) out.push_back(emr_from_json(e));
  } else {
    out.push_back(emr_from_json(doc));
  }
  return out;
}

std::vector<std::string> validate_emr(const Emr& emr, const DsdKg& kg) {
  std::vector<std::string> v;
  const std::string who = "EMR " + (emr.emr_id.empty() ? std::string("<no id>") : emr.emr_id);
  if (emr.emr_id.empty()) v.push_back(who + ": emr_id is empty");
  if (emr.demographic.age <= 0) v.push_back(who + ": age must be positive");
  const std::array<std::pair<const char*, const std::string*>, 3> demo_fields{{
      {"education", &emr.demographic.education},
      {"marital_status", &emr.demographic.marital_status},
      {"occupation", &emr.demographic.occupation},
  }};
  for (const auto& [name, value] : demo_fields) {
    if (value->find_first_not_of(" \t\r\n") == std::string::npos)
      v.push_back(who + ": demographic." + name + " is empty");
  }
  const std::array<const std::string*, 5> sections{&emr.chief_complaint, &emr.medical_condition,
                                                   &emr.medical_history, &emr.personal_history,
                                                   &emr.family_history};
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (sections[i]->find_first_not_of(" \t\r\n") == std::string::npos)
      v.push_back(who + ": section " + kTextSections[i] + " is empty");
  }
  if (emr.preliminary_diagnosis.empty()) v.push_back(who + ": preliminary_diagnosis is empty");
  for (const auto& s : emr.symptom_ids) {
    if (!kg.knows(s)) v.push_back(who + ": unknown symptom id " + s);
  }
  for (auto d : emr.preliminary_diagnosis.labels()) {
    auto it = kg.edges.find(d);
    bool supported = false;
    if (it != kg.edges.end()) {
      for (const auto& s : emr.symptom_ids) {
        if (it->second.count(s)) {
          supported = true;
          break;
        }
      }
    }
    if (!supported)
      v.push_back(who + ": diagnosis " + std::string(to_string(d)) + " has no supporting symptom in symptom_ids");
  }
  return v;
}

// ---------------------------------------------------------------------------

std::vector<AnnotatedUser> filter_users(const std::vector<AnnotatedUser>& users) {
  std::vector<AnnotatedUser> out;
  std::copy_if(users.begin(), users.end(), std::back_inserter(out), [](const AnnotatedUser& u) {
    return u.symptom_post_count >= kMinSymptomPosts && u.distinct_symptom_count >= kMinDistinctSymptoms;
  });
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const FedNarrative& fed) {
  ordered_json j;
  j["emr_id"] = fed.emr_id;
  j["history_id"] = fed.history_id;
  j["experience_id"] = fed.experience_id;
  j["narrative"] = fed.narrative;
  return json::parse(j.dump());
}

FedNarrative fed_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("fed must be an object");
  FedNarrative f;
  f.emr_id = require_string(j, "emr_id", "fed");
  f.history_id = require_string(j, "history_id", "fed");
  f.experience_id = require_string(j, "experience_id", "fed");
  f.narrative = require_string(j, "narrative", "fed");
  return f;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Verbosity v) {
  switch (v) {
    case Verbosity::terse: return "terse";
    case Verbosity::moderate: return "moderate";
    case Verbosity::verbose: return "verbose";
  }
  return "moderate";
}

std::string_view to_string(DiagnosticSpeed s) { return s == DiagnosticSpeed::fast ? "fast" : "deliberate"; }

std::string_view to_string(ExplanationFrequency f) { return f == ExplanationFrequency::low ? "low" : "high"; }

const std::array<DoctorProfile, 5>& builtin_doctor_profiles() {
  static const std::array<DoctorProfile, 5> kProfiles{{
      {1, "30-39", "general adult psychiatry", "warm and reassuring", Verbosity::moderate,
       DiagnosticSpeed::deliberate, ExplanationFrequency::high, 200,
       {"Thank you for telling me.", "That sounds hard.", "I appreciate you sharing that.",
        "I can hear how much this weighs on you."}},
      {2, "50-59", "mood disorders", "calm and matter-of-fact", Verbosity::terse, DiagnosticSpeed::fast,
       ExplanationFrequency::low, 140, {"I see.", "Understood.", "Okay.", "Thanks."}},
      {3, "40-49", "anxiety and stress disorders", "gentle and patient", Verbosity::verbose,
       DiagnosticSpeed::deliberate, ExplanationFrequency::high, 280,
       {"Take your time, there is no rush.", "It makes sense that you would feel that way.",
        "Many people go through something similar.", "Thank you for being so open with me."}},
      {4, "20-29", "neurodevelopmental disorders", "friendly and encouraging", Verbosity::moderate,
       DiagnosticSpeed::fast, ExplanationFrequency::low, 180,
       {"Got it, thanks.", "That is really helpful.", "Good to know.", "Thanks for explaining."}},
      {5, "60-69", "consultation-liaison psychiatry", "analytical and precise", Verbosity::verbose,
       DiagnosticSpeed::deliberate, ExplanationFrequency::high, 260,
       {"Let me make sure I understand.", "That is an important detail.", "Thank you, that helps me.",
        "I want to build a clear picture."}},
  }};
  return kProfiles;
}

const DoctorProfile& doctor_profile(int profile_id) {
  const auto& all = builtin_doctor_profiles();
  if (profile_id < 1 || profile_id > static_cast<int>(all.size()))
    throw PreconditionError("doctor profile id must be in 1..5, got " + std::to_string(profile_id));
  return all[static_cast<std::size_t>(profile_id - 1)];
}

// ---------------------------------------------------------------------------

ordered_json to_json(const DialogueSession& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["emr_id"] = s.emr_id;
  ordered_json fed;
  fed["emr_id"] = s.fed.emr_id;
  fed["history_id"] = s.fed.history_id;
  fed["experience_id"] = s.fed.experience_id;
  fed["narrative"] = s.fed.narrative;
  j["fed"] = fed;
  j["doctor_profile_id"] = s.doctor_profile_id;
  j["strategy"] = std::string(to_string(s.strategy));
  j["rng_seed"] = s.rng_seed;
  ordered_json turns = ordered_json::array();
  for (const auto& t : s.turns) {
    ordered_json tj;
    tj["index"] = t.index;
    tj["role"] = std::string(to_string(t.role));
    tj["text"] = t.text;
    tj["topic_state"] = t.topic_state ? ordered_json(*t.topic_state) : ordered_json(nullptr);
    tj["classified_response"] =
        t.classified_response ? ordered_json(std::string(to_string(*t.classified_response))) : ordered_json(nullptr);
    turns.push_back(std::move(tj));
  }
  j["turns"] = std::move(turns);
  ordered_json finals = ordered_json::object();
  for (auto d : kAllDisorders) {
    auto it = s.final_diagnoses.find(d);
    if (it != s.final_diagnoses.end()) finals[std::string(to_string(d))] = it->second;
  }
  j["final_diagnoses"] = std::move(finals);
  ordered_json labels = ordered_json::array();
  for (auto d : s.predicted_labels.labels()) labels.push_back(std::string(to_string(d)));
  j["predicted_labels"] = std::move(labels);
  j["eligible"] = is_dataset_eligible(s.predicted_labels);
  return j;
}

DialogueSession session_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("session must be an object");
  static constexpr std::array<const char*, 10> kFields{"session_id", "emr_id",     "fed",
                                                       "doctor_profile_id", "strategy", "rng_seed",
                                                       "turns",      "final_diagnoses", "predicted_labels",
                                                       "eligible"};
  for (const char* f : kFields) {
    if (!j.contains(f)) throw ParseError(std::string("session: missing field '") + f + "'");
  }
  DialogueSession s;
  s.session_id = require_string(j, "session_id", "session");
  const std::string ctx = "session " + s.session_id;
  s.emr_id = require_string(j, "emr_id", ctx);
  s.fed = fed_from_json(j.at("fed"));
  if (!j.at("doctor_profile_id").is_number_integer()) throw ParseError(ctx + ": doctor_profile_id must be an integer");
  s.doctor_profile_id = j.at("doctor_profile_id").get<int>();
  auto strat = parse_strategy(require_string(j, "strategy", ctx));
  if (!strat) throw ParseError(ctx + ": unknown strategy");
  s.strategy = *strat;
  if (!j.at("rng_seed").is_number_unsigned() && !j.at("rng_seed").is_number_integer())
    throw ParseError(ctx + ": rng_seed must be an integer");
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const auto& turns = j.at("turns");
  if (!turns.is_array()) throw ParseError(ctx + ": turns must be an array");
  for (const auto& tj : turns) {
    if (!tj.is_object()) throw ParseError(ctx + ": turn must be an object");
    DialogueTurn t;
    if (!tj.contains("index") || !tj.at("index").is_number_integer()) throw ParseError(ctx + ": turn index missing");
    t.index = tj.at("index").get<std::size_t>();
    const auto role = require_string(tj, "role", ctx);
    if (role == "doctor") {
      t.role = Role::doctor;
    } else if (role == "patient") {
      t.role = Role::patient;
    } else {
      throw ParseError(ctx + ": unknown role '" + role + "'");
    }
    t.text = require_string(tj, "text", ctx);
    if (tj.contains("topic_state") && !tj.at("topic_state").is_null())
      t.topic_state = tj.at("topic_state").get<std::string>();
    if (tj.contains("classified_response") && !tj.at("classified_response").is_null()) {
      auto a = parse_answer(tj.at("classified_response").get<std::string>());
      if (!a) throw ParseError(ctx + ": bad classified_response");
      t.classified_response = *a;
    }
    s.turns.push_back(std::move(t));
  }
  const auto& finals = j.at("final_diagnoses");
  if (!finals.is_object()) throw ParseError(ctx + ": final_diagnoses must be an object");
  for (const auto& [k, v] : finals.items()) {
    auto d = parse_disorder(k);
    if (!d || !v.is_string()) throw ParseError(ctx + ": bad final_diagnoses entry '" + k + "'");
    s.final_diagnoses[*d] = v.get<std::string>();
  }
  s.predicted_labels = profile_from_json(j.at("predicted_labels"));
  return s;
}

std::vector<std::string> check_turn_invariants(const std::vector<DialogueTurn>& turns) {
  std::vector<std::string> issues;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (t.index != i) issues.push_back("turn " + std::to_string(i) + " has index " + std::to_string(t.index));
    const Role expected = i % 2 == 0 ? Role::doctor : Role::patient;
    if (t.role != expected)
      issues.push_back("turn " + std::to_string(i) + " should be " + std::string(to_string(expected)));
    if (t.classified_response && t.role != Role::patient)
      issues.push_back("turn " + std::to_string(i) + " is a doctor turn with a classified response");
  }
  return issues;
}

}  // namespace psydial
