#include "agents.hpp"

#include <algorithm>
#include <fstream>

#include "text.hpp"

namespace psydial {

std::vector<DialogueTurn> recent_window(const std::vector<DialogueTurn>& turns, std::size_t k) {
  if (k < kMinViewWindow) throw PreconditionError("conversation window must hold at least 2 turns");
  const std::size_t start = turns.size() > k ? turns.size() - k : 0;
  return {turns.begin() + static_cast<std::ptrdiff_t>(start), turns.end()};
}

std::vector<std::string> description_keywords(std::string_view description, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (auto& w : text::words(description)) {
    if (text::codepoint_count(w) < 4 || stopwords.count(w)) continue;
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(std::move(w));
  }
  return out;
}

std::map<Disorder, int> complaint_evidence(const DsdKg& kg, std::string_view complaint,
                                           const std::set<std::string>& stopwords) {
  const std::string hay = text::ascii_lower(complaint);
  std::map<Disorder, int> out;
  for (auto d : kAllDisorders) out[d] = 0;
  for (const auto& [d, ids] : kg.edges) {
    for (const auto& id : ids) {
      const auto kws = description_keywords(kg.descriptions.at(id), stopwords);
      if (std::any_of(kws.begin(), kws.end(), [&](const auto& k) { return hay.find(k) != std::string::npos; })) ++out[d];
    }
  }
  return out;
}

std::array<Disorder, 4> order_gen(const ConversationView& view, Strategy mode, Rng& rng) {
  std::vector<Disorder> order(kAllDisorders.begin(), kAllDisorders.end());
  if (mode == Strategy::random) {
    rng.shuffle(order);
  } else {
    auto score = [&](Disorder d) {
      auto it = view.complaint_evidence.find(d);
      return it == view.complaint_evidence.end() ? 0 : it->second;
    };
    std::stable_sort(order.begin(), order.end(), [&](Disorder a, Disorder b) { return score(a) > score(b); });
  }
  return {order[0], order[1], order[2], order[3]};
}

bool ensure_mdd_before_bd(std::array<Disorder, 4>& order) {
  auto bd = std::find(order.begin(), order.end(), Disorder::BD);
  auto mdd = std::find(order.begin(), order.end(), Disorder::MDD);
  if (mdd < bd) return false;
  std::rotate(bd, mdd, mdd + 1);
  return true;
}

// ---------------------------------------------------------------------------

ClassifierTokens default_classifier_tokens() {
  // Same lists as data/classifier_tokens.json.
  return {{"yes", "yeah", "yep", "yup", "definitely", "absolutely", "certainly", "indeed", "sure", "correct", "often",
           "frequently", "constantly", "always", "mostly", "lots"},
          {"no", "not", "never", "nothing", "none", "nope", "nor", "neither", "hardly", "barely", "haven't", "hasn't",
           "hadn't", "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "can't", "cannot", "won't",
           "wouldn't", "without"}};
}

ClassifierTokens load_classifier_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read classifier tokens " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ClassifierTokens t;
  for (const auto& [key, dest] : {std::pair{"affirmation", &t.affirmation}, std::pair{"negation", &t.negation}}) {
    if (!doc.contains(key) || !doc[key].is_array()) throw ParseError(path.string() + ": missing array '" + key + "'");
    for (const auto& w : doc[key]) {
      if (!w.is_string()) throw ParseError(path.string() + ": tokens must be strings");
      dest->insert(text::ascii_lower(w.get<std::string>()));
    }
  }
  return t;
}

Answer classify_rule(std::string_view answer, const ClassifierTokens& tokens) {
  bool affirm = false;
  for (const auto& w : text::words(answer)) {
    if (tokens.negation.count(w)) return Answer::absent;
    if (tokens.affirmation.count(w)) affirm = true;
  }
  return affirm ? Answer::present : Answer::absent;
}

namespace {

const DialogueTurn* last_of(const std::vector<DialogueTurn>& window, Role role) {
  for (auto it = window.rbegin(); it != window.rend(); ++it) {
    if (it->role == role) return &*it;
  }
  return nullptr;
}

std::optional<std::string> single_label(std::string_view reply, std::string_view a, std::string_view b) {
  bool has_a = false;
  bool has_b = false;
  for (const auto& w : text::words(reply)) {
    has_a = has_a || w == a;
    has_b = has_b || w == b;
  }
  if (has_a == has_b) return std::nullopt;
  return std::string(has_a ? a : b);
}

}  // namespace

Answer response_classifier(const ConversationView& view, TextBackend* backend, const PromptLibrary* prompts,
                           const ClassifierTokens& tokens) {
  const DialogueTurn* answer = last_of(view.window, Role::patient);
  if (!answer) throw PreconditionError("classifier needs a patient answer in the window");
  if (backend && prompts) {
    const DialogueTurn* question = last_of(view.window, Role::doctor);
    BackendRequest req;
    req.tag = RequestTag::classifier;
    req.system_prompt = prompts->get("classifier");
    req.temperature = 0.0;
    req.max_chars = 20;
    req.messages.push_back(
        {"user", "Question: " + (question ? question->text : std::string()) + "\nReply: " + answer->text});
    try {
      if (auto label = single_label(backend->complete(req), "present", "absent"))
        return *label == "present" ? Answer::present : Answer::absent;
    } catch (const BackendError&) {
      // fall through to the rule
    }
  }
  return classify_rule(answer->text, tokens);
}

bool need_exp_rule(const ConversationView& view, int max_triggers) {
  if (view.experience_triggers >= max_triggers || !view.current_disorder) return false;
  const DialogueTurn* answer = last_of(view.window, Role::patient);
  if (!answer || answer->classified_response != Answer::present) return false;
  auto it = view.present_tally.find(*view.current_disorder);
  return it != view.present_tally.end() && it->second == 1;
}

bool need_exp_branch(const ConversationView& view, TextBackend* backend, const PromptLibrary* prompts, int max_triggers) {
  if (!backend || !prompts) return need_exp_rule(view, max_triggers);
  if (view.experience_triggers >= max_triggers) return false;
  const DialogueTurn* answer = last_of(view.window, Role::patient);
  if (!answer || answer->classified_response != Answer::present) return false;
  BackendRequest req;
  req.tag = RequestTag::need_exp;
  req.system_prompt = prompts->get("need_exp");
  req.temperature = 0.0;
  req.max_chars = 20;
  std::string transcript;
  for (const auto& t : view.window) transcript += std::string(to_string(t.role)) + ": " + t.text + "\n";
  req.messages.push_back({"user", transcript});
  try {
    if (auto label = single_label(backend->complete(req), "yes", "no")) return *label == "yes";
  } catch (const BackendError&) {
  }
  return need_exp_rule(view, max_triggers);
}

// ---------------------------------------------------------------------------

TopicRef topic_of(const StateMachineDef& def, const QuestionNode& node, int position_in_group) {
  return {node.id, node.topic, render_question(def, node, position_in_group), true};
}

TopicRef topic_of(const ContextLeaf& leaf) { return {leaf.id, leaf.topic, leaf.question_template, false}; }

std::string topic_tag(const TopicRef& topic) { return "[topic:" + topic.id + "]"; }

std::string profile_block(const DoctorProfile& p) {
  return "Doctor profile " + std::to_string(p.profile_id) + ": age " + p.age_band + ", specialty " + p.specialty +
         ", manner " + p.empathy_style + ", verbosity " + std::string(to_string(p.verbosity)) + ", pace " +
         std::string(to_string(p.diagnostic_speed)) + ", explains " + std::string(to_string(p.explanation_frequency)) +
         ". Phrases you like to use: " + text::join(p.empathy_phrases, " / ");
}

BackendRequest build_prompt(const TopicRef& topic, Role role, const PromptContext& ctx) {
  if (!ctx.prompts) throw PreconditionError("build_prompt needs a prompt library");
  BackendRequest req;
  req.temperature = 0.7;
  if (role == Role::doctor) {
    if (!ctx.profile) throw PreconditionError("doctor prompt needs a profile");
    req.tag = RequestTag::doctor_turn;
    req.max_chars = ctx.profile->reply_char_limit;
    req.system_prompt = text::render_template(ctx.prompts->get("doctor_system"),
                                              {{"profile", profile_block(*ctx.profile)},
                                               {"max_chars", std::to_string(req.max_chars)},
                                               {"topic_tag", topic_tag(topic)},
                                               {"topic", topic.description},
                                               {"question", topic.question}}) +
                        "\nExample exchanges:\n" + ctx.prompts->get("doctor_fewshot");
    for (const auto& t : ctx.history)
      req.messages.push_back({t.role == Role::doctor ? "assistant" : "user", t.text});
    if (req.messages.empty() || req.messages.back().role == "assistant")
      req.messages.push_back({"user", "(The patient is waiting for your next question.)"});
    return req;
  }

  if (!ctx.emr || !ctx.fed) throw PreconditionError("patient prompt needs the EMR and FED narrative");
  req.tag = RequestTag::patient_turn;
  req.max_chars = 300;
  std::string verdict = "Answer from your background.";
  if (topic.symptom) {
    if (!ctx.kg) throw PreconditionError("patient prompt for a symptom needs the knowledge graph");
    verdict = std::string(symptom_allowed(*ctx.kg, *ctx.emr, topic.id) ? kConfirmInstruction : kDenyInstruction);
  }
  const auto& e = *ctx.emr;
  req.system_prompt = text::render_template(ctx.prompts->get("patient_system"),
                                            {{"max_chars", std::to_string(req.max_chars)},
                                             {"age", std::to_string(e.demographic.age)},
                                             {"gender", std::string(to_string(e.demographic.gender))},
                                             {"marital_status", e.demographic.marital_status},
                                             {"education", e.demographic.education},
                                             {"occupation", e.demographic.occupation},
                                             {"chief_complaint", e.chief_complaint},
                                             {"medical_condition", e.medical_condition},
                                             {"medical_history", e.medical_history},
                                             {"personal_history", e.personal_history},
                                             {"family_history", e.family_history},
                                             {"narrative", ctx.fed->narrative},
                                             {"topic_tag", topic_tag(topic)},
                                             {"topic", topic.description},
                                             {"verdict", verdict}});
  for (const auto& t : ctx.history) req.messages.push_back({t.role == Role::doctor ? "user" : "assistant", t.text});
  if (req.messages.empty() || req.messages.back().role == "assistant") req.messages.push_back({"user", topic.question});
  return req;
}

bool is_dial_end(const std::vector<const MachineRuntime*>& runtimes, const ContextTreeRuntime& tree) {
  return std::all_of(runtimes.begin(), runtimes.end(), [](const MachineRuntime* r) { return r && r->terminated(); }) &&
         required_complete(tree);
}

}  // namespace psydial
