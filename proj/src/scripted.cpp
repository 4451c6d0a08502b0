#include "scripted.hpp"

#include <array>
#include <cctype>

#include "rng.hpp"
#include "text.hpp"

namespace psydial {

namespace {

std::string lower_first(std::string s) {
  // Keep acronyms such as "ADHD" intact.
  if (s.size() >= 2 && std::isupper(static_cast<unsigned char>(s[0])) && std::islower(static_cast<unsigned char>(s[1])))
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

std::string upper_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string spoken(std::string_view description) {
  std::string out;
  for (std::size_t i = 0; i < description.size(); ++i) {
    if (description.substr(i, 3) == " / ") {
      out += " or ";
      i += 2;
    } else {
      out.push_back(description[i]);
    }
  }
  return out;
}

constexpr std::array<std::string_view, 3> kPresent{
    "Yes, that's right. I would describe it as {topic}.",
    "Yes, I have noticed that: {topic}.",
    "Yes, definitely. I have been dealing with {topic}.",
};

constexpr std::array<std::string_view, 3> kAbsent{
    "No, I haven't had anything like {topic}.",
    "No, I have not experienced {topic}.",
    "No, nothing like that. I would not say I have {topic}.",
};

std::string_view disorder_name(Disorder d) {
  switch (d) {
    case Disorder::MDD: return "major depressive disorder";
    case Disorder::AD: return "an anxiety disorder";
    case Disorder::BD: return "bipolar disorder";
    case Disorder::ADHD: return "ADHD";
  }
  return "?";
}

}  // namespace

PatientReply scripted_patient_reply(const Emr& emr, const DsdKg& kg, const QuestionNode& topic) {
  const bool present = symptom_allowed(kg, emr, topic.id);
  const std::string desc = spoken(kg.descriptions.at(topic.id));
  const auto variant = fnv1a(emr.emr_id + ":" + topic.id) % kPresent.size();
  const auto tmpl = present ? kPresent[variant] : kAbsent[variant];
  return {text::render_template(tmpl, {{"topic", lower_first(desc)}, {"Topic", upper_first(desc)}}),
          present ? Answer::present : Answer::absent};
}

std::string scripted_leaf_reply(const Emr& emr, const FedNarrative& fed, const ContextLeaf& leaf) {
  const std::string& src = leaf.answer_from;
  if (src == "family_history") return "About my family: " + emr.family_history;
  if (src == "personal_history") return "About my habits and background: " + emr.personal_history;
  if (src == "medical_history") return "Medically speaking: " + emr.medical_history;
  if (src == "medical_condition") return "Right now: " + emr.medical_condition;
  if (src == "chief_complaint") return emr.chief_complaint;
  return "There is something from my past I should mention. " + fed.narrative;
}

std::string scripted_opening_reply(const Emr& emr) { return emr.chief_complaint; }

// ---------------------------------------------------------------------------

ScriptedDoctor::ScriptedDoctor(const DoctorProfile& profile) : profile_(profile) {
  if (profile_.reply_char_limit == 0) throw PreconditionError("reply_char_limit must be positive");
  if (profile_.empathy_phrases.empty()) throw PreconditionError("doctor profile has no empathy phrases");
}

std::string ScriptedDoctor::fit(const std::string& prefix, const std::string& body) const {
  const std::size_t limit = profile_.reply_char_limit;
  if (!prefix.empty()) {
    std::string both = prefix + " " + body;
    if (text::codepoint_count(both) <= limit) return both;
  }
  return text::truncate_at_sentence(body, limit);
}

std::string ScriptedDoctor::ask(const std::string& question) {
  const auto& phrases = profile_.empathy_phrases;
  const std::string& prefix = phrases[rotation_ % phrases.size()];
  ++rotation_;
  return fit(prefix, question);
}

std::string ScriptedDoctor::opening() {
  return fit("Hello, I'm the psychiatrist seeing you today.", "What brings you here, and how have you been feeling?");
}

std::string ScriptedDoctor::closing(const std::map<Disorder, std::string>& finals, const MachineSet& machines) {
  const auto labels = labels_from_terminals(finals, machines).labels();
  std::string impression;
  if (labels.empty()) {
    impression = "I do not see one of the disorders I assessed.";
  } else {
    std::vector<std::string> names;
    for (auto d : labels) names.emplace_back(disorder_name(d));
    impression = "My impression: " + text::join(names, ", ") + ".";
  }
  return fit("Thank you for answering my questions.", impression + " We will plan the next steps together.");
}

std::string scripted_doctor_reply(ScriptedDoctor& doctor, const StateMachineDef& def, const QuestionNode& topic,
                                  int position_in_group) {
  return doctor.ask(render_question(def, topic, position_in_group));
}

}  // namespace psydial
