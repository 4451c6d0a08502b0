#pragma once

// Deterministic stand-ins for the language model. Every reply is a pure
// function of its inputs (plus the per-session empathy rotation), which is
// what makes scripted corpora replayable byte for byte.

#include <string>
#include <utility>

#include "contexttree.hpp"
#include "knowledge.hpp"
#include "model.hpp"
#include "statemachine.hpp"

namespace psydial {

struct PatientReply {
  std::string text;
  Answer label = Answer::absent;
};

/// Answer to a symptom question: "Yes, ..." when the EMR records the
/// symptom, "No, ..." otherwise, always naming the symptom description.
PatientReply scripted_patient_reply(const Emr& emr, const DsdKg& kg, const QuestionNode& topic);

/// Answer to a context-tree leaf, quoting the EMR section (or the FED
/// narrative for experience leaves).
std::string scripted_leaf_reply(const Emr& emr, const FedNarrative& fed, const ContextLeaf& leaf);

/// The patient's first words: the chief complaint.
std::string scripted_opening_reply(const Emr& emr);

/// Doctor side. Holds the empathy rotation, so one instance per session.
class ScriptedDoctor {
 public:
  explicit ScriptedDoctor(const DoctorProfile& profile);

  const DoctorProfile& profile() const { return profile_; }

  /// Next empathy phrase followed by the question. The phrase is dropped,
  /// then the question cut at a sentence boundary, to fit the reply limit.
  std::string ask(const std::string& question);
  std::string opening();
  std::string closing(const std::map<Disorder, std::string>& finals, const MachineSet& machines);

 private:
  std::string fit(const std::string& prefix, const std::string& body) const;

  DoctorProfile profile_;
  std::size_t rotation_ = 0;
};

/// render_question for the topic, passed through the doctor's rotation.
std::string scripted_doctor_reply(ScriptedDoctor& doctor, const StateMachineDef& def, const QuestionNode& topic,
                                  int position_in_group);

}  // namespace psydial
