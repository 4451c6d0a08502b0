#pragma once

// Turn-level behaviour of the doctor, patient and tool agents.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "backend.hpp"
#include "contexttree.hpp"
#include "knowledge.hpp"
#include "model.hpp"
#include "prompts.hpp"
#include "rng.hpp"
#include "statemachine.hpp"

namespace psydial {

inline constexpr std::size_t kMinViewWindow = 2;
inline constexpr int kDefaultMaxExperienceTriggers = 3;

/// What the tool agent sees of the dialogue.
struct ConversationView {
  std::vector<DialogueTurn> window;  // most recent turns, oldest first
  std::optional<std::string> current_topic;
  std::optional<Disorder> current_disorder;
  /// Present answers per disorder so far in the session.
  std::map<Disorder, int> present_tally;
  /// Symptoms per disorder evidenced by the chief complaint.
  std::map<Disorder, int> complaint_evidence;
  int experience_triggers = 0;
};

/// Last `k` turns of `turns` (k >= 2).
std::vector<DialogueTurn> recent_window(const std::vector<DialogueTurn>& turns, std::size_t k);

/// Keywords of a symptom description: lowercase words of four or more
/// letters that are not stopwords.
std::vector<std::string> description_keywords(std::string_view description, const std::set<std::string>& stopwords);

/// Number of symptoms of each disorder whose description shares a keyword
/// with the chief complaint (case-insensitive substring match).
std::map<Disorder, int> complaint_evidence(const DsdKg& kg, std::string_view complaint,
                                           const std::set<std::string>& stopwords);

/// Execution order of the four machines. Random mode is a seeded uniform
/// permutation; symptom-informed mode sorts by complaint evidence,
/// descending, ties in the order MDD, AD, BD, ADHD.
std::array<Disorder, 4> order_gen(const ConversationView& view, Strategy mode, Rng& rng);

/// Moves MDD directly in front of BD when BD comes first, since BD's
/// determinative rules read the MDD episode flags. Returns true if moved.
bool ensure_mdd_before_bd(std::array<Disorder, 4>& order);

struct ClassifierTokens {
  std::set<std::string> affirmation;
  std::set<std::string> negation;
};

ClassifierTokens default_classifier_tokens();
ClassifierTokens load_classifier_tokens(const std::filesystem::path& path);

/// Present iff the answer has an affirmation token and no negation token.
Answer classify_rule(std::string_view answer, const ClassifierTokens& tokens);

/// Backend label when it gives exactly one of present/absent; the rule
/// otherwise, including on backend failure. A null backend means the rule.
Answer response_classifier(const ConversationView& view, TextBackend* backend, const PromptLibrary* prompts,
                           const ClassifierTokens& tokens);

/// Scripted rule: the last answer was the first present answer of the
/// current machine and fewer than `max_triggers` experience inquiries ran.
bool need_exp_rule(const ConversationView& view, int max_triggers = kDefaultMaxExperienceTriggers);

/// Backend yes/no decision, capped by `max_triggers` and only consulted
/// after a present answer; falls back to the rule on failure or ambiguity.
bool need_exp_branch(const ConversationView& view, TextBackend* backend, const PromptLibrary* prompts,
                     int max_triggers = kDefaultMaxExperienceTriggers);

/// Something the doctor may ask about: a machine node or a context leaf.
struct TopicRef {
  std::string id;
  std::string description;
  std::string question;  // the rendered question text
  /// True for machine nodes, whose answer the patient filter governs.
  bool symptom = false;
};

TopicRef topic_of(const StateMachineDef& def, const QuestionNode& node, int position_in_group);
TopicRef topic_of(const ContextLeaf& leaf);

/// Marker shared by both prompts of a turn, e.g. "[topic:A6]".
std::string topic_tag(const TopicRef& topic);

struct PromptContext {
  const PromptLibrary* prompts = nullptr;
  const DoctorProfile* profile = nullptr;
  const Emr* emr = nullptr;
  const FedNarrative* fed = nullptr;
  const DsdKg* kg = nullptr;
  std::vector<DialogueTurn> history;
};

inline constexpr std::string_view kDenyInstruction =
    "You do not have this symptom. You must deny it clearly, starting your answer with \"No\".";
inline constexpr std::string_view kConfirmInstruction =
    "You do have this symptom. Confirm it, starting your answer with \"Yes\", and describe it briefly.";

/// Doctor prompts carry the profile block, few-shot examples and the topic,
/// never EMR content. Patient prompts carry the EMR, FED narrative, topic and
/// the filter verdict.
BackendRequest build_prompt(const TopicRef& topic, Role role, const PromptContext& ctx);

std::string profile_block(const DoctorProfile& profile);

/// True iff every runtime is terminal and the required tree leaves are done.
bool is_dial_end(const std::vector<const MachineRuntime*>& runtimes, const ContextTreeRuntime& tree);

}  // namespace psydial
