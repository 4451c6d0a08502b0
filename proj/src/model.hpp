#pragma once

// Domain types shared by every module: disorders, EMRs, fictitious experiences,
// doctor profiles and dialogue records. All of these are plain values; once
// built they are never mutated, so sessions running on different workers can
// share them freely.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace psydial {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document. Line/column are 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::string what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in a state that does not allow it (e.g. answering a
/// terminated machine).
class StateError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Disorders and comorbidity profiles

enum class Disorder : std::uint8_t { MDD = 0, AD = 1, BD = 2, ADHD = 3 };

inline constexpr std::array<Disorder, 4> kAllDisorders{Disorder::MDD, Disorder::AD,
                                                       Disorder::BD, Disorder::ADHD};

std::string_view to_string(Disorder d);
std::optional<Disorder> parse_disorder(std::string_view s);

/// Set of co-occurring disorder labels. Iteration is always in the canonical
/// order MDD, AD, BD, ADHD.
class ComorbidityProfile {
 public:
  ComorbidityProfile() = default;
  ComorbidityProfile(std::initializer_list<Disorder> labels);

  void insert(Disorder d) { mask_ |= bit(d); }
  bool contains(Disorder d) const { return (mask_ & bit(d)) != 0; }
  bool empty() const { return mask_ == 0; }
  std::size_t size() const;
  std::vector<Disorder> labels() const;
  std::uint8_t mask() const { return mask_; }

  friend bool operator==(const ComorbidityProfile&, const ComorbidityProfile&) = default;

 private:
  static std::uint8_t bit(Disorder d) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(d)); }
  std::uint8_t mask_ = 0;
};

std::string to_string(const ComorbidityProfile& p);
json to_json(const ComorbidityProfile& p);
/// Throws ParseError on unknown labels or a non-array value.
ComorbidityProfile profile_from_json(const json& j);

/// The six comorbidity combinations a dialogue must match to enter the dataset.
const std::array<ComorbidityProfile, 6>& eligible_combinations();
bool is_dataset_eligible(const ComorbidityProfile& p);

// ---------------------------------------------------------------------------
// Binary symptom scale, roles, strategies

enum class Answer : std::uint8_t { present, absent };
std::string_view to_string(Answer a);
std::optional<Answer> parse_answer(std::string_view s);

enum class Role : std::uint8_t { doctor, patient };
std::string_view to_string(Role r);

enum class Strategy : std::uint8_t { random, symptom_informed };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

enum class Gender : std::uint8_t { male, female, unspecified };
std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view s);

// ---------------------------------------------------------------------------
// EMR

struct Demographic {
  Gender gender = Gender::unspecified;
  int age = 0;
  std::string education;
  std::string marital_status;
  std::string occupation;
};

struct Emr {
  std::string emr_id;
  Demographic demographic;
  std::string chief_complaint;
  std::string medical_condition;
  std::string medical_history;
  std::string personal_history;
  std::string family_history;
  ComorbidityProfile preliminary_diagnosis;
  std::set<std::string> symptom_ids;
};

json to_json(const Emr& emr);
Emr emr_from_json(const json& j);

/// Loads one EMR file (.json), a line-delimited file (.jsonl) or every .json
/// file of a directory in lexicographic filename order.
std::vector<Emr> load_emrs(const std::filesystem::path& path);

struct DsdKg;

/// Returns one human-readable violation per broken invariant; empty when the
/// record is well formed and consistent with the knowledge graph.
std::vector<std::string> validate_emr(const Emr& emr, const DsdKg& kg);

// ---------------------------------------------------------------------------
// User filtering

struct AnnotatedUser {
  std::string user_id;
  int symptom_post_count = 0;
  int distinct_symptom_count = 0;
};

inline constexpr int kMinSymptomPosts = 10;
inline constexpr int kMinDistinctSymptoms = 20;

std::vector<AnnotatedUser> filter_users(const std::vector<AnnotatedUser>& users);

// ---------------------------------------------------------------------------
// Fictitious experiences

struct FictitiousExperience {
  std::string emr_id;
  std::string experience_id;
  std::string text;
};

struct PersonalHistory {
  std::string emr_id;
  std::string history_id;
  std::string text;
};

struct FedDictionaries {
  std::string emr_id;
  std::vector<PersonalHistory> histories;
  std::vector<FictitiousExperience> experiences;
};

struct FedNarrative {
  std::string emr_id;
  std::string history_id;
  std::string experience_id;
  std::string narrative;
};

json to_json(const FedNarrative& fed);
FedNarrative fed_from_json(const json& j);

// ---------------------------------------------------------------------------
// Doctor profiles

enum class Verbosity : std::uint8_t { terse, moderate, verbose };
enum class DiagnosticSpeed : std::uint8_t { fast, deliberate };
enum class ExplanationFrequency : std::uint8_t { low, high };

std::string_view to_string(Verbosity v);
std::string_view to_string(DiagnosticSpeed s);
std::string_view to_string(ExplanationFrequency f);

struct DoctorProfile {
  int profile_id = 0;
  std::string age_band;
  std::string specialty;
  std::string empathy_style;
  Verbosity verbosity = Verbosity::moderate;
  DiagnosticSpeed diagnostic_speed = DiagnosticSpeed::deliberate;
  ExplanationFrequency explanation_frequency = ExplanationFrequency::low;
  std::size_t reply_char_limit = 200;
  std::vector<std::string> empathy_phrases;
};

/// The five built-in profiles, ids 1..5.
const std::array<DoctorProfile, 5>& builtin_doctor_profiles();
const DoctorProfile& doctor_profile(int profile_id);

// ---------------------------------------------------------------------------
// Dialogue records

struct DialogueTurn {
  std::size_t index = 0;
  Role role = Role::doctor;
  std::string text;
  std::optional<std::string> topic_state;
  std::optional<Answer> classified_response;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

struct DialogueSession {
  std::string session_id;
  std::string emr_id;
  FedNarrative fed;
  int doctor_profile_id = 0;
  Strategy strategy = Strategy::random;
  std::uint64_t rng_seed = 0;
  std::vector<DialogueTurn> turns;
  std::map<Disorder, std::string> final_diagnoses;
  ComorbidityProfile predicted_labels;
};

/// Serializes with the corpus field set; `eligible` is derived from the
/// predicted labels.
ordered_json to_json(const DialogueSession& s);
DialogueSession session_from_json(const json& j);

/// Alternation and index contiguity of the turn list.
std::vector<std::string> check_turn_invariants(const std::vector<DialogueTurn>& turns);

}  // namespace psydial
