#pragma once

// Session loop and batch generation.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "agents.hpp"
#include "backend.hpp"
#include "contexttree.hpp"
#include "knowledge.hpp"
#include "model.hpp"
#include "prompts.hpp"
#include "statemachine.hpp"

namespace psydial {

/// Immutable inputs shared by every session of a run.
struct EngineResources {
  MachineSet machines;
  DsdKg kg;
  std::shared_ptr<const ContextTreeDef> tree;
  PromptLibrary prompts;
  ClassifierTokens tokens;
  std::set<std::string> stopwords;
};

/// Loads machines/, context_tree.json, prompts/, classifier_tokens.json and
/// stopwords.txt from a data directory. `machines_dir` overrides machines/.
EngineResources load_resources(const std::filesystem::path& data_dir, const std::filesystem::path& machines_dir = {});

inline constexpr std::size_t kDefaultTurnCap = 200;
inline constexpr int kHistoriesPerEmr = 5;
inline constexpr int kExperiencesPerEmr = 10;

struct SessionOptions {
  std::size_t turn_cap = kDefaultTurnCap;
  int max_experience_triggers = kDefaultMaxExperienceTriggers;
  std::size_t view_window = 6;
};

/// Fictitious-experience dictionaries for one EMR: 5 histories and 10
/// experiences. `remote` null selects the scripted generator.
FedDictionaries generate_fed(const Emr& emr, const EngineResources& res, TextBackend* remote);

/// First-person narrative joining a history and an experience of the same EMR.
FedNarrative render_narrative(const Emr& emr, const PersonalHistory& h, const FictitiousExperience& e,
                              const EngineResources& res, TextBackend* remote);

class TurnCapExceeded : public Error {
 public:
  using Error::Error;
};

struct SessionResult {
  DialogueSession session;
  enum class Status { ok, aborted, failed } status = Status::ok;
  std::string error;
  /// The failure came from the text backend rather than the inputs.
  bool backend_error = false;
  /// Notes such as an order adjustment.
  std::vector<std::string> log;
};

std::string_view to_string(SessionResult::Status s);

/// Runs one dialogue. Never throws for per-session failures: a turn-cap
/// overrun yields status aborted, a backend failure status failed.
SessionResult run_session(const Emr& emr, const FedNarrative& fed, const DoctorProfile& profile, Strategy strategy,
                          std::uint64_t seed, const EngineResources& res, TextBackend* remote,
                          const SessionOptions& opts = {}, const std::string& session_id = {});

struct GenerationJob {
  std::vector<Emr> emrs;
  int feds_per_emr = 5;
  std::vector<Strategy> strategies{Strategy::random, Strategy::symptom_informed};
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int workers = 1;
  SessionOptions session;
  /// Effective configuration, echoed into the manifest.
  json config = json::object();
};

std::vector<std::string> validate_job(const GenerationJob& job);

struct CorpusSummary {
  std::size_t attempted = 0;
  std::size_t completed = 0;
  std::size_t eligible = 0;
  std::size_t aborted = 0;
  std::size_t failed = 0;
  /// Failed sessions whose cause was the backend.
  std::size_t backend_failures = 0;
  std::filesystem::path corpus_path;
  std::filesystem::path manifest_path;
};

json to_json(const CorpusSummary& s);

/// Pairs of (history index, experience index) used as the FEDs of one EMR.
/// Up to five FEDs use distinct histories and distinct experiences; more
/// draw distinct pairs from the full 5 x 10 grid.
std::vector<std::pair<int, int>> sample_fed_pairs(int count, Rng& rng);

/// Runs |emrs| x feds_per_emr x |strategies| sessions on a worker pool and
/// writes corpus.jsonl (completed sessions in job order), feds.jsonl and,
/// last, manifest.json.
CorpusSummary generate_dataset(const GenerationJob& job, const EngineResources& res, TextBackend* remote);

}  // namespace psydial
