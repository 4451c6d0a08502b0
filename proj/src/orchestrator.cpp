#include "orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "scripted.hpp"
#include "text.hpp"

namespace psydial {

EngineResources load_resources(const std::filesystem::path& data_dir, const std::filesystem::path& machines_dir) {
  EngineResources r;
  r.machines = load_machine_set(machines_dir.empty() ? data_dir / "machines" : machines_dir);
  r.kg = kg_from_machines(r.machines);
  r.tree = std::make_shared<ContextTreeDef>(load_context_tree_file(data_dir / "context_tree.json"));
  r.prompts = load_prompt_library(data_dir / "prompts");
  r.tokens = load_classifier_tokens(data_dir / "classifier_tokens.json");
  try {
    r.stopwords = text::load_word_list((data_dir / "stopwords.txt").string());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  return r;
}

std::string_view to_string(SessionResult::Status s) {
  switch (s) {
    case SessionResult::Status::ok: return "ok";
    case SessionResult::Status::aborted: return "aborted";
    case SessionResult::Status::failed: return "failed";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Fictitious experiences

namespace {

constexpr std::array<std::string_view, 8> kLifestyle{
    "I usually go to bed after midnight and rarely keep a fixed schedule.",
    "I walk to work most days but have not exercised properly in years.",
    "I spend most evenings alone at home, mostly on my phone.",
    "I drink several cups of coffee a day to keep going.",
    "I used to play team sports but stopped after moving to a new city.",
    "I cook for myself and try to eat regular meals, though I often skip breakfast.",
    "I have a small circle of friends I see about once a month.",
    "I had asthma as a child and still carry an inhaler.",
};

constexpr std::array<std::string_view, 14> kEvents{
    "I lost a close grandparent during my final year of school.",
    "I was passed over for a promotion I had worked toward for two years.",
    "My parents divorced when I was twelve and I moved between two homes.",
    "A long relationship ended suddenly last year.",
    "I was bullied for most of middle school.",
    "I moved abroad for study and struggled to make friends.",
    "A close friend stopped speaking to me after an argument.",
    "I was in a minor car accident and still feel tense in traffic.",
    "My family went through serious money problems when I was a teenager.",
    "I failed an important exam and had to repeat a year.",
    "I cared for a sick parent for several months while working as a {occupation}.",
    "I was made redundant without warning.",
    "Our home was burgled while we were away.",
    "A colleague took credit for my work in front of the whole team.",
};

BackendError with_emr(const BackendError& e, const std::string& emr_id) {
  return BackendError(e.kind(), e.tag(), "EMR " + emr_id + ": " + e.what(), e.status(), e.attempts());
}

std::string emr_document(const Emr& e) {
  ordered_json j;
  j["gender"] = std::string(to_string(e.demographic.gender));
  j["age"] = e.demographic.age;
  j["education"] = e.demographic.education;
  j["marital_status"] = e.demographic.marital_status;
  j["occupation"] = e.demographic.occupation;
  j["chief_complaint"] = e.chief_complaint;
  j["medical_condition"] = e.medical_condition;
  j["medical_history"] = e.medical_history;
  j["personal_history"] = e.personal_history;
  j["family_history"] = e.family_history;
  j["preliminary_diagnosis"] = to_string(e.preliminary_diagnosis);
  return j.dump(2);
}

std::string diagnosis_names(const ComorbidityProfile& p) {
  std::vector<std::string> out;
  for (auto d : p.labels()) out.emplace_back(to_string(d));
  return out.empty() ? std::string("no confirmed diagnosis") : text::join(out, " and ");
}

}  // namespace

FedDictionaries generate_fed(const Emr& emr, const EngineResources& res, TextBackend* remote) {
  if (auto v = validate_emr(emr, res.kg); !v.empty())
    throw PreconditionError("cannot generate experiences for an invalid EMR: " + text::join(v, "; "));
  FedDictionaries out;
  out.emr_id = emr.emr_id;
  auto history_id = [&](int i) { return emr.emr_id + "-H" + std::to_string(i + 1); };
  auto experience_id = [&](int i) { return emr.emr_id + "-E" + (i + 1 < 10 ? "0" : "") + std::to_string(i + 1); };

  if (!remote) {
    const auto offset = static_cast<std::size_t>(fnv1a(emr.emr_id));
    out.histories.push_back({emr.emr_id, history_id(0), emr.personal_history});
    for (int i = 1; i < kHistoriesPerEmr; ++i)
      out.histories.push_back(
          {emr.emr_id, history_id(i), std::string(kLifestyle[(offset + static_cast<std::size_t>(i)) % kLifestyle.size()])});
    for (int i = 0; i < kExperiencesPerEmr; ++i) {
      const auto tmpl = kEvents[(offset + static_cast<std::size_t>(i)) % kEvents.size()];
      out.experiences.push_back(
          {emr.emr_id, experience_id(i), text::render_template(tmpl, {{"occupation", emr.demographic.occupation}})});
    }
    return out;
  }

  BackendRequest req;
  req.tag = RequestTag::fed_generation;
  req.temperature = 0.9;
  req.max_chars = 8000;
  req.messages.push_back({"user", text::render_template(res.prompts.get("fed_dictionary"), {{"emr", emr_document(emr)}})});
  std::string reply;
  try {
    reply = remote->complete(req);
  } catch (const BackendError& e) {
    throw with_emr(e, emr.emr_id);
  }
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  json doc;
  try {
    if (open == std::string::npos || close == std::string::npos || close < open) throw std::invalid_argument("no object");
    doc = json::parse(reply.substr(open, close - open + 1));
  } catch (const std::exception&) {
    throw BackendError(BackendError::Kind::malformed, req.tag, "EMR " + emr.emr_id + ": dictionary reply is not JSON");
  }
  auto strings = [&](const char* key, int expected) {
    std::vector<std::string> items;
    if (doc.contains(key) && doc[key].is_array()) {
      for (const auto& v : doc[key]) {
        if (v.is_string() && !text::trim(v.get<std::string>()).empty()) items.push_back(text::trim(v.get<std::string>()));
      }
    }
    if (static_cast<int>(items.size()) != expected)
      throw BackendError(BackendError::Kind::malformed, req.tag,
                         "EMR " + emr.emr_id + ": expected " + std::to_string(expected) + " entries in " + key + ", got " +
                             std::to_string(items.size()));
    return items;
  };
  auto histories = strings("personal_histories", kHistoriesPerEmr);
  auto experiences = strings("fictitious_experiences", kExperiencesPerEmr);
  for (int i = 0; i < kHistoriesPerEmr; ++i)
    out.histories.push_back({emr.emr_id, history_id(i), histories[static_cast<std::size_t>(i)]});
  for (int i = 0; i < kExperiencesPerEmr; ++i)
    out.experiences.push_back({emr.emr_id, experience_id(i), experiences[static_cast<std::size_t>(i)]});
  return out;
}

FedNarrative render_narrative(const Emr& emr, const PersonalHistory& h, const FictitiousExperience& e,
                              const EngineResources& res, TextBackend* remote) {
  if (h.emr_id != emr.emr_id || e.emr_id != emr.emr_id)
    throw PreconditionError("history " + h.history_id + " and experience " + e.experience_id +
                            " must both belong to EMR " + emr.emr_id);
  FedNarrative fed{emr.emr_id, h.history_id, e.experience_id, {}};
  if (!remote) {
    fed.narrative = "I am " + std::to_string(emr.demographic.age) + " and work as a " + emr.demographic.occupation + ". " +
                    h.text + " " + e.text;
    return fed;
  }
  BackendRequest req;
  req.tag = RequestTag::fed_generation;
  req.temperature = 0.9;
  req.max_chars = 1200;
  req.messages.push_back({"user", text::render_template(res.prompts.get("fed_narrative"),
                                                        {{"age", std::to_string(emr.demographic.age)},
                                                         {"gender", std::string(to_string(emr.demographic.gender))},
                                                         {"diagnosis", diagnosis_names(emr.preliminary_diagnosis)},
                                                         {"occupation", emr.demographic.occupation},
                                                         {"history", h.text},
                                                         {"experience", e.text}})});
  try {
    fed.narrative = remote->complete(req);
  } catch (const BackendError& ex) {
    throw with_emr(ex, emr.emr_id);
  }
  return fed;
}

// ---------------------------------------------------------------------------
// Session loop

namespace {

class SessionEngine {
 public:
  SessionEngine(const Emr& emr, const FedNarrative& fed, const DoctorProfile& profile, Strategy strategy,
                std::uint64_t seed, const EngineResources& res, TextBackend* remote, const SessionOptions& opts,
                SessionResult& out)
      : emr_(emr),
        fed_(fed),
        profile_(profile),
        strategy_(strategy),
        res_(res),
        remote_(remote),
        opts_(opts),
        out_(out),
        rng_(seed),
        doctor_(profile),
        tree_(init_tree(res.tree, emr.demographic.gender)) {}

  void run() {
    auto& turns = out_.session.turns;

    // Opening exchange.
    const TopicRef opening{"opening", "Greeting and reason for the visit", "What brings you here today?", false};
    std::string doctor_text = remote_ ? ask_remote(opening) : doctor_.opening();
    push(Role::doctor, doctor_text, std::nullopt, std::nullopt);
    std::string patient_text = remote_ ? answer_remote(opening) : scripted_opening_reply(emr_);
    push(Role::patient, patient_text, std::nullopt, std::nullopt);

    ConversationView view = make_view(std::nullopt);
    view.complaint_evidence = complaint_evidence(res_.kg, turns.back().text, res_.stopwords);
    auto order = order_gen(view, strategy_, rng_);
    const auto proposed = order;
    if (ensure_mdd_before_bd(order)) {
      out_.log.push_back("order adjusted from " + order_string(proposed) + " to " + order_string(order) +
                         " so MDD precedes BD");
    }

    std::map<Disorder, std::unique_ptr<MachineRuntime>> runtimes;
    for (auto d : order) {
      auto rt = std::make_unique<MachineRuntime>(res_.machines.defs.at(d));
      if (d == Disorder::BD) {
        auto mdd = runtimes.find(Disorder::MDD);
        if (mdd != runtimes.end()) {
          const auto& inputs = rt->def().clause_inputs;
          EpisodeFlags carried;
          for (const auto& f : mdd->second->episode_flags()) {
            if (std::find(inputs.begin(), inputs.end(), f) != inputs.end()) carried.insert(f);
          }
          rt->inject_flags(carried);
        }
      }
      run_machine(d, *rt);
      out_.session.final_diagnoses[d] = *rt->terminal();
      runtimes.emplace(d, std::move(rt));
    }

    // Remaining background questions in random order.
    while (!required_complete(tree_)) {
      const ContextLeaf& leaf = next_leaf(tree_, rng_);
      ask_leaf(leaf);
      tree_.mark_visited(leaf.id);
    }

    std::vector<const MachineRuntime*> all;
    for (const auto& [_, rt] : runtimes) all.push_back(rt.get());
    if (!is_dial_end(all, tree_)) throw StateError("dialogue loop finished before its end condition");

    out_.session.predicted_labels = labels_from_terminals(out_.session.final_diagnoses, res_.machines);
    std::string closing;
    if (remote_) {
      const TopicRef topic{"closing", "Closing impression",
                           "Thank the patient and summarise your impression: " +
                               diagnosis_names(out_.session.predicted_labels) + ".",
                           false};
      closing = ask_remote(topic);
    } else {
      closing = doctor_.closing(out_.session.final_diagnoses, res_.machines);
    }
    push(Role::doctor, closing, std::nullopt, std::nullopt);
  }

 private:
  static std::string order_string(const std::array<Disorder, 4>& order) {
    std::vector<std::string> parts;
    for (auto d : order) parts.emplace_back(to_string(d));
    return text::join(parts, ",");
  }

  void push(Role role, std::string text, std::optional<std::string> topic, std::optional<Answer> label) {
    auto& turns = out_.session.turns;
    if (turns.size() + 1 > opts_.turn_cap)
      throw TurnCapExceeded("turn cap of " + std::to_string(opts_.turn_cap) + " reached");
    turns.push_back({turns.size(), role, std::move(text), std::move(topic), label});
  }

  /// A question/answer pair must fit entirely, so a session never ends on a
  /// dangling question.
  void reserve_pair() {
    if (out_.session.turns.size() + 2 > opts_.turn_cap)
      throw TurnCapExceeded("turn cap of " + std::to_string(opts_.turn_cap) + " reached");
  }

  ConversationView make_view(std::optional<Disorder> current) const {
    ConversationView v;
    v.window = recent_window(out_.session.turns, std::max(opts_.view_window, kMinViewWindow));
    if (!out_.session.turns.empty()) v.current_topic = out_.session.turns.back().topic_state;
    v.current_disorder = current;
    v.present_tally = present_tally_;
    v.experience_triggers = tree_.experience_triggered_count();
    return v;
  }

  PromptContext prompt_context() const {
    PromptContext ctx;
    ctx.prompts = &res_.prompts;
    ctx.profile = &profile_;
    ctx.emr = &emr_;
    ctx.fed = &fed_;
    ctx.kg = &res_.kg;
    ctx.history = recent_window(out_.session.turns, std::max<std::size_t>(2 * opts_.view_window, kMinViewWindow));
    return ctx;
  }

  std::string ask_remote(const TopicRef& topic) { return remote_->complete(build_prompt(topic, Role::doctor, prompt_context())); }
  std::string answer_remote(const TopicRef& topic) {
    return remote_->complete(build_prompt(topic, Role::patient, prompt_context()));
  }

  void run_machine(Disorder d, MachineRuntime& rt) {
    const auto& def = rt.def();
    while (!rt.terminated()) {
      const QuestionNode& node = rt.current_topic();
      const int position = rt.position_in_group();
      const TopicRef topic = topic_of(def, node, position);

      reserve_pair();
      push(Role::doctor, remote_ ? ask_remote(topic) : doctor_.ask(topic.question), node.id, std::nullopt);
      std::optional<Answer> truth;
      std::string reply;
      if (remote_) {
        reply = answer_remote(topic);
      } else {
        auto scripted = scripted_patient_reply(emr_, res_.kg, node);
        reply = std::move(scripted.text);
        truth = scripted.label;
      }
      push(Role::patient, reply, node.id, std::nullopt);

      const Answer label = response_classifier(make_view(d), remote_, remote_ ? &res_.prompts : nullptr, res_.tokens);
      out_.session.turns.back().classified_response = label;
      if (truth && *truth != label)
        out_.log.push_back("classifier disagreed with the scripted label at " + node.id);
      if (label == Answer::present) ++present_tally_[d];
      rt.apply_response(label, rng_, node.id);

      const bool decision = need_exp_branch(make_view(d), remote_, remote_ ? &res_.prompts : nullptr,
                                            opts_.max_experience_triggers);
      if (auto leaf = trigger_experience_branch(decision, tree_)) ask_leaf(*leaf);
    }
  }

  void ask_leaf(const ContextLeaf& leaf) {
    const TopicRef topic = topic_of(leaf);
    reserve_pair();
    push(Role::doctor, remote_ ? ask_remote(topic) : doctor_.ask(topic.question), leaf.id, std::nullopt);
    push(Role::patient, remote_ ? answer_remote(topic) : scripted_leaf_reply(emr_, fed_, leaf), leaf.id, std::nullopt);
  }

  const Emr& emr_;
  const FedNarrative& fed_;
  const DoctorProfile& profile_;
  Strategy strategy_;
  const EngineResources& res_;
  TextBackend* remote_;
  const SessionOptions& opts_;
  SessionResult& out_;
  Rng rng_;
  ScriptedDoctor doctor_;
  ContextTreeRuntime tree_;
  std::map<Disorder, int> present_tally_;
};

}  // namespace

SessionResult run_session(const Emr& emr, const FedNarrative& fed, const DoctorProfile& profile, Strategy strategy,
                          std::uint64_t seed, const EngineResources& res, TextBackend* remote, const SessionOptions& opts,
                          const std::string& session_id) {
  if (fed.emr_id != emr.emr_id) throw PreconditionError("FED " + fed.history_id + "/" + fed.experience_id + " belongs to another EMR");
  if (opts.turn_cap < 3) throw PreconditionError("turn cap must allow at least one exchange and a closing turn");

  SessionResult out;
  auto& s = out.session;
  s.session_id = session_id.empty() ? emr.emr_id + "-" + std::string(to_string(strategy)) + "-" + std::to_string(seed)
                                    : session_id;
  s.emr_id = emr.emr_id;
  s.fed = fed;
  s.doctor_profile_id = profile.profile_id;
  s.strategy = strategy;
  s.rng_seed = seed;
  try {
    SessionEngine(emr, fed, profile, strategy, seed, res, remote, opts, out).run();
  } catch (const TurnCapExceeded& e) {
    out.status = SessionResult::Status::aborted;
    out.error = e.what();
  } catch (const BackendError& e) {
    out.status = SessionResult::Status::failed;
    out.backend_error = true;
    out.error = e.what();
  } catch (const Error& e) {
    out.status = SessionResult::Status::failed;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.status = SessionResult::Status::failed;
    out.error = std::string("internal error: ") + e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch generation

std::vector<std::string> validate_job(const GenerationJob& job) {
  std::vector<std::string> v;
  if (job.emrs.empty()) v.push_back("job has no EMRs");
  if (job.feds_per_emr < 1) v.push_back("feds_per_emr must be >= 1");
  if (job.feds_per_emr > kHistoriesPerEmr * kExperiencesPerEmr)
    v.push_back("feds_per_emr cannot exceed " + std::to_string(kHistoriesPerEmr * kExperiencesPerEmr));
  if (job.strategies.empty()) v.push_back("job needs at least one strategy");
  std::set<Strategy> uniq(job.strategies.begin(), job.strategies.end());
  if (uniq.size() != job.strategies.size()) v.push_back("strategies are listed twice");
  if (job.workers < 1) v.push_back("workers must be >= 1");
  if (job.out_dir.empty()) v.push_back("output directory is empty");
  std::set<std::string> ids;
  for (const auto& e : job.emrs) {
    if (!ids.insert(e.emr_id).second) v.push_back("duplicate emr_id " + e.emr_id);
  }
  return v;
}

json to_json(const CorpusSummary& s) {
  return json{{"attempted", s.attempted}, {"completed", s.completed},          {"eligible", s.eligible},
              {"aborted", s.aborted},     {"failed", s.failed},                {"backend_failures", s.backend_failures},
              {"corpus", s.corpus_path.string()},
              {"manifest", s.manifest_path.string()}};
}

std::vector<std::pair<int, int>> sample_fed_pairs(int count, Rng& rng) {
  if (count < 1 || count > kHistoriesPerEmr * kExperiencesPerEmr)
    throw PreconditionError("cannot draw " + std::to_string(count) + " FEDs from a 5 x 10 grid");
  std::vector<std::pair<int, int>> out;
  if (count <= kHistoriesPerEmr) {
    std::vector<int> h(kHistoriesPerEmr);
    std::vector<int> e(kExperiencesPerEmr);
    for (int i = 0; i < kHistoriesPerEmr; ++i) h[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < kExperiencesPerEmr; ++i) e[static_cast<std::size_t>(i)] = i;
    rng.shuffle(h);
    rng.shuffle(e);
    for (int i = 0; i < count; ++i) out.emplace_back(h[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i)]);
    return out;
  }
  std::vector<std::pair<int, int>> grid;
  for (int h = 0; h < kHistoriesPerEmr; ++h) {
    for (int e = 0; e < kExperiencesPerEmr; ++e) grid.emplace_back(h, e);
  }
  rng.shuffle(grid);
  grid.resize(static_cast<std::size_t>(count));
  return grid;
}

namespace {

/// Runs fn(0..n-1) on `workers` threads and hands each finished index to
/// `ready` on the calling thread, in index order.
template <class Result>
void ordered_pool(std::size_t n, int workers, const std::function<Result(std::size_t)>& fn,
                  const std::function<void(std::size_t, Result&)>& ready) {
  std::vector<std::optional<Result>> slots(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      Result r = fn(i);
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(r);
      }
      cv.notify_all();
    }
  };
  std::vector<std::thread> threads;
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  for (std::size_t t = 0; t < std::min(count, std::max<std::size_t>(n, 1)); ++t) threads.emplace_back(worker);
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return slots[i].has_value(); });
    Result r = std::move(*slots[i]);
    slots[i].reset();
    lock.unlock();
    ready(i, r);
  }
  for (auto& t : threads) t.join();
}

struct FedStage {
  FedDictionaries dictionaries;
  std::vector<FedNarrative> feds;
  std::string error;
  bool backend_error = false;
};

struct Task {
  std::size_t emr_index;
  int fed_index;
  std::size_t strategy_index;
};

json fed_entry_json(const FedDictionaries& d, const std::vector<FedNarrative>& feds) {
  ordered_json j;
  j["emr_id"] = d.emr_id;
  ordered_json hs = ordered_json::array();
  for (const auto& h : d.histories) hs.push_back(ordered_json{{"history_id", h.history_id}, {"text", h.text}});
  j["personal_histories"] = hs;
  ordered_json es = ordered_json::array();
  for (const auto& e : d.experiences) es.push_back(ordered_json{{"experience_id", e.experience_id}, {"text", e.text}});
  j["fictitious_experiences"] = es;
  ordered_json fs = ordered_json::array();
  for (const auto& f : feds) {
    fs.push_back(ordered_json{{"history_id", f.history_id}, {"experience_id", f.experience_id}, {"narrative", f.narrative}});
  }
  j["feds"] = fs;
  return json::parse(j.dump());
}

}  // namespace

CorpusSummary generate_dataset(const GenerationJob& job, const EngineResources& res, TextBackend* remote) {
  if (auto v = validate_job(job); !v.empty()) throw PreconditionError(text::join(v, "; "));
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(job.out_dir, ec);
  if (ec) throw IoError("cannot create " + job.out_dir.string() + ": " + ec.message());

  CorpusSummary summary;
  summary.corpus_path = job.out_dir / "corpus.jsonl";
  summary.manifest_path = job.out_dir / "manifest.json";
  const auto feds_path = job.out_dir / "feds.jsonl";
  // A stale manifest would mark a half-written corpus as complete.
  fs::remove(summary.manifest_path, ec);

  // Stage 1: experience dictionaries and the sampled FEDs per EMR.
  std::vector<FedStage> stages(job.emrs.size());
  {
    std::ofstream feds_out(feds_path, std::ios::binary | std::ios::trunc);
    if (!feds_out) throw IoError("cannot write " + feds_path.string());
    ordered_pool<FedStage>(
        job.emrs.size(), job.workers,
        [&](std::size_t i) {
          FedStage st;
          const Emr& emr = job.emrs[i];
          try {
            st.dictionaries = generate_fed(emr, res, remote);
            Rng rng(derive_seed(job.seed, {0xFEDULL, i}));
            for (auto [h, e] : sample_fed_pairs(job.feds_per_emr, rng)) {
              st.feds.push_back(render_narrative(emr, st.dictionaries.histories[static_cast<std::size_t>(h)],
                                                 st.dictionaries.experiences[static_cast<std::size_t>(e)], res, remote));
            }
          } catch (const BackendError& e) {
            st.error = e.what();
            st.backend_error = true;
          } catch (const std::exception& e) {
            st.error = e.what();
          }
          return st;
        },
        [&](std::size_t i, FedStage& st) {
          if (st.error.empty()) feds_out << fed_entry_json(st.dictionaries, st.feds).dump() << '\n';
          stages[i] = std::move(st);
        });
    if (!feds_out) throw IoError("write failed for " + feds_path.string());
  }

  // Stage 2: sessions.
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < job.emrs.size(); ++e) {
    for (int f = 0; f < job.feds_per_emr; ++f) {
      for (std::size_t s = 0; s < job.strategies.size(); ++s) tasks.push_back({e, f, s});
    }
  }
  summary.attempted = tasks.size();

  std::ofstream corpus(summary.corpus_path, std::ios::binary | std::ios::trunc);
  if (!corpus) throw IoError("cannot write " + summary.corpus_path.string());
  ordered_json session_status = ordered_json::array();

  ordered_pool<SessionResult>(
      tasks.size(), job.workers,
      [&](std::size_t i) {
        const Task& t = tasks[i];
        const Emr& emr = job.emrs[t.emr_index];
        const Strategy strategy = job.strategies[t.strategy_index];
        const int profile_id = t.fed_index % static_cast<int>(builtin_doctor_profiles().size()) + 1;
        const std::string id = emr.emr_id + "-f" + std::to_string(t.fed_index + 1) + "-" + std::string(to_string(strategy));
        const std::uint64_t seed =
            derive_seed(job.seed, {t.emr_index, static_cast<std::uint64_t>(t.fed_index), t.strategy_index});
        const FedStage& st = stages[t.emr_index];
        if (!st.error.empty()) {
          SessionResult r;
          r.session.session_id = id;
          r.session.emr_id = emr.emr_id;
          r.session.doctor_profile_id = profile_id;
          r.session.strategy = strategy;
          r.session.rng_seed = seed;
          r.status = SessionResult::Status::failed;
          r.error = st.error;
          r.backend_error = st.backend_error;
          return r;
        }
        return run_session(emr, st.feds[static_cast<std::size_t>(t.fed_index)], doctor_profile(profile_id), strategy,
                           seed, res, remote, job.session, id);
      },
      [&](std::size_t, SessionResult& r) {
        const bool eligible = r.status == SessionResult::Status::ok && is_dataset_eligible(r.session.predicted_labels);
        ordered_json entry;
        entry["session_id"] = r.session.session_id;
        entry["emr_id"] = r.session.emr_id;
        entry["history_id"] = r.session.fed.history_id;
        entry["experience_id"] = r.session.fed.experience_id;
        entry["doctor_profile_id"] = r.session.doctor_profile_id;
        entry["strategy"] = std::string(to_string(r.session.strategy));
        entry["rng_seed"] = r.session.rng_seed;
        entry["status"] = std::string(to_string(r.status));
        entry["turns"] = r.session.turns.size();
        entry["eligible"] = eligible;
        if (!r.error.empty()) entry["error"] = r.error;
        if (!r.log.empty()) entry["log"] = r.log;
        session_status.push_back(std::move(entry));

        switch (r.status) {
          case SessionResult::Status::ok:
            ++summary.completed;
            if (eligible) ++summary.eligible;
            corpus << to_json(r.session).dump() << '\n';
            corpus.flush();
            break;
          case SessionResult::Status::aborted:
            ++summary.aborted;
            break;
          case SessionResult::Status::failed:
            ++summary.failed;
            if (r.backend_error) ++summary.backend_failures;
            break;
        }
      });
  corpus.close();
  if (!corpus) throw IoError("write failed for " + summary.corpus_path.string());

  ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["generator"] = std::string("psydial ") + PSYD_VERSION;
  manifest["seed"] = job.seed;
  manifest["config"] = job.config;
  ordered_json counts;
  counts["attempted"] = summary.attempted;
  counts["completed"] = summary.completed;
  counts["eligible"] = summary.eligible;
  counts["aborted"] = summary.aborted;
  counts["failed"] = summary.failed;
  manifest["counts"] = counts;
  manifest["files"] = ordered_json{{"corpus", "corpus.jsonl"}, {"feds", "feds.jsonl"}};
  manifest["sessions"] = std::move(session_status);
  const auto tmp = job.out_dir / "manifest.json.tmp";
  {
    std::ofstream m(tmp, std::ios::binary | std::ios::trunc);
    if (!m) throw IoError("cannot write " + tmp.string());
    m << manifest.dump(2) << '\n';
    if (!m) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, summary.manifest_path, ec);
  if (ec) throw IoError("cannot finalize " + summary.manifest_path.string() + ": " + ec.message());
  return summary;
}

}  // namespace psydial
