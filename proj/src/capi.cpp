#include "psydial/psydial.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>

#include "config.hpp"
#include "corpus.hpp"
#include "knowledge.hpp"
#include "metrics.hpp"
#include "orchestrator.hpp"
#include "statemachine.hpp"

using namespace psydial;

struct psyd_config {
  AppConfig cfg;
};

struct psyd_machine {
  std::shared_ptr<const StateMachineDef> def;
};

struct psyd_runtime {
  MachineRuntime rt;
  Rng rng;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

psyd_status fail(psyd_status st, const std::string& msg) {
  g_last_error = msg;
  return st;
}

std::string describe(const ValidationError& e) {
  std::string msg = e.what();
  for (const auto& i : e.issues()) msg += "\n  " + i;
  return msg;
}

/// Runs `f`, mapping exceptions to status codes.
template <typename F>
psyd_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const ConfigError& e) {
    return fail(PSYD_ERR_USAGE, e.what());
  } catch (const ValidationError& e) {
    return fail(PSYD_ERR_INVALID, describe(e));
  } catch (const ParseError& e) {
    return fail(PSYD_ERR_INVALID, e.what());
  } catch (const PreconditionError& e) {
    return fail(PSYD_ERR_INVALID, e.what());
  } catch (const IoError& e) {
    return fail(PSYD_ERR_IO, e.what());
  } catch (const BackendError& e) {
    return fail(PSYD_ERR_BACKEND, e.what());
  } catch (const StateError& e) {
    return fail(PSYD_ERR_STATE, e.what());
  } catch (const std::exception& e) {
    return fail(PSYD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PSYD_ERR_INTERNAL, "unknown exception");
  }
}

#define PSYD_REQUIRE(cond, what) \
  if (!(cond)) return fail(PSYD_ERR_USAGE, what)

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// validate

struct FileReport {
  std::string path;
  std::string kind;
  std::size_t items = 0;
  std::vector<std::string> issues;
};

bool looks_like_machine(const std::filesystem::path& p) {
  if (p.extension() != ".json") return false;
  try {
    const json j = json::parse(read_text(p));
    return j.is_object() && j.contains("entry") && j.contains("disorder");
  } catch (const json::parse_error&) {
    // Report it as an EMR file so the parse error surfaces with a location.
    return false;
  }
}

FileReport check_machine(const std::filesystem::path& p) {
  FileReport r{p.string(), "machine", 0, {}};
  try {
    const auto def = parse_machine_def(read_text(p));
    r.items = def.nodes.size();
    r.issues = validate_machine(def);
  } catch (const ParseError& e) {
    r.issues.push_back(e.line() ? "line " + std::to_string(e.line()) + ", column " + std::to_string(e.column()) + ": " +
                                      e.what()
                                : std::string(e.what()));
  } catch (const ValidationError& e) {
    r.issues = e.issues();
  }
  return r;
}

FileReport check_emrs(const std::filesystem::path& p, const DsdKg& kg) {
  FileReport r{p.string(), "emr", 0, {}};
  try {
    const auto emrs = load_emrs(p);
    r.items = emrs.size();
    if (emrs.empty()) r.issues.push_back("no EMR records found");
    std::set<std::string> seen;
    for (const auto& e : emrs) {
      for (auto& issue : validate_emr(e, kg)) r.issues.push_back(std::move(issue));
      if (!e.emr_id.empty() && !seen.insert(e.emr_id).second) r.issues.push_back("duplicate emr_id " + e.emr_id);
    }
  } catch (const ParseError& e) {
    r.issues.push_back(e.line() ? "line " + std::to_string(e.line()) + ": " + e.what() : std::string(e.what()));
  } catch (const ValidationError& e) {
    r.issues = e.issues();
  }
  return r;
}

FileReport check_context_tree(const std::filesystem::path& p) {
  FileReport r{p.string(), "context_tree", 0, {}};
  try {
    const auto def = load_context_tree(read_text(p));
    r.items = def.leaves.size();
    r.issues = validate_context_tree(def);
  } catch (const ParseError& e) {
    r.issues.push_back(e.what());
  } catch (const ValidationError& e) {
    r.issues = e.issues();
  }
  return r;
}

json to_json(const FileReport& r) {
  return json{{"path", r.path}, {"kind", r.kind}, {"items", r.items}, {"issues", r.issues}};
}

std::vector<std::filesystem::path> expand(const std::filesystem::path& p) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(p, ec)) throw IoError("no such file or directory: " + p.string());
  if (!fs::is_directory(p, ec)) return {p};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(p)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DiversityOptions diversity_options(const AppConfig& c) {
  DiversityOptions o;
  o.keywords_k = c.keywords_k;
  o.tokenizer = c.tokenizer;
  try {
    o.stopwords = text::load_word_list(c.stopwords.string());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  o.embedder = std::make_shared<HashingEmbedder>(c.embedding_dim, c.tokenizer);
  return o;
}

}  // namespace

extern "C" {

const char* psyd_version(void) { return PSYD_VERSION; }

const char* psyd_last_error(void) { return g_last_error.c_str(); }

void psyd_string_free(char* s) { std::free(s); }

psyd_status psyd_config_resolve(const char* config_path, const char* overrides_json, psyd_config** out) {
  PSYD_REQUIRE(out, "psyd_config_resolve: null out pointer");
  *out = nullptr;
  return guarded([&] {
    std::vector<json> layers;
    if (const char* env = std::getenv("PSYD_DATA_DIR"); env && *env) layers.push_back(json{{"data_dir", env}});
    if (config_path && *config_path) layers.push_back(read_config_file(config_path));
    if (overrides_json && *overrides_json) {
      json o;
      try {
        o = json::parse(overrides_json);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("overrides: ") + e.what());
      }
      layers.push_back(std::move(o));
    }
    auto cfg = std::make_unique<psyd_config>();
    cfg->cfg = resolve_config(default_config_json(PSYD_DEFAULT_DATA_DIR), layers);
    *out = cfg.release();
    return PSYD_OK;
  });
}

psyd_status psyd_config_json(const psyd_config* cfg, char** out_json) {
  PSYD_REQUIRE(cfg && out_json, "psyd_config_json: null argument");
  return guarded([&] {
    *out_json = dup_string(cfg->cfg.effective.dump(2));
    return PSYD_OK;
  });
}

void psyd_config_free(psyd_config* cfg) { delete cfg; }

psyd_status psyd_machine_load(const char* path, psyd_machine** out) {
  PSYD_REQUIRE(path && out, "psyd_machine_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<psyd_machine>();
    m->def = std::make_shared<const StateMachineDef>(load_machine_def_file(path));
    *out = m.release();
    return PSYD_OK;
  });
}

void psyd_machine_free(psyd_machine* m) { delete m; }

psyd_status psyd_machine_terminals(const psyd_machine* m, char** out_json) {
  PSYD_REQUIRE(m && out_json, "psyd_machine_terminals: null argument");
  return guarded([&] {
    std::set<std::string> codes;
    for (const auto& p : enumerate_paths(*m->def)) codes.insert(p.terminal);
    *out_json = dup_string(json(codes).dump());
    return PSYD_OK;
  });
}

psyd_status psyd_runtime_new(const psyd_machine* m, uint64_t seed, psyd_runtime** out) {
  PSYD_REQUIRE(m && out, "psyd_runtime_new: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new psyd_runtime{MachineRuntime(m->def), Rng(seed)};
    return PSYD_OK;
  });
}

void psyd_runtime_free(psyd_runtime* rt) { delete rt; }

psyd_status psyd_runtime_current(const psyd_runtime* rt, char** out_node_id) {
  PSYD_REQUIRE(rt && out_node_id, "psyd_runtime_current: null argument");
  return guarded([&] {
    *out_node_id = dup_string(rt->rt.current_topic().id);
    return PSYD_OK;
  });
}

psyd_status psyd_runtime_question(const psyd_runtime* rt, char** out_text) {
  PSYD_REQUIRE(rt && out_text, "psyd_runtime_question: null argument");
  return guarded([&] {
    *out_text = dup_string(render_question(rt->rt.def(), rt->rt.current_topic(), rt->rt.position_in_group()));
    return PSYD_OK;
  });
}

psyd_status psyd_runtime_answer(psyd_runtime* rt, int present) {
  PSYD_REQUIRE(rt, "psyd_runtime_answer: null runtime");
  return guarded([&] {
    rt->rt.apply_response(present ? Answer::present : Answer::absent, rt->rng);
    return PSYD_OK;
  });
}

psyd_status psyd_runtime_terminal(const psyd_runtime* rt, int* out, char** out_code) {
  PSYD_REQUIRE(rt && out, "psyd_runtime_terminal: null argument");
  return guarded([&] {
    *out = rt->rt.terminated() ? 1 : 0;
    if (out_code) *out_code = rt->rt.terminated() ? dup_string(*rt->rt.terminal()) : nullptr;
    return PSYD_OK;
  });
}

psyd_status psyd_validate(const psyd_config* cfg, const char* const* paths, size_t n_paths, char** out_report) {
  PSYD_REQUIRE(cfg && out_report, "psyd_validate: null argument");
  PSYD_REQUIRE(n_paths == 0 || paths, "psyd_validate: null path list");
  *out_report = nullptr;
  return guarded([&] {
    const auto& c = cfg->cfg;
    std::vector<FileReport> reports;
    std::vector<std::filesystem::path> files;
    if (n_paths == 0) {
      for (const char* name : {"mdd.json", "ad.json", "bd.json", "adhd.json"}) files.push_back(c.machines_dir / name);
      for (const auto& f : files) {
        if (!std::filesystem::exists(f)) throw IoError("no such file: " + f.string());
      }
      reports.push_back(check_context_tree(c.data_dir / "context_tree.json"));
      files.push_back(c.emrs);
    } else {
      for (size_t i = 0; i < n_paths; ++i) {
        PSYD_REQUIRE(paths[i], "psyd_validate: null path");
        for (auto& f : expand(paths[i])) files.push_back(std::move(f));
      }
    }

    std::optional<DsdKg> kg;
    for (const auto& f : files) {
      if (looks_like_machine(f)) {
        reports.push_back(check_machine(f));
        continue;
      }
      // EMR symptom ids are checked against the configured machines.
      if (!kg) kg = kg_from_machines(load_machine_set(c.machines_dir));
      const auto expanded = std::filesystem::is_directory(f) ? expand(f) : std::vector<std::filesystem::path>{f};
      if (expanded.empty()) reports.push_back({f.string(), "emr", 0, {"no .json or .jsonl files"}});
      for (const auto& e : expanded) reports.push_back(check_emrs(e, *kg));
    }

    json doc;
    std::size_t issues = 0;
    doc["files"] = json::array();
    for (const auto& r : reports) {
      issues += r.issues.size();
      doc["files"].push_back(to_json(r));
    }
    doc["issue_count"] = issues;
    *out_report = dup_string(doc.dump(2));
    return issues ? fail(PSYD_ERR_INVALID, std::to_string(issues) + " issue(s) found") : PSYD_OK;
  });
}

psyd_status psyd_generate(const psyd_config* cfg, char** out_summary) {
  PSYD_REQUIRE(cfg && out_summary, "psyd_generate: null argument");
  *out_summary = nullptr;
  return guarded([&] {
    const auto& c = cfg->cfg;
    const auto res = load_resources(c.data_dir, c.machines_dir);
    GenerationJob job;
    job.emrs = load_emrs(c.emrs);
    if (job.emrs.empty()) throw PreconditionError("no EMRs found in " + c.emrs.string());
    std::vector<std::string> issues;
    for (const auto& e : job.emrs) {
      for (auto& i : validate_emr(e, res.kg)) issues.push_back(std::move(i));
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    job.feds_per_emr = c.feds_per_emr;
    job.strategies = c.strategies;
    job.seed = c.seed;
    job.out_dir = c.out;
    job.workers = c.workers;
    job.session.turn_cap = c.turn_cap;
    job.session.max_experience_triggers = c.max_experience_triggers;
    job.session.view_window = c.view_window;
    job.config = c.effective;

    std::unique_ptr<RemoteBackend> remote;
    if (c.backend == BackendKind::remote) remote = std::make_unique<RemoteBackend>(c.remote);
    const auto summary = generate_dataset(job, res, remote.get());
    *out_summary = dup_string(to_json(summary).dump(2));
    if (summary.backend_failures)
      return fail(PSYD_ERR_BACKEND, std::to_string(summary.backend_failures) + " session(s) failed in the backend");
    return PSYD_OK;
  });
}

psyd_status psyd_eval(const psyd_config* cfg, const char* corpus_path, const char* gold_path, const char* baseline_path,
                      unsigned flags, char** out_report) {
  PSYD_REQUIRE(cfg && corpus_path && out_report, "psyd_eval: null argument");
  *out_report = nullptr;
  return guarded([&] {
    const auto& c = cfg->cfg;
    const auto corpus = read_corpus(corpus_path);
    if (corpus.empty()) throw PreconditionError(std::string(corpus_path) + ": corpus is empty");
    const auto gold = load_gold(gold_path && *gold_path ? std::filesystem::path(gold_path) : c.emrs);
    const auto aligned = align(corpus, gold);

    MetricReport r;
    r.evaluated = aligned.predicted.size();
    r.subset_accuracy = subset_accuracy(aligned.predicted, aligned.gold);
    for (auto d : kAllDisorders) r.per_label[d] = per_label_prf(aligned.predicted, aligned.gold, d);

    std::optional<DiscordantPair> pair;
    std::string comparison;
    if (baseline_path && *baseline_path) {
      pair = discordant_by_session(corpus, read_corpus(baseline_path), gold);
      comparison = "corpus vs baseline by session_id";
    } else {
      pair = discordant_by_strategy(corpus, gold);
      comparison = "symptom_informed vs random";
    }
    if (pair && pair->pairs) {
      r.mcnemar = McNemarResult{pair->b, pair->c, pair->pairs, mcnemar_exact(pair->b, pair->c), comparison};
    }
    if (flags & PSYD_EVAL_STATS) r.corpus_stats = dialogue_stats(corpus, c.char_count);
    if (flags & PSYD_EVAL_DIVERSITY) r.diversity = compute_diversity(corpus, diversity_options(c));
    *out_report = dup_string(to_json(r).dump(2));
    return PSYD_OK;
  });
}

psyd_status psyd_stats(const psyd_config* cfg, const char* corpus_path, int diversity, char** out_report) {
  PSYD_REQUIRE(cfg && corpus_path && out_report, "psyd_stats: null argument");
  *out_report = nullptr;
  return guarded([&] {
    const auto& c = cfg->cfg;
    const auto corpus = read_corpus(corpus_path);
    if (corpus.empty()) throw PreconditionError(std::string(corpus_path) + ": corpus is empty");
    ordered_json doc;
    const auto st = dialogue_stats(corpus, c.char_count);
    doc["sessions"] = st.sessions;
    doc["char_count"] = std::string(to_string(c.char_count));
    doc["avg_chars_doctor"] = st.avg_chars_doctor;
    doc["avg_chars_patient"] = st.avg_chars_patient;
    doc["avg_turns"] = st.avg_turns;
    if (diversity) {
      MetricReport tmp;
      tmp.diversity = compute_diversity(corpus, diversity_options(c));
      doc["diversity"] = to_json(tmp)["diversity"];
    }
    *out_report = dup_string(doc.dump(2));
    return PSYD_OK;
  });
}

}  // extern "C"
