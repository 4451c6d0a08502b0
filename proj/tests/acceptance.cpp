// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Oracles here are written independently
// of the engine code they check.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "agents.hpp"
#include "corpus.hpp"
#include "metrics.hpp"
#include "orchestrator.hpp"
#include "scripted.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace psydial;
using namespace psydial::testing;

namespace {

// Collects failures for one criterion; the first few are printed.
struct Check {
  std::vector<std::string> failures;
  std::size_t checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
};

struct Criterion {
  int number;
  std::string name;
  double time_limit_s;
  std::function<void(Check&)> run;
};

Emr base_emr(const std::string& id) {
  Emr e = load_emrs(data_dir() / "emrs" / "sample" / "sample-01.json").front();
  e.emr_id = id;
  e.symptom_ids.clear();
  e.preliminary_diagnosis = {};
  return e;
}

FedNarrative fed_for(const Emr& emr) { return {emr.emr_id, emr.emr_id + "-H1", emr.emr_id + "-E01", "An ordinary year."}; }

// ---------------------------------------------------------------------------

void c1_a00_oracle(Check& ck) {
  const auto& res = shipped();
  // Member ids listed by hand; the group definition must agree.
  const std::vector<std::string> members{"A3", "A6", "A9", "A9Y", "A12", "A13", "A13Y", "A16", "A17"};
  const auto& group = res.machines.at(Disorder::MDD).group("A00").members;
  ck.expect(std::set<std::string>(group.begin(), group.end()) == std::set<std::string>(members.begin(), members.end()),
            "A00 members differ from the hand list");
  for (unsigned mask = 0; mask < 512; ++mask) {
    Emr emr = base_emr("a00-" + std::to_string(mask));
    emr.symptom_ids = {"A1", "A1Y", "A2Y", "A23"};
    int truths = 0;
    for (unsigned i = 0; i < 9; ++i) {
      if (mask & (1u << i)) {
        emr.symptom_ids.insert(members[i]);
        ++truths;
      }
    }
    const bool oracle = truths >= 5;
    const auto r = run_session(emr, fed_for(emr), doctor_profile(1), Strategy::random, mask, res, nullptr);
    if (r.status != SessionResult::Status::ok) {
      ck.expect(false, "mask " + std::to_string(mask) + ": session " + std::string(to_string(r.status)) + " " + r.error);
      continue;
    }
    const auto& final_mdd = r.session.final_diagnoses.at(Disorder::MDD);
    ck.expect((final_mdd == "depression3") == oracle,
              "mask " + std::to_string(mask) + " (" + std::to_string(truths) + " true) ended at " + final_mdd);
    ck.expect(r.session.predicted_labels.contains(Disorder::MDD) == oracle,
              "mask " + std::to_string(mask) + ": MDD label disagrees with the count rule");
    // Every A00 member must have been asked exactly once.
    std::map<std::string, int> asked;
    for (const auto& t : r.session.turns)
      if (t.role == Role::doctor && t.topic_state) ++asked[*t.topic_state];
    for (const auto& m : members) ck.expect(asked[m] == 1, "mask " + std::to_string(mask) + ": " + m + " not asked once");
  }
}

void c2_totality(Check& ck) {
  const std::map<Disorder, std::set<std::string>> tables{
      {Disorder::MDD, {"depression1", "depression2", "depression3", "depression4", "depression5"}},
      {Disorder::AD, {"anxiety1", "anxiety2", "anxiety3", "anxiety4", "anxiety5", "anxiety6"}},
      {Disorder::BD,
       {"bipolar1", "bipolar2", "bipolar3", "bipolar4", "bipolar5", "bipolar6", "bipolar7", "bipolar8", "bipolar9"}},
      {Disorder::ADHD, {"adhd1", "adhd2"}}};
  const std::map<Disorder, std::size_t> sizes{{Disorder::MDD, 5}, {Disorder::AD, 6}, {Disorder::BD, 9}, {Disorder::ADHD, 2}};
  for (const auto* def : shipped().machines.all()) {
    const std::string name(to_string(def->disorder));
    std::vector<std::string> problems;
    const auto paths = enumerate_paths(*def, &problems);
    ck.expect(problems.empty(), name + ": " + (problems.empty() ? "" : problems.front()));
    ck.expect(!paths.empty(), name + ": no paths");
    std::set<std::string> reached;
    for (const auto& p : paths) {
      const bool is_terminal = def->terminals.count(p.terminal) == 1;
      ck.expect(is_terminal, name + ": path ends at non-terminal '" + p.terminal + "'");
      std::size_t terminal_steps = 0;
      for (const auto& s : p.steps) terminal_steps += def->terminals.count(s);
      ck.expect(terminal_steps == 0, name + ": a terminal appears mid-path");
      reached.insert(p.terminal);
    }
    std::set<std::string> declared;
    for (const auto& [code, t] : def->terminals) declared.insert(code);
    ck.expect(reached == declared, name + ": reachable terminals differ from declared terminals");
    ck.expect(declared == tables.at(def->disorder), name + ": declared terminals differ from the reference table");
    ck.expect(declared.size() == sizes.at(def->disorder), name + ": wrong terminal count");
  }
}

void c3_traversal(Check& ck) {
  const auto& res = shipped();
  const std::vector<std::string> mde_flags{"current_mde", "past_mde"};
  for (const auto& [disorder, def] : res.machines.defs) {
    const std::string name(to_string(disorder));
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(derive_seed(0xACCE55, {static_cast<std::uint64_t>(disorder), seed}));
      // Present-answer rate varies per script so long and short routes both occur.
      const std::size_t rate = 1 + rng.uniform_index(9);
      auto rt = init_runtime(def);
      if (disorder == Disorder::BD) {
        EpisodeFlags injected;
        for (const auto& f : mde_flags)
          if (rng.uniform_index(2)) injected.insert(f);
        rt.inject_flags(injected);
      }
      std::set<std::string> seen;
      std::size_t answers = 0;
      bool ok = true;
      while (!rt.terminated() && answers <= kDefaultTurnCap) {
        const std::string id = rt.current_topic().id;
        if (!seen.insert(id).second) {
          ck.expect(false, name + " seed " + std::to_string(seed) + ": revisited " + id);
          ok = false;
          break;
        }
        const auto before = rt.active_group();
        const auto out = rt.apply_response(rng.uniform_index(10) < rate ? Answer::present : Answer::absent, rng, id);
        ++answers;
        if (before && rt.active_group() != before) {
          const auto& g = def->group(*before);
          for (const auto& m : g.members) {
            if (!seen.count(m)) {
              ck.expect(false, name + " seed " + std::to_string(seed) + ": left " + *before + " before " + m);
              ok = false;
            }
          }
          int present = 0;
          for (const auto& m : g.members) present += rt.responses().at(m) == Answer::present;
          ck.expect(out.group_verdict.has_value(), name + ": group exit without a verdict");
          if (out.group_verdict)
            ck.expect((*out.group_verdict == GroupVerdict::positive) == (present >= g.threshold),
                      name + ": verdict disagrees with the tally");
        } else if (before) {
          ck.expect(out.kind == TransitionOutcome::Kind::group_continues, name + ": group step kind");
        }
      }
      if (!ok) continue;
      // Two utterances per answer must fit the session cap.
      ck.expect(rt.terminated() && 2 * answers <= kDefaultTurnCap,
                name + " seed " + std::to_string(seed) + ": did not terminate within the cap");
    }
  }

  // Whole sessions stay under the cap: 1000 random answer scripts per
  // machine, then 1000 over the disorders of an eligible combination.
  auto run_scripts = [&](const std::string& tag, std::uint64_t salt, const std::function<bool(Disorder, std::uint64_t)>& in_scope) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(derive_seed(0x5E55, {salt, seed}));
      Emr emr = base_emr("trav-" + tag + "-" + std::to_string(seed));
      const std::size_t rate = rng.uniform_index(11);
      for (const auto& [id, owner] : res.kg.owner)
        if (in_scope(owner, seed) && rng.uniform_index(10) < rate) emr.symptom_ids.insert(id);
      const auto strategy = seed % 2 ? Strategy::symptom_informed : Strategy::random;
      const auto r = run_session(emr, fed_for(emr), doctor_profile(static_cast<int>(seed % 5) + 1), strategy, seed, res,
                                 nullptr);
      const std::string where = tag + " script " + std::to_string(seed);
      ck.expect(r.status == SessionResult::Status::ok, where + ": " + std::string(to_string(r.status)) + " " + r.error);
      ck.expect(r.session.turns.size() <= kDefaultTurnCap, where + ": over the cap");
      std::set<std::string> asked;
      for (const auto& t : r.session.turns) {
        if (t.role != Role::doctor || !t.topic_state) continue;
        ck.expect(asked.insert(*t.topic_state).second, where + ": topic " + *t.topic_state + " asked twice");
      }
    }
  };
  for (const auto& [disorder, def] : res.machines.defs)
    run_scripts(std::string(to_string(disorder)), static_cast<std::uint64_t>(disorder),
                [d = disorder](Disorder o, std::uint64_t) { return o == d; });
  const auto combos = eligible_combinations();
  run_scripts("combination", 99,
              [&](Disorder o, std::uint64_t seed) { return combos[seed % combos.size()].contains(o); });
}

// Clause semantics written out directly.
std::optional<std::string> bipolar_oracle(const EpisodeFlags& f) {
  const bool manic = f.count("manic_episode");
  const bool hypomanic = f.count("hypomanic_episode");
  const bool mde = f.count("current_mde") || f.count("past_mde");
  if (manic) return "bipolar8";
  if (hypomanic && mde) return "bipolar9";
  return std::nullopt;
}

void c4_bipolar(Check& ck) {
  const auto& bd = shipped().machines.at(Disorder::BD);
  ck.expect(resolve_bipolar(bd, {"manic_episode"}) == std::optional<std::string>("bipolar8"), "{manic} -> bipolar8");
  ck.expect(resolve_bipolar(bd, {"hypomanic_episode", "current_mde"}) == std::optional<std::string>("bipolar9"),
            "{hypomanic, MDE} -> bipolar9");
  ck.expect(!resolve_bipolar(bd, {"hypomanic_episode"}).has_value(), "{hypomanic} alone -> no determinative terminal");

  const std::vector<std::string> universe{"manic_episode", "hypomanic_episode", "current_mde", "past_mde"};
  Rng rng(0xB1);
  for (int i = 0; i < 100; ++i) {
    EpisodeFlags flags;
    for (const auto& f : universe)
      if (rng.uniform_index(2)) flags.insert(f);
    std::string label;
    for (const auto& f : flags) label += f + " ";
    ck.expect(resolve_bipolar(bd, flags) == bipolar_oracle(flags), "flags {" + label + "}");
  }

  // The same rules inside the machine: drive BD to each stage with every MDE
  // injection and compare the terminal with the oracle.
  const auto def = shipped().machines.defs.at(Disorder::BD);
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng r(derive_seed(0xB2, {seed}));
    auto rt = init_runtime(def);
    EpisodeFlags injected;
    if (r.uniform_index(2)) injected.insert("current_mde");
    if (r.uniform_index(2)) injected.insert("past_mde");
    rt.inject_flags(injected);
    while (!rt.terminated()) rt.apply_response(r.uniform_index(2) ? Answer::present : Answer::absent, r);
    const auto& flags = rt.episode_flags();
    const bool stage_reached = flags.count("manic_episode") || flags.count("hypomanic_episode");
    if (!stage_reached) continue;
    const auto expected = bipolar_oracle(flags);
    if (expected) {
      ck.expect(*rt.terminal() == *expected, "runtime seed " + std::to_string(seed) + " ended at " + *rt.terminal());
    } else {
      ck.expect(*rt.terminal() != "bipolar8" && *rt.terminal() != "bipolar9",
                "runtime seed " + std::to_string(seed) + ": bipolar terminal without its clause");
    }
  }
}

void c5_closure(Check& ck) {
  const auto& res = shipped();
  for (const auto& emr : load_emrs(data_dir() / "emrs" / "sample")) {
    ck.expect(is_dataset_eligible(emr.preliminary_diagnosis), emr.emr_id + ": not one of the six combinations");
    for (auto s : {Strategy::random, Strategy::symptom_informed}) {
      const auto r = run_session(emr, fed_for(emr), doctor_profile(2), s, 3, res, nullptr);
      ck.expect(r.status == SessionResult::Status::ok && r.session.predicted_labels == emr.preliminary_diagnosis,
                emr.emr_id + " (" + std::string(to_string(s)) + "): predicted " + to_string(r.session.predicted_labels));
    }
  }
  const auto fixture = synthetic_fixture(10, 2024, res.machines);
  ck.expect(fixture.size() == 60, "fixture size " + std::to_string(fixture.size()));
  std::map<std::uint8_t, int> per_combo;
  std::vector<ComorbidityProfile> preds, golds;
  for (std::size_t i = 0; i < fixture.size(); ++i) {
    const auto& emr = fixture[i];
    ++per_combo[emr.preliminary_diagnosis.mask()];
    const auto s = i % 2 ? Strategy::symptom_informed : Strategy::random;
    const auto r = run_session(emr, fed_for(emr), doctor_profile(static_cast<int>(i % 5) + 1), s, i, res, nullptr);
    ck.expect(r.status == SessionResult::Status::ok, emr.emr_id + ": " + r.error);
    preds.push_back(r.session.predicted_labels);
    golds.push_back(emr.preliminary_diagnosis);
  }
  for (const auto& combo : eligible_combinations())
    ck.expect(per_combo[combo.mask()] == 10, "combination " + to_string(combo) + " count");
  const double acc = subset_accuracy(preds, golds);
  ck.expect(acc == 1.0, "subset accuracy " + std::to_string(acc));
}

void c6_replay(Check& ck) {
  const auto& res = shipped();
  TempDir a("replay-a"), b("replay-b"), c("replay-c");
  GenerationJob job;
  job.emrs = load_emrs(data_dir() / "emrs" / "sample");
  job.seed = 20240601;
  job.out_dir = a.path();
  generate_dataset(job, res, nullptr);
  job.out_dir = b.path();
  generate_dataset(job, res, nullptr);
  job.out_dir = c.path();
  job.workers = 3;
  generate_dataset(job, res, nullptr);
  for (const char* f : {"corpus.jsonl", "feds.jsonl"}) {
    const auto first = slurp(a / f);
    ck.expect(!first.empty(), std::string(f) + " is empty");
    ck.expect(first == slurp(b / f), std::string(f) + " differs between identical runs");
    ck.expect(first == slurp(c / f), std::string(f) + " differs with more workers");
  }
  ck.expect(slurp(a / "manifest.json") == slurp(b / "manifest.json"), "manifest differs between identical runs");
  job.seed = 20240602;
  TempDir d("replay-d");
  job.out_dir = d.path();
  generate_dataset(job, res, nullptr);
  ck.expect(slurp(a / "corpus.jsonl") != slurp(d / "corpus.jsonl"), "a different seed gave the same corpus");
}

void c7_arithmetic(Check& ck) {
  const auto& res = shipped();
  TempDir dir("arith");
  GenerationJob job;
  job.emrs = {load_emrs(data_dir() / "emrs" / "sample" / "sample-01.json").front(),
              load_emrs(data_dir() / "emrs" / "sample" / "sample-04.json").front()};
  job.feds_per_emr = 5;
  job.strategies = {Strategy::random, Strategy::symptom_informed};
  job.out_dir = dir.path();
  const auto s = generate_dataset(job, res, nullptr);
  ck.expect(s.attempted == 2 * 5 * 2, "attempted " + std::to_string(s.attempted));
  ck.expect(s.completed == 20, "completed " + std::to_string(s.completed));
  ck.expect(read_corpus(s.corpus_path).size() == 20, "corpus line count");

  std::istringstream feds(slurp(dir / "feds.jsonl"));
  std::string line;
  int entries = 0;
  while (std::getline(feds, line)) {
    if (line.empty()) continue;
    ++entries;
    const auto j = json::parse(line);
    ck.expect(j["personal_histories"].size() == 5, "histories per EMR");
    ck.expect(j["fictitious_experiences"].size() == 10, "experiences per EMR");
    ck.expect(j["feds"].size() == 5, "FEDs per EMR");
  }
  ck.expect(entries == 2, "FED entries " + std::to_string(entries));

  Rng rng(1);
  const auto all = sample_fed_pairs(50, rng);
  ck.expect(std::set<std::pair<int, int>>(all.begin(), all.end()).size() == 50, "50 distinct history/experience pairs");
  bool refused = false;
  try {
    sample_fed_pairs(51, rng);
  } catch (const PreconditionError&) {
    refused = true;
  }
  ck.expect(refused, "more than 50 FEDs accepted");
}

// Independent metric oracles.
double oracle_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::string> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

double oracle_binomial_p(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const std::uint64_t k = std::min(b, c);
  // Pascal's row in long double; exact for the sizes used here.
  std::vector<long double> row{1.0L};
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<long double> next(row.size() + 1, 0.0L);
    for (std::size_t j = 0; j < row.size(); ++j) {
      next[j] += row[j];
      next[j + 1] += row[j];
    }
    row = std::move(next);
  }
  long double tail = 0;
  for (std::uint64_t i = 0; i <= k; ++i) tail += row[i];
  return static_cast<double>(std::min(1.0L, 2.0L * tail / std::pow(2.0L, static_cast<long double>(n))));
}

void c8_metrics(Check& ck) {
  Rng rng(0x8E7);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "f", "g", "h"};

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(5);
    std::vector<std::set<std::string>> family(n);
    for (auto& s : family)
      for (std::size_t i = 0; i < 6; ++i)
        if (rng.uniform_index(2)) s.insert(alphabet[i]);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sum += oracle_jaccard(family[i], family[j]);
    const double expected = 1.0 - sum / (static_cast<double>(n * (n - 1)) / 2.0);
    ck.expect(std::fabs(intra_emr_diversity(family) - expected) <= 1e-12, "intra_emr trial " + std::to_string(trial));
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng.uniform_index(60);
    const std::size_t vocab = 1 + rng.uniform_index(alphabet.size());
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < len; ++i) tokens.push_back(alphabet[rng.uniform_index(vocab)]);
    std::map<std::string, int> freq;
    for (const auto& t : tokens) ++freq[t];
    const double V = static_cast<double>(freq.size());
    double h = 0;
    int hapax = 0;
    for (const auto& [t, f] : freq) {
      const double p = f / static_cast<double>(len);
      h -= p * std::log2(p);
      hapax += f == 1;
    }
    const double ent = V <= 1 ? 0.0 : h / std::log2(V);
    ck.expect(std::fabs(normalized_entropy(tokens) - ent) <= 1e-9, "entropy trial " + std::to_string(trial));
    ck.expect(std::fabs(hapax_proportion(tokens) - hapax / V) <= 1e-12, "hapax trial " + std::to_string(trial));
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(5);
    const std::size_t dim = 1 + rng.uniform_index(8);
    std::vector<std::vector<double>> vs(n, std::vector<double>(dim));
    for (auto& v : vs) {
      do {
        for (auto& x : v) x = static_cast<double>(rng.uniform_index(5));
      } while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }));
    }
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dot = 0, ni = 0, nj = 0;
        for (std::size_t k = 0; k < dim; ++k) {
          dot += vs[i][k] * vs[j][k];
          ni += vs[i][k] * vs[i][k];
          nj += vs[j][k] * vs[j][k];
        }
        sum += dot / (std::sqrt(ni) * std::sqrt(nj));
      }
    }
    const double expected = 1.0 - sum / (static_cast<double>(n * (n - 1)) / 2.0);
    ck.expect(std::fabs(semantic_diversity(vs) - expected) <= 1e-12, "semantic trial " + std::to_string(trial));
  }

  ck.expect(mcnemar_exact(5, 0) == 0.0625, "mcnemar(5,0) = " + std::to_string(mcnemar_exact(5, 0)));
  for (int trial = 0; trial < 1000; ++trial) {
    const auto b = rng.uniform_index(trial < 500 ? 40 : 3000);
    const auto c = rng.uniform_index(trial < 500 ? 40 : 3000);
    const double p = mcnemar_exact(b, c);
    ck.expect(p == mcnemar_exact(c, b), "mcnemar symmetry at " + std::to_string(b) + "," + std::to_string(c));
    ck.expect(p >= 0 && p <= 1, "mcnemar range");
    if (trial < 500)
      ck.expect(std::fabs(p - oracle_binomial_p(b, c)) <= 1e-12,
                "mcnemar vs binomial oracle at " + std::to_string(b) + "," + std::to_string(c));
  }
}

void c9_classifier(Check& ck) {
  const auto& res = shipped();
  const Emr none = base_emr("cls");
  std::size_t cases = 0;
  for (const auto* def : res.machines.all()) {
    for (const auto& id : def->node_order) {
      const auto& node = def->node(id);
      Emr with = none;
      with.symptom_ids = {id};
      for (const auto& [emr, truth] : {std::pair<const Emr*, Answer>{&with, Answer::present}, std::pair<const Emr*, Answer>{&none, Answer::absent}}) {
        const auto reply = scripted_patient_reply(*emr, res.kg, node);
        ++cases;
        ck.expect(reply.label == truth, id + ": scripted label");
        ck.expect(classify_rule(reply.text, res.tokens) == truth,
                  id + " (" + std::string(to_string(truth)) + "): \"" + reply.text + "\"");
      }
    }
  }
  ck.expect(cases > 200, "only " + std::to_string(cases) + " classifier cases");
}

void c10_backend(Check& ck) {
  using ms = std::chrono::milliseconds;
  BackendRequest req;
  req.system_prompt = "s";
  req.messages = {{"user", "q"}};
  req.max_chars = 50;

  {
    MockServer server([](const std::string&, int, httplib::Response& res) { res.status = 503; });
    BackendConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "m";
    cfg.max_retries = 3;
    cfg.backoff_initial_ms = 40;
    cfg.backoff_mult = 2.0;
    RemoteBackend backend(cfg);
    bool threw = false;
    try {
      backend.complete(req);
    } catch (const BackendError& e) {
      threw = true;
      ck.expect(e.attempts() == cfg.max_retries + 1, "attempts reported " + std::to_string(e.attempts()));
    }
    ck.expect(threw, "persistent 503 did not raise");
    ck.expect(server.calls() <= cfg.max_retries + 1, "server saw " + std::to_string(server.calls()) + " requests");
    ck.expect(server.calls() == cfg.max_retries + 1, "retries not exhausted");
    const auto t = server.arrivals();
    if (t.size() == 4) {
      const long long expected[] = {40, 80, 160};
      for (std::size_t i = 1; i < t.size(); ++i) {
        const auto gap = std::chrono::duration_cast<ms>(t[i] - t[i - 1]).count();
        ck.expect(gap >= expected[i - 1], "gap " + std::to_string(i) + " was " + std::to_string(gap) + " ms");
      }
      const auto g1 = std::chrono::duration_cast<ms>(t[2] - t[1]).count();
      const auto g2 = std::chrono::duration_cast<ms>(t[3] - t[2]).count();
      ck.expect(g2 > g1, "backoff did not grow");
    }
  }

  {
    MockServer server([](const std::string&, int, httplib::Response& res) {
      std::this_thread::sleep_for(ms(50));
      MockServer::reply(res, "ok");
    });
    BackendConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "m";
    cfg.max_concurrent = 3;
    RemoteBackend backend(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) threads.emplace_back([&] { backend.complete(req); });
    for (auto& th : threads) th.join();
    ck.expect(server.calls() == 12, "concurrent calls " + std::to_string(server.calls()));
    ck.expect(backend.high_water_mark() <= 3, "client high-water " + std::to_string(backend.high_water_mark()));
    ck.expect(server.peak_in_flight() <= 3, "server peak " + std::to_string(server.peak_in_flight()));
  }

  {
    MockServer server([](const std::string&, int, httplib::Response& res) { MockServer::reply(res, "fine"); });
    BackendConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.model = "test-model";
    RemoteBackend backend(cfg);
    BackendRequest wire;
    wire.system_prompt = "You are a careful interviewer.";
    wire.messages = {{"user", "Hello \"doctor\"\nI feel low."},
                     {"assistant", "Tell me more."},
                     {"user", "Schlaf ist schlecht, seit M\xC3\xA4rz."}};
    wire.max_chars = 200;
    wire.temperature = 0.7;
    backend.complete(wire);
    auto pinned = slurp(fixtures_dir() / "wire_request.json");
    while (!pinned.empty() && (pinned.back() == '\n' || pinned.back() == '\r')) pinned.pop_back();
    ck.expect(server.bodies().size() == 1 && server.bodies()[0] == pinned, "request body differs from the wire fixture");
  }
}

void c11_filter(Check& ck) {
  const auto kept = filter_users({{"u1", 10, 20}, {"u2", 9, 20}, {"u3", 10, 19}});
  ck.expect(kept.size() == 1 && kept[0].user_id == "u1", "boundary users");
}

void c12_cli(Check& ck) {
  TempDir dir("smoke");
  const std::string bin = "'" + psyd_binary() + "'";
  const std::string out = "'" + (dir.path() / "out").string() + "'";
  const std::string corpus = "'" + (dir.path() / "out" / "corpus.jsonl").string() + "'";
  const std::string report = "'" + (dir.path() / "report.json").string() + "'";

  const auto v = run_command(bin + " validate");
  ck.expect(v.exit_code == 0, "validate exit " + std::to_string(v.exit_code) + ": " + v.output);
  const auto g = run_command(bin + " --backend scripted --seed 7 --out " + out + " generate");
  ck.expect(g.exit_code == 0, "generate exit " + std::to_string(g.exit_code) + ": " + g.output);
  const auto e = run_command(bin + " eval " + corpus + " --stats --diversity --report " + report);
  ck.expect(e.exit_code == 0, "eval exit " + std::to_string(e.exit_code) + ": " + e.output);
  const auto s = run_command(bin + " stats --diversity " + corpus);
  ck.expect(s.exit_code == 0, "stats exit " + std::to_string(s.exit_code) + ": " + s.output);
  if (e.exit_code != 0) return;

  const auto schema = json::parse(slurp(data_dir() / "metric_report.schema.json"));
  json doc;
  try {
    doc = json::parse(slurp(dir.path() / "report.json"));
  } catch (const std::exception& ex) {
    ck.expect(false, std::string("report is not JSON: ") + ex.what());
    return;
  }
  for (const auto& m : schema_violations(schema, doc)) ck.expect(false, "schema: " + m);
  ck.expect(!doc["corpus_stats"].is_null() && !doc["diversity"].is_null(), "report lacks stats or diversity");
  ck.expect(doc["subset_accuracy"] == 1.0, "subset accuracy " + doc["subset_accuracy"].dump());
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "A00 group decision equals the >=5 count rule on all 512 assignments", 10, c1_a00_oracle},
      {2, "enumeration reaches one terminal per path; terminal sets 5/6/9/2 match the tables", 30, c2_totality},
      {3, "traversal invariants: 1000 random scripts per machine as runtimes and as sessions", 120, c3_traversal},
      {4, "bipolar clauses: directed cases and 100 random flag sets vs brute force", 30, c4_bipolar},
      {5, "scripted sessions recover sample EMR labels; 60-EMR fixture subset accuracy 1.0", 60, c5_closure},
      {6, "identical inputs give byte-identical corpora", 120, c6_replay},
      {7, "2 EMRs x 5 FEDs x 2 strategies = 20 sessions; 5 histories and 10 experiences", 60, c7_arithmetic},
      {8, "metric kernels match brute-force oracles; mcnemar(5,0) = 0.0625 and symmetry", 30, c8_metrics},
      {9, "rule classifier labels every scripted present/absent reply correctly", 30, c9_classifier},
      {10, "backend retries, backoff, concurrency bound and pinned wire body", 60, c10_backend},
      {11, "filter_users boundaries (10,20) kept, (9,20) and (10,19) dropped", 5, c11_filter},
      {12, "CLI validate -> generate -> eval -> stats exits 0 with a schema-valid report", 120, c12_cli},
  };

  // Load shared resources before timing starts.
  (void)shipped();

  int failed = 0;
  for (const auto& c : criteria) {
    Check ck;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(ck);
    } catch (const std::exception& e) {
      ck.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.time_limit_s) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "took %.2f s, limit %.0f s", secs, c.time_limit_s);
      ck.failures.push_back(buf);
    }
    const bool pass = ck.failures.empty();
    failed += !pass;
    std::printf("%s  %2d  %-88s %7.2fs  (%zu checks)\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(), secs,
                ck.checks);
    for (std::size_t i = 0; i < ck.failures.size() && i < 5; ++i) std::printf("        - %s\n", ck.failures[i].c_str());
    if (ck.failures.size() > 5) std::printf("        ... %zu more\n", ck.failures.size() - 5);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
