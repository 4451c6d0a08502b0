// Command-line front end. Talks to the engine only through the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psydial/psydial.h"

namespace {

using json = nlohmann::json;

enum Exit { kOk = 0, kInvalid = 1, kUsage = 2, kIo = 3, kBackend = 4 };

int exit_code(psyd_status st) {
  switch (st) {
    case PSYD_OK: return kOk;
    case PSYD_ERR_INVALID: return kInvalid;
    case PSYD_ERR_USAGE: return kUsage;
    case PSYD_ERR_IO: return kIo;
    case PSYD_ERR_BACKEND: return kBackend;
    default: return kInvalid;
  }
}

struct CString {
  char* p = nullptr;
  ~CString() { psyd_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ConfigHandle {
  psyd_config* p = nullptr;
  ~ConfigHandle() { psyd_config_free(p); }
};

int report_error(psyd_status st) {
  std::cerr << "psyd: " << psyd_last_error() << "\n";
  return exit_code(st);
}

std::string absolute(const std::string& p) { return std::filesystem::absolute(p).lexically_normal().string(); }

bool write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << "\n";
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  out << text << "\n";
  return static_cast<bool>(out);
}

struct Globals {
  std::string config;
  std::string data_dir;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string out;
  bool print_config = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue synthesis engine: validate definitions, generate corpora, evaluate and describe them."};
  app.set_version_flag("--version", std::string("psyd ") + psyd_version());
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--data-dir", g.data_dir, "Directory with machines/, prompts/ and the other resources");
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--backend", g.backend, "Text backend")->check(CLI::IsMember({"scripted", "remote"}));
  app.add_option("--out", g.out, "Output directory for generate");
  app.add_flag("--print-config", g.print_config, "Print the effective configuration to stderr");

  json overrides = json::object();

  auto* validate = app.add_subcommand("validate", "Check machine definitions and EMR files");
  std::vector<std::string> validate_paths;
  validate->add_option("paths", validate_paths, "Files or directories (default: shipped data)");

  auto* generate = app.add_subcommand("generate", "Generate a dialogue corpus");
  std::string emrs, strategies;
  std::optional<int> feds, workers, turn_cap;
  generate->add_option("--emrs", emrs, "EMR file or directory");
  generate->add_option("--strategies", strategies, "Comma-separated: random,symptom_informed");
  generate->add_option("--feds-per-emr", feds, "Fictitious experiences per EMR")->check(CLI::PositiveNumber);
  generate->add_option("--workers", workers, "Concurrent sessions")->check(CLI::PositiveNumber);
  generate->add_option("--turn-cap", turn_cap, "Maximum utterances per session")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score a corpus against gold labels");
  std::string eval_corpus, gold, baseline, report_path;
  bool eval_stats = false, eval_diversity = false;
  eval->add_option("corpus", eval_corpus, "corpus.jsonl")->required();
  eval->add_option("--gold", gold, "EMR records or session-gold JSONL (default: configured EMRs)");
  eval->add_option("--baseline", baseline, "Second corpus for the McNemar test");
  eval->add_flag("--stats", eval_stats, "Include corpus statistics");
  eval->add_flag("--diversity", eval_diversity, "Include diversity metrics");
  eval->add_option("--report", report_path, "Write the report here instead of stdout");

  auto* stats = app.add_subcommand("stats", "Describe a corpus");
  std::string stats_corpus;
  bool stats_diversity = false, stats_json = false;
  stats->add_option("corpus", stats_corpus, "corpus.jsonl")->required();
  stats->add_flag("--diversity", stats_diversity, "Include diversity metrics");
  stats->add_flag("--json", stats_json, "Print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (!g.data_dir.empty()) overrides["data_dir"] = absolute(g.data_dir);
  if (g.seed) overrides["seed"] = *g.seed;
  if (!g.backend.empty()) overrides["backend"] = g.backend;
  if (!g.out.empty()) overrides["out"] = absolute(g.out);
  if (!emrs.empty()) overrides["emrs"] = absolute(emrs);
  if (!strategies.empty()) overrides["strategies"] = strategies;
  if (feds) overrides["feds_per_emr"] = *feds;
  if (workers) overrides["workers"] = *workers;
  if (turn_cap) overrides["turn_cap"] = *turn_cap;

  ConfigHandle cfg;
  if (auto st = psyd_config_resolve(g.config.empty() ? nullptr : g.config.c_str(), overrides.dump().c_str(), &cfg.p);
      st != PSYD_OK)
    return report_error(st);
  if (g.print_config) {
    CString c;
    if (psyd_config_json(cfg.p, &c.p) == PSYD_OK) std::cerr << c.str() << "\n";
  }

  if (*validate) {
    std::vector<std::string> abs;
    for (const auto& p : validate_paths) abs.push_back(absolute(p));
    std::vector<const char*> ptrs;
    for (const auto& p : abs) ptrs.push_back(p.c_str());
    CString report;
    const auto st = psyd_validate(cfg.p, ptrs.data(), ptrs.size(), &report.p);
    if (!report.p) return report_error(st);
    const auto doc = json::parse(report.str());
    for (const auto& f : doc["files"]) {
      for (const auto& issue : f["issues"]) std::cout << f["path"].get<std::string>() << ": " << issue.get<std::string>() << "\n";
    }
    std::cout << doc["files"].size() << " file(s) checked, " << doc["issue_count"].get<std::size_t>() << " issue(s)\n";
    return exit_code(st);
  }

  if (*generate) {
    CString summary;
    const auto st = psyd_generate(cfg.p, &summary.p);
    if (!summary.p) return report_error(st);
    const auto s = json::parse(summary.str());
    std::cout << "sessions: " << s["completed"] << " completed of " << s["attempted"] << " attempted, "
              << s["eligible"] << " eligible, " << s["aborted"] << " aborted, " << s["failed"] << " failed\n"
              << "corpus: " << s["corpus"].get<std::string>() << "\n"
              << "manifest: " << s["manifest"].get<std::string>() << "\n";
    if (st != PSYD_OK) return report_error(st);
    return kOk;
  }

  if (*eval) {
    CString report;
    unsigned flags = (eval_stats ? PSYD_EVAL_STATS : 0u) | (eval_diversity ? PSYD_EVAL_DIVERSITY : 0u);
    const auto st = psyd_eval(cfg.p, eval_corpus.c_str(), gold.empty() ? nullptr : gold.c_str(),
                              baseline.empty() ? nullptr : baseline.c_str(), flags, &report.p);
    if (st != PSYD_OK) return report_error(st);
    if (!write_or_print(report.str(), report_path)) {
      std::cerr << "psyd: cannot write " << report_path << "\n";
      return kIo;
    }
    return kOk;
  }

  if (*stats) {
    CString report;
    const auto st = psyd_stats(cfg.p, stats_corpus.c_str(), stats_diversity ? 1 : 0, &report.p);
    if (st != PSYD_OK) return report_error(st);
    if (stats_json) {
      std::cout << report.str() << "\n";
      return kOk;
    }
    const auto d = json::parse(report.str());
    std::printf("sessions           %zu\n", d["sessions"].get<std::size_t>());
    std::printf("avg chars (D)      %.2f\n", d["avg_chars_doctor"].get<double>());
    std::printf("avg chars (P)      %.2f\n", d["avg_chars_patient"].get<double>());
    std::printf("avg turns          %.2f\n", d["avg_turns"].get<double>());
    if (d.contains("diversity")) {
      const auto& v = d["diversity"];
      auto num = [](const json& x) { return x.is_null() ? std::string("n/a") : std::to_string(x.get<double>()); };
      std::printf("intra-EMR          %s\n", num(v["intra_emr"]).c_str());
      std::printf("normalized entropy %s\n", num(v["normalized_entropy"]).c_str());
      std::printf("hapax proportion   %s\n", num(v["hapax"]).c_str());
      std::printf("semantic           %s\n", num(v["semantic"]).c_str());
    }
    return kOk;
  }
  return kUsage;
}
