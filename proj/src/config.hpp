#pragma once

// Effective run configuration: built-in defaults, then a JSON config file,
// then command-line overrides.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "backend.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "text.hpp"

namespace psydial {

/// Bad configuration or arguments supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class BackendKind { scripted, remote };
std::string_view to_string(BackendKind k);

struct AppConfig {
  std::filesystem::path data_dir;
  std::filesystem::path machines_dir;
  std::filesystem::path emrs;
  std::filesystem::path out;
  std::filesystem::path stopwords;
  BackendKind backend = BackendKind::scripted;
  std::uint64_t seed = 0;
  int feds_per_emr = 5;
  std::vector<Strategy> strategies{Strategy::random, Strategy::symptom_informed};
  int workers = 1;
  std::size_t turn_cap = 200;
  int max_experience_triggers = 3;
  std::size_t view_window = 6;
  BackendConfig remote;
  text::TokenizerMode tokenizer = text::TokenizerMode::automatic;
  std::size_t keywords_k = 20;
  std::size_t embedding_dim = 256;
  CharCount char_count = CharCount::codepoints;
  /// The merged document this was parsed from.
  json effective;
};

/// Defaults as a JSON document. Relative paths are resolved against
/// `data_dir` when the config is parsed.
json default_config_json(const std::filesystem::path& data_dir);

/// Later layers override earlier ones key by key (JSON merge patch). Unknown
/// keys or ill-typed values raise ConfigError.
AppConfig resolve_config(const json& defaults, const std::vector<json>& layers);

/// Reads a config file; ConfigError if it is not a JSON object, IoError if
/// unreadable.
json read_config_file(const std::filesystem::path& path);

/// "random,symptom_informed" style list.
std::vector<Strategy> parse_strategy_list(std::string_view s);

}  // namespace psydial
