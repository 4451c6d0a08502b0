#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace psydial {

std::string_view to_string(BackendKind k) { return k == BackendKind::scripted ? "scripted" : "remote"; }

json default_config_json(const std::filesystem::path& data_dir) {
  return json{{"data_dir", data_dir.string()},
              {"machines_dir", "machines"},
              {"emrs", "emrs/sample"},
              {"out", "out"},
              {"stopwords", "stopwords.txt"},
              {"backend", "scripted"},
              {"seed", 0},
              {"feds_per_emr", 5},
              {"strategies", {"random", "symptom_informed"}},
              {"workers", 1},
              {"turn_cap", 200},
              {"max_experience_triggers", 3},
              {"view_window", 6},
              {"remote", to_json(BackendConfig{})},
              {"tokenizer", "automatic"},
              {"keywords_k", 20},
              {"embedding_dim", 256},
              {"char_count", "codepoints"}};
}

std::vector<Strategy> parse_strategy_list(std::string_view s) {
  std::vector<Strategy> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(',', start), s.size());
    const auto name = text::trim(s.substr(start, end - start));
    auto st = parse_strategy(name);
    if (!st) throw ConfigError("unknown strategy '" + name + "' (random, symptom_informed)");
    if (std::find(out.begin(), out.end(), *st) != out.end()) throw ConfigError("strategy '" + name + "' listed twice");
    out.push_back(*st);
    start = end + 1;
  }
  return out;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
  return j;
}

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : base / q;
}

}  // namespace

AppConfig resolve_config(const json& defaults, const std::vector<json>& layers) {
  json merged = defaults;
  for (const auto& layer : layers) {
    if (!layer.is_object()) throw ConfigError("config layer must be an object");
    for (const auto& [key, value] : layer.items()) {
      if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
      if (value.is_null()) throw ConfigError("config key '" + key + "' cannot be null");
      if (key == "remote") {
        if (!value.is_object()) throw ConfigError("'remote' must be an object");
        for (const auto& [rk, rv] : value.items()) {
          if (!defaults["remote"].contains(rk)) throw ConfigError("unknown config key 'remote." + rk + "'");
          if (rv.is_null()) throw ConfigError("config key 'remote." + rk + "' cannot be null");
        }
      }
    }
    merged.merge_patch(layer);
  }

  AppConfig c;
  auto str = [&](const char* k) {
    if (!merged.at(k).is_string()) throw ConfigError(std::string("'") + k + "' must be a string");
    return merged.at(k).get<std::string>();
  };
  auto integer = [&](const char* k, long long lo) {
    const auto& v = merged.at(k);
    if (!v.is_number_integer()) throw ConfigError(std::string("'") + k + "' must be an integer");
    const auto n = v.get<long long>();
    if (n < lo) throw ConfigError(std::string("'") + k + "' must be >= " + std::to_string(lo));
    return n;
  };

  c.data_dir = str("data_dir");
  c.machines_dir = resolve_path(c.data_dir, str("machines_dir"));
  c.emrs = resolve_path(c.data_dir, str("emrs"));
  c.out = str("out");
  c.stopwords = resolve_path(c.data_dir, str("stopwords"));
  const auto backend = str("backend");
  if (backend == "scripted") {
    c.backend = BackendKind::scripted;
  } else if (backend == "remote") {
    c.backend = BackendKind::remote;
  } else {
    throw ConfigError("unknown backend '" + backend + "' (scripted, remote)");
  }
  if (!merged.at("seed").is_number_unsigned() && !merged.at("seed").is_number_integer())
    throw ConfigError("'seed' must be a non-negative integer");
  if (merged.at("seed").is_number_integer() && merged.at("seed").get<long long>() < 0)
    throw ConfigError("'seed' must be a non-negative integer");
  c.seed = merged.at("seed").get<std::uint64_t>();
  c.feds_per_emr = static_cast<int>(integer("feds_per_emr", 1));
  const auto& strategies = merged.at("strategies");
  if (strategies.is_string()) {
    c.strategies = parse_strategy_list(strategies.get<std::string>());
  } else if (strategies.is_array()) {
    std::string joined;
    for (const auto& s : strategies) {
      if (!s.is_string()) throw ConfigError("'strategies' entries must be strings");
      joined += (joined.empty() ? "" : ",") + s.get<std::string>();
    }
    if (joined.empty()) throw ConfigError("at least one strategy is required");
    c.strategies = parse_strategy_list(joined);
  } else {
    throw ConfigError("'strategies' must be a list");
  }
  c.workers = static_cast<int>(integer("workers", 1));
  c.turn_cap = static_cast<std::size_t>(integer("turn_cap", 3));
  c.max_experience_triggers = static_cast<int>(integer("max_experience_triggers", 0));
  c.view_window = static_cast<std::size_t>(integer("view_window", 2));
  try {
    c.remote = backend_config_from_json(merged.at("remote"));
  } catch (const BackendError& e) {
    throw ConfigError(std::string("remote: ") + e.what());
  }
  try {
    c.tokenizer = text::parse_tokenizer_mode(str("tokenizer"));
    c.char_count = parse_char_count(str("char_count"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.keywords_k = static_cast<std::size_t>(integer("keywords_k", 1));
  c.embedding_dim = static_cast<std::size_t>(integer("embedding_dim", 1));
  c.effective = std::move(merged);
  return c;
}

}  // namespace psydial
