#pragma once

// Shared helpers for the unit and acceptance suites.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "orchestrator.hpp"

namespace psydial::testing {

inline std::filesystem::path data_dir() { return PSYD_DEFAULT_DATA_DIR; }
inline std::filesystem::path fixtures_dir() { return PSYD_TEST_FIXTURES_DIR; }

/// Shipped resources, loaded once per process.
inline const EngineResources& shipped() {
  static const EngineResources res = load_resources(data_dir());
  return res;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("psyd-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Minimal chat-completion server on an ephemeral localhost port. The
/// handler sees each request body and fills the response.
class MockServer {
 public:
  using Handler = std::function<void(const std::string& body, int call, httplib::Response& res)>;

  explicit MockServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      {
        std::lock_guard lock(mu_);
        peak_ = std::max(peak_, now);
        bodies_.push_back(req.body);
        arrivals_.push_back(std::chrono::steady_clock::now());
        auth_.push_back(req.get_header_value("Authorization"));
      }
      const int call = ++calls_;
      handler_(req.body, call, res);
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int calls() const { return calls_; }
  int peak_in_flight() const {
    std::lock_guard lock(mu_);
    return peak_;
  }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::chrono::steady_clock::time_point> arrivals() const {
    std::lock_guard lock(mu_);
    return arrivals_;
  }
  std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mu_);
    return auth_;
  }

  static void reply(httplib::Response& res, const std::string& content) {
    res.status = 200;
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                    "application/json");
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  mutable std::mutex mu_;
  int peak_ = 0;
  std::vector<std::string> bodies_;
  std::vector<std::chrono::steady_clock::time_point> arrivals_;
  std::vector<std::string> auth_;
};

/// Validates a JSON instance against the subset of JSON Schema used by the
/// shipped schemas: type (string or list), required, properties,
/// additionalProperties (bool or schema), items, enum, minimum, maximum and
/// local "#/$defs/..." references. Returns one message per violation.
inline std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& v,
                                                  const std::string& at = "$", const nlohmann::json* root = nullptr) {
  using nlohmann::json;
  if (!root) root = &schema;
  if (schema.contains("$ref")) {
    const auto ref = schema["$ref"].get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0 || !root->contains("$defs") || !(*root)["$defs"].contains(ref.substr(prefix.size())))
      return {at + ": unresolvable $ref " + ref};
    return schema_violations((*root)["$defs"][ref.substr(prefix.size())], v, at, root);
  }
  std::vector<std::string> out;
  auto type_ok = [&](const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
  };
  if (schema.contains("type")) {
    bool ok = false;
    if (schema["type"].is_array()) {
      for (const auto& t : schema["type"]) ok = ok || type_ok(t.get<std::string>());
    } else {
      ok = type_ok(schema["type"].get<std::string>());
    }
    if (!ok) {
      out.push_back(at + ": expected type " + schema["type"].dump() + ", got " + v.type_name());
      return out;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == v;
    if (!found) out.push_back(at + ": value " + v.dump() + " not in enum");
  }
  if (v.is_number()) {
    if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>())
      out.push_back(at + ": below minimum");
    if (schema.contains("maximum") && v.get<double>() > schema["maximum"].get<double>())
      out.push_back(at + ": above maximum");
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"]) {
        if (!v.contains(r.get<std::string>())) out.push_back(at + ": missing required '" + r.get<std::string>() + "'");
      }
    }
    const json props = schema.value("properties", json::object());
    for (const auto& [k, child] : v.items()) {
      if (props.contains(k)) {
        for (auto& m : schema_violations(props[k], child, at + "." + k, root)) out.push_back(std::move(m));
      } else if (schema.contains("additionalProperties")) {
        const auto& ap = schema["additionalProperties"];
        if (ap.is_boolean() && !ap.get<bool>()) {
          out.push_back(at + ": unexpected property '" + k + "'");
        } else if (ap.is_object()) {
          for (auto& m : schema_violations(ap, child, at + "." + k, root)) out.push_back(std::move(m));
        }
      }
    }
  }
  if (v.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (auto& m : schema_violations(schema["items"], v[i], at + "[" + std::to_string(i) + "]", root)) out.push_back(std::move(m));
    }
  }
  return out;
}

/// Runs a shell command, capturing stdout and stderr together.
struct CommandResult {
  int exit_code = -1;
  std::string output;
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string psyd_binary() { return PSYD_CLI_PATH; }

}  // namespace psydial::testing
