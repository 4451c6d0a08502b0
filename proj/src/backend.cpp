#include "backend.hpp"

#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "text.hpp"

namespace psydial {

std::string_view to_string(RequestTag t) {
  switch (t) {
    case RequestTag::doctor_turn: return "doctor_turn";
    case RequestTag::patient_turn: return "patient_turn";
    case RequestTag::classifier: return "classifier";
    case RequestTag::need_exp: return "need_exp";
    case RequestTag::fed_generation: return "fed_generation";
  }
  return "?";
}

std::string_view to_string(BackendError::Kind k) {
  switch (k) {
    case BackendError::Kind::timeout: return "timeout";
    case BackendError::Kind::connection: return "connection";
    case BackendError::Kind::http: return "http";
    case BackendError::Kind::malformed: return "malformed";
    case BackendError::Kind::config: return "config";
  }
  return "?";
}

BackendError::BackendError(Kind kind, RequestTag tag, std::string detail, int status, int attempts)
    : Error(std::string(to_string(kind)) + " error [" + std::string(to_string(tag)) + "]: " + detail),
      kind_(kind),
      tag_(tag),
      status_(status),
      attempts_(attempts) {}

std::vector<std::string> validate_request(const BackendRequest& req) {
  std::vector<std::string> v;
  if (req.messages.empty()) v.push_back("request has no messages");
  if (req.max_chars == 0) v.push_back("max_chars must be positive");
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) v.push_back("temperature must be within [0, 2]");
  for (const auto& m : req.messages) {
    if (m.role != "user" && m.role != "assistant") v.push_back("message role must be user or assistant, got '" + m.role + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------

std::vector<std::string> validate_backend_config(const BackendConfig& cfg) {
  std::vector<std::string> v;
  if (cfg.endpoint.empty()) {
    v.push_back("backend endpoint is empty");
  } else if (!std::regex_match(cfg.endpoint, std::regex(R"(^https?://[^/\s]+(/\S*)?$)"))) {
    v.push_back("backend endpoint '" + cfg.endpoint + "' is not an http(s) URL");
  }
  if (cfg.model.empty()) v.push_back("backend model is empty");
  if (!(cfg.timeout_s > 0)) v.push_back("timeout_s must be positive");
  if (cfg.max_retries < 0) v.push_back("max_retries must be >= 0");
  if (cfg.backoff_initial_ms < 0) v.push_back("backoff_initial_ms must be >= 0");
  if (!(cfg.backoff_mult >= 1.0)) v.push_back("backoff_mult must be >= 1");
  if (cfg.max_concurrent < 1) v.push_back("max_concurrent must be >= 1");
  return v;
}

BackendConfig backend_config_from_json(const json& j) {
  if (!j.is_object()) throw BackendError(BackendError::Kind::config, RequestTag::doctor_turn, "backend config must be an object");
  BackendConfig cfg;
  for (const auto& [key, value] : j.items()) {
    auto bad = [&](const char* what) {
      return BackendError(BackendError::Kind::config, RequestTag::doctor_turn, "key '" + key + "' must be " + what);
    };
    if (key == "endpoint" || key == "model" || key == "auth_env") {
      if (!value.is_string()) throw bad("a string");
      (key == "endpoint" ? cfg.endpoint : key == "model" ? cfg.model : cfg.auth_env) = value.get<std::string>();
    } else if (key == "timeout_s" || key == "backoff_mult") {
      if (!value.is_number()) throw bad("a number");
      (key == "timeout_s" ? cfg.timeout_s : cfg.backoff_mult) = value.get<double>();
    } else if (key == "max_retries" || key == "backoff_initial_ms" || key == "max_concurrent") {
      if (!value.is_number_integer()) throw bad("an integer");
      (key == "max_retries" ? cfg.max_retries : key == "backoff_initial_ms" ? cfg.backoff_initial_ms : cfg.max_concurrent) =
          value.get<int>();
    } else {
      throw BackendError(BackendError::Kind::config, RequestTag::doctor_turn, "unknown backend key '" + key + "'");
    }
  }
  return cfg;
}

json to_json(const BackendConfig& cfg) {
  return json{{"endpoint", cfg.endpoint},       {"model", cfg.model},
              {"auth_env", cfg.auth_env},       {"timeout_s", cfg.timeout_s},
              {"max_retries", cfg.max_retries}, {"backoff_initial_ms", cfg.backoff_initial_ms},
              {"backoff_mult", cfg.backoff_mult}, {"max_concurrent", cfg.max_concurrent}};
}

std::string request_body(const BackendConfig& cfg, const BackendRequest& req) {
  json messages = json::array();
  if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  json body{{"model", cfg.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_chars}};
  return body.dump();
}

std::string parse_completion(std::string_view body, RequestTag tag) {
  json doc;
  try {
    doc = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw BackendError(BackendError::Kind::malformed, tag, std::string("response is not JSON: ") + e.what());
  }
  const json* content = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const auto& first = doc["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content"))
      content = &first["message"]["content"];
  }
  if (!content || !content->is_string())
    throw BackendError(BackendError::Kind::malformed, tag, "response lacks choices[0].message.content");
  return content->get<std::string>();
}

// ---------------------------------------------------------------------------

AdmissionLimiter::AdmissionLimiter(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw PreconditionError("admission limiter capacity must be >= 1");
}

void AdmissionLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < capacity_; });
  ++in_flight_;
  high_water_ = std::max(high_water_, in_flight_);
}

void AdmissionLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int AdmissionLimiter::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

int AdmissionLimiter::high_water_mark() const {
  std::lock_guard lock(mu_);
  return high_water_;
}

// ---------------------------------------------------------------------------

namespace {

BackendConfig checked(BackendConfig cfg) {
  auto issues = validate_backend_config(cfg);
  if (!issues.empty())
    throw BackendError(BackendError::Kind::config, RequestTag::doctor_turn, text::join(issues, "; "));
  return cfg;
}

}  // namespace

RemoteBackend::RemoteBackend(BackendConfig cfg) : cfg_(checked(std::move(cfg))), limiter_(cfg_.max_concurrent) {
  std::smatch m;
  static const std::regex kUrl(R"(^(https?://[^/\s]+)(/\S*)?$)");
  std::regex_match(cfg_.endpoint, m, kUrl);
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (text::starts_with_ci(scheme_host_port_, "https://"))
    throw BackendError(BackendError::Kind::config, RequestTag::doctor_turn, "this build has no TLS support");
#endif
  if (!cfg_.auth_env.empty()) {
    const char* tok = std::getenv(cfg_.auth_env.c_str());
    if (!tok || !*tok)
      throw BackendError(BackendError::Kind::config, RequestTag::doctor_turn,
                         "environment variable " + cfg_.auth_env + " is not set");
    token_ = tok;
  }
}

std::vector<AttemptRecord> RemoteBackend::attempt_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

std::string RemoteBackend::complete(const BackendRequest& req) {
  if (auto issues = validate_request(req); !issues.empty())
    throw BackendError(BackendError::Kind::config, req.tag, text::join(issues, "; "));

  const std::string body = request_body(cfg_, req);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  const int attempts = cfg_.max_retries + 1;
  long long delay_ms = 0;
  BackendError last(BackendError::Kind::connection, req.tag, "no attempt made");

  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      delay_ms = attempt == 2 ? cfg_.backoff_initial_ms
                              : static_cast<long long>(std::llround(static_cast<double>(delay_ms) * cfg_.backoff_mult));
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }
    AttemptRecord rec;
    rec.tag = req.tag;
    rec.attempt = attempt;
    rec.delay_before_ms = attempt == 1 ? 0 : delay_ms;
    rec.started = std::chrono::steady_clock::now();

    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      limiter_.acquire();
      try {
        httplib::Client cli(scheme_host_port_);
        const auto sec = static_cast<time_t>(timeout_us.count() / 1000000);
        const auto usec = static_cast<time_t>(timeout_us.count() % 1000000);
        cli.set_connection_timeout(sec, usec);
        cli.set_read_timeout(sec, usec);
        cli.set_write_timeout(sec, usec);
        res = cli.Post(path_, headers, body, "application/json");
      } catch (...) {
        limiter_.release();
        throw;
      }
      limiter_.release();
    }
    const auto elapsed = std::chrono::steady_clock::now() - rec.started;

    bool retry = true;
    std::optional<BackendError> failure;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             ((err == httplib::Error::Read || err == httplib::Error::Write) && elapsed >= timeout);
      failure.emplace(timed_out ? BackendError::Kind::timeout : BackendError::Kind::connection, req.tag,
                      httplib::to_string(err) + " contacting " + cfg_.endpoint, 0, attempt);
    } else {
      rec.status = res->status;
      if (res->status >= 200 && res->status < 300) {
        try {
          std::string reply = text::truncate_at_sentence(text::trim(parse_completion(res->body, req.tag)), req.max_chars);
          {
            std::lock_guard lock(log_mu_);
            log_.push_back(rec);
          }
          return reply;
        } catch (const BackendError& e) {
          failure.emplace(BackendError::Kind::malformed, req.tag, e.what(), res->status, attempt);
          retry = false;
        }
      } else {
        retry = res->status == 429 || res->status >= 500;
        failure.emplace(BackendError::Kind::http, req.tag, "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint,
                        res->status, attempt);
      }
    }
    rec.error = failure->what();
    {
      std::lock_guard lock(log_mu_);
      log_.push_back(rec);
    }
    last = *failure;
    if (!retry) break;
  }
  throw last;
}

}  // namespace psydial
