#pragma once

// Text-generation backends. RemoteBackend speaks the common chat-completion
// JSON protocol over HTTP; scripted replies live in scripted.hpp.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "model.hpp"

namespace psydial {

enum class RequestTag : std::uint8_t { doctor_turn, patient_turn, classifier, need_exp, fed_generation };
std::string_view to_string(RequestTag t);

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string text;
};

struct BackendRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  std::size_t max_chars = 400;
  double temperature = 0.7;
  RequestTag tag = RequestTag::doctor_turn;
};

/// Empty when the request is well formed.
std::vector<std::string> validate_request(const BackendRequest& req);

struct BackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model;
  std::string auth_env;  // name of the environment variable holding the token
  double timeout_s = 60.0;
  int max_retries = 2;
  int backoff_initial_ms = 500;
  double backoff_mult = 2.0;
  int max_concurrent = 4;
};

std::vector<std::string> validate_backend_config(const BackendConfig& cfg);
/// Reads the documented keys; unknown keys are rejected.
BackendConfig backend_config_from_json(const json& j);
json to_json(const BackendConfig& cfg);

class BackendError : public Error {
 public:
  enum class Kind { timeout, connection, http, malformed, config };
  BackendError(Kind kind, RequestTag tag, std::string detail, int status = 0, int attempts = 0);

  Kind kind() const { return kind_; }
  RequestTag tag() const { return tag_; }
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  Kind kind_;
  RequestTag tag_;
  int status_;
  int attempts_;
};

std::string_view to_string(BackendError::Kind k);

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string complete(const BackendRequest& req) = 0;
};

/// Exact request body sent for `req`: messages (system first), model,
/// temperature and a max_tokens bound equal to max_chars. Keys are emitted
/// in sorted order so the body is byte-stable.
std::string request_body(const BackendConfig& cfg, const BackendRequest& req);

/// Extracts choices[0].message.content; throws BackendError(malformed).
std::string parse_completion(std::string_view body, RequestTag tag);

/// Counting semaphore that also remembers its peak occupancy.
class AdmissionLimiter {
 public:
  explicit AdmissionLimiter(int capacity);
  void acquire();
  void release();
  int in_flight() const;
  int high_water_mark() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int capacity_;
  int in_flight_ = 0;
  int high_water_ = 0;
};

struct AttemptRecord {
  RequestTag tag = RequestTag::doctor_turn;
  int attempt = 0;          // 1-based within its request
  int status = 0;           // HTTP status, 0 when no response
  std::string error;        // empty on success
  long long delay_before_ms = 0;
  std::chrono::steady_clock::time_point started;
};

class RemoteBackend : public TextBackend {
 public:
  /// Throws BackendError(config) for an invalid configuration or a missing
  /// auth variable.
  explicit RemoteBackend(BackendConfig cfg);

  /// Sends the request, retrying on timeouts, connection failures, 429 and
  /// 5xx with exponential backoff. The reply is cut at a sentence boundary
  /// to max_chars.
  std::string complete(const BackendRequest& req) override;

  const BackendConfig& config() const { return cfg_; }
  std::vector<AttemptRecord> attempt_log() const;
  int high_water_mark() const { return limiter_.high_water_mark(); }

 private:
  BackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
  std::string token_;
  AdmissionLimiter limiter_;
  mutable std::mutex log_mu_;
  std::vector<AttemptRecord> log_;
};

}  // namespace psydial
