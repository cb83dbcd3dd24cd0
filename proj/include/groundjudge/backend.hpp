#pragma once

// Judge invocation: a hosted chat-completion endpoint, a replay store over
// the response cache, and a scripted backend keyed by request tag.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace groundjudge {

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  // sample_id + "/" + call name; not part of the cache key.
  std::string request_tag;
};

struct RetryPolicy {
  int max_attempts = 4;
  int base_backoff_ms = 500;
};

struct BackendConfig {
  enum class Kind { kRemoteChat, kReplay, kScripted };

  Kind kind = Kind::kScripted;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> api_key_env;
  std::optional<std::filesystem::path> cache_dir;
  // Scripted backend only: JSON object mapping request tag to response.
  std::optional<std::filesystem::path> fixtures_path;
  RetryPolicy retry;
  int timeout_seconds = 120;
};

std::string_view BackendKindName(BackendConfig::Kind kind);

/// Throws Error(kConfig) when a kind's required fields are missing.
void ValidateBackendConfig(const BackendConfig& config);

struct Completion {
  std::string text;
  // Attempts the original fetch took; cached responses report the value
  // recorded when they were stored.
  int attempts = 1;
  bool from_cache = false;
};

struct BackendStats {
  long calls = 0;
  long network_requests = 0;
  long cache_hits = 0;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;

  /// Errors: kTransient (after retries), kAuth, kRequest, kCacheMiss,
  /// kMissingFixture depending on the backend.
  virtual Completion Complete(const CompletionRequest& request) = 0;

  BackendStats stats() const {
    return {calls_.load(), network_requests_.load(), cache_hits_.load()};
  }

 protected:
  std::atomic<long> calls_{0};
  std::atomic<long> network_requests_{0};
  std::atomic<long> cache_hits_{0};
};

/// Hex SHA-256 over model_id, prompt, temperature and max_output_tokens.
/// The request tag is excluded so identical prompts share entries.
std::string CacheKey(const CompletionRequest& request);

/// One file per key under a directory: a one-line JSON header followed by
/// the raw response bytes. Entries are written by atomic rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  /// Missing, unreadable or truncated entries read as nullopt.
  std::optional<Completion> Load(const std::string& key) const;
  void Store(const std::string& key, const CompletionRequest& request,
             const Completion& completion) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class ScriptedBackend : public JudgeBackend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::string> fixtures);
  static std::map<std::string, std::string> LoadFixtures(const std::filesystem::path& path);

  Completion Complete(const CompletionRequest& request) override;

  // Tags requested so far, in call order.
  std::vector<std::string> requested_tags() const;

 private:
  std::map<std::string, std::string> fixtures_;
  mutable std::mutex mutex_;
  std::vector<std::string> requested_;
};

class ReplayBackend : public JudgeBackend {
 public:
  explicit ReplayBackend(std::filesystem::path cache_dir);

  Completion Complete(const CompletionRequest& request) override;

 private:
  ResponseCache cache_;
};

class RemoteChatBackend : public JudgeBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// Reads the bearer token from the environment variable named by
  /// config.api_key_env; a missing variable is Error(kConfig).
  explicit RemoteChatBackend(const BackendConfig& config, Sleeper sleeper = {});

  Completion Complete(const CompletionRequest& request) override;

 private:
  Completion Fetch(const CompletionRequest& request);

  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  RetryPolicy retry_;
  int timeout_seconds_;
  std::optional<ResponseCache> cache_;
  Sleeper sleeper_;
};

/// The exact JSON body sent for a request.
std::string ChatRequestBody(const CompletionRequest& request);

std::unique_ptr<JudgeBackend> MakeBackend(const BackendConfig& config);

}  // namespace groundjudge
