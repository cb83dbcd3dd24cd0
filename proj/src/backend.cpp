#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "groundjudge/backend.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "groundjudge/error.hpp"
#include "groundjudge/io.hpp"

namespace groundjudge {
namespace {

using nlohmann::json;

void AppendField(std::string& out, std::string_view field) {
  out += std::to_string(field.size());
  out += ':';
  out += field;
  out += ';';
}

std::string FormatTemperature(double temperature) {
  if (temperature == 0.0) temperature = 0.0;  // fold -0 into 0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", temperature);
  return buf;
}

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void SplitUrl(const std::string& url, std::string& scheme_host_port, std::string& path) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::kConfig, "endpoint URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port = url;
    path = "/v1/chat/completions";
  } else {
    scheme_host_port = url.substr(0, path_start);
    path = url.substr(path_start);
  }
}

}  // namespace

std::string_view BackendKindName(BackendConfig::Kind kind) {
  switch (kind) {
    case BackendConfig::Kind::kRemoteChat: return "remote";
    case BackendConfig::Kind::kReplay: return "replay";
    case BackendConfig::Kind::kScripted: return "scripted";
  }
  return "";
}

void ValidateBackendConfig(const BackendConfig& config) {
  switch (config.kind) {
    case BackendConfig::Kind::kRemoteChat:
      if (!config.endpoint_url) throw Error(ErrorKind::kConfig, "remote backend needs an endpoint URL");
      if (!config.api_key_env) {
        throw Error(ErrorKind::kConfig, "remote backend needs an API key environment variable");
      }
      break;
    case BackendConfig::Kind::kReplay:
      if (!config.cache_dir) throw Error(ErrorKind::kConfig, "replay backend needs a cache directory");
      break;
    case BackendConfig::Kind::kScripted:
      break;
  }
  if (config.retry.max_attempts < 1) throw Error(ErrorKind::kConfig, "max_attempts must be >= 1");
  if (config.retry.base_backoff_ms < 0) throw Error(ErrorKind::kConfig, "backoff must be >= 0");
}

std::string CacheKey(const CompletionRequest& request) {
  std::string material = "groundjudge-cache-v1;";
  AppendField(material, request.model_id);
  AppendField(material, request.prompt);
  AppendField(material, FormatTemperature(request.temperature));
  AppendField(material, std::to_string(request.max_output_tokens));
  return Sha256Hex(material);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::optional<Completion> ResponseCache::Load(const std::string& key) const {
  std::string contents;
  try {
    contents = ReadTextFile(dir_ / key);
  } catch (const Error&) {
    return std::nullopt;
  }
  const auto newline = contents.find('\n');
  if (newline == std::string::npos) return std::nullopt;
  const json header = json::parse(contents.substr(0, newline), nullptr, false);
  if (header.is_discarded() || !header.is_object()) return std::nullopt;
  const std::size_t body_size = contents.size() - newline - 1;
  if (header.value("length", std::size_t{0}) != body_size) return std::nullopt;
  Completion completion;
  completion.text = contents.substr(newline + 1);
  completion.attempts = header.value("attempts", 1);
  completion.from_cache = true;
  return completion;
}

void ResponseCache::Store(const std::string& key, const CompletionRequest& request,
                          const Completion& completion) const {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create cache directory " + dir_.string());
  json header = {{"model_id", request.model_id},
                 {"timestamp", UtcTimestamp()},
                 {"attempts", completion.attempts},
                 {"length", completion.text.size()}};
  WriteFileAtomic(dir_ / key, header.dump() + "\n" + completion.text);
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> fixtures)
    : fixtures_(std::move(fixtures)) {}

std::map<std::string, std::string> ScriptedBackend::LoadFixtures(const std::filesystem::path& path) {
  const json doc = json::parse(ReadTextFile(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorKind::kSchema, path.string() + ": fixtures must be a JSON object");
  }
  std::map<std::string, std::string> fixtures;
  for (const auto& [tag, value] : doc.items()) {
    if (!value.is_string()) {
      throw Error(ErrorKind::kSchema, path.string() + ": fixture \"" + tag + "\" is not a string");
    }
    fixtures.emplace(tag, value.get<std::string>());
  }
  return fixtures;
}

Completion ScriptedBackend::Complete(const CompletionRequest& request) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    requested_.push_back(request.request_tag);
  }
  auto it = fixtures_.find(request.request_tag);
  if (it == fixtures_.end()) {
    throw Error(ErrorKind::kMissingFixture, "no fixture for tag " + request.request_tag);
  }
  return {it->second, 1, false};
}

std::vector<std::string> ScriptedBackend::requested_tags() const {
  std::lock_guard lock(mutex_);
  return requested_;
}

ReplayBackend::ReplayBackend(std::filesystem::path cache_dir) : cache_(std::move(cache_dir)) {}

Completion ReplayBackend::Complete(const CompletionRequest& request) {
  ++calls_;
  const std::string key = CacheKey(request);
  auto cached = cache_.Load(key);
  if (!cached) {
    throw Error(ErrorKind::kCacheMiss,
                "no cached response for key " + key + " (tag " + request.request_tag + ")");
  }
  ++cache_hits_;
  return *cached;
}

std::string ChatRequestBody(const CompletionRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = request.model_id;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;
  return body.dump();
}

RemoteChatBackend::RemoteChatBackend(const BackendConfig& config, Sleeper sleeper)
    : retry_(config.retry), timeout_seconds_(config.timeout_seconds), sleeper_(std::move(sleeper)) {
  ValidateBackendConfig(config);
  SplitUrl(*config.endpoint_url, scheme_host_port_, path_);
  const char* key = std::getenv(config.api_key_env->c_str());
  if (key == nullptr) {
    throw Error(ErrorKind::kConfig, "environment variable " + *config.api_key_env + " is not set");
  }
  api_key_ = key;
  if (config.cache_dir) cache_.emplace(*config.cache_dir);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Completion RemoteChatBackend::Complete(const CompletionRequest& request) {
  ++calls_;
  std::string key;
  if (cache_) {
    key = CacheKey(request);
    if (auto cached = cache_->Load(key)) {
      ++cache_hits_;
      return *cached;
    }
  }
  Completion completion = Fetch(request);
  if (cache_) cache_->Store(key, request, completion);
  return completion;
}

Completion RemoteChatBackend::Fetch(const CompletionRequest& request) {
  const std::string body = ChatRequestBody(request);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  std::string last_failure;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    if (attempt > 1) {
      const long delay = static_cast<long>(retry_.base_backoff_ms) << (attempt - 2);
      sleeper_(std::chrono::milliseconds(delay));
    }
    ++network_requests_;
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    client.set_write_timeout(timeout_seconds_);
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
      last_failure = "connection failed: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status == 401 || status == 403) {
      throw Error(ErrorKind::kAuth, "endpoint rejected credentials (HTTP " + std::to_string(status) + ")");
    }
    if (status == 429 || status >= 500) {
      last_failure = "HTTP " + std::to_string(status);
      continue;
    }
    if (status != 200) {
      throw Error(ErrorKind::kRequest, "HTTP " + std::to_string(status) + ": " + result->body);
    }
    const json response = json::parse(result->body, nullptr, false);
    const json* content = nullptr;
    if (!response.is_discarded() && response.contains("choices") && response["choices"].is_array() &&
        !response["choices"].empty()) {
      const json& first = response["choices"][0];
      if (first.contains("message") && first["message"].contains("content") &&
          first["message"]["content"].is_string()) {
        content = &first["message"]["content"];
      }
    }
    if (content == nullptr) {
      last_failure = "response has no choices[0].message.content";
      continue;
    }
    return {content->get<std::string>(), attempt, false};
  }
  throw Error(ErrorKind::kTransient, "gave up after " + std::to_string(retry_.max_attempts) +
                                         " attempts for " + request.request_tag + ": " +
                                         last_failure);
}

std::unique_ptr<JudgeBackend> MakeBackend(const BackendConfig& config) {
  ValidateBackendConfig(config);
  switch (config.kind) {
    case BackendConfig::Kind::kRemoteChat:
      return std::make_unique<RemoteChatBackend>(config);
    case BackendConfig::Kind::kReplay:
      return std::make_unique<ReplayBackend>(*config.cache_dir);
    case BackendConfig::Kind::kScripted: {
      std::map<std::string, std::string> fixtures;
      if (config.fixtures_path) fixtures = ScriptedBackend::LoadFixtures(*config.fixtures_path);
      return std::make_unique<ScriptedBackend>(std::move(fixtures));
    }
  }
  throw Error(ErrorKind::kConfig, "unknown backend kind");
}

}  // namespace groundjudge
