#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "moralbench/core.hpp"

namespace moralbench {

class BackendError : public Error {
  public:
    using Error::Error;
};

// Retries exhausted or endpoint unreachable.
class BackendUnavailable : public BackendError {
  public:
    using BackendError::BackendError;
};

// Replay backend has no entry for the requested prompt.
class ReplayMiss : public BackendError {
  public:
    using BackendError::BackendError;
};

class MalformedRemoteResponse : public BackendError {
  public:
    using BackendError::BackendError;
};

struct CompletionRequest {
    std::string prompt;
    int n = 1;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::vector<std::string> stop;
    std::optional<int64_t> seed;

    void validate() const;  // n >= 1, temperature >= 0
};

struct TokenUsage {
    int64_t prompt_tokens = 0;
    int64_t output_tokens = 0;
};

struct CompletionResponse {
    std::vector<std::string> decodes;  // exactly request.n entries, stable order
    std::optional<TokenUsage> usage;
    std::string backend_id;
};

// A text-completion client. Implementations must be safe for concurrent callers.
class CompletionBackend {
  public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    virtual std::string id() const = 0;
    // True when identical requests always yield identical responses (replay, mock).
    virtual bool deterministic() const { return false; }
};

// Collision-resistant digest over every request field plus the backend id.
std::string cache_key(const std::string& backend_id, const CompletionRequest& req);

// ---------------------------------------------------------------------------
// Replay backend: canned responses keyed by exact prompt bytes.
// ---------------------------------------------------------------------------
class ReplayBackend : public CompletionBackend {
  public:
    ReplayBackend() = default;
    explicit ReplayBackend(std::string id) : id_(std::move(id)) {}

    // Fixture file: {"backend_id": ..., "entries": [{"prompt", "decodes"}...]}.
    static ReplayBackend from_file(const std::filesystem::path& path);
    static ReplayBackend from_json(const json& doc);

    void add(std::string prompt, std::vector<std::string> decodes);

    // Pads cyclically when the entry holds fewer than n decodes.
    CompletionResponse complete(const CompletionRequest& req) override;
    std::string id() const override { return id_; }
    bool deterministic() const override { return true; }

  private:
    std::string id_ = "replay";
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Scripted mock backend. Deterministic: each decode is drawn from an RNG keyed
// by (seed, prompt, decode index), so results do not depend on call order.
// ---------------------------------------------------------------------------
struct MockScript {
    // Fixed response text for every decode, e.g. "(d)".
    std::optional<std::string> fixed;
    // When set, match the prompt to one of `questions` (by scenario text; last
    // occurrence wins so few-shot prompts resolve to the query question) and answer
    // its gold label with this probability, otherwise a uniformly-drawn wrong label.
    std::optional<double> gold_accuracy;
    std::vector<MoralQuestion> questions;
    uint64_t seed = 0;
    // Fallback when gold matching finds no question and no fixed text is set.
    std::string fallback = "(a)";
};

class MockBackend : public CompletionBackend {
  public:
    using Handler = std::function<std::string(const CompletionRequest&, int decode_index)>;

    explicit MockBackend(MockScript script);
    explicit MockBackend(Handler handler, std::string id = "mock");

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string id() const override { return id_; }
    bool deterministic() const override { return true; }

    uint64_t calls() const { return calls_.load(); }

  private:
    std::string id_ = "mock";
    Handler handler_;
    std::atomic<uint64_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Shared limiter: bounded in-flight requests plus request-per-minute pacing.
// ---------------------------------------------------------------------------
class RateLimiter {
  public:
    RateLimiter(int max_inflight, double requests_per_minute);

    class Ticket {
      public:
        explicit Ticket(RateLimiter* limiter) : limiter_(limiter) {}
        Ticket(Ticket&& o) noexcept : limiter_(o.limiter_) { o.limiter_ = nullptr; }
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;
        Ticket& operator=(Ticket&&) = delete;
        ~Ticket();

      private:
        RateLimiter* limiter_;
    };

    // Blocks until a slot is free and the pacing interval has elapsed.
    Ticket acquire();

  private:
    friend class Ticket;
    void release();

    std::mutex mu_;
    std::condition_variable cv_;
    int inflight_ = 0;
    int max_inflight_;
    std::chrono::steady_clock::duration min_interval_;
    std::chrono::steady_clock::time_point next_allowed_;
};

// ---------------------------------------------------------------------------
// Live backend speaking the OpenAI-style completions protocol.
// ---------------------------------------------------------------------------
struct HttpBackendConfig {
    std::string endpoint = "http://localhost:8000/v1/completions";  // full URL
    std::string model = "default";
    std::string api_key;            // resolved from env by the CLI; never logged
    int max_attempts = 5;
    double backoff_base_s = 0.5;
    double backoff_cap_s = 20.0;
    int max_inflight = 8;
    double requests_per_minute = 0;  // 0 = unpaced
    double timeout_s = 120.0;
};

class HttpBackend : public CompletionBackend {
  public:
    explicit HttpBackend(HttpBackendConfig cfg);

    // Retries 429/5xx/transport errors with exponential backoff and jitter; issues
    // follow-up single-decode calls when the endpoint returns fewer than n choices.
    CompletionResponse complete(const CompletionRequest& req) override;
    std::string id() const override;

  private:
    CompletionResponse post_once(const CompletionRequest& req);

    HttpBackendConfig cfg_;
    std::string base_url_;
    std::string path_;
    RateLimiter limiter_;
};

// ---------------------------------------------------------------------------
// Caching wrapper: one immutable file per key; single-flight per key so the same
// request issues at most one inner call even under concurrency.
// ---------------------------------------------------------------------------
class CachingBackend : public CompletionBackend {
  public:
    CachingBackend(std::shared_ptr<CompletionBackend> inner, std::filesystem::path dir);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::string id() const override { return inner_->id(); }
    bool deterministic() const override { return inner_->deterministic(); }

    uint64_t hits() const { return hits_.load(); }
    uint64_t misses() const { return misses_.load(); }

  private:
    std::shared_ptr<CompletionBackend> inner_;
    std::filesystem::path dir_;
    std::mutex mu_;
    std::unordered_map<std::string, std::shared_future<CompletionResponse>> inflight_;
    std::atomic<uint64_t> hits_{0};
    std::atomic<uint64_t> misses_{0};
};

}  // namespace moralbench
