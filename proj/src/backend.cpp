#include "moralbench/backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "moralbench/util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace moralbench {

void CompletionRequest::validate() const {
    if (n < 1) throw ConfigError("completion request needs n >= 1");
    if (temperature < 0) throw ConfigError("completion request needs temperature >= 0");
    if (max_output_tokens < 1) throw ConfigError("completion request needs max_output_tokens >= 1");
}

std::string cache_key(const std::string& backend_id, const CompletionRequest& req) {
    json canonical{{"backend", backend_id},
                   {"prompt", req.prompt},
                   {"n", req.n},
                   {"temperature", req.temperature},
                   {"max_tokens", req.max_output_tokens},
                   {"stop", req.stop},
                   {"seed", req.seed ? json(*req.seed) : json(nullptr)}};
    return sha256_hex(canonical.dump());
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

ReplayBackend ReplayBackend::from_json(const json& doc) {
    ReplayBackend backend;
    if (doc.contains("backend_id")) backend.id_ = doc.at("backend_id").get<std::string>();
    for (const auto& entry : doc.at("entries")) {
        backend.add(entry.at("prompt").get<std::string>(),
                    entry.at("decodes").get<std::vector<std::string>>());
    }
    return backend;
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file_bytes(path));
    } catch (const json::exception& e) {
        throw ValidationError("bad replay fixture file " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

void ReplayBackend::add(std::string prompt, std::vector<std::string> decodes) {
    if (decodes.empty()) throw ValidationError("replay entry with no decodes");
    entries_[std::move(prompt)] = std::move(decodes);
}

CompletionResponse ReplayBackend::complete(const CompletionRequest& req) {
    req.validate();
    auto it = entries_.find(req.prompt);
    if (it == entries_.end()) {
        const std::string head = req.prompt.substr(0, 96);
        throw ReplayMiss("no replay entry for prompt starting \"" + head + "\"");
    }
    CompletionResponse resp;
    resp.backend_id = id_;
    resp.decodes.reserve(static_cast<size_t>(req.n));
    for (int i = 0; i < req.n; i++) {
        resp.decodes.push_back(it->second[static_cast<size_t>(i) % it->second.size()]);
    }
    return resp;
}

// ---------------------------------------------------------------------------
// mock
// ---------------------------------------------------------------------------

static MockBackend::Handler make_script_handler(MockScript script) {
    return [script = std::move(script)](const CompletionRequest& req, int decode_index) -> std::string {
        if (script.gold_accuracy) {
            // Identify the query question: the last scenario-text match in the prompt.
            const MoralQuestion* match = nullptr;
            size_t best_pos = 0;
            for (const auto& q : script.questions) {
                const size_t pos = req.prompt.rfind(q.scenario1);
                if (pos == std::string::npos) continue;
                if (req.prompt.find(q.scenario2, pos) == std::string::npos) continue;
                if (!match || pos >= best_pos) {
                    match = &q;
                    best_pos = pos;
                }
            }
            if (match) {
                uint64_t h = fnv1a64(req.prompt, script.seed * 0x9e3779b97f4a7c15ULL + 0xabcdef);
                h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&decode_index),
                                             sizeof(decode_index)),
                            h);
                std::mt19937_64 rng(h);
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                AnswerLabel answer = match->gold;
                if (unit(rng) >= *script.gold_accuracy) {
                    std::uniform_int_distribution<int> pick(0, kNumAnswerLabels - 2);
                    int wrong = pick(rng);
                    if (wrong >= static_cast<int>(match->gold)) wrong++;
                    answer = static_cast<AnswerLabel>(wrong);
                }
                return std::string("So the answer is (") + label_char(answer) + ").";
            }
        }
        if (script.fixed) return *script.fixed;
        return script.fallback;
    };
}

MockBackend::MockBackend(MockScript script)
    : handler_(make_script_handler(std::move(script))) {}

MockBackend::MockBackend(Handler handler, std::string id)
    : id_(std::move(id)), handler_(std::move(handler)) {}

CompletionResponse MockBackend::complete(const CompletionRequest& req) {
    req.validate();
    calls_.fetch_add(1);
    CompletionResponse resp;
    resp.backend_id = id_;
    resp.decodes.reserve(static_cast<size_t>(req.n));
    for (int i = 0; i < req.n; i++) resp.decodes.push_back(handler_(req, i));
    return resp;
}

// ---------------------------------------------------------------------------
// rate limiter
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int max_inflight, double requests_per_minute)
    : max_inflight_(std::max(1, max_inflight)),
      min_interval_(requests_per_minute > 0
                        ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(60.0 / requests_per_minute))
                        : std::chrono::steady_clock::duration::zero()),
      next_allowed_(std::chrono::steady_clock::now()) {}

RateLimiter::Ticket RateLimiter::acquire() {
    std::chrono::steady_clock::time_point scheduled;
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return inflight_ < max_inflight_; });
        inflight_++;
        const auto now = std::chrono::steady_clock::now();
        scheduled = std::max(now, next_allowed_);
        if (min_interval_ != std::chrono::steady_clock::duration::zero()) {
            next_allowed_ = scheduled + min_interval_;
        }
    }
    std::this_thread::sleep_until(scheduled);
    return Ticket(this);
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mu_);
        inflight_--;
    }
    cv_.notify_one();
}

RateLimiter::Ticket::~Ticket() {
    if (limiter_) limiter_->release();
}

// ---------------------------------------------------------------------------
// http
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig cfg)
    : cfg_(std::move(cfg)), limiter_(cfg_.max_inflight, cfg_.requests_per_minute) {
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint must be a full URL, got \"" + cfg_.endpoint + "\"");
    }
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base_url_ = cfg_.endpoint;
        path_ = "/v1/completions";
    } else {
        base_url_ = cfg_.endpoint.substr(0, path_start);
        path_ = cfg_.endpoint.substr(path_start);
    }
}

std::string HttpBackend::id() const { return "http:" + cfg_.model + "@" + cfg_.endpoint; }

static bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

CompletionResponse HttpBackend::post_once(const CompletionRequest& req) {
    json body{{"model", cfg_.model},
              {"prompt", req.prompt},
              {"n", req.n},
              {"temperature", req.temperature},
              {"max_tokens", req.max_output_tokens}};
    if (!req.stop.empty()) body["stop"] = req.stop;
    if (req.seed) body["seed"] = *req.seed;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    static thread_local std::mt19937_64 jitter_rng(std::random_device{}());
    std::uniform_real_distribution<double> jitter(0.5, 1.5);

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts; attempt++) {
        if (attempt > 1) {
            const double base = cfg_.backoff_base_s * std::pow(2.0, attempt - 2);
            const double delay = std::min(base, cfg_.backoff_cap_s) * jitter(jitter_rng);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto ticket = limiter_.acquire();
        httplib::Client client(base_url_);
        client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
        client.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_s));

        auto result = client.Post(path_, headers, payload, "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (retryable_status(result->status)) {
            last_error = "http status " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw BackendUnavailable("endpoint returned status " + std::to_string(result->status) +
                                     ": " + result->body.substr(0, 200));
        }
        json doc;
        try {
            doc = json::parse(result->body);
        } catch (const json::exception& e) {
            throw MalformedRemoteResponse(std::string("response is not json: ") + e.what());
        }
        if (!doc.contains("choices") || !doc["choices"].is_array()) {
            throw MalformedRemoteResponse("response has no choices array");
        }
        struct Choice {
            int64_t index;
            std::string text;
        };
        std::vector<Choice> choices;
        for (const auto& c : doc["choices"]) {
            if (!c.contains("text")) throw MalformedRemoteResponse("choice without text field");
            choices.push_back({c.value("index", static_cast<int64_t>(choices.size())),
                               c.at("text").get<std::string>()});
        }
        std::stable_sort(choices.begin(), choices.end(),
                         [](const Choice& a, const Choice& b) { return a.index < b.index; });
        CompletionResponse resp;
        resp.backend_id = id();
        for (auto& c : choices) resp.decodes.push_back(std::move(c.text));
        if (doc.contains("usage") && doc["usage"].is_object()) {
            TokenUsage usage;
            usage.prompt_tokens = doc["usage"].value("prompt_tokens", static_cast<int64_t>(0));
            usage.output_tokens = doc["usage"].value("completion_tokens", static_cast<int64_t>(0));
            resp.usage = usage;
        }
        return resp;
    }
    throw BackendUnavailable("retries exhausted after " + std::to_string(cfg_.max_attempts) +
                             " attempts; last error: " + last_error);
}

CompletionResponse HttpBackend::complete(const CompletionRequest& req) {
    req.validate();
    CompletionResponse resp = post_once(req);
    if (resp.decodes.size() > static_cast<size_t>(req.n)) {
        resp.decodes.resize(static_cast<size_t>(req.n));
    }
    // Some endpoints ignore n; keep the contract by topping up one decode at a time.
    CompletionRequest single = req;
    single.n = 1;
    while (resp.decodes.size() < static_cast<size_t>(req.n)) {
        CompletionResponse extra = post_once(single);
        if (extra.decodes.empty()) {
            throw MalformedRemoteResponse("endpoint returned an empty choices array");
        }
        resp.decodes.push_back(std::move(extra.decodes[0]));
        if (extra.usage && resp.usage) {
            resp.usage->prompt_tokens += extra.usage->prompt_tokens;
            resp.usage->output_tokens += extra.usage->output_tokens;
        }
    }
    return resp;
}

// ---------------------------------------------------------------------------
// caching
// ---------------------------------------------------------------------------

CachingBackend::CachingBackend(std::shared_ptr<CompletionBackend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

static CompletionResponse response_from_cache_file(const std::filesystem::path& path) {
    const json doc = json::parse(read_file_bytes(path));
    CompletionResponse resp;
    resp.backend_id = doc.at("backend_id").get<std::string>();
    resp.decodes = doc.at("decodes").get<std::vector<std::string>>();
    if (!doc.at("usage").is_null()) {
        resp.usage = TokenUsage{doc["usage"].at("prompt_tokens").get<int64_t>(),
                                doc["usage"].at("output_tokens").get<int64_t>()};
    }
    return resp;
}

CompletionResponse CachingBackend::complete(const CompletionRequest& req) {
    const std::string key = cache_key(inner_->id(), req);
    const auto path = dir_ / (key + ".json");

    enum class Action { wait, load, call };
    Action action;
    std::shared_future<CompletionResponse> waiting;
    std::promise<CompletionResponse> mine;
    {
        std::lock_guard lock(mu_);
        auto it = inflight_.find(key);
        if (it != inflight_.end()) {
            waiting = it->second;
            action = Action::wait;
        } else if (std::filesystem::exists(path)) {
            action = Action::load;
        } else {
            inflight_.emplace(key, mine.get_future().share());
            action = Action::call;
        }
    }
    if (action == Action::wait) {
        hits_.fetch_add(1);
        return waiting.get();
    }
    if (action == Action::load) {
        hits_.fetch_add(1);
        return response_from_cache_file(path);  // immutable once renamed in
    }

    misses_.fetch_add(1);
    try {
        CompletionResponse resp = inner_->complete(req);
        json record{{"backend_id", resp.backend_id},
                    {"decodes", resp.decodes},
                    {"usage", resp.usage ? json{{"prompt_tokens", resp.usage->prompt_tokens},
                                                {"output_tokens", resp.usage->output_tokens}}
                                         : json(nullptr)},
                    {"request",
                     {{"prompt", req.prompt},
                      {"n", req.n},
                      {"temperature", req.temperature},
                      {"max_tokens", req.max_output_tokens},
                      {"stop", req.stop},
                      {"seed", req.seed ? json(*req.seed) : json(nullptr)}}}};
        write_file_atomic(path, record.dump(2) + "\n");
        mine.set_value(resp);
        {
            std::lock_guard lock(mu_);
            inflight_.erase(key);
        }
        return resp;
    } catch (...) {
        mine.set_exception(std::current_exception());
        {
            std::lock_guard lock(mu_);
            inflight_.erase(key);
        }
        throw;
    }
}

}  // namespace moralbench
