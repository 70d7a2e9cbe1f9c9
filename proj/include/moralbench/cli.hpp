#pragma once

#include <atomic>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "moralbench/backend.hpp"
#include "moralbench/core.hpp"

namespace moralbench {

namespace exit_code {
constexpr int ok = 0;
constexpr int usage = 1;       // bad flags / configuration
constexpr int data = 2;        // dataset or exemplar validation failure
constexpr int backend = 3;     // backend failure
constexpr int interrupted = 130;
}  // namespace exit_code

struct BackendOptions {
    std::string kind = "mock";  // http | replay | mock
    // http
    std::string endpoint = "http://localhost:8000/v1/completions";
    std::string model = "default";
    int max_attempts = 5;
    int max_inflight = 8;
    double requests_per_minute = 0;
    // replay
    std::string fixtures;
    // mock
    std::optional<std::string> mock_answer;
    std::optional<double> mock_gold_accuracy;
    // caching
    bool no_cache = false;
    std::string cache_dir;  // default: {out}/cache
};

struct RunOptions {
    MethodConfig config;
    std::string test_csv;
    std::string exemplars_path = "data/exemplars.json";
    int64_t limit = -1;  // -1 = whole split; 0 is a usage error
    std::string out_dir;  // default derived from config + dataset digests
    std::string run_id;
    BackendOptions backend;
    bool quiet = false;
};

struct MatrixOptions {
    RunOptions base;  // method/self-consistency fields are overwritten per row
    int shots = 0;
};

struct ValidateOptions {
    std::string test_csv;
    std::string exemplars_path = "data/exemplars.json";
};

struct ReplayOptions {
    std::string run_dir;
    std::string question_id;  // empty = all
};

// Env var consulted for the bearer token; its value never reaches logs or transcripts.
inline constexpr const char* kApiKeyEnv = "MORALBENCH_API_KEY";

// Builds the configured backend; `questions` feeds the gold-aware mock.
std::shared_ptr<CompletionBackend> make_backend(const BackendOptions& opts,
                                                const std::vector<MoralQuestion>& questions,
                                                uint64_t seed, const std::string& default_cache_dir);

// Subcommand entry points. Progress goes to err, results to out.
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel = nullptr);
int cmd_matrix(const MatrixOptions& opts, std::ostream& out, std::ostream& err,
               const std::atomic<bool>* cancel = nullptr);
int cmd_validate(const ValidateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace moralbench
