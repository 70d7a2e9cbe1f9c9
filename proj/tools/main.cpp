#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "moralbench/cli.hpp"

namespace {

std::atomic<bool> g_cancel{false};

void handle_sigint(int) { g_cancel.store(true); }

void add_method_flags(CLI::App* cmd, moralbench::RunOptions& opts, bool with_method) {
    using moralbench::Method;
    if (with_method) {
        cmd->add_option_function<std::string>(
               "--method",
               [&opts](const std::string& name) {
                   auto m = moralbench::method_from_name(name);
                   if (!m) throw CLI::ValidationError("--method", "unknown method: " + name);
                   opts.config.method = *m;
               },
               "direct, cot or thought_experiments")
            ->required();
        cmd->add_option("--shots", opts.config.shots, "0 or 5 demonstration exemplars")
            ->check(CLI::IsMember({0, 5}));
        cmd->add_flag("--self-consistency", opts.config.self_consistency,
                      "majority-vote the final answer over all decodes");
    }
    cmd->add_option("--decodes", opts.config.num_decodes, "decoded responses per backend call")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--temperature", opts.config.temperature, "sampling temperature")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-tokens", opts.config.max_output_tokens, "max output tokens per decode")
        ->check(CLI::PositiveNumber);
    cmd->add_option_function<int64_t>(
        "--seed", [&opts](int64_t v) { opts.config.seed = v; },
        "decode seed for backends that accept one");
    cmd->add_option("--concurrency", opts.config.concurrency, "concurrent question workers")
        ->check(CLI::PositiveNumber);

    cmd->add_option("--data", opts.test_csv, "test split CSV (headerless, 6 columns)")->required();
    cmd->add_option("--exemplars", opts.exemplars_path, "exemplar file for 5-shot methods");
    cmd->add_option("--limit", opts.limit, "evaluate only the first N questions");
    cmd->add_option("--out", opts.out_dir, "run directory (default runs/<derived id>)");
    cmd->add_option("--run-id", opts.run_id, "override the derived run id");
    cmd->add_flag("--quiet", opts.quiet, "suppress per-question progress");

    cmd->add_option("--backend", opts.backend.kind, "http, replay or mock")
        ->check(CLI::IsMember({"http", "replay", "mock"}));
    cmd->add_option("--endpoint", opts.backend.endpoint, "completions endpoint URL");
    cmd->add_option("--model", opts.backend.model, "model name sent to the endpoint");
    cmd->add_option("--fixtures", opts.backend.fixtures, "replay fixture file");
    cmd->add_option_function<std::string>(
        "--mock-answer", [&opts](const std::string& v) { opts.backend.mock_answer = v; },
        "fixed mock response text, e.g. \"(d)\"");
    cmd->add_option_function<double>(
           "--mock-gold-accuracy",
           [&opts](double v) { opts.backend.mock_gold_accuracy = v; },
           "mock answers gold with this probability")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--retries", opts.backend.max_attempts, "max attempts per http request")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-inflight", opts.backend.max_inflight, "concurrent http requests")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--rpm", opts.backend.requests_per_minute, "requests-per-minute cap (0 = off)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--no-cache", opts.backend.no_cache, "bypass the response cache");
    cmd->add_option("--cache-dir", opts.backend.cache_dir, "response cache directory");
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);
    std::signal(SIGTERM, handle_sigint);

    CLI::App app{"Thought-experiment prompting harness for the Moral Scenarios benchmark"};
    app.require_subcommand(1);

    moralbench::RunOptions run_opts;
    CLI::App* run = app.add_subcommand("run", "evaluate one method configuration");
    add_method_flags(run, run_opts, /*with_method=*/true);

    moralbench::MatrixOptions matrix_opts;
    CLI::App* matrix = app.add_subcommand("matrix", "evaluate all six methods for a shots setting");
    add_method_flags(matrix, matrix_opts.base, /*with_method=*/false);
    matrix->add_option("--shots", matrix_opts.shots, "0 or 5 demonstration exemplars")
        ->check(CLI::IsMember({0, 5}));

    moralbench::ValidateOptions validate_opts;
    CLI::App* validate = app.add_subcommand("validate", "check dataset and exemplar files");
    validate->add_option("--data", validate_opts.test_csv, "test split CSV")->required();
    validate->add_option("--exemplars", validate_opts.exemplars_path, "exemplar file");

    moralbench::ReplayOptions replay_opts;
    CLI::App* replay = app.add_subcommand("replay", "pretty-print a stored run transcript");
    replay->add_option("--run", replay_opts.run_dir, "run directory")->required();
    replay->add_option("--id", replay_opts.question_id, "show only this question");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == static_cast<int>(CLI::ExitCodes::Success) ? 0 : moralbench::exit_code::usage;
    }

    if (run->parsed()) return moralbench::cmd_run(run_opts, std::cout, std::cerr, &g_cancel);
    if (matrix->parsed()) return moralbench::cmd_matrix(matrix_opts, std::cout, std::cerr, &g_cancel);
    if (validate->parsed()) return moralbench::cmd_validate(validate_opts, std::cout, std::cerr);
    if (replay->parsed()) return moralbench::cmd_replay(replay_opts, std::cout, std::cerr);
    return moralbench::exit_code::usage;
}
