#include "moralbench/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <unordered_map>

#include "moralbench/dataset.hpp"
#include "moralbench/eval.hpp"
#include "moralbench/persistence.hpp"
#include "moralbench/pipeline.hpp"
#include "moralbench/util.hpp"

namespace moralbench {

namespace fs = std::filesystem;

std::shared_ptr<CompletionBackend> make_backend(const BackendOptions& opts,
                                                const std::vector<MoralQuestion>& questions,
                                                uint64_t seed, const std::string& default_cache_dir) {
    if (opts.kind == "mock") {
        MockScript script;
        script.fixed = opts.mock_answer;
        if (opts.mock_gold_accuracy) {
            script.gold_accuracy = *opts.mock_gold_accuracy;
            script.questions = questions;
        }
        script.seed = seed;
        return std::make_shared<MockBackend>(std::move(script));
    }
    if (opts.kind == "replay") {
        if (opts.fixtures.empty()) throw ConfigError("--backend replay requires --fixtures");
        if (!fs::exists(opts.fixtures)) {
            throw ConfigError("fixture file not found: " + opts.fixtures);
        }
        return std::make_shared<ReplayBackend>(ReplayBackend::from_file(opts.fixtures));
    }
    if (opts.kind == "http") {
        HttpBackendConfig cfg;
        cfg.endpoint = opts.endpoint;
        cfg.model = opts.model;
        if (const char* key = std::getenv(kApiKeyEnv)) cfg.api_key = key;
        cfg.max_attempts = opts.max_attempts;
        cfg.max_inflight = opts.max_inflight;
        cfg.requests_per_minute = opts.requests_per_minute;
        auto http = std::make_shared<HttpBackend>(cfg);
        if (opts.no_cache) return http;
        const std::string dir = opts.cache_dir.empty() ? default_cache_dir : opts.cache_dir;
        return std::make_shared<CachingBackend>(http, dir);
    }
    throw ConfigError("unknown backend \"" + opts.kind + "\" (expected http, replay or mock)");
}

static std::string method_tag(const MethodConfig& cfg) {
    std::string tag = method_name(cfg.method);
    tag += cfg.shots == 5 ? "-5shot" : "-0shot";
    if (cfg.self_consistency) tag += "-sc";
    return tag;
}

namespace {

struct RunOutcome {
    EvalReport report;
    fs::path run_dir;
    bool interrupted = false;
};

RunOutcome run_once(const RunOptions& opts, std::ostream& err, const std::atomic<bool>* cancel) {
    opts.config.validate();
    if (opts.limit == 0) throw ConfigError("--limit must be at least 1");
    if (opts.test_csv.empty()) throw ConfigError("--data is required");
    if (!fs::exists(opts.test_csv)) throw ConfigError("dataset file not found: " + opts.test_csv);

    std::vector<Exemplar> exemplars;
    std::string exemplars_digest;
    if (opts.config.shots == 5) {
        if (opts.exemplars_path.empty() || !fs::exists(opts.exemplars_path)) {
            throw ConfigError("5-shot methods need an exemplar file (--exemplars): " +
                              opts.exemplars_path);
        }
        const std::string bytes = read_file_bytes(opts.exemplars_path);
        exemplars = parse_exemplars(bytes);
        exemplars_digest = sha256_hex(bytes);
    }

    const std::string dataset_bytes = read_file_bytes(opts.test_csv);
    Split split = parse_split(dataset_bytes, SplitName::test);
    if (split.questions.empty()) throw ValidationError("dataset is empty: " + opts.test_csv);
    if (opts.limit > 0 && static_cast<size_t>(opts.limit) < split.questions.size()) {
        split.questions.resize(static_cast<size_t>(opts.limit));
    }

    const std::string dataset_digest = sha256_hex(dataset_bytes);
    const std::string tag = method_tag(opts.config);
    const std::string run_id =
        opts.run_id.empty()
            ? tag + "-" + config_digest(opts.config).substr(0, 8) + "-" + dataset_digest.substr(0, 8)
            : opts.run_id;
    const fs::path run_dir = opts.out_dir.empty() ? fs::path("runs") / run_id : fs::path(opts.out_dir);

    auto backend = make_backend(opts.backend, split.questions,
                                opts.config.seed ? static_cast<uint64_t>(*opts.config.seed) : 0,
                                (run_dir / "cache").string());

    RunManifest manifest;
    manifest.run_id = run_id;
    manifest.config = opts.config;
    manifest.dataset_path = opts.test_csv;
    manifest.dataset_digest = dataset_digest;
    manifest.backend_id = backend->id();
    manifest.exemplars_digest = exemplars_digest;
    RunStore store = RunStore::create_or_resume(run_dir, manifest);

    const auto scan = store.read_transcripts();
    for (size_t offset : scan.corrupt_offsets) {
        err << "warning: skipping corrupt transcript record at byte " << offset << "\n";
    }
    std::unordered_map<std::string, const QuestionResult*> prior;
    for (const auto& r : scan.results) prior[r.question_id] = &r;

    std::vector<MoralQuestion> to_run;
    size_t prior_count = 0;
    for (const auto& q : split.questions) {
        if (prior.count(q.id)) {
            prior_count++;
        } else {
            to_run.push_back(q);
        }
    }
    if (prior_count > 0) {
        err << "resuming: " << prior_count << "/" << split.questions.size()
            << " questions already completed\n";
    }

    size_t running_correct = 0;
    for (const auto& q : split.questions) {
        auto it = prior.find(q.id);
        if (it != prior.end() && it->second->correct()) running_correct++;
    }

    RunHooks hooks;
    hooks.cancel = cancel;
    if (!backend->deterministic()) {
        hooks.clock_ms = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now().time_since_epoch())
                .count();
        };
    }
    size_t completed = prior_count;
    const size_t total = split.questions.size();
    hooks.on_result = [&](const QuestionResult& r, size_t, size_t) {
        store.write_transcript(r);
        completed++;
        if (r.correct()) running_correct++;
        if (!opts.quiet) {
            err << "[" << completed << "/" << total << "] acc "
                << format_percent(static_cast<double>(running_correct) /
                                  static_cast<double>(completed))
                << " (" << running_correct << "/" << completed << ") " << r.question_id << "\n";
        }
    };

    std::vector<QuestionResult> fresh =
        run_split(to_run, opts.config, exemplars, *backend, hooks);

    if (cancel && cancel->load() && completed < total) {
        err << "interrupted after " << completed << "/" << total
            << " questions; rerun the same command to resume\n";
        RunOutcome outcome;
        outcome.run_dir = run_dir;
        outcome.interrupted = true;
        return outcome;
    }

    // Merge prior and fresh results back into dataset order.
    std::unordered_map<std::string, const QuestionResult*> fresh_by_id;
    for (const auto& r : fresh) fresh_by_id[r.question_id] = &r;
    std::vector<QuestionResult> merged;
    merged.reserve(total);
    for (const auto& q : split.questions) {
        if (auto it = fresh_by_id.find(q.id); it != fresh_by_id.end()) {
            merged.push_back(*it->second);
        } else if (auto pit = prior.find(q.id); pit != prior.end()) {
            merged.push_back(*pit->second);
        } else {
            throw StorageError("missing result for " + q.id);
        }
    }

    RunOutcome outcome;
    outcome.report = score(merged, method_display_name(opts.config));
    outcome.run_dir = run_dir;
    std::vector<CompareRow> rows{{outcome.report.method_name, outcome.report.accuracy}};
    store.write_report(outcome.report, compare_table(rows));
    return outcome;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const BackendError*>(&e)) return exit_code::backend;
    if (dynamic_cast<const ConfigError*>(&e)) return exit_code::usage;
    if (dynamic_cast<const ValidationError*>(&e)) return exit_code::data;
    return exit_code::usage;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel) {
    try {
        RunOutcome outcome = run_once(opts, err, cancel);
        if (outcome.interrupted) return exit_code::interrupted;
        const auto& r = outcome.report;
        std::vector<CompareRow> rows{{r.method_name, r.accuracy}};
        out << compare_table(rows);
        out << "correct " << r.correct << "/" << r.total << ", extraction failures "
            << r.extraction_failures << "\n";
        out << "transcripts: " << (outcome.run_dir / "transcript.jsonl").string() << "\n";
        return exit_code::ok;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

int cmd_matrix(const MatrixOptions& opts, std::ostream& out, std::ostream& err,
               const std::atomic<bool>* cancel) {
    static constexpr std::pair<Method, bool> kTableOrder[6] = {
        {Method::direct, false},           {Method::direct, true}, {Method::cot, false},
        {Method::cot, true},               {Method::thought_experiments, false},
        {Method::thought_experiments, true},
    };

    std::vector<CompareRow> rows;
    int first_failure = exit_code::ok;
    const fs::path base_out =
        opts.base.out_dir.empty() ? fs::path("runs") / ("matrix-" + std::to_string(opts.shots) + "shot")
                                  : fs::path(opts.base.out_dir);

    for (const auto& [method, sc] : kTableOrder) {
        RunOptions row_opts = opts.base;
        row_opts.config.method = method;
        row_opts.config.shots = opts.shots;
        row_opts.config.self_consistency = sc;
        row_opts.out_dir = (base_out / method_tag(row_opts.config)).string();
        row_opts.run_id.clear();
        const std::string display = method_display_name(row_opts.config);
        try {
            RunOutcome outcome = run_once(row_opts, err, cancel);
            if (outcome.interrupted) return exit_code::interrupted;
            rows.push_back({display, outcome.report.accuracy});
        } catch (const std::exception& e) {
            err << display << " failed: " << e.what() << "\n";
            rows.push_back({display, std::nullopt});
            if (first_failure == exit_code::ok) first_failure = exit_code_for(e);
        }
        if (cancel && cancel->load()) return exit_code::interrupted;
    }

    const std::string table = compare_table(rows);
    out << table;
    std::error_code ec;
    fs::create_directories(base_out, ec);
    if (!ec) {
        write_file_atomic(base_out / "matrix_report.txt", table);
        write_file_atomic(base_out / "matrix_report.json", compare_json(rows).dump(2) + "\n");
    }
    return first_failure;
}

int cmd_validate(const ValidateOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        if (opts.test_csv.empty()) throw ConfigError("--data is required");
        const Split split = load_split(opts.test_csv, SplitName::test);
        const auto exemplars = load_exemplars(opts.exemplars_path);
        for (const auto& q : split.questions) q.validate();
        for (const auto& ex : exemplars) ex.validate();
        out << "OK: " << exemplars.size() << " exemplars, " << split.questions.size()
            << " test questions\n";
        return exit_code::ok;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const std::exception& e) {
        err << "validation failed: " << e.what() << "\n";
        return exit_code::data;
    }
}

int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        RunStore store = RunStore::attach(opts.run_dir);
        const auto scan = store.read_transcripts();
        for (size_t offset : scan.corrupt_offsets) {
            err << "warning: corrupt transcript record at byte " << offset << "\n";
        }
        size_t shown = 0;
        for (const auto& r : scan.results) {
            if (!opts.question_id.empty() && r.question_id != opts.question_id) continue;
            shown++;
            out << "=== " << r.question_id << " gold (" << label_char(r.gold) << ") predicted ";
            if (r.predicted) {
                out << "(" << label_char(*r.predicted) << ")"
                    << (*r.predicted == r.gold ? " correct" : " incorrect");
            } else {
                out << "none (extraction failed)";
            }
            out << "\n";
            for (const auto& s : r.stages) {
                out << "--- stage " << stage_name(s.stage);
                if (s.chosen) out << " -> (" << label_char(*s.chosen) << ")";
                out << "\n";
                if (!s.prompt.empty()) out << "prompt:\n" << s.prompt << "\n";
                for (size_t i = 0; i < s.decodes.size(); i++) {
                    out << "decode[" << i << "]: " << s.decodes[i] << "\n";
                }
                if (!s.aggregate.empty()) out << "aggregate:\n" << s.aggregate << "\n";
            }
        }
        if (!opts.question_id.empty() && shown == 0) {
            err << "no transcript record for question \"" << opts.question_id << "\"\n";
            return exit_code::data;
        }
        return exit_code::ok;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace moralbench
