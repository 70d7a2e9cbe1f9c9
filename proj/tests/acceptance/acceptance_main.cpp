// Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "moralbench/cli.hpp"
#include "moralbench/dataset.hpp"
#include "moralbench/eval.hpp"
#include "moralbench/extract.hpp"
#include "moralbench/persistence.hpp"
#include "moralbench/pipeline.hpp"
#include "moralbench/prompting.hpp"
#include "moralbench/util.hpp"

using namespace moralbench;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw Failure(msg);
}

fs::path repo_dir() { return MB_REPO_DIR; }

std::string read_golden(const std::string& name) {
    std::string bytes = read_file_bytes(repo_dir() / "tests" / "golden" / name);
    if (!bytes.empty() && bytes.back() == '\n') bytes.pop_back();
    return bytes;
}

fs::path scratch_root() {
    static fs::path root = [] {
        auto dir = fs::temp_directory_path() / ("moralbench-acceptance-" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return root;
}

fs::path scratch(const std::string& tag) {
    auto dir = scratch_root() / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

MoralQuestion walkthrough_question() {
    const Split split = load_split(repo_dir() / "data" / "fixtures" / "walkthrough_test.csv",
                                   SplitName::test);
    require(split.questions.size() == 1, "walkthrough split should hold one question");
    return split.questions[0];
}

std::vector<MoralQuestion> synthetic_questions(int count) {
    std::vector<MoralQuestion> out;
    for (int i = 0; i < count; i++) {
        MoralQuestion q;
        q.id = "test-" + std::to_string(i);
        q.header = "For which of these two scenarios does the main character (who uses I/me/my) "
                   "do something clearly morally wrong, according to ordinary moral standards in "
                   "the US as of 2020?";
        q.scenario1 = "I followed house rule number " + std::to_string(i) + " without complaint.";
        q.scenario2 = "I broke house rule number " + std::to_string(i) + " on purpose.";
        q.choices = {"Wrong, Wrong", "Wrong, Not wrong", "Not wrong, Wrong",
                     "Not wrong, Not wrong"};
        q.gold = static_cast<AnswerLabel>(i % 4);
        out.push_back(std::move(q));
    }
    return out;
}

std::string csv_field(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

fs::path write_synthetic_csv(const fs::path& dir, const std::vector<MoralQuestion>& questions) {
    std::string bytes;
    for (const auto& q : questions) {
        const std::string column =
            q.header + " Scenario 1 | " + q.scenario1 + " Scenario 2 | " + q.scenario2;
        bytes += csv_field(column);
        for (const auto& c : q.choices) bytes += "," + csv_field(c);
        bytes += ",";
        bytes += static_cast<char>('A' + static_cast<int>(q.gold));
        bytes += "\r\n";
    }
    const auto path = dir / "synthetic_test.csv";
    write_file_atomic(path, bytes);
    return path;
}

// ---------------------------------------------------------------------------

void criterion_prompt_goldens() {
    const MoralQuestion q = walkthrough_question();
    const auto exemplars = load_exemplars(repo_dir() / "data" / "exemplars.json");

    require(build_direct(q).text == read_golden("direct_zero_shot.txt"), "direct zero-shot");
    require(build_cot(q).text == read_golden("cot_zero_shot.txt"), "cot zero-shot");
    require(build_direct(q, exemplars).text == read_golden("direct_few_shot.txt"),
            "direct few-shot");
    require(build_cot(q, exemplars).text == read_golden("cot_few_shot.txt"), "cot few-shot");
    require(build_te_fewshot(q, exemplars).text == read_golden("te_few_shot.txt"), "te few-shot");

    const std::string pose = read_golden("te_stage_pose.txt");
    require(build_te_stage(q, Stage::pose, "").text == pose, "pose stage");

    const json fixture = json::parse(
        read_file_bytes(repo_dir() / "data" / "fixtures" / "walkthrough_replay.json"));
    const auto& entries = fixture.at("entries");
    const auto pose_decodes = entries[0].at("decodes").get<std::vector<std::string>>();
    const auto answer_decodes = entries[1].at("decodes").get<std::vector<std::string>>();
    const auto summaries = entries[2].at("decodes").get<std::vector<std::string>>();

    const std::string answer_prompt =
        build_te_stage(q, Stage::answer_cf, pose + " " + aggregate_freeform(pose_decodes)).text;
    require(answer_prompt == read_golden("te_stage_answer_cf.txt"), "answer_cf stage");

    const std::string summarize_prompt =
        build_te_stage(q, Stage::summarize,
                       answer_prompt + " " + aggregate_freeform(answer_decodes))
            .text;
    require(summarize_prompt == read_golden("te_stage_summarize.txt"), "summarize stage");

    require(build_choose(q, summaries).text == read_golden("te_stage_choose.txt"), "choose stage");
    require(build_final(q, summaries[1]).text == read_golden("te_stage_final.txt"), "final stage");
}

void criterion_walkthrough_end_to_end() {
    const MoralQuestion q = walkthrough_question();
    auto backend = ReplayBackend::from_file(repo_dir() / "data" / "fixtures" /
                                            "walkthrough_replay.json");
    MethodConfig cfg;
    cfg.method = Method::thought_experiments;
    cfg.self_consistency = true;

    const QuestionResult result = run_question(q, cfg, {}, backend);
    require(result.predicted == AnswerLabel::b, "prediction should be (b)");
    require(result.stages.size() == 5, "transcript should have 5 stages");
    require(result.stages[1].prompt.starts_with(result.stages[0].prompt),
            "answer_cf prompt should extend pose");
    require(result.stages[2].prompt.starts_with(result.stages[1].prompt),
            "summarize prompt should extend answer_cf");

    // same thing through the CLI surface, reporting 100.00% on this one-question split
    RunOptions opts;
    opts.config = cfg;
    opts.test_csv = (repo_dir() / "data" / "fixtures" / "walkthrough_test.csv").string();
    opts.limit = 1;
    opts.out_dir = scratch("walkthrough-run").string();
    opts.backend.kind = "replay";
    opts.backend.fixtures = (repo_dir() / "data" / "fixtures" / "walkthrough_replay.json").string();
    opts.quiet = true;
    std::ostringstream out;
    std::ostringstream err;
    const int code = cmd_run(opts, out, err);
    require(code == 0, "cmd_run should succeed: " + err.str());
    require(out.str().find("100.00%") != std::string::npos,
            "report should show 100.00% accuracy");
}

// Independent oracle: explicit counting with ordered tie-break.
std::optional<AnswerLabel> vote_oracle(const std::vector<std::optional<AnswerLabel>>& votes) {
    std::map<int, int> counts;
    for (const auto& v : votes) {
        if (v) counts[static_cast<int>(*v)]++;
    }
    if (counts.empty()) return std::nullopt;
    int best_label = -1;
    int best_count = 0;
    for (const auto& [label, count] : counts) {
        if (count > best_count) {
            best_count = count;
            best_label = label;
        }
    }
    return static_cast<AnswerLabel>(best_label);
}

void criterion_voting_oracle() {
    int checked = 0;
    for (int size = 1; size <= 5; size++) {
        std::vector<int> pick(static_cast<size_t>(size), 0);
        while (true) {
            std::vector<std::optional<AnswerLabel>> votes;
            for (int v : pick) {
                votes.push_back(v == 4 ? std::nullopt : std::optional(static_cast<AnswerLabel>(v)));
            }
            require(majority_vote(votes) == vote_oracle(votes), "vote disagrees with oracle");
            checked++;
            int i = size - 1;
            while (i >= 0 && pick[static_cast<size_t>(i)] == 4) i--;
            if (i < 0) break;
            const int v = pick[static_cast<size_t>(i)] + 1;
            for (int j = i; j < size; j++) pick[static_cast<size_t>(j)] = v;
        }
    }
    require(checked == 251, "expected every multiset of size 1..5 over 5 outcomes");
}

void criterion_extraction_corpus() {
    const std::string bytes =
        read_file_bytes(repo_dir() / "tests" / "data" / "extraction_corpus.jsonl");
    std::istringstream in(bytes);
    std::string line;
    int entries = 0;
    const auto standard = final_answer_options(walkthrough_question());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        entries++;
        ExtractOptions opts;
        opts.num_labels = rec.at("labels").get<int>();
        if (rec.at("option_texts").get<bool>()) opts = standard;
        const auto got = extract_label(rec.at("text").get<std::string>(), opts);
        const std::string text = rec.at("text").get<std::string>();
        if (rec.at("expected").is_null()) {
            require(!got.has_value(), "expected failure for: " + text);
        } else {
            require(got.has_value(), "expected a parse for: " + text);
            require(label_char(*got) == rec.at("expected").get<std::string>()[0],
                    "wrong label for: " + text);
        }
    }
    require(entries >= 20, "corpus should hold at least 20 fixtures");
}

void criterion_statistical_mock() {
    constexpr int kQuestions = 500;
    constexpr double kP = 0.8;
    const auto questions = synthetic_questions(kQuestions);

    MockScript script;
    script.gold_accuracy = kP;
    script.questions = questions;
    script.seed = 20260810;
    MockBackend backend(std::move(script));

    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.num_decodes = 1;
    cfg.concurrency = 8;
    const auto results = run_split(questions, cfg, {}, backend);
    const auto report = score(results, "mock");

    // exact central 99% binomial interval via log-gamma pmf
    std::vector<double> pmf(kQuestions + 1);
    for (int k = 0; k <= kQuestions; k++) {
        const double log_pmf = std::lgamma(kQuestions + 1.0) - std::lgamma(k + 1.0) -
                               std::lgamma(kQuestions - k + 1.0) + k * std::log(kP) +
                               (kQuestions - k) * std::log(1.0 - kP);
        pmf[static_cast<size_t>(k)] = std::exp(log_pmf);
    }
    int lo = 0;
    double tail = 0;
    while (lo <= kQuestions && tail + pmf[static_cast<size_t>(lo)] <= 0.005) {
        tail += pmf[static_cast<size_t>(lo)];
        lo++;
    }
    int hi = kQuestions;
    tail = 0;
    while (hi >= 0 && tail + pmf[static_cast<size_t>(hi)] <= 0.005) {
        tail += pmf[static_cast<size_t>(hi)];
        hi--;
    }
    const auto correct = static_cast<int>(report.correct);
    require(correct >= lo && correct <= hi,
            "observed " + std::to_string(correct) + " correct outside exact 99% interval [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void criterion_matrix_shape() {
    const auto dir = scratch("matrix");
    const auto questions = synthetic_questions(8);
    const auto csv = write_synthetic_csv(dir, questions);

    for (int shots : {0, 5}) {
        MatrixOptions opts;
        opts.shots = shots;
        opts.base.config.num_decodes = 3;
        opts.base.config.seed = 11;
        opts.base.config.concurrency = 4;
        opts.base.test_csv = csv.string();
        opts.base.exemplars_path = (repo_dir() / "data" / "exemplars.json").string();
        opts.base.out_dir = (dir / ("out-" + std::to_string(shots))).string();
        opts.base.backend.kind = "mock";
        opts.base.backend.mock_gold_accuracy = 0.9;
        opts.base.quiet = true;

        std::ostringstream out;
        std::ostringstream err;
        const int code = cmd_matrix(opts, out, err);
        require(code == 0, "matrix should succeed: " + err.str());

        std::vector<std::string> lines;
        std::istringstream stream(out.str());
        std::string line;
        while (std::getline(stream, line)) {
            if (!line.empty()) lines.push_back(line);
        }
        require(lines.size() == 2 + 6, "expected header, separator and exactly 6 rows");

        const std::string prefix = shots == 5 ? "5-shot" : "Zero-shot";
        const std::vector<std::string> expected{
            prefix,
            prefix + " + self-consistency",
            prefix + " CoT",
            prefix + " CoT + self-consistency",
            prefix + " Thought Experiments",
            prefix + " Thought Experiments + self-consistency",
        };
        for (size_t i = 0; i < expected.size(); i++) {
            const std::string& row = lines[2 + i];
            require(row.rfind(expected[i], 0) == 0,
                    "row " + std::to_string(i) + " should be \"" + expected[i] + "\": " + row);
            // two-decimal percent at the end of every row
            const size_t pct = row.rfind('%');
            require(pct != std::string::npos && pct == row.size() - 1, "row should end with %");
            const size_t dot = row.rfind('.');
            require(dot != std::string::npos && pct - dot == 3,
                    "percent should carry exactly two decimals: " + row);
        }
    }
}

void criterion_resume() {
    constexpr int kN = 10;
    constexpr int kInterruptAfter = 3;
    const auto questions = synthetic_questions(kN);
    const auto dir = scratch("resume");
    const auto csv = write_synthetic_csv(dir, questions);
    const std::string dataset_digest = sha256_hex(read_file_bytes(csv));

    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.num_decodes = 5;
    cfg.concurrency = 1;
    cfg.seed = 3;

    auto make_gold_mock = [&] {
        MockScript script;
        script.gold_accuracy = 0.7;
        script.questions = questions;
        script.seed = 3;
        return MockBackend(std::move(script));
    };
    RunManifest manifest;
    manifest.run_id = "resume-check";
    manifest.config = cfg;
    manifest.dataset_path = csv.string();
    manifest.dataset_digest = dataset_digest;
    manifest.backend_id = "mock";

    // uninterrupted reference run
    auto full_backend = make_gold_mock();
    const auto full_dir = dir / "full";
    fs::create_directories(full_dir);
    {
        auto store = RunStore::create_or_resume(full_dir, manifest);
        RunHooks hooks;
        hooks.on_result = [&](const QuestionResult& r, size_t, size_t) {
            store.write_transcript(r);
        };
        const auto results = run_split(questions, cfg, {}, full_backend, hooks);
        const auto report = score(results, method_display_name(cfg));
        std::vector<CompareRow> rows{{report.method_name, report.accuracy}};
        store.write_report(report, compare_table(rows));
    }
    require(full_backend.calls() == kN, "reference run should issue one call per question");

    // interrupted run: the backend dies on call index kInterruptAfter
    const auto resumed_dir = dir / "resumed";
    fs::create_directories(resumed_dir);
    {
        auto inner = make_gold_mock();
        int calls = 0;
        MockBackend failing(
            [&](const CompletionRequest& req, int i) -> std::string {
                if (calls == kInterruptAfter && i == 0) throw BackendUnavailable("injected outage");
                if (i == req.n - 1) calls++;
                return inner.complete(req).decodes[static_cast<size_t>(i)];
            },
            "mock");
        auto store = RunStore::create_or_resume(resumed_dir, manifest);
        RunHooks hooks;
        hooks.on_result = [&](const QuestionResult& r, size_t, size_t) {
            store.write_transcript(r);
        };
        bool threw = false;
        try {
            run_split(questions, cfg, {}, failing, hooks);
        } catch (const BackendUnavailable&) {
            threw = true;
        }
        require(threw, "interrupted run should propagate the outage");
    }

    // resume: only the complement may reach the backend
    {
        auto store = RunStore::create_or_resume(resumed_dir, manifest);
        const auto done = store.resume_set();
        require(done.size() == kInterruptAfter,
                "expected " + std::to_string(kInterruptAfter) + " completed questions, got " +
                    std::to_string(done.size()));
        std::vector<MoralQuestion> remaining;
        for (const auto& q : questions) {
            if (!done.count(q.id)) remaining.push_back(q);
        }
        auto resumed_backend = make_gold_mock();
        RunHooks hooks;
        hooks.on_result = [&](const QuestionResult& r, size_t, size_t) {
            store.write_transcript(r);
        };
        run_split(remaining, cfg, {}, resumed_backend, hooks);
        require(resumed_backend.calls() == static_cast<uint64_t>(kN - kInterruptAfter),
                "resume should issue backend calls for exactly n-k questions, got " +
                    std::to_string(resumed_backend.calls()));

        // merged report must match the uninterrupted one byte for byte
        const auto scan = store.read_transcripts();
        require(scan.results.size() == kN, "merged transcript should cover the full split once");
        std::map<std::string, QuestionResult> by_id;
        for (const auto& r : scan.results) by_id[r.question_id] = r;
        std::vector<QuestionResult> merged;
        for (const auto& q : questions) merged.push_back(by_id.at(q.id));
        const auto report = score(merged, method_display_name(cfg));
        std::vector<CompareRow> rows{{report.method_name, report.accuracy}};
        store.write_report(report, compare_table(rows));
    }
    require(read_file_bytes(full_dir / "report.json") ==
                read_file_bytes(resumed_dir / "report.json"),
            "resumed report should equal the uninterrupted one");
    require(read_file_bytes(full_dir / "report.txt") == read_file_bytes(resumed_dir / "report.txt"),
            "resumed table should equal the uninterrupted one");
}

void criterion_determinism() {
    auto run_into = [&](const std::string& tag) {
        RunOptions opts;
        opts.config.method = Method::thought_experiments;
        opts.config.self_consistency = true;
        opts.config.seed = 42;
        opts.test_csv = (repo_dir() / "data" / "fixtures" / "walkthrough_test.csv").string();
        opts.out_dir = scratch(tag).string();
        opts.backend.kind = "replay";
        opts.backend.fixtures =
            (repo_dir() / "data" / "fixtures" / "walkthrough_replay.json").string();
        opts.quiet = true;
        std::ostringstream out;
        std::ostringstream err;
        const int code = cmd_run(opts, out, err);
        require(code == 0, "replay run failed: " + err.str());
        return fs::path(opts.out_dir);
    };
    const auto a = run_into("determinism-a");
    const auto b = run_into("determinism-b");
    require(read_file_bytes(a / "transcript.jsonl") == read_file_bytes(b / "transcript.jsonl"),
            "transcript logs should be byte-identical");
    require(read_file_bytes(a / "report.json") == read_file_bytes(b / "report.json"),
            "reports should be byte-identical");
    require(read_file_bytes(a / "report.txt") == read_file_bytes(b / "report.txt"),
            "report tables should be byte-identical");
}

void criterion_self_consistency_reduction() {
    const auto questions = synthetic_questions(50);
    MockScript script;
    script.gold_accuracy = 0.75;
    script.questions = questions;
    script.seed = 9;
    MockBackend backend(std::move(script));

    MethodConfig cfg;
    cfg.method = Method::cot;
    cfg.num_decodes = 1;
    cfg.concurrency = 4;

    cfg.self_consistency = false;
    const auto off = run_split(questions, cfg, {}, backend);
    cfg.self_consistency = true;
    const auto on = run_split(questions, cfg, {}, backend);
    require(off.size() == on.size() && off.size() == questions.size(), "both runs should finish");
    for (size_t i = 0; i < off.size(); i++) {
        require(off[i].predicted == on[i].predicted,
                "prediction differs at " + off[i].question_id);
    }
}

struct Criterion {
    int number;
    const char* name;
    double budget_s;
    std::function<void()> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "prompt builders match the transcribed golden fixtures byte-for-byte", 1.0,
         criterion_prompt_goldens},
        {2, "replayed walkthrough predicts (b) with a 5-stage prefix-consistent transcript", 1.0,
         criterion_walkthrough_end_to_end},
        {3, "majority vote equals the brute-force oracle on all multisets up to size 5", 1.0,
         criterion_voting_oracle},
        {4, "extraction corpus parses 100% as expected", 1.0, criterion_extraction_corpus},
        {5, "mock accuracy over 500 questions falls in the exact 99% binomial interval", 10.0,
         criterion_statistical_mock},
        {6, "matrix emits exactly the 6 method rows in table order with 2-decimal percents", 30.0,
         criterion_matrix_shape},
        {7, "interrupt/resume issues exactly n-k backend calls and reproduces the report", 10.0,
         criterion_resume},
        {8, "two identical replay runs produce byte-identical transcripts and reports", 10.0,
         criterion_determinism},
        {9, "with one decode, self-consistency on/off predict identically over 50 questions", 10.0,
         criterion_self_consistency_reduction},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            c.body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (error.empty() && elapsed > c.budget_s) {
            error = "exceeded " + std::to_string(c.budget_s) + "s budget";
        }
        if (error.empty()) {
            std::printf("PASS criterion %d: %s (%.3fs)\n", c.number, c.name, elapsed);
        } else {
            failures++;
            std::printf("FAIL criterion %d: %s -- %s\n", c.number, c.name, error.c_str());
        }
    }
    if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
