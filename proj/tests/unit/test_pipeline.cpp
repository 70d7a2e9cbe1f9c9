#include <doctest.h>

#include <atomic>
#include <map>

#include "moralbench/dataset.hpp"
#include "moralbench/pipeline.hpp"
#include "test_support.hpp"

using namespace moralbench;

namespace {

MoralQuestion walkthrough_question() {
    const Split split =
        load_split(mbtest::repo_dir() / "data" / "fixtures" / "walkthrough_test.csv",
                   SplitName::test);
    REQUIRE(split.questions.size() == 1);
    return split.questions[0];
}

ReplayBackend walkthrough_backend() {
    return ReplayBackend::from_file(mbtest::repo_dir() / "data" / "fixtures" /
                                    "walkthrough_replay.json");
}

MethodConfig te_config() {
    MethodConfig cfg;
    cfg.method = Method::thought_experiments;
    cfg.shots = 0;
    cfg.num_decodes = 5;
    return cfg;
}

}  // namespace

TEST_CASE("aggregate_freeform trims, drops empties, dedups and joins") {
    CHECK(aggregate_freeform(std::vector<std::string>{"Q1?", "Q1?", "Q2?"}) == "Q1?\nQ2?");
    CHECK(aggregate_freeform(std::vector<std::string>{"  x  "}) == "x");
    CHECK(aggregate_freeform(std::vector<std::string>{"a", "", "b", " a "}) == "a\nb");
    CHECK_THROWS_AS(aggregate_freeform(std::vector<std::string>{"", "  "}), AllEmpty);
}

TEST_CASE("distinct_candidates preserves order and caps") {
    const std::vector<std::string> decodes{"s1", "s2", "s1", "", "s3", "s4", "s5", "s6"};
    const auto c = distinct_candidates(decodes, 5);
    CHECK(c == std::vector<std::string>{"s1", "s2", "s3", "s4", "s5"});
}

TEST_CASE("published walkthrough replays end to end to (b)") {
    const auto q = walkthrough_question();
    auto backend = walkthrough_backend();
    const auto result = run_question(q, te_config(), {}, backend);

    CHECK(result.predicted == AnswerLabel::b);
    CHECK(result.gold == AnswerLabel::b);
    CHECK(result.correct());
    CHECK(!result.extraction_failed);
    REQUIRE(result.stages.size() == 5);
    CHECK(result.stages[0].stage == Stage::pose);
    CHECK(result.stages[1].stage == Stage::answer_cf);
    CHECK(result.stages[2].stage == Stage::summarize);
    CHECK(result.stages[3].stage == Stage::choose);
    CHECK(result.stages[4].stage == Stage::final_answer);

    // choose selected summary (b); the final prompt carries it
    CHECK(result.stages[3].chosen == ExtendedLabel::b);
    CHECK(result.stages[4].prompt.find("harming someone else (my grandpa)") != std::string::npos);

    // prefix property across the cumulative stages
    CHECK(result.stages[1].prompt.starts_with(result.stages[0].prompt));
    CHECK(result.stages[2].prompt.starts_with(result.stages[1].prompt));

    // every stage carries the full decode set
    for (size_t i = 0; i < 5; i++) CHECK(result.stages[i].decodes.size() == 5);
}

TEST_CASE("replay determinism: identical runs produce identical transcripts") {
    const auto q = walkthrough_question();
    auto backend = walkthrough_backend();
    const auto a = run_question(q, te_config(), {}, backend);
    const auto b = run_question(q, te_config(), {}, backend);
    CHECK(a == b);
    CHECK(json(a).dump() == json(b).dump());
}

TEST_CASE("single-prompt methods produce one stage") {
    const auto q = mbtest::sample_question(1);  // gold = b
    MockScript script;
    script.fixed = "(d)";
    MockBackend backend(std::move(script));

    MethodConfig cfg;
    cfg.method = Method::direct;
    const auto result = run_question(q, cfg, {}, backend);
    REQUIRE(result.stages.size() == 1);
    CHECK(result.stages[0].stage == Stage::single);
    CHECK(result.stages[0].decodes.size() == 5);
    CHECK(result.predicted == AnswerLabel::d);
    CHECK(!result.correct());
}

TEST_CASE("self-consistency votes across decodes; off takes decode 0") {
    const auto q = mbtest::sample_question(0);
    const std::vector<std::string> scripted{"(c)", "(c)", "(b)", "(b)", "(c)"};
    MockBackend backend(
        [&scripted](const CompletionRequest&, int i) {
            return scripted[static_cast<size_t>(i) % scripted.size()];
        },
        "scripted");

    MethodConfig cfg;
    cfg.method = Method::cot;
    cfg.self_consistency = true;
    CHECK(run_question(q, cfg, {}, backend).predicted == AnswerLabel::c);

    cfg.self_consistency = false;
    CHECK(run_question(q, cfg, {}, backend).predicted == AnswerLabel::c);  // decode 0 is (c)

    const std::vector<std::string> first_wrong{"(b)", "(c)", "(c)", "(c)", "(c)"};
    MockBackend backend2(
        [&first_wrong](const CompletionRequest&, int i) {
            return first_wrong[static_cast<size_t>(i) % first_wrong.size()];
        },
        "scripted2");
    CHECK(run_question(q, cfg, {}, backend2).predicted == AnswerLabel::b);
    cfg.self_consistency = true;
    CHECK(run_question(q, cfg, {}, backend2).predicted == AnswerLabel::c);
}

TEST_CASE("self-consistency reduction: one decode makes the toggle a no-op") {
    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.num_decodes = 1;

    MockScript script;
    script.gold_accuracy = 0.6;
    script.seed = 5;
    for (int i = 0; i < 50; i++) script.questions.push_back(mbtest::sample_question(i));
    MockBackend backend{MockScript(script)};

    for (int i = 0; i < 50; i++) {
        cfg.self_consistency = false;
        const auto off = run_question(script.questions[static_cast<size_t>(i)], cfg, {}, backend);
        cfg.self_consistency = true;
        const auto on = run_question(script.questions[static_cast<size_t>(i)], cfg, {}, backend);
        CHECK(off.predicted == on.predicted);
    }
}

TEST_CASE("few-shot thought experiments is a single prompt") {
    const auto q = mbtest::sample_question(2);
    const auto exemplars = load_exemplars(mbtest::repo_dir() / "data" / "exemplars.json");
    MockScript script;
    script.fixed = "So the answer is (c).";
    MockBackend backend(std::move(script));

    MethodConfig cfg;
    cfg.method = Method::thought_experiments;
    cfg.shots = 5;
    const auto result = run_question(q, cfg, exemplars, backend);
    REQUIRE(result.stages.size() == 1);
    CHECK(result.stages[0].stage == Stage::single);
    CHECK(result.predicted == AnswerLabel::c);
    CHECK(result.correct());
}

TEST_CASE("exemplar/shots mismatch is rejected before any backend call") {
    const auto q = mbtest::sample_question(0);
    MockScript script;
    MockBackend backend(std::move(script));
    MethodConfig cfg;
    cfg.method = Method::cot;
    cfg.shots = 5;
    CHECK_THROWS_AS(run_question(q, cfg, {}, backend), ConfigError);
    CHECK(backend.calls() == 0);
}

TEST_CASE("all-empty decodes abort the pipeline with extraction failure") {
    const auto q = mbtest::sample_question(0);
    MockScript script;
    script.fixed = "   ";
    MockBackend backend(std::move(script));
    const auto result = run_question(q, te_config(), {}, backend);
    CHECK(result.extraction_failed);
    CHECK(!result.predicted);
    CHECK(result.stages.size() == 1);  // aborted at pose
    CHECK(result.stages[0].stage == Stage::pose);
}

TEST_CASE("single summarize candidate skips the choose stage") {
    const auto q = mbtest::sample_question(0);
    // every stage answers with the same single text, so summarize yields one candidate
    MockScript script;
    script.fixed = "(b)";
    MockBackend backend(std::move(script));
    const auto result = run_question(q, te_config(), {}, backend);
    REQUIRE(result.stages.size() == 5);
    const auto& choose = result.stages[3];
    CHECK(choose.stage == Stage::choose);
    CHECK(choose.chosen == ExtendedLabel::a);
    CHECK(choose.prompt.empty());
    CHECK(choose.decodes.empty());
    CHECK(result.predicted == AnswerLabel::b);
}

TEST_CASE("choose voting over scripted decodes picks the plurality summary") {
    const auto q = walkthrough_question();
    auto backend = walkthrough_backend();
    // swap the canned choose decodes for a split vote: b,e,b,a,b -> b
    const std::string choose_prompt = mbtest::read_golden("te_stage_choose.txt");
    ReplayBackend patched = backend;
    patched.add(choose_prompt, {"(b)", "(e)", "(b)", "(a)", "(b)"});
    const auto result = run_question(q, te_config(), {}, patched);
    CHECK(result.stages[3].chosen == ExtendedLabel::b);
    CHECK(result.predicted == AnswerLabel::b);
}

TEST_CASE("extended label e never leaks into predictions") {
    const auto q = walkthrough_question();
    auto backend = walkthrough_backend();
    // force choose to pick (e): the fifth summary feeds the final stage
    const std::string choose_prompt = mbtest::read_golden("te_stage_choose.txt");
    ReplayBackend patched = backend;
    patched.add(choose_prompt, {"(e)"});
    const json fixture = json::parse(read_file_bytes(
        mbtest::repo_dir() / "data" / "fixtures" / "walkthrough_replay.json"));
    const auto summaries = fixture.at("entries")[2].at("decodes").get<std::vector<std::string>>();
    // final prompt for summary (e) is not canned: register it
    patched.add("For each scenario, did I do something morally wrong? " + summaries[4] +
                    "\nAnswer Choices: (a) Scenario 1 is wrong, Scenario 2 is wrong (b) Scenario 1 "
                    "is wrong, Scenario 2 is not wrong (c) Scenario 1 is not wrong, Scenario 2 is "
                    "wrong (d) Scenario 1 is not wrong, Scenario 2 is not wrong",
                {"(b)"});
    const auto result = run_question(q, te_config(), {}, patched);
    CHECK(result.stages[3].chosen == ExtendedLabel::e);
    REQUIRE(result.predicted.has_value());
    CHECK(result.predicted == AnswerLabel::b);
}

TEST_CASE("run_split collects results in dataset order under concurrency") {
    std::vector<MoralQuestion> questions;
    for (int i = 0; i < 24; i++) questions.push_back(mbtest::sample_question(i));

    MockScript script;
    script.gold_accuracy = 1.0;
    script.questions = questions;
    MockBackend backend(std::move(script));

    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.concurrency = 8;
    cfg.num_decodes = 1;

    std::vector<std::string> seen;
    RunHooks hooks;
    hooks.on_result = [&](const QuestionResult& r, size_t, size_t) {
        seen.push_back(r.question_id);
    };
    const auto results = run_split(questions, cfg, {}, backend, hooks);
    REQUIRE(results.size() == questions.size());
    for (size_t i = 0; i < questions.size(); i++) {
        CHECK(results[i].question_id == questions[i].id);
        CHECK(seen[i] == questions[i].id);
        CHECK(results[i].correct());
    }
}

TEST_CASE("run_split cancellation stops dispatch but keeps completed results") {
    std::vector<MoralQuestion> questions;
    for (int i = 0; i < 12; i++) questions.push_back(mbtest::sample_question(i));

    // the flag flips during question 3's backend call, before the next dispatch
    std::atomic<bool> cancel{false};
    std::atomic<int> calls{0};
    MockBackend backend(
        [&](const CompletionRequest&, int) {
            if (calls.fetch_add(1) == 3) cancel.store(true);
            return std::string("(a)");
        },
        "cancelling");

    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.concurrency = 1;
    cfg.num_decodes = 1;

    RunHooks hooks;
    hooks.cancel = &cancel;
    const auto results = run_split(questions, cfg, {}, backend, hooks);
    CHECK(results.size() == 4);
    CHECK(backend.calls() == 4);
}

TEST_CASE("run_split propagates the first backend error after draining") {
    std::vector<MoralQuestion> questions;
    for (int i = 0; i < 6; i++) questions.push_back(mbtest::sample_question(i));
    std::atomic<int> calls{0};
    MockBackend backend(
        [&calls](const CompletionRequest&, int) -> std::string {
            if (calls.fetch_add(1) == 2) throw BackendUnavailable("scripted outage");
            return "(a)";
        },
        "flaky");
    MethodConfig cfg;
    cfg.method = Method::direct;
    cfg.concurrency = 1;
    cfg.num_decodes = 1;
    CHECK_THROWS_AS(run_split(questions, cfg, {}, backend), BackendUnavailable);
}
