#include "moralbench/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "moralbench/extract.hpp"
#include "moralbench/prompting.hpp"

namespace moralbench {

static std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
    return s.substr(b, e - b);
}

std::vector<std::string> distinct_candidates(std::span<const std::string> decodes, size_t cap) {
    std::vector<std::string> out;
    for (const auto& d : decodes) {
        std::string t = trim(d);
        if (t.empty()) continue;
        if (std::find(out.begin(), out.end(), t) != out.end()) continue;
        out.push_back(std::move(t));
        if (out.size() == cap) break;
    }
    return out;
}

std::string aggregate_freeform(std::span<const std::string> decodes) {
    const auto kept = distinct_candidates(decodes, decodes.size());
    if (kept.empty()) throw AllEmpty("every decode was empty or whitespace");
    std::string joined;
    for (size_t i = 0; i < kept.size(); i++) {
        if (i) joined += '\n';
        joined += kept[i];
    }
    return joined;
}

namespace {

// Issues one backend call and fills a StageRecord with the exchange.
class StageRunner {
  public:
    StageRunner(const MethodConfig& cfg, CompletionBackend& backend, const ClockMs& clock)
        : cfg_(cfg), backend_(backend), clock_(clock) {}

    StageRecord call(const Prompt& prompt) {
        CompletionRequest req;
        req.prompt = prompt.text;
        req.n = cfg_.num_decodes;
        req.temperature = cfg_.temperature;
        req.max_output_tokens = cfg_.max_output_tokens;
        req.seed = cfg_.seed;

        StageRecord rec;
        rec.stage = prompt.stage;
        rec.prompt = prompt.text;
        const int64_t started = clock_ ? clock_() : 0;
        CompletionResponse resp = backend_.complete(req);
        rec.timing_ms = clock_ ? clock_() - started : 0;
        rec.decodes = std::move(resp.decodes);
        if (resp.usage) {
            rec.prompt_tokens = resp.usage->prompt_tokens;
            rec.output_tokens = resp.usage->output_tokens;
        }
        return rec;
    }

  private:
    const MethodConfig& cfg_;
    CompletionBackend& backend_;
    const ClockMs& clock_;
};

std::optional<AnswerLabel> select_prediction(const std::vector<std::string>& decodes,
                                             const MoralQuestion& q, bool self_consistency) {
    if (!self_consistency) {
        return decodes.empty() ? std::nullopt : extract_answer(decodes[0], q);
    }
    std::vector<std::optional<AnswerLabel>> votes;
    votes.reserve(decodes.size());
    for (const auto& d : decodes) votes.push_back(extract_answer(d, q));
    return majority_vote(votes);
}

}  // namespace

QuestionResult run_te_pipeline(const MoralQuestion& q, const MethodConfig& cfg,
                               CompletionBackend& backend, const ClockMs& clock_ms) {
    QuestionResult result;
    result.question_id = q.id;
    result.gold = q.gold;
    StageRunner runner(cfg, backend, clock_ms);

    auto abort_failed = [&](StageRecord rec) {
        result.stages.push_back(std::move(rec));
        result.extraction_failed = true;
        return result;
    };

    // 1-2: pose counterfactuals, then answer them over the accumulated context.
    std::string context;
    for (Stage stage : {Stage::pose, Stage::answer_cf}) {
        StageRecord rec = runner.call(build_te_stage(q, stage, context));
        try {
            rec.aggregate = aggregate_freeform(rec.decodes);
        } catch (const AllEmpty&) {
            return abort_failed(std::move(rec));
        }
        context = rec.prompt + " " + rec.aggregate;
        result.stages.push_back(std::move(rec));
    }

    // 3: summarize; distinct decodes stay separate as candidate summaries.
    StageRecord summ = runner.call(build_te_stage(q, Stage::summarize, context));
    const std::vector<std::string> candidates =
        distinct_candidates(summ.decodes, static_cast<size_t>(kMaxExtendedLabels));
    if (candidates.empty()) return abort_failed(std::move(summ));
    for (size_t i = 0; i < candidates.size(); i++) {
        if (i) summ.aggregate += '\n';
        summ.aggregate += candidates[i];
    }
    result.stages.push_back(std::move(summ));

    // 4: choose among candidates; skipped when only one exists.
    size_t chosen_index = 0;
    StageRecord choose;
    choose.stage = Stage::choose;
    if (candidates.size() >= 2) {
        choose = runner.call(build_choose(q, candidates));
        ExtractOptions opts;
        opts.num_labels = static_cast<int>(candidates.size());
        opts.option_texts.resize(candidates.size());
        for (size_t i = 0; i < candidates.size(); i++) opts.option_texts[i] = {candidates[i]};
        std::vector<std::optional<ExtendedLabel>> votes;
        votes.reserve(choose.decodes.size());
        for (const auto& d : choose.decodes) votes.push_back(extract_label(d, opts));
        const auto voted = majority_vote(votes);
        if (!voted) return abort_failed(std::move(choose));
        choose.chosen = *voted;
        chosen_index = static_cast<size_t>(*voted);
    } else {
        choose.chosen = ExtendedLabel::a;
    }
    choose.aggregate = candidates[chosen_index];
    result.stages.push_back(std::move(choose));

    // 5: final answer over the chosen summary.
    StageRecord final_rec = runner.call(build_final(q, candidates[chosen_index]));
    result.predicted = select_prediction(final_rec.decodes, q, cfg.self_consistency);
    result.extraction_failed = !result.predicted.has_value();
    final_rec.chosen = result.predicted ? std::optional(widen(*result.predicted)) : std::nullopt;
    result.stages.push_back(std::move(final_rec));
    return result;
}

QuestionResult run_question(const MoralQuestion& q, const MethodConfig& cfg,
                            std::span<const Exemplar> exemplars, CompletionBackend& backend,
                            const ClockMs& clock_ms) {
    cfg.validate();
    if ((cfg.shots == 5) != (exemplars.size() == 5)) {
        throw ConfigError("shots=" + std::to_string(cfg.shots) + " but " +
                          std::to_string(exemplars.size()) + " exemplars were provided");
    }

    if (cfg.method == Method::thought_experiments && cfg.shots == 0) {
        return run_te_pipeline(q, cfg, backend, clock_ms);
    }

    Prompt prompt;
    switch (cfg.method) {
        case Method::direct:
            prompt = build_direct(q, exemplars);
            break;
        case Method::cot:
            prompt = build_cot(q, exemplars);
            break;
        case Method::thought_experiments:
            prompt = build_te_fewshot(q, exemplars);
            break;
    }

    StageRunner runner(cfg, backend, clock_ms);
    StageRecord rec = runner.call(prompt);

    QuestionResult result;
    result.question_id = q.id;
    result.gold = q.gold;
    result.predicted = select_prediction(rec.decodes, q, cfg.self_consistency);
    result.extraction_failed = !result.predicted.has_value();
    rec.chosen = result.predicted ? std::optional(widen(*result.predicted)) : std::nullopt;
    result.stages.push_back(std::move(rec));
    return result;
}

std::vector<QuestionResult> run_split(std::span<const MoralQuestion> questions,
                                      const MethodConfig& cfg,
                                      std::span<const Exemplar> exemplars,
                                      CompletionBackend& backend, const RunHooks& hooks) {
    cfg.validate();
    const size_t total = questions.size();
    std::vector<std::optional<QuestionResult>> slots(total);
    std::vector<std::exception_ptr> errors(total);
    std::vector<char> done(total, 0);

    std::mutex mu;
    std::condition_variable cv;
    std::atomic<size_t> next{0};
    std::atomic<bool> abort{false};

    auto cancelled = [&] {
        return abort.load() || (hooks.cancel && hooks.cancel->load());
    };

    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= total) break;
            if (!cancelled()) {
                try {
                    slots[i] = run_question(questions[i], cfg, exemplars, backend, hooks.clock_ms);
                } catch (...) {
                    errors[i] = std::current_exception();
                    abort.store(true);
                }
            }
            {
                std::lock_guard lock(mu);
                done[i] = 1;
            }
            cv.notify_all();
        }
    };

    const size_t num_workers = std::min<size_t>(static_cast<size_t>(cfg.concurrency),
                                                std::max<size_t>(total, 1));
    std::vector<std::thread> pool;
    pool.reserve(num_workers);
    for (size_t w = 0; w < num_workers; w++) pool.emplace_back(worker);

    std::vector<QuestionResult> results;
    std::exception_ptr first_error;
    size_t delivered = 0;
    for (size_t i = 0; i < total; i++) {
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return done[i] != 0; });
        }
        if (errors[i] && !first_error) first_error = errors[i];
        if (slots[i]) {
            delivered++;
            if (hooks.on_result) hooks.on_result(*slots[i], delivered, total);
            results.push_back(std::move(*slots[i]));
        }
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

}  // namespace moralbench
