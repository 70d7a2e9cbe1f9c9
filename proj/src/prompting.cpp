#include "moralbench/prompting.hpp"

#include "moralbench/extract.hpp"

namespace moralbench {

static const char* kPoseInstruction =
    "For each scenario, pose as many detailed moral counterfactual questions as you can.";
static const char* kAnswerCfInstruction =
    "For each scenario, answer the questions as detailed as you can. Discuss moral implications "
    "of each question. Highlight when there is a moral conflict.";
static const char* kSummarizeInstruction =
    "Consider all the counterfactuals, for each scenario, summarize if I did something morally "
    "wrong and why.";
static const char* kChooseInstruction =
    "Which one of the explanations summarizes each scenario the best?";
static const char* kFinalInstruction = "For each scenario, did I do something morally wrong?";

std::string render_question(const MoralQuestion& q, bool include_choices) {
    std::string text = q.header;
    text += " Scenario 1 | ";
    text += q.scenario1;
    text += " Scenario 2 | ";
    text += q.scenario2;
    if (include_choices) {
        text += " Answer Choices:";
        for (int i = 0; i < kNumAnswerLabels; i++) {
            text += " (";
            text += static_cast<char>('a' + i);
            text += ") ";
            text += q.choices[static_cast<size_t>(i)];
        }
    }
    return text;
}

static void require_shot_count(std::span<const Exemplar> exemplars) {
    if (!exemplars.empty() && exemplars.size() != 5) {
        throw BadShotCount("expected 0 or 5 exemplars, got " + std::to_string(exemplars.size()));
    }
}

static std::string question_block(const MoralQuestion& q) {
    return "Q: " + render_question(q, true) + "\nA:";
}

Prompt build_direct(const MoralQuestion& q, std::span<const Exemplar> exemplars) {
    require_shot_count(exemplars);
    std::string text;
    for (const Exemplar& ex : exemplars) {
        text += question_block(ex.question);
        text += " (";
        text += label_char(ex.question.gold);
        text += ")\n\n";
    }
    text += question_block(q);
    return {std::move(text), Stage::single, q.id};
}

static Prompt build_with_reasoning(const MoralQuestion& q, std::span<const Exemplar> exemplars,
                                   bool use_te, const char* final_cue) {
    require_shot_count(exemplars);
    std::string text;
    for (const Exemplar& ex : exemplars) {
        text += question_block(ex.question);
        text += ' ';
        text += use_te ? ex.te_text : ex.cot_text;
        text += " So the answer is (";
        text += label_char(ex.question.gold);
        text += ").\n\n";
    }
    text += question_block(q);
    text += ' ';
    text += final_cue;
    return {std::move(text), Stage::single, q.id};
}

Prompt build_cot(const MoralQuestion& q, std::span<const Exemplar> exemplars) {
    return build_with_reasoning(q, exemplars, /*use_te=*/false, kCotTrigger);
}

Prompt build_te_fewshot(const MoralQuestion& q, std::span<const Exemplar> exemplars) {
    if (exemplars.size() != 5) {
        throw BadShotCount("few-shot thought experiments requires exactly 5 exemplars, got " +
                           std::to_string(exemplars.size()));
    }
    return build_with_reasoning(q, exemplars, /*use_te=*/true, kTeTrigger);
}

Prompt build_te_stage(const MoralQuestion& q, Stage stage, const std::string& prior_context) {
    switch (stage) {
        case Stage::pose:
            return {render_question(q, false) + " " + kPoseInstruction, Stage::pose, q.id};
        case Stage::answer_cf:
        case Stage::summarize: {
            if (prior_context.empty()) {
                throw EmptyContext(std::string(stage_name(stage)) +
                                   " stage requires the accumulated context");
            }
            const char* instruction =
                stage == Stage::answer_cf ? kAnswerCfInstruction : kSummarizeInstruction;
            return {prior_context + " " + instruction, stage, q.id};
        }
        default:
            throw Error(std::string("not a cumulative pipeline stage: ") + stage_name(stage));
    }
}

Prompt build_choose(const MoralQuestion& q, std::span<const std::string> summaries) {
    if (summaries.size() < 2) {
        throw TooFewSummaries("choose stage needs at least 2 summaries, got " +
                              std::to_string(summaries.size()));
    }
    if (summaries.size() > static_cast<size_t>(kMaxExtendedLabels)) {
        throw Error("choose stage supports at most 5 summaries, got " +
                    std::to_string(summaries.size()));
    }
    std::string text = render_question(q, false);
    text += ' ';
    text += kChooseInstruction;
    for (size_t i = 0; i < summaries.size(); i++) {
        if (summaries[i].empty()) throw EmptySummary("summary " + std::to_string(i) + " is empty");
        text += " (";
        text += static_cast<char>('a' + i);
        text += ") ";
        text += summaries[i];
    }
    return {std::move(text), Stage::choose, q.id};
}

Prompt build_final(const MoralQuestion& q, const std::string& chosen_summary) {
    if (chosen_summary.empty()) throw EmptySummary("final stage requires a chosen summary");
    std::string text = kFinalInstruction;
    text += ' ';
    text += chosen_summary;
    text += "\nAnswer Choices:";
    for (int i = 0; i < kNumAnswerLabels; i++) {
        text += " (";
        text += static_cast<char>('a' + i);
        text += ") ";
        text += reworded_choice_text(static_cast<AnswerLabel>(i));
    }
    return {std::move(text), Stage::final_answer, q.id};
}

}  // namespace moralbench
