#pragma once

#include <span>
#include <string>
#include <vector>

#include "moralbench/core.hpp"

namespace moralbench {

class BadShotCount : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

class EmptyContext : public Error {
  public:
    using Error::Error;
};

class TooFewSummaries : public Error {
  public:
    using Error::Error;
};

class EmptySummary : public Error {
  public:
    using Error::Error;
};

// A prompt string tagged with where it belongs in a transcript.
struct Prompt {
    std::string text;
    Stage stage = Stage::single;
    std::string question_id;
};

// Single-paragraph question rendering:
//   header + " Scenario 1 | " + scenario1 + " Scenario 2 | " + scenario2
// plus, when requested, " Answer Choices: (a) ... (b) ... (c) ... (d) ...".
std::string render_question(const MoralQuestion& q, bool include_choices);

// "Q: {question} A:" prompt, optionally preceded by 5 demonstration blocks.
Prompt build_direct(const MoralQuestion& q, std::span<const Exemplar> exemplars = {});

// Direct prompt with the step-by-step cue; few-shot blocks carry the written reasoning.
Prompt build_cot(const MoralQuestion& q, std::span<const Exemplar> exemplars = {});

// Single-prompt few-shot form of thought experiments (no staged pipeline).
Prompt build_te_fewshot(const MoralQuestion& q, std::span<const Exemplar> exemplars);

// One of the cumulative pipeline stages. prior_context must be empty for pose and
// non-empty (previous prompt + " " + its aggregated response) afterwards.
Prompt build_te_stage(const MoralQuestion& q, Stage stage, const std::string& prior_context);

// Multiple-choice prompt over 2..5 candidate summaries, lettered (a).. in given order.
Prompt build_choose(const MoralQuestion& q, std::span<const std::string> summaries);

// Final prompt: chosen summary plus the reworded answer choices.
Prompt build_final(const MoralQuestion& q, const std::string& chosen_summary);

}  // namespace moralbench
