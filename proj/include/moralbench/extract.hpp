#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moralbench/core.hpp"

namespace moralbench {

// Per-label phrasings a response may echo instead of a letter (rule 4).
// For final answers these are the reworded choice plus the original option text;
// for the choose stage they are the candidate summaries themselves.
struct ExtractOptions {
    int num_labels = kNumAnswerLabels;                      // 4, or 2..5 for the choose stage
    std::vector<std::vector<std::string>> option_texts;     // may be empty (rules 1-3 only)
};

// Reworded final-choice text for a label, e.g. b -> "Scenario 1 is wrong, Scenario 2 is not wrong".
std::string reworded_choice_text(AnswerLabel l);

// Rule-4 texts for a final answer: reworded form plus the question's own option text.
ExtractOptions final_answer_options(const MoralQuestion& q);

// Parses a label out of a free-text response. Ordered cascade, first rule with a hit wins:
//   1. last parenthesized allowed letter "(x)"
//   2. last "answer is x" / "answer is (x)"
//   3. the whole response is a single allowed letter (optional trailing period)
//   4. unique case-insensitive occurrence of one label's option text
// nullopt when nothing matches, or when rule 4 is ambiguous.
std::optional<ExtendedLabel> extract_label(std::string_view text, const ExtractOptions& opts);

// Convenience form for final answers over a..d.
std::optional<AnswerLabel> extract_answer(std::string_view text, const MoralQuestion& q);

// Plurality vote. Failed extractions are dropped first; nullopt when nothing remains.
// Count ties break toward the smaller label.
template <typename Label>
std::optional<Label> majority_vote(const std::vector<std::optional<Label>>& labels) {
    int counts[kMaxExtendedLabels] = {};
    for (const auto& l : labels) {
        if (l) counts[static_cast<int>(*l)]++;
    }
    int best = -1;
    for (int i = 0; i < kMaxExtendedLabels; i++) {
        if (counts[i] > 0 && (best < 0 || counts[i] > counts[best])) best = i;
    }
    if (best < 0) return std::nullopt;
    return static_cast<Label>(best);
}

}  // namespace moralbench
