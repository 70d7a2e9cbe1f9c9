#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moralbench/core.hpp"

namespace moralbench {

class EmptyResults : public Error {
  public:
    using Error::Error;
};

// Scoreboard for one method over one split. Extraction failures count as incorrect.
struct EvalReport {
    struct PerQuestion {
        std::string id;
        AnswerLabel gold = AnswerLabel::a;
        std::optional<AnswerLabel> predicted;
        bool correct = false;
    };

    std::string method_name;
    size_t total = 0;
    size_t correct = 0;
    size_t extraction_failures = 0;
    double accuracy = 0.0;
    // gold (a..d) x predicted (a..d, plus a trailing failure column).
    std::array<std::array<size_t, kNumAnswerLabels + 1>, kNumAnswerLabels> confusion{};
    std::vector<PerQuestion> per_question;
};

EvalReport score(std::span<const QuestionResult> results, std::string method_name);

// "66.26%" style, two decimals, as in the comparison tables.
std::string format_percent(double fraction);

// Table name for a configuration, e.g. "Zero-shot CoT + self-consistency".
std::string method_display_name(const MethodConfig& cfg);

// A comparison row: accuracy absent means the method failed to run.
struct CompareRow {
    std::string method;
    std::optional<double> accuracy;
};

std::string compare_table(std::span<const CompareRow> rows);
json compare_json(std::span<const CompareRow> rows);

// Convenience over finished reports, in the given order.
std::string compare(std::span<const EvalReport> reports);

void to_json(json& j, const EvalReport& r);

}  // namespace moralbench
