#include "moralbench/eval.hpp"

#include <cstdio>

namespace moralbench {

EvalReport score(std::span<const QuestionResult> results, std::string method_name) {
    if (results.empty()) throw EmptyResults("cannot score an empty result set");
    EvalReport report;
    report.method_name = std::move(method_name);
    report.total = results.size();
    for (const auto& r : results) {
        const int gold = static_cast<int>(r.gold);
        if (r.predicted) {
            report.confusion[static_cast<size_t>(gold)][static_cast<size_t>(*r.predicted)]++;
            if (*r.predicted == r.gold) report.correct++;
        } else {
            report.confusion[static_cast<size_t>(gold)][kNumAnswerLabels]++;
            report.extraction_failures++;
        }
        report.per_question.push_back({r.question_id, r.gold, r.predicted, r.correct()});
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", fraction * 100.0);
    return buf;
}

std::string method_display_name(const MethodConfig& cfg) {
    std::string name = cfg.shots == 5 ? "5-shot" : "Zero-shot";
    switch (cfg.method) {
        case Method::direct:
            break;
        case Method::cot:
            name += " CoT";
            break;
        case Method::thought_experiments:
            name += " Thought Experiments";
            break;
    }
    if (cfg.self_consistency) name += " + self-consistency";
    return name;
}

std::string compare_table(std::span<const CompareRow> rows) {
    size_t width = std::string("Method").size();
    for (const auto& row : rows) width = std::max(width, row.method.size());

    std::string out;
    out += "Method";
    out.append(width - 6 + 2, ' ');
    out += "Accuracy\n";
    out.append(width + 10, '-');
    out += '\n';
    for (const auto& row : rows) {
        out += row.method;
        out.append(width - row.method.size() + 2, ' ');
        out += row.accuracy ? format_percent(*row.accuracy) : "FAILED";
        out += '\n';
    }
    return out;
}

json compare_json(std::span<const CompareRow> rows) {
    json arr = json::array();
    for (const auto& row : rows) {
        arr.push_back({{"method", row.method},
                       {"accuracy", row.accuracy ? json(*row.accuracy) : json(nullptr)},
                       {"accuracy_percent",
                        row.accuracy ? json(format_percent(*row.accuracy)) : json(nullptr)}});
    }
    return arr;
}

std::string compare(std::span<const EvalReport> reports) {
    std::vector<CompareRow> rows;
    rows.reserve(reports.size());
    for (const auto& r : reports) rows.push_back({r.method_name, r.accuracy});
    return compare_table(rows);
}

void to_json(json& j, const EvalReport& r) {
    json per = json::array();
    for (const auto& p : r.per_question) {
        per.push_back({{"id", p.id},
                       {"gold", p.gold},
                       {"predicted", p.predicted ? json(*p.predicted) : json(nullptr)},
                       {"correct", p.correct}});
    }
    j = json{{"method", r.method_name},
             {"total", r.total},
             {"correct", r.correct},
             {"accuracy", r.accuracy},
             {"extraction_failures", r.extraction_failures},
             {"confusion", r.confusion},
             {"per_question", per}};
}

}  // namespace moralbench
