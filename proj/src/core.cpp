#include "moralbench/core.hpp"

namespace moralbench {

std::optional<AnswerLabel> answer_label_from_char(char c) {
    if (c >= 'a' && c <= 'd') return static_cast<AnswerLabel>(c - 'a');
    if (c >= 'A' && c <= 'D') return static_cast<AnswerLabel>(c - 'A');
    return std::nullopt;
}

std::optional<ExtendedLabel> extended_label_from_char(char c) {
    if (c >= 'a' && c <= 'e') return static_cast<ExtendedLabel>(c - 'a');
    if (c >= 'A' && c <= 'E') return static_cast<ExtendedLabel>(c - 'A');
    return std::nullopt;
}

std::optional<AnswerLabel> narrow(ExtendedLabel l) {
    if (l == ExtendedLabel::e) return std::nullopt;
    return static_cast<AnswerLabel>(static_cast<uint8_t>(l));
}

void MoralQuestion::validate() const {
    if (id.empty()) throw ValidationError("question has empty id");
    if (scenario1.empty()) throw ValidationError(id + ": scenario1 is empty");
    if (scenario2.empty()) throw ValidationError(id + ": scenario2 is empty");
    for (size_t i = 0; i < choices.size(); i++) {
        if (choices[i].empty()) {
            throw ValidationError(id + ": choice (" + std::string(1, static_cast<char>('a' + i)) +
                                  ") is empty");
        }
    }
}

static bool starts_with(const std::string& text, const char* prefix) {
    return text.rfind(prefix, 0) == 0;
}

void Exemplar::validate() const {
    question.validate();
    if (cot_text.empty() || !starts_with(cot_text, kCotTrigger)) {
        throw ValidationError(question.id + ": cot text does not begin with \"" +
                              std::string(kCotTrigger) + "\"");
    }
    if (te_text.empty() || !starts_with(te_text, kTeTrigger)) {
        throw ValidationError(question.id + ": te text does not begin with \"" +
                              std::string(kTeTrigger) + "\"");
    }
}

const char* method_name(Method m) {
    switch (m) {
        case Method::direct: return "direct";
        case Method::cot: return "cot";
        case Method::thought_experiments: return "thought_experiments";
    }
    return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "direct") return Method::direct;
    if (name == "cot") return Method::cot;
    if (name == "thought_experiments") return Method::thought_experiments;
    return std::nullopt;
}

void MethodConfig::validate() const {
    if (shots != 0 && shots != 5) throw ConfigError("shots must be 0 or 5");
    if (num_decodes < 1) throw ConfigError("num_decodes must be >= 1");
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::single: return "single";
        case Stage::pose: return "pose";
        case Stage::answer_cf: return "answer_cf";
        case Stage::summarize: return "summarize";
        case Stage::choose: return "choose";
        case Stage::final_answer: return "final";
    }
    return "?";
}

std::optional<Stage> stage_from_name(const std::string& name) {
    if (name == "single") return Stage::single;
    if (name == "pose") return Stage::pose;
    if (name == "answer_cf") return Stage::answer_cf;
    if (name == "summarize") return Stage::summarize;
    if (name == "choose") return Stage::choose;
    if (name == "final") return Stage::final_answer;
    return std::nullopt;
}

void to_json(json& j, const AnswerLabel& l) { j = std::string(1, label_char(l)); }

void from_json(const json& j, AnswerLabel& l) {
    const auto s = j.get<std::string>();
    if (s.size() != 1) throw ValidationError("bad answer label: \"" + s + "\"");
    auto parsed = answer_label_from_char(s[0]);
    if (!parsed) throw ValidationError("bad answer label: \"" + s + "\"");
    l = *parsed;
}

void to_json(json& j, const ExtendedLabel& l) { j = std::string(1, label_char(l)); }

void from_json(const json& j, ExtendedLabel& l) {
    const auto s = j.get<std::string>();
    if (s.size() != 1) throw ValidationError("bad extended label: \"" + s + "\"");
    auto parsed = extended_label_from_char(s[0]);
    if (!parsed) throw ValidationError("bad extended label: \"" + s + "\"");
    l = *parsed;
}

void to_json(json& j, const MoralQuestion& q) {
    j = json{{"id", q.id},
             {"header", q.header},
             {"scenario1", q.scenario1},
             {"scenario2", q.scenario2},
             {"choices", q.choices},
             {"gold", q.gold}};
}

void from_json(const json& j, MoralQuestion& q) {
    j.at("id").get_to(q.id);
    j.at("header").get_to(q.header);
    j.at("scenario1").get_to(q.scenario1);
    j.at("scenario2").get_to(q.scenario2);
    j.at("choices").get_to(q.choices);
    j.at("gold").get_to(q.gold);
}

void to_json(json& j, const Exemplar& e) {
    j = json{{"question", e.question}, {"cot", e.cot_text}, {"te", e.te_text}};
}

void from_json(const json& j, Exemplar& e) {
    j.at("question").get_to(e.question);
    j.at("cot").get_to(e.cot_text);
    j.at("te").get_to(e.te_text);
}

void to_json(json& j, const MethodConfig& c) {
    j = json{{"method", method_name(c.method)},
             {"shots", c.shots},
             {"self_consistency", c.self_consistency},
             {"num_decodes", c.num_decodes},
             {"temperature", c.temperature},
             {"max_output_tokens", c.max_output_tokens},
             {"seed", c.seed ? json(*c.seed) : json(nullptr)},
             {"concurrency", c.concurrency}};
}

void from_json(const json& j, MethodConfig& c) {
    auto m = method_from_name(j.at("method").get<std::string>());
    if (!m) throw ConfigError("unknown method: " + j.at("method").get<std::string>());
    c.method = *m;
    j.at("shots").get_to(c.shots);
    j.at("self_consistency").get_to(c.self_consistency);
    j.at("num_decodes").get_to(c.num_decodes);
    j.at("temperature").get_to(c.temperature);
    j.at("max_output_tokens").get_to(c.max_output_tokens);
    c.seed = j.at("seed").is_null() ? std::nullopt : std::optional<int64_t>(j.at("seed").get<int64_t>());
    j.at("concurrency").get_to(c.concurrency);
}

void to_json(json& j, const StageRecord& r) {
    j = json{{"stage", stage_name(r.stage)},
             {"prompt", r.prompt},
             {"decodes", r.decodes},
             {"aggregate", r.aggregate},
             {"chosen", r.chosen ? json(*r.chosen) : json(nullptr)},
             {"timing_ms", r.timing_ms},
             {"prompt_tokens", r.prompt_tokens ? json(*r.prompt_tokens) : json(nullptr)},
             {"output_tokens", r.output_tokens ? json(*r.output_tokens) : json(nullptr)}};
}

void from_json(const json& j, StageRecord& r) {
    auto s = stage_from_name(j.at("stage").get<std::string>());
    if (!s) throw ValidationError("unknown stage: " + j.at("stage").get<std::string>());
    r.stage = *s;
    j.at("prompt").get_to(r.prompt);
    j.at("decodes").get_to(r.decodes);
    j.at("aggregate").get_to(r.aggregate);
    r.chosen = j.at("chosen").is_null() ? std::nullopt
                                        : std::optional<ExtendedLabel>(j.at("chosen").get<ExtendedLabel>());
    j.at("timing_ms").get_to(r.timing_ms);
    r.prompt_tokens = j.at("prompt_tokens").is_null()
                          ? std::nullopt
                          : std::optional<int64_t>(j.at("prompt_tokens").get<int64_t>());
    r.output_tokens = j.at("output_tokens").is_null()
                          ? std::nullopt
                          : std::optional<int64_t>(j.at("output_tokens").get<int64_t>());
}

void to_json(json& j, const QuestionResult& r) {
    j = json{{"question_id", r.question_id},
             {"gold", r.gold},
             {"predicted", r.predicted ? json(*r.predicted) : json(nullptr)},
             {"extraction_failed", r.extraction_failed},
             {"stages", r.stages}};
}

void from_json(const json& j, QuestionResult& r) {
    j.at("question_id").get_to(r.question_id);
    j.at("gold").get_to(r.gold);
    r.predicted = j.at("predicted").is_null()
                      ? std::nullopt
                      : std::optional<AnswerLabel>(j.at("predicted").get<AnswerLabel>());
    j.at("extraction_failed").get_to(r.extraction_failed);
    j.at("stages").get_to(r.stages);
}

}  // namespace moralbench
