#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace moralbench {

using json = nlohmann::json;

// Base for all recoverable errors raised by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad run configuration (flags, shot counts, decode settings). Exit code 1 territory.
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Input data failed validation. Exit code 2 territory.
class ValidationError : public Error {
  public:
    using Error::Error;
};

// One of the four answer options of a question.
enum class AnswerLabel : uint8_t { a = 0, b = 1, c = 2, d = 3 };

// Answer options extended with (e), as offered by the choose stage. Never a final prediction.
enum class ExtendedLabel : uint8_t { a = 0, b = 1, c = 2, d = 3, e = 4 };

constexpr int kNumAnswerLabels = 4;
constexpr int kMaxExtendedLabels = 5;

constexpr char label_char(AnswerLabel l) { return static_cast<char>('a' + static_cast<int>(l)); }
constexpr char label_char(ExtendedLabel l) { return static_cast<char>('a' + static_cast<int>(l)); }

std::optional<AnswerLabel> answer_label_from_char(char c);
std::optional<ExtendedLabel> extended_label_from_char(char c);

constexpr ExtendedLabel widen(AnswerLabel l) { return static_cast<ExtendedLabel>(l); }

// Maps back into a..d; nullopt for e.
std::optional<AnswerLabel> narrow(ExtendedLabel l);

// Total order a < b < c < d < e, used wherever ties must break deterministically.
constexpr std::strong_ordering label_order(ExtendedLabel x, ExtendedLabel y) {
    return static_cast<int>(x) <=> static_cast<int>(y);
}
constexpr std::strong_ordering label_order(AnswerLabel x, AnswerLabel y) {
    return static_cast<int>(x) <=> static_cast<int>(y);
}

// One two-scenario question with its four labeled options.
struct MoralQuestion {
    std::string id;         // "{split}-{rowIndex}"
    std::string header;     // the "For which of these two scenarios..." preamble
    std::string scenario1;
    std::string scenario2;
    std::array<std::string, kNumAnswerLabels> choices;
    AnswerLabel gold = AnswerLabel::a;

    // Throws ValidationError when a field invariant is broken.
    void validate() const;

    bool operator==(const MoralQuestion&) const = default;
};

// A dev question paired with hand-written reasoning demonstrations.
struct Exemplar {
    MoralQuestion question;
    std::string cot_text;   // begins "Let's think step by step."
    std::string te_text;    // begins "Let's do a thought experiment."

    void validate() const;

    bool operator==(const Exemplar&) const = default;
};

inline constexpr const char* kCotTrigger = "Let's think step by step.";
inline constexpr const char* kTeTrigger = "Let's do a thought experiment.";

enum class Method : uint8_t { direct, cot, thought_experiments };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

// Full description of one evaluated configuration.
struct MethodConfig {
    Method method = Method::direct;
    int shots = 0;                    // 0 or 5
    bool self_consistency = false;
    int num_decodes = 5;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::optional<int64_t> seed;
    int concurrency = 4;

    void validate() const;            // throws ConfigError

    bool operator==(const MethodConfig&) const = default;
};

enum class Stage : uint8_t { single, pose, answer_cf, summarize, choose, final_answer };

const char* stage_name(Stage s);
std::optional<Stage> stage_from_name(const std::string& name);

// Everything that happened at one pipeline stage, exactly as sent/received.
struct StageRecord {
    Stage stage = Stage::single;
    std::string prompt;                      // byte-identical to what was sent ("" if stage skipped)
    std::vector<std::string> decodes;
    std::string aggregate;                   // text fed forward; "" for single/final
    std::optional<ExtendedLabel> chosen;
    int64_t timing_ms = 0;
    std::optional<int64_t> prompt_tokens;
    std::optional<int64_t> output_tokens;

    bool operator==(const StageRecord&) const = default;
};

// Outcome of running one question under one configuration.
struct QuestionResult {
    std::string question_id;
    AnswerLabel gold = AnswerLabel::a;
    std::optional<AnswerLabel> predicted;    // absent iff extraction_failed
    bool extraction_failed = false;
    std::vector<StageRecord> stages;

    bool correct() const { return predicted.has_value() && *predicted == gold; }

    bool operator==(const QuestionResult&) const = default;
};

// JSON round-trip for all core types (transcripts, manifests, fixtures).
void to_json(json& j, const AnswerLabel& l);
void from_json(const json& j, AnswerLabel& l);
void to_json(json& j, const ExtendedLabel& l);
void from_json(const json& j, ExtendedLabel& l);
void to_json(json& j, const MoralQuestion& q);
void from_json(const json& j, MoralQuestion& q);
void to_json(json& j, const Exemplar& e);
void from_json(const json& j, Exemplar& e);
void to_json(json& j, const MethodConfig& c);
void from_json(const json& j, MethodConfig& c);
void to_json(json& j, const StageRecord& r);
void from_json(const json& j, StageRecord& r);
void to_json(json& j, const QuestionResult& r);
void from_json(const json& j, QuestionResult& r);

}  // namespace moralbench
