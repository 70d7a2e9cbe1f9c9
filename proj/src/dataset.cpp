#include "moralbench/dataset.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace moralbench {

const char* split_name_str(SplitName n) { return n == SplitName::dev ? "dev" : "test"; }

std::vector<std::vector<std::string>> parse_csv(const std::string& bytes) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (size_t i = 0; i < bytes.size(); i++) {
        const char c = bytes[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
                    field += '"';
                    i++;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field_started && field.empty()) {
                    in_quotes = true;
                    field_started = true;
                } else {
                    field += c;  // stray quote mid-field, keep verbatim
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < bytes.size() && bytes[i + 1] == '\n') i++;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw ValidationError("csv ends inside a quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

static std::string trim(const std::string& s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) b++;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) e--;
    return s.substr(b, e - b);
}

// Splits a raw question column into header and the two scenario texts.
static void split_scenarios(const std::string& question, std::string& header, std::string& s1,
                            std::string& s2) {
    static const std::string m1 = "Scenario 1 |";
    static const std::string m2 = "Scenario 2 |";
    const size_t p1 = question.find(m1);
    if (p1 == std::string::npos) throw ValidationError("missing \"" + m1 + "\" marker");
    const size_t p2 = question.find(m2, p1 + m1.size());
    if (p2 == std::string::npos) throw ValidationError("missing \"" + m2 + "\" marker");
    header = trim(question.substr(0, p1));
    s1 = trim(question.substr(p1 + m1.size(), p2 - p1 - m1.size()));
    s2 = trim(question.substr(p2 + m2.size()));
}

static MoralQuestion question_from_row(const std::vector<std::string>& row, SplitName split,
                                       size_t index) {
    if (row.size() != 6) {
        throw MalformedRow(index, "expected 6 columns, got " + std::to_string(row.size()));
    }
    MoralQuestion q;
    q.id = std::string(split_name_str(split)) + "-" + std::to_string(index);
    try {
        split_scenarios(row[0], q.header, q.scenario1, q.scenario2);
    } catch (const ValidationError& e) {
        throw MalformedRow(index, e.what());
    }
    for (int i = 0; i < kNumAnswerLabels; i++) q.choices[static_cast<size_t>(i)] = row[static_cast<size_t>(i) + 1];
    const std::string answer = trim(row[5]);
    if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'D') {
        throw MalformedRow(index, "unknown answer letter \"" + row[5] + "\"");
    }
    q.gold = *answer_label_from_char(answer[0]);
    try {
        q.validate();
    } catch (const ValidationError& e) {
        throw MalformedRow(index, e.what());
    }
    return q;
}

Split parse_split(const std::string& csv_bytes, SplitName name) {
    Split split;
    split.name = name;
    const auto rows = parse_csv(csv_bytes);
    split.questions.reserve(rows.size());
    size_t index = 0;
    for (const auto& row : rows) {
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        split.questions.push_back(question_from_row(row, name, index));
        index++;
    }
    return split;
}

static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Split load_split(const std::filesystem::path& path, SplitName name) {
    return parse_split(read_file(path), name);
}

// Splits a full question text (with "Answer Choices:") into its parts.
static MoralQuestion parse_exemplar_question(const std::string& text, size_t index) {
    static const std::string marker = "Answer Choices:";
    const size_t choices_at = text.find(marker);
    if (choices_at == std::string::npos) {
        throw MalformedExemplar("exemplar " + std::to_string(index) + ": missing \"" + marker + "\"");
    }
    MoralQuestion q;
    q.id = "dev-" + std::to_string(index);
    split_scenarios(text.substr(0, choices_at), q.header, q.scenario1, q.scenario2);

    const std::string options = text.substr(choices_at + marker.size());
    size_t positions[kNumAnswerLabels + 1];
    size_t search_from = 0;
    for (int i = 0; i < kNumAnswerLabels; i++) {
        const std::string tag = std::string("(") + static_cast<char>('a' + i) + ")";
        const size_t at = options.find(tag, search_from);
        if (at == std::string::npos) {
            throw MalformedExemplar("exemplar " + std::to_string(index) + ": missing option " + tag);
        }
        positions[i] = at;
        search_from = at + tag.size();
    }
    positions[kNumAnswerLabels] = options.size();
    for (int i = 0; i < kNumAnswerLabels; i++) {
        const size_t begin = positions[i] + 3;  // past "(x)"
        q.choices[static_cast<size_t>(i)] = trim(options.substr(begin, positions[i + 1] - begin));
    }
    return q;
}

std::vector<Exemplar> parse_exemplars(const std::string& json_bytes) {
    json doc;
    try {
        doc = json::parse(json_bytes);
    } catch (const json::exception& e) {
        throw MalformedExemplar(std::string("exemplar file is not valid json: ") + e.what());
    }
    if (!doc.is_array() || doc.size() != 5) {
        throw MalformedExemplar("expected exactly 5 exemplar records, got " +
                                std::to_string(doc.is_array() ? doc.size() : 0));
    }
    std::vector<Exemplar> exemplars;
    exemplars.reserve(doc.size());
    for (size_t i = 0; i < doc.size(); i++) {
        const json& rec = doc[i];
        Exemplar ex;
        ex.question = parse_exemplar_question(rec.at("question").get<std::string>(), i);
        const std::string answer = rec.at("answer").get<std::string>();
        auto gold = answer.size() == 1 ? answer_label_from_char(answer[0]) : std::nullopt;
        if (!gold) {
            throw MalformedExemplar("exemplar " + std::to_string(i) + ": bad answer \"" + answer + "\"");
        }
        ex.question.gold = *gold;
        ex.cot_text = rec.at("cot").get<std::string>();
        ex.te_text = rec.at("te").get<std::string>();
        try {
            ex.validate();
        } catch (const ValidationError& e) {
            throw MalformedExemplar(e.what());
        }
        exemplars.push_back(std::move(ex));
    }
    return exemplars;
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
    return parse_exemplars(read_file(path));
}

}  // namespace moralbench
