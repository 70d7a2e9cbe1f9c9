#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moralbench/core.hpp"

namespace moralbench {

class MalformedRow : public ValidationError {
  public:
    MalformedRow(size_t row_index, const std::string& what)
        : ValidationError("row " + std::to_string(row_index) + ": " + what), row_index(row_index) {}
    size_t row_index;
};

class MalformedExemplar : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

enum class SplitName : uint8_t { dev, test };

const char* split_name_str(SplitName n);

// One named dataset split, immutable once loaded.
struct Split {
    SplitName name = SplitName::test;
    std::vector<MoralQuestion> questions;
};

// Loads a headerless 6-column CSV (question, 4 choices, answer letter A-D).
// The question column is split on the literal "Scenario 1 |" / "Scenario 2 |" markers.
// Any malformed row fails the whole load.
Split load_split(const std::filesystem::path& path, SplitName name);

// Same parse, from an in-memory buffer (tests, stdin).
Split parse_split(const std::string& csv_bytes, SplitName name);

// Loads the bundled demonstration file: a JSON array of exactly 5
// {question, answer, cot, te} records. Trigger phrases are enforced.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

std::vector<Exemplar> parse_exemplars(const std::string& json_bytes);

// Raw RFC-4180 CSV reader: quoted fields, embedded commas/newlines, CRLF rows.
std::vector<std::vector<std::string>> parse_csv(const std::string& bytes);

}  // namespace moralbench
