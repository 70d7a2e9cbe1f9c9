#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "moralbench/core.hpp"
#include "moralbench/eval.hpp"

namespace moralbench {

class StorageError : public Error {
  public:
    using Error::Error;
};

// A partially-read transcript line: reported, skipped, and its question re-run.
class CorruptRecord : public StorageError {
  public:
    using StorageError::StorageError;
};

// Digest of the canonical config serialization; guards against mixing methods in one run.
std::string config_digest(const MethodConfig& cfg);

// Provenance stored alongside every run.
struct RunManifest {
    std::string run_id;
    MethodConfig config;
    std::string dataset_path;
    std::string dataset_digest;  // sha256 of the split file bytes
    std::string backend_id;
    std::string exemplars_digest;  // empty for zero-shot runs
};

void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);

// One run directory: manifest.json, transcript.jsonl (one QuestionResult per line,
// append-only), report.json / report.txt. Single writer per run.
class RunStore {
  public:
    // Initializes the directory, or resumes it after checking the manifest matches.
    static RunStore create_or_resume(const std::filesystem::path& dir, const RunManifest& manifest);

    // Opens an existing run; throws StorageError when the directory was never initialized.
    static RunStore attach(const std::filesystem::path& dir);

    const RunManifest& manifest() const { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }

    // Appends one self-contained record and flushes before returning.
    void write_transcript(const QuestionResult& result);

    struct TranscriptScan {
        std::vector<QuestionResult> results;       // latest record per question id, file order
        std::vector<size_t> corrupt_offsets;       // byte offsets of unreadable lines
    };
    TranscriptScan read_transcripts() const;

    // Ids with a complete transcript record; a rerun processes only the complement.
    std::set<std::string> resume_set() const;

    void write_report(const EvalReport& report, const std::string& table_text) const;

  private:
    RunStore(std::filesystem::path dir, RunManifest manifest);

    std::filesystem::path dir_;
    RunManifest manifest_;
    std::ofstream transcript_;
};

}  // namespace moralbench
