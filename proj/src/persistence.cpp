#include "moralbench/persistence.hpp"

#include <unordered_map>

#include "moralbench/util.hpp"

namespace moralbench {

std::string config_digest(const MethodConfig& cfg) {
    return sha256_hex(json(cfg).dump());
}

void to_json(json& j, const RunManifest& m) {
    j = json{{"run_id", m.run_id},
             {"config", m.config},
             {"config_digest", config_digest(m.config)},
             {"dataset_path", m.dataset_path},
             {"dataset_digest", m.dataset_digest},
             {"backend_id", m.backend_id},
             {"exemplars_digest", m.exemplars_digest}};
}

void from_json(const json& j, RunManifest& m) {
    j.at("run_id").get_to(m.run_id);
    j.at("config").get_to(m.config);
    j.at("dataset_path").get_to(m.dataset_path);
    j.at("dataset_digest").get_to(m.dataset_digest);
    j.at("backend_id").get_to(m.backend_id);
    j.at("exemplars_digest").get_to(m.exemplars_digest);
}

RunStore::RunStore(std::filesystem::path dir, RunManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    transcript_.open(dir_ / "transcript.jsonl", std::ios::app | std::ios::binary);
    if (!transcript_) throw StorageError("cannot open transcript log in " + dir_.string());
}

RunStore RunStore::create_or_resume(const std::filesystem::path& dir, const RunManifest& manifest) {
    std::filesystem::create_directories(dir);
    const auto manifest_path = dir / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        RunManifest existing = json::parse(read_file_bytes(manifest_path)).get<RunManifest>();
        if (config_digest(existing.config) != config_digest(manifest.config)) {
            throw ConfigError("run directory " + dir.string() +
                              " was created with a different method configuration; refusing to mix "
                              "transcripts (use a fresh --out directory)");
        }
        if (existing.dataset_digest != manifest.dataset_digest) {
            throw ConfigError("run directory " + dir.string() +
                              " was created from a different dataset file; refusing to resume");
        }
        if (existing.backend_id != manifest.backend_id) {
            throw ConfigError("run directory " + dir.string() + " used backend \"" +
                              existing.backend_id + "\", current is \"" + manifest.backend_id +
                              "\"; refusing to resume");
        }
        return RunStore(dir, existing);
    }
    write_file_atomic(manifest_path, json(manifest).dump(2) + "\n");
    return RunStore(dir, manifest);
}

RunStore RunStore::attach(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw StorageError("run directory " + dir.string() + " is not initialized (no manifest)");
    }
    RunManifest manifest = json::parse(read_file_bytes(manifest_path)).get<RunManifest>();
    return RunStore(dir, manifest);
}

void RunStore::write_transcript(const QuestionResult& result) {
    json record = result;
    record["config_digest"] = config_digest(manifest_.config);
    transcript_ << record.dump() << '\n';
    transcript_.flush();
    if (!transcript_) throw StorageError("transcript write failed in " + dir_.string());
}

RunStore::TranscriptScan RunStore::read_transcripts() const {
    TranscriptScan scan;
    const auto path = dir_ / "transcript.jsonl";
    if (!std::filesystem::exists(path)) return scan;
    const std::string bytes = read_file_bytes(path);
    const std::string expected_digest = config_digest(manifest_.config);

    std::unordered_map<std::string, size_t> by_id;  // id -> index in scan.results
    size_t offset = 0;
    while (offset < bytes.size()) {
        size_t end = bytes.find('\n', offset);
        const bool terminated = end != std::string::npos;
        if (!terminated) end = bytes.size();
        const std::string line = bytes.substr(offset, end - offset);
        const size_t line_offset = offset;
        offset = terminated ? end + 1 : bytes.size();
        if (line.empty()) continue;
        try {
            // A record is complete only if its line was newline-terminated.
            if (!terminated) throw CorruptRecord("truncated final record");
            const json doc = json::parse(line);
            if (doc.at("config_digest").get<std::string>() != expected_digest) {
                throw CorruptRecord("config digest mismatch");
            }
            QuestionResult result = doc.get<QuestionResult>();
            auto it = by_id.find(result.question_id);
            if (it != by_id.end()) {
                scan.results[it->second] = std::move(result);  // latest record wins
            } else {
                by_id.emplace(result.question_id, scan.results.size());
                scan.results.push_back(std::move(result));
            }
        } catch (const std::exception&) {
            scan.corrupt_offsets.push_back(line_offset);
        }
    }
    return scan;
}

std::set<std::string> RunStore::resume_set() const {
    std::set<std::string> ids;
    for (const auto& r : read_transcripts().results) ids.insert(r.question_id);
    return ids;
}

void RunStore::write_report(const EvalReport& report, const std::string& table_text) const {
    write_file_atomic(dir_ / "report.json", json(report).dump(2) + "\n");
    write_file_atomic(dir_ / "report.txt", table_text);
}

}  // namespace moralbench
