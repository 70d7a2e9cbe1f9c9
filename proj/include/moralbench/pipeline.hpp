#pragma once

#include <atomic>
#include <functional>
#include <span>
#include <vector>

#include "moralbench/backend.hpp"
#include "moralbench/core.hpp"

namespace moralbench {

// Every decode in a set was empty or whitespace.
class AllEmpty : public Error {
  public:
    using Error::Error;
};

// Trims each decode, drops empty ones, deduplicates byte-identical decodes keeping
// first occurrence, joins with a single newline. Throws AllEmpty when nothing survives.
std::string aggregate_freeform(std::span<const std::string> decodes);

// Same filtering, but keeps the decodes as separate candidates, capped at `cap`.
std::vector<std::string> distinct_candidates(std::span<const std::string> decodes, size_t cap);

// Stage timing source; a null function records zero (used for deterministic backends).
using ClockMs = std::function<int64_t()>;

// Runs one configuration over one question and records the full transcript.
// Zero-shot thought experiments walks the five-stage pipeline; everything else is a
// single prompt. Backend errors propagate; extraction failure is recorded, not thrown.
QuestionResult run_question(const MoralQuestion& q, const MethodConfig& cfg,
                            std::span<const Exemplar> exemplars, CompletionBackend& backend,
                            const ClockMs& clock_ms = {});

// The staged zero-shot pipeline (cfg.method must be thought_experiments, shots 0).
QuestionResult run_te_pipeline(const MoralQuestion& q, const MethodConfig& cfg,
                               CompletionBackend& backend, const ClockMs& clock_ms = {});

struct RunHooks {
    // Invoked in dataset order as results become available (holes possible after cancel).
    std::function<void(const QuestionResult&, size_t completed, size_t total)> on_result;
    // Cooperative cancellation: stops dispatching new questions; in-flight ones finish.
    const std::atomic<bool>* cancel = nullptr;
    ClockMs clock_ms;
};

// Runs questions concurrently up to cfg.concurrency, collecting results in dataset
// order. The first backend error (by dataset order) is rethrown after in-flight
// work drains; results completed before it are still delivered through on_result.
std::vector<QuestionResult> run_split(std::span<const MoralQuestion> questions,
                                      const MethodConfig& cfg,
                                      std::span<const Exemplar> exemplars,
                                      CompletionBackend& backend, const RunHooks& hooks = {});

}  // namespace moralbench
