#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <json.hpp>

#include "perfguard/pasm.hpp"
#include "perfguard/rng.hpp"

namespace perfguard {

/// Exploration-exploitation update settings: keep the top_m best-scored tools,
/// explore random_n extra tools, step the matrix by eta along the rank
/// disagreement. Defaults follow the reference operating point (m=2, n=1,
/// eta=0.13).
struct UpdateConfig {
    int top_m = 2;
    int random_n = 1;
    double eta = 0.13;
    std::uint64_t rng_seed = 0;
    /// When true, raw scores are destructively re-normalized after every
    /// update instead of lazily on read.
    bool renormalize_raw = false;

    void validate() const; // throws InvalidSpec
};

struct CandidateSet {
    std::vector<ToolId> exploit; // top-scored, best first
    std::vector<ToolId> explore; // random draws from the remainder

    std::vector<ToolId> all() const;
    std::size_t size() const { return exploit.size() + explore.size(); }
};

/// Per-candidate update direction. Values are (theory_rank - actual_rank) / c
/// with c = candidate count and rank 1 = best, so a tool that executed better
/// than predicted gets a positive coefficient and its scores grow.
struct DirectionCoefficient {
    std::vector<std::pair<ToolId, double>> per_tool; // theory-ranking order

    double of(const ToolId& id) const;
    double sum() const;
};

/// Top-m tools by score plus n uniform draws (without replacement) from the
/// rest. Sizes clamp when the registry is small. Deterministic given the rng
/// state.
CandidateSet select_candidates(const SuitabilityScores& scores, const UpdateConfig& cfg,
                               SeededRng& rng);

/// Ranking of the candidate set predicted from current suitability scores.
Ranking theory_ranking(const SuitabilityScores& scores, const CandidateSet& candidates);

/// Rank disagreement between prediction and observation. Both rankings must
/// cover exactly the same tool set; throws RankingMismatch otherwise.
DirectionCoefficient direction(const Ranking& theory, const Ranking& actual);

/// Outer-product update on candidate columns only:
///   raw'[i][j] = max(0, raw[i][j] + w[i] * eta * delta[j]).
/// Non-candidate columns are untouched; zero deltas leave entries
/// bit-identical.
PerformanceMatrix apply_update(const PerformanceMatrix& matrix, const PreferenceWeights& weights,
                               const DirectionCoefficient& delta, const UpdateConfig& cfg);

/// One line of the JSONL update trace.
struct UpdateTraceRecord {
    long step = 0;
    std::vector<ToolId> candidates;
    std::vector<ToolId> theory;
    std::vector<ToolId> actual;
    std::vector<std::pair<ToolId, double>> delta;
    double eta = 0.0;
    ToolId selected_tool;
    ToolId oracle_best;
    bool error_flag = false;
};

nlohmann::ordered_json trace_record_to_json(const UpdateTraceRecord& record);
void write_trace_line(std::ostream& out, const UpdateTraceRecord& record);

} // namespace perfguard
