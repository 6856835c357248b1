#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

#include "perfguard/capability_matrix.hpp"

namespace perfguard {

/// Task preference over capability dimensions. Entries are in [0,1] and sum
/// to 1. Construct through checked(): inputs whose sum drifts from 1 by at
/// most 1e-6 are renormalized (upstream weight producers are stochastic),
/// anything further off is rejected.
struct PreferenceWeights {
    DimensionSet dims;
    std::vector<double> w;

    static PreferenceWeights checked(DimensionSet dims, std::vector<double> w);
};

struct SuitabilityScores {
    std::vector<ToolId> tools; // registry order
    std::vector<double> s;     // same length/order as tools
};

/// Tool order, best first. Ranks are 1-based.
class Ranking {
public:
    Ranking() = default;
    explicit Ranking(std::vector<ToolId> ordered);

    const std::vector<ToolId>& ordered() const { return ordered_; }
    std::size_t size() const { return ordered_.size(); }
    bool contains(const ToolId& id) const { return rank_.count(id.value) > 0; }
    /// 1 = best; throws RankingMismatch for tools outside the ranking.
    std::size_t rank_of(const ToolId& id) const;
    const ToolId& best() const;

    bool operator==(const Ranking& other) const { return ordered_ == other.ordered_; }

private:
    std::vector<ToolId> ordered_;
    std::unordered_map<std::string, std::size_t> rank_;
};

/// Weighted suitability of every tool: s[j] = sum_i w[i] * normalized[i][j].
/// Scores land in [0,1]. Throws DimensionMismatch when the weight dimensions
/// do not match the matrix.
SuitabilityScores score(const PreferenceWeights& weights, const PerformanceMatrix& matrix);

/// Descending score order; ties broken by registry position (stable).
Ranking rank(const SuitabilityScores& scores);

} // namespace perfguard
