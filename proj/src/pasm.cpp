#include "perfguard/pasm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace perfguard {

PreferenceWeights PreferenceWeights::checked(DimensionSet dims, std::vector<double> w) {
    if (w.size() != dims.size())
        throw DimensionMismatch("weight vector length " + std::to_string(w.size()) +
                                " does not match " + std::to_string(dims.size()) +
                                " dimensions");
    double sum = 0.0;
    for (double v : w) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0 + 1e-6)
            throw WeightSumViolation("preference weights must lie in [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw WeightSumViolation("preference weights sum to " + std::to_string(sum) +
                                 ", expected 1");
    for (double& v : w) v /= sum;
    return PreferenceWeights{std::move(dims), std::move(w)};
}

Ranking::Ranking(std::vector<ToolId> ordered) : ordered_(std::move(ordered)) {
    for (std::size_t pos = 0; pos < ordered_.size(); ++pos) {
        if (!rank_.emplace(ordered_[pos].value, pos + 1).second)
            throw RankingMismatch("duplicate tool in ranking: " + ordered_[pos].value);
    }
}

std::size_t Ranking::rank_of(const ToolId& id) const {
    auto it = rank_.find(id.value);
    if (it == rank_.end()) throw RankingMismatch("tool not in ranking: " + id.value);
    return it->second;
}

const ToolId& Ranking::best() const {
    if (ordered_.empty()) throw RankingMismatch("ranking is empty");
    return ordered_.front();
}

SuitabilityScores score(const PreferenceWeights& weights, const PerformanceMatrix& matrix) {
    if (weights.dims != matrix.dims())
        throw DimensionMismatch("preference dimensions do not match the matrix");
    const auto normalized = normalize(matrix).matrix;
    const std::size_t d = matrix.dim_count();
    const std::size_t l = matrix.tool_count();
    std::vector<double> s(l, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double wi = weights.w[i];
        if (wi == 0.0) continue;
        for (std::size_t j = 0; j < l; ++j) s[j] += wi * normalized.at(i, j);
    }
    return SuitabilityScores{matrix.tool_ids(), std::move(s)};
}

Ranking rank(const SuitabilityScores& scores) {
    if (scores.tools.empty()) throw RankingMismatch("cannot rank an empty score set");
    std::vector<std::size_t> order(scores.tools.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores.s[a] > scores.s[b]; });
    std::vector<ToolId> ordered;
    ordered.reserve(order.size());
    for (std::size_t idx : order) ordered.push_back(scores.tools[idx]);
    return Ranking(std::move(ordered));
}

} // namespace perfguard
