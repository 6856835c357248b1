#include "perfguard/decision_estimator.hpp"

#include <cmath>

namespace perfguard {

EvaluationGoals EvaluationGoals::checked(std::vector<GoalWeight> local, GoalWeight global) {
    double sum = global.weight;
    if (!std::isfinite(global.weight) || global.weight < 0.0)
        throw WeightSumViolation("goal weights must be nonnegative");
    for (const auto& gw : local) {
        if (!std::isfinite(gw.weight) || gw.weight < 0.0)
            throw WeightSumViolation("goal weights must be nonnegative");
        sum += gw.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw WeightSumViolation("goal weights sum to " + std::to_string(sum) + ", expected 1");
    return EvaluationGoals{std::move(local), std::move(global)};
}

StepEvaluation evaluate(std::span<const double> output_scores, const EvaluationGoals& goals,
                        long step) {
    if (output_scores.size() != goals.local.size() + 1)
        throw ArityMismatch("expected " + std::to_string(goals.local.size() + 1) +
                            " goal scores, got " + std::to_string(output_scores.size()));
    for (double v : output_scores) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ArityMismatch("goal scores must lie in [0, 1]");
    }
    double e = 0.0;
    for (std::size_t i = 0; i < goals.local.size(); ++i)
        e += goals.local[i].weight * output_scores[i];
    e += goals.global.weight * output_scores[goals.local.size()];
    return StepEvaluation{e, {output_scores.begin(), output_scores.end()}, step};
}

} // namespace perfguard
