#pragma once

#include <span>
#include <string>
#include <vector>

#include "perfguard/errors.hpp"

namespace perfguard {

struct GoalWeight {
    std::string goal;
    double weight = 0.0;
};

/// Local goal weights plus one global goal weight; all nonnegative, summing
/// to 1 (within 1e-9) so the aggregated decision value stays in [0,1].
struct EvaluationGoals {
    std::vector<GoalWeight> local;
    GoalWeight global;

    static EvaluationGoals checked(std::vector<GoalWeight> local, GoalWeight global);
    std::size_t local_count() const { return local.size(); }
};

struct StepEvaluation {
    double e = 0.0;               // weighted sum of per_goal
    std::vector<double> per_goal; // local scores then the global score
    long step = 0;
};

/// Weighted sum of per-goal scores: local scores first, global score last.
/// Scores must be in [0,1]; arity must be local_count+1.
StepEvaluation evaluate(std::span<const double> output_scores, const EvaluationGoals& goals,
                        long step = 0);

} // namespace perfguard
