#include <doctest.h>

#include <algorithm>

#include "perfguard/decision_estimator.hpp"
#include "perfguard/rng.hpp"

using namespace perfguard;

namespace {

EvaluationGoals goals_25_25_50() {
    return EvaluationGoals::checked({{"obj_a", 0.25}, {"obj_b", 0.25}}, {"overall", 0.5});
}

} // namespace

TEST_CASE("weighted sum of local and global scores") {
    const double scores[] = {0.8, 0.6, 0.9};
    auto eval = evaluate(scores, goals_25_25_50(), 4);
    CHECK(eval.e == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(eval.step == 4);
    CHECK(eval.per_goal == std::vector<double>{0.8, 0.6, 0.9});
}

TEST_CASE("perfect scores give exactly one") {
    const double scores[] = {1.0, 1.0, 1.0};
    CHECK(evaluate(scores, goals_25_25_50()).e == 1.0);
}

TEST_CASE("a single global goal passes its score through") {
    auto goals = EvaluationGoals::checked({}, {"overall", 1.0});
    const double scores[] = {0.37};
    CHECK(evaluate(scores, goals).e == 0.37);
}

TEST_CASE("arity and range violations are rejected") {
    const double two[] = {0.5, 0.5};
    CHECK_THROWS_AS(evaluate(two, goals_25_25_50()), ArityMismatch);
    const double bad[] = {0.5, 0.5, 1.5};
    CHECK_THROWS_AS(evaluate(bad, goals_25_25_50()), ArityMismatch);
}

TEST_CASE("goal weights must be nonnegative and sum to one") {
    CHECK_THROWS_AS(EvaluationGoals::checked({{"a", 0.6}}, {"g", 0.6}), WeightSumViolation);
    CHECK_THROWS_AS(EvaluationGoals::checked({{"a", -0.1}}, {"g", 1.1}), WeightSumViolation);
    CHECK_NOTHROW(EvaluationGoals::checked({{"a", 0.5}}, {"g", 0.5}));
}

TEST_CASE("evaluation stays in the unit interval") {
    SeededRng rng(41);
    for (int round = 0; round < 200; ++round) {
        const std::size_t locals = rng.below(4);
        std::vector<double> alpha(locals + 1, 1.0);
        auto raw = rng.dirichlet(alpha);
        std::vector<GoalWeight> local;
        for (std::size_t i = 0; i < locals; ++i)
            local.push_back({"l" + std::to_string(i), raw[i]});
        auto goals = EvaluationGoals::checked(local, {"g", raw[locals]});
        std::vector<double> scores(locals + 1);
        for (auto& s : scores) s = rng.uniform01();
        const double e = evaluate(scores, goals).e;
        CHECK(e >= -1e-12);
        CHECK(e <= 1.0 + 1e-12);
    }
}

TEST_CASE("raising one positively weighted score strictly raises e") {
    SeededRng rng(42);
    for (int round = 0; round < 100; ++round) {
        auto goals = goals_25_25_50();
        std::vector<double> scores = {rng.uniform(0.0, 0.9), rng.uniform(0.0, 0.9),
                                      rng.uniform(0.0, 0.9)};
        const std::size_t which = rng.below(3);
        auto bumped = scores;
        bumped[which] = std::min(1.0, bumped[which] + 0.05);
        CHECK(evaluate(bumped, goals).e > evaluate(scores, goals).e);
    }
}

TEST_CASE("permuting local goal triples leaves e unchanged") {
    SeededRng rng(43);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> alpha = {1.0, 1.0, 1.0, 1.0};
        auto raw = rng.dirichlet(alpha);
        std::vector<GoalWeight> local = {{"a", raw[0]}, {"b", raw[1]}, {"c", raw[2]}};
        std::vector<double> scores = {rng.uniform01(), rng.uniform01(), rng.uniform01(),
                                      rng.uniform01()};
        auto goals = EvaluationGoals::checked(local, {"g", raw[3]});
        const double base = evaluate(scores, goals).e;

        std::vector<std::size_t> perm = {2, 0, 1};
        std::vector<GoalWeight> plocal;
        std::vector<double> pscores;
        for (std::size_t idx : perm) {
            plocal.push_back(local[idx]);
            pscores.push_back(scores[idx]);
        }
        pscores.push_back(scores[3]);
        auto pgoals = EvaluationGoals::checked(plocal, {"g", raw[3]});
        CHECK(evaluate(pscores, pgoals).e == doctest::Approx(base).epsilon(1e-12));
    }
}
