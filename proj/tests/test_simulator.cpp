#include <doctest.h>

#include <cmath>
#include <set>

#include "perfguard/simulator.hpp"

using namespace perfguard;

namespace {

SimulatedTool tool(std::string id, std::vector<double> caps, double sigma = 0.0) {
    return SimulatedTool{ToolId{std::move(id)}, std::move(caps), sigma, "", 0.0};
}

SimulatedTask task_with(const DimensionSet& dims, std::vector<double> w) {
    return SimulatedTask{PreferenceWeights::checked(dims, std::move(w)),
                         EvaluationGoals::checked({}, {"g", 1.0}), 1};
}

} // namespace

TEST_CASE("noiseless execution projects weights onto true capabilities") {
    auto dims = DimensionSet::custom({"d0", "d1", "d2"});
    auto t = tool("a", {0.2, 0.7, 0.4});
    SeededRng rng(1);
    auto out = execute(t, task_with(dims, {0.0, 1.0, 0.0}), rng);
    CHECK(out.quality == 0.7);
    for (double g : out.per_goal_scores) CHECK(g == 0.7);
}

TEST_CASE("uniform weights over flat capabilities give the flat value") {
    auto dims = DimensionSet::custom({"d0", "d1"});
    auto t = tool("a", {0.5, 0.5});
    SeededRng rng(2);
    auto out = execute(t, task_with(dims, {0.5, 0.5}), rng);
    CHECK(out.quality == 0.5);
}

TEST_CASE("execution is deterministic for a fixed seed") {
    auto dims = DimensionSet::custom({"d0", "d1"});
    auto t = tool("a", {0.3, 0.8}, 0.1);
    SeededRng rng1(77), rng2(77);
    auto a = execute(t, task_with(dims, {0.6, 0.4}), rng1);
    auto b = execute(t, task_with(dims, {0.6, 0.4}), rng2);
    CHECK(a.quality == b.quality);
    CHECK(a.per_goal_scores == b.per_goal_scores);
}

TEST_CASE("execution validates dimension counts") {
    auto dims = DimensionSet::custom({"d0", "d1"});
    auto t = tool("a", {0.3});
    SeededRng rng(3);
    CHECK_THROWS_AS(execute(t, task_with(dims, {0.5, 0.5}), rng), DimensionMismatch);
}

TEST_CASE("oracle_best maximizes the weighted projection with index ties") {
    auto dims = DimensionSet::custom({"d0", "d1"});
    std::vector<SimulatedTool> tools = {tool("a", {0.9, 0.1}), tool("b", {0.1, 0.9})};
    CHECK(oracle_best(task_with(dims, {1.0, 0.0}), tools) == ToolId{"a"});
    CHECK(oracle_best(task_with(dims, {0.0, 1.0}), tools) == ToolId{"b"});

    std::vector<SimulatedTool> single = {tool("only", {0.4, 0.4})};
    CHECK(oracle_best(task_with(dims, {0.5, 0.5}), single) == ToolId{"only"});

    std::vector<SimulatedTool> tied = {tool("first", {0.5, 0.5}), tool("second", {0.5, 0.5})};
    CHECK(oracle_best(task_with(dims, {0.5, 0.5}), tied) == ToolId{"first"});
}

TEST_CASE("oracle ranking sorts by observed quality with registry ties") {
    auto dims = DimensionSet::custom({"d0"});
    SeededRng gen_rng(5);
    auto eco = ToolEcosystem::generate(dims, 3, 0.0, EcosystemParams{}, gen_rng);
    CandidateSet candidates;
    candidates.exploit = {eco.tools()[0].id, eco.tools()[1].id};
    candidates.explore = {eco.tools()[2].id};

    auto dummy_task = task_with(dims, {1.0});
    std::vector<ExecutionOutcome> outcomes = {
        {eco.tools()[0].id, 0.2, {}}, {eco.tools()[1].id, 0.9, {}}, {eco.tools()[2].id, 0.2, {}}};
    auto ranking = eco.oracle_ranking(candidates, dummy_task, outcomes);
    REQUIRE(ranking.size() == 3);
    CHECK(ranking.ordered()[0] == eco.tools()[1].id);
    CHECK(ranking.ordered()[1] == eco.tools()[0].id); // tie at 0.2 -> lower registry index
    CHECK(ranking.ordered()[2] == eco.tools()[2].id);

    outcomes.pop_back();
    CHECK_THROWS_AS(eco.oracle_ranking(candidates, dummy_task, outcomes), ArityMismatch);
}

TEST_CASE("generated ecosystems are max-normalized per dimension") {
    SeededRng rng(6);
    auto eco = ToolEcosystem::generate(DimensionSet::custom({"d0", "d1", "d2", "d3"}), 6, 0.05,
                                       EcosystemParams{}, rng);
    REQUIRE(eco.tool_count() == 6);
    for (std::size_t i = 0; i < 4; ++i) {
        double row_max = 0.0;
        for (const auto& t : eco.tools()) row_max = std::max(row_max, t.true_caps[i]);
        CHECK(row_max == doctest::Approx(1.0).epsilon(1e-12));
    }
    std::set<std::string> ids;
    for (const auto& t : eco.tools()) ids.insert(t.id.value);
    CHECK(ids.size() == 6);
}

TEST_CASE("exact matrix plus zero noise reproduces the oracle on every task") {
    SeededRng rng(7);
    for (int seed = 0; seed < 5; ++seed) {
        SeededRng gen_rng(100 + seed);
        auto dims = DimensionSet::custom({"d0", "d1", "d2", "d3", "d4"});
        auto eco = ToolEcosystem::generate(dims, 7, 0.0, EcosystemParams{}, gen_rng);
        auto matrix = eco.exact_matrix();
        for (int round = 0; round < 50; ++round) {
            std::vector<double> alpha(dims.size(), 1.0);
            auto task = task_with(dims, rng.dirichlet(alpha));
            auto top = rank(score(task.weights, matrix)).best();
            CHECK(top == eco.best_tool(task));
        }
    }
}

TEST_CASE("full permutation corruption displaces every column") {
    SeededRng gen_rng(8);
    auto eco = ToolEcosystem::generate(DimensionSet::custom({"d0", "d1", "d2"}), 5, 0.0,
                                       EcosystemParams{}, gen_rng);
    auto truth = eco.exact_matrix();
    SeededRng rng(9);
    auto corrupted = corrupt_matrix(truth, CorruptionMode::permuted, 1.0, rng);
    for (std::size_t j = 0; j < truth.tool_count(); ++j)
        CHECK(corrupted.column(j) != truth.column(j));
    // tool metadata order is untouched; only scores moved
    for (std::size_t j = 0; j < truth.tool_count(); ++j)
        CHECK(corrupted.tools()[j].id == truth.tools()[j].id);
}

TEST_CASE("partial permutation corruption keeps the other columns") {
    SeededRng gen_rng(10);
    auto eco = ToolEcosystem::generate(DimensionSet::custom({"d0", "d1"}), 8, 0.0,
                                       EcosystemParams{}, gen_rng);
    auto truth = eco.exact_matrix();
    SeededRng rng(11);
    auto corrupted = corrupt_matrix(truth, CorruptionMode::permuted, 0.5, rng);
    std::size_t moved = 0;
    for (std::size_t j = 0; j < truth.tool_count(); ++j)
        if (corrupted.column(j) != truth.column(j)) ++moved;
    CHECK(moved == 4);
}

TEST_CASE("remaining corruption modes") {
    SeededRng gen_rng(12);
    auto eco = ToolEcosystem::generate(DimensionSet::custom({"d0", "d1"}), 4, 0.0,
                                       EcosystemParams{}, gen_rng);
    auto truth = eco.exact_matrix();

    SeededRng rng_a(13);
    auto exact = corrupt_matrix(truth, CorruptionMode::exact, 1.0, rng_a);
    for (std::size_t i = 0; i < truth.raw().size(); ++i)
        CHECK(exact.raw()[i] == truth.raw()[i]);

    SeededRng rng_b(14);
    auto uniform = corrupt_matrix(truth, CorruptionMode::uniform_random, 1.0, rng_b);
    for (double v : uniform.raw()) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }

    SeededRng rng_c(15);
    auto mean = corrupt_matrix(truth, CorruptionMode::mean_initialized, 1.0, rng_c);
    for (std::size_t i = 0; i < mean.dim_count(); ++i)
        for (std::size_t j = 1; j < mean.tool_count(); ++j)
            CHECK(mean.at(i, j) == mean.at(i, 0));
}

TEST_CASE("planning simulator qualities stay in the unit interval") {
    SeededRng rng(16);
    auto world = PlanningSimulator::generate(6, rng);
    for (int round = 0; round < 200; ++round) {
        auto cand = world.sample_candidate(rng);
        const double q = world.true_quality(cand);
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
    }
}

TEST_CASE("planning simulator is deterministic per seed") {
    SeededRng a(17), b(17);
    auto wa = PlanningSimulator::generate(4, a);
    auto wb = PlanningSimulator::generate(4, b);
    auto ca = wa.sample_candidate(a);
    auto cb = wb.sample_candidate(b);
    CHECK(ca.id == cb.id);
    CHECK(ca.features == cb.features);
    CHECK(wa.true_quality(ca) == wb.true_quality(cb));
}

TEST_CASE("scenario configs round trip through json") {
    ScenarioConfig cfg;
    cfg.name = "roundtrip";
    cfg.tool_count = 6;
    cfg.dim_count = 5;
    cfg.noise_sigma = 0.07;
    cfg.corruption.fraction = 0.5;
    cfg.update.eta = 0.15;
    cfg.capo.k = 4;
    auto doc = cfg.to_json();
    auto back = ScenarioConfig::from_json(doc);
    CHECK(back.to_json().dump() == doc.dump());
}

TEST_CASE("scenario parsing rejects unknown keys and bad values") {
    auto doc = ScenarioConfig{}.to_json();
    doc["surprise"] = 1;
    CHECK_THROWS_AS(ScenarioConfig::from_json(doc), InvalidSpec);

    auto bad = ScenarioConfig{}.to_json();
    bad["noise_sigma"] = 0.9;
    CHECK_THROWS_AS(ScenarioConfig::from_json(bad), InvalidSpec);
}

TEST_CASE("task sampler produces valid weights and goals") {
    ScenarioConfig cfg;
    auto dims = cfg.dimension_set();
    SeededRng rng(18);
    for (int round = 0; round < 20; ++round) {
        auto task = sample_task(cfg, dims, rng);
        double sum = 0.0;
        for (double w : task.weights.w) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(task.goals.local_count() == cfg.task.local_goals);
    }
}
