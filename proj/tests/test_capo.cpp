#include <doctest.h>

#include <cmath>

#include "perfguard/capo.hpp"
#include "perfguard/rng.hpp"

using namespace perfguard;

namespace {

SubtaskCandidate cand(std::string id, std::vector<double> features) {
    return SubtaskCandidate{std::move(id), std::move(features), CandidateSource::random};
}

StepEvaluation eval_of(double e) { return StepEvaluation{e, {e}, 0}; }

/// Pair over a two-candidate set with feature difference x_w - x_l = diff.
PreferencePair simple_pair(std::vector<double> winner_features,
                           std::vector<double> loser_features) {
    PreferencePair pair;
    pair.candidates = {cand("w", std::move(winner_features)),
                       cand("l", std::move(loser_features))};
    pair.winner_index = 0;
    pair.loser_index = 1;
    pair.winner_e = 0.9;
    pair.loser_e = 0.1;
    return pair;
}

PreferencePair random_pair(std::size_t feature_dim, std::size_t k, SeededRng& rng) {
    std::vector<SubtaskCandidate> candidates;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> f(feature_dim);
        for (auto& v : f) v = rng.uniform(-1.0, 1.0);
        candidates.push_back(cand("c" + std::to_string(c), std::move(f)));
    }
    std::vector<StepEvaluation> evals;
    for (std::size_t c = 0; c < k; ++c) evals.push_back(eval_of(rng.uniform01()));
    auto pair = make_pair(std::move(candidates), evals, PlanningContext{});
    REQUIRE(pair.has_value());
    return *pair;
}

PlannerPolicy random_policy(std::size_t feature_dim, double alpha, SeededRng& rng) {
    std::vector<double> theta(feature_dim), drift(feature_dim);
    for (auto& v : theta) v = rng.normal(0.0, 0.5);
    auto policy = PlannerPolicy(theta, alpha);
    // move theta off the reference so margins are nonzero
    for (std::size_t i = 0; i < feature_dim; ++i) theta[i] += rng.normal(0.0, 0.5);
    return policy.with_theta(theta);
}

} // namespace

TEST_CASE("make_pair picks argmax winner and argmin loser") {
    auto pair = make_pair({cand("a", {0.0}), cand("b", {0.0}), cand("c", {0.0})},
                          {eval_of(0.8), eval_of(0.3), eval_of(0.5)}, {});
    REQUIRE(pair.has_value());
    CHECK(pair->winner_index == 0);
    CHECK(pair->loser_index == 1);
    CHECK(pair->winner_e == 0.8);
    CHECK(pair->loser_e == 0.3);
}

TEST_CASE("make_pair returns no signal when all evaluations tie") {
    auto pair = make_pair({cand("a", {0.0}), cand("b", {0.0})},
                          {eval_of(0.5), eval_of(0.5)}, {});
    CHECK_FALSE(pair.has_value());
}

TEST_CASE("make_pair tie-breaks by candidate order") {
    auto pair = make_pair({cand("a", {0.0}), cand("b", {0.0}), cand("c", {0.0})},
                          {eval_of(0.9), eval_of(0.9), eval_of(0.1)}, {});
    REQUIRE(pair.has_value());
    CHECK(pair->winner_index == 0); // first max
    CHECK(pair->loser_index == 2);
}

TEST_CASE("make_pair validates arity") {
    CHECK_THROWS_AS(make_pair({cand("a", {0.0})}, {eval_of(0.5)}, {}), ArityMismatch);
    CHECK_THROWS_AS(make_pair({cand("a", {0.0}), cand("b", {0.0})}, {eval_of(0.5)}, {}),
                    ArityMismatch);
}

TEST_CASE("loss at the reference parameters is exactly ln 2") {
    SeededRng rng(51);
    for (int round = 0; round < 20; ++round) {
        auto pair = random_pair(4, 3, rng);
        std::vector<double> theta(4);
        for (auto& v : theta) v = rng.normal();
        PlannerPolicy policy(theta, 1.0); // theta == ref_theta
        CHECK(std::abs(loss(pair, policy) - std::log(2.0)) <= 1e-12);
    }
}

TEST_CASE("loss matches the closed form at unit margin") {
    // theta=[1], ref=[0], x_w=[1], x_l=[0]: r_w - r_l = 1
    auto policy = PlannerPolicy({0.0}, 1.0).with_theta({1.0});
    auto pair = simple_pair({1.0}, {0.0});
    CHECK(pair_margin(pair, policy) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loss(pair, policy) == doctest::Approx(0.31326168751822286).epsilon(1e-9));
}

TEST_CASE("loss depends only on alpha times the margin") {
    auto pair = simple_pair({1.0}, {0.0});
    auto policy_a2_m1 = PlannerPolicy({0.0}, 2.0).with_theta({1.0}); // alpha 2, margin 1
    auto policy_a1_m2 = PlannerPolicy({0.0}, 1.0).with_theta({2.0}); // alpha 1, margin 2
    CHECK(loss(pair, policy_a2_m1) ==
          doctest::Approx(loss(pair, policy_a1_m2)).epsilon(1e-12));
}

TEST_CASE("loss is positive and winner/loser swap is anti-symmetric") {
    SeededRng rng(52);
    for (int round = 0; round < 100; ++round) {
        auto pair = random_pair(5, 4, rng);
        auto policy = random_policy(5, 1.0, rng);
        const double forward = loss(pair, policy);
        CHECK(forward > 0.0);

        auto swapped = pair;
        std::swap(swapped.winner_index, swapped.loser_index);
        std::swap(swapped.winner_e, swapped.loser_e);
        const double backward = loss(swapped, policy);
        CHECK(forward + backward >= 2.0 * std::log(2.0) - 1e-12);
    }
}

TEST_CASE("gradient at the reference is -alpha/2 times the feature gap") {
    const double alpha = 1.7;
    auto policy = PlannerPolicy({0.3, -0.2, 0.9}, alpha);
    auto pair = simple_pair({0.5, -0.4, 0.1}, {0.2, 0.3, -0.6});
    auto g = grad(pair, policy);
    const std::vector<double> gap = {0.3, -0.7, 0.7};
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(g[i] == doctest::Approx(-0.5 * alpha * gap[i]).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    SeededRng rng(53);
    const double h = 1e-5;
    for (int round = 0; round < 50; ++round) {
        const std::size_t dim = 4;
        auto pair = random_pair(dim, 3, rng);
        auto policy = random_policy(dim, rng.uniform(0.5, 2.0), rng);
        auto analytic = grad(pair, policy);
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<double> plus(policy.theta().begin(), policy.theta().end());
            std::vector<double> minus = plus;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (loss(pair, policy.with_theta(plus)) -
                               loss(pair, policy.with_theta(minus))) /
                              (2.0 * h);
            const double scale = std::max({std::abs(analytic[i]), std::abs(fd), 1e-12});
            CHECK(std::abs(analytic[i] - fd) / scale < 1e-6);
        }
    }
}

TEST_CASE("identical winner and loser features give a zero gradient") {
    auto policy = PlannerPolicy({0.4, 0.1}, 1.0).with_theta({0.9, -0.3});
    auto pair = simple_pair({0.5, 0.5}, {0.5, 0.5});
    for (double g : grad(pair, policy)) CHECK(g == 0.0);
}

TEST_CASE("a small step against the gradient decreases the loss") {
    SeededRng rng(54);
    for (int round = 0; round < 10; ++round) {
        auto pair = random_pair(6, 4, rng);
        auto policy = random_policy(6, 1.0, rng);
        auto g = grad(pair, policy);
        double norm2 = 0.0;
        for (double v : g) norm2 += v * v;
        if (norm2 < 1e-16) continue;
        std::vector<double> stepped(policy.theta().begin(), policy.theta().end());
        for (std::size_t i = 0; i < stepped.size(); ++i) stepped[i] -= 1e-4 * g[i];
        CHECK(loss(pair, policy.with_theta(stepped)) < loss(pair, policy));
    }
}

TEST_CASE("candidate probabilities sum to one") {
    SeededRng rng(55);
    for (int round = 0; round < 50; ++round) {
        auto pair = random_pair(5, 6, rng);
        auto policy = random_policy(5, 1.0, rng);
        double total = 0.0;
        for (double lp : policy.log_probs(pair.candidates)) total += std::exp(lp);
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("zero learning rate leaves theta untouched") {
    SeededRng rng(56);
    auto pair = random_pair(3, 3, rng);
    auto policy = random_policy(3, 1.0, rng);
    const PreferencePair batch[] = {pair};
    auto after = train_step(batch, policy, 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(after.theta()[i] == policy.theta()[i]);
}

TEST_CASE("descent on one fixed pair strictly decreases the loss below ln 2") {
    SeededRng rng(57);
    auto pair = random_pair(4, 3, rng);
    PlannerPolicy policy({0.05, -0.02, 0.08, 0.01}, 1.0);
    const PreferencePair batch[] = {pair};
    double previous = loss(pair, policy);
    for (int step = 0; step < 100; ++step) {
        policy = train_step(batch, policy, 0.1);
        const double now = loss(pair, policy);
        CHECK(now < previous);
        previous = now;
    }
    CHECK(previous < 0.69);
    // reference copy never moves
    CHECK(policy.ref_theta()[0] == 0.05);
}

TEST_CASE("duplicating a pair in the batch does not change the mean gradient") {
    SeededRng rng(58);
    auto pair = random_pair(4, 3, rng);
    auto policy = random_policy(4, 1.0, rng);
    const PreferencePair once[] = {pair};
    const PreferencePair twice[] = {pair, pair};
    auto g1 = mean_gradient(once, policy);
    auto g2 = mean_gradient(twice, policy);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("parallel mean gradient equals the serial reference") {
    SeededRng rng(59);
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 64; ++i) pairs.push_back(random_pair(6, 4, rng));
    auto policy = random_policy(6, 1.0, rng);
    auto serial = mean_gradient_serial(pairs, policy);
    auto parallel = mean_gradient(pairs, policy, 4);
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);
}

TEST_CASE("policy checkpoints round trip") {
    auto policy = PlannerPolicy({0.1, 0.2, 0.3}, 1.5).with_theta({0.9, -0.8, 0.7});
    auto doc = policy.to_checkpoint();
    CHECK(doc["F"] == 3);
    auto back = PlannerPolicy::from_checkpoint(doc);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.theta()[i] == policy.theta()[i]);
        CHECK(back.ref_theta()[i] == policy.ref_theta()[i]);
    }
    CHECK(back.alpha() == 1.5);
}

TEST_CASE("cosine similarity basics") {
    std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0}, c = {2.0, 0.0};
    CHECK(cosine_similarity(a, b) == 0.0);
    CHECK(cosine_similarity(a, c) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(a, std::vector<double>{-3.0, 0.0}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(cosine_similarity(a, std::vector<double>{0.0, 0.0}) == 0.0);

    SeededRng rng(60);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> u(4), v(4);
        for (auto& x : u) x = rng.normal();
        for (auto& x : v) x = rng.normal();
        const double sim = cosine_similarity(u, v);
        CHECK(sim >= -1.0 - 1e-12);
        CHECK(sim <= 1.0 + 1e-12);
        auto scaled = u;
        for (auto& x : scaled) x *= 7.5;
        CHECK(cosine_similarity(scaled, v) == doctest::Approx(sim).epsilon(1e-12));
    }
}

TEST_CASE("memory store evicts the weakest entry first") {
    MemoryStore store(2);
    store.store({{1.0, 0.0}, {cand("a", {1.0, 0.0})}, 0.9});
    store.store({{0.0, 1.0}, {cand("b", {0.0, 1.0})}, 0.2});
    store.store({{0.5, 0.5}, {cand("c", {0.5, 0.5})}, 0.7});
    REQUIRE(store.size() == 2);
    CHECK(store.entries()[0].final_e == 0.9);
    CHECK(store.entries()[1].final_e == 0.7);
}

TEST_CASE("memory retrieval ranks by cosine similarity with stable ties") {
    MemoryStore store(8);
    store.store({{1.0, 0.0}, {cand("x", {1.0, 0.0})}, 0.5});
    store.store({{0.0, 1.0}, {cand("y", {0.0, 1.0})}, 0.5});
    store.store({{1.0, 1.0}, {cand("z", {1.0, 1.0})}, 0.5});
    auto top = store.most_similar(std::vector<double>{1.0, 0.05}, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0] == 0);
    CHECK(top[1] == 2);
}

TEST_CASE("mix_candidates draws the memory share from the top entries") {
    MemoryStore store(8);
    for (int i = 0; i < 6; ++i) {
        const double x = (i + 1) * 0.1;
        store.store({{x, 1.0 - x}, {cand("m" + std::to_string(i), {x, 1.0 - x})}, 0.5 + i * 0.05});
    }
    PlanningContext ctx;
    ctx.task_summary_features = {0.9, 0.1};
    SeededRng rng(61);
    auto sampler = [](SeededRng& r) {
        return SubtaskCandidate{"r", {r.uniform01(), r.uniform01()}, CandidateSource::random};
    };
    auto mix = mix_candidates(5, 0.4, ctx, store, rng, sampler);
    REQUIRE(mix.candidates.size() == 5);
    CHECK(mix.memory_count == 2); // round(0.4 * 5)
    CHECK_FALSE(mix.memory_shortfall);
    for (std::size_t i = 0; i < mix.candidates.size(); ++i) {
        const auto expected = i < 2 ? CandidateSource::memory : CandidateSource::random;
        CHECK(mix.candidates[i].source == expected);
    }
}

TEST_CASE("beta zero mixes no memory at all") {
    MemoryStore store(4);
    store.store({{1.0}, {cand("m", {1.0})}, 0.9});
    PlanningContext ctx;
    ctx.task_summary_features = {1.0};
    SeededRng rng(62);
    auto mix = mix_candidates(4, 0.0, ctx, store, rng,
                              [](SeededRng& r) { return SubtaskCandidate{"r", {r.uniform01()}}; });
    CHECK(mix.memory_count == 0);
    CHECK_FALSE(mix.memory_shortfall);
}

TEST_CASE("empty memory falls back to all-random with a shortfall flag") {
    MemoryStore store(4);
    PlanningContext ctx;
    ctx.task_summary_features = {1.0};
    SeededRng rng(63);
    auto mix = mix_candidates(3, 1.0, ctx, store, rng,
                              [](SeededRng& r) { return SubtaskCandidate{"r", {r.uniform01()}}; });
    CHECK(mix.candidates.size() == 3);
    CHECK(mix.memory_count == 0);
    CHECK(mix.memory_shortfall);
    for (const auto& c : mix.candidates) CHECK(c.source == CandidateSource::random);
}

TEST_CASE("mix_candidates is deterministic under a fixed seed") {
    MemoryStore store(8);
    for (int i = 0; i < 6; ++i)
        store.store({{i * 0.1, 1.0}, {cand("m" + std::to_string(i), {i * 0.1, 1.0})}, 0.5});
    PlanningContext ctx;
    ctx.task_summary_features = {0.3, 0.7};
    auto sampler = [](SeededRng& r) {
        return SubtaskCandidate{"r", {r.uniform01(), r.uniform01()}};
    };
    SeededRng rng1(64), rng2(64);
    auto a = mix_candidates(5, 0.4, ctx, store, rng1, sampler);
    auto b = mix_candidates(5, 0.4, ctx, store, rng2, sampler);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        CHECK(a.candidates[i].id == b.candidates[i].id);
        CHECK(a.candidates[i].features == b.candidates[i].features);
    }
}
