#include "perfguard/capo.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace perfguard {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out += a[i] * b[i];
    return out;
}

std::vector<double> log_softmax(std::span<const double> params,
                                std::span<const SubtaskCandidate> candidates) {
    if (candidates.empty()) throw CandidateNotInSet("candidate set is empty");
    std::vector<double> logits(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (candidates[c].features.size() != params.size())
            throw DimensionMismatch("candidate feature length " +
                                    std::to_string(candidates[c].features.size()) +
                                    " does not match policy dimension " +
                                    std::to_string(params.size()));
        logits[c] = dot(params, candidates[c].features);
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - peak);
    const double log_z = peak + std::log(sum);
    for (double& v : logits) v -= log_z;
    return logits;
}

/// -log sigmoid(z), stable for both signs of z.
double softplus_neg(double z) {
    if (z > 0.0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

void check_pair(const PreferencePair& pair) {
    if (pair.winner_index >= pair.candidates.size() ||
        pair.loser_index >= pair.candidates.size())
        throw CandidateNotInSet("winner/loser index outside the candidate set");
    if (pair.winner_index == pair.loser_index)
        throw CandidateNotInSet("winner and loser must be distinct candidates");
}

} // namespace

PlannerPolicy::PlannerPolicy(std::vector<double> theta, double alpha)
    : theta_(theta), ref_theta_(std::move(theta)), alpha_(alpha) {
    if (theta_.empty()) throw InvalidSpec("policy needs at least one parameter");
    if (!(alpha_ > 0.0)) throw InvalidSpec("policy alpha must be positive");
}

PlannerPolicy PlannerPolicy::from_parts(std::vector<double> theta, std::vector<double> ref_theta,
                                        double alpha) {
    PlannerPolicy policy(std::move(ref_theta), alpha);
    if (theta.size() != policy.ref_theta_.size())
        throw DimensionMismatch("theta and ref_theta differ in length");
    policy.theta_ = std::move(theta);
    return policy;
}

std::vector<double> PlannerPolicy::log_probs(std::span<const SubtaskCandidate> candidates) const {
    return log_softmax(theta_, candidates);
}

std::vector<double>
PlannerPolicy::ref_log_probs(std::span<const SubtaskCandidate> candidates) const {
    return log_softmax(ref_theta_, candidates);
}

std::size_t PlannerPolicy::argmax(std::span<const SubtaskCandidate> candidates) const {
    const auto lp = log_probs(candidates);
    return static_cast<std::size_t>(
        std::max_element(lp.begin(), lp.end()) - lp.begin());
}

PlannerPolicy PlannerPolicy::with_theta(std::vector<double> theta) const {
    if (theta.size() != theta_.size())
        throw DimensionMismatch("new theta differs in length");
    PlannerPolicy out = *this;
    out.theta_ = std::move(theta);
    return out;
}

nlohmann::ordered_json PlannerPolicy::to_checkpoint() const {
    nlohmann::ordered_json doc;
    doc["theta"] = theta_;
    doc["ref_theta"] = ref_theta_;
    doc["alpha"] = alpha_;
    doc["F"] = theta_.size();
    return doc;
}

PlannerPolicy PlannerPolicy::from_checkpoint(const nlohmann::json& doc) {
    for (const char* key : {"theta", "ref_theta", "alpha", "F"}) {
        if (!doc.contains(key))
            throw ParseError(std::string("policy checkpoint is missing field '") + key + "'");
    }
    auto theta = doc["theta"].get<std::vector<double>>();
    auto ref = doc["ref_theta"].get<std::vector<double>>();
    if (theta.size() != doc["F"].get<std::size_t>())
        throw SchemaMismatch("checkpoint F does not match theta length");
    return from_parts(std::move(theta), std::move(ref), doc["alpha"].get<double>());
}

std::optional<PreferencePair> make_pair(std::vector<SubtaskCandidate> candidates,
                                        const std::vector<StepEvaluation>& evaluations,
                                        PlanningContext context) {
    if (candidates.size() < 2)
        throw ArityMismatch("need at least two candidates to form a pair");
    if (candidates.size() != evaluations.size())
        throw ArityMismatch("evaluations are not aligned with candidates");

    // first occurrence wins the max, last occurrence takes the min, so the
    // two indices differ whenever any two evaluations differ
    std::size_t winner = 0, loser = 0;
    for (std::size_t i = 1; i < evaluations.size(); ++i) {
        if (evaluations[i].e > evaluations[winner].e) winner = i;
        if (evaluations[i].e <= evaluations[loser].e) loser = i;
    }
    if (evaluations[winner].e == evaluations[loser].e) return std::nullopt; // no signal

    PreferencePair pair;
    pair.winner_index = winner;
    pair.loser_index = loser;
    pair.winner_e = evaluations[winner].e;
    pair.loser_e = evaluations[loser].e;
    pair.candidates = std::move(candidates);
    pair.context = std::move(context);
    return pair;
}

double pair_margin(const PreferencePair& pair, const PlannerPolicy& policy) {
    check_pair(pair);
    const auto lp = policy.log_probs(pair.candidates);
    const auto lp_ref = policy.ref_log_probs(pair.candidates);
    const double r_w = lp[pair.winner_index] - lp_ref[pair.winner_index];
    const double r_l = lp[pair.loser_index] - lp_ref[pair.loser_index];
    return r_w - r_l;
}

double loss(const PreferencePair& pair, const PlannerPolicy& policy) {
    return softplus_neg(policy.alpha() * pair_margin(pair, policy));
}

std::vector<double> grad(const PreferencePair& pair, const PlannerPolicy& policy) {
    check_pair(pair);
    const double z = policy.alpha() * pair_margin(pair, policy);
    // d(-log sigmoid(z))/dz = -sigmoid(-z); the softmax mean term of
    // grad log p cancels in the winner/loser difference, leaving x_w - x_l
    const double scale = -policy.alpha() / (1.0 + std::exp(z));
    const auto& xw = pair.winner().features;
    const auto& xl = pair.loser().features;
    std::vector<double> g(policy.feature_dim());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (xw[i] - xl[i]);
    return g;
}

std::vector<double> mean_gradient_serial(std::span<const PreferencePair> pairs,
                                         const PlannerPolicy& policy) {
    if (pairs.empty()) throw ArityMismatch("gradient batch must not be empty");
    std::vector<double> acc(policy.feature_dim(), 0.0);
    for (const auto& pair : pairs) {
        const auto g = grad(pair, policy);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (double& v : acc) v *= inv;
    return acc;
}

std::vector<double> mean_gradient(std::span<const PreferencePair> pairs,
                                  const PlannerPolicy& policy, int jobs) {
    if (pairs.empty()) throw ArityMismatch("gradient batch must not be empty");
    if (jobs <= 1 || pairs.size() < 2) return mean_gradient_serial(pairs, policy);

    // per-pair gradients land in fixed slots; the reduction below runs in
    // index order so the result is independent of thread count
    std::vector<std::vector<double>> slots(pairs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(jobs)
#endif
    for (long idx = 0; idx < static_cast<long>(pairs.size()); ++idx)
        slots[static_cast<std::size_t>(idx)] = grad(pairs[static_cast<std::size_t>(idx)], policy);

    std::vector<double> acc(policy.feature_dim(), 0.0);
    for (const auto& g : slots)
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (double& v : acc) v *= inv;
    return acc;
}

PlannerPolicy train_step(std::span<const PreferencePair> pairs, const PlannerPolicy& policy,
                         double lr, int jobs) {
    if (!(lr >= 0.0)) throw InvalidSpec("learning rate must be nonnegative");
    const auto g = mean_gradient(pairs, policy, jobs);
    std::vector<double> theta(policy.theta().begin(), policy.theta().end());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * g[i];
    return policy.with_theta(std::move(theta));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionMismatch("cosine similarity needs equal-length vectors");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

void MemoryStore::store(Entry entry) {
    if (capacity_ == 0) return;
    if (entries_.size() >= capacity_) {
        auto lowest = std::min_element(
            entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.final_e < b.final_e; });
        entries_.erase(lowest);
    }
    entries_.push_back(std::move(entry));
}

std::vector<std::size_t> MemoryStore::most_similar(std::span<const double> query,
                                                   std::size_t count) const {
    std::vector<std::size_t> order(entries_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> sim(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i)
        sim[i] = cosine_similarity(query, entries_[i].key);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    if (order.size() > count) order.resize(count);
    return order;
}

nlohmann::ordered_json MemoryStore::to_json() const {
    nlohmann::ordered_json doc;
    doc["capacity"] = capacity_;
    doc["entries"] = nlohmann::ordered_json::array();
    for (const auto& entry : entries_) {
        nlohmann::ordered_json e;
        e["key"] = entry.key;
        e["final_e"] = entry.final_e;
        e["sequence"] = nlohmann::ordered_json::array();
        for (const auto& cand : entry.sequence) {
            nlohmann::ordered_json c;
            c["id"] = cand.id;
            c["features"] = cand.features;
            e["sequence"].push_back(std::move(c));
        }
        doc["entries"].push_back(std::move(e));
    }
    return doc;
}

MemoryStore MemoryStore::from_json(const nlohmann::json& doc) {
    MemoryStore store(doc.at("capacity").get<std::size_t>());
    for (const auto& e : doc.at("entries")) {
        Entry entry;
        entry.key = e.at("key").get<std::vector<double>>();
        entry.final_e = e.at("final_e").get<double>();
        for (const auto& c : e.at("sequence")) {
            SubtaskCandidate cand;
            cand.id = c.at("id").get<std::string>();
            cand.features = c.at("features").get<std::vector<double>>();
            cand.source = CandidateSource::memory;
            entry.sequence.push_back(std::move(cand));
        }
        store.entries_.push_back(std::move(entry));
    }
    return store;
}

MixResult mix_candidates(std::size_t k, double beta, const PlanningContext& context,
                         const MemoryStore& memory, SeededRng& rng,
                         const CandidateSampler& sample_random) {
    if (k == 0) throw ArityMismatch("candidate count must be >= 1");
    if (beta < 0.0 || beta > 1.0) throw InvalidSpec("beta must lie in [0, 1]");

    // round-half-up on beta*k
    std::size_t want_memory = static_cast<std::size_t>(std::floor(
        beta * static_cast<double>(k) + 0.5));
    want_memory = std::min(want_memory, k);

    MixResult result;
    auto top = memory.most_similar(context.task_summary_features, 5);
    // entries with empty sequences cannot contribute a candidate
    std::erase_if(top, [&](std::size_t i) { return memory.entries()[i].sequence.empty(); });

    const std::size_t take = std::min(want_memory, top.size());
    result.memory_shortfall = take < want_memory;
    if (take > 0) {
        const auto picks = rng.pick_distinct(top.size(), take);
        const std::size_t step = context.history.size();
        for (std::size_t p : picks) {
            const auto& entry = memory.entries()[top[p]];
            const std::size_t pos = std::min(step, entry.sequence.size() - 1);
            SubtaskCandidate cand = entry.sequence[pos];
            cand.source = CandidateSource::memory;
            result.candidates.push_back(std::move(cand));
        }
    }
    result.memory_count = result.candidates.size();
    while (result.candidates.size() < k) {
        SubtaskCandidate cand = sample_random(rng);
        cand.source = CandidateSource::random;
        result.candidates.push_back(std::move(cand));
    }
    return result;
}

} // namespace perfguard
