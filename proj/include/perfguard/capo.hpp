#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "perfguard/decision_estimator.hpp"
#include "perfguard/errors.hpp"
#include "perfguard/rng.hpp"

namespace perfguard {

enum class CandidateSource { memory, random };

/// One candidate subtask, represented by its feature embedding.
struct SubtaskCandidate {
    std::string id;
    std::vector<double> features;
    CandidateSource source = CandidateSource::random;
};

/// Everything the planner conditions on at one step: task summary features,
/// target semantics, a digest of the tool library, and the execution history
/// of (candidate id, evaluation) pairs so far.
struct PlanningContext {
    std::vector<double> task_summary_features;
    std::vector<double> target_semantics_features;
    std::vector<double> tool_library_digest;
    std::vector<std::pair<std::string, double>> history;
};

/// Winner/loser pair over one step's candidate set. The full candidate set is
/// kept because the policy's probabilities are a softmax over exactly that
/// set.
struct PreferencePair {
    std::vector<SubtaskCandidate> candidates;
    std::size_t winner_index = 0;
    std::size_t loser_index = 0;
    double winner_e = 0.0;
    double loser_e = 0.0;
    PlanningContext context;

    const SubtaskCandidate& winner() const { return candidates[winner_index]; }
    const SubtaskCandidate& loser() const { return candidates[loser_index]; }
};

/// Linear softmax policy over a step's candidate set: logit(c) = theta .
/// features(c), p(c) = softmax over the set. Keeps a frozen copy of the
/// initial parameters as the reference policy for log-ratio regularization.
class PlannerPolicy {
public:
    PlannerPolicy(std::vector<double> theta, double alpha);
    static PlannerPolicy from_parts(std::vector<double> theta, std::vector<double> ref_theta,
                                    double alpha);

    std::size_t feature_dim() const { return theta_.size(); }
    double alpha() const { return alpha_; }
    std::span<const double> theta() const { return theta_; }
    std::span<const double> ref_theta() const { return ref_theta_; }

    /// Log-softmax over the candidate set under the current parameters.
    std::vector<double> log_probs(std::span<const SubtaskCandidate> candidates) const;
    /// Log-softmax under the frozen reference parameters.
    std::vector<double> ref_log_probs(std::span<const SubtaskCandidate> candidates) const;
    std::size_t argmax(std::span<const SubtaskCandidate> candidates) const;

    /// New policy with updated parameters; the reference copy is carried over.
    PlannerPolicy with_theta(std::vector<double> theta) const;

    // Checkpoint schema: { "theta": [...], "ref_theta": [...], "alpha": a, "F": n }
    nlohmann::ordered_json to_checkpoint() const;
    static PlannerPolicy from_checkpoint(const nlohmann::json& doc);

private:
    std::vector<double> theta_;
    std::vector<double> ref_theta_;
    double alpha_;
};

/// Picks winner (argmax e, first occurrence) and loser (argmin e, last
/// occurrence). Returns nullopt when every evaluation ties (no preference
/// signal). Throws ArityMismatch when evaluations do not align.
std::optional<PreferencePair> make_pair(std::vector<SubtaskCandidate> candidates,
                                        const std::vector<StepEvaluation>& evaluations,
                                        PlanningContext context);

/// Implicit reward margin r_w - r_l where r_x = log p_theta(x) - log p_ref(x).
double pair_margin(const PreferencePair& pair, const PlannerPolicy& policy);

/// Preference loss -log sigmoid(alpha * (r_w - r_l)). Equals ln 2 exactly at
/// theta == ref_theta, and is positive and finite for finite logits.
double loss(const PreferencePair& pair, const PlannerPolicy& policy);

/// Analytic gradient of loss() w.r.t. theta.
std::vector<double> grad(const PreferencePair& pair, const PlannerPolicy& policy);

/// Mean gradient over a batch. Per-pair gradients are evaluated in parallel
/// into fixed slots and reduced serially in index order, so the result does
/// not depend on thread count.
std::vector<double> mean_gradient(std::span<const PreferencePair> pairs,
                                  const PlannerPolicy& policy, int jobs = 1);
/// Plain serial loop kept as the reference path for the parallel kernel.
std::vector<double> mean_gradient_serial(std::span<const PreferencePair> pairs,
                                         const PlannerPolicy& policy);

/// One descent step: theta' = theta - lr * mean gradient. Reference
/// parameters are never touched.
PlannerPolicy train_step(std::span<const PreferencePair> pairs, const PlannerPolicy& policy,
                         double lr, int jobs = 1);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Bounded store of successful subtask sequences keyed by task features.
/// When full, the entry with the lowest final evaluation is evicted first.
class MemoryStore {
public:
    struct Entry {
        std::vector<double> key;
        std::vector<SubtaskCandidate> sequence;
        double final_e = 0.0;
    };

    explicit MemoryStore(std::size_t capacity) : capacity_(capacity) {}

    void store(Entry entry);
    /// Indices of the most similar entries by cosine(query, key), best first;
    /// ties by insertion order.
    std::vector<std::size_t> most_similar(std::span<const double> query, std::size_t count) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<Entry>& entries() const { return entries_; }

    nlohmann::ordered_json to_json() const;
    static MemoryStore from_json(const nlohmann::json& doc);

private:
    std::vector<Entry> entries_;
    std::size_t capacity_;
};

struct MixResult {
    std::vector<SubtaskCandidate> candidates; // memory-sourced first
    std::size_t memory_count = 0;
    /// True when fewer memory candidates were available than beta*k asked for.
    bool memory_shortfall = false;
};

using CandidateSampler = std::function<SubtaskCandidate(SeededRng&)>;

/// Exploration-exploitation candidate mixing: round(beta*k) candidates drawn
/// (without replacement) from the 5 memory entries most similar to the
/// context, the rest freshly sampled. Retrieved entries contribute the
/// sequence element matching the current step (clamped to sequence length).
MixResult mix_candidates(std::size_t k, double beta, const PlanningContext& context,
                         const MemoryStore& memory, SeededRng& rng,
                         const CandidateSampler& sample_random);

} // namespace perfguard
