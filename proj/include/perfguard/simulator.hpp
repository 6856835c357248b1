#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfguard/apu.hpp"
#include "perfguard/capo.hpp"
#include "perfguard/decision_estimator.hpp"
#include "perfguard/pasm.hpp"
#include "perfguard/rng.hpp"

namespace perfguard {

/// Ground-truth tool: a latent capability vector (hidden from the scheduler)
/// plus a Gaussian execution-noise level. description_appeal is how good the
/// tool's blurb sounds, deliberately decoupled from true capability.
struct SimulatedTool {
    ToolId id;
    std::vector<double> true_caps;
    double noise_sigma = 0.0;
    std::string description;
    double description_appeal = 0.0;
};

struct SimulatedTask {
    PreferenceWeights weights;
    EvaluationGoals goals;
    int steps = 1;
};

struct ExecutionOutcome {
    ToolId tool;
    double quality = 0.0;                // clamp(weights . true_caps + noise, 0, 1)
    std::vector<double> per_goal_scores; // quality perturbed per goal, clamped
};

/// Stochastic execution of one tool on one task. Deterministic given the rng
/// state; per-goal scores use independent noise draws at the tool's sigma.
ExecutionOutcome execute(const SimulatedTool& tool, const SimulatedTask& task, SeededRng& rng);

/// Noiseless best tool: argmax of weights . true_caps, ties to the lower
/// index. The span order defines the registry order.
ToolId oracle_best(const SimulatedTask& task, std::span<const SimulatedTool> tools);

enum class SpecialistAssignment {
    round_robin, // tool j's first specialty is dim j mod d: full coverage, twins on wrap
    random,      // specialties drawn at random: collisions and coverage gaps arise naturally
};

struct EcosystemParams {
    std::size_t specialist_dims = 2; // dims per tool drawn from the strong band
    SpecialistAssignment assignment = SpecialistAssignment::random;
    double weak_lo = 0.15;
    double weak_hi = 0.50;
    double strong_lo = 0.75;
    double strong_hi = 1.0;
    // Per-tool global scale; a spread below 1 makes some tools broadly
    // stronger, concentrating which tools are task-best.
    double tool_scale_lo = 0.70;
    double tool_scale_hi = 1.0;
    // When false, specialty dims are drawn from the strong band unscaled, so
    // directly competing specialists stay within the band's margin of each
    // other regardless of general tool quality.
    bool scale_specialties = true;
};

/// Synthetic tool registry with latent capabilities. Generated capability
/// rows are max-normalized (each dimension has max 1 across tools) so that a
/// scheduler holding the exact matrix agrees with the noiseless oracle on
/// every task.
class ToolEcosystem {
public:
    static ToolEcosystem generate(DimensionSet dims, std::size_t tool_count, double noise_sigma,
                                  const EcosystemParams& params, SeededRng& rng);

    const DimensionSet& dims() const { return dims_; }
    const std::vector<SimulatedTool>& tools() const { return tools_; }
    std::size_t tool_count() const { return tools_.size(); }
    std::size_t index_of(const ToolId& id) const; // throws UnknownTool

    /// The true capability matrix, as a registry the scheduler could load.
    PerformanceMatrix exact_matrix() const;

    ExecutionOutcome execute_tool(const ToolId& id, const SimulatedTask& task,
                                  SeededRng& rng) const;

    /// Observed ranking of the candidate set by execution quality, descending;
    /// ties broken by registry order. One outcome per candidate, aligned with
    /// candidates.all().
    Ranking oracle_ranking(const CandidateSet& candidates, const SimulatedTask& task,
                           const std::vector<ExecutionOutcome>& outcomes) const;

    ToolId best_tool(const SimulatedTask& task) const;

private:
    DimensionSet dims_;
    std::vector<SimulatedTool> tools_;
};

enum class CorruptionMode { exact, permuted, uniform_random, mean_initialized };

std::string_view to_string(CorruptionMode mode);
CorruptionMode corruption_mode_from_string(std::string_view name);

/// Initial-matrix corruption. permuted: a random cycle over
/// ceil(fraction * l) columns (>= 2), so every selected column is displaced.
/// uniform_random: every entry redrawn from U[0,1]. mean_initialized: every
/// column replaced by the column mean.
PerformanceMatrix corrupt_matrix(const PerformanceMatrix& truth, CorruptionMode mode,
                                 double fraction, SeededRng& rng);

/// Hidden linear value model for synthetic subtask candidates: candidate
/// quality is an affine function of features along a latent unit direction,
/// squashed into [0,1]. Drives closed-loop planner training.
class PlanningSimulator {
public:
    static PlanningSimulator generate(std::size_t feature_dim, SeededRng& rng);

    std::size_t feature_dim() const { return value_direction_.size(); }
    SubtaskCandidate sample_candidate(SeededRng& rng) const;
    /// Noiseless candidate quality in [0,1].
    double true_quality(const SubtaskCandidate& candidate) const;
    /// Local + global goal scores: true quality perturbed per goal.
    std::vector<double> goal_scores(const SubtaskCandidate& candidate,
                                    const EvaluationGoals& goals, double goal_noise,
                                    SeededRng& rng) const;
    PlanningContext sample_context(SeededRng& rng) const;

private:
    std::vector<double> value_direction_; // unit norm
};

struct CorruptionConfig {
    CorruptionMode mode = CorruptionMode::permuted;
    double fraction = 1.0;
};

struct TaskDistributionConfig {
    double dirichlet_alpha = 1.0;
    /// Optional per-dimension concentration multipliers (empty = symmetric).
    /// Lets a scenario emphasize commonly requested dimensions.
    std::vector<double> dimension_emphasis;
    std::size_t local_goals = 2;
    double goal_noise = 0.05;
};

struct SeedConfig {
    std::uint64_t base = 1;
    std::size_t count = 10;
};

struct DescriptionProxyConfig {
    double appeal_mix = 0.3; // share of the prior taken from description appeal
    double sigma = 0.10;     // per-selection noise
};

struct CapoConfig {
    std::size_t k = 5;
    double beta = 0.4;
    double alpha = 1.0;
    std::size_t feature_dim = 6;
    double lr = 0.1;
    std::size_t memory_capacity = 64;
    std::size_t task_length = 6; // steps per task trajectory
    long train_steps = 1000;
    long eval_steps = 200;
};

/// Full closed-loop scenario description; serializable to/from JSON.
struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t tool_count = 8;
    std::size_t dim_count = 7;
    DimensionCategory category = DimensionCategory::custom;
    double noise_sigma = 0.05;
    CorruptionConfig corruption;
    TaskDistributionConfig task;
    long steps = 800;
    SeedConfig seeds;
    UpdateConfig update;
    EcosystemParams ecosystem;
    DescriptionProxyConfig description_proxy;
    CapoConfig capo;

    DimensionSet dimension_set() const;
    void validate() const; // throws InvalidSpec

    static ScenarioConfig from_json(const nlohmann::json& doc);
    nlohmann::ordered_json to_json() const;
    static ScenarioConfig load(const std::filesystem::path& path);
};

/// Task sampler for a scenario: preference weights from a symmetric Dirichlet,
/// fixed goal weights (equal local shares, global 0.5).
SimulatedTask sample_task(const ScenarioConfig& config, const DimensionSet& dims, SeededRng& rng);

} // namespace perfguard
