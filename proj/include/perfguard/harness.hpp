#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfguard/capo.hpp"
#include "perfguard/simulator.hpp"

namespace perfguard {

enum class Strategy {
    static_matrix,     // suitability scoring on the (possibly corrupted) initial matrix
    apu,               // scoring plus online rank-feedback updates
    apu_plus_capo,     // apu plus planner preference training on the side
    random_baseline,   // uniform random tool choice
    description_proxy, // noisy scalar description prior, ignores task dimensions
};

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view name);

struct ExperimentSpec {
    std::string name;
    ScenarioConfig scenario;
    Strategy strategy = Strategy::apu;
    int repeats = 10;
    std::filesystem::path output_dir;
    bool write_trace = false;

    void validate() const; // throws InvalidSpec
};

/// One seed's series. errors[t] is the selection-error flag at step t;
/// ma50[t] is the trailing 50-step moving average (shorter at the start).
struct TrialSeries {
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> errors;
    std::vector<double> ma50;
    double final_error = 0.0; // mean error over the last min(200, steps) steps
    double auc = 0.0;         // sum of error flags over all steps
    std::vector<double> loss_curve;         // per training step (capo strategies)
    std::vector<UpdateTraceRecord> trace;   // filled only when tracing
};

struct ExperimentResult {
    std::string name;
    Strategy strategy = Strategy::apu;
    long steps = 0;
    std::vector<TrialSeries> trials;           // one per seed, seed order
    std::vector<double> mean_error_per_step;   // across seeds
    double final_error = 0.0;                  // mean of per-trial final errors
    double auc = 0.0;                          // mean of per-trial AUCs
    std::string config_hash;
};

/// Runs one trial (one seed) of a strategy on a scenario. All randomness is
/// derived from the seed through named sub-streams, so strategies compared at
/// the same seed see the same ecosystem, corruption, and task sequence.
TrialSeries run_trial(const ScenarioConfig& scenario, Strategy strategy, std::uint64_t seed,
                      bool keep_trace = false);

/// Full experiment: repeats fan out across threads (jobs), per-trial series
/// land in fixed slots, and aggregation runs serially in seed order so output
/// bytes are independent of thread count.
ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs = 1);
/// Plain serial loop kept as the reference path for the parallel fan-out.
ExperimentResult run_experiment_serial(const ExperimentSpec& spec);

/// CSV schema: step,strategy,seed,error,ma50_error (one row per seed & step).
void write_series_csv(const ExperimentResult& result, std::ostream& out);
nlohmann::ordered_json summary_json(const ExperimentResult& result);

/// Writes <name>.csv, <name>_summary.json, and (when requested and the
/// strategy updates the matrix) <name>_trace.jsonl into spec.output_dir.
void write_experiment_files(const ExperimentSpec& spec, const ExperimentResult& result);

struct ComparisonRow {
    std::string name;
    Strategy strategy = Strategy::apu;
    double final_error = 0.0;
    double auc = 0.0;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    /// wins[i][j] = number of seeds where run i's final error is strictly
    /// lower than run j's.
    std::vector<std::vector<int>> wins;
};

/// Cross-strategy comparison; requires equal step counts and seed counts.
ComparisonTable compare(const std::vector<ExperimentResult>& results);
nlohmann::ordered_json comparison_json(const ComparisonTable& table);

/// One experiment file can define several runs over a shared scenario, each
/// with a few overridden scalar knobs (eta, m, n, steps, noise_sigma,
/// corruption_mode, corruption_fraction).
struct RunSpec {
    std::string name;
    Strategy strategy = Strategy::apu;
    nlohmann::json overrides; // object of known scalar keys
};

struct ExperimentFile {
    std::string name;
    std::filesystem::path output_dir;
    int repeats = 10;
    bool write_trace = false;
    ScenarioConfig scenario;
    std::vector<RunSpec> runs;

    static ExperimentFile load(const std::filesystem::path& path);
    static ExperimentFile from_json(const nlohmann::json& doc,
                                    const std::filesystem::path& base_dir);
    /// Materializes one run: applies overrides onto the shared scenario.
    ExperimentSpec materialize(const RunSpec& run) const;
};

ScenarioConfig apply_overrides(const ScenarioConfig& scenario, const nlohmann::json& overrides);

std::string config_hash(const nlohmann::ordered_json& doc);

// --- Closed-loop planner training -----------------------------------------

struct CapoTrainingState {
    PlannerPolicy policy{std::vector<double>{0.0}, 1.0};
    MemoryStore memory{0};
    long next_step = 0;
    // in-progress task trajectory, so checkpoints can land mid-task
    PlanningContext task_context;
    std::vector<SubtaskCandidate> task_winners;
    std::vector<double> task_winner_evals;
};

struct CapoTrainingResult {
    std::vector<double> loss_curve;   // loss of each consumed pair, pre-update
    std::vector<double> margin_curve; // r_w - r_l per pair
    long pairs_consumed = 0;
    CapoTrainingState state;          // resumable end-of-run state
    double final_window_loss = 0.0;   // mean over the last 100 pairs
    double heldout_rate_trained = 0.0;
    double heldout_rate_reference = 0.0;
};

/// Runs (or resumes) preference training against the scenario's synthetic
/// planning world. Step randomness is derived from (seed, step) counters, so
/// resuming from a checkpoint reproduces the uninterrupted run exactly.
CapoTrainingResult train_capo(const ScenarioConfig& scenario, std::uint64_t seed,
                              std::optional<CapoTrainingState> resume = std::nullopt);

/// Checkpoint with training state (policy + memory + step cursor).
nlohmann::ordered_json training_checkpoint(const ScenarioConfig& scenario, std::uint64_t seed,
                                           const CapoTrainingState& state);
CapoTrainingState state_from_checkpoint(const nlohmann::json& doc);

} // namespace perfguard
