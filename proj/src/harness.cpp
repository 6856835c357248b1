#include "perfguard/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "perfguard/text.hpp"

namespace perfguard {

namespace {

// Named sub-streams of a trial seed. Strategy-independent streams (ecosystem,
// corruption, tasks) let strategies compared at one seed face the same world.
enum Stream : std::uint64_t {
    stream_ecosystem = 1,
    stream_corruption = 2,
    stream_tasks = 3,
    stream_execution = 4,
    stream_explore = 5,
    stream_strategy = 6,
    stream_capo_world = 7,
    stream_policy_init = 8,
    stream_capo_step = 9,
    stream_heldout = 10,
};

SeededRng stream_rng(std::uint64_t seed, Stream stream) {
    return SeededRng(mix_seed(seed, static_cast<std::uint64_t>(stream)));
}

SeededRng step_rng(std::uint64_t seed, Stream stream, long step) {
    return SeededRng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(stream)),
                              static_cast<std::uint64_t>(step)));
}

std::vector<double> trailing_ma(const std::vector<std::uint8_t>& errors, std::size_t window) {
    std::vector<double> out(errors.size());
    double running = 0.0;
    for (std::size_t t = 0; t < errors.size(); ++t) {
        running += errors[t];
        if (t >= window) running -= errors[t - window];
        out[t] = running / static_cast<double>(std::min(window, t + 1));
    }
    return out;
}

void finish_series(TrialSeries& series) {
    series.ma50 = trailing_ma(series.errors, 50);
    const std::size_t n = series.errors.size();
    const std::size_t tail = std::min<std::size_t>(200, n);
    double sum_tail = 0.0;
    for (std::size_t t = n - tail; t < n; ++t) sum_tail += series.errors[t];
    series.final_error = tail > 0 ? sum_tail / static_cast<double>(tail) : 0.0;
    series.auc = std::accumulate(series.errors.begin(), series.errors.end(), 0.0);
}

bool updates_matrix(Strategy strategy) {
    return strategy == Strategy::apu || strategy == Strategy::apu_plus_capo;
}

EvaluationGoals make_goals(std::size_t local_goals) {
    std::vector<GoalWeight> local;
    double global_weight = 1.0;
    if (local_goals > 0) {
        global_weight = 0.5;
        const double share = 0.5 / static_cast<double>(local_goals);
        for (std::size_t i = 0; i < local_goals; ++i)
            local.push_back(GoalWeight{"local_" + std::to_string(i), share});
    }
    return EvaluationGoals::checked(std::move(local), GoalWeight{"global", global_weight});
}

} // namespace

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::static_matrix: return "static_matrix";
    case Strategy::apu: return "apu";
    case Strategy::apu_plus_capo: return "apu_plus_capo";
    case Strategy::random_baseline: return "random_baseline";
    case Strategy::description_proxy: return "description_proxy";
    }
    return "apu";
}

Strategy strategy_from_string(std::string_view name) {
    if (name == "static_matrix") return Strategy::static_matrix;
    if (name == "apu") return Strategy::apu;
    if (name == "apu_plus_capo") return Strategy::apu_plus_capo;
    if (name == "random_baseline") return Strategy::random_baseline;
    if (name == "description_proxy") return Strategy::description_proxy;
    throw InvalidSpec("unknown strategy: " + std::string(name));
}

void ExperimentSpec::validate() const {
    if (name.empty()) throw InvalidSpec("experiment needs a name");
    if (repeats < 1) throw InvalidSpec("experiment needs repeats >= 1");
    scenario.validate();
}

TrialSeries run_trial(const ScenarioConfig& scenario, Strategy strategy, std::uint64_t seed,
                      bool keep_trace) {
    const DimensionSet dims = scenario.dimension_set();
    auto eco_rng = stream_rng(seed, stream_ecosystem);
    const ToolEcosystem eco = ToolEcosystem::generate(dims, scenario.tool_count,
                                                      scenario.noise_sigma, scenario.ecosystem,
                                                      eco_rng);
    const PerformanceMatrix truth = eco.exact_matrix();
    auto corrupt_rng = stream_rng(seed, stream_corruption);
    PerformanceMatrix matrix = corrupt_matrix(truth, scenario.corruption.mode,
                                              scenario.corruption.fraction, corrupt_rng);

    // description prior: how the tool library reads on paper, mixed from
    // blurb appeal and overall capability, fixed for the whole trial
    std::vector<double> description_prior(eco.tool_count(), 0.0);
    if (strategy == Strategy::description_proxy) {
        const double mix = scenario.description_proxy.appeal_mix;
        for (std::size_t j = 0; j < eco.tool_count(); ++j) {
            double overall = 0.0;
            for (double v : eco.tools()[j].true_caps) overall += v;
            overall /= static_cast<double>(dims.size());
            description_prior[j] = mix * eco.tools()[j].description_appeal +
                                   (1.0 - mix) * overall;
        }
    }

    auto task_rng = stream_rng(seed, stream_tasks);
    auto exec_rng = stream_rng(seed, stream_execution);
    auto explore_rng = stream_rng(seed, stream_explore);
    auto strategy_rng = stream_rng(seed, stream_strategy);

    UpdateConfig update = scenario.update;
    update.rng_seed = mix_seed(seed, stream_explore);

    TrialSeries series;
    series.seed = seed;
    series.errors.reserve(scenario.steps);

    for (long step = 0; step < scenario.steps; ++step) {
        const SimulatedTask task = sample_task(scenario, dims, task_rng);
        const ToolId best = eco.best_tool(task);

        ToolId selected;
        SuitabilityScores scores;
        switch (strategy) {
        case Strategy::random_baseline:
            selected = eco.tools()[strategy_rng.below(eco.tool_count())].id;
            break;
        case Strategy::description_proxy: {
            std::size_t pick = 0;
            double best_prior = -1e300;
            for (std::size_t j = 0; j < eco.tool_count(); ++j) {
                const double v = description_prior[j] +
                                 strategy_rng.normal(0.0, scenario.description_proxy.sigma);
                if (v > best_prior) { best_prior = v; pick = j; }
            }
            selected = eco.tools()[pick].id;
            break;
        }
        case Strategy::static_matrix:
        case Strategy::apu:
        case Strategy::apu_plus_capo:
            scores = score(task.weights, matrix);
            selected = rank(scores).best();
            break;
        }
        const bool error = selected != best;
        series.errors.push_back(error ? 1 : 0);

        if (updates_matrix(strategy)) {
            const CandidateSet candidates = select_candidates(scores, update, explore_rng);
            std::vector<ExecutionOutcome> outcomes;
            outcomes.reserve(candidates.size());
            for (const auto& id : candidates.all())
                outcomes.push_back(eco.execute_tool(id, task, exec_rng));
            const Ranking theory = theory_ranking(scores, candidates);
            const Ranking actual = eco.oracle_ranking(candidates, task, outcomes);
            const DirectionCoefficient delta = direction(theory, actual);
            matrix = apply_update(matrix, task.weights, delta, update);

            if (keep_trace) {
                UpdateTraceRecord record;
                record.step = step + 1;
                record.candidates = candidates.all();
                record.theory = theory.ordered();
                record.actual = actual.ordered();
                record.delta = delta.per_tool;
                record.eta = update.eta;
                record.selected_tool = selected;
                record.oracle_best = best;
                record.error_flag = error;
                series.trace.push_back(std::move(record));
            }
        }
    }
    finish_series(series);

    if (strategy == Strategy::apu_plus_capo) {
        const auto capo = train_capo(scenario, seed);
        series.loss_curve = capo.loss_curve;
    }
    return series;
}

namespace {

ExperimentResult aggregate(const ExperimentSpec& spec, std::vector<TrialSeries> trials) {
    ExperimentResult result;
    result.name = spec.name;
    result.strategy = spec.strategy;
    result.steps = spec.scenario.steps;
    result.trials = std::move(trials);

    result.mean_error_per_step.assign(spec.scenario.steps, 0.0);
    for (const auto& trial : result.trials)
        for (long t = 0; t < spec.scenario.steps; ++t)
            result.mean_error_per_step[t] += trial.errors[t];
    for (auto& v : result.mean_error_per_step) v /= static_cast<double>(result.trials.size());

    double final_sum = 0.0, auc_sum = 0.0;
    for (const auto& trial : result.trials) {
        final_sum += trial.final_error;
        auc_sum += trial.auc;
    }
    result.final_error = final_sum / static_cast<double>(result.trials.size());
    result.auc = auc_sum / static_cast<double>(result.trials.size());

    nlohmann::ordered_json fingerprint;
    fingerprint["name"] = spec.name;
    fingerprint["strategy"] = std::string(to_string(spec.strategy));
    fingerprint["repeats"] = spec.repeats;
    fingerprint["scenario"] = spec.scenario.to_json();
    result.config_hash = config_hash(fingerprint);
    return result;
}

} // namespace

ExperimentResult run_experiment_serial(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<TrialSeries> trials(spec.repeats);
    for (int r = 0; r < spec.repeats; ++r)
        trials[r] = run_trial(spec.scenario, spec.strategy, spec.scenario.seeds.base + r,
                              spec.write_trace);
    return aggregate(spec, std::move(trials));
}

ExperimentResult run_experiment(const ExperimentSpec& spec, int jobs) {
    if (jobs <= 1) return run_experiment_serial(spec);
    spec.validate();
    // trials land in fixed slots; aggregation below runs in seed order, so
    // results are byte-identical to the serial path at any thread count
    std::vector<TrialSeries> trials(spec.repeats);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
#endif
    for (int r = 0; r < spec.repeats; ++r)
        trials[r] = run_trial(spec.scenario, spec.strategy, spec.scenario.seeds.base + r,
                              spec.write_trace);
    return aggregate(spec, std::move(trials));
}

void write_series_csv(const ExperimentResult& result, std::ostream& out) {
    out << "step,strategy,seed,error,ma50_error\n";
    for (const auto& trial : result.trials) {
        for (std::size_t t = 0; t < trial.errors.size(); ++t) {
            out << (t + 1) << ',' << to_string(result.strategy) << ',' << trial.seed << ','
                << static_cast<int>(trial.errors[t]) << ',' << format_double(trial.ma50[t])
                << '\n';
        }
    }
}

nlohmann::ordered_json summary_json(const ExperimentResult& result) {
    nlohmann::ordered_json doc;
    doc["name"] = result.name;
    doc["strategy"] = std::string(to_string(result.strategy));
    doc["final_error"] = result.final_error;
    doc["auc"] = result.auc;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (const auto& trial : result.trials) seeds.push_back(trial.seed);
    doc["seeds"] = std::move(seeds);
    doc["config_hash"] = result.config_hash;
    return doc;
}

void write_experiment_files(const ExperimentSpec& spec, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir = spec.output_dir;
    if (!fs::exists(dir)) {
        const fs::path parent = dir.parent_path();
        if (!parent.empty() && !fs::exists(parent))
            throw InvalidSpec("output directory parent does not exist: " + parent.string());
        std::error_code ec;
        fs::create_directory(dir, ec);
        if (ec) throw IoError("cannot create output directory: " + dir.string());
    }

    std::ofstream csv(dir / (spec.name + ".csv"), std::ios::binary);
    if (!csv) throw IoError("cannot write series CSV for " + spec.name);
    write_series_csv(result, csv);

    std::ofstream summary(dir / (spec.name + "_summary.json"), std::ios::binary);
    if (!summary) throw IoError("cannot write summary for " + spec.name);
    summary << summary_json(result).dump(2) << '\n';

    if (spec.write_trace && updates_matrix(spec.strategy)) {
        std::ofstream trace(dir / (spec.name + "_trace.jsonl"), std::ios::binary);
        if (!trace) throw IoError("cannot write trace for " + spec.name);
        for (const auto& trial : result.trials)
            for (const auto& record : trial.trace) write_trace_line(trace, record);
    }
}

ComparisonTable compare(const std::vector<ExperimentResult>& results) {
    if (results.empty()) throw InvalidSpec("nothing to compare");
    for (const auto& r : results) {
        if (r.steps != results.front().steps)
            throw ShapeMismatch("experiments have different step counts");
        if (r.trials.size() != results.front().trials.size())
            throw ShapeMismatch("experiments have different seed counts");
    }
    ComparisonTable table;
    for (const auto& r : results)
        table.rows.push_back(ComparisonRow{r.name, r.strategy, r.final_error, r.auc});
    const std::size_t n = results.size();
    const std::size_t seeds = results.front().trials.size();
    table.wins.assign(n, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t s = 0; s < seeds; ++s)
                if (results[i].trials[s].final_error < results[j].trials[s].final_error)
                    ++table.wins[i][j];
    return table;
}

nlohmann::ordered_json comparison_json(const ComparisonTable& table) {
    nlohmann::ordered_json doc;
    doc["runs"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json r;
        r["name"] = row.name;
        r["strategy"] = std::string(to_string(row.strategy));
        r["final_error"] = row.final_error;
        r["auc"] = row.auc;
        doc["runs"].push_back(std::move(r));
    }
    doc["wins"] = table.wins;
    return doc;
}

ScenarioConfig apply_overrides(const ScenarioConfig& scenario, const nlohmann::json& overrides) {
    ScenarioConfig out = scenario;
    if (overrides.is_null()) return out;
    if (!overrides.is_object()) throw InvalidSpec("run overrides must be a JSON object");
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        const std::string& key = it.key();
        if (key == "eta") out.update.eta = it->get<double>();
        else if (key == "m") out.update.top_m = it->get<int>();
        else if (key == "n") out.update.random_n = it->get<int>();
        else if (key == "steps") out.steps = it->get<long>();
        else if (key == "noise_sigma") out.noise_sigma = it->get<double>();
        else if (key == "corruption_mode")
            out.corruption.mode = corruption_mode_from_string(it->get<std::string>());
        else if (key == "corruption_fraction") out.corruption.fraction = it->get<double>();
        else throw InvalidSpec("unknown override key: " + key);
    }
    out.validate();
    return out;
}

ExperimentFile ExperimentFile::from_json(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ParseError("experiment file must be a JSON object");
    for (const char* key : {"name", "output_dir", "scenario", "runs"}) {
        if (!doc.contains(key))
            throw InvalidSpec(std::string("experiment file is missing '") + key + "'");
    }
    ExperimentFile file;
    file.name = doc["name"].get<std::string>();
    std::filesystem::path out_dir = doc["output_dir"].get<std::string>();
    file.output_dir = out_dir.is_absolute() ? out_dir : base_dir / out_dir;
    file.scenario = ScenarioConfig::from_json(doc["scenario"]);
    file.repeats = doc.value("repeats", static_cast<int>(file.scenario.seeds.count));
    file.write_trace = doc.value("write_trace", false);
    if (!doc["runs"].is_array() || doc["runs"].empty())
        throw InvalidSpec("experiment file needs a non-empty 'runs' array");
    for (const auto& entry : doc["runs"]) {
        RunSpec run;
        run.name = entry.at("name").get<std::string>();
        run.strategy = strategy_from_string(entry.at("strategy").get<std::string>());
        if (entry.contains("overrides")) run.overrides = entry["overrides"];
        file.runs.push_back(std::move(run));
    }
    return file;
}

ExperimentFile ExperimentFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open experiment file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("experiment " + path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

ExperimentSpec ExperimentFile::materialize(const RunSpec& run) const {
    ExperimentSpec spec;
    spec.name = run.name;
    spec.scenario = apply_overrides(scenario, run.overrides);
    spec.strategy = run.strategy;
    spec.repeats = repeats;
    spec.output_dir = output_dir;
    spec.write_trace = write_trace;
    spec.validate();
    return spec;
}

std::string config_hash(const nlohmann::ordered_json& doc) {
    // FNV-1a over the canonical dump; collision resistance is not a goal,
    // only change detection
    const std::string text = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --- Closed-loop planner training -------------------------------------------

CapoTrainingResult train_capo(const ScenarioConfig& scenario, std::uint64_t seed,
                              std::optional<CapoTrainingState> resume) {
    scenario.validate();
    const CapoConfig& cc = scenario.capo;
    if (cc.k < 2)
        throw InvalidSpec("capo.k must be >= 2: a single candidate never yields a pair");

    auto world_rng = stream_rng(seed, stream_capo_world);
    const PlanningSimulator world = PlanningSimulator::generate(cc.feature_dim, world_rng);
    const EvaluationGoals goals = make_goals(scenario.task.local_goals);

    CapoTrainingState state = [&] {
        if (resume) return std::move(*resume);
        auto init_rng = stream_rng(seed, stream_policy_init);
        std::vector<double> theta(cc.feature_dim);
        for (auto& v : theta) v = init_rng.normal(0.0, 0.1);
        CapoTrainingState fresh;
        fresh.policy = PlannerPolicy(std::move(theta), cc.alpha);
        fresh.memory = MemoryStore(cc.memory_capacity);
        return fresh;
    }();

    CapoTrainingResult result;
    const long target = cc.train_steps;
    // bail-out bound in case evaluations tie on (nearly) every step
    const long max_steps = state.next_step + 4 * target + 64;

    while (result.pairs_consumed < target && state.next_step < max_steps) {
        const long step = state.next_step;
        const std::size_t t_in_task = static_cast<std::size_t>(step) % cc.task_length;
        auto rng = step_rng(seed, stream_capo_step, step);

        if (t_in_task == 0) {
            state.task_context = world.sample_context(rng);
            state.task_winners.clear();
            state.task_winner_evals.clear();
        }

        auto mix = mix_candidates(cc.k, cc.beta, state.task_context, state.memory, rng,
                                  [&](SeededRng& r) { return world.sample_candidate(r); });
        std::vector<StepEvaluation> evals;
        evals.reserve(mix.candidates.size());
        for (const auto& cand : mix.candidates)
            evals.push_back(evaluate(world.goal_scores(cand, goals, scenario.task.goal_noise, rng),
                                     goals, step));

        auto pair = make_pair(mix.candidates, evals, state.task_context);
        std::size_t winner_index = 0;
        for (std::size_t i = 1; i < evals.size(); ++i)
            if (evals[i].e > evals[winner_index].e) winner_index = i;

        if (pair) {
            result.loss_curve.push_back(loss(*pair, state.policy));
            result.margin_curve.push_back(pair_margin(*pair, state.policy));
            const PreferencePair batch[] = {*pair};
            state.policy = train_step(batch, state.policy, cc.lr);
            ++result.pairs_consumed;
        }

        state.task_context.history.emplace_back(mix.candidates[winner_index].id,
                                                evals[winner_index].e);
        state.task_winners.push_back(mix.candidates[winner_index]);
        state.task_winner_evals.push_back(evals[winner_index].e);

        if (t_in_task + 1 == cc.task_length) {
            double final_e = 0.0;
            for (double e : state.task_winner_evals) final_e += e;
            final_e /= static_cast<double>(state.task_winner_evals.size());
            state.memory.store(MemoryStore::Entry{state.task_context.task_summary_features,
                                                  state.task_winners, final_e});
            state.task_winners.clear();
            state.task_winner_evals.clear();
        }
        ++state.next_step;
    }

    const std::size_t window = std::min<std::size_t>(100, result.loss_curve.size());
    if (window > 0) {
        double sum = 0.0;
        for (std::size_t i = result.loss_curve.size() - window; i < result.loss_curve.size(); ++i)
            sum += result.loss_curve[i];
        result.final_window_loss = sum / static_cast<double>(window);
    }

    // held-out comparison: both parameter sets pick over the same fresh,
    // memory-free candidate sets; ground truth is the noiseless quality argmax
    long hits_trained = 0, hits_reference = 0;
    const PlannerPolicy reference =
        PlannerPolicy::from_parts({state.policy.ref_theta().begin(), state.policy.ref_theta().end()},
                                  {state.policy.ref_theta().begin(), state.policy.ref_theta().end()},
                                  state.policy.alpha());
    for (long i = 0; i < cc.eval_steps; ++i) {
        auto rng = step_rng(seed, stream_heldout, i);
        std::vector<SubtaskCandidate> candidates;
        candidates.reserve(cc.k);
        for (std::size_t c = 0; c < cc.k; ++c) candidates.push_back(world.sample_candidate(rng));
        std::size_t truth = 0;
        for (std::size_t c = 1; c < candidates.size(); ++c)
            if (world.true_quality(candidates[c]) > world.true_quality(candidates[truth]))
                truth = c;
        if (state.policy.argmax(candidates) == truth) ++hits_trained;
        if (reference.argmax(candidates) == truth) ++hits_reference;
    }
    if (cc.eval_steps > 0) {
        result.heldout_rate_trained = static_cast<double>(hits_trained) / cc.eval_steps;
        result.heldout_rate_reference = static_cast<double>(hits_reference) / cc.eval_steps;
    }

    result.state = std::move(state);
    return result;
}

nlohmann::ordered_json training_checkpoint(const ScenarioConfig& scenario, std::uint64_t seed,
                                           const CapoTrainingState& state) {
    nlohmann::ordered_json doc = state.policy.to_checkpoint();
    nlohmann::ordered_json training;
    training["seed"] = seed;
    training["scenario_hash"] = config_hash(scenario.to_json());
    training["next_step"] = state.next_step;
    training["memory"] = state.memory.to_json();
    nlohmann::ordered_json ctx;
    ctx["task_summary_features"] = state.task_context.task_summary_features;
    ctx["target_semantics_features"] = state.task_context.target_semantics_features;
    ctx["tool_library_digest"] = state.task_context.tool_library_digest;
    ctx["history"] = nlohmann::ordered_json::array();
    for (const auto& [id, e] : state.task_context.history)
        ctx["history"].push_back({{"id", id}, {"e", e}});
    training["task_context"] = std::move(ctx);
    training["task_winners"] = nlohmann::ordered_json::array();
    for (const auto& cand : state.task_winners) {
        training["task_winners"].push_back(
            {{"id", cand.id}, {"features", cand.features}});
    }
    training["task_winner_evals"] = state.task_winner_evals;
    doc["training"] = std::move(training);
    return doc;
}

CapoTrainingState state_from_checkpoint(const nlohmann::json& doc) {
    CapoTrainingState state;
    state.policy = PlannerPolicy::from_checkpoint(doc);
    if (!doc.contains("training"))
        throw ParseError("checkpoint has no training state to resume from");
    const auto& training = doc["training"];
    state.memory = MemoryStore::from_json(training.at("memory"));
    state.next_step = training.at("next_step").get<long>();
    const auto& ctx = training.at("task_context");
    state.task_context.task_summary_features =
        ctx.at("task_summary_features").get<std::vector<double>>();
    state.task_context.target_semantics_features =
        ctx.at("target_semantics_features").get<std::vector<double>>();
    state.task_context.tool_library_digest =
        ctx.at("tool_library_digest").get<std::vector<double>>();
    for (const auto& h : ctx.at("history"))
        state.task_context.history.emplace_back(h.at("id").get<std::string>(),
                                                h.at("e").get<double>());
    for (const auto& w : training.at("task_winners")) {
        SubtaskCandidate cand;
        cand.id = w.at("id").get<std::string>();
        cand.features = w.at("features").get<std::vector<double>>();
        state.task_winners.push_back(std::move(cand));
    }
    state.task_winner_evals = training.at("task_winner_evals").get<std::vector<double>>();
    return state;
}

} // namespace perfguard
