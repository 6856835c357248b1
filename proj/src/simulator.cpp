#include "perfguard/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace perfguard {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double dot(std::span<const double> a, std::span<const double> b) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out += a[i] * b[i];
    return out;
}

std::string tool_name(std::size_t index) {
    std::string suffix = std::to_string(index);
    if (suffix.size() < 2) suffix.insert(suffix.begin(), '0');
    return "tool_" + suffix;
}

} // namespace

ExecutionOutcome execute(const SimulatedTool& tool, const SimulatedTask& task, SeededRng& rng) {
    if (tool.true_caps.size() != task.weights.w.size())
        throw DimensionMismatch("tool capability vector does not match task dimensions");
    const double base = dot(task.weights.w, tool.true_caps);
    ExecutionOutcome outcome;
    outcome.tool = tool.id;
    outcome.quality = clamp01(base + rng.normal(0.0, tool.noise_sigma));
    const std::size_t goal_count = task.goals.local_count() + 1;
    outcome.per_goal_scores.reserve(goal_count);
    for (std::size_t g = 0; g < goal_count; ++g)
        outcome.per_goal_scores.push_back(clamp01(outcome.quality +
                                                  rng.normal(0.0, tool.noise_sigma)));
    return outcome;
}

ToolId oracle_best(const SimulatedTask& task, std::span<const SimulatedTool> tools) {
    if (tools.empty()) throw ArityMismatch("oracle_best needs at least one tool");
    std::size_t best = 0;
    double best_value = dot(task.weights.w, tools[0].true_caps);
    for (std::size_t j = 1; j < tools.size(); ++j) {
        const double v = dot(task.weights.w, tools[j].true_caps);
        if (v > best_value) { // strict: ties stay at the lower registry index
            best = j;
            best_value = v;
        }
    }
    return tools[best].id;
}

ToolEcosystem ToolEcosystem::generate(DimensionSet dims, std::size_t tool_count,
                                      double noise_sigma, const EcosystemParams& params,
                                      SeededRng& rng) {
    if (tool_count == 0) throw InvalidSpec("ecosystem needs at least one tool");
    if (!(noise_sigma >= 0.0) || noise_sigma >= 0.5)
        throw InvalidSpec("noise_sigma must lie in [0, 0.5)");
    const std::size_t d = dims.size();

    ToolEcosystem eco;
    eco.dims_ = std::move(dims);
    std::vector<std::vector<double>> caps(tool_count, std::vector<double>(d));
    for (std::size_t j = 0; j < tool_count; ++j) {
        const double scale = rng.uniform(params.tool_scale_lo, params.tool_scale_hi);
        for (std::size_t i = 0; i < d; ++i)
            caps[j][i] = scale * rng.uniform(params.weak_lo, params.weak_hi);
        // Specialty dims are top tier by design. Round-robin assignment covers
        // every dimension and, once tools outnumber dimensions, wraps around
        // into directly competing specialists; random assignment leaves
        // coverage gaps and collisions the way an organically grown tool
        // library does.
        const std::size_t strong = std::min(params.specialist_dims, d);
        const double specialty_scale = params.scale_specialties ? scale : 1.0;
        auto strengthen = [&](std::size_t dim) {
            caps[j][dim] = specialty_scale * rng.uniform(params.strong_lo, params.strong_hi);
        };
        if (params.assignment == SpecialistAssignment::round_robin) {
            const std::size_t primary = j % d;
            strengthen(primary);
            if (strong > 1) {
                for (std::size_t pick : rng.pick_distinct(d - 1, strong - 1))
                    strengthen(pick >= primary ? pick + 1 : pick);
            }
        } else {
            for (std::size_t pick : rng.pick_distinct(d, strong)) strengthen(pick);
        }
    }
    // Max-normalize each dimension across tools. Keeps the latent matrix a
    // fixed point of normalize(), so a scheduler holding the exact matrix
    // ranks tools identically to the noiseless oracle.
    for (std::size_t i = 0; i < d; ++i) {
        double row_max = 0.0;
        for (std::size_t j = 0; j < tool_count; ++j) row_max = std::max(row_max, caps[j][i]);
        for (std::size_t j = 0; j < tool_count; ++j) caps[j][i] /= row_max;
    }

    eco.tools_.reserve(tool_count);
    for (std::size_t j = 0; j < tool_count; ++j) {
        SimulatedTool tool;
        tool.id.value = tool_name(j);
        tool.true_caps = std::move(caps[j]);
        tool.noise_sigma = noise_sigma;
        tool.description = "simulated tool " + tool.id.value;
        tool.description_appeal = rng.uniform01();
        eco.tools_.push_back(std::move(tool));
    }
    return eco;
}

std::size_t ToolEcosystem::index_of(const ToolId& id) const {
    for (std::size_t j = 0; j < tools_.size(); ++j)
        if (tools_[j].id == id) return j;
    throw UnknownTool("unknown tool id: " + id.value);
}

PerformanceMatrix ToolEcosystem::exact_matrix() const {
    const std::size_t d = dims_.size();
    const std::size_t l = tools_.size();
    std::vector<ToolInfo> infos;
    infos.reserve(l);
    std::vector<double> scores(d * l);
    for (std::size_t j = 0; j < l; ++j) {
        infos.push_back(ToolInfo{tools_[j].id, tools_[j].description});
        for (std::size_t i = 0; i < d; ++i) scores[i * l + j] = tools_[j].true_caps[i];
    }
    return PerformanceMatrix(dims_, std::move(infos), std::move(scores));
}

ExecutionOutcome ToolEcosystem::execute_tool(const ToolId& id, const SimulatedTask& task,
                                             SeededRng& rng) const {
    return execute(tools_[index_of(id)], task, rng);
}

Ranking ToolEcosystem::oracle_ranking(const CandidateSet& candidates, const SimulatedTask& task,
                                      const std::vector<ExecutionOutcome>& outcomes) const {
    (void)task;
    const auto member = candidates.all();
    if (member.size() != outcomes.size())
        throw ArityMismatch("need exactly one outcome per candidate");
    for (std::size_t i = 0; i < member.size(); ++i) {
        if (outcomes[i].tool != member[i])
            throw ArityMismatch("outcome " + std::to_string(i) +
                                " is not aligned with the candidate set");
    }
    std::vector<std::size_t> order(member.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (outcomes[a].quality != outcomes[b].quality)
            return outcomes[a].quality > outcomes[b].quality;
        return index_of(member[a]) < index_of(member[b]);
    });
    std::vector<ToolId> ordered;
    ordered.reserve(member.size());
    for (std::size_t idx : order) ordered.push_back(member[idx]);
    return Ranking(std::move(ordered));
}

ToolId ToolEcosystem::best_tool(const SimulatedTask& task) const {
    return oracle_best(task, tools_);
}

std::string_view to_string(CorruptionMode mode) {
    switch (mode) {
    case CorruptionMode::exact: return "exact";
    case CorruptionMode::permuted: return "permuted";
    case CorruptionMode::uniform_random: return "uniform-random";
    case CorruptionMode::mean_initialized: return "mean-initialized";
    }
    return "exact";
}

CorruptionMode corruption_mode_from_string(std::string_view name) {
    if (name == "exact") return CorruptionMode::exact;
    if (name == "permuted") return CorruptionMode::permuted;
    if (name == "uniform-random") return CorruptionMode::uniform_random;
    if (name == "mean-initialized") return CorruptionMode::mean_initialized;
    throw InvalidSpec("unknown corruption mode: " + std::string(name));
}

PerformanceMatrix corrupt_matrix(const PerformanceMatrix& truth, CorruptionMode mode,
                                 double fraction, SeededRng& rng) {
    const std::size_t d = truth.dim_count();
    const std::size_t l = truth.tool_count();
    std::vector<double> scores(truth.raw().begin(), truth.raw().end());

    switch (mode) {
    case CorruptionMode::exact:
        break;
    case CorruptionMode::permuted: {
        if (l < 2) throw InvalidSpec("permuted corruption needs at least two tools");
        if (!(fraction > 0.0) || fraction > 1.0)
            throw InvalidSpec("corruption fraction must lie in (0, 1]");
        std::size_t moved = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(l)));
        moved = std::clamp<std::size_t>(moved, 2, l);
        const auto selected = rng.pick_distinct(l, moved);
        // cyclic shift over the selected columns: every one of them ends up
        // holding a different tool's scores
        for (std::size_t i = 0; i < d; ++i) {
            std::vector<double> row(truth.raw().begin() + i * l,
                                    truth.raw().begin() + (i + 1) * l);
            for (std::size_t p = 0; p < moved; ++p)
                scores[i * l + selected[p]] = row[selected[(p + 1) % moved]];
        }
        break;
    }
    case CorruptionMode::uniform_random:
        for (double& v : scores) v = rng.uniform01();
        break;
    case CorruptionMode::mean_initialized:
        for (std::size_t i = 0; i < d; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < l; ++j) mean += truth.at(i, j);
            mean /= static_cast<double>(l);
            for (std::size_t j = 0; j < l; ++j) scores[i * l + j] = mean;
        }
        break;
    }
    return PerformanceMatrix(truth.dims(), truth.tools(), std::move(scores));
}

PlanningSimulator PlanningSimulator::generate(std::size_t feature_dim, SeededRng& rng) {
    if (feature_dim == 0) throw InvalidSpec("planning simulator needs feature_dim >= 1");
    PlanningSimulator sim;
    sim.value_direction_.resize(feature_dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (auto& v : sim.value_direction_) v = rng.normal();
        norm = std::sqrt(dot(sim.value_direction_, sim.value_direction_));
    }
    for (auto& v : sim.value_direction_) v /= norm;
    return sim;
}

SubtaskCandidate PlanningSimulator::sample_candidate(SeededRng& rng) const {
    SubtaskCandidate cand;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "c%016llx",
                  static_cast<unsigned long long>(rng.next_u64()));
    cand.id = buf;
    cand.features.resize(feature_dim());
    for (auto& v : cand.features) v = rng.uniform(-1.0, 1.0);
    cand.source = CandidateSource::random;
    return cand;
}

double PlanningSimulator::true_quality(const SubtaskCandidate& candidate) const {
    if (candidate.features.size() != feature_dim())
        throw DimensionMismatch("candidate feature length does not match the simulator");
    return clamp01(0.5 + 0.6 * dot(value_direction_, candidate.features));
}

std::vector<double> PlanningSimulator::goal_scores(const SubtaskCandidate& candidate,
                                                   const EvaluationGoals& goals,
                                                   double goal_noise, SeededRng& rng) const {
    const double q = true_quality(candidate);
    std::vector<double> scores(goals.local_count() + 1);
    for (auto& s : scores) s = clamp01(q + rng.normal(0.0, goal_noise));
    return scores;
}

PlanningContext PlanningSimulator::sample_context(SeededRng& rng) const {
    PlanningContext ctx;
    auto fill = [&](std::vector<double>& v) {
        v.resize(feature_dim());
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    };
    fill(ctx.task_summary_features);
    fill(ctx.target_semantics_features);
    fill(ctx.tool_library_digest);
    return ctx;
}

DimensionSet ScenarioConfig::dimension_set() const {
    if (category != DimensionCategory::custom) {
        if (dim_count != 7)
            throw InvalidSpec("generation/editing categories require exactly 7 dimensions");
        return category == DimensionCategory::generation ? DimensionSet::generation()
                                                         : DimensionSet::editing();
    }
    std::vector<std::string> names;
    names.reserve(dim_count);
    for (std::size_t i = 0; i < dim_count; ++i) names.push_back("dim_" + std::to_string(i));
    return DimensionSet::custom(std::move(names));
}

void ScenarioConfig::validate() const {
    if (tool_count < 1) throw InvalidSpec("scenario needs at least one tool");
    if (dim_count < 1) throw InvalidSpec("scenario needs at least one dimension");
    if (steps < 1) throw InvalidSpec("scenario needs steps >= 1");
    if (seeds.count < 1) throw InvalidSpec("scenario needs at least one seed");
    if (!(noise_sigma >= 0.0) || noise_sigma >= 0.5)
        throw InvalidSpec("noise_sigma must lie in [0, 0.5)");
    if (!(task.dirichlet_alpha > 0.0))
        throw InvalidSpec("dirichlet_alpha must be positive");
    if (!task.dimension_emphasis.empty()) {
        if (task.dimension_emphasis.size() != dim_count)
            throw InvalidSpec("dimension_emphasis length must match dim_count");
        for (double w : task.dimension_emphasis)
            if (!(w > 0.0)) throw InvalidSpec("dimension_emphasis entries must be positive");
    }
    if (capo.k < 1) throw InvalidSpec("capo.k must be >= 1");
    if (capo.beta < 0.0 || capo.beta > 1.0) throw InvalidSpec("capo.beta must lie in [0, 1]");
    if (!(capo.alpha > 0.0)) throw InvalidSpec("capo.alpha must be positive");
    if (capo.feature_dim < 1) throw InvalidSpec("capo.feature_dim must be >= 1");
    if (capo.task_length < 1) throw InvalidSpec("capo.task_length must be >= 1");
    update.validate();
    (void)dimension_set();
}

namespace {

void check_keys(const nlohmann::json& doc, std::initializer_list<const char*> known,
                const char* where) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* key : known)
            if (it.key() == key) { ok = true; break; }
        if (!ok)
            throw InvalidSpec(std::string("unknown key '") + it.key() + "' in " + where);
    }
}

} // namespace

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("scenario must be a JSON object");
    check_keys(doc,
               {"name", "tool_count", "dim_count", "category", "noise_sigma", "corruption",
                "task", "steps", "seeds", "update", "ecosystem", "description_proxy", "capo"},
               "scenario");
    ScenarioConfig cfg;
    cfg.name = doc.value("name", cfg.name);
    cfg.tool_count = doc.value("tool_count", cfg.tool_count);
    cfg.dim_count = doc.value("dim_count", cfg.dim_count);
    cfg.category = category_from_string(doc.value("category", std::string("custom")));
    cfg.noise_sigma = doc.value("noise_sigma", cfg.noise_sigma);
    cfg.steps = doc.value("steps", cfg.steps);
    if (doc.contains("corruption")) {
        const auto& c = doc["corruption"];
        check_keys(c, {"mode", "fraction"}, "corruption");
        cfg.corruption.mode =
            corruption_mode_from_string(c.value("mode", std::string("permuted")));
        cfg.corruption.fraction = c.value("fraction", cfg.corruption.fraction);
    }
    if (doc.contains("task")) {
        const auto& t = doc["task"];
        check_keys(t, {"dirichlet_alpha", "dimension_emphasis", "local_goals", "goal_noise"},
                   "task");
        cfg.task.dirichlet_alpha = t.value("dirichlet_alpha", cfg.task.dirichlet_alpha);
        if (t.contains("dimension_emphasis"))
            cfg.task.dimension_emphasis = t["dimension_emphasis"].get<std::vector<double>>();
        cfg.task.local_goals = t.value("local_goals", cfg.task.local_goals);
        cfg.task.goal_noise = t.value("goal_noise", cfg.task.goal_noise);
    }
    if (doc.contains("seeds")) {
        const auto& s = doc["seeds"];
        check_keys(s, {"base", "count"}, "seeds");
        cfg.seeds.base = s.value("base", cfg.seeds.base);
        cfg.seeds.count = s.value("count", cfg.seeds.count);
    }
    if (doc.contains("update")) {
        const auto& u = doc["update"];
        check_keys(u, {"m", "n", "eta", "renormalize_raw"}, "update");
        cfg.update.top_m = u.value("m", cfg.update.top_m);
        cfg.update.random_n = u.value("n", cfg.update.random_n);
        cfg.update.eta = u.value("eta", cfg.update.eta);
        cfg.update.renormalize_raw = u.value("renormalize_raw", cfg.update.renormalize_raw);
    }
    if (doc.contains("ecosystem")) {
        const auto& e = doc["ecosystem"];
        check_keys(e,
                   {"specialist_dims", "assignment", "weak_lo", "weak_hi", "strong_lo",
                    "strong_hi", "tool_scale_lo", "tool_scale_hi", "scale_specialties"},
                   "ecosystem");
        if (e.contains("assignment")) {
            const auto name = e["assignment"].get<std::string>();
            if (name == "round_robin")
                cfg.ecosystem.assignment = SpecialistAssignment::round_robin;
            else if (name == "random")
                cfg.ecosystem.assignment = SpecialistAssignment::random;
            else
                throw InvalidSpec("unknown specialist assignment: " + name);
        }
        cfg.ecosystem.specialist_dims = e.value("specialist_dims", cfg.ecosystem.specialist_dims);
        cfg.ecosystem.weak_lo = e.value("weak_lo", cfg.ecosystem.weak_lo);
        cfg.ecosystem.weak_hi = e.value("weak_hi", cfg.ecosystem.weak_hi);
        cfg.ecosystem.strong_lo = e.value("strong_lo", cfg.ecosystem.strong_lo);
        cfg.ecosystem.strong_hi = e.value("strong_hi", cfg.ecosystem.strong_hi);
        cfg.ecosystem.tool_scale_lo = e.value("tool_scale_lo", cfg.ecosystem.tool_scale_lo);
        cfg.ecosystem.tool_scale_hi = e.value("tool_scale_hi", cfg.ecosystem.tool_scale_hi);
        cfg.ecosystem.scale_specialties =
            e.value("scale_specialties", cfg.ecosystem.scale_specialties);
    }
    if (doc.contains("description_proxy")) {
        const auto& p = doc["description_proxy"];
        check_keys(p, {"appeal_mix", "sigma"}, "description_proxy");
        cfg.description_proxy.appeal_mix = p.value("appeal_mix", cfg.description_proxy.appeal_mix);
        cfg.description_proxy.sigma = p.value("sigma", cfg.description_proxy.sigma);
    }
    if (doc.contains("capo")) {
        const auto& c = doc["capo"];
        check_keys(c,
                   {"k", "beta", "alpha", "feature_dim", "lr", "memory_capacity", "task_length",
                    "train_steps", "eval_steps"},
                   "capo");
        cfg.capo.k = c.value("k", cfg.capo.k);
        cfg.capo.beta = c.value("beta", cfg.capo.beta);
        cfg.capo.alpha = c.value("alpha", cfg.capo.alpha);
        cfg.capo.feature_dim = c.value("feature_dim", cfg.capo.feature_dim);
        cfg.capo.lr = c.value("lr", cfg.capo.lr);
        cfg.capo.memory_capacity = c.value("memory_capacity", cfg.capo.memory_capacity);
        cfg.capo.task_length = c.value("task_length", cfg.capo.task_length);
        cfg.capo.train_steps = c.value("train_steps", cfg.capo.train_steps);
        cfg.capo.eval_steps = c.value("eval_steps", cfg.capo.eval_steps);
    }
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json ScenarioConfig::to_json() const {
    nlohmann::ordered_json doc;
    doc["name"] = name;
    doc["tool_count"] = tool_count;
    doc["dim_count"] = dim_count;
    doc["category"] = std::string(to_string(category));
    doc["noise_sigma"] = noise_sigma;
    doc["corruption"] = {{"mode", std::string(to_string(corruption.mode))},
                         {"fraction", corruption.fraction}};
    doc["task"] = {{"dirichlet_alpha", task.dirichlet_alpha},
                   {"dimension_emphasis", task.dimension_emphasis},
                   {"local_goals", task.local_goals},
                   {"goal_noise", task.goal_noise}};
    doc["steps"] = steps;
    doc["seeds"] = {{"base", seeds.base}, {"count", seeds.count}};
    doc["update"] = {{"m", update.top_m},
                     {"n", update.random_n},
                     {"eta", update.eta},
                     {"renormalize_raw", update.renormalize_raw}};
    doc["ecosystem"] = {{"specialist_dims", ecosystem.specialist_dims},
                        {"assignment",
                         ecosystem.assignment == SpecialistAssignment::round_robin
                             ? "round_robin"
                             : "random"},
                        {"weak_lo", ecosystem.weak_lo},
                        {"weak_hi", ecosystem.weak_hi},
                        {"strong_lo", ecosystem.strong_lo},
                        {"strong_hi", ecosystem.strong_hi},
                        {"tool_scale_lo", ecosystem.tool_scale_lo},
                        {"tool_scale_hi", ecosystem.tool_scale_hi},
                        {"scale_specialties", ecosystem.scale_specialties}};
    doc["description_proxy"] = {{"appeal_mix", description_proxy.appeal_mix},
                                {"sigma", description_proxy.sigma}};
    doc["capo"] = {{"k", capo.k},
                   {"beta", capo.beta},
                   {"alpha", capo.alpha},
                   {"feature_dim", capo.feature_dim},
                   {"lr", capo.lr},
                   {"memory_capacity", capo.memory_capacity},
                   {"task_length", capo.task_length},
                   {"train_steps", capo.train_steps},
                   {"eval_steps", capo.eval_steps}};
    return doc;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("scenario " + path.string() + ": " + e.what());
    }
    return from_json(doc);
}

SimulatedTask sample_task(const ScenarioConfig& config, const DimensionSet& dims,
                          SeededRng& rng) {
    std::vector<double> alpha(dims.size(), config.task.dirichlet_alpha);
    if (!config.task.dimension_emphasis.empty())
        for (std::size_t i = 0; i < alpha.size(); ++i)
            alpha[i] *= config.task.dimension_emphasis[i];
    auto w = rng.dirichlet(alpha);
    SimulatedTask task{PreferenceWeights::checked(dims, std::move(w)),
                       EvaluationGoals{}, 1};
    const std::size_t locals = config.task.local_goals;
    std::vector<GoalWeight> local;
    double global_weight = 1.0;
    if (locals > 0) {
        global_weight = 0.5;
        const double share = 0.5 / static_cast<double>(locals);
        for (std::size_t i = 0; i < locals; ++i)
            local.push_back(GoalWeight{"local_" + std::to_string(i), share});
    }
    task.goals = EvaluationGoals::checked(std::move(local), GoalWeight{"global", global_weight});
    return task;
}

} // namespace perfguard
