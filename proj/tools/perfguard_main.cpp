// Command-line front end: registry inspection, one-shot selection, a manual
// preference-update round, scripted experiments, and planner training.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "perfguard/harness.hpp"
#include "perfguard/text.hpp"

namespace fs = std::filesystem;
using namespace perfguard;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string format = "csv";
    int jobs = 0; // 0 = logical cores
};

int effective_jobs(const GlobalOptions& global) {
    if (global.jobs > 0) return global.jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::uint64_t env_default_seed() {
    if (const char* env = std::getenv("PERFGUARD_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw InvalidSpec("PERFGUARD_SEED is not an unsigned integer");
        }
    }
    return 0;
}

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(fs::path(path)))
        throw InvalidSpec(std::string(what) + " does not exist: " + path);
}

std::vector<double> parse_weight_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParseError("weight list entry is not a number: " + item);
        }
    }
    if (out.empty()) throw ParseError("weight list is empty");
    return out;
}

PreferenceWeights load_weights(const PerformanceMatrix& matrix, const std::string& inline_list,
                               const std::string& file) {
    if (!inline_list.empty() && !file.empty())
        throw InvalidSpec("give either --weights or --weights-file, not both");
    if (!inline_list.empty())
        return PreferenceWeights::checked(matrix.dims(), parse_weight_list(inline_list));
    if (!file.empty()) {
        require_file(file, "weights file");
        std::ifstream in(file);
        if (!in) throw IoError("cannot open weights file: " + file);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("weights file: ") + e.what());
        }
        if (doc.is_array())
            return PreferenceWeights::checked(matrix.dims(), doc.get<std::vector<double>>());
        if (doc.is_object() && doc.contains("weights"))
            return PreferenceWeights::checked(matrix.dims(),
                                              doc["weights"].get<std::vector<double>>());
        throw SchemaMismatch("weights file must be an array or {\"weights\": [...]}");
    }
    throw InvalidSpec("missing --weights or --weights-file");
}

std::vector<ToolId> parse_tool_list(const std::string& text) {
    std::vector<ToolId> out;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (!item.empty()) out.push_back(ToolId{item});
    }
    return out;
}

int cmd_select(const GlobalOptions& global, const std::string& registry_path,
               const std::string& weights_inline, const std::string& weights_file) {
    require_file(registry_path, "registry file");
    auto matrix = load_registry(registry_path);
    auto weights = load_weights(matrix, weights_inline, weights_file);
    auto scores = score(weights, matrix);
    auto ranking = rank(scores);

    if (global.format == "json") {
        nlohmann::ordered_json doc;
        nlohmann::ordered_json score_obj;
        for (std::size_t j = 0; j < scores.tools.size(); ++j)
            score_obj[scores.tools[j].value] = scores.s[j];
        doc["scores"] = std::move(score_obj);
        nlohmann::ordered_json order = nlohmann::ordered_json::array();
        for (const auto& id : ranking.ordered()) order.push_back(id.value);
        doc["ranking"] = std::move(order);
        std::cout << doc.dump(2) << '\n';
    } else {
        std::cout << "tool,score,rank\n";
        for (std::size_t j = 0; j < scores.tools.size(); ++j)
            std::cout << scores.tools[j].value << ',' << format_fixed6(scores.s[j]) << ','
                      << ranking.rank_of(scores.tools[j]) << '\n';
    }
    return 0;
}

int cmd_update_demo(const GlobalOptions& global, const std::string& registry_path,
                    const std::string& weights_inline, const std::string& weights_file,
                    const std::string& actual_list, const UpdateConfig& update) {
    update.validate();
    require_file(registry_path, "registry file");
    auto matrix = load_registry(registry_path);
    auto weights = load_weights(matrix, weights_inline, weights_file);
    auto scores = score(weights, matrix);

    SeededRng rng(global.seed);
    auto candidates = select_candidates(scores, update, rng);
    auto theory = theory_ranking(scores, candidates);

    auto actual_ids = parse_tool_list(actual_list);
    if (actual_ids.empty())
        throw InvalidSpec("--actual must list the observed ranking over the candidate set");
    auto actual = Ranking(actual_ids);
    auto delta = direction(theory, actual);
    auto updated = apply_update(matrix, weights, delta, update);

    if (global.format == "json") {
        nlohmann::ordered_json doc;
        auto ids = [](const std::vector<ToolId>& tools) {
            std::vector<std::string> out;
            for (const auto& t : tools) out.push_back(t.value);
            return out;
        };
        doc["candidates"] = ids(candidates.all());
        doc["theory_ranking"] = ids(theory.ordered());
        doc["actual_ranking"] = ids(actual.ordered());
        nlohmann::ordered_json delta_obj;
        for (const auto& [tool, value] : delta.per_tool) delta_obj[tool.value] = value;
        doc["delta"] = std::move(delta_obj);
        doc["eta"] = update.eta;
        nlohmann::ordered_json columns;
        for (const auto& [tool, value] : delta.per_tool)
            columns[tool.value] = updated.column(updated.require_index(tool));
        doc["updated_columns"] = std::move(columns);
        std::cout << doc.dump(2) << '\n';
    } else {
        auto join = [](const std::vector<ToolId>& tools) {
            std::string out;
            for (const auto& t : tools) {
                if (!out.empty()) out += '|';
                out += t.value;
            }
            return out;
        };
        std::cout << "candidates," << join(candidates.all()) << '\n';
        std::cout << "theory," << join(theory.ordered()) << '\n';
        std::cout << "actual," << join(actual.ordered()) << '\n';
        for (const auto& [tool, value] : delta.per_tool)
            std::cout << "delta," << tool.value << ',' << format_fixed6(value) << '\n';
        for (const auto& [tool, value] : delta.per_tool) {
            std::cout << "updated," << tool.value;
            for (double v : updated.column(updated.require_index(tool)))
                std::cout << ',' << format_fixed6(v);
            std::cout << '\n';
        }
    }
    return 0;
}

int cmd_experiment(const GlobalOptions& global, const std::string& spec_path) {
    require_file(spec_path, "experiment file");
    auto file = ExperimentFile::load(spec_path);
    if (global.seed_given) file.scenario.seeds.base = global.seed;
    const int jobs = effective_jobs(global);

    std::vector<ExperimentResult> results;
    for (const auto& run : file.runs) {
        auto spec = file.materialize(run);
        auto result = run_experiment(spec, jobs);
        write_experiment_files(spec, result);
        results.push_back(std::move(result));
    }

    std::cout << "run,strategy,final_error,auc,config_hash\n";
    for (const auto& r : results)
        std::cout << r.name << ',' << to_string(r.strategy) << ',' << format_fixed6(r.final_error)
                  << ',' << format_fixed6(r.auc) << ',' << r.config_hash << '\n';

    if (results.size() > 1) {
        auto table = compare(results);
        std::ofstream out(file.output_dir / "comparison.json", std::ios::binary);
        if (!out) throw IoError("cannot write comparison.json");
        out << comparison_json(table).dump(2) << '\n';
    }
    return 0;
}

int cmd_train_capo(const GlobalOptions& global, const std::string& scenario_path,
                   const std::string& resume_path, const std::string& out_dir_text,
                   long steps_override) {
    require_file(scenario_path, "scenario file");
    auto scenario = ScenarioConfig::load(scenario_path);
    if (steps_override > 0) scenario.capo.train_steps = steps_override;

    std::optional<CapoTrainingState> resume;
    std::uint64_t seed = global.seed;
    if (!resume_path.empty()) {
        require_file(resume_path, "checkpoint file");
        std::ifstream in(resume_path);
        if (!in) throw IoError("cannot open checkpoint: " + resume_path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("checkpoint: ") + e.what());
        }
        const auto& training = doc.at("training");
        const std::string expected = config_hash(scenario.to_json());
        if (training.at("scenario_hash").get<std::string>() != expected)
            throw InvalidSpec("checkpoint was created for a different scenario");
        if (!global.seed_given) seed = training.at("seed").get<std::uint64_t>();
        resume = state_from_checkpoint(doc);
    }

    auto result = train_capo(scenario, seed, std::move(resume));

    const fs::path out_dir = out_dir_text;
    if (!fs::exists(out_dir)) {
        const fs::path parent = out_dir.parent_path();
        if (!parent.empty() && !fs::exists(parent))
            throw InvalidSpec("output directory parent does not exist: " + parent.string());
        std::error_code ec;
        fs::create_directory(out_dir, ec);
        if (ec) throw IoError("cannot create output directory: " + out_dir.string());
    }

    {
        std::ofstream csv(out_dir / "loss_curve.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write loss_curve.csv");
        csv << "step,mean_loss,winner_margin,pair_count\n";
        for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
            csv << (i + 1) << ',' << format_double(result.loss_curve[i]) << ','
                << format_double(result.margin_curve[i]) << ",1\n";
    }
    {
        std::ofstream ckpt(out_dir / "checkpoint.json", std::ios::binary);
        if (!ckpt) throw IoError("cannot write checkpoint.json");
        ckpt << training_checkpoint(scenario, seed, result.state).dump(2) << '\n';
    }

    if (global.format == "json") {
        nlohmann::ordered_json doc;
        doc["pairs"] = result.pairs_consumed;
        doc["final_window_loss"] = result.final_window_loss;
        doc["heldout_rate_trained"] = result.heldout_rate_trained;
        doc["heldout_rate_reference"] = result.heldout_rate_reference;
        std::cout << doc.dump(2) << '\n';
    } else {
        std::cout << "pairs," << result.pairs_consumed << '\n'
                  << "final_window_loss," << format_fixed6(result.final_window_loss) << '\n'
                  << "heldout_rate_trained," << format_fixed6(result.heldout_rate_trained) << '\n'
                  << "heldout_rate_reference," << format_fixed6(result.heldout_rate_reference)
                  << '\n';
    }
    return 0;
}

int cmd_registry_show(const GlobalOptions& global, const std::string& registry_path) {
    require_file(registry_path, "registry file");
    auto matrix = load_registry(registry_path);
    if (global.format == "json") {
        std::cout << registry_to_json(matrix).dump(2) << '\n';
    } else {
        std::cout << "category," << to_string(matrix.dims().category) << '\n';
        std::cout << registry_to_csv(matrix);
    }
    return 0;
}

int cmd_registry_validate(const std::string& registry_path) {
    require_file(registry_path, "registry file");
    auto matrix = load_registry(registry_path);
    for (std::size_t row : matrix.degenerate_dims())
        std::cerr << "warning: dimension '" << matrix.dims().names[row]
                  << "' has no tool with a positive score\n";
    std::cout << "ok," << matrix.tool_count() << " tools," << matrix.dim_count()
              << " dimensions\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    GlobalOptions global;

    CLI::App app{"performance-aware tool selection and adaptive scheduling engine"};
    app.require_subcommand(1);
    auto* seed_opt = app.add_option("--seed", global.seed, "seed for all randomness");
    app.add_option("--format", global.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--jobs", global.jobs, "parallel trial workers (0 = logical cores)");

    std::string registry_path, weights_inline, weights_file, actual_list;
    std::string spec_path, scenario_path, resume_path, out_dir = "out";
    long steps_override = 0;
    UpdateConfig update;

    auto* select = app.add_subcommand("select", "score and rank tools for one preference vector");
    select->add_option("--registry", registry_path, "registry JSON file")->required();
    select->add_option("--weights", weights_inline, "comma-separated preference weights");
    select->add_option("--weights-file", weights_file, "JSON file with preference weights");

    auto* demo = app.add_subcommand("update-demo",
                                    "run one preference-update round and print the deltas");
    demo->add_option("--registry", registry_path, "registry JSON file")->required();
    demo->add_option("--weights", weights_inline, "comma-separated preference weights");
    demo->add_option("--weights-file", weights_file, "JSON file with preference weights");
    demo->add_option("--actual", actual_list,
                     "observed ranking over the candidate set, best first (comma-separated)")
        ->required();
    demo->add_option("--m", update.top_m, "exploit count");
    demo->add_option("--n", update.random_n, "explore count");
    demo->add_option("--eta", update.eta, "update step size");

    auto* experiment = app.add_subcommand("experiment", "run a scripted experiment file");
    experiment->add_option("spec", spec_path, "experiment JSON file")->required();

    auto* train = app.add_subcommand("train-capo", "train the planner policy on a scenario");
    train->add_option("scenario", scenario_path, "scenario JSON file")->required();
    train->add_option("--steps", steps_override, "preference pairs to consume");
    train->add_option("--resume", resume_path, "checkpoint JSON to resume from");
    train->add_option("--out", out_dir, "output directory");

    auto* registry = app.add_subcommand("registry", "registry file utilities");
    registry->require_subcommand(1);
    auto* show = registry->add_subcommand("show", "print a registry");
    show->add_option("path", registry_path, "registry JSON file")->required();
    auto* validate = registry->add_subcommand("validate", "check a registry file");
    validate->add_option("path", registry_path, "registry JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!seed_opt->count()) {
            global.seed = env_default_seed();
        } else {
            global.seed_given = true;
        }

        if (select->parsed())
            return cmd_select(global, registry_path, weights_inline, weights_file);
        if (demo->parsed())
            return cmd_update_demo(global, registry_path, weights_inline, weights_file,
                                   actual_list, update);
        if (experiment->parsed()) return cmd_experiment(global, spec_path);
        if (train->parsed())
            return cmd_train_capo(global, scenario_path, resume_path, out_dir, steps_override);
        if (registry->parsed()) {
            if (show->parsed()) return cmd_registry_show(global, registry_path);
            if (validate->parsed()) return cmd_registry_validate(registry_path);
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const SchemaMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const WeightSumViolation& e) {
        std::cerr << "error: WeightSumViolation: " << e.what() << '\n';
        return 2;
    } catch (const InvalidSpec& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const RankingMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
