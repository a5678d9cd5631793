// Command-line front end: training, evaluation, sweeps, the grid ablation,
// latency measurement and realization dumps. All outputs are CSV.

#include <CLI11.hpp>

#include <mmwbeam/mmwbeam.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mmwbeam;

namespace {

constexpr int exit_runtime_error = 1;
constexpr int exit_config_error = 2;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "Config file (key = value); defaults when omitted");
    cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set scenario.n_links=4");
    cmd->add_option("--seed", c.seed, "Master seed, overrides the config");
    cmd->add_option("-o,--out-dir", c.out_dir, "Output directory, overrides output.dir");
}

ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        try {
            set_config_value(cfg, detail::trim(std::string_view(kv).substr(0, eq)),
                             detail::trim(std::string_view(kv).substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("--set " + kv + ": " + e.what());
        }
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.out_dir) cfg.output_dir = *c.out_dir;
    cfg.resolve();
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return cfg;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    return os;
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = detail::trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!item.empty()) out.push_back(detail::parse_double(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty value list");
    return out;
}

void progress_line(const EpisodeRecord& r, int total) {
    if (r.episode % 5000 == 0 || r.episode + 1 == total)
        std::cerr << "  episode " << r.episode + 1 << "/" << total << "  eps " << r.epsilon << "  running mean "
                  << r.running_mean / 1e9 << " Gbit/slot\n";
}

int cmd_train(const Common& c, const std::string& model_path, const std::string& history_path) {
    const ExperimentConfig cfg = resolve_config(c);
    const fs::path dir = cfg.output_dir;
    const int total = cfg.train.total_episodes();
    std::cerr << "training N=" << cfg.scenario.n_links << " L=" << cfg.scenario.side_len << " for " << total << " episodes\n";
    const TrainResult res = train_for(cfg, [total](const EpisodeRecord& r) { progress_line(r, total); });
    const fs::path mp = model_path.empty() ? dir / "model.bin" : fs::path(model_path);
    const fs::path hp = history_path.empty() ? dir / "history.csv" : fs::path(history_path);
    {
        auto os = open_out(mp);
        save_model(os, res.model, &res.adam);
    }
    auto hs = open_out(hp);
    write_config_comment(hs, cfg);
    write_history_csv(hs, res.history);
    std::cout << "model: " << mp.string() << "\nhistory: " << hp.string() << "\n";
    return 0;
}

int cmd_eval(const Common& c, const std::string& model_path, const std::string& policies) {
    const ExperimentConfig cfg = resolve_config(c);
    const auto pol = parse_policies(policies);
    std::optional<MlpModel> model;
    if (!model_path.empty()) model = load_model(model_path).model;
    const EvalReport rep = evaluate(cfg, pol, model ? &*model : nullptr);
    const fs::path dir = cfg.output_dir;
    {
        auto os = open_out(dir / "eval_trials.csv");
        write_trials_csv(os, rep, cfg);
    }
    {
        auto os = open_out(dir / "eval_summary.csv");
        write_summary_csv(os, rep, cfg);
    }
    {
        auto os = open_out(dir / "eval_timing.csv");
        write_timing_csv(os, rep, cfg);
    }
    write_summary_csv(std::cout, rep, cfg);
    return 0;
}

int cmd_sweep(const Common& c, const std::string& axis_s, const std::string& values_s, const std::string& policies,
              const std::string& reuse) {
    const ExperimentConfig cfg = resolve_config(c);
    const SweepAxis axis = parse_axis(axis_s);
    const auto values = parse_values(values_s);
    const auto pol = parse_policies(policies);
    std::optional<MlpModel> model;
    if (!reuse.empty()) model = load_model(reuse).model;
    const auto rows = sweep(cfg, axis, values, pol, model ? &*model : nullptr,
                            [&](double v) { std::cerr << "  " << to_string(axis) << " = " << v << "\n"; });
    auto os = open_out(fs::path(cfg.output_dir) / ("sweep_" + std::string(to_string(axis)) + ".csv"));
    write_sweep_csv(os, rows, axis, cfg);
    write_sweep_csv(std::cout, rows, axis, cfg);
    return 0;
}

int cmd_ablate(const Common& c) {
    const ExperimentConfig cfg = resolve_config(c);
    const AblationResult r = ablate_grid(cfg);
    auto os = open_out(fs::path(cfg.output_dir) / "ablation_grid.csv");
    write_ablation_csv(os, r, cfg);
    std::cout << "final running mean (Gbit/slot): reciprocal-square " << r.reciprocal_square.history.back().running_mean / 1e9
              << ", uniform " << r.uniform.history.back().running_mean / 1e9 << "\n";
    return 0;
}

int cmd_timing(const Common& c, const std::string& model_path, int samples, const std::vector<int>& links) {
    const ExperimentConfig cfg = resolve_config(c);
    const MlpModel model = load_model(model_path).model;
    const auto rows = time_policies(cfg, model, links, samples);
    auto os = open_out(fs::path(cfg.output_dir) / "timing.csv");
    write_timing_rows(os, rows);
    write_timing_rows(std::cout, rows);
    return 0;
}

int cmd_dump(const Common& c, int trial) {
    const ExperimentConfig cfg = resolve_config(c);
    write_realization(std::cout, trial_realization(cfg.scenario, cfg.seed, trial));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint beamwidth and power optimization for mmWave links"};
    app.require_subcommand(1);

    Common common;
    std::string model_path, history_path, policies = "dqn,random,underestimate", axis, values, reuse;
    int samples = 200;
    int trial = 0;
    std::vector<int> links{4, 10};

    auto* train = app.add_subcommand("train", "Train a Q-network offline");
    add_common(train, common);
    train->add_option("--model", model_path, "Model output path (default <out-dir>/model.bin)");
    train->add_option("--history", history_path, "History CSV path (default <out-dir>/history.csv)");

    auto* eval = app.add_subcommand("eval", "Evaluate policies on common random realizations");
    add_common(eval, common);
    eval->add_option("-m,--model", model_path, "Trained model (needed for dqn)");
    eval->add_option("-p,--policies", policies, "Comma list of es, random, dqn, underestimate");

    auto* sw = app.add_subcommand("sweep", "Mean throughput per policy across n_links or side_len");
    add_common(sw, common);
    sw->add_option("--axis", axis, "n_links or side_len")->required();
    sw->add_option("--values", values, "Comma-separated axis values")->required();
    sw->add_option("-p,--policies", policies, "Comma list of policies");
    sw->add_option("--reuse-model", reuse, "Evaluate this one model at every point instead of training per point");

    auto* ab = app.add_subcommand("ablate-grid", "Train under both discretization schemes and compare curves");
    add_common(ab, common);

    auto* tm = app.add_subcommand("timing", "Per-decision latency of DQN and baselines");
    add_common(tm, common);
    tm->add_option("-m,--model", model_path, "Trained model")->required();
    tm->add_option("--samples", samples, "Realizations per link count")->check(CLI::PositiveNumber);
    tm->add_option("--links", links, "Link counts to time");

    auto* dump = app.add_subcommand("dump-realization", "Print one realization in the text format");
    add_common(dump, common);
    dump->add_option("--trial", trial, "Trial index")->check(CLI::NonNegativeNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(common, model_path, history_path);
        if (eval->parsed()) return cmd_eval(common, model_path, policies);
        if (sw->parsed()) return cmd_sweep(common, axis, values, policies, reuse);
        if (ab->parsed()) return cmd_ablate(common);
        if (tm->parsed()) return cmd_timing(common, model_path, samples, links);
        if (dump->parsed()) return cmd_dump(common, trial);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime_error;
    }
    return 0;
}
