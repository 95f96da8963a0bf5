// Command-line front end: data generation, training, sensitivity sweeps,
// theory verification and SVG plots. Exit codes: 0 success, 1 usage error,
// 2 runtime or verification failure.

#include "qdsb/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

// Expands a flat "key = value" config file into command-line tokens.
// Explicit flags win: keys already present on the command line are skipped.
std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
    std::string config_path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (config_path.empty()) return out;

    std::ifstream in(config_path);
    if (!in) throw qdsb::UsageError("cannot open config file: " + config_path);
    const auto have_flag = [&](const std::string& flag) {
        for (const auto& a : out) {
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        }
        return false;
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw qdsb::UsageError("config file " + config_path + ": expected key = value at line " +
                                   std::to_string(lineno));
        }
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw qdsb::UsageError("config file " + config_path + ": empty key at line " +
                                   std::to_string(lineno));
        }
        const std::string flag = "--" + key;
        if (have_flag(flag)) continue;
        if (value == "true") {
            out.push_back(flag);
            continue;
        }
        if (value == "false") continue;
        out.push_back(flag);
        std::stringstream vs(value);
        std::string token;
        while (vs >> token) out.push_back(token);
    }
    return out;
}

void add_config_flags(CLI::App* cmd, qdsb::TrainConfig& config, std::optional<double>& tau,
                      std::string& coupling, std::string& ot_mode, std::string& cost) {
    cmd->add_option("--sigma", config.sigma, "Bridge noise scale")->capture_default_str();
    cmd->add_option("--tau", tau, "Entropic regularization (default 2*sigma^2)");
    cmd->add_option("--anchors", config.anchors_k, "Anchors per marginal")->capture_default_str();
    cmd->add_option("--refresh", config.refresh_epochs, "Anchor refresh interval in epochs")
        ->capture_default_str();
    cmd->add_option("--epochs", config.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", config.batch_size, "Batch size")->capture_default_str();
    cmd->add_option("--lr", config.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", config.weight_decay, "Decoupled weight decay")
        ->capture_default_str();
    cmd->add_option("--coupling", coupling, "qdsb | minibatch_ot | independent")
        ->capture_default_str();
    cmd->add_option("--ot-mode", ot_mode, "entropic | exact")->capture_default_str();
    cmd->add_option("--cost", cost, "sqeuclidean | euclidean")->capture_default_str();
    cmd->add_option("--eval-every", config.eval_every, "Evaluation interval in epochs")
        ->capture_default_str();
    cmd->add_option("--eval-points", config.eval_points, "Evaluation sample count")
        ->capture_default_str();
    cmd->add_option("--em-steps", config.em_steps, "Euler-Maruyama steps per unit time")
        ->capture_default_str();
    cmd->add_option("--rollout-batch", config.rollout_batch, "Rollout batch size")
        ->capture_default_str();
}

void resolve_config(qdsb::TrainConfig& config, const std::optional<double>& tau,
                    const std::string& coupling, const std::string& ot_mode,
                    const std::string& cost) {
    config.tau = tau.value_or(2.0 * config.sigma * config.sigma);
    if (coupling == "qdsb") {
        config.coupling_mode = qdsb::CouplingMode::qdsb;
    } else if (coupling == "minibatch_ot") {
        config.coupling_mode = qdsb::CouplingMode::minibatch_ot;
    } else if (coupling == "independent") {
        config.coupling_mode = qdsb::CouplingMode::independent;
    } else {
        throw qdsb::UsageError("unknown coupling mode '" + coupling + "'");
    }
    if (ot_mode == "entropic") {
        config.ot_mode = qdsb::OtMode::entropic;
    } else if (ot_mode == "exact") {
        config.ot_mode = qdsb::OtMode::exact;
    } else {
        throw qdsb::UsageError("unknown ot mode '" + ot_mode + "'");
    }
    if (cost == "sqeuclidean") {
        config.cost_kind = qdsb::CostKind::sqeuclidean;
    } else if (cost == "euclidean") {
        config.cost_kind = qdsb::CostKind::euclidean;
    } else {
        throw qdsb::UsageError("unknown cost kind '" + cost + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantized diffusion Schrodinger bridges"};
    app.require_subcommand(1);

    qdsb::GenOptions gen;
    auto* cmd_gen = app.add_subcommand("gen", "Generate toy endpoint datasets as CSV");
    cmd_gen->add_option("task", gen.task, "8g-moons | g-moons | g-8g")->required();
    cmd_gen->add_option("--n", gen.n_train, "Training samples per endpoint")
        ->capture_default_str();
    cmd_gen->add_option("--n-eval", gen.n_eval, "Evaluation samples per endpoint")
        ->capture_default_str();
    cmd_gen->add_option("--seed", gen.seed, "Data seed")->capture_default_str();
    cmd_gen->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();

    qdsb::TrainCliOptions train;
    std::optional<double> train_tau;
    std::string train_coupling = "qdsb", train_ot = "entropic", train_cost = "sqeuclidean";
    auto* cmd_train = app.add_subcommand("train", "Train bridges and report final MMD");
    cmd_train->add_option("task", train.task, "8g-moons | g-moons | g-8g | csv")->required();
    cmd_train->add_option("--source", train.source_csv, "Source CSV (task csv)");
    cmd_train->add_option("--target", train.target_csv, "Target CSV (task csv)");
    cmd_train->add_option("--eval-source", train.eval_source_csv, "Eval source CSV (task csv)");
    cmd_train->add_option("--eval-target", train.eval_target_csv, "Eval target CSV (task csv)");
    cmd_train->add_option("--seeds", train.seeds, "Training seeds")->capture_default_str();
    cmd_train->add_option("--out", train.out_dir, "Output directory")->capture_default_str();
    cmd_train->add_option("--data-seed", train.data_seed, "Data seed")->capture_default_str();
    cmd_train->add_option("--n", train.n_train, "Training samples per endpoint")
        ->capture_default_str();
    cmd_train->add_option("--n-eval", train.n_eval, "Evaluation samples per endpoint")
        ->capture_default_str();
    cmd_train->add_option("--jobs", train.jobs, "Concurrent seed runs")->capture_default_str();
    add_config_flags(cmd_train, train.config, train_tau, train_coupling, train_ot, train_cost);

    qdsb::SweepOptions sweep;
    std::optional<double> sweep_tau;
    std::string sweep_coupling = "qdsb", sweep_ot = "entropic", sweep_cost = "sqeuclidean";
    auto* cmd_sweep = app.add_subcommand("sweep", "Anchor-count sensitivity sweep");
    cmd_sweep->add_option("task", sweep.task, "8g-moons | g-moons | g-8g")->required();
    cmd_sweep->add_option("--k-list", sweep.k_list, "Anchor counts")->capture_default_str();
    cmd_sweep->add_option("--seeds", sweep.seeds, "Training seeds")->capture_default_str();
    cmd_sweep->add_option("--out", sweep.out_dir, "Output directory")->capture_default_str();
    cmd_sweep->add_option("--data-seed", sweep.data_seed, "Data seed")->capture_default_str();
    cmd_sweep->add_option("--n", sweep.n_train, "Training samples per endpoint")
        ->capture_default_str();
    cmd_sweep->add_option("--n-eval", sweep.n_eval, "Evaluation samples per endpoint")
        ->capture_default_str();
    cmd_sweep->add_option("--jobs", sweep.jobs, "Concurrent runs")->capture_default_str();
    add_config_flags(cmd_sweep, sweep.config, sweep_tau, sweep_coupling, sweep_ot, sweep_cost);

    qdsb::VerifyCliOptions verify;
    auto* cmd_verify = app.add_subcommand("verify", "Empirical certification of the bounds");
    cmd_verify->add_option("--instances", verify.options.pair_instances,
                           "Randomized bound instances")
        ->capture_default_str();
    cmd_verify->add_option("--kcenter-instances", verify.options.kcenter_instances,
                           "Random k-center instances")
        ->capture_default_str();
    cmd_verify->add_option("--value-n", verify.options.value_n, "Sample count for value gaps")
        ->capture_default_str();
    cmd_verify->add_option("--proxy-seeds", verify.options.proxy_seeds,
                           "Seeds for the coupling proxy")
        ->capture_default_str();
    cmd_verify->add_option("--seed", verify.options.seed, "Suite seed")->capture_default_str();
    cmd_verify->add_option("--tau", verify.options.tau, "Entropic regularization")
        ->capture_default_str();
    cmd_verify->add_option("--out", verify.out_csv, "Report CSV path")->capture_default_str();
    cmd_verify
        ->add_flag("--inject-fault", verify.options.inject_fault,
                   "Corrupt quantization errors to exercise the detector")
        ->group("");

    qdsb::PlotOptions plot;
    auto* cmd_plot = app.add_subcommand("plot", "Render metrics or sweep CSVs as SVG");
    cmd_plot->add_option("inputs", plot.inputs, "Metrics or sweep CSV files")->required();
    cmd_plot->add_option("--out", plot.output, "Output SVG path")->capture_default_str();

    for (auto* cmd : {cmd_gen, cmd_train, cmd_sweep, cmd_verify, cmd_plot}) {
        cmd->add_option("--config", "Flat key = value config file; explicit flags override it");
    }

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = apply_config_file(args);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const qdsb::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_gen->parsed()) {
            qdsb::cmd_gen(gen);
        } else if (cmd_train->parsed()) {
            resolve_config(train.config, train_tau, train_coupling, train_ot, train_cost);
            const qdsb::TrainSummary summary = qdsb::cmd_train(train);
            if (summary.any_failed()) return 2;
        } else if (cmd_sweep->parsed()) {
            resolve_config(sweep.config, sweep_tau, sweep_coupling, sweep_ot, sweep_cost);
            qdsb::cmd_sweep(sweep);
        } else if (cmd_verify->parsed()) {
            if (!qdsb::cmd_verify(verify)) {
                std::cerr << "verify: bound violations detected\n";
                return 2;
            }
        } else if (cmd_plot->parsed()) {
            qdsb::cmd_plot(plot);
        }
    } catch (const qdsb::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
