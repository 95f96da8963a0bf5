#pragma once

#include "qdsb/datasets.hpp"
#include "qdsb/evaluate.hpp"
#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"
#include "qdsb/svg.hpp"
#include "qdsb/trainer.hpp"
#include "qdsb/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

/// Bad arguments (unknown task, empty seed list, ...); maps to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskData {
    PointCloud source_train;
    PointCloud target_train;
    PointCloud source_eval;
    PointCloud target_eval;
};

inline bool is_synthetic_task(const std::string& task) {
    return task == "8g-moons" || task == "g-moons" || task == "g-8g";
}

inline TaskData make_task_data(const std::string& task, Eigen::Index n_train,
                               Eigen::Index n_eval, std::uint64_t data_seed) {
    const auto source = [&](Eigen::Index n, std::uint64_t seed) {
        if (task == "8g-moons") return gen_eight_gaussians(n, seed);
        return gen_gaussian(n, seed, 2);
    };
    const auto target = [&](Eigen::Index n, std::uint64_t seed) {
        if (task == "g-8g") return gen_eight_gaussians(n, seed);
        return gen_moons(n, seed);
    };
    if (!is_synthetic_task(task)) {
        throw UsageError("unknown task '" + task + "' (expected 8g-moons, g-moons or g-8g)");
    }
    TaskData data;
    data.source_train = source(n_train, mix_seed(data_seed, 1));
    data.target_train = target(n_train, mix_seed(data_seed, 2));
    data.source_eval = source(n_eval, mix_seed(data_seed, 3));
    data.target_eval = target(n_eval, mix_seed(data_seed, 4));
    return data;
}

struct GenOptions {
    std::string task = "8g-moons";
    Eigen::Index n_train = 16384;
    Eigen::Index n_eval = 4096;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

/// Writes source/target x train/eval CSVs into out_dir.
inline void cmd_gen(const GenOptions& opts) {
    const TaskData data = make_task_data(opts.task, opts.n_train, opts.n_eval, opts.seed);
    std::filesystem::create_directories(opts.out_dir);
    const auto path = [&](const char* name) {
        return (std::filesystem::path(opts.out_dir) / name).string();
    };
    save_csv(data.source_train, path("source_train.csv"));
    save_csv(data.target_train, path("target_train.csv"));
    save_csv(data.source_eval, path("source_eval.csv"));
    save_csv(data.target_eval, path("target_eval.csv"));
}

struct TrainCliOptions {
    std::string task = "8g-moons";
    // task == "csv": explicit point-cloud files
    std::string source_csv, target_csv, eval_source_csv, eval_target_csv;
    TrainConfig config;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir = "runs";
    std::uint64_t data_seed = 0;
    Eigen::Index n_train = 16384;
    Eigen::Index n_eval = 4096;
    int jobs = 1;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    double final_mmd = 0.0;
    bool failed = false;
    std::string error;
};

struct TrainSummary {
    std::vector<SeedOutcome> outcomes;
    double mmd_mean = 0.0;
    double mmd_std = 0.0;  // sample standard deviation (n-1)

    bool any_failed() const {
        return std::any_of(outcomes.begin(), outcomes.end(),
                           [](const SeedOutcome& o) { return o.failed; });
    }
};

namespace detail {

inline TaskData resolve_task_data(const TrainCliOptions& opts) {
    if (opts.task == "csv") {
        if (opts.source_csv.empty() || opts.target_csv.empty()) {
            throw UsageError("task csv requires --source and --target files");
        }
        TaskData data;
        data.source_train = load_csv(opts.source_csv);
        data.target_train = load_csv(opts.target_csv);
        data.source_eval =
            opts.eval_source_csv.empty() ? data.source_train : load_csv(opts.eval_source_csv);
        data.target_eval =
            opts.eval_target_csv.empty() ? data.target_train : load_csv(opts.eval_target_csv);
        return data;
    }
    return make_task_data(opts.task, opts.n_train, opts.n_eval, opts.data_seed);
}

inline void write_resolved_config(const TrainCliOptions& opts, const std::string& path,
                                  const std::vector<Eigen::Index>* k_list = nullptr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write resolved config: " + path);
    const TrainConfig& c = opts.config;
    out << "task = " << opts.task << '\n';
    if (opts.task == "csv") {
        out << "source = " << opts.source_csv << '\n';
        out << "target = " << opts.target_csv << '\n';
        out << "eval_source = " << opts.eval_source_csv << '\n';
        out << "eval_target = " << opts.eval_target_csv << '\n';
    } else {
        out << "n_train = " << opts.n_train << '\n';
        out << "n_eval = " << opts.n_eval << '\n';
        out << "data_seed = " << opts.data_seed << '\n';
    }
    out << "seeds =";
    for (auto s : opts.seeds) out << ' ' << s;
    out << '\n';
    if (k_list) {
        out << "k_list =";
        for (auto k : *k_list) out << ' ' << k;
        out << '\n';
    }
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "sigma = " << num(c.sigma) << '\n';
    out << "tau = " << num(c.tau) << '\n';
    out << "anchors_k = " << c.anchors_k << '\n';
    out << "refresh_epochs = " << c.refresh_epochs << '\n';
    out << "epochs = " << c.epochs << '\n';
    out << "batch_size = " << c.batch_size << '\n';
    out << "lr = " << num(c.lr) << '\n';
    out << "weight_decay = " << num(c.weight_decay) << '\n';
    out << "coupling = " << to_string(c.coupling_mode) << '\n';
    out << "ot_mode = " << to_string(c.ot_mode) << '\n';
    out << "cost = " << to_string(c.cost_kind) << '\n';
    out << "eval_every = " << c.eval_every << '\n';
    out << "eval_points = " << c.eval_points << '\n';
    out << "em_steps = " << c.em_steps << '\n';
    out << "rollout_batch = " << c.rollout_batch << '\n';
    out << "out_dir = " << opts.out_dir << '\n';
    out << "jobs = " << opts.jobs << '\n';
}

struct SeedRun {
    SeedOutcome outcome;
    std::vector<double> coverage_radii;
};

inline SeedRun run_one_seed(const TrainCliOptions& opts, const TaskData& data,
                            std::uint64_t seed, const std::string& suffix) {
    SeedRun run;
    run.outcome.seed = seed;
    try {
        TrainConfig config = opts.config;
        config.seed = seed;
        TrainResult result =
            train(config, data.source_train, data.target_train, data.source_eval,
                  data.target_eval);
        const auto out = std::filesystem::path(opts.out_dir);
        save_metrics_csv(result.log, (out / ("metrics_" + suffix + ".csv")).string());
        save_checkpoint(result.bundle, (out / ("checkpoint_" + suffix + ".ckpt")).string());
        run.outcome.final_mmd =
            evaluate_model(result.bundle, data.source_eval.size() > 0 ? data.source_eval
                                                                      : data.source_train,
                           data.target_eval.size() > 0 ? data.target_eval : data.target_train,
                           result.bandwidth, config, config.epochs);
        run.coverage_radii = std::move(result.coverage_radii);
    } catch (const std::exception& err) {
        run.outcome.failed = true;
        run.outcome.error = err.what();
    }
    return run;
}

template <typename Fn>
inline auto run_in_waves(int jobs, std::size_t count, Fn&& fn) {
    using Result = decltype(fn(std::size_t{0}));
    std::vector<Result> results(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }
    std::size_t next = 0;
    while (next < count) {
        std::vector<std::pair<std::size_t, std::future<Result>>> wave;
        for (int j = 0; j < jobs && next < count; ++j, ++next) {
            wave.emplace_back(next, std::async(std::launch::async, fn, next));
        }
        for (auto& [idx, fut] : wave) results[idx] = fut.get();
    }
    return results;
}

inline double sample_stddev(const std::vector<double>& values, double mean) {
    if (values.size() < 2) return 0.0;
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / (static_cast<double>(values.size()) - 1.0));
}

}  // namespace detail

/// Trains one run per seed, writing a metrics CSV and checkpoint for each,
/// and reports the final MMD as mean +/- sample standard deviation.
inline TrainSummary cmd_train(const TrainCliOptions& opts, std::ostream& log = std::cout) {
    if (opts.seeds.empty()) throw UsageError("train: need at least one seed");
    if (!is_synthetic_task(opts.task) && opts.task != "csv") {
        throw UsageError("unknown task '" + opts.task + "'");
    }
    const TaskData data = detail::resolve_task_data(opts);
    std::filesystem::create_directories(opts.out_dir);
    detail::write_resolved_config(
        opts, (std::filesystem::path(opts.out_dir) / "config_resolved.txt").string());

    const auto runs = detail::run_in_waves(opts.jobs, opts.seeds.size(), [&](std::size_t i) {
        const std::uint64_t seed = opts.seeds[i];
        return detail::run_one_seed(opts, data, seed, "seed" + std::to_string(seed));
    });

    TrainSummary summary;
    std::vector<double> values;
    for (const auto& run : runs) {
        summary.outcomes.push_back(run.outcome);
        if (run.outcome.failed) {
            log << "seed " << run.outcome.seed << " FAILED: " << run.outcome.error << '\n';
        } else {
            values.push_back(run.outcome.final_mmd);
            log << "seed " << run.outcome.seed << ": final MMD " << run.outcome.final_mmd << '\n';
        }
    }
    if (!values.empty()) {
        summary.mmd_mean =
            std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        summary.mmd_std = detail::sample_stddev(values, summary.mmd_mean);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s: final MMD %.3f +/- %.3f (%zu seeds)\n",
                      opts.task.c_str(), summary.mmd_mean, summary.mmd_std, values.size());
        log << buf;
    }
    return summary;
}

struct SweepRow {
    Eigen::Index k = 0;
    double mmd_mean = 0.0;
    double mmd_std = 0.0;
    double radius_median = 0.0;
};

struct SweepOptions {
    std::string task = "8g-moons";
    std::vector<Eigen::Index> k_list = {1, 4, 16, 64, 256, 1024};
    TrainConfig config;  // epochs defaults to the sensitivity protocol below
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string out_dir = "sweep";
    std::uint64_t data_seed = 0;
    Eigen::Index n_train = 16384;
    Eigen::Index n_eval = 4096;
    int jobs = 1;

    SweepOptions() { config.epochs = 1000; }
};

/// One training run per (k, seed); emits "k,mmd_mean,mmd_std,radius_median"
/// rows. Anchor counts above the sample count are skipped with a warning.
inline std::vector<SweepRow> cmd_sweep(const SweepOptions& opts, std::ostream& log = std::cout) {
    if (opts.seeds.empty()) throw UsageError("sweep: need at least one seed");
    if (opts.k_list.empty()) throw UsageError("sweep: need at least one anchor count");
    TrainCliOptions base;
    base.task = opts.task;
    base.config = opts.config;
    base.seeds = opts.seeds;
    base.out_dir = opts.out_dir;
    base.data_seed = opts.data_seed;
    base.n_train = opts.n_train;
    base.n_eval = opts.n_eval;
    base.jobs = opts.jobs;
    const TaskData data = detail::resolve_task_data(base);
    std::filesystem::create_directories(opts.out_dir);
    detail::write_resolved_config(
        base, (std::filesystem::path(opts.out_dir) / "config_resolved.txt").string(),
        &opts.k_list);

    std::vector<Eigen::Index> ks;
    for (const Eigen::Index k : opts.k_list) {
        if (k > data.source_train.size() || k > data.target_train.size()) {
            log << "sweep: skipping k=" << k << " (exceeds sample count)\n";
            continue;
        }
        ks.push_back(k);
    }

    std::vector<std::pair<Eigen::Index, std::uint64_t>> grid;
    for (const Eigen::Index k : ks) {
        for (const std::uint64_t seed : opts.seeds) grid.emplace_back(k, seed);
    }
    const auto runs = detail::run_in_waves(opts.jobs, grid.size(), [&](std::size_t i) {
        const auto [k, seed] = grid[i];
        TrainCliOptions o = base;
        o.config.anchors_k = k;
        return detail::run_one_seed(o, data, seed,
                                    "k" + std::to_string(k) + "_seed" + std::to_string(seed));
    });
    for (const auto& run : runs) {
        if (run.outcome.failed) {
            throw std::runtime_error("sweep: seed " + std::to_string(run.outcome.seed) +
                                     " failed: " + run.outcome.error);
        }
    }

    std::vector<SweepRow> rows;
    std::size_t cursor = 0;
    for (const Eigen::Index k : ks) {
        std::vector<double> mmds;
        std::vector<double> radii;
        for (std::size_t s = 0; s < opts.seeds.size(); ++s, ++cursor) {
            mmds.push_back(runs[cursor].outcome.final_mmd);
            radii.insert(radii.end(), runs[cursor].coverage_radii.begin(),
                         runs[cursor].coverage_radii.end());
        }
        SweepRow row;
        row.k = k;
        row.mmd_mean = std::accumulate(mmds.begin(), mmds.end(), 0.0) /
                       static_cast<double>(mmds.size());
        row.mmd_std = detail::sample_stddev(mmds, row.mmd_mean);
        const std::size_t mid = (radii.size() - 1) / 2;
        std::nth_element(radii.begin(), radii.begin() + static_cast<std::ptrdiff_t>(mid),
                         radii.end());
        row.radius_median = radii[mid];
        rows.push_back(row);
        log << "k=" << k << ": mmd " << row.mmd_mean << " +/- " << row.mmd_std << ", radius "
            << row.radius_median << '\n';
    }

    std::ofstream out((std::filesystem::path(opts.out_dir) / "sweep.csv").string());
    if (!out) throw std::runtime_error("sweep: cannot write sweep.csv");
    out << "k,mmd_mean,mmd_std,radius_median\n";
    char buf[200];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(row.k), row.mmd_mean, row.mmd_std,
                      row.radius_median);
        out << buf;
    }
    return rows;
}

struct VerifyCliOptions {
    VerifyOptions options;
    std::string out_csv = "stability_report.csv";
};

/// Runs the certification suite, writes the report, and returns whether
/// every bound held.
inline bool cmd_verify(const VerifyCliOptions& opts, std::ostream& log = std::cout) {
    const StabilityReport report = run_verification_suite(opts.options);
    save_report_csv(report, opts.out_csv);
    std::size_t failures = 0;
    for (const auto& rec : report.records) {
        if (!rec.pass) ++failures;
    }
    log << "verify: " << report.records.size() << " records, " << failures << " violations\n";
    return report.all_pass();
}

struct PlotOptions {
    std::vector<std::string> inputs;
    std::string output = "plot.svg";
};

namespace detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("plot: cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line) || line.empty()) {
        throw std::runtime_error("plot: empty file " + path);
    }
    std::stringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) table.header.push_back(field);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream rs(line);
        while (std::getline(rs, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str()) {
                throw std::runtime_error("plot: non-numeric value at " + path + ":" +
                                         std::to_string(lineno));
            }
            row.push_back(v);
        }
        if (row.size() != table.header.size()) {
            throw std::runtime_error("plot: ragged row at " + path + ":" +
                                     std::to_string(lineno));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw std::runtime_error("plot: no data rows in " + path);
    return table;
}

}  // namespace detail

/// Metrics CSVs plot as MMD over training seconds (one polyline per file);
/// a sweep CSV plots MMD over the anchor count.
inline void cmd_plot(const PlotOptions& opts) {
    if (opts.inputs.empty()) throw UsageError("plot: need at least one input CSV");
    PlotSpec spec;
    for (const auto& input : opts.inputs) {
        const detail::CsvTable table = detail::read_csv_table(input);
        PlotSeries series;
        series.name = std::filesystem::path(input).stem().string();
        std::string x_label;
        if (table.header == std::vector<std::string>{"epoch", "train_seconds", "mmd", "loss"}) {
            x_label = "train seconds";
            for (const auto& row : table.rows) {
                series.x.push_back(row[1]);
                series.y.push_back(row[2]);
            }
        } else if (table.header ==
                   std::vector<std::string>{"k", "mmd_mean", "mmd_std", "radius_median"}) {
            x_label = "anchors";
            for (const auto& row : table.rows) {
                series.x.push_back(row[0]);
                series.y.push_back(row[1]);
            }
        } else {
            throw std::runtime_error("plot: unrecognized CSV header in " + input);
        }
        if (!spec.x_label.empty() && spec.x_label != x_label) {
            throw std::runtime_error("plot: cannot mix metrics and sweep CSVs in one plot");
        }
        spec.x_label = x_label;
        spec.y_label = "MMD";
        spec.series.push_back(std::move(series));
    }
    render_svg_plot(spec, opts.output);
}

}  // namespace qdsb
