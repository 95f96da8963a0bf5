#include "qdsb/cli.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qdsb;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QDSB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

TrainCliOptions quick_train(const std::string& out_dir) {
    TrainCliOptions opts;
    opts.task = "8g-moons";
    opts.n_train = 512;
    opts.n_eval = 256;
    opts.seeds = {0, 1};
    opts.out_dir = out_dir;
    opts.config.anchors_k = 16;
    opts.config.epochs = 3;
    opts.config.eval_every = 3;
    opts.config.eval_points = 256;
    opts.config.rollout_batch = 128;
    opts.config.em_steps = 10;
    return opts;
}

}  // namespace

TEST_CASE("gen writes four deterministic csvs") {
    TempDir dir("qdsb_gen_test");
    GenOptions opts;
    opts.task = "8g-moons";
    opts.n_train = 64;
    opts.n_eval = 32;
    opts.out_dir = dir.str();
    cmd_gen(opts);
    for (const char* name :
         {"source_train.csv", "target_train.csv", "source_eval.csv", "target_eval.csv"}) {
        CHECK(fs::exists(dir.path / name));
    }
    CHECK(load_csv(dir.file("source_train.csv")).size() == 64);
    CHECK(load_csv(dir.file("target_eval.csv")).size() == 32);

    const std::string before = slurp(dir.file("source_train.csv"));
    cmd_gen(opts);
    CHECK(slurp(dir.file("source_train.csv")) == before);

    opts.task = "bogus";
    CHECK_THROWS_AS(cmd_gen(opts), UsageError);
}

TEST_CASE("train writes metrics, checkpoints and a resolved config") {
    TempDir dir("qdsb_train_test");
    const TrainCliOptions opts = quick_train(dir.str());
    std::ostringstream log;
    const TrainSummary summary = cmd_train(opts, log);
    REQUIRE(summary.outcomes.size() == 2);
    CHECK(!summary.any_failed());
    CHECK(std::isfinite(summary.mmd_mean));
    CHECK(summary.mmd_std >= 0.0);
    CHECK(log.str().find("final MMD") != std::string::npos);

    for (const char* name : {"metrics_seed0.csv", "metrics_seed1.csv", "checkpoint_seed0.ckpt",
                             "checkpoint_seed1.ckpt", "config_resolved.txt"}) {
        CHECK(fs::exists(dir.path / name));
    }
    const std::string config = slurp(dir.file("config_resolved.txt"));
    CHECK(config.find("task = 8g-moons") != std::string::npos);
    CHECK(config.find("sigma = 0.25") != std::string::npos);
    CHECK(config.find("anchors_k = 16") != std::string::npos);
    const std::string metrics = slurp(dir.file("metrics_seed0.csv"));
    CHECK(metrics.rfind("epoch,train_seconds,mmd,loss", 0) == 0);
}

TEST_CASE("train is reproducible across invocations") {
    TempDir a("qdsb_train_rep_a");
    TempDir b("qdsb_train_rep_b");
    TrainCliOptions opts = quick_train(a.str());
    opts.seeds = {3};
    std::ostringstream sink;
    const TrainSummary ra = cmd_train(opts, sink);
    opts.out_dir = b.str();
    const TrainSummary rb = cmd_train(opts, sink);
    CHECK(ra.outcomes[0].final_mmd == rb.outcomes[0].final_mmd);
    CHECK(slurp(a.file("checkpoint_seed3.ckpt")) == slurp(b.file("checkpoint_seed3.ckpt")));

    // mmd columns agree row by row (train_seconds is wall clock and exempt)
    const auto mmd_column = [](const std::string& path) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        std::vector<std::string> values;
        while (std::getline(in, line)) {
            std::size_t start = 0;
            for (int field = 0; field < 2; ++field) start = line.find(',', start) + 1;
            values.push_back(line.substr(start, line.find(',', start) - start));
        }
        return values;
    };
    CHECK(mmd_column(a.file("metrics_seed3.csv")) == mmd_column(b.file("metrics_seed3.csv")));
}

TEST_CASE("train with zero epochs reports the untrained model") {
    TempDir dir("qdsb_train_zero");
    TrainCliOptions opts = quick_train(dir.str());
    opts.seeds = {0};
    opts.config.epochs = 0;
    std::ostringstream sink;
    const TrainSummary summary = cmd_train(opts, sink);
    CHECK(!summary.any_failed());
    CHECK(summary.mmd_mean > 0.0);  // untrained model is far from the target
}

TEST_CASE("train from csv inputs") {
    TempDir dir("qdsb_train_csv");
    save_csv(gen_eight_gaussians(256, 0), dir.file("s.csv"));
    save_csv(gen_moons(256, 1), dir.file("t.csv"));
    TrainCliOptions opts = quick_train(dir.str());
    opts.task = "csv";
    opts.source_csv = dir.file("s.csv");
    opts.target_csv = dir.file("t.csv");
    opts.seeds = {0};
    std::ostringstream sink;
    const TrainSummary summary = cmd_train(opts, sink);
    CHECK(!summary.any_failed());

    opts.source_csv.clear();
    CHECK_THROWS_AS(cmd_train(opts, sink), UsageError);
}

TEST_CASE("independent coupling switch works through the cli layer") {
    TempDir dir("qdsb_train_indep");
    TrainCliOptions opts = quick_train(dir.str());
    opts.seeds = {0};
    opts.config.coupling_mode = CouplingMode::independent;
    std::ostringstream sink;
    const TrainSummary summary = cmd_train(opts, sink);
    CHECK(!summary.any_failed());
}

TEST_CASE("sweep emits one row per anchor count with monotone radii") {
    TempDir dir("qdsb_sweep_test");
    SweepOptions opts;
    opts.task = "8g-moons";
    opts.k_list = {1, 4, 16, 2048};  // 2048 > n gets skipped
    opts.seeds = {0, 1};
    opts.out_dir = dir.str();
    opts.n_train = 256;
    opts.n_eval = 128;
    opts.config.epochs = 2;
    opts.config.eval_every = 2;
    opts.config.eval_points = 128;
    opts.config.rollout_batch = 128;
    opts.config.em_steps = 10;
    std::ostringstream log;
    const auto rows = cmd_sweep(opts, log);
    REQUIRE(rows.size() == 3);
    CHECK(log.str().find("skipping k=2048") != std::string::npos);
    CHECK(rows[0].k == 1);
    CHECK(rows[2].k == 16);
    CHECK(rows[1].radius_median <= rows[0].radius_median);
    CHECK(rows[2].radius_median <= rows[1].radius_median);

    const std::string csv = slurp(dir.file("sweep.csv"));
    CHECK(csv.rfind("k,mmd_mean,mmd_std,radius_median", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("verify command reports and detects corruption") {
    TempDir dir("qdsb_verify_test");
    VerifyCliOptions opts;
    opts.options.pair_instances = 6;
    opts.options.kcenter_instances = 3;
    opts.options.value_n = 64;
    opts.options.proxy_seeds = 2;
    opts.out_csv = dir.file("report.csv");
    std::ostringstream log;
    CHECK(cmd_verify(opts, log));
    CHECK(fs::exists(dir.path / "report.csv"));

    // row count equals the record count announced in the log
    const std::string report = slurp(dir.file("report.csv"));
    const auto lines = std::count(report.begin(), report.end(), '\n');
    std::size_t announced = 0;
    sscanf(log.str().c_str(), "verify: %zu records", &announced);
    CHECK(static_cast<std::size_t>(lines) == announced + 1);

    opts.options.inject_fault = true;
    CHECK(!cmd_verify(opts, log));
}

TEST_CASE("plot renders deterministic svg") {
    TempDir dir("qdsb_plot_test");
    {
        std::ofstream m1(dir.file("m1.csv"));
        m1 << "epoch,train_seconds,mmd,loss\n1,0.5,0.4,5.0\n2,1.0,0.3,4.0\n";
        std::ofstream m2(dir.file("m2.csv"));
        m2 << "epoch,train_seconds,mmd,loss\n1,0.4,0.5,5.5\n2,0.9,0.2,3.5\n";
    }
    PlotOptions opts;
    opts.inputs = {dir.file("m1.csv"), dir.file("m2.csv")};
    opts.output = dir.file("out.svg");
    cmd_plot(opts);
    const std::string svg = slurp(dir.file("out.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '<') > 10);
    // two polylines and a legend entry per input
    std::size_t polylines = 0;
    for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos; ++pos) {
        ++polylines;
    }
    CHECK(polylines == 2);
    CHECK(svg.find(">m1</text>") != std::string::npos);
    CHECK(svg.find(">m2</text>") != std::string::npos);

    cmd_plot(opts);
    CHECK(slurp(dir.file("out.svg")) == svg);

    // sweep-shaped input
    {
        std::ofstream s(dir.file("sweep.csv"));
        s << "k,mmd_mean,mmd_std,radius_median\n1,0.5,0.1,2.0\n16,0.2,0.05,0.5\n";
    }
    PlotOptions sweep_opts;
    sweep_opts.inputs = {dir.file("sweep.csv")};
    sweep_opts.output = dir.file("sweep.svg");
    cmd_plot(sweep_opts);
    CHECK(slurp(dir.file("sweep.svg")).find("anchors") != std::string::npos);

    // empty metrics file is an error, not an empty plot
    { std::ofstream empty(dir.file("empty.csv")); }
    PlotOptions bad;
    bad.inputs = {dir.file("empty.csv")};
    bad.output = dir.file("bad.svg");
    CHECK_THROWS_AS(cmd_plot(bad), std::runtime_error);

    {
        std::ofstream h(dir.file("headeronly.csv"));
        h << "epoch,train_seconds,mmd,loss\n";
    }
    bad.inputs = {dir.file("headeronly.csv")};
    CHECK_THROWS_WITH(cmd_plot(bad), Catch::Matchers::ContainsSubstring("no data rows"));
}

TEST_CASE("cli binary exit codes") {
    TempDir dir("qdsb_cli_exit");
    CHECK(run_cli("gen bogus-task --out " + dir.str()) == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen") == 1);  // missing required task
    CHECK(run_cli("gen 8g-moons --n 32 --n-eval 16 --out " + dir.str()) == 0);
    CHECK(run_cli("plot " + dir.file("missing.csv") + " --out " + dir.file("x.svg")) == 2);
    CHECK(run_cli("verify --instances 4 --kcenter-instances 2 --value-n 64 --proxy-seeds 2"
                  " --out " + dir.file("report.csv")) == 0);
    CHECK(run_cli("verify --instances 4 --kcenter-instances 2 --value-n 64 --proxy-seeds 2"
                  " --inject-fault --out " + dir.file("report2.csv")) == 2);
}

TEST_CASE("cli config file support") {
    TempDir dir("qdsb_cli_config");
    {
        std::ofstream cfg(dir.file("run.cfg"));
        cfg << "n = 48\nn-eval = 24\nseed = 5\n";
    }
    CHECK(run_cli("gen 8g-moons --config " + dir.file("run.cfg") + " --out " + dir.str()) == 0);
    CHECK(load_csv(dir.file("source_train.csv")).size() == 48);
    CHECK(load_csv(dir.file("source_eval.csv")).size() == 24);
}
