#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"

using namespace confgp;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = 0;
    std::string out, err;
};

CliRun invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "confgp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun r;
    r.code = confgp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("confgp_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Dataset small_data(int n, std::uint64_t seed) {
    Rng g(seed);
    std::uniform_real_distribution<double> u(0, 1), f(0.1, 0.4);
    MatrixXd x(n, 2), t(n, 2);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x.row(i) << u(g), u(g);
        t.row(i) << f(g), f(g);
        y(i) = std::sin(3 * x(i, 0)) + x(i, 1) + t.row(i).squaredNorm();
    }
    return Dataset(x, t, y);
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.n = 14;
    c.test_size = 25;
    c.replications = 2;
    c.restarts = 1;
    c.max_iterations = 40;
    c.design.proposals = 500;
    c.models = {EmulatorKind::config_k2, EmulatorKind::standard_gp};
    return c;
}

}  // namespace

TEST(Io, DoubleFormattingRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(parse_double(format_double(v), "t"), v);
    EXPECT_THROW(parse_double("1.5x", "t"), StructuralError);
    EXPECT_EQ(parse_double("  2.5 ", "t"), 2.5);
}

TEST(Io, DatasetCsvRoundTrip) {
    const Dataset d = small_data(7, 1);
    std::stringstream s;
    write_dataset(s, d);
    EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "x1,x2,t1,t2,y");
    const Dataset back = dataset_from_csv(read_csv(s));
    EXPECT_TRUE(back.inputs().isApprox(d.inputs(), 0.0));
    EXPECT_TRUE(back.fidelities().isApprox(d.fidelities(), 0.0));
    EXPECT_TRUE(back.outputs().isApprox(d.outputs(), 0.0));
    EXPECT_EQ(fingerprint(back), fingerprint(d));
}

TEST(Io, MalformedCsvRejected) {
    std::stringstream ragged("x1,t1,y\n0.5,0.2\n");
    EXPECT_THROW(dataset_from_csv(read_csv(ragged)), StructuralError);
    std::stringstream header("a,b,y\n0.5,0.2,1\n");
    EXPECT_THROW(dataset_from_csv(read_csv(header)), StructuralError);
    std::stringstream text("x1,t1,y\n0.5,abc,1\n");
    EXPECT_THROW(dataset_from_csv(read_csv(text)), StructuralError);
}

TEST(Io, HeaderDimensions) {
    EXPECT_EQ(header_dimensions({"x1", "x2", "t1", "y"}), std::make_pair(2, 1));
    EXPECT_EQ(header_dimensions({"x1", "x2", "x3", "x4"}), std::make_pair(4, 0));
}

TEST(Io, FingerprintSensitiveToData) {
    const Dataset a = small_data(6, 2);
    VectorXd y = a.outputs();
    y(3) = std::nextafter(y(3), 10.0);
    EXPECT_NE(fingerprint(a), fingerprint(Dataset(a.inputs(), a.fidelities(), y)));
    EXPECT_EQ(fingerprint(a).size(), 16u);
}

TEST(Io, FittedModelJsonRoundTrip) {
    FittedModel m;
    m.kind = EmulatorKind::twy_geom;
    m.params = default_params(EmulatorKind::twy_geom, 2, 2);
    m.params.gamma << 0.1, 1.0 / 3.0;
    m.params.sigma2_sq = 1e-7;
    m.fingerprint = "0123456789abcdef";
    m.n = 9;
    m.p = 2;
    m.q = 2;
    m.jitter = 1.5e-9;
    const FittedModel back = fitted_model_from_json(json::parse(to_json(m).dump()));
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.params.gamma(1), 1.0 / 3.0);
    EXPECT_EQ(back.params.sigma2_sq, 1e-7);
    EXPECT_EQ(back.params.basis, m.params.basis);
    EXPECT_EQ(back.jitter, m.jitter);
    json j = to_json(m);
    j["schema_version"] = 99;
    EXPECT_THROW(fitted_model_from_json(j), StructuralError);
}

TEST(Metrics, ThreePointFixture) {
    const std::vector<PredictiveDistribution> pred{PredictiveDistribution::from(1.0, 0.25),
                                                   PredictiveDistribution::from(2.0, 1.0),
                                                   PredictiveDistribution::from(-1.0, 4.0)};
    VectorXd truth(3);
    truth << 1.5, 5.0, -1.0;
    const Metrics m = score(pred, truth);
    // errors 0.5, 3, 0 -> (0.25 + 9 + 0) / 3; intervals 1 +- 0.98, 2 +- 1.96, -1 +- 3.92
    EXPECT_NEAR(m.mse, 9.25 / 3.0, 1e-15);
    EXPECT_NEAR(m.coverage, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.avg_se, (0.5 + 1.0 + 2.0) / 3.0, 1e-15);
}

TEST(Config, JsonRoundTripAndStrictKeys) {
    json j = json::parse(R"({"function": "park", "n": 30, "fidelity_range": [0.2, 0.5],
                             "models": ["config-k1", "twy-arith"], "kernel": {"power": 1.5},
                             "mcmc": {"iterations": 200, "burn_in": 100, "thinning": 5, "chains": 3}, "seed": 9})");
    const ExperimentConfig c = config_from_json(j);
    EXPECT_EQ(c.function, TestFunctionName::park);
    EXPECT_EQ(c.ranges().size(), 4u);
    EXPECT_EQ(c.ranges()[3].hi, 0.5);
    EXPECT_EQ(c.power, 1.5);
    EXPECT_EQ(c.mcmc.chains, 3);
    const ExperimentConfig back = config_from_json(to_json(c));
    EXPECT_EQ(back.models, c.models);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_THROW(config_from_json(json::parse(R"({"replicates": 3})")), StructuralError);
    EXPECT_THROW(config_from_json(json::parse(R"({"models": []})")), StructuralError);
    EXPECT_THROW(config_from_json(json::parse(R"({"kernel": {"l": 2}})")), StructuralError);
    EXPECT_THROW(config_from_json(json::parse(R"({"n": "fifty"})")), StructuralError);
}

TEST(Config, DefaultsFollowProtocol) {
    const ExperimentConfig c;
    EXPECT_EQ(c.n, 50);
    EXPECT_EQ(c.test_size, 1000);
    EXPECT_EQ(c.replications, 20);
    EXPECT_EQ(c.models.size(), 6u);
    EXPECT_EQ(c.power, 2.0);
    EXPECT_EQ(c.ranges()[0].lo, 0.1);
    EXPECT_EQ(c.ranges()[1].hi, 0.4);
    EXPECT_EQ(c.mcmc.iterations, 10000);
    EXPECT_EQ(c.mcmc.burn_in, 5000);
    EXPECT_EQ(c.mcmc.thinning, 50);
    EXPECT_EQ(c.mcmc.chains, 5);
}

TEST(Benchmark, SplitUsesMappedRangesAndSimulator) {
    const ExperimentConfig c = tiny_config();
    const Split s = make_split(c, 0);
    EXPECT_EQ(s.train.n(), 14);
    EXPECT_GE(s.train.fidelities().minCoeff(), 0.1);
    EXPECT_LE(s.train.fidelities().maxCoeff(), 0.4);
    for (int i = 0; i < s.train.n(); ++i)
        EXPECT_EQ(s.train.outputs()(i), grid_interpolate(TestFunctionName::currin, s.train.fidelities().row(i).transpose(),
                                                        s.train.inputs().row(i).transpose()));
    EXPECT_EQ(s.test_inputs.rows(), 25);
    EXPECT_EQ(s.truth(0), currin(s.test_inputs.row(0).transpose()));
    const Split again = make_split(c, 0), other = make_split(c, 1);
    EXPECT_TRUE(again.train.inputs().isApprox(s.train.inputs(), 0.0));
    EXPECT_FALSE(other.train.inputs().isApprox(s.train.inputs(), 0.0));
    const Dataset hf = high_fidelity_data(c, 0);
    EXPECT_EQ(hf.n(), 10);
    EXPECT_TRUE((hf.fidelities().array() == 0.0125).all());
}

TEST(Benchmark, SingleModelSingleReplicationGivesOneRow) {
    ExperimentConfig c = tiny_config();
    c.replications = 1;
    c.models = {EmulatorKind::config_k2};
    const BenchmarkResult r = run_benchmark(c);
    std::stringstream s;
    write_replications_csv(s, r);
    std::string line;
    int rows = 0;
    std::getline(s, line);
    while (std::getline(s, line)) ++rows;
    EXPECT_EQ(rows, 1);
    EXPECT_EQ(r.summary.size(), 1u);
    EXPECT_TRUE(r.replications[0].models[0].ok);
    EXPECT_GE(r.of(EmulatorKind::config_k2).mean.coverage, 0.0);
    EXPECT_LE(r.of(EmulatorKind::config_k2).mean.coverage, 1.0);
}

TEST(Benchmark, ModelOrderAndThreadsDoNotChangeNumbers) {
    ExperimentConfig a = tiny_config();
    ExperimentConfig b = a;
    b.models = {EmulatorKind::standard_gp, EmulatorKind::config_k2};
    const BenchmarkResult ra = run_benchmark(a, 1), rb = run_benchmark(b, 2);
    for (EmulatorKind k : a.models) {
        EXPECT_EQ(ra.of(k).mean.mse, rb.of(k).mean.mse);
        EXPECT_EQ(ra.of(k).mean.coverage, rb.of(k).mean.coverage);
    }
    // aggregate equals the arithmetic mean of replication values
    const double m0 = ra.replications[0].models[0].metrics.mse, m1 = ra.replications[1].models[0].metrics.mse;
    EXPECT_DOUBLE_EQ(ra.of(ra.replications[0].models[0].kind).mean.mse, (m0 + m1) / 2.0);
}

TEST(Cli, UnknownAndMissingArgumentsAreUsageErrors) {
    EXPECT_NE(invoke({}).code, 0);
    EXPECT_EQ(invoke({"frobnicate"}).code, confgp::cli::exit_usage);
    const fs::path dir = scratch("usage");
    std::ofstream(dir / "in.csv") << "x1,x2\n0.5,0.5\n";
    const CliRun r = invoke({"predict", "--data", (dir / "d.csv").string(), "--inputs", (dir / "in.csv").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("--model"), std::string::npos);
    EXPECT_EQ(invoke({"simulate", "--function", "branin", "--design", (dir / "in.csv").string()}).code, confgp::cli::exit_usage);
    EXPECT_EQ(invoke({"kernelgrid", "--kernel", "kernel3"}).code, confgp::cli::exit_usage);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, KernelGridValues) {
    const fs::path dir = scratch("grid");
    ASSERT_EQ(invoke({"kernelgrid", "--kernel", "kernel1", "--theta", "1", "--resolution", "3", "-o",
                   (dir / "k1.csv").string()})
                  .code,
              0);
    const CsvTable k1 = read_csv_file((dir / "k1.csv").string());
    ASSERT_EQ(k1.rows.size(), 9u);
    EXPECT_EQ(k1.header, (std::vector<std::string>{"t1", "t2", "k"}));
    EXPECT_EQ(k1.rows[0][2], 0.0);
    EXPECT_NEAR(k1.rows[8][2], 2.0 - 2.0 * std::exp(-1.0), 1e-15);
    ASSERT_EQ(invoke({"--out-dir", dir.string(), "kernelgrid", "--kernel", "kernel2", "--theta", "1", "--power", "2",
                   "--stage-powers", "2", "--resolution", "5"})
                  .code,
              0);
    const CsvTable k2 = read_csv_file((dir / "kernelgrid.csv").string());
    ASSERT_EQ(k2.rows.size(), 25u);
    EXPECT_EQ(k2.rows.back()[0], 1.0);
    EXPECT_EQ(k2.rows.back()[1], 1.0);
    EXPECT_EQ(k2.rows.back()[2], 1.0);
    EXPECT_EQ(k2.rows[2 * 5 + 3][2], std::pow(0.5 * 0.5, 2));
}

TEST(Cli, DesignIsDeterministicUnderSeed) {
    const fs::path dir = scratch("design");
    for (const char* kind : {"maximin-lhd", "maxpro", "crossed", "paired"}) {
        const auto a = invoke({"--seed", "5", "design", "--kind", kind, "--n", "6", "--inputs", "2", "--fidelities", "1",
                            "--proposals", "300"});
        const auto b = invoke({"design", "--kind", kind, "--n", "6", "--inputs", "2", "--fidelities", "1", "--proposals",
                            "300", "--seed", "5"});
        ASSERT_EQ(a.code, 0) << kind << a.err;
        EXPECT_EQ(a.out, b.out);
        std::stringstream s(a.out);
        const Design d = design_from_csv(read_csv(s));
        EXPECT_EQ(d.count(ColumnRole::fidelity), 1);
        EXPECT_GE(d.columns(ColumnRole::fidelity).minCoeff(), 0.1);
        EXPECT_LE(d.columns(ColumnRole::fidelity).maxCoeff(), 0.4);
    }
    const auto crossed = invoke({"design", "--kind", "crossed", "--n", "3", "--n-fidelity", "4", "--inputs", "1",
                              "--fidelities", "2"});
    std::stringstream s(crossed.out);
    EXPECT_EQ(read_csv(s).rows.size(), 12u);
    EXPECT_EQ(invoke({"design", "--kind", "sobol"}).code, confgp::cli::exit_usage);
}

TEST(Cli, SimulateOnNodeAlignedDesign) {
    const fs::path dir = scratch("simulate");
    std::ofstream(dir / "design.csv") << "x1,x2,t1,t2\n0.3,0.4,0.1,0.2\n0.5,1,0.25,0.5\n0,0.6,0.2,0.2\n";
    const auto r = invoke({"simulate", "--function", "currin", "--design", (dir / "design.csv").string(), "-o",
                        (dir / "data.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Dataset d = read_dataset((dir / "data.csv").string());
    ASSERT_EQ(d.n(), 3);
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(d.outputs()(i), currin(d.inputs().row(i).transpose()), 1e-12 * std::abs(d.outputs()(i)));
}

TEST(Cli, FitPredictRoundTrip) {
    const fs::path dir = scratch("fitpredict");
    const Dataset d = small_data(12, 3);
    {
        std::ofstream f(dir / "data.csv");
        write_dataset(f, d);
    }
    {
        std::ofstream f(dir / "inputs.csv");
        MatrixXd x(4, 2);
        x << 0.1, 0.2, 0.5, 0.5, 0.9, 0.3, d.inputs()(0, 0), d.inputs()(0, 1);
        write_csv(f, {"x1", "x2"}, x);
    }
    const auto fit = invoke({"--seed", "3", "fit", "--data", (dir / "data.csv").string(), "--model", "config-k2",
                          "--restarts", "2", "--p", "2", "--q", "2", "-o", (dir / "model.json").string()});
    ASSERT_EQ(fit.code, 0) << fit.err;
    const auto pred = invoke({"predict", "--model", (dir / "model.json").string(), "--data", (dir / "data.csv").string(),
                           "--inputs", (dir / "inputs.csv").string(), "-o", (dir / "pred.csv").string()});
    ASSERT_EQ(pred.code, 0) << pred.err;
    const CsvTable t = read_csv_file((dir / "pred.csv").string());
    EXPECT_EQ(t.header, (std::vector<std::string>{"x1", "x2", "mean", "variance", "lo95", "hi95"}));

    // in-memory fit and predict give bit-identical numbers
    confgp::cli::FitArgs fa;
    fa.restarts = 2;
    const FittedModel mem = confgp::cli::fit_model(d, fa, 3);
    const MatrixXd x = detail::block_of(read_csv_file((dir / "inputs.csv").string()), 0, 2);
    const auto direct = confgp::cli::predict_with(mem, d, x, UqMode::basis_adjusted);
    for (std::size_t i = 0; i < direct.size(); ++i) {
        EXPECT_EQ(t.rows[i][2], direct[i].mean);
        EXPECT_EQ(t.rows[i][3], direct[i].variance);
        EXPECT_EQ(t.rows[i][4], direct[i].lower95);
    }

    // declared dimensions are checked
    EXPECT_EQ(invoke({"fit", "--data", (dir / "data.csv").string(), "--q", "3"}).code, confgp::cli::exit_usage);

    // a model fitted on other data is refused
    {
        std::ofstream f(dir / "other.csv");
        write_dataset(f, small_data(12, 4));
    }
    const auto refused = invoke({"predict", "--model", (dir / "model.json").string(), "--data",
                              (dir / "other.csv").string(), "--inputs", (dir / "inputs.csv").string()});
    EXPECT_EQ(refused.code, confgp::cli::exit_usage);
    EXPECT_NE(refused.err.find("fingerprint"), std::string::npos);
}

TEST(Cli, FitThenPredictAtTrainingPointInterpolates) {
    const Dataset d = small_data(10, 5);
    confgp::cli::FitArgs fa;
    fa.restarts = 1;
    const FittedModel m = confgp::cli::fit_model(d, fa, 1);
    ASSERT_EQ(m.jitter, 0.0);
    const GpPredictor gp(d, m.params, m.kind);
    for (int i = 0; i < d.n(); ++i) {
        const auto p = gp.predict(d.inputs().row(i).transpose(), d.fidelities().row(i).transpose());
        EXPECT_NEAR(p.mean, d.outputs()(i), 1e-6);
    }
}

TEST(Cli, BenchmarkFilesAreDeterministic) {
    const fs::path dir = scratch("bench");
    {
        std::ofstream f(dir / "config.json");
        f << R"({"n": 12, "test_size": 20, "replications": 2, "models": ["config-k2", "twy-arith"],
                 "mle": {"restarts": 1, "max_iterations": 30}, "design": {"proposals": 300}})";
    }
    for (const char* out : {"a", "b"}) {
        const auto r = invoke({"--config", (dir / "config.json").string(), "--out-dir", (dir / out).string(), "--threads",
                            out[0] == 'a' ? "1" : "2", "benchmark"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "a" / "replications.csv"), slurp(dir / "b" / "replications.csv"));
    json ja = read_json_file((dir / "a" / "aggregate.json").string());
    json jb = read_json_file((dir / "b" / "aggregate.json").string());
    ja.erase("generated_at");
    jb.erase("generated_at");
    EXPECT_EQ(ja, jb);
    EXPECT_EQ(ja["schema_version"], benchmark_schema);
    EXPECT_EQ(ja["models"]["config-k2"]["mse_by_replication"].size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "a" / "timings.csv"));
    // a different seed changes the numbers
    const auto r = invoke({"--config", (dir / "config.json").string(), "--out-dir", (dir / "c").string(), "--seed", "2",
                        "benchmark"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(slurp(dir / "a" / "replications.csv"), slurp(dir / "c" / "replications.csv"));
}

TEST(Cli, McmcCompareExitCodeFollowsConvergence) {
    const fs::path dir = scratch("mcmc");
    {
        std::ofstream f(dir / "config.json");
        f << R"({"n": 14, "test_size": 20, "models": ["config-k2"], "mle": {"restarts": 1, "max_iterations": 30},
                 "mcmc": {"iterations": 60, "burn_in": 30, "thinning": 1, "chains": 2, "adapt_window": 10},
                 "design": {"proposals": 300}})";
    }
    const auto r = invoke({"--config", (dir / "config.json").string(), "--out-dir", dir.string(), "mcmc-compare"});
    const json report = read_json_file((dir / "mcmc_compare.json").string());
    const bool converged = report["converged"].get<bool>();
    EXPECT_EQ(r.code, converged ? confgp::cli::exit_ok : confgp::cli::exit_not_converged);
    if (!converged) EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_EQ(report["retained_per_chain"], 30);
    EXPECT_EQ(report["gelman_rubin"].size(), 5u + 2 + 2 + 2 + 2);
}

TEST(Cli, InvalidConfigIsStructuralError) {
    const fs::path dir = scratch("badconfig");
    std::ofstream(dir / "config.json") << R"({"replications": 0})";
    const auto r = invoke({"--config", (dir / "config.json").string(), "benchmark"});
    EXPECT_EQ(r.code, confgp::cli::exit_usage);
}
