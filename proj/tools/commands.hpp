#ifndef CONFGP_TOOLS_COMMANDS_HPP
#define CONFGP_TOOLS_COMMANDS_HPP

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "confgp/confgp.hpp"

namespace confgp::cli {

// Exit codes.
inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;
inline constexpr int exit_not_converged = 3;

struct GlobalOptions {
    std::uint64_t seed = 1;
    std::string config;
    std::string out_dir;
    int threads = 1;
};

/// Output sink: explicit path, else out-dir/default_name, else stdout.
class Sink {
public:
    Sink(const std::string& explicit_path, const GlobalOptions& g, const std::string& default_name, std::ostream& fallback)
        : stream_(&fallback) {
        std::string path = explicit_path;
        if (path.empty() && !g.out_dir.empty()) path = (std::filesystem::path(g.out_dir) / default_name).string();
        if (!path.empty()) {
            const auto parent = std::filesystem::path(path).parent_path();
            if (!parent.empty()) std::filesystem::create_directories(parent);
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw StructuralError("cannot write '" + path + "'");
            stream_ = file_.get();
            path_ = path;
        }
    }
    std::ostream& stream() { return *stream_; }
    const std::string& path() const { return path_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
    std::string path_;
};

inline ExperimentConfig load_config(const GlobalOptions& g, bool seed_given) {
    ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : config_from_json(read_json_file(g.config));
    if (seed_given) c.seed = g.seed;
    c.check();
    return c;
}

// --- design -----------------------------------------------------------------

struct DesignArgs {
    std::string kind = "maxpro";
    int n = 50;
    int p = 2;
    int q = 2;
    int n_fidelity = 5;
    std::vector<double> fidelity_range{0.1, 0.4};
    int iterations = 5000;
    int proposals = 10000;
    std::string output;
};

inline Design generate_design(const DesignArgs& a, std::uint64_t seed) {
    require(a.fidelity_range.size() == 2, "design: --fidelity-range takes two values");
    const Range fr{a.fidelity_range[0], a.fidelity_range[1]};
    std::vector<Range> ranges(static_cast<std::size_t>(a.p), Range{});
    ranges.insert(ranges.end(), static_cast<std::size_t>(a.q), fr);
    if (a.kind == "maximin-lhd" || a.kind == "maxpro") {
        AnnealSchedule s;
        s.proposals = a.proposals;
        Design d = a.kind == "maxpro" ? maxpro(a.n, a.p + a.q, seed, s) : maximin_lhd(a.n, a.p + a.q, seed, a.iterations);
        d.with_roles(a.p);
        return map_ranges(d, ranges);
    }
    if (a.kind == "crossed" || a.kind == "paired") {
        require(a.p >= 1 && a.q >= 1, "design: crossed and paired arrays need p >= 1 and q >= 1");
        Design x = maximin_lhd(a.n, a.p, derive_seed(seed, 1), a.iterations);
        Design t = maximin_lhd(a.n_fidelity, a.q, derive_seed(seed, 2), a.iterations);
        t.with_roles(0);
        t = map_ranges(t, std::vector<Range>(static_cast<std::size_t>(a.q), fr));
        return a.kind == "crossed" ? crossed_array(x, t) : paired_array(x, t, derive_seed(seed, 3));
    }
    throw StructuralError("design: unknown kind '" + a.kind + "' (maximin-lhd, maxpro, crossed, paired)");
}

// --- kernelgrid -------------------------------------------------------------

struct KernelGridArgs {
    std::string kernel = "kernel2";
    std::vector<double> theta{1.0};
    double power = 2.0;
    std::vector<double> stage_powers;
    int resolution = 51;
    std::string output;
};

/// (t1, t2, K) on a uniform lattice over [0,1]^2 for a single fidelity.
inline MatrixXd kernel_grid(const KernelGridArgs& a) {
    require(a.resolution >= 2, "kernelgrid: resolution must be at least 2");
    require(a.theta.size() == 1, "kernelgrid: one fidelity parameter (a single theta) is plotted");
    VectorXd theta(1), stage(1), t1(1), t2(1);
    theta(0) = a.theta[0];
    stage(0) = a.stage_powers.empty() ? 2.0 : a.stage_powers[0];
    const bool k1 = a.kernel == "kernel1";
    if (!k1 && a.kernel != "kernel2") throw StructuralError("kernelgrid: unknown kernel '" + a.kernel + "'");
    MatrixXd out(a.resolution * a.resolution, 3);
    int row = 0;
    for (int i = 0; i < a.resolution; ++i)
        for (int j = 0; j < a.resolution; ++j, ++row) {
            t1(0) = static_cast<double>(i) / (a.resolution - 1);
            t2(0) = static_cast<double>(j) / (a.resolution - 1);
            out(row, 0) = t1(0);
            out(row, 1) = t2(0);
            out(row, 2) = k1 ? kernel1_t(t1, t2, theta) : kernel2_t(t1, t2, theta, stage, a.power);
        }
    return out;
}

// --- fit / predict ----------------------------------------------------------

struct FitArgs {
    std::string data;
    std::string model = "config-k2";
    std::string basis = "linear-x-t";
    int restarts = 5;
    int max_iterations = 200;
    double power = 2.0;
    std::vector<double> stage_powers;
    double twy_power = 4.0;
    int p = -1;  // declared dimensions, checked when given
    int q = -1;
    std::string output;
};

inline FittedModel fit_model(const Dataset& data, const FitArgs& a, std::uint64_t seed) {
    if (a.p >= 0 && a.p != data.p()) throw StructuralError("fit: dataset has " + std::to_string(data.p()) + " inputs, expected " + std::to_string(a.p));
    if (a.q >= 0 && a.q != data.q()) throw StructuralError("fit: dataset has " + std::to_string(data.q()) + " fidelities, expected " + std::to_string(a.q));
    const EmulatorKind kind = emulator_from_string(a.model);
    MleOptions o;
    o.restarts = a.restarts;
    o.max_iterations = a.max_iterations;
    o.seed = derive_seed(seed, mle_stream);
    o.basis = basis_from_string(a.basis);
    if (kind == EmulatorKind::high_fidelity_gp && o.basis == BasisKind::linear_x_t) o.basis = BasisKind::linear_x;
    o.power = a.power;
    if (!a.stage_powers.empty())
        o.stage_powers = VectorXd(Eigen::Map<const VectorXd>(a.stage_powers.data(),
                                                             static_cast<Eigen::Index>(a.stage_powers.size())));
    o.twy_power = a.twy_power;
    const MleResult r = fit_mle(data, kind, o);
    FittedModel m;
    m.kind = kind;
    m.params = r.params;
    m.fingerprint = fingerprint(data);
    m.n = data.n();
    m.p = data.p();
    m.q = data.q();
    m.jitter = r.jitter;
    m.log_likelihood = r.log_likelihood;
    return m;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::string inputs;
    std::string uq = "basis-adjusted";
    std::string output;
};

inline std::vector<PredictiveDistribution> predict_with(const FittedModel& m, const Dataset& data, const MatrixXd& x,
                                                        UqMode uq) {
    check_fingerprint(m, data);
    require(x.cols() == data.p(), "predict: test inputs need " + std::to_string(data.p()) + " columns");
    const GpPredictor gp(data, m.params, m.kind, uq);
    return predict_all(gp, x);
}

// --- entry point ------------------------------------------------------------

inline void write_benchmark(const BenchmarkResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream reps(std::filesystem::path(dir) / "replications.csv");
    write_replications_csv(reps, r);
    std::ofstream timing(std::filesystem::path(dir) / "timings.csv");
    write_timings_csv(timing, r);
    std::ofstream agg(std::filesystem::path(dir) / "aggregate.json");
    agg << aggregate_json(r).dump(2) << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Multi-fidelity GP emulators with fidelity-aware kernels"};
    app.fallthrough();
    app.require_subcommand(1);
    GlobalOptions g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--config", g.config, "Experiment config (JSON)");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--threads", g.threads, "Worker threads for replications")->check(CLI::PositiveNumber);

    DesignArgs da;
    auto* design = app.add_subcommand("design", "Generate a design over inputs and fidelities");
    design->add_option("--kind", da.kind, "maximin-lhd, maxpro, crossed or paired");
    design->add_option("-n,--n", da.n, "Number of points (input points for crossed/paired)");
    design->add_option("-p,--p,--inputs", da.p, "Input columns");
    design->add_option("-q,--q,--fidelities", da.q, "Fidelity columns");
    design->add_option("--n-fidelity", da.n_fidelity, "Fidelity points for crossed/paired");
    design->add_option("--fidelity-range", da.fidelity_range, "lo hi for every fidelity column")->expected(2);
    design->add_option("--iterations", da.iterations, "Maximin swap iterations");
    design->add_option("--proposals", da.proposals, "MaxPro annealing proposals");
    design->add_option("-o,--output", da.output, "Output CSV");

    std::string sim_function = "currin", sim_design, sim_output;
    auto* simulate_cmd = app.add_subcommand("simulate", "Evaluate the grid-interpolated test function on a design");
    simulate_cmd->add_option("--function", sim_function, "currin or park");
    simulate_cmd->add_option("--design", sim_design, "Design CSV (x1..xp,t1..tq)")->required();
    simulate_cmd->add_option("-o,--output", sim_output, "Output dataset CSV");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of one emulator");
    fit->add_option("--data", fa.data, "Training dataset CSV")->required();
    fit->add_option("--model", fa.model, "Emulator kind");
    fit->add_option("--basis", fa.basis, "constant, linear-x or linear-x-t");
    fit->add_option("--restarts", fa.restarts, "Optimizer restarts");
    fit->add_option("--max-iterations", fa.max_iterations, "Iterations per restart");
    fit->add_option("--power", fa.power, "Kernel-2 outer exponent l");
    fit->add_option("--stage-powers", fa.stage_powers, "Kernel-2 exponents l_r");
    fit->add_option("--twy-power", fa.twy_power, "TWY exponent");
    fit->add_option("--p", fa.p, "Expected input count");
    fit->add_option("--q", fa.q, "Expected fidelity count");
    fit->add_option("-o,--output", fa.output, "Fitted model JSON");

    PredictArgs pa;
    auto* predict_cmd = app.add_subcommand("predict", "Predict at the limiting fidelity t = 0");
    predict_cmd->add_option("--model", pa.model, "Fitted model JSON")->required();
    predict_cmd->add_option("--data", pa.data, "Training dataset the model was fitted on")->required();
    predict_cmd->add_option("--inputs", pa.inputs, "Test inputs CSV (x1..xp)")->required();
    predict_cmd->add_option("--uq", pa.uq, "plug-in or basis-adjusted");
    predict_cmd->add_option("-o,--output", pa.output, "Predictions CSV");

    auto* bench = app.add_subcommand("benchmark", "Replicated comparison of all emulators");
    auto* compare = app.add_subcommand("mcmc-compare", "Plug-in MLE versus fully Bayesian Kernel-2 on one split");

    KernelGridArgs ka;
    auto* grid = app.add_subcommand("kernelgrid", "Fidelity kernel on a (t1, t2) lattice");
    grid->add_option("--kernel", ka.kernel, "kernel1 or kernel2");
    grid->add_option("--theta", ka.theta, "Fidelity weight");
    grid->add_option("--power", ka.power, "Kernel-2 outer exponent l");
    grid->add_option("--stage-powers", ka.stage_powers, "Kernel-2 exponent l_1");
    grid->add_option("--resolution", ka.resolution, "Lattice points per axis");
    grid->add_option("-o,--output", ka.output, "Output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        const bool seed_given = seed_opt->count() > 0;
        if (*design) {
            const Design d = generate_design(da, g.seed);
            Sink sink(da.output, g, "design.csv", out);
            write_design(sink.stream(), d);
        } else if (*simulate_cmd) {
            const Design d = read_design(sim_design);
            Sink sink(sim_output, g, "dataset.csv", out);
            write_dataset(sink.stream(), simulate(test_function_from_string(sim_function), d));
        } else if (*fit) {
            const Dataset data = read_dataset(fa.data);
            const FittedModel m = fit_model(data, fa, g.seed);
            Sink sink(fa.output, g, "model.json", out);
            sink.stream() << to_json(m).dump(2) << '\n';
        } else if (*predict_cmd) {
            const FittedModel m = fitted_model_from_json(read_json_file(pa.model));
            const Dataset data = read_dataset(pa.data);
            const CsvTable t = read_csv_file(pa.inputs);
            const auto [p, q] = header_dimensions(t.header);
            if (p == 0 || q != 0 || static_cast<int>(t.header.size()) != p)
                throw StructuralError(pa.inputs + ": header must be x1..xp");
            const MatrixXd x = detail::block_of(t, 0, p);
            const auto pred = predict_with(m, data, x, uq_from_string(pa.uq));
            Sink sink(pa.output, g, "predictions.csv", out);
            write_predictions(sink.stream(), x, pred);
        } else if (*bench) {
            const ExperimentConfig c = load_config(g, seed_given);
            const std::string dir = g.out_dir.empty() ? "." : g.out_dir;
            const BenchmarkResult r = run_benchmark(c, g.threads, [&err](const ReplicationResult& rep) {
                err << "replication " << rep.index << " done\n";
            });
            write_benchmark(r, dir);
            for (const auto& s : r.summary)
                out << to_string(s.kind) << ": mse " << s.mean.mse << ", coverage " << s.mean.coverage << ", failures "
                    << s.failed << '\n';
        } else if (*compare) {
            const ExperimentConfig c = load_config(g, seed_given);
            const McmcComparison r = run_mcmc_compare(c);
            const std::string dir = g.out_dir.empty() ? "." : g.out_dir;
            std::filesystem::create_directories(dir);
            std::ofstream f(std::filesystem::path(dir) / "mcmc_compare.json");
            f << comparison_json(c, r).dump(2) << '\n';
            out << "mle: mse " << r.mle.mse << ", coverage " << r.mle.coverage << '\n';
            out << "bayes: mse " << r.bayes.mse << ", coverage " << r.bayes.coverage << '\n';
            for (const auto& e : r.gelman_rubin)
                if (e.flagged) err << "warning: Gelman-Rubin for " << e.parameter << " is " << e.value << '\n';
            if (!r.converged) {
                err << "warning: chains did not converge\n";
                return exit_not_converged;
            }
        } else if (*grid) {
            const MatrixXd m = kernel_grid(ka);
            Sink sink(ka.output, g, "kernelgrid.csv", out);
            write_csv(sink.stream(), {"t1", "t2", "k"}, m);
        }
    } catch (const StructuralError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_ok;
}

}  // namespace confgp::cli

#endif
