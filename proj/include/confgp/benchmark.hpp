#ifndef CONFGP_BENCHMARK_HPP
#define CONFGP_BENCHMARK_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "confgp/dataset.hpp"
#include "confgp/design.hpp"
#include "confgp/errors.hpp"
#include "confgp/gp_core.hpp"
#include "confgp/io.hpp"
#include "confgp/kernels.hpp"
#include "confgp/mcmc.hpp"
#include "confgp/mle.hpp"
#include "confgp/random.hpp"
#include "confgp/testbed.hpp"

namespace confgp {

inline constexpr int benchmark_schema = 1;

// Seed streams derived from the master seed.
enum SeedStream : std::uint64_t {
    design_stream = 1,
    test_stream = 2,
    mle_stream = 3,
    high_fidelity_stream = 4,
    mcmc_stream = 5,
    predictive_stream = 6,
};

struct HighFidelityConfig {
    int n = 0;  // 0: five points per input dimension
    double t = 0.0125;
};

struct ExperimentConfig {
    TestFunctionName function = TestFunctionName::currin;
    int n = 50;
    std::vector<Range> fidelity_ranges;  // empty: function default, one per fidelity column
    int test_size = 1000;
    int replications = 20;
    std::vector<EmulatorKind> models{all_emulator_kinds.begin(), all_emulator_kinds.end()};
    double power = 2.0;
    std::optional<VectorXd> stage_powers;
    double twy_power = 4.0;
    BasisKind basis = BasisKind::linear_x_t;
    UqMode uq = UqMode::basis_adjusted;
    std::string inference = "mle";
    int restarts = 5;
    int max_iterations = 200;
    double tolerance = 1e-9;
    double perturbation_sd = 0.5;
    McmcSchedule mcmc;
    PriorSpec prior;
    int draws_per_sample = 10;
    HighFidelityConfig high_fidelity;
    AnnealSchedule design;
    std::uint64_t seed = 1;

    int p() const { return input_dimension(function); }
    int q() const { return p(); }  // one cell size per input dimension

    std::vector<Range> ranges() const {
        if (!fidelity_ranges.empty()) return fidelity_ranges;
        const Range r = function == TestFunctionName::currin ? Range{0.1, 0.4} : Range{0.2, 0.5};
        return std::vector<Range>(static_cast<std::size_t>(q()), r);
    }
    int high_fidelity_n() const { return high_fidelity.n > 0 ? high_fidelity.n : 5 * p(); }

    void check() const {
        require(n >= 2, "config: n must be at least 2");
        require(test_size >= 1, "config: test_size must be positive");
        require(replications >= 1, "config: replications must be positive");
        require(!models.empty(), "config: model list is empty");
        require(restarts >= 1 && max_iterations >= 1, "config: restarts and max_iterations must be positive");
        require(inference == "mle" || inference == "bayes", "config: inference must be 'mle' or 'bayes'");
        require(high_fidelity.t > 0.0 && high_fidelity.t <= 1.0, "config: high_fidelity.t must lie in (0,1]");
        require(draws_per_sample >= 1, "config: draws_per_sample must be positive");
        const auto r = ranges();
        require(static_cast<int>(r.size()) == q(), "config: need one fidelity range per fidelity column");
        for (const auto& x : r)
            require(x.lo > 0.0 && x.lo < x.hi && x.hi <= 1.0, "config: fidelity ranges must satisfy 0 < lo < hi <= 1");
        if (stage_powers) require(stage_powers->size() == q(), "config: stage_powers needs one entry per fidelity");
        std::set<EmulatorKind> seen(models.begin(), models.end());
        require(seen.size() == models.size(), "config: duplicate model in list");
        if (inference == "bayes")
            require(models.size() == 1 && models.front() == EmulatorKind::config_k2,
                    "config: bayes inference supports only the config-k2 model");
        mcmc.check();
        prior.check();
    }

    MleOptions mle_options(std::uint64_t s) const {
        MleOptions o;
        o.restarts = restarts;
        o.max_iterations = max_iterations;
        o.tolerance = tolerance;
        o.perturbation_sd = perturbation_sd;
        o.seed = s;
        o.basis = basis;
        o.power = power;
        o.stage_powers = stage_powers;
        o.twy_power = twy_power;
        return o;
    }

    McmcOptions mcmc_options(std::uint64_t s) const {
        McmcOptions o;
        o.schedule = mcmc;
        o.schedule.seed = s;
        o.basis = basis;
        o.power = power;
        o.stage_powers = stage_powers;
        return o;
    }

    std::uint64_t replication_seed(int rep, SeedStream stream) const {
        return derive_seed(seed, stream, static_cast<std::uint64_t>(rep));
    }
};

namespace detail {
template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    require(j.is_object(), where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        require(known, where + ": unknown key '" + it.key() + "'");
    }
}
}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        detail::only_keys(j,
                          {"function", "n", "fidelity_range", "fidelity_ranges", "test_size", "replications", "models",
                           "kernel", "inference", "uq", "mle", "mcmc", "prior", "high_fidelity", "design", "seed"},
                          "config");
        if (j.contains("function")) c.function = test_function_from_string(j.at("function").get<std::string>());
        detail::read_if(j, "n", c.n);
        detail::read_if(j, "test_size", c.test_size);
        detail::read_if(j, "replications", c.replications);
        detail::read_if(j, "inference", c.inference);
        detail::read_if(j, "seed", c.seed);
        if (j.contains("uq")) c.uq = uq_from_string(j.at("uq").get<std::string>());
        if (j.contains("fidelity_range")) {
            const auto r = j.at("fidelity_range").get<std::vector<double>>();
            require(r.size() == 2, "config: fidelity_range must be [lo, hi]");
            c.fidelity_ranges.assign(static_cast<std::size_t>(c.q()), Range{r[0], r[1]});
        }
        if (j.contains("fidelity_ranges")) {
            c.fidelity_ranges.clear();
            for (const auto& r : j.at("fidelity_ranges")) {
                const auto v = r.get<std::vector<double>>();
                require(v.size() == 2, "config: each fidelity range must be [lo, hi]");
                c.fidelity_ranges.push_back(Range{v[0], v[1]});
            }
        }
        if (j.contains("models")) {
            c.models.clear();
            for (const auto& m : j.at("models")) c.models.push_back(emulator_from_string(m.get<std::string>()));
        }
        if (j.contains("kernel")) {
            const auto& k = j.at("kernel");
            detail::only_keys(k, {"power", "stage_powers", "twy_power", "basis"}, "config.kernel");
            detail::read_if(k, "power", c.power);
            detail::read_if(k, "twy_power", c.twy_power);
            if (k.contains("stage_powers")) c.stage_powers = vector_from_json(k.at("stage_powers"));
            if (k.contains("basis")) c.basis = basis_from_string(k.at("basis").get<std::string>());
        }
        if (j.contains("mle")) {
            const auto& m = j.at("mle");
            detail::only_keys(m, {"restarts", "max_iterations", "tolerance", "perturbation_sd"}, "config.mle");
            detail::read_if(m, "restarts", c.restarts);
            detail::read_if(m, "max_iterations", c.max_iterations);
            detail::read_if(m, "tolerance", c.tolerance);
            detail::read_if(m, "perturbation_sd", c.perturbation_sd);
        }
        if (j.contains("mcmc")) {
            const auto& m = j.at("mcmc");
            detail::only_keys(m, {"iterations", "burn_in", "thinning", "chains", "adapt_window", "draws_per_sample"},
                              "config.mcmc");
            detail::read_if(m, "iterations", c.mcmc.iterations);
            detail::read_if(m, "burn_in", c.mcmc.burn_in);
            detail::read_if(m, "thinning", c.mcmc.thinning);
            detail::read_if(m, "chains", c.mcmc.chains);
            detail::read_if(m, "adapt_window", c.mcmc.adapt_window);
            detail::read_if(m, "draws_per_sample", c.draws_per_sample);
        }
        if (j.contains("prior")) {
            const auto& p = j.at("prior");
            detail::only_keys(p, {"a_lambda", "b_lambda", "a_sigma", "b_sigma", "a_gamma", "b_gamma", "a_alpha",
                                  "b_alpha", "a_theta", "b_theta"},
                              "config.prior");
            detail::read_if(p, "a_lambda", c.prior.a_lambda);
            detail::read_if(p, "b_lambda", c.prior.b_lambda);
            detail::read_if(p, "a_sigma", c.prior.a_sigma);
            detail::read_if(p, "b_sigma", c.prior.b_sigma);
            detail::read_if(p, "a_gamma", c.prior.a_gamma);
            detail::read_if(p, "b_gamma", c.prior.b_gamma);
            detail::read_if(p, "a_alpha", c.prior.a_alpha);
            detail::read_if(p, "b_alpha", c.prior.b_alpha);
            detail::read_if(p, "a_theta", c.prior.a_theta);
            detail::read_if(p, "b_theta", c.prior.b_theta);
        }
        if (j.contains("high_fidelity")) {
            const auto& h = j.at("high_fidelity");
            detail::only_keys(h, {"n", "t"}, "config.high_fidelity");
            detail::read_if(h, "n", c.high_fidelity.n);
            detail::read_if(h, "t", c.high_fidelity.t);
        }
        if (j.contains("design")) {
            const auto& d = j.at("design");
            detail::only_keys(d, {"proposals", "cooling", "initial_acceptance"}, "config.design");
            detail::read_if(d, "proposals", c.design.proposals);
            detail::read_if(d, "cooling", c.design.cooling);
            detail::read_if(d, "initial_acceptance", c.design.initial_acceptance);
        }
    } catch (const json::exception& e) {
        throw StructuralError(std::string("config: ") + e.what());
    }
    c.check();
    return c;
}

inline json to_json(const ExperimentConfig& c) {
    json ranges = json::array();
    for (const auto& r : c.ranges()) ranges.push_back({r.lo, r.hi});
    json models = json::array();
    for (auto m : c.models) models.push_back(to_string(m));
    json kernel{{"power", c.power}, {"twy_power", c.twy_power}, {"basis", to_string(c.basis)}};
    kernel["stage_powers"] = to_json(c.stage_powers ? *c.stage_powers : VectorXd::Constant(c.q(), 2.0));
    return json{
        {"function", to_string(c.function)},
        {"n", c.n},
        {"fidelity_ranges", ranges},
        {"test_size", c.test_size},
        {"replications", c.replications},
        {"models", models},
        {"kernel", kernel},
        {"inference", c.inference},
        {"uq", to_string(c.uq)},
        {"mle",
         {{"restarts", c.restarts},
          {"max_iterations", c.max_iterations},
          {"tolerance", c.tolerance},
          {"perturbation_sd", c.perturbation_sd}}},
        {"mcmc",
         {{"iterations", c.mcmc.iterations},
          {"burn_in", c.mcmc.burn_in},
          {"thinning", c.mcmc.thinning},
          {"chains", c.mcmc.chains},
          {"adapt_window", c.mcmc.adapt_window},
          {"draws_per_sample", c.draws_per_sample}}},
        {"prior",
         {{"a_lambda", c.prior.a_lambda},
          {"b_lambda", c.prior.b_lambda},
          {"a_sigma", c.prior.a_sigma},
          {"b_sigma", c.prior.b_sigma},
          {"a_gamma", c.prior.a_gamma},
          {"b_gamma", c.prior.b_gamma},
          {"a_alpha", c.prior.a_alpha},
          {"b_alpha", c.prior.b_alpha},
          {"a_theta", c.prior.a_theta},
          {"b_theta", c.prior.b_theta}}},
        {"high_fidelity", {{"n", c.high_fidelity_n()}, {"t", c.high_fidelity.t}}},
        {"design",
         {{"proposals", c.design.proposals},
          {"cooling", c.design.cooling},
          {"initial_acceptance", c.design.initial_acceptance}}},
        {"seed", c.seed},
    };
}

// --- one replication's data -------------------------------------------------

struct Split {
    Dataset train;
    MatrixXd test_inputs;  // N x p, uniform on [0,1]^p
    VectorXd truth;        // phi at the test inputs
};

/// Simulator outputs eta(x, t) for every row of a design with p input columns.
inline Dataset simulate(TestFunctionName f, const Design& design) {
    const MatrixXd x = design.columns(ColumnRole::input);
    const MatrixXd t = design.columns(ColumnRole::fidelity);
    require(x.cols() == input_dimension(f), "simulate: design has the wrong number of input columns");
    require(t.cols() == x.cols(), "simulate: need one cell size per input dimension");
    VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = grid_interpolate(f, t.row(i).transpose(), x.row(i).transpose());
    return Dataset(x, t, y);
}

inline MatrixXd uniform_inputs(int count, int p, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd x(count, p);
    for (int i = 0; i < count; ++i)
        for (int s = 0; s < p; ++s) x(i, s) = draw_uniform(rng);
    return x;
}

inline Split make_split(const ExperimentConfig& c, int rep) {
    const int p = c.p();
    Design d = maxpro(c.n, p + c.q(), c.replication_seed(rep, design_stream), c.design);
    d.with_roles(p);
    std::vector<Range> ranges(static_cast<std::size_t>(p), Range{0.0, 1.0});
    for (const auto& r : c.ranges()) ranges.push_back(r);
    d = map_ranges(d, ranges);
    Split s{simulate(c.function, d), uniform_inputs(c.test_size, p, c.replication_seed(rep, test_stream)), {}};
    s.truth.resize(c.test_size);
    for (int i = 0; i < c.test_size; ++i) s.truth(i) = evaluate(c.function, s.test_inputs.row(i).transpose());
    return s;
}

/// Training data of the high-fidelity baseline: a maximin LHD in x only,
/// simulated at a single fine cell size.
inline Dataset high_fidelity_data(const ExperimentConfig& c, int rep) {
    const int p = c.p();
    Design d = maximin_lhd(c.high_fidelity_n(), p, c.replication_seed(rep, high_fidelity_stream));
    const MatrixXd t = MatrixXd::Constant(d.n(), p, c.high_fidelity.t);
    VectorXd y(d.n());
    for (int i = 0; i < d.n(); ++i) y(i) = grid_interpolate(c.function, t.row(i).transpose(), d.points.row(i).transpose());
    return Dataset(d.points, t, y);
}

// --- metrics ----------------------------------------------------------------

struct Metrics {
    double mse = 0.0;
    double coverage = 0.0;
    double avg_se = 0.0;
};

inline Metrics score(const std::vector<PredictiveDistribution>& pred, const VectorXd& truth) {
    require(static_cast<Eigen::Index>(pred.size()) == truth.size() && truth.size() > 0,
            "score: prediction and truth lengths differ");
    Metrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double y = truth(static_cast<Eigen::Index>(i));
        const auto& d = pred[i];
        m.mse += (d.mean - y) * (d.mean - y);
        m.coverage += (y >= d.lower95 && y <= d.upper95) ? 1.0 : 0.0;
        m.avg_se += std::sqrt(d.variance);
    }
    const double N = static_cast<double>(pred.size());
    m.mse /= N;
    m.coverage /= N;
    m.avg_se /= N;
    return m;
}

struct ModelOutcome {
    EmulatorKind kind = EmulatorKind::config_k2;
    bool ok = false;
    std::string error;
    Metrics metrics;
    double fit_seconds = 0.0;
    double jitter = 0.0;
    double log_likelihood = std::numeric_limits<double>::quiet_NaN();
    std::vector<PredictiveDistribution> predictions;
};

struct ReplicationResult {
    int index = 0;
    std::vector<ModelOutcome> models;
};

struct ModelSummary {
    EmulatorKind kind = EmulatorKind::config_k2;
    int succeeded = 0;
    int failed = 0;
    Metrics mean;
    double mean_fit_seconds = 0.0;
    double max_jitter = 0.0;
};

struct BenchmarkResult {
    ExperimentConfig config;
    std::vector<ReplicationResult> replications;
    std::vector<ModelSummary> summary;

    const ModelSummary& of(EmulatorKind k) const {
        for (const auto& s : summary)
            if (s.kind == k) return s;
        throw StructuralError("benchmark result has no entry for " + to_string(k));
    }
};

inline std::vector<PredictiveDistribution> predict_all(const GpPredictor& gp, const MatrixXd& x) {
    std::vector<PredictiveDistribution> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(gp.predict(x.row(i).transpose()));
    return out;
}

inline std::vector<PredictiveDistribution> predict_all(const PosteriorPredictor& pp, const MatrixXd& x,
                                                       int draws_per_sample, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PredictiveDistribution> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto s = pp.predict(x.row(i).transpose(), draws_per_sample, rng);
        PredictiveDistribution d;
        d.mean = s.conditional_mean;
        d.variance = s.variance;
        d.lower95 = s.lower95;
        d.upper95 = s.upper95;
        out.push_back(d);
    }
    return out;
}

/// MLE fit and prediction for one model on one replication. Fit failures are
/// recorded in the outcome, never thrown.
inline ModelOutcome run_mle_model(const ExperimentConfig& c, int rep, EmulatorKind kind, const Split& split,
                                  const std::optional<AlphaInit>& init, bool keep_predictions = false) {
    ModelOutcome o;
    o.kind = kind;
    const auto start = std::chrono::steady_clock::now();
    try {
        const bool hf = kind == EmulatorKind::high_fidelity_gp;
        const Dataset train = hf ? high_fidelity_data(c, rep) : split.train;
        const MleResult fit =
            fit_mle(train, kind, c.mle_options(c.replication_seed(rep, mle_stream)), hf ? std::nullopt : init);
        const GpPredictor gp(train, fit.params, kind, c.uq);
        o.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        auto pred = predict_all(gp, split.test_inputs);
        o.metrics = score(pred, split.truth);
        o.jitter = gp.factor().jitter;
        o.log_likelihood = fit.log_likelihood;
        o.ok = true;
        if (keep_predictions) o.predictions = std::move(pred);
    } catch (const std::exception& e) {
        o.ok = false;
        o.error = e.what();
        o.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return o;
}

inline ModelOutcome run_bayes_model(const ExperimentConfig& c, int rep, const Split& split,
                                    const std::optional<AlphaInit>& init) {
    ModelOutcome o;
    o.kind = EmulatorKind::config_k2;
    const auto start = std::chrono::steady_clock::now();
    try {
        const McmcOptions mo = c.mcmc_options(c.replication_seed(rep, mcmc_stream));
        const auto chains = run_mwg(split.train, EmulatorKind::config_k2, c.prior, mo, init);
        const PosteriorPredictor pp(split.train, chains, mo);
        o.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        o.metrics = score(predict_all(pp, split.test_inputs, c.draws_per_sample, c.replication_seed(rep, predictive_stream)),
                          split.truth);
        o.ok = true;
    } catch (const std::exception& e) {
        o.error = e.what();
    }
    return o;
}

inline ReplicationResult run_replication(const ExperimentConfig& c, int rep) {
    ReplicationResult r;
    r.index = rep;
    const Split split = make_split(c, rep);
    std::optional<AlphaInit> init;
    try {
        init = init_alpha(split.train);
    } catch (const std::exception&) {
        init.reset();  // each fit retries its own initialization
    }
    for (auto kind : c.models)
        r.models.push_back(c.inference == "bayes" ? run_bayes_model(c, rep, split, init)
                                                  : run_mle_model(c, rep, kind, split, init));
    return r;
}

inline std::vector<ModelSummary> summarize(const ExperimentConfig& c, const std::vector<ReplicationResult>& reps) {
    std::vector<ModelSummary> out;
    for (auto kind : c.models) {
        ModelSummary s;
        s.kind = kind;
        for (const auto& r : reps)
            for (const auto& m : r.models) {
                if (m.kind != kind) continue;
                if (!m.ok) {
                    ++s.failed;
                    continue;
                }
                ++s.succeeded;
                s.mean.mse += m.metrics.mse;
                s.mean.coverage += m.metrics.coverage;
                s.mean.avg_se += m.metrics.avg_se;
                s.mean_fit_seconds += m.fit_seconds;
                s.max_jitter = std::max(s.max_jitter, m.jitter);
            }
        if (s.succeeded > 0) {
            const double k = s.succeeded;
            s.mean.mse /= k;
            s.mean.coverage /= k;
            s.mean.avg_se /= k;
            s.mean_fit_seconds /= k;
        } else {
            s.mean.mse = s.mean.coverage = s.mean.avg_se = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(s);
    }
    return out;
}

/// Runs every replication (in parallel when threads > 1) and aggregates.
/// Results are stored by replication index, so thread count and scheduling
/// never change the numbers.
template <class Progress>
BenchmarkResult run_benchmark(const ExperimentConfig& c, int threads, Progress&& progress) {
    c.check();
    BenchmarkResult out;
    out.config = c;
    out.replications.resize(static_cast<std::size_t>(c.replications));
    std::atomic<int> next{0};
    std::mutex report;
    auto worker = [&] {
        for (int rep = next++; rep < c.replications; rep = next++) {
            out.replications[static_cast<std::size_t>(rep)] = run_replication(c, rep);
            std::lock_guard<std::mutex> lock(report);
            progress(out.replications[static_cast<std::size_t>(rep)]);
        }
    };
    const int workers = std::clamp(threads, 1, c.replications);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    out.summary = summarize(c, out.replications);
    return out;
}

inline BenchmarkResult run_benchmark(const ExperimentConfig& c, int threads = 1) {
    return run_benchmark(c, threads, [](const ReplicationResult&) {});
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {
inline std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}
}  // namespace detail

/// Deterministic per-replication metrics (no timings).
inline void write_replications_csv(std::ostream& out, const BenchmarkResult& r) {
    out << "replication,model,status,mse,coverage,avg_se,jitter,log_likelihood,error\n";
    for (const auto& rep : r.replications)
        for (const auto& m : rep.models) {
            out << rep.index << ',' << to_string(m.kind) << ',' << (m.ok ? "ok" : "failed") << ',';
            if (m.ok)
                out << format_double(m.metrics.mse) << ',' << format_double(m.metrics.coverage) << ','
                    << format_double(m.metrics.avg_se) << ',' << format_double(m.jitter) << ','
                    << format_double(m.log_likelihood) << ",\n";
            else
                out << ",,,,," << detail::csv_safe(m.error) << '\n';
        }
}

/// Wall-clock fit times; kept apart from the metric files because they vary run to run.
inline void write_timings_csv(std::ostream& out, const BenchmarkResult& r) {
    out << "replication,model,fit_seconds\n";
    for (const auto& rep : r.replications)
        for (const auto& m : rep.models) out << rep.index << ',' << to_string(m.kind) << ',' << m.fit_seconds << '\n';
}

/// Aggregate report. `generated_at` is the only field that changes between
/// identical runs.
inline json aggregate_json(const BenchmarkResult& r) {
    json models = json::object();
    for (const auto& s : r.summary) {
        json m{{"replications", s.succeeded},
               {"failures", s.failed},
               {"mse", s.mean.mse},
               {"coverage", s.mean.coverage},
               {"avg_se", s.mean.avg_se},
               {"max_jitter", s.max_jitter}};
        if (s.kind == EmulatorKind::high_fidelity_gp)
            m["note"] = "trained on " + std::to_string(r.config.high_fidelity_n()) +
                        " points simulated at fixed cell size " + format_double(r.config.high_fidelity.t);
        json per_rep = json::array();
        for (const auto& rep : r.replications)
            for (const auto& o : rep.models)
                if (o.kind == s.kind) per_rep.push_back(o.ok ? json(o.metrics.mse) : json(nullptr));
        m["mse_by_replication"] = per_rep;
        models[to_string(s.kind)] = m;
    }
    return json{{"schema_version", benchmark_schema},
                {"generated_at", utc_timestamp()},
                {"config", to_json(r.config)},
                {"models", models}};
}

// --- plug-in versus fully Bayesian comparison on one split ------------------

struct ConvergenceEntry {
    std::string parameter;
    double value = 0.0;
    bool degenerate = false;
    bool flagged = false;  // value >= threshold or degenerate
};

struct McmcComparison {
    Metrics mle;
    Metrics bayes;
    double mle_log_likelihood = 0.0;
    std::vector<ConvergenceEntry> gelman_rubin;
    std::vector<std::array<double, 4>> acceptance;  // per chain, per block
    std::vector<int> rejected_factorizations;
    int retained_per_chain = 0;
    bool converged = true;
};

inline McmcComparison run_mcmc_compare(const ExperimentConfig& c, double threshold = 1.2) {
    c.check();
    McmcComparison out;
    const Split split = make_split(c, 0);
    const AlphaInit init = init_alpha(split.train);

    ExperimentConfig mle_cfg = c;
    mle_cfg.inference = "mle";
    const ModelOutcome mle = run_mle_model(mle_cfg, 0, EmulatorKind::config_k2, split, init);
    if (!mle.ok) throw EstimationError("mcmc-compare: MLE fit failed: " + mle.error);
    out.mle = mle.metrics;
    out.mle_log_likelihood = mle.log_likelihood;

    const McmcOptions mo = c.mcmc_options(c.replication_seed(0, mcmc_stream));
    const auto chains = run_mwg(split.train, EmulatorKind::config_k2, c.prior, mo, init);
    const PosteriorPredictor pp(split.train, chains, mo);
    out.bayes = score(predict_all(pp, split.test_inputs, c.draws_per_sample, c.replication_seed(0, predictive_stream)),
                      split.truth);

    out.retained_per_chain = static_cast<int>(chains.front().draws.size());
    for (const auto& ch : chains) {
        out.acceptance.push_back(ch.acceptance);
        out.rejected_factorizations.push_back(ch.rejected_factorizations);
    }
    const int m = static_cast<int>(chains.front().draws.front().beta.size());
    const auto names = parameter_names(m, split.train.p(), split.train.q());
    if (chains.size() >= 2 && out.retained_per_chain >= 10) {
        for (int i = 0; i < static_cast<int>(names.size()); ++i) {
            const ScaleReduction s = gelman_rubin(chains, i);
            ConvergenceEntry e{names[static_cast<std::size_t>(i)], s.value, s.degenerate,
                               s.degenerate || !(s.value < threshold)};
            out.converged = out.converged && !e.flagged;
            out.gelman_rubin.push_back(e);
        }
    } else {
        out.converged = false;
    }
    return out;
}

inline json to_json(const Metrics& m) { return json{{"mse", m.mse}, {"coverage", m.coverage}, {"avg_se", m.avg_se}}; }

inline json comparison_json(const ExperimentConfig& c, const McmcComparison& r) {
    json gr = json::array();
    for (const auto& e : r.gelman_rubin)
        gr.push_back({{"parameter", e.parameter},
                      {"value", e.degenerate ? json(nullptr) : json(e.value)},
                      {"degenerate", e.degenerate},
                      {"flagged", e.flagged}});
    json acc = json::array();
    for (std::size_t c2 = 0; c2 < r.acceptance.size(); ++c2) {
        json blocks = json::object();
        for (int b = 0; b < 4; ++b) blocks[metropolis_block_names[static_cast<std::size_t>(b)]] = r.acceptance[c2][static_cast<std::size_t>(b)];
        acc.push_back({{"chain", c2}, {"acceptance", blocks}, {"rejected_factorizations", r.rejected_factorizations[c2]}});
    }
    return json{{"schema_version", benchmark_schema},
                {"generated_at", utc_timestamp()},
                {"config", to_json(c)},
                {"mle", to_json(r.mle)},
                {"bayes", to_json(r.bayes)},
                {"retained_per_chain", r.retained_per_chain},
                {"gelman_rubin", gr},
                {"chains", acc},
                {"converged", r.converged}};
}

}  // namespace confgp

#endif
