#ifndef CONFGP_IO_HPP
#define CONFGP_IO_HPP

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "confgp/dataset.hpp"
#include "confgp/design.hpp"
#include "confgp/errors.hpp"
#include "confgp/gp_core.hpp"
#include "confgp/kernels.hpp"

namespace confgp {

using json = nlohmann::json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    double v = 0.0;
    const auto r = std::from_chars(s.data() + b, s.data() + e, v);
    if (r.ec != std::errc() || r.ptr != s.data() + e) throw StructuralError(where + ": cannot parse '" + s + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}
}  // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& where = "csv") {
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw StructuralError(where + ": empty file");
    for (auto& h : detail::split_csv_line(line)) t.header.push_back(detail::trim(h));
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != t.header.size())
            throw StructuralError(where + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, where + ":" + std::to_string(lineno)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open '" + path + "'");
    return read_csv(in, path);
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const MatrixXd& values) {
    require(static_cast<Eigen::Index>(header.size()) == values.cols(), "write_csv: header/column count mismatch");
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
        out << '\n';
    }
}

inline std::vector<std::string> numbered(const std::string& prefix, int count) {
    std::vector<std::string> out;
    for (int i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

/// Counts leading x1..xp and t1..tq columns of a header.
inline std::pair<int, int> header_dimensions(const std::vector<std::string>& header) {
    int p = 0, q = 0;
    while (p < static_cast<int>(header.size()) && header[p] == "x" + std::to_string(p + 1)) ++p;
    while (p + q < static_cast<int>(header.size()) && header[p + q] == "t" + std::to_string(q + 1)) ++q;
    return {p, q};
}

namespace detail {
inline MatrixXd block_of(const CsvTable& t, int first, int count) {
    MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), count);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (int j = 0; j < count; ++j) m(static_cast<Eigen::Index>(i), j) = t.rows[i][first + j];
    return m;
}
}  // namespace detail

// Dataset CSV: x1..xp,t1..tq,y
inline Dataset dataset_from_csv(const CsvTable& t, const std::string& where = "dataset") {
    const auto [p, q] = header_dimensions(t.header);
    if (p == 0 || static_cast<int>(t.header.size()) != p + q + 1 || t.header.back() != "y")
        throw StructuralError(where + ": header must be x1..xp,t1..tq,y");
    if (t.rows.empty()) throw StructuralError(where + ": no records");
    const MatrixXd y = detail::block_of(t, p + q, 1);
    return Dataset(detail::block_of(t, 0, p), detail::block_of(t, p, q), y.col(0));
}

inline Dataset read_dataset(const std::string& path) { return dataset_from_csv(read_csv_file(path), path); }

inline void write_dataset(std::ostream& out, const Dataset& d) {
    auto header = numbered("x", d.p());
    for (auto& h : numbered("t", d.q())) header.push_back(h);
    header.push_back("y");
    MatrixXd m(d.n(), d.p() + d.q() + 1);
    m << d.inputs(), d.fidelities(), d.outputs();
    write_csv(out, header, m);
}

// Design CSV: x1..xp,t1..tq
inline Design design_from_csv(const CsvTable& t, const std::string& where = "design") {
    const auto [p, q] = header_dimensions(t.header);
    if (p + q == 0 || static_cast<int>(t.header.size()) != p + q)
        throw StructuralError(where + ": header must be x1..xp,t1..tq");
    Design d = make_design(detail::block_of(t, 0, p + q), DesignProvenance::imported);
    d.with_roles(p);
    return d;
}

inline Design read_design(const std::string& path) { return design_from_csv(read_csv_file(path), path); }

inline void write_design(std::ostream& out, const Design& d) {
    std::vector<std::string> header;
    int xi = 0, ti = 0;
    for (auto role : d.roles) header.push_back(role == ColumnRole::input ? "x" + std::to_string(++xi)
                                                                         : "t" + std::to_string(++ti));
    write_csv(out, header, d.points);
}

/// FNV-1a (64-bit) over n, p, q and the raw bytes of every value.
inline std::string fingerprint(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::int64_t dims[3] = {d.n(), d.p(), d.q()};
    mix(dims, sizeof dims);
    auto mix_matrix = [&](const MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double v = m(i, j);
                mix(&v, sizeof v);
            }
    };
    mix_matrix(d.inputs());
    mix_matrix(d.fidelities());
    mix_matrix(d.outputs());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json to_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline VectorXd vector_from_json(const json& a) {
    VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

inline json to_json(const KernelParams& k) {
    return json{{"beta", to_json(k.beta)},         {"gamma", to_json(k.gamma)},
                {"alpha", to_json(k.alpha)},       {"theta", to_json(k.theta)},
                {"sigma1_sq", k.sigma1_sq},        {"sigma2_sq", k.sigma2_sq},
                {"power", k.power},                {"stage_powers", to_json(k.stage_powers)},
                {"twy_power", k.twy_power},        {"basis", to_string(k.basis)}};
}

inline KernelParams params_from_json(const json& j) {
    KernelParams k;
    k.basis = basis_from_string(j.at("basis").get<std::string>());
    k.beta = vector_from_json(j.at("beta"));
    k.gamma = vector_from_json(j.at("gamma"));
    k.alpha = vector_from_json(j.at("alpha"));
    k.theta = vector_from_json(j.at("theta"));
    k.sigma1_sq = j.at("sigma1_sq").get<double>();
    k.sigma2_sq = j.at("sigma2_sq").get<double>();
    k.power = j.at("power").get<double>();
    k.stage_powers = vector_from_json(j.at("stage_powers"));
    k.twy_power = j.at("twy_power").get<double>();
    return k;
}

inline constexpr int fitted_model_schema = 1;

struct FittedModel {
    EmulatorKind kind = EmulatorKind::config_k2;
    KernelParams params;
    std::string fingerprint;
    int n = 0, p = 0, q = 0;
    double jitter = 0.0;
    double log_likelihood = 0.0;
};

inline json to_json(const FittedModel& m) {
    return json{{"schema_version", fitted_model_schema},
                {"model", to_string(m.kind)},
                {"basis", to_string(m.params.basis)},
                {"params", to_json(m.params)},
                {"data", {{"n", m.n}, {"p", m.p}, {"q", m.q}, {"fingerprint", m.fingerprint}}},
                {"jitter", m.jitter},
                {"log_likelihood", m.log_likelihood}};
}

inline FittedModel fitted_model_from_json(const json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != fitted_model_schema)
        throw StructuralError("fitted model: unsupported schema_version " + std::to_string(version));
    FittedModel m;
    m.kind = emulator_from_string(j.at("model").get<std::string>());
    m.params = params_from_json(j.at("params"));
    const auto& d = j.at("data");
    m.n = d.at("n").get<int>();
    m.p = d.at("p").get<int>();
    m.q = d.at("q").get<int>();
    m.fingerprint = d.at("fingerprint").get<std::string>();
    m.jitter = j.at("jitter").get<double>();
    m.log_likelihood = j.at("log_likelihood").get<double>();
    return m;
}

/// Throws unless `data` is the dataset the model was fitted on.
inline void check_fingerprint(const FittedModel& m, const Dataset& data) {
    const std::string fp = fingerprint(data);
    if (fp != m.fingerprint)
        throw StructuralError("training data fingerprint " + fp + " does not match the model file (" +
                              m.fingerprint + "); refit the model on this dataset");
}

inline void write_predictions(std::ostream& out, const MatrixXd& x, const std::vector<PredictiveDistribution>& pred) {
    require(static_cast<std::size_t>(x.rows()) == pred.size(), "write_predictions: row count mismatch");
    auto header = numbered("x", static_cast<int>(x.cols()));
    for (const char* h : {"mean", "variance", "lo95", "hi95"}) header.emplace_back(h);
    MatrixXd m(x.rows(), x.cols() + 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto& d = pred[static_cast<std::size_t>(i)];
        m.row(i).head(x.cols()) = x.row(i);
        m.row(i).tail(4) << d.mean, d.variance, d.lower95, d.upper95;
    }
    write_csv(out, header, m);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw StructuralError(path + ": " + e.what());
    }
}

}  // namespace confgp

#endif
