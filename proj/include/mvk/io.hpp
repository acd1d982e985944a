#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mvk/errors.hpp"
#include "mvk/lattice.hpp"
#include "mvk/model.hpp"
#include "mvk/rahman.hpp"
#include "mvk/report.hpp"

namespace mvk {

inline constexpr const char* version = "1.0.0";
inline constexpr const char* params_schema = "mvk.params/1";

using json = nlohmann::ordered_json;

/// Optional "simulation" block of a parameter file.
struct SimSettings {
    std::uint64_t events = 0;
    double horizon_time = 0.0;
    std::vector<int> initial_state;
    int replicas = 1;
    std::optional<std::uint64_t> seed;
    double trace_time = 0.0;  // 0: 20 / min lambda
    int trace_steps = 200;
};

struct ParamsFile {
    std::string model;  // "krawtchouk" or "rahman"
    int N = 0;
    ModelParams krawtchouk;
    RahmanParams rahman;
    std::optional<SimSettings> simulation;
    json raw;
};

namespace detail {

template <class T>
T require(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("parameter file lacks \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad value for \"") + key + "\": " + e.what());
    }
}

}  // namespace detail

inline ParamsFile parse_params(const json& j) {
    if (!j.is_object()) throw ValidationError("parameter file must be a JSON object");
    const auto schema = detail::require<std::string>(j, "schema");
    if (schema != params_schema) throw ValidationError("unsupported schema \"" + schema + "\", expected " + params_schema);
    ParamsFile f;
    f.raw = j;
    f.model = j.value("model", std::string("krawtchouk"));
    f.N = detail::require<int>(j, "N");
    const auto p = detail::require<std::vector<double>>(j, "p");
    if (f.model == "krawtchouk") {
        const auto q = detail::require<std::vector<double>>(j, "q");
        if (j.contains("n") && detail::require<int>(j, "n") != static_cast<int>(p.size())) {
            throw ValidationError("\"n\" does not match the length of \"p\"");
        }
        f.krawtchouk = ModelParams::make(f.N, p, q);
    } else if (f.model == "rahman") {
        if (p.size() != 4) throw ValidationError("Rahman parameters need exactly four p values");
        if (f.N < 1) throw ValidationError("N must be >= 1");
        f.rahman.p = {p[0], p[1], p[2], p[3]};
        f.rahman.validate();
    } else {
        throw ValidationError("unknown model \"" + f.model + "\"");
    }
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        SimSettings sim;
        sim.events = s.value("events", std::uint64_t{0});
        sim.horizon_time = s.value("horizon_time", 0.0);
        sim.initial_state = s.value("initial_state", std::vector<int>{});
        sim.replicas = s.value("replicas", 1);
        if (s.contains("seed")) sim.seed = s.at("seed").get<std::uint64_t>();
        sim.trace_time = s.value("trace_time", 0.0);
        sim.trace_steps = s.value("trace_steps", 200);
        f.simulation = sim;
    }
    return f;
}

inline ParamsFile load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open parameter file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("parameter file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_params(j);
}

/// Round-trip decimal rendering used in every CSV cell.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json to_json(const Report& r) {
    json checks = json::array();
    for (const auto& c : r.checks()) {
        json e{{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"passed", c.passed()}};
        if (!c.detail.empty()) e["detail"] = c.detail;
        checks.push_back(std::move(e));
    }
    return json{{"title", r.title()}, {"passed", r.all_passed()}, {"worst_residual", r.worst_residual()}, {"checks", checks}};
}

inline json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// CSV with a manifest back-reference on the first line.
class CsvWriter {
public:
    explicit CsvWriter(std::string manifest = "manifest.json") { out_ << "# manifest=" << manifest << "\n"; }

    void header(const std::vector<std::string>& cols) { row_strings(cols); }

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    void row(const std::string& label, const std::vector<double>& values) {
        out_ << label;
        for (double v : values) out_ << "," << format_double(v);
        out_ << "\n";
    }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

/// Lattice point as a CSV-safe label, e.g. "1;0;2".
inline std::string lattice_label(Coords x) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ";" : "") + std::to_string(x[i]);
    return s;
}

struct RunManifest {
    RunManifest(std::string cmd, json params_echo, json tol)
        : command(std::move(cmd)), params(std::move(params_echo)), tolerances(std::move(tol)) {}

    std::string command;
    json params;
    json tolerances = json::object();
    std::optional<std::uint64_t> seed;
    std::string rng;
    json extra = json::object();
    std::vector<Report> reports;
    std::vector<std::string> outputs;

    json to_json() const {
        json j{{"command", command}, {"version", version}, {"params", params}, {"tolerances", tolerances}};
        if (seed) j["seed"] = *seed;
        if (!rng.empty()) j["rng"] = rng;
        for (const auto& [k, v] : extra.items()) j[k] = v;
        json summary = json::array();
        bool ok = true;
        for (const auto& r : reports) {
            summary.push_back(mvk::to_json(r));
            ok = ok && r.all_passed();
        }
        j["residual_summary"] = summary;
        j["passed"] = ok;
        j["outputs"] = outputs;
        return j;
    }
};

}  // namespace mvk
