// mvk: command-line front end for the multivariate Krawtchouk library.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvk/mvk.hpp"

namespace fs = std::filesystem;
using mvk::json;

namespace {

enum Exit : int {
    ok = 0,
    check_failed = 1,
    validation = 2,
    exceptional = 3,
    cap_exceeded = 4,
    runtime = 5,
};

/// Base tolerance and the looser ones derived from it.
struct Tolerances {
    double base = 1e-10;

    double structure() const { return base; }
    double spectrum() const { return base; }
    double eigen() const { return 10 * base; }
    double orthogonality() const { return base; }
    double norms() const { return 100 * base; }
    double duality() const { return 10 * base; }
    double oracle() const { return base; }

    json to_json() const {
        return json{{"base", base},         {"structure", structure()}, {"spectrum", spectrum()},
                    {"eigen", eigen()},     {"orthogonality", orthogonality()}, {"norms", norms()},
                    {"duality", duality()}, {"oracle", oracle()}};
    }
};

struct Options {
    std::string params;
    std::string out;
    double tol = 1e-10;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::size_t cap = mvk::default_state_cap;
    std::string level = "fast";
    double inject_u = 0.0;
    std::vector<double> rahman_p;
    int rahman_N = 0;
};

void print_report(std::ostream& os, const mvk::Report& r) {
    for (const auto& c : r.checks()) {
        os << (c.passed() ? "PASS " : "FAIL ") << r.title() << "." << c.name << "  residual=" << mvk::format_double(c.residual)
           << "  tol=" << mvk::format_double(c.tolerance);
        if (!c.detail.empty()) os << "  (" << c.detail << ")";
        os << "\n";
    }
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + mvk::format_double(v[i]);
    return s;
}

void finish_outputs(const Options& o, mvk::RunManifest& manifest, const std::vector<std::pair<std::string, std::string>>& files) {
    if (o.out.empty()) return;
    for (const auto& [name, text] : files) {
        mvk::write_text(fs::path(o.out) / name, text);
        manifest.outputs.push_back(name);
    }
    mvk::write_json(fs::path(o.out) / "manifest.json", manifest.to_json());
}

mvk::ParamsFile load(const Options& o) {
    if (o.params.empty()) throw mvk::ValidationError("--params <file> is required");
    return mvk::load_params(o.params);
}

const mvk::ModelParams& krawtchouk(const mvk::ParamsFile& f, const char* command) {
    if (f.model != "krawtchouk") throw mvk::ValidationError(std::string(command) + " needs a krawtchouk parameter file");
    return f.krawtchouk;
}

json spectral_json(const mvk::SpectralData& s) {
    return json{{"lambda", s.lambda},
                {"u", mvk::to_json(s.u)},
                {"a", mvk::to_json(s.a)},
                {"eta", s.eta.all()},
                {"eta_bar", s.eta_bar},
                {"eta_dual", s.eta_dual}};
}

int cmd_spectrum(const Options& o) {
    const auto f = load(o);
    const auto& P = krawtchouk(f, "spectrum");
    const Tolerances tol{o.tol};
    const auto s = mvk::solve_spectrum(P);
    const auto rep = mvk::verify_spectral_identities(P, s, tol.spectrum());
    const auto sec = mvk::secular_residuals(P, s);

    std::cout << "lambda = (" << join(s.lambda) << ")\n";
    std::cout << "eta = (" << join(s.eta.all()) << ")\n";
    std::cout << "eta_bar = (" << join(s.eta_bar) << ")\n";
    std::cout << "eta_dual = (" << join(s.eta_dual) << ")\n";
    print_report(std::cout, rep);

    mvk::CsvWriter csv;
    std::vector<std::string> head{"j", "lambda", "secular_residual"};
    for (int i = 0; i < P.n; ++i) head.push_back("u_" + std::to_string(i + 1) + "j");
    head.push_back("eta_bar");
    csv.header(head);
    for (int j = 0; j < P.n; ++j) {
        std::vector<double> row{s.lambda[static_cast<std::size_t>(j)], sec[static_cast<std::size_t>(j)]};
        for (int i = 0; i < P.n; ++i) row.push_back(s.u(i, j));
        row.push_back(s.eta_bar[static_cast<std::size_t>(j)]);
        csv.row(std::to_string(j + 1), row);
    }
    json doc = spectral_json(s);
    doc["report"] = mvk::to_json(rep);

    mvk::RunManifest m{"spectrum", f.raw, tol.to_json()};
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"spectrum.csv", csv.str()}, {"spectrum.json", doc.dump(2) + "\n"}});
    return rep.all_passed() ? ok : check_failed;
}

int cmd_table(const Options& o) {
    const auto f = load(o);
    const auto& P = krawtchouk(f, "table");
    const Tolerances tol{o.tol};
    const mvk::StateSpace X(P.n, P.N, o.cap);
    const auto s = mvk::solve_spectrum(P);
    const auto table = mvk::build_table(s, X);
    const auto g = mvk::gram_matrix(P, s, table, X);

    mvk::Report rep("table");
    rep.add("gram_offdiag", g.worst_offdiag, tol.orthogonality());
    rep.add("gram_norms", g.worst_diag_rel, tol.norms());

    mvk::CsvWriter csv;
    std::vector<std::string> head{"x\\m"};
    for (std::size_t m = 0; m < X.size(); ++m) head.push_back(mvk::lattice_label(X.point(m)));
    csv.header(head);
    for (std::size_t x = 0; x < X.size(); ++x) {
        const Eigen::VectorXd row = table.values.row(static_cast<Eigen::Index>(x));
        csv.row(mvk::lattice_label(X.point(x)), std::vector<double>(row.data(), row.data() + row.size()));
    }
    json meta = spectral_json(s);
    meta["params"] = f.raw;
    meta["ordering"] = "graded-lex";
    meta["report"] = mvk::to_json(rep);

    if (o.out.empty()) std::cout << csv.str();
    print_report(o.out.empty() ? std::cerr : std::cout, rep);
    mvk::RunManifest m{"table", f.raw, tol.to_json()};
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"table.csv", csv.str()}, {"table_meta.json", meta.dump(2) + "\n"}});
    return rep.all_passed() ? ok : check_failed;
}

int verify_rahman_file(const Options& o, const mvk::ParamsFile& f) {
    const Tolerances tol{o.tol};
    const auto sys = mvk::derive_dual_system(f.rahman);
    const auto rep = mvk::verify_rahman(sys, f.N, tol.base, std::min(tol.base, 1e-12));
    print_report(std::cout, rep);
    for (const auto& n : sys.notes) std::cout << "note: " << n << "\n";
    mvk::RunManifest m{"verify", f.raw, tol.to_json()};
    m.extra["level"] = o.level;
    m.extra["notes"] = sys.notes;
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"verify.json", mvk::to_json(rep).dump(2) + "\n"}});
    return rep.all_passed() ? ok : check_failed;
}

int cmd_verify(const Options& o) {
    const auto f = load(o);
    if (f.model == "rahman") return verify_rahman_file(o, f);
    const auto& P = f.krawtchouk;
    const Tolerances tol{o.tol};
    const bool full = o.level == "full";
    const mvk::StateSpace X(P.n, P.N, o.cap);
    const auto W = mvk::stationary_weight(P, X);
    std::vector<mvk::Report> reports;
    reports.push_back(mvk::verify_structure(mvk::rates(P), X, W, tol.structure()));

    mvk::RunManifest m{"verify", f.raw, tol.to_json()};
    m.extra["level"] = o.level;

    std::optional<mvk::SpectralData> spec;
    try {
        spec = mvk::solve_spectrum(P);
    } catch (const mvk::ExceptionalParameters& e) {
        // Numeric fallback: orthonormal eigenbasis of H.
        const auto basis = mvk::numeric_eigenbasis(P, X, std::min(o.cap, mvk::dense_cap));
        const auto H = mvk::build_H(mvk::rates(P), X).dense();
        const auto I = Eigen::MatrixXd::Identity(H.rows(), H.cols());
        mvk::Report nb("numeric_eigenbasis");
        const double scale = std::max(1.0, basis.values.cwiseAbs().maxCoeff());
        nb.add("orthonormal", (basis.vectors.transpose() * basis.vectors - I).cwiseAbs().maxCoeff(), tol.duality());
        nb.add("eigen_residual", (H * basis.vectors - basis.vectors * basis.values.asDiagonal()).cwiseAbs().maxCoeff() / scale,
               tol.duality());
        reports.push_back(nb);
        for (const auto& r : reports) print_report(std::cout, r);
        std::cerr << e.what() << "\n";
        m.reports = reports;
        finish_outputs(o, m, {});
        return exceptional;
    }
    auto& s = *spec;
    if (o.inject_u != 0.0) {
        s.u(0, 0) += o.inject_u;
        m.extra["injected_u_perturbation"] = o.inject_u;
    }
    reports.push_back(mvk::verify_spectral_identities(P, s, tol.spectrum()));
    const auto table = mvk::build_table(s, X);
    reports.push_back(mvk::verify_eigen_equation(s, P, X, table, tol.eigen()));
    {
        const auto g = mvk::gram_matrix(W, s, table, X);
        mvk::Report orth("orthogonality");
        orth.add("gram_offdiag", g.worst_offdiag, tol.orthogonality());
        orth.add("gram_norms", g.worst_diag_rel, tol.norms());
        reports.push_back(orth);
    }
    if (full) {
        reports.push_back(mvk::verify_duality(W, s, table, X, tol.duality(), tol.norms()));
        reports.push_back(mvk::verify_degree_structure(table, X, tol.norms()));
        const auto oracle = mvk::oracle_table(s, X);
        mvk::Report orc("oracle");
        const double scale = std::max(1.0, table.values.cwiseAbs().maxCoeff());
        orc.add("generating_function", (oracle.values - table.values).cwiseAbs().maxCoeff() / scale, tol.oracle(),
                "relative to max |P|");
        reports.push_back(orc);
    }
    bool passed = true;
    json all = json::array();
    for (const auto& r : reports) {
        print_report(std::cout, r);
        passed = passed && r.all_passed();
        all.push_back(mvk::to_json(r));
    }
    std::cout << (passed ? "all checks passed\n" : "some checks failed\n");
    m.reports = reports;
    finish_outputs(o, m, {{"verify.json", all.dump(2) + "\n"}});
    return passed ? ok : check_failed;
}

int cmd_simulate(const Options& o) {
    const auto f = load(o);
    if (f.model == "rahman") {
        throw mvk::ValidationError("Rahman dual rates are signed; the process is explosive and cannot be simulated");
    }
    const auto& P = f.krawtchouk;
    const mvk::SimSettings sim = f.simulation.value_or(mvk::SimSettings{});
    const mvk::StateSpace X(P.n, P.N, o.cap);
    const auto W = mvk::stationary_weight(P, X);
    const auto R = mvk::rates(P);

    mvk::SimConfig cfg;
    cfg.initial_state = sim.initial_state;
    cfg.events = sim.events;
    cfg.horizon_time = sim.horizon_time;
    if (cfg.events == 0 && cfg.horizon_time == 0.0) cfg.events = 1'000'000;
    cfg.replicas = sim.replicas;
    cfg.seed = o.seed_given ? o.seed : sim.seed.value_or(o.seed);
    const auto res = cfg.replicas > 1 ? mvk::gillespie_replicas(R, X, cfg, &W) : mvk::gillespie_run(R, X, cfg, &W);

    double gap = 0.0;
    try {
        gap = mvk::solve_spectrum(P).lambda.front();
    } catch (const mvk::ExceptionalParameters& e) {
        gap = std::min(e.reference_low(), *std::min_element(P.q.begin(), P.q.end()));
    }
    const double T = sim.trace_time > 0.0 ? sim.trace_time : 20.0 / gap;
    std::vector<int> start = sim.initial_state.empty() ? std::vector<int>(static_cast<std::size_t>(P.n), 0) : sim.initial_state;
    const auto trace = mvk::evolve_distribution(R, X, mvk::delta_distribution(X, start), T, sim.trace_steps, &W);

    std::cout << "events = " << res.event_count << "\n";
    std::cout << "simulated_time = " << mvk::format_double(res.elapsed_time) << "\n";
    std::cout << "tv_distance_to_W = " << mvk::format_double(res.tv_distance_to_W) << "\n";
    std::cout << "final_state = (" << mvk::lattice_label(res.final_state) << ")\n";
    std::cout << "uniformization_rate = " << mvk::format_double(trace.Lambda) << "\n";
    std::cout << "trace_final_tv = " << mvk::format_double(trace.tv.back()) << "\n";
    std::cout << "relative_entropy_monotone = " << (trace.entropy_monotone ? "true" : "false") << "\n";

    mvk::CsvWriter occ;
    occ.header({"rank", "x", "occupation", "W"});
    for (std::size_t i = 0; i < X.size(); ++i) {
        occ.row_strings({std::to_string(i), mvk::lattice_label(X.point(i)), mvk::format_double(res.occupation[i]),
                         mvk::format_double(W[i])});
    }
    mvk::CsvWriter tr;
    std::vector<std::string> head{"time", "tv", "relative_entropy"};
    for (std::size_t i = 0; i < X.size(); ++i) head.push_back("p[" + mvk::lattice_label(X.point(i)) + "]");
    tr.header(head);
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        std::vector<double> row{trace.tv[k], trace.relative_entropy[k]};
        row.insert(row.end(), trace.distributions[k].data(), trace.distributions[k].data() + trace.distributions[k].size());
        tr.row(mvk::format_double(trace.times[k]), row);
    }

    mvk::Report rep("simulation");
    rep.add("occupation_mass", std::abs(std::accumulate(res.occupation.begin(), res.occupation.end(), 0.0) - 1.0), 1e-12);
    rep.add("trace_mass_drift", trace.worst_mass_drift, 1e-12);
    rep.add("trace_nonnegative", std::max(0.0, -trace.most_negative), 0.0);
    rep.add("entropy_monotone", trace.entropy_monotone ? 0.0 : 1.0, 0.0);
    print_report(std::cout, rep);

    mvk::RunManifest m{"simulate", f.raw, Tolerances{o.tol}.to_json()};
    m.seed = cfg.seed;
    m.rng = mvk::rng_family;
    m.extra["events"] = res.event_count;
    m.extra["replicas"] = cfg.replicas;
    m.extra["uniformization_rate"] = trace.Lambda;
    m.extra["trace_time"] = T;
    m.extra["tv_distance_to_W"] = res.tv_distance_to_W;
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"occupation.csv", occ.str()}, {"trace.csv", tr.str()}});
    return rep.all_passed() ? ok : check_failed;
}

int cmd_rahman(const Options& o) {
    mvk::RahmanParams rp;
    int N = o.rahman_N;
    json raw;
    if (!o.params.empty()) {
        const auto f = mvk::load_params(o.params);
        if (f.model != "rahman") throw mvk::ValidationError("rahman needs a rahman parameter file");
        rp = f.rahman;
        N = f.N;
        raw = f.raw;
    } else {
        if (o.rahman_p.size() != 4) throw mvk::ValidationError("give --params or --p p1,p2,p3,p4");
        rp.p = {o.rahman_p[0], o.rahman_p[1], o.rahman_p[2], o.rahman_p[3]};
        if (N < 1) throw mvk::ValidationError("--N must be >= 1");
        raw = json{{"schema", mvk::params_schema}, {"model", "rahman"}, {"N", N}, {"p", o.rahman_p}};
    }
    const Tolerances tol{o.tol};
    const auto sys = mvk::derive_dual_system(rp);
    const auto rep = mvk::verify_rahman(sys, N, tol.base, std::min(tol.base, 1e-12));

    mvk::CsvWriter csv;
    csv.header({"quantity", "value"});
    auto put = [&](const std::string& k, double v) { csv.row_strings({k, mvk::format_double(v)}); };
    put("S", rp.S());
    put("delta", rp.delta());
    put("p1_dual", sys.p_dual[0]);
    put("q1_dual", sys.q_dual[0]);
    put("p2_dual", sys.p_dual[1]);
    put("q2_dual", sys.q_dual[1]);
    put("lambda1_dual", sys.lambda_dual[0]);
    put("lambda2_dual", sys.lambda_dual[1]);
    put("t", sys.definitional.t);
    put("u", sys.definitional.u);
    put("v", sys.definitional.v);
    put("w", sys.definitional.w);
    put("t_printed", sys.printed.t);
    put("u_printed", sys.printed.u);
    put("v_printed", sys.printed.v);
    put("w_printed", sys.printed.w);
    put("eta0", sys.eta.eta0);
    put("eta1", sys.eta.eta[0]);
    put("eta2", sys.eta.eta[1]);
    put("eta1_dual", sys.eta_dual[1]);
    put("eta2_dual", sys.eta_dual[2]);
    put("eta_bar1_dual", sys.eta_bar_dual[0]);
    put("eta_bar2_dual", sys.eta_bar_dual[1]);

    std::cout << csv.str();
    print_report(std::cout, rep);
    for (const auto& n : sys.notes) std::cout << "note: " << n << "\n";

    mvk::RunManifest m{"rahman", raw, tol.to_json()};
    m.extra["notes"] = sys.notes;
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"rahman.csv", csv.str()}});
    return rep.all_passed() ? ok : check_failed;
}

int cmd_gen_oracle(const Options& o) {
    const auto f = load(o);
    const auto& P = krawtchouk(f, "gen-oracle");
    const Tolerances tol{o.tol};
    const mvk::StateSpace X(P.n, P.N, o.cap);
    const auto s = mvk::solve_spectrum(P);
    const auto oracle = mvk::oracle_table(s, X);
    const auto table = mvk::build_table(s, X);

    mvk::Report rep("oracle");
    const double diff = (oracle.values - table.values).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, table.values.cwiseAbs().maxCoeff());
    rep.add("generating_function", diff / scale, tol.oracle(), "max abs " + mvk::format_double(diff));

    mvk::CsvWriter csv;
    std::vector<std::string> head{"x\\m"};
    for (std::size_t m = 0; m < X.size(); ++m) head.push_back(mvk::lattice_label(X.point(m)));
    csv.header(head);
    for (std::size_t x = 0; x < X.size(); ++x) {
        const Eigen::VectorXd row = oracle.values.row(static_cast<Eigen::Index>(x));
        csv.row(mvk::lattice_label(X.point(x)), std::vector<double>(row.data(), row.data() + row.size()));
    }
    if (o.out.empty()) std::cout << csv.str();
    print_report(o.out.empty() ? std::cerr : std::cout, rep);
    mvk::RunManifest m{"gen-oracle", f.raw, tol.to_json()};
    m.reports.push_back(rep);
    finish_outputs(o, m, {{"oracle.csv", csv.str()}});
    return rep.all_passed() ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate Krawtchouk polynomials from birth-death processes"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool needs_params) {
        auto* p = sub->add_option("--params", o.params, "Parameter file (JSON, schema mvk.params/1)");
        if (needs_params) p->required();
        sub->add_option("--out", o.out, "Directory for output files and manifest.json");
        sub->add_option("--tol", o.tol, "Base tolerance (default 1e-10)")->check(CLI::PositiveNumber);
        sub->add_option("--cap", o.cap, "Maximum lattice size")->check(CLI::PositiveNumber);
        sub->add_option("--level", o.level, "Check level")->check(CLI::IsMember({"fast", "full"}));
    };

    auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues, u matrix and probabilities");
    common(spectrum, true);
    auto* table = app.add_subcommand("table", "Polynomial table P_m(x) as CSV");
    common(table, true);
    auto* verify = app.add_subcommand("verify", "Run the identity checks and report residuals");
    common(verify, true);
    verify->add_option("--inject-u-perturbation", o.inject_u, "Debug: add this to u(1,1) before building the table")
        ->group("");
    auto* simulate = app.add_subcommand("simulate", "Gillespie sampling and uniformization trace");
    common(simulate, true);
    simulate->add_option("--seed", o.seed, "64-bit seed")->each([&](const std::string&) { o.seed_given = true; });
    auto* rahman = app.add_subcommand("rahman", "Bivariate Rahman parameters and recurrence checks");
    common(rahman, false);
    rahman->add_option("--p", o.rahman_p, "p1,p2,p3,p4")->delimiter(',')->expected(4);
    rahman->add_option("--N", o.rahman_N, "Lattice size N");
    auto* gen = app.add_subcommand("gen-oracle", "Polynomial table from the generating function");
    common(gen, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return validation;
    }

    try {
        if (*spectrum) return cmd_spectrum(o);
        if (*table) return cmd_table(o);
        if (*verify) return cmd_verify(o);
        if (*simulate) return cmd_simulate(o);
        if (*rahman) return cmd_rahman(o);
        if (*gen) return cmd_gen_oracle(o);
    } catch (const mvk::ExceptionalParameters& e) {
        std::cerr << "error: " << e.what() << "\n"
                  << "hint: coincident death intensities; `verify` checks the numeric eigenbasis of H instead\n";
        return exceptional;
    } catch (const mvk::CapExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cap_exceeded;
    } catch (const mvk::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return validation;
    } catch (const mvk::SingularRahman& e) {
        std::cerr << "error: " << e.what() << "\n";
        return validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime;
    }
    return runtime;
}
