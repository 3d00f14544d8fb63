// Batch front-end: solve / optimize / certify / nash / verify-kernel on a
// scenario file. Every command writes its machine-readable report before any
// human-readable summary; exit codes are 0 = success, 1 = numerical or
// certificate failure, 2 = input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "harvest/game.hpp"
#include "harvest/io.hpp"
#include "harvest/kernel.hpp"
#include "harvest/optimizer.hpp"
#include "harvest/payoff.hpp"
#include "harvest/solver.hpp"

namespace fs = std::filesystem;
using namespace harvest;

namespace {

struct Manifest {
    std::string command;
    std::string scenario;
    std::string mu_path;
    std::string mu2_path;
    std::string out_dir = "out";
    int nx = 201;
    int nt = 400;
    std::uint64_t seed = 1;
    double tol = 1e-6;
    double delta_cap = 0.0;
    int max_iters = 500;
    int players = 0;
};

io::json manifest_json(const Manifest& m) {
    return {{"command", m.command}, {"scenario", m.scenario},
            {"grid", {m.nx, m.nt}},  {"seed", m.seed},
            {"tol", m.tol},          {"delta_cap", m.delta_cap},
            {"max_iters", m.max_iters}};
}

Grid make_grid(const Manifest& m, const ModelParams& p) {
    Grid g{m.nx, m.nt, p.R, p.T};
    g.require_valid();
    return g;
}

void prepare_out(const Manifest& m) {
    std::error_code ec;
    fs::create_directories(m.out_dir, ec);
    if (ec || !fs::is_directory(m.out_dir))
        throw InputError("cannot create output directory: " + m.out_dir);
}

ModelParams load_checked_scenario(const Manifest& m, const Grid** grid_out,
                                  Grid& grid_storage) {
    if (!fs::exists(m.scenario))
        throw InputError("scenario file does not exist: " + m.scenario);
    ModelParams p = io::load_scenario(m.scenario);
    grid_storage = make_grid(m, p);
    *grid_out = &grid_storage;
    const ValidationReport v = validate_scenario(p, grid_storage);
    if (!v.admissible()) {
        std::ostringstream os;
        os << "scenario violates hypotheses:";
        for (const auto& viol : v.violations)
            os << "\n  " << viol.code << " " << viol.detail;
        throw InputError(os.str());
    }
    return p;
}

TimeMeasure load_mu_or_zero(const std::string& path, const ModelParams& p) {
    if (path.empty()) return TimeMeasure::zero(p.R, p.T);
    if (!fs::exists(path)) throw InputError("measure file does not exist: " + path);
    TimeMeasure mu = io::load_measure(path);
    mu.require_box(p.R, p.T);
    return mu;
}

int cmd_solve(const Manifest& m) {
    Grid grid;
    const Grid* g = nullptr;
    const ModelParams p = load_checked_scenario(m, &g, grid);
    const TimeMeasure mu = load_mu_or_zero(m.mu_path, p);
    prepare_out(m);

    const DerivedConstants dc = derive_constants(p);
    const Field phi = solve_forward(p, mu, *g);

    std::vector<double> mass_trace;
    for (int n = 0; n <= g->nt; ++n) {
        double s = 0.0;
        for (int i = 0; i < g->nx; ++i) s += g->node_weight(i) * phi.at(n, i);
        mass_trace.push_back(s);
    }
    double sup_dev_h = 0.0;
    for (int n = 0; n <= g->nt; ++n)
        for (int i = 0; i < g->nx; ++i)
            sup_dev_h = std::max(sup_dev_h,
                                 std::abs(phi.at(n, i) -
                                          p.carrying_cap(g->t(n), g->x(i))));

    io::json rep;
    rep["manifest"] = manifest_json(m);
    rep["min_phi"] = phi.min_value();
    rep["max_phi"] = phi.max_value();
    rep["M"] = dc.M;
    rep["max_principle_margin_low"] = phi.min_value();
    rep["max_principle_margin_high"] = dc.M - phi.max_value();
    rep["sup_distance_to_h"] = sup_dev_h;
    rep["mass_trace"] = mass_trace;
    io::write_json(m.out_dir + "/solve_report.json", rep);
    io::write_json(m.out_dir + "/phi.json", io::field_to_json(phi));
    {
        std::ofstream csv(m.out_dir + "/phi.csv");
        io::field_to_csv(phi, csv);
    }
    std::cout << "solve: min phi = " << phi.min_value()
              << ", max phi = " << phi.max_value() << ", M = " << dc.M << "\n";
    const bool ok = phi.min_value() >= -1e-10 && phi.max_value() <= dc.M + 1e-10;
    std::cout << (ok ? "maximum principle holds\n"
                     : "maximum principle violated\n");
    return ok ? 0 : 1;
}

OptimizerConfig optimizer_config(const Manifest& m) {
    OptimizerConfig cfg;
    cfg.max_iters = m.max_iters;
    cfg.seed = m.seed;
    cfg.delta_cap = m.delta_cap;
    return cfg;
}

int cmd_optimize(const Manifest& m) {
    Grid grid;
    const Grid* g = nullptr;
    const ModelParams p = load_checked_scenario(m, &g, grid);
    prepare_out(m);

    const OptimizationReport rep = optimize(p, *g, optimizer_config(m));
    io::json j = io::optimization_to_json(rep);
    j["manifest"] = manifest_json(m);
    io::write_json(m.out_dir + "/optimize_report.json", j);
    io::write_json(m.out_dir + "/mu_opt.json", io::measure_to_json(rep.mu_opt));
    {
        std::ofstream csv(m.out_dir + "/j_trace.csv");
        io::trace_to_csv(rep.J_trace, "J", csv);
    }
    std::cout << "optimize: J = " << rep.payoff.value << ", gap = " << rep.fw_gap
              << ", euler residual = " << rep.euler_residual_value << " ("
              << rep.status << ")\n";
    return rep.converged ? 0 : 1;
}

int cmd_certify(const Manifest& m) {
    Grid grid;
    const Grid* g = nullptr;
    const ModelParams p = load_checked_scenario(m, &g, grid);
    prepare_out(m);

    TimeMeasure mu_star;
    io::json j;
    j["manifest"] = manifest_json(m);
    if (!m.mu_path.empty()) {
        mu_star = load_mu_or_zero(m.mu_path, p);
    } else {
        const OptimizationReport opt = optimize(p, *g, optimizer_config(m));
        mu_star = opt.mu_opt;
        j["optimize"] = io::optimization_to_json(opt);
    }

    const auto dict = direction_dictionary(p, *g, 64, m.seed);
    const ResidualReport rr = euler_residual(p, mu_star, dict, *g);
    j["euler_residual"] = rr.value;
    j["euler_admissible_directions"] = rr.admissible_count;
    bool ok = rr.value <= m.tol;

    TimeMeasure other = m.mu2_path.empty() ? TimeMeasure::zero(p.R, p.T)
                                           : load_mu_or_zero(m.mu2_path, p);
    const double eps = measure_difference(mu_star, other).sup_total_variation();
    if (eps > 1e-12) {
        const SegmentScan scan = payoff_segment_scan(p, other, mu_star, 9, *g);
        {
            std::ofstream csv(m.out_dir + "/jscan.csv");
            io::scan_to_csv(scan, csv);
        }
        const double probe =
            m.delta_cap > 0 ? m.delta_cap
                            : std::max(mu_star.sup_total_variation(),
                                       other.sup_total_variation()) + 1e-12;
        const CertificateReport cert =
            concavity_certificate(p, other, mu_star, probe, *g);
        j["certificate"] = io::certificate_to_json(cert);
        if (cert.refused || !cert.all_negative) ok = false;
    } else {
        j["certificate"] = {{"skipped", "segment endpoints coincide"}};
        {
            std::ofstream csv(m.out_dir + "/jscan.csv");
            csv << "zeta,j,j_second\n";
        }
    }
    io::write_json(m.out_dir + "/certify_report.json", j);
    std::cout << "certify: euler residual = " << rr.value << " over "
              << rr.admissible_count << " admissible directions; "
              << (ok ? "pass" : "fail") << "\n";
    return ok ? 0 : 1;
}

int cmd_nash(const Manifest& m) {
    if (!fs::exists(m.scenario))
        throw InputError("scenario file does not exist: " + m.scenario);
    std::ifstream in(m.scenario);
    io::json sj;
    try {
        in >> sj;
    } catch (const io::json::exception& e) {
        throw InputError("scenario parse error: " + std::string(e.what()));
    }
    GameSpec spec = io::game_from_json(sj, m.players);
    if (m.delta_cap > 0) spec.delta_cap = m.delta_cap;
    Grid grid{m.nx, m.nt, spec.base.R, spec.base.T};
    grid.require_valid();
    const ValidationReport v = validate_scenario(spec.base, grid);
    if (!v.admissible())
        throw InputError("scenario violates hypotheses: " +
                         v.violations.front().code + " " +
                         v.violations.front().detail);
    prepare_out(m);

    NashConfig cfg;
    cfg.inner = optimizer_config(m);
    cfg.tol = m.tol;
    const NashReport rep = nash_solve(spec, grid, cfg);
    io::json j = io::nash_to_json(rep);
    j["manifest"] = manifest_json(m);
    io::write_json(m.out_dir + "/nash_report.json", j);
    for (int i = 0; i < spec.player_count(); ++i)
        io::write_json(m.out_dir + "/mu_player" + std::to_string(i) + ".json",
                       io::measure_to_json(rep.profile[i]));
    {
        std::ofstream csv(m.out_dir + "/displacement.csv");
        csv << "round,player,displacement\n";
        for (std::size_t r = 0; r < rep.displacement_trace.size(); ++r)
            for (std::size_t i = 0; i < rep.displacement_trace[r].size(); ++i)
                csv << r << "," << i << ","
                    << io::num(rep.displacement_trace[r][i]) << "\n";
    }
    std::cout << "nash: " << (rep.converged ? "converged" : "not converged")
              << " in " << rep.rounds << " rounds\n";
    return rep.converged ? 0 : 1;
}

int cmd_verify_kernel(const Manifest& m) {
    Grid grid;
    const Grid* g = nullptr;
    const ModelParams p = load_checked_scenario(m, &g, grid);
    prepare_out(m);

    KernelEvaluator K(p.R);
    std::vector<double> ts;
    for (int k = 0; k <= 8; ++k)
        ts.push_back(1e-3 * std::pow(100.0, k / 8.0));
    const std::vector<double> xs = {0.25 * p.R, 0.5 * p.R, 0.75 * p.R};
    const EstimateReport est = verify_estimates(K, ts, xs);

    const std::vector<double> td = {0.01, 0.05, 0.2};
    const double duality = verify_duality(
        K, [&](double y) { return std::cos(M_PI * y / p.R); },
        [&](double y) { return -M_PI / p.R * std::sin(M_PI * y / p.R); }, td, xs,
        401);

    io::json j;
    j["manifest"] = manifest_json(m);
    j["estimates"] = io::estimate_to_json(est);
    j["duality_residual"] = duality;
    const bool ok = est.pass && duality <= 1e-6;
    j["pass"] = ok;
    io::write_json(m.out_dir + "/kernel_report.json", j);
    std::cout << "verify-kernel: sup slope " << est.slope_sup_neumann
              << ", grad slope " << est.slope_gradl2_neumann
              << ", duality residual " << duality << " -> "
              << (ok ? "pass" : "fail") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D fish-harvesting control toolkit"};
    app.require_subcommand(1);

    Manifest m;
    std::string grid_spec = "201,400";
    auto add_common = [&](CLI::App* sub, bool needs_scenario = true) {
        auto* s = sub->add_option("--scenario", m.scenario, "scenario JSON file");
        if (needs_scenario) s->required();
        sub->add_option("--grid", grid_spec, "grid as nx,nt (default 201,400)");
        sub->add_option("--out", m.out_dir, "output directory (default out)");
        sub->add_option("--seed", m.seed, "seed for randomized probes");
        sub->add_option("--tol", m.tol, "certificate tolerance");
        sub->add_option("--delta-cap", m.delta_cap, "sup-TV cap (C_delta)");
        sub->add_option("--max-iters", m.max_iters, "optimizer iteration cap");
    };

    auto* solve = app.add_subcommand("solve", "run the forward equation");
    add_common(solve);
    solve->add_option("--mu", m.mu_path, "control measure file (default zero)");

    auto* opt = app.add_subcommand("optimize", "maximize the payoff");
    add_common(opt);

    auto* cert = app.add_subcommand("certify", "Euler residual and concavity");
    add_common(cert);
    cert->add_option("--mu", m.mu_path, "candidate optimum (default: optimize)");
    cert->add_option("--mu2", m.mu2_path, "second segment endpoint (default 0)");

    auto* nash = app.add_subcommand("nash", "best-response Nash iteration");
    add_common(nash);
    nash->add_option("--players", m.players, "replicate base data to m players");

    auto* vk = app.add_subcommand("verify-kernel", "kernel estimates and duality");
    add_common(vk);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::istringstream gs(grid_spec);
        char comma = 0;
        if (!(gs >> m.nx >> comma >> m.nt) || comma != ',')
            throw InputError("--grid must be nx,nt");
        if (solve->parsed()) m.command = "solve";
        if (opt->parsed()) m.command = "optimize";
        if (cert->parsed()) m.command = "certify";
        if (nash->parsed()) m.command = "nash";
        if (vk->parsed()) m.command = "verify-kernel";

        if (solve->parsed()) return cmd_solve(m);
        if (opt->parsed()) return cmd_optimize(m);
        if (cert->parsed()) return cmd_certify(m);
        if (nash->parsed()) return cmd_nash(m);
        if (vk->parsed()) return cmd_verify_kernel(m);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        // Leave a failure report rather than an empty directory.
        try {
            std::error_code ec;
            fs::create_directories(m.out_dir, ec);
            io::write_json(m.out_dir + "/" + (m.command.empty() ? "run" : m.command) +
                               "_report.json",
                           {{"manifest", manifest_json(m)},
                            {"status", "failed"},
                            {"error", e.what()}});
        } catch (...) {
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
