// Acceptance suite: one checkable criterion per number, each printing a
// single PASS/FAIL line. Run with a criterion number (1..14) or with no
// arguments to run all of them. Exit code 0 iff everything requested passed.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "harvest/game.hpp"
#include "harvest/io.hpp"
#include "harvest/kernel.hpp"
#include "harvest/optimizer.hpp"
#include "harvest/payoff.hpp"
#include "harvest/solver.hpp"

#include "support.hpp"

using namespace harvest;
using namespace harvest::testsupport;

namespace {

bool g_all_pass = true;

void report(int crit, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d (%s): %s  [%s]\n", crit, name,
                pass ? "PASS" : "FAIL", detail.c_str());
    if (!pass) g_all_pass = false;
}

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

ModelParams shipped(const char* name) {
    return io::load_scenario(std::string(SCENARIO_DIR) + "/" + name + ".json");
}

// --- 1. kernel mass and symmetry --------------------------------------------
void criterion1() {
    const KernelEvaluator K(1.0);
    const int ny = 1001;
    const double dy = 1.0 / (ny - 1);
    double mass_err = 0.0;
    bool symmetric = true;
    for (int a = 0; a < 5; ++a) {
        const double t = 1e-3 * std::pow(1000.0, a / 4.0);  // up to t = 1
        for (int b = 0; b < 5; ++b) {
            const double x = b / 4.0;
            double mass = 0.0;
            for (int j = 0; j < ny; ++j) {
                const double w = (j == 0 || j == ny - 1) ? 0.5 * dy : dy;
                mass += w * K.neumann(t, x, j * dy);
            }
            mass_err = std::max(mass_err, std::abs(mass - 1.0));
            for (int c = 0; c < 5; ++c) {
                const double y = c / 4.0;
                if (K.neumann(t, x, y) != K.neumann(t, y, x)) symmetric = false;
            }
        }
    }
    report(1, "kernel mass & symmetry", mass_err <= 1e-8 && symmetric,
           fmt("max |L1 - 1| = %.2e, symmetry %s", mass_err,
               symmetric ? "exact" : "broken"));
}

// --- 2. kernel estimate exponents -------------------------------------------
void criterion2() {
    // R = 3 keeps the pinned window t in [1e-3, 1e-1] inside the power-law
    // regime (on short domains the Dirichlet spectral decay bends the fit).
    const KernelEvaluator K(3.0);
    std::vector<double> ts;
    for (int k = 0; k <= 8; ++k) ts.push_back(1e-3 * std::pow(100.0, k / 8.0));
    const std::vector<double> xs = {0.75, 1.5, 2.25};
    const EstimateReport r = verify_estimates(K, ts, xs, 901);
    const bool pass = std::abs(r.slope_sup_neumann + 0.5) <= 0.05 &&
                      std::abs(r.slope_gradl2_neumann + 0.75) <= 0.05 &&
                      std::abs(r.slope_sup_dirichlet + 0.5) <= 0.05 &&
                      std::abs(r.slope_gradl2_dirichlet + 0.75) <= 0.05 &&
                      r.mass_error_neumann <= 1e-8;
    report(2, "kernel estimate exponents", pass,
           fmt("sup slopes %.3f/%.3f, grad slopes %.3f/%.3f, mass err %.1e",
               r.slope_sup_neumann, r.slope_sup_dirichlet,
               r.slope_gradl2_neumann, r.slope_gradl2_dirichlet,
               r.mass_error_neumann));
}

// --- 3. duality identity -----------------------------------------------------
void criterion3() {
    const KernelEvaluator K(1.0);
    const std::vector<double> ts = {0.01, 0.05, 0.2};
    const std::vector<double> xs = {0.2, 0.5, 0.8};
    const double res_cos = verify_duality(
        K, [](double y) { return std::cos(M_PI * y); },
        [](double y) { return -M_PI * std::sin(M_PI * y); }, ts, xs, 401);
    // Order-2 decay observed on the quadratic datum, whose boundary terms
    // produce the clean O(dx^2) trapezoid error (the cosine datum is
    // even-extendable and superconverges past order 2).
    auto quad = [&](int nx) {
        return verify_duality(
            K, [](double y) { return y * y; }, [](double y) { return 2.0 * y; },
            ts, xs, nx);
    };
    const double r1 = quad(51), r2 = quad(101), r4 = quad(201);
    const double o1 = std::log2(r1 / r2), o2 = std::log2(r2 / r4);
    const bool pass = res_cos <= 1e-6 && o1 >= 1.7 && o2 >= 1.7;
    report(3, "duality identity", pass,
           fmt("cos residual %.2e at nx=401; quadratic orders %.2f, %.2f",
               res_cos, o1, o2));
}

// --- 4. maximum principle ----------------------------------------------------
void criterion4() {
    std::mt19937_64 rng(20240801);
    const Grid g{101, 200, 1.0, 1.0};
    double low = 0.0, high = 0.0;
    bool pass = true;
    for (int rep = 0; rep < 20; ++rep) {
        const ModelParams p = random_admissible_scenario(rng);
        const TimeMeasure mu = random_control(rng, 1.0, 1.0, 8, 0.5);
        const DerivedConstants dc = derive_constants(p);
        const Field phi = solve_forward(p, mu, g);
        low = std::min(low, phi.min_value());
        high = std::max(high, phi.max_value() - dc.M);
        if (phi.min_value() < -1e-10 || phi.max_value() > dc.M + 1e-10)
            pass = false;
    }
    report(4, "maximum principle", pass,
           fmt("20 scenarios: min undershoot %.1e, max overshoot %.1e", low,
               high));
}

// --- 5. equilibrium preservation ---------------------------------------------
void criterion5() {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 2.0);
    const Grid g{201, 400, 1.0, 1.0};
    const Field phi = solve_forward(p, TimeMeasure::zero(1.0, 1.0), g);
    double dev = 0.0;
    for (double v : phi.values()) dev = std::max(dev, std::abs(v - 1.0));
    report(5, "equilibrium preservation", dev <= 1e-8,
           fmt("sup |phi - h| = %.2e", dev));
}

// --- 6. logistic ODE oracle --------------------------------------------------
void criterion6() {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 0.5, 0.0, 2.0);
    const Grid g{201, 1600, 1.0, 1.0};
    const Field phi = solve_forward(p, TimeMeasure::zero(1.0, 1.0), g);
    const double expected = 1.0 / (1.0 + std::exp(-1.0));
    double err = 0.0;
    for (int i = 0; i < g.nx; ++i)
        err = std::max(err, std::abs(phi.at(g.nt, i) - expected));
    report(6, "logistic ODE oracle", err <= 1e-4,
           fmt("|phi(1) - %.6f| = %.2e", expected, err));
}

// --- 7. cross-solver agreement -----------------------------------------------
void criterion7() {
    // Controls with smooth densities: that is the regime where the scheme's
    // O(dt) time accuracy holds in the sup norm (atom kinks degrade the
    // pointwise-in-space rate; agreement with atoms is covered by the unit
    // tests at the 5e-3 tolerance).
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> um(0.0, 1.0);
    bool pass = true;
    double worst = 0.0, worst_order = 10.0;
    for (int s = 0; s < 5; ++s) {
        ModelParams p = random_admissible_scenario(rng);
        TimeMeasure mu = TimeMeasure::uniform_slices(1.0, 1.0, 4);
        for (auto& sl : mu.slices) {
            const double a = um(rng), b = 2.0 * um(rng), c = um(rng);
            sl.density.resize(41);
            for (int i = 0; i < 41; ++i)
                sl.density[i] = std::max(
                    0.0, 0.2 * (a + 0.5 * std::sin(b + 2.0 * M_PI * i / 40.0) + c));
        }
        const Grid ref{81, 320, 1.0, 1.0};
        const Field oracle = duhamel_forward(p, mu, ref);
        std::vector<double> errs;
        for (int nt : {40, 80, 160}) {
            const Grid g{81, nt, 1.0, 1.0};
            const Field fd = solve_forward(p, mu, g);
            double e = 0.0;
            for (int n = 0; n <= g.nt; ++n)
                for (int i = 0; i < g.nx; ++i)
                    e = std::max(e, std::abs(fd.at(n, i) -
                                             oracle.at(n * (ref.nt / nt), i)));
            errs.push_back(e);
        }
        worst = std::max(worst, errs.back());
        if (errs.back() > 5e-3) pass = false;
        const double order =
            0.5 * (std::log2(errs[0] / errs[1]) + std::log2(errs[1] / errs[2]));
        worst_order = std::min(worst_order, order);
        if (order < 1.0) pass = false;
    }
    report(7, "cross-solver agreement", pass,
           fmt("worst sup diff %.2e (tol 5e-3), worst dt-order %.2f", worst,
               worst_order));
}

// --- 8. first-order sensitivity ----------------------------------------------
void criterion8() {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 0.8, 0.0, 2.0);
    const Grid g{201, 400, 1.0, 1.0};
    std::mt19937_64 rng(88);
    const TimeMeasure mu = random_control(rng, 1.0, 1.0, 5, 0.3);
    const TimeMeasure nu = random_control(rng, 1.0, 1.0, 4, 0.5);
    const Field phi = solve_forward(p, mu, g);
    const Field phi1 = solve_linearized(p, mu, nu, phi, g);
    std::vector<double> errs;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const Field phi_eps = solve_forward(p, combine(1.0, mu, eps, nu), g);
        Field quot(g);
        for (std::size_t k = 0; k < quot.values().size(); ++k)
            quot.values()[k] =
                (phi_eps.values()[k] - phi.values()[k]) / eps - phi1.values()[k];
        errs.push_back(spacetime_l2(quot));
    }
    const double r1 = errs[0] / errs[1], r2 = errs[1] / errs[2];
    const bool pass = std::abs(r1 - 10.0) <= 3.0 && std::abs(r2 - 10.0) <= 3.0;
    report(8, "first-order sensitivity", pass,
           fmt("error ratios %.2f, %.2f (want 10 +- 3)", r1, r2));
}

// --- 9. Euler condition at the optimum ---------------------------------------
void criterion9() {
    const char* names[] = {"hub", "hub_interior", "park", "seasonal",
                           "smalldelta"};
    bool pass = true;
    std::string detail;
    for (const char* name : names) {
        const ModelParams p = shipped(name);
        const Grid g{201, 400, p.R, p.T};
        OptimizerConfig cfg;
        cfg.dictionary_size = 64;
        const OptimizationReport r = optimize(p, g, cfg);
        const bool ok = r.converged && r.euler_residual_value <= 1e-6;
        if (!ok) pass = false;
        detail += fmt("%s %.1e%s ", name, r.euler_residual_value,
                      ok ? "" : "(FAIL)");
    }
    report(9, "Euler condition at optimum", pass, detail);
}

// --- 10. adjoint gate ----------------------------------------------------------
void criterion10() {
    const ModelParams p = shipped("hub");
    const Grid g{201, 400, p.R, p.T};
    std::mt19937_64 rng(10);
    const TimeMeasure mu = random_control(rng, 1.0, 1.0, 6, 0.4);
    const GradientField gf = gradient_density(p, mu, g);
    const auto dict = direction_dictionary(p, g, 64, 1);
    double worst = 0.0;
    for (const auto& nu : dict) {
        const double via_g = pair_field(nu, gf.values);
        const double via_phi1 = directional_derivative(p, mu, nu, g);
        worst = std::max(worst, std::abs(via_g - via_phi1));
    }
    report(10, "adjoint gate", worst <= 1e-4,
           fmt("max dictionary discrepancy %.2e (tol 1e-4)", worst));
}

// --- 11. concavity regime ------------------------------------------------------
void criterion11() {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 25.0);
    const Grid g{101, 200, 1.0, 1.0};
    std::mt19937_64 rng(11);
    bool all_neg = true;
    double worst_keypoint = -1e9;
    for (int pair = 0; pair < 10; ++pair) {
        const TimeMeasure a = random_control(rng, 1.0, 1.0, 4, 0.04);
        const TimeMeasure b = random_control(rng, 1.0, 1.0, 5, 0.04);
        const CertificateReport cert = concavity_certificate(p, a, b, 0.05, g);
        if (cert.refused || !cert.all_negative) all_neg = false;
        for (double v : cert.keypoint)
            worst_keypoint = std::max(worst_keypoint, v);
    }
    // Central-difference cross-check of j'' at second order.
    const TimeMeasure a = random_control(rng, 1.0, 1.0, 4, 0.04);
    const TimeMeasure b = random_control(rng, 1.0, 1.0, 4, 0.04);
    auto central_err = [&](int n_points) {
        const SegmentScan s = payoff_segment_scan(p, a, b, n_points, g);
        const double step = s.zeta[1] - s.zeta[0];
        double worst = 0.0;
        for (std::size_t q = 1; q + 1 < s.zeta.size(); ++q)
            worst = std::max(
                worst, std::abs((s.j[q + 1] - 2 * s.j[q] + s.j[q - 1]) /
                                    (step * step) -
                                s.j_second[q]));
        return worst;
    };
    const double e1 = central_err(5), e2 = central_err(9), e3 = central_err(17);
    const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
    const bool order2 = o1 >= 1.5 && o2 >= 1.5;
    report(11, "concavity regime", all_neg && order2,
           fmt("max keypoint %.2e (< 0), central-diff orders %.2f, %.2f",
               worst_keypoint, o1, o2));
}

// --- 12. local uniqueness ------------------------------------------------------
void criterion12() {
    const ModelParams p = shipped("smalldelta");
    const Grid g{101, 200, p.R, p.T};
    OptimizerConfig cfg;
    cfg.delta_cap = 0.05;
    const OptimizationReport base = optimize(p, g, cfg);
    if (!base.converged) {
        report(12, "local uniqueness", false, "base run did not converge");
        return;
    }
    const ProbeReport probe = local_uniqueness_probe(p, base, 5, g, cfg);
    const bool pass = !probe.refused && probe.max_pairwise_distance <= 1e-3 &&
                      probe.all_segments_concave;
    report(12, "local uniqueness", pass,
           fmt("max pairwise weak-* distance %.2e (tol 1e-3), segments %s",
               probe.max_pairwise_distance,
               probe.all_segments_concave ? "concave" : "not concave"));
}

// --- 13. Nash equilibrium ------------------------------------------------------
void criterion13() {
    std::ifstream in(std::string(SCENARIO_DIR) + "/nash_interior.json");
    io::json sj;
    in >> sj;
    GameSpec spec = io::game_from_json(sj);
    const Grid g{101, 100, spec.base.R, spec.base.T};
    NashConfig cfg;
    cfg.tol = 1e-4;
    const NashReport r = nash_solve(spec, g, cfg);
    bool pass = r.converged;
    for (double res : r.residuals)
        if (res > 1e-5) pass = false;
    const auto probes = default_probe_set(g.R, g.T);
    const double sym = weakstar_distance(r.profile[0], r.profile[1], probes);
    if (sym > 1e-3) pass = false;
    // 32 unilateral deviations per player.
    std::mt19937_64 rng(13);
    double best_gain = -1e9;
    for (int i = 0; i < 2; ++i) {
        const ModelParams pi = spec.player_params(i);
        const TimeMeasure eta = opponents_total(r.profile, i, g.R, g.T);
        const Field phi = solve_forward(pi, r.profile[i], g, {}, &eta);
        const double j_eq = payoff_from_state(pi, r.profile[i], phi).value;
        for (int dev = 0; dev < 32; ++dev) {
            TimeMeasure trial = random_control(rng, g.R, g.T, 8, 0.2);
            for (int k = 0; k < trial.slice_count(); ++k) {
                const double b = budget_value(trial, pi.budget, k);
                if (b > 1.0)
                    for (auto& at : trial.slices[k].atoms) at.mass /= b;
            }
            const Field phit = solve_forward(pi, trial, g, {}, &eta);
            best_gain = std::max(
                best_gain, payoff_from_state(pi, trial, phit).value - j_eq);
        }
    }
    if (best_gain > 1e-5) pass = false;
    report(13, "Nash equilibrium", pass,
           fmt("converged=%d rounds=%d residuals %.1e/%.1e symmetry %.1e "
               "best deviation gain %.1e",
               r.converged, r.rounds, r.residuals[0], r.residuals[1], sym,
               best_gain));
}

// --- 14. stability shape -------------------------------------------------------
void criterion14() {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 0.8, 0.0, 2.0);
    const Grid g{101, 200, 1.0, 1.0};
    std::mt19937_64 rng(14);
    const TimeMeasure mu = random_control(rng, 1.0, 1.0, 4, 0.3);
    std::vector<double> ratios;
    for (double s : {0.02, 0.0632, 0.2}) {
        TimeMeasure mu_hat = mu;
        mu_hat.slices[1].atoms.push_back({0.55, s});
        std::vector<double> ph(21);
        for (int i = 0; i < 21; ++i)
            ph[i] = 0.8 + 0.5 * s * std::cos(M_PI * i / 20.0);
        const GapReport r = stability_gap(p, mu, mu_hat, p.initial_density,
                                          Profile(ph, 1.0), g);
        ratios.push_back(r.ratio);
    }
    const double lo = *std::min_element(ratios.begin(), ratios.end());
    const double hi = *std::max_element(ratios.begin(), ratios.end());
    report(14, "stability shape", hi / lo < 3.0,
           fmt("ratio spread %.2f over a 10x perturbation span (tol 3)",
               hi / lo));
}

}  // namespace

int main(int argc, char** argv) {
    using CriterionFn = void (*)();
    const CriterionFn fns[] = {criterion1,  criterion2,  criterion3,
                               criterion4,  criterion5,  criterion6,
                               criterion7,  criterion8,  criterion9,
                               criterion10, criterion11, criterion12,
                               criterion13, criterion14};
    if (argc > 1) {
        const int c = std::atoi(argv[1]);
        if (c < 1 || c > 14) {
            std::fprintf(stderr, "usage: %s [criterion 1..14]\n", argv[0]);
            return 2;
        }
        fns[c - 1]();
    } else {
        for (const auto fn : fns) fn();
    }
    return g_all_pass ? 0 : 1;
}
