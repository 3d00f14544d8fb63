#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "harvest/field.hpp"
#include "harvest/grid.hpp"
#include "harvest/measure.hpp"
#include "harvest/model.hpp"

namespace harvest {

struct SolveOptions {
    double theta = 0.5;       // diffusion weighting, in [1/2, 1]
    int max_picard = 200;     // cap for the frozen-coefficient iteration
    double tol_picard = 1e-10;

    void require_valid() const {
        if (!(theta >= 0.5 && theta <= 1.0))
            throw InputError("solve options: theta must lie in [1/2, 1]");
    }
};

namespace detail {

// Thomas algorithm; diag/upper/lower are consumed, rhs becomes the solution.
inline void thomas_solve(std::span<double> lower, std::span<double> diag,
                         std::span<double> upper, std::span<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

// One theta-step workspace. The implicit matrix
//   A = I - theta dt L + dt diag(mvec) - dt diag(reac)
// uses the ghost-node Neumann Laplacian L (mirror rows at both ends, so
// constants are exact discrete solutions); the measure term is always fully
// implicit, which keeps A an M-matrix for admissible data.
struct ThetaStep {
    const Grid& g;
    double theta;
    std::vector<double> lower, diag, upper, rhs;

    explicit ThetaStep(const Grid& grid, double th)
        : g(grid), theta(th), lower(grid.nx - 1), diag(grid.nx),
          upper(grid.nx - 1), rhs(grid.nx) {}

    // rhs <- (I + (1-theta) dt L) v
    void load_explicit(std::span<const double> v) {
        const double lam = (1.0 - theta) * g.dt() / (g.dx() * g.dx());
        const int nx = g.nx;
        rhs[0] = v[0] + lam * (2.0 * v[1] - 2.0 * v[0]);
        for (int i = 1; i < nx - 1; ++i)
            rhs[i] = v[i] + lam * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
        rhs[nx - 1] = v[nx - 1] + lam * (2.0 * v[nx - 2] - 2.0 * v[nx - 1]);
    }

    void add_rhs(int i, double v) { rhs[i] += v; }

    // Solves A u = rhs with the given zeroth-order coefficients.
    void solve(std::span<const double> mvec, std::span<const double> reac,
               std::span<double> out) {
        const double lam = theta * g.dt() / (g.dx() * g.dx());
        const int nx = g.nx;
        for (int i = 0; i < nx; ++i)
            diag[i] = 1.0 + 2.0 * lam + g.dt() * (mvec[i] - reac[i]);
        for (int i = 0; i < nx - 1; ++i) {
            lower[i] = -lam;
            upper[i] = -lam;
        }
        upper[0] = -2.0 * lam;
        lower[nx - 2] = -2.0 * lam;
        thomas_solve(lower, diag, upper, rhs);
        for (int i = 0; i < nx; ++i) out[i] = rhs[i];
    }
};

// Per-step node densities: index n holds the slice seen by the implicit
// step ending at t_n.
using MeasureSteps = std::vector<std::vector<double>>;

inline MeasureSteps measure_steps(const TimeMeasure& mu, const Grid& g) {
    MeasureSteps out(g.nt + 1);
    int k = 0;
    for (int n = 1; n <= g.nt; ++n) {
        const double tn = g.t(n);
        while (k + 1 < mu.slice_count() &&
               tn > mu.breakpoints[k + 1] + 1e-12 * mu.T)
            ++k;
        out[n] = slice_node_density(mu, k, g);
    }
    return out;
}

inline void add_steps(MeasureSteps& a, const MeasureSteps& b) {
    for (std::size_t n = 1; n < a.size(); ++n) {
        if (b[n].empty()) continue;
        if (a[n].empty()) a[n] = b[n];
        else
            for (std::size_t i = 0; i < a[n].size(); ++i) a[n][i] += b[n][i];
    }
}

// Model coefficients sampled once on the run grid. alpha_old/hcap_old hold
// alpha(t_n, x_i) and h(t_n, x_i); the reaction at step n -> n+1 is frozen
// at the old time level.
struct DiscreteProblem {
    Grid grid;
    double theta = 0.5;
    std::vector<double> phi0;
    Field alpha;  // alpha(t_n, x_i)
    Field hcap;   // h(t_n, x_i)
};

inline DiscreteProblem discretize(const ModelParams& p, const Grid& g,
                                  const SolveOptions& opts) {
    g.require_valid();
    opts.require_valid();
    DiscreteProblem d{g, opts.theta, {}, Field(g), Field(g)};
    d.phi0.resize(g.nx);
    for (int i = 0; i < g.nx; ++i) d.phi0[i] = p.initial_density(g.x(i));
    d.alpha = sample_on_grid(p.repro_rate, g);
    d.hcap = sample_on_grid(p.carrying_cap, g);
    return d;
}

inline const std::vector<double>& step_or_zero(const MeasureSteps& m, int n,
                                               const std::vector<double>& zero) {
    return m[n].empty() ? zero : m[n];
}

inline Field forward_march(const DiscreteProblem& d, const MeasureSteps& mvec) {
    const Grid& g = d.grid;
    ThetaStep step(g, d.theta);
    Field phi(g);
    for (int i = 0; i < g.nx; ++i) phi.at(0, i) = d.phi0[i];
    std::vector<double> reac(g.nx);
    const std::vector<double> zero(g.nx, 0.0);
    for (int n = 0; n < g.nt; ++n) {
        for (int i = 0; i < g.nx; ++i)
            reac[i] = d.alpha.at(n, i) * (d.hcap.at(n, i) - phi.at(n, i));
        step.load_explicit(phi.trace(n));
        step.solve(step_or_zero(mvec, n + 1, zero), reac, phi.trace(n + 1));
    }
    if (!phi.all_finite())
        throw SolverError("solve_forward: non-finite state (ill-conditioned step)");
    return phi;
}

inline Field linearized_march(const DiscreteProblem& d, const MeasureSteps& mvec,
                              const MeasureSteps& nvec, const Field& phi_star) {
    const Grid& g = d.grid;
    ThetaStep step(g, d.theta);
    Field phi1(g);
    std::vector<double> reac(g.nx);
    const std::vector<double> zero(g.nx, 0.0);
    for (int n = 0; n < g.nt; ++n) {
        step.load_explicit(phi1.trace(n));
        const auto& nv = step_or_zero(nvec, n + 1, zero);
        for (int i = 0; i < g.nx; ++i) {
            reac[i] = d.alpha.at(n, i) * (d.hcap.at(n, i) - phi_star.at(n, i));
            step.add_rhs(i, -g.dt() * nv[i] * phi_star.at(n + 1, i) -
                                g.dt() * d.alpha.at(n, i) * phi1.at(n, i) *
                                    phi_star.at(n + 1, i));
        }
        step.solve(step_or_zero(mvec, n + 1, zero), reac, phi1.trace(n + 1));
    }
    return phi1;
}

inline Field second_order_march(const DiscreteProblem& d,
                                const MeasureSteps& mvec,
                                const MeasureSteps& nvec, const Field& phi_star,
                                const Field& phi1) {
    const Grid& g = d.grid;
    ThetaStep step(g, d.theta);
    Field phi2(g);
    std::vector<double> reac(g.nx);
    const std::vector<double> zero(g.nx, 0.0);
    for (int n = 0; n < g.nt; ++n) {
        step.load_explicit(phi2.trace(n));
        const auto& nv = step_or_zero(nvec, n + 1, zero);
        for (int i = 0; i < g.nx; ++i) {
            reac[i] = d.alpha.at(n, i) * (d.hcap.at(n, i) - phi_star.at(n, i));
            step.add_rhs(
                i, -2.0 * g.dt() * nv[i] * phi1.at(n + 1, i) -
                       g.dt() * d.alpha.at(n, i) *
                           (phi2.at(n, i) * phi_star.at(n + 1, i) +
                            2.0 * phi1.at(n, i) * phi1.at(n + 1, i)));
        }
        step.solve(step_or_zero(mvec, n + 1, zero), reac, phi2.trace(n + 1));
    }
    return phi2;
}

inline Field adjoint_march(const DiscreteProblem& d, const MeasureSteps& mvec,
                           const MeasureSteps& src, const Field& phi_star) {
    const Grid& g = d.grid;
    ThetaStep step(g, d.theta);
    Field adj(g);
    std::vector<double> reac(g.nx);
    const std::vector<double> zero(g.nx, 0.0);
    for (int k = g.nt; k >= 1; --k) {
        if (k == g.nt) {
            for (int i = 0; i < g.nx; ++i) step.rhs[i] = 0.0;
        } else {
            // C_k p^{k+1} = (I + (1-theta) dt L) p^{k+1}
            //               - dt alpha(t_k) phi*^{k+1} p^{k+1}
            step.load_explicit(adj.trace(k + 1));
            for (int i = 0; i < g.nx; ++i)
                step.add_rhs(i, -g.dt() * d.alpha.at(k, i) *
                                    phi_star.at(k + 1, i) * adj.at(k + 1, i));
        }
        const auto& sv = step_or_zero(src, k, zero);
        for (int i = 0; i < g.nx; ++i) {
            step.add_rhs(i, g.dt() * sv[i]);
            reac[i] = d.alpha.at(k - 1, i) *
                      (d.hcap.at(k - 1, i) - phi_star.at(k - 1, i));
        }
        step.solve(step_or_zero(mvec, k, zero), reac, adj.trace(k));
    }
    for (int i = 0; i < g.nx; ++i) adj.at(0, i) = adj.at(1, i);
    return adj;
}

inline MeasureSteps total_steps(const TimeMeasure& mu, const Grid& g,
                                const TimeMeasure* background) {
    MeasureSteps m = measure_steps(mu, g);
    if (background) add_steps(m, measure_steps(*background, g));
    return m;
}

// Derivative of the adjoint state along a control direction d (entering both
// the dynamics coefficient and the adjoint source): differentiates the
// backward recursion A_{k-1} p^k = C_k p^{k+1} + dt s^k, giving
//   A_{k-1} p1^k = C_k p1^{k+1} + dt [ d^k (1 - p^k)
//                  - alpha(t_{k-1}) phi1^{k-1} p^k
//                  - alpha(t_k) phi1^{k+1} p^{k+1} ].
// Needed for Hessian-vector products in the optimizer's Newton polish.
inline Field adjoint_derivative_march(const DiscreteProblem& d,
                                      const MeasureSteps& mvec,
                                      const MeasureSteps& dvec,
                                      const Field& phi_star, const Field& phi1,
                                      const Field& adj) {
    const Grid& g = d.grid;
    ThetaStep step(g, d.theta);
    Field p1(g);
    std::vector<double> reac(g.nx);
    const std::vector<double> zero(g.nx, 0.0);
    for (int k = g.nt; k >= 1; --k) {
        if (k == g.nt) {
            for (int i = 0; i < g.nx; ++i) step.rhs[i] = 0.0;
        } else {
            step.load_explicit(p1.trace(k + 1));
            for (int i = 0; i < g.nx; ++i)
                step.add_rhs(i, -g.dt() * d.alpha.at(k, i) *
                                    (phi_star.at(k + 1, i) * p1.at(k + 1, i) +
                                     phi1.at(k + 1, i) * adj.at(k + 1, i)));
        }
        const auto& dv = step_or_zero(dvec, k, zero);
        for (int i = 0; i < g.nx; ++i) {
            step.add_rhs(i, g.dt() * (dv[i] * (1.0 - adj.at(k, i)) -
                                      d.alpha.at(k - 1, i) * phi1.at(k - 1, i) *
                                          adj.at(k, i)));
            reac[i] = d.alpha.at(k - 1, i) *
                      (d.hcap.at(k - 1, i) - phi_star.at(k - 1, i));
        }
        step.solve(step_or_zero(mvec, k, zero), reac, p1.trace(k));
    }
    for (int i = 0; i < g.nx; ++i) p1.at(0, i) = p1.at(1, i);
    return p1;
}

// Discrete pairing of a per-step node-density family with a grid field;
// identical to pair_field of the measure it came from.
inline double pair_steps(const MeasureSteps& m, const Field& f) {
    const Grid& g = f.grid();
    double s = 0.0;
    for (int n = 1; n <= g.nt; ++n) {
        if (m[n].empty()) continue;
        double row = 0.0;
        for (int i = 0; i < g.nx; ++i)
            row += g.node_weight(i) * m[n][i] * f.at(n, i);
        s += g.dt() * row;
    }
    return s;
}

inline MeasureSteps axpy_steps(const MeasureSteps& base, double c,
                               const MeasureSteps& dir) {
    MeasureSteps out = base;
    for (std::size_t n = 1; n < out.size(); ++n) {
        if (dir[n].empty()) continue;
        if (out[n].empty()) out[n].assign(dir[n].size(), 0.0);
        for (std::size_t i = 0; i < out[n].size(); ++i)
            out[n][i] += c * dir[n][i];
    }
    return out;
}

}  // namespace detail

/// Forward equation d_t phi = d_xx phi - phi mu + alpha (h - phi) phi on the
/// run grid. Crank-Nicolson diffusion by default, measure term implicit,
/// reaction semi-implicit (phi^{n+1} * alpha(h - phi^n)); everything
/// downstream (sensitivities, adjoint) is the exact derivative/transpose of
/// this discrete map. `background` adds a frozen second harvesting measure
/// to the coefficient without entering any payoff term.
inline Field solve_forward(const ModelParams& p, const TimeMeasure& mu,
                           const Grid& grid, const SolveOptions& opts = {},
                           const TimeMeasure* background = nullptr) {
    mu.require_box(grid.R, grid.T);
    const auto d = detail::discretize(p, grid, opts);
    return detail::forward_march(d, detail::total_steps(mu, grid, background));
}

/// Frozen-coefficient iteration for the smooth-coefficient problem
/// d_t phi = d_xx phi - a phi + f(t,x,phi_prev) phi: repeatedly solves the
/// linear problem with the reaction frozen at the previous iterate until the
/// space-time L2 difference drops below tol_picard. The frozen coefficient
/// is sampled at the old time level, so the fixed point coincides with the
/// solve_forward discretization.
inline Field iterate_frozen(const ModelParams& p, const SampledField& a,
                            const Grid& grid, const SolveOptions& opts = {}) {
    const auto d = detail::discretize(p, grid, opts);
    Field avec = sample_on_grid(a, grid);
    if (avec.min_value() < 0.0)
        throw InputError("iterate_frozen: coefficient a must be nonnegative");

    Field prev(grid);
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i) prev.at(n, i) = d.phi0[i];

    detail::ThetaStep step(grid, opts.theta);
    std::vector<double> zero(grid.nx, 0.0), reac(grid.nx);
    for (int it = 0; it < opts.max_picard; ++it) {
        Field next(grid);
        for (int i = 0; i < grid.nx; ++i) next.at(0, i) = d.phi0[i];
        for (int n = 0; n < grid.nt; ++n) {
            for (int i = 0; i < grid.nx; ++i)
                reac[i] = d.alpha.at(n, i) * (d.hcap.at(n, i) - prev.at(n, i)) -
                          avec.at(n + 1, i);
            step.load_explicit(next.trace(n));
            step.solve(zero, reac, next.trace(n + 1));
        }
        Field diff(grid);
        for (std::size_t k = 0; k < diff.values().size(); ++k)
            diff.values()[k] = next.values()[k] - prev.values()[k];
        prev = std::move(next);
        if (spacetime_l2(diff) < opts.tol_picard) return prev;
    }
    throw SolverError("iterate_frozen: iteration cap reached");
}

/// First-order sensitivity of the state along a (signed) direction nu:
/// the exact derivative of the solve_forward map, a consistent scheme for
///   d_t phi1 = d_xx phi1 - phi1 mu* - nu phi* + d_phi g(phi*) phi1,
/// phi1(0) = 0, with g = f phi, d_phi g = alpha (h - 2 phi).
inline Field solve_linearized(const ModelParams& p, const TimeMeasure& mu_star,
                              const TimeMeasure& nu, const Field& phi_star,
                              const Grid& grid, const SolveOptions& opts = {},
                              const TimeMeasure* background = nullptr) {
    const auto d = detail::discretize(p, grid, opts);
    return detail::linearized_march(d, detail::total_steps(mu_star, grid, background),
                                    detail::measure_steps(nu, grid), phi_star);
}

/// Second-order sensitivity: exact second derivative of the discrete forward
/// map, a consistent scheme for
///   d_t phi2 = d_xx phi2 - phi2 mu* - 2 nu phi1 + d_phi g(phi*) phi2
///              + d2_phi g(phi*) phi1^2,  d2_phi g = -2 alpha.
inline Field solve_second_order(const ModelParams& p, const TimeMeasure& mu_star,
                                const TimeMeasure& nu, const Field& phi_star,
                                const Field& phi1, const Grid& grid,
                                const SolveOptions& opts = {},
                                const TimeMeasure* background = nullptr) {
    const auto d = detail::discretize(p, grid, opts);
    return detail::second_order_march(
        d, detail::total_steps(mu_star, grid, background),
        detail::measure_steps(nu, grid), phi_star, phi1);
}

/// Backward companion of the linearized equation, built by transposing the
/// discrete forward map in the trapezoid-weighted inner product (the
/// weighted Neumann Laplacian is self-adjoint, so the same tridiagonal
/// matrices reappear). Consistent with
///   -d_t p = d_xx p - p mu* + d_phi g(phi*) p + mu*,  p(T) = 0.
/// The measure enters through the same hat-split node vectors as the
/// forward coefficient. `source_measure` defaults to mu_star; in the game
/// it is the player's own measure while mu_star + background drives the
/// dynamics.
inline Field solve_adjoint(const ModelParams& p, const TimeMeasure& mu_star,
                           const Field& phi_star, const Grid& grid,
                           const SolveOptions& opts = {},
                           const TimeMeasure* background = nullptr,
                           const TimeMeasure* source_measure = nullptr) {
    const auto d = detail::discretize(p, grid, opts);
    const TimeMeasure& smu = source_measure ? *source_measure : mu_star;
    return detail::adjoint_march(d, detail::total_steps(mu_star, grid, background),
                                 detail::measure_steps(smu, grid), phi_star);
}

struct GapReport {
    double state_gap = 0.0;   // L(T): final L2 gap + cumulative gradient gap
    double data_gap = 0.0;    // D: sup-TV(mu - mu_hat)^2 + L2(phi0 - phi0_hat)^2
    double ratio = 0.0;
    std::vector<double> trace;  // L(t_n)
};

/// Measures both sides of the stability estimate: how far two solutions
/// drift apart versus how far apart their data are.
inline GapReport stability_gap(const ModelParams& p, const TimeMeasure& mu,
                               const TimeMeasure& mu_hat, const Profile& phi0,
                               const Profile& phi0_hat, const Grid& grid,
                               const SolveOptions& opts = {}) {
    ModelParams pa = p;
    pa.initial_density = phi0;
    ModelParams pb = p;
    pb.initial_density = phi0_hat;
    const Field a = solve_forward(pa, mu, grid, opts);
    const Field b = solve_forward(pb, mu_hat, grid, opts);

    GapReport rep;
    std::vector<double> diff(grid.nx);
    double grad_cum = 0.0;
    for (int n = 0; n <= grid.nt; ++n) {
        for (int i = 0; i < grid.nx; ++i) diff[i] = a.at(n, i) - b.at(n, i);
        const double l2 = space_l2(diff, grid);
        const double gl = grad_l2(diff, grid);
        grad_cum += (n == 0 || n == grid.nt ? 0.5 : 1.0) * grid.dt() * gl * gl;
        rep.trace.push_back(l2 * l2 + grad_cum);
    }
    rep.state_gap = rep.trace.back();

    const TimeMeasure dm = measure_difference(mu, mu_hat);
    const double tv = dm.sup_total_variation();
    std::vector<double> d0(grid.nx);
    for (int i = 0; i < grid.nx; ++i)
        d0[i] = phi0(grid.x(i)) - phi0_hat(grid.x(i));
    const double l20 = space_l2(d0, grid);
    rep.data_gap = tv * tv + l20 * l20;
    rep.ratio = rep.data_gap > 0 ? rep.state_gap / rep.data_gap : 0.0;
    return rep;
}

}  // namespace harvest
