#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "harvest/field.hpp"
#include "harvest/measure.hpp"
#include "harvest/model.hpp"
#include "harvest/solver.hpp"

namespace harvest {

struct PayoffBreakdown {
    enum class Status { Ok, Infeasible };
    Status status = Status::Ok;
    std::string infeasible_reason;
    double harvest = 0.0;     // integral of phi d mu
    double cost_inner = 0.0;  // integral of c d mu
    double cost_value = 0.0;  // Psi(cost_inner)
    double value = 0.0;       // J = harvest - cost_value

    bool ok() const { return status == Status::Ok; }
};

/// Feasibility of a control: nonnegative, within the per-slice budget, and
/// never placing mass on the forbidden region.
inline std::optional<std::string> admissibility_failure(
    const ModelParams& p, const TimeMeasure& mu, double budget_tol = 1e-9) {
    if (!mu.nonnegative()) return "control measure has a negative part";
    for (int k = 0; k < mu.slice_count(); ++k) {
        const double bv = budget_value(mu, p.budget, k);
        if (bv > 1.0 + budget_tol)
            return "budget constraint violated on slice " + std::to_string(k);
        if (!p.forbidden.empty()) {
            const SpatialMeasure& s = mu.slices[k];
            const double t0 = mu.breakpoints[k], t1 = mu.breakpoints[k + 1];
            for (const Atom& a : s.atoms) {
                if (a.mass <= 0.0) continue;
                if (p.forbidden.forbidden_at(t0, a.x) ||
                    p.forbidden.forbidden_at(0.5 * (t0 + t1), a.x) ||
                    p.forbidden.forbidden_at(t1, a.x))
                    return "atom inside the forbidden region";
            }
            if (!s.density.empty()) {
                const double dxs = mu.R / (s.density.size() - 1);
                for (std::size_t i = 0; i < s.density.size(); ++i)
                    if (s.density[i] > 1e-14 &&
                        p.forbidden.forbidden_at(t1, i * dxs))
                        return "density overlaps the forbidden region";
            }
        }
    }
    return std::nullopt;
}

/// Payoff pieces given an already computed state.
inline PayoffBreakdown payoff_from_state(const ModelParams& p,
                                         const TimeMeasure& mu,
                                         const Field& phi) {
    PayoffBreakdown b;
    b.harvest = pair_field(mu, phi);
    b.cost_inner = pair_field(mu, sample_on_grid(p.cost, phi.grid()));
    b.cost_value = p.psi.value(b.cost_inner);
    b.value = b.harvest - b.cost_value;
    return b;
}

/// J(mu): solves the forward equation and assembles the payoff. An
/// inadmissible control yields an Infeasible status, never a number.
inline PayoffBreakdown evaluate_payoff(const ModelParams& p,
                                       const TimeMeasure& mu, const Grid& grid,
                                       const SolveOptions& opts = {},
                                       const TimeMeasure* background = nullptr) {
    if (auto why = admissibility_failure(p, mu)) {
        PayoffBreakdown b;
        b.status = PayoffBreakdown::Status::Infeasible;
        b.infeasible_reason = *why;
        return b;
    }
    const Field phi = solve_forward(p, mu, grid, opts, background);
    return payoff_from_state(p, mu, phi);
}

/// dJ(mu*)[nu] through the first-order sensitivity:
///   pair(mu*, phi1) + pair(nu, phi*) - Psi'(cost_inner) pair(nu, c).
/// Equals the epsilon-quotient of J along nu up to O(epsilon).
inline double directional_derivative(const ModelParams& p,
                                     const TimeMeasure& mu_star,
                                     const TimeMeasure& nu, const Grid& grid,
                                     const SolveOptions& opts = {},
                                     const TimeMeasure* background = nullptr) {
    const Field phi = solve_forward(p, mu_star, grid, opts, background);
    const Field phi1 =
        solve_linearized(p, mu_star, nu, phi, grid, opts, background);
    const Field cost = sample_on_grid(p.cost, grid);
    const double ci = pair_field(mu_star, cost);
    return pair_field(mu_star, phi1) + pair_field(nu, phi) -
           p.psi.d1(ci) * pair_field(nu, cost);
}

struct ResidualReport {
    double value = -std::numeric_limits<double>::infinity();
    int arg_index = -1;          // direction achieving the max
    int admissible_count = 0;    // directions that were usable perturbations
    bool any_admissible() const { return admissible_count > 0; }
};

/// Max directional derivative over a dictionary of nonnegative directions.
/// A direction only counts when mu* + eps nu stays admissible for small
/// eps > 0: nu must be nonnegative, avoid the forbidden region, and put mass
/// only where the budget has slack. At an optimum the result is <= 0 (+tol);
/// a positive value certifies non-optimality and names the witness.
inline ResidualReport euler_residual(const ModelParams& p,
                                     const TimeMeasure& mu_star,
                                     std::span<const TimeMeasure> directions,
                                     const Grid& grid,
                                     const SolveOptions& opts = {},
                                     const TimeMeasure* background = nullptr,
                                     double slack_tol = 1e-7) {
    ResidualReport rep;
    // Budget usage of mu* per step right endpoint.
    std::vector<double> used(grid.nt + 1, 0.0);
    for (int n = 1; n <= grid.nt; ++n)
        used[n] = budget_value(mu_star, p.budget, mu_star.slice_of(grid.t(n)));

    // Shared state for all directions.
    const auto problem = detail::discretize(p, grid, opts);
    const auto mu_dyn = detail::total_steps(mu_star, grid, background);
    const auto mu_own = detail::measure_steps(mu_star, grid);
    const Field phi = detail::forward_march(problem, mu_dyn);
    const Field cost = sample_on_grid(p.cost, grid);
    const double ci = detail::pair_steps(mu_own, cost);
    const double psid = p.psi.d1(ci);

    for (std::size_t d = 0; d < directions.size(); ++d) {
        const TimeMeasure& nu = directions[d];
        if (!nu.nonnegative()) continue;
        if (!p.forbidden.empty() && admissibility_failure(p, nu, 1e100)) continue;
        bool ok = true;
        for (int n = 1; n <= grid.nt && ok; ++n) {
            const int k = nu.slice_of(grid.t(n));
            if (nu.slices[k].total_variation(nu.R) > 0.0 &&
                used[n] >= 1.0 - slack_tol)
                ok = false;
        }
        if (!ok) continue;
        ++rep.admissible_count;
        const auto nu_steps = detail::measure_steps(nu, grid);
        const Field phi1 =
            detail::linearized_march(problem, mu_dyn, nu_steps, phi);
        const double dd = detail::pair_steps(mu_own, phi1) +
                          detail::pair_steps(nu_steps, phi) -
                          psid * detail::pair_steps(nu_steps, cost);
        if (dd > rep.value) {
            rep.value = dd;
            rep.arg_index = static_cast<int>(d);
        }
    }
    return rep;
}

struct SegmentScan {
    double eps = 0.0;               // sup-TV distance between the endpoints
    std::vector<double> zeta;       // sample points in [0, eps]
    std::vector<double> j;          // payoff along the segment
    std::vector<double> j_second;   // second derivative from the sensitivities
};

/// Scans j(zeta) = J(mu_tilde + zeta nu) with nu = (mu_bar - mu_tilde)/eps,
/// returning j and
///   j''(zeta) = pair(mu*, phi2) + 2 pair(nu, phi1)
///               - Psi''(cost_inner) pair(nu, c)^2,  mu* = mu_tilde + zeta nu.
inline SegmentScan payoff_segment_scan(const ModelParams& p,
                                       const TimeMeasure& mu_tilde,
                                       const TimeMeasure& mu_bar, int n_points,
                                       const Grid& grid,
                                       const SolveOptions& opts = {}) {
    if (n_points < 2) throw InputError("segment scan needs at least 2 points");
    const TimeMeasure diff = measure_difference(mu_bar, mu_tilde);
    const double eps = diff.sup_total_variation();
    if (eps <= 0.0)
        throw InputError("segment scan: endpoints coincide (eps = 0)");
    const TimeMeasure nu = scale(diff, 1.0 / eps);
    const Field cost = sample_on_grid(p.cost, grid);

    const auto problem = detail::discretize(p, grid, opts);
    const auto tilde_steps = detail::measure_steps(mu_tilde, grid);
    const auto nu_steps = detail::measure_steps(nu, grid);
    const double cnu = detail::pair_steps(nu_steps, cost);

    SegmentScan out;
    out.eps = eps;
    for (int q = 0; q < n_points; ++q) {
        const double z = eps * q / (n_points - 1);
        const auto mu = detail::axpy_steps(tilde_steps, z, nu_steps);
        const Field phi = detail::forward_march(problem, mu);
        const Field phi1 = detail::linearized_march(problem, mu, nu_steps, phi);
        const Field phi2 =
            detail::second_order_march(problem, mu, nu_steps, phi, phi1);
        const double ci = detail::pair_steps(mu, cost);
        out.zeta.push_back(z);
        out.j.push_back(detail::pair_steps(mu, phi) - p.psi.value(ci));
        out.j_second.push_back(detail::pair_steps(mu, phi2) +
                               2.0 * detail::pair_steps(nu_steps, phi1) -
                               p.psi.d2(ci) * cnu * cnu);
    }
    return out;
}

struct CertificateReport {
    bool refused = false;
    std::string refusal;
    std::vector<double> zeta;
    std::vector<double> keypoint;   // 2 pair(nu, phi1) + pair(mu*, phi2)
    bool all_negative = false;
    // Bound components of the small-delta regime, extremized over the scan.
    double state_dist_h_inf = 0.0;  // max_t ||phi* - h||_inf
    double state_min = 0.0;         // min phi*, compared against h/2
    double grad_l2_sup = 0.0;       // max_t ||d_x phi*||_L2
    double half_h = 0.0;
};

/// Certifies the uniqueness regime on the segment between two controls:
/// checks the preconditions (sup-TV and H1 distance of phi0 from the
/// constant habitat both below delta_probe), then samples the Psi-free part
/// of j'' and the state bounds along the segment. All-negative samples
/// certify concavity for this pair.
inline CertificateReport concavity_certificate(const ModelParams& p,
                                               const TimeMeasure& mu_tilde,
                                               const TimeMeasure& mu_bar,
                                               double delta_probe,
                                               const Grid& grid,
                                               const SolveOptions& opts = {},
                                               int n_points = 7) {
    CertificateReport rep;
    auto refuse = [&](std::string why) {
        rep.refused = true;
        rep.refusal = std::move(why);
        return rep;
    };
    if (!p.carrying_cap.is_constant())
        return refuse("(H.6): carrying capacity must be one constant");
    const double h = p.habitat_const();
    rep.half_h = 0.5 * h;
    if (mu_tilde.sup_total_variation() > delta_probe)
        return refuse("sup-TV of the first control exceeds delta_probe");
    if (mu_bar.sup_total_variation() > delta_probe)
        return refuse("sup-TV of the second control exceeds delta_probe");
    {
        std::vector<double> d(grid.nx);
        for (int i = 0; i < grid.nx; ++i)
            d[i] = p.initial_density(grid.x(i)) - h;
        const double l2 = space_l2(d, grid), g2 = grad_l2(d, grid);
        if (std::sqrt(l2 * l2 + g2 * g2) > delta_probe)
            return refuse("H1 distance of phi0 from h exceeds delta_probe");
    }

    const TimeMeasure diff = measure_difference(mu_bar, mu_tilde);
    const double eps = diff.sup_total_variation();
    if (eps <= 0.0) return refuse("endpoints coincide (eps = 0)");
    const TimeMeasure nu = scale(diff, 1.0 / eps);

    const auto problem = detail::discretize(p, grid, opts);
    const auto tilde_steps = detail::measure_steps(mu_tilde, grid);
    const auto nu_steps = detail::measure_steps(nu, grid);

    rep.state_min = std::numeric_limits<double>::infinity();
    for (int q = 0; q < n_points; ++q) {
        const double z = eps * q / (n_points - 1);
        const auto mu = detail::axpy_steps(tilde_steps, z, nu_steps);
        const Field phi = detail::forward_march(problem, mu);
        const Field phi1 = detail::linearized_march(problem, mu, nu_steps, phi);
        const Field phi2 =
            detail::second_order_march(problem, mu, nu_steps, phi, phi1);
        rep.zeta.push_back(z);
        rep.keypoint.push_back(detail::pair_steps(mu, phi2) +
                               2.0 * detail::pair_steps(nu_steps, phi1));
        for (int n = 0; n <= grid.nt; ++n) {
            double dist = 0.0;
            for (int i = 0; i < grid.nx; ++i) {
                dist = std::max(dist, std::abs(phi.at(n, i) - h));
                rep.state_min = std::min(rep.state_min, phi.at(n, i));
            }
            rep.state_dist_h_inf = std::max(rep.state_dist_h_inf, dist);
            rep.grad_l2_sup = std::max(rep.grad_l2_sup, grad_l2(phi.trace(n), grid));
        }
    }
    rep.all_negative = std::all_of(rep.keypoint.begin(), rep.keypoint.end(),
                                   [](double v) { return v < 0.0; });
    return rep;
}

}  // namespace harvest
