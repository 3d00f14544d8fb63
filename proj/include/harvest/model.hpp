#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "harvest/grid.hpp"
#include "harvest/sampled_field.hpp"

namespace harvest {

/// Full problem data for the logistic harvesting model
/// d_t phi = d_xx phi - phi mu + alpha (h - phi) phi  on ]0,T[ x ]0,R[
/// with homogeneous Neumann conditions and initial density phi0.
struct ModelParams {
    double R = 1.0;
    double T = 1.0;
    SampledField repro_rate;     // alpha(t,x), must be strictly positive
    SampledField carrying_cap;   // h(t,x) >= 0
    SampledField cost;           // c(t,x) >= 0 (finite part)
    SampledField budget;         // b(t,x) >= budget_floor
    double budget_floor = 1.0;   // b0
    CostAggregator psi;
    Profile initial_density;     // phi0(x) >= 0
    ForbiddenMask forbidden;     // cells with infinite cost; empty = none
    bool constant_habitat = false;  // h is one constant in space and time

    double habitat_const() const { return carrying_cap.at(0, 0); }

    static ModelParams homogeneous(double alpha, double h, double phi0,
                                   double cost_c, double budget_b, double T = 1.0,
                                   double R = 1.0) {
        ModelParams p;
        p.R = R;
        p.T = T;
        p.repro_rate = SampledField::constant(alpha, T, R);
        p.carrying_cap = SampledField::constant(h, T, R);
        p.cost = SampledField::constant(cost_c, T, R);
        p.budget = SampledField::constant(budget_b, T, R);
        p.budget_floor = budget_b;
        p.initial_density = Profile::constant(phi0, R);
        p.constant_habitat = true;
        return p;
    }
};

/// Constants the estimates depend on. For the logistic family these have
/// closed forms: d_phi f = -alpha, so
///   alpha1 = max alpha, alpha2 = 0, M = max(sup h, sup phi0),
///   F = max(alpha h), h_star = min alpha.
struct DerivedConstants {
    double alpha1 = 0.0;   // bound on |d_phi f|
    double alpha2 = 0.0;   // Lipschitz constant of d_phi f
    double M = 0.0;        // max(sup h, sup phi0)
    double F = 0.0;        // max f(t,x,0)
    double h_star = 0.0;   // -max d_phi f(t,x,h)
};

inline DerivedConstants derive_constants(const ModelParams& p) {
    if (p.repro_rate.min_sample() <= 0.0)
        throw InputError(
            "derive_constants: d_phi f must be strictly negative, "
            "which requires alpha > 0 everywhere");
    DerivedConstants c;
    c.alpha1 = p.repro_rate.max_sample();
    c.alpha2 = 0.0;
    c.M = std::max(p.carrying_cap.max_sample(), p.initial_density.max_sample());
    c.h_star = p.repro_rate.min_sample();
    // F = max over samples of alpha*h. Constant fields stay exact; otherwise
    // the product is maximized over the finer common lattice.
    if (p.repro_rate.is_constant() || p.carrying_cap.is_constant()) {
        const SampledField& varying =
            p.repro_rate.is_constant() ? p.carrying_cap : p.repro_rate;
        const double other = p.repro_rate.is_constant()
                                 ? p.repro_rate.at(0, 0)
                                 : p.carrying_cap.at(0, 0);
        c.F = other * varying.max_sample();
    } else {
        const int nts =
            std::max(p.repro_rate.nt_samples(), p.carrying_cap.nt_samples());
        const int nxs =
            std::max(p.repro_rate.nx_samples(), p.carrying_cap.nx_samples());
        double F = -std::numeric_limits<double>::infinity();
        for (int n = 0; n <= nts; ++n) {
            const double t = nts == 0 ? 0.0 : p.T * n / nts;
            for (int i = 0; i < nxs; ++i) {
                const double x = p.R * i / (nxs - 1);
                F = std::max(F, p.repro_rate(t, x) * p.carrying_cap(t, x));
            }
        }
        c.F = F;
    }
    return c;
}

struct Violation {
    std::string code;     // e.g. "(H.5)"
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool admissible() const { return violations.empty(); }
};

namespace detail {
// Location of the smallest sample, as "(t=..., x=...)".
inline std::string argmin_location(const SampledField& f) {
    int bn = 0, bi = 0;
    for (int n = 0; n <= f.nt_samples(); ++n)
        for (int i = 0; i < f.nx_samples(); ++i)
            if (f.at(n, i) < f.at(bn, bi)) {
                bn = n;
                bi = i;
            }
    std::ostringstream os;
    os << "(t=" << (f.nt_samples() == 0 ? 0.0 : f.T() * bn / f.nt_samples())
       << ", x=" << f.R() * bi / (f.nx_samples() - 1) << ")";
    return os.str();
}
inline std::string argmin_location(const Profile& f) {
    std::size_t bi = 0;
    for (std::size_t i = 0; i < f.values().size(); ++i)
        if (f.values()[i] < f.values()[bi]) bi = i;
    std::ostringstream os;
    os << "(x=" << f.R() * bi / (f.values().size() - 1) << ")";
    return os.str();
}
}  // namespace detail

/// Checks the standing hypotheses that can be read off the scenario data,
/// reporting every violation (with the offending sample location) instead
/// of stopping at the first.
inline ValidationReport validate_scenario(const ModelParams& p, const Grid& grid) {
    ValidationReport r;
    auto add = [&](std::string code, std::string detail) {
        r.violations.push_back({std::move(code), std::move(detail)});
    };
    if (!grid.valid())
        add("(grid)", "grid requires nx >= 3, nt >= 1");
    if (grid.R != p.R || grid.T != p.T)
        add("(grid)", "grid box does not match the scenario box");
    if (p.repro_rate.min_sample() <= 0.0)
        add("(H.1)", "reproduction rate alpha must be strictly positive at " +
                         detail::argmin_location(p.repro_rate));
    if (p.carrying_cap.min_sample() < 0.0)
        add("(H.1)", "carrying capacity h must be nonnegative at " +
                         detail::argmin_location(p.carrying_cap));
    if (p.initial_density.min_sample() < 0.0)
        add("(H: phi0 >= 0)", "initial density has a negative sample at " +
                                  detail::argmin_location(p.initial_density));
    if (p.cost.min_sample() < 0.0)
        add("(H.3)", "cost c must be nonnegative at " +
                         detail::argmin_location(p.cost));
    if (p.budget_floor <= 0.0)
        add("(H.5)", "budget floor b0 must be positive");
    if (p.budget.min_sample() < p.budget_floor) {
        std::ostringstream os;
        os << "budget has a sample " << p.budget.min_sample()
           << " below the floor b0 = " << p.budget_floor << " at "
           << detail::argmin_location(p.budget);
        add("(H.5)", os.str());
    }
    if (p.constant_habitat && !p.carrying_cap.is_constant())
        add("(H.6)", "constant-habitat mode is on but h varies");
    // Psi sampled on the attainable cost range: nondecreasing and convex.
    {
        const double tv_cap = p.budget_floor > 0 ? 1.0 / p.budget_floor : 1.0;
        const double umax =
            std::max(1.0, p.cost.max_sample() * tv_cap * p.T) * 2.0;
        for (int k = 0; k <= 32; ++k) {
            const double u = umax * k / 32.0;
            if (p.psi.d1(u) < 0.0) {
                add("(H.4)", "Psi' < 0 on the sampled cost range");
                break;
            }
        }
        for (int k = 0; k <= 32; ++k) {
            const double u = umax * k / 32.0;
            if (p.psi.d2(u) < 0.0) {
                add("(H.4)", "Psi'' < 0 on the sampled cost range");
                break;
            }
        }
    }
    return r;
}

}  // namespace harvest
