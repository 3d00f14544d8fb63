#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "harvest/field.hpp"
#include "harvest/grid.hpp"
#include "harvest/sampled_field.hpp"

namespace harvest {

struct Atom {
    double x = 0.0;
    double mass = 0.0;  // >= 0 for controls, signed for directions
};

/// Radon measure on ]0,R[: atoms plus an optional absolutely continuous
/// part sampled on its own uniform x lattice.
struct SpatialMeasure {
    std::vector<Atom> atoms;
    std::vector<double> density;  // empty = no a.c. part

    bool empty() const { return atoms.empty() && density.empty(); }

    // Total variation: atoms and the a.c. part are mutually singular,
    // so TV = sum |masses| + trapezoid integral of |density|.
    double total_variation(double R) const {
        double tv = 0.0;
        for (const Atom& a : atoms) tv += std::abs(a.mass);
        tv += density_integral(R, [](double d) { return std::abs(d); });
        return tv;
    }

    template <class Map>
    double density_integral(double R, Map&& m) const {
        if (density.empty()) return 0.0;
        const double dx = R / (density.size() - 1);
        double s = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i) {
            const double w = (i == 0 || i + 1 == density.size()) ? 0.5 * dx : dx;
            s += w * m(density[i]);
        }
        return s;
    }

    double density_at(double x, double R) const {
        if (density.empty()) return 0.0;
        const double pos = std::clamp(x / R * (density.size() - 1), 0.0,
                                      static_cast<double>(density.size() - 1));
        const auto i = std::min(static_cast<std::size_t>(pos), density.size() - 2);
        const double f = pos - i;
        return density[i] * (1 - f) + density[i + 1] * f;
    }

    bool nonnegative() const {
        for (const Atom& a : atoms)
            if (a.mass < 0.0) return false;
        for (double d : density)
            if (d < 0.0) return false;
        return true;
    }
};

/// The control mu: piecewise constant in time over a partition
/// 0 = b_0 < ... < b_K = T, one spatial measure per interval ]b_{k}, b_{k+1}].
struct TimeMeasure {
    double R = 1.0;
    double T = 1.0;
    std::vector<double> breakpoints;      // size K+1
    std::vector<SpatialMeasure> slices;   // size K

    static TimeMeasure zero(double R, double T) {
        TimeMeasure m;
        m.R = R;
        m.T = T;
        m.breakpoints = {0.0, T};
        m.slices.resize(1);
        return m;
    }

    static TimeMeasure uniform_slices(double R, double T, int K) {
        TimeMeasure m;
        m.R = R;
        m.T = T;
        m.breakpoints.resize(K + 1);
        for (int k = 0; k <= K; ++k) m.breakpoints[k] = T * k / K;
        m.slices.resize(K);
        return m;
    }

    int slice_count() const { return static_cast<int>(slices.size()); }

    // Slice k covers ]b_k, b_{k+1}]; t = 0 maps to slice 0.
    int slice_of(double t) const {
        const double eps = 1e-12 * T;
        const auto it = std::lower_bound(breakpoints.begin() + 1,
                                         breakpoints.end() - 1, t - eps);
        return static_cast<int>(it - (breakpoints.begin() + 1));
    }

    double slice_length(int k) const { return breakpoints[k + 1] - breakpoints[k]; }

    // Exact on this representation: the ess-sup in time is a max over slices.
    double sup_total_variation() const {
        double m = 0.0;
        for (const auto& s : slices) m = std::max(m, s.total_variation(R));
        return m;
    }

    bool nonnegative() const {
        return std::all_of(slices.begin(), slices.end(),
                           [](const SpatialMeasure& s) { return s.nonnegative(); });
    }

    void require_box(double r, double t) const {
        if (std::abs(R - r) > 1e-12 * std::max(1.0, r) ||
            std::abs(T - t) > 1e-12 * std::max(1.0, t))
            throw InputError("measure domain does not match the (T,R) box");
    }
};

/// Node-density representation of one slice on the run grid: atoms are
/// hat-split onto the two neighboring nodes, scaled by the trapezoid node
/// weight so that <W mvec, f> equals the interpolated atom pairing exactly;
/// the a.c. part is resampled at the nodes.
inline std::vector<double> slice_node_density(const TimeMeasure& mu, int k,
                                              const Grid& g) {
    std::vector<double> v(g.nx, 0.0);
    const SpatialMeasure& s = mu.slices[k];
    for (const Atom& a : s.atoms) {
        const double pos = std::clamp(a.x / g.R * (g.nx - 1), 0.0, double(g.nx - 1));
        const int i = std::min(static_cast<int>(pos), g.nx - 2);
        const double f = pos - i;
        v[i] += a.mass * (1 - f) / g.node_weight(i);
        v[i + 1] += a.mass * f / g.node_weight(i + 1);
    }
    if (!s.density.empty())
        for (int i = 0; i < g.nx; ++i) v[i] += s.density_at(g.x(i), g.R);
    return v;
}

/// Discrete pairing of a measure with a grid field,
///   integral of f d mu_t dt,
/// using the dynamics' sampling convention: each time step contributes
/// dt * (pairing at the step's right endpoint). Atoms pair against the
/// linearly interpolated field, the a.c. part by trapezoid quadrature.
inline double pair_field(const TimeMeasure& mu, const Field& f) {
    const Grid& g = f.grid();
    mu.require_box(g.R, g.T);
    double total = 0.0;
    for (int n = 1; n <= g.nt; ++n) {
        const int k = mu.slice_of(g.t(n));
        const SpatialMeasure& s = mu.slices[k];
        double v = 0.0;
        for (const Atom& a : s.atoms) v += a.mass * f.value_at(n, a.x);
        if (!s.density.empty())
            for (int i = 0; i < g.nx; ++i)
                v += g.node_weight(i) * s.density_at(g.x(i), g.R) * f.at(n, i);
        total += g.dt() * v;
    }
    return total;
}

/// Pairing with a continuous probe; two-point Gauss quadrature in time per
/// slice, so it needs no run grid at all.
template <class F>
inline double pair_function(const TimeMeasure& mu, F&& f) {
    static const double off = 0.5 / std::sqrt(3.0);
    double total = 0.0;
    for (int k = 0; k < mu.slice_count(); ++k) {
        const SpatialMeasure& s = mu.slices[k];
        if (s.empty()) continue;
        const double len = mu.slice_length(k);
        const double mid = 0.5 * (mu.breakpoints[k] + mu.breakpoints[k + 1]);
        for (double tg : {mid - off * len, mid + off * len}) {
            double v = 0.0;
            for (const Atom& a : s.atoms) v += a.mass * f(tg, a.x);
            if (!s.density.empty()) {
                const double dxs = mu.R / (s.density.size() - 1);
                for (std::size_t i = 0; i < s.density.size(); ++i) {
                    const double w =
                        (i == 0 || i + 1 == s.density.size()) ? 0.5 * dxs : dxs;
                    v += w * s.density[i] * f(tg, i * dxs);
                }
            }
            total += 0.5 * len * v;
        }
    }
    return total;
}

/// Budget usage of one slice, integral of b(t,.) d mu_k, with b sampled at
/// the slice's right endpoint (the instant the implicit dynamics sees).
inline double budget_value(const TimeMeasure& mu, const SampledField& b, int k) {
    if (k < 0 || k >= mu.slice_count())
        throw InputError("budget_value: slice index out of range");
    const double ts = mu.breakpoints[k + 1];
    const SpatialMeasure& s = mu.slices[k];
    double v = 0.0;
    for (const Atom& a : s.atoms) {
        const double bv = b(ts, a.x);
        if (!std::isfinite(bv))
            throw InputError("budget_value: atom sits where b is undefined");
        v += a.mass * bv;
    }
    if (!s.density.empty()) {
        const double dxs = mu.R / (s.density.size() - 1);
        for (std::size_t i = 0; i < s.density.size(); ++i) {
            const double w = (i == 0 || i + 1 == s.density.size()) ? 0.5 * dxs : dxs;
            v += w * s.density[i] * b(ts, i * dxs);
        }
    }
    return v;
}

using ProbeFn = std::function<double(double, double)>;

/// Probe set metrizing weak-* convergence on the box, version 1:
/// cos(k pi x / R) * T_l(2t/T - 1), k = 0..5, l = 0..3, all bounded by 1.
inline std::vector<ProbeFn> default_probe_set(double R, double T) {
    std::vector<ProbeFn> probes;
    for (int k = 0; k <= 5; ++k)
        for (int l = 0; l <= 3; ++l)
            probes.push_back([k, l, R, T](double t, double x) {
                const double u = std::clamp(2.0 * t / T - 1.0, -1.0, 1.0);
                double cheb;
                switch (l) {
                    case 0: cheb = 1.0; break;
                    case 1: cheb = u; break;
                    case 2: cheb = 2 * u * u - 1; break;
                    default: cheb = u * (4 * u * u - 3); break;
                }
                return std::cos(k * M_PI * x / R) * cheb;
            });
    return probes;
}

inline double weakstar_distance(const TimeMeasure& mu, const TimeMeasure& nu,
                                const std::vector<ProbeFn>& probes) {
    if (probes.empty()) throw InputError("weakstar_distance: empty probe set");
    double d = 0.0;
    for (const auto& p : probes)
        d = std::max(d, std::abs(pair_function(mu, p) - pair_function(nu, p)));
    return d;
}

namespace detail {
inline std::vector<double> merge_breakpoints(const TimeMeasure& a,
                                             const TimeMeasure& b) {
    std::vector<double> bp;
    bp.reserve(a.breakpoints.size() + b.breakpoints.size());
    const double eps = 1e-12 * a.T;
    std::size_t i = 0, j = 0;
    while (i < a.breakpoints.size() || j < b.breakpoints.size()) {
        double next;
        if (i == a.breakpoints.size())
            next = b.breakpoints[j++];
        else if (j == b.breakpoints.size())
            next = a.breakpoints[i++];
        else if (a.breakpoints[i] < b.breakpoints[j] - eps)
            next = a.breakpoints[i++];
        else if (b.breakpoints[j] < a.breakpoints[i] - eps)
            next = b.breakpoints[j++];
        else {
            next = a.breakpoints[i++];
            ++j;
        }
        if (bp.empty() || next > bp.back() + eps) bp.push_back(next);
    }
    return bp;
}

inline void merge_equal_atoms(std::vector<Atom>& atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.x < b.x; });
    std::vector<Atom> out;
    for (const Atom& a : atoms) {
        if (!out.empty() && out.back().x == a.x)
            out.back().mass += a.mass;
        else
            out.push_back(a);
    }
    std::erase_if(out, [](const Atom& a) { return a.mass == 0.0; });
    atoms = std::move(out);
}
}  // namespace detail

/// ca * mu + cb * nu on the merged partition. Atoms at identical locations
/// are merged; a.c. parts are combined on the finer native lattice.
inline TimeMeasure combine(double ca, const TimeMeasure& mu, double cb,
                           const TimeMeasure& nu) {
    mu.require_box(nu.R, nu.T);
    TimeMeasure out;
    out.R = mu.R;
    out.T = mu.T;
    out.breakpoints = detail::merge_breakpoints(mu, nu);
    out.slices.resize(out.breakpoints.size() - 1);
    for (std::size_t k = 0; k + 1 < out.breakpoints.size(); ++k) {
        const double mid = 0.5 * (out.breakpoints[k] + out.breakpoints[k + 1]);
        const SpatialMeasure& sa = mu.slices[mu.slice_of(mid)];
        const SpatialMeasure& sb = nu.slices[nu.slice_of(mid)];
        SpatialMeasure& so = out.slices[k];
        for (const Atom& a : sa.atoms) so.atoms.push_back({a.x, ca * a.mass});
        for (const Atom& a : sb.atoms) so.atoms.push_back({a.x, cb * a.mass});
        detail::merge_equal_atoms(so.atoms);
        if (!sa.density.empty() || !sb.density.empty()) {
            const std::size_t nd = std::max(
                {sa.density.size(), sb.density.size(), std::size_t{2}});
            so.density.assign(nd, 0.0);
            const double dxs = out.R / (nd - 1);
            for (std::size_t i = 0; i < nd; ++i)
                so.density[i] = ca * sa.density_at(i * dxs, out.R) +
                                cb * sb.density_at(i * dxs, out.R);
        }
    }
    return out;
}

inline TimeMeasure scale(const TimeMeasure& mu, double c) {
    TimeMeasure out = mu;
    for (auto& s : out.slices) {
        for (auto& a : s.atoms) a.mass *= c;
        for (auto& d : s.density) d *= c;
    }
    return out;
}

/// mu - nu, the signed difference used to build directions.
inline TimeMeasure measure_difference(const TimeMeasure& mu,
                                      const TimeMeasure& nu) {
    return combine(1.0, mu, -1.0, nu);
}

}  // namespace harvest
