#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "harvest/payoff.hpp"

namespace harvest {

struct OptimizerConfig {
    int max_iters = 500;
    double fw_gap_tol = 1e-8;  // stopping gap pair(s - mu, G)
    enum class StepRule { LineSearch, Harmonic };
    StepRule step_rule = StepRule::LineSearch;
    double delta_cap = 0.0;      // sup-TV cap per slice; 0 = none
    int dictionary_size = 64;    // Euler-residual probe directions
    std::uint64_t seed = 1;
    double line_search_tol = 1e-6;
    // Fully-corrective polish: every polish_every iterations, re-optimize the
    // weights over the active vertex set by projected gradient ascent. This
    // keeps the atomic structure of the iterates while fixing the cross-slice
    // conditioning that stalls plain pairwise steps.
    int polish_every = 4;
    int polish_steps = 6;

    void require_valid() const {
        if (fw_gap_tol <= 0) throw InputError("optimizer: fw_gap_tol must be > 0");
        if (delta_cap < 0) throw InputError("optimizer: delta_cap must be > 0 when set");
    }
};

/// Pointwise payoff gradient with the forbidden cells flagged rather than
/// valued.
struct GradientField {
    Field values;
    std::vector<std::uint8_t> blocked;  // (nt+1) * nx

    bool blocked_at(int n, int i) const {
        return !blocked.empty() &&
               blocked[static_cast<std::size_t>(n) * values.grid().nx + i] != 0;
    }
};

namespace detail {

inline std::vector<std::uint8_t> blocked_mask(const ModelParams& p,
                                              const Grid& g) {
    if (p.forbidden.empty()) return {};
    std::vector<std::uint8_t> blocked(
        static_cast<std::size_t>(g.nt + 1) * g.nx, 0);
    for (int n = 0; n <= g.nt; ++n)
        for (int i = 0; i < g.nx; ++i)
            if (p.forbidden.forbidden_at(g.t(n), g.x(i)))
                blocked[static_cast<std::size_t>(n) * g.nx + i] = 1;
    return blocked;
}

}  // namespace detail

/// G(t,x) = phi (1 - p) - Psi'(cost_inner) c with p the adjoint state.
/// By construction pair(nu, G) equals the directional derivative of the
/// discrete payoff for every direction nu; the dictionary check of that
/// identity is what admits the adjoint into the build.
inline GradientField gradient_from_state(const ModelParams& p,
                                         const TimeMeasure& mu, const Field& phi,
                                         const Grid& grid,
                                         const SolveOptions& opts = {},
                                         const TimeMeasure* background = nullptr) {
    const Field adj = solve_adjoint(p, mu, phi, grid, opts, background);
    const Field cost = sample_on_grid(p.cost, grid);
    const double psid = p.psi.d1(pair_field(mu, cost));
    GradientField gf{Field(grid), detail::blocked_mask(p, grid)};
    for (int n = 0; n <= grid.nt; ++n)
        for (int i = 0; i < grid.nx; ++i)
            gf.values.at(n, i) =
                phi.at(n, i) * (1.0 - adj.at(n, i)) - psid * cost.at(n, i);
    return gf;
}

inline GradientField gradient_density(const ModelParams& p, const TimeMeasure& mu,
                                      const Grid& grid,
                                      const SolveOptions& opts = {},
                                      const TimeMeasure* background = nullptr) {
    const Field phi = solve_forward(p, mu, grid, opts, background);
    return gradient_from_state(p, mu, phi, grid, opts, background);
}

/// Linear maximizer over the feasible set, one step at a time: the slice at
/// step n gets a single atom at the node maximizing G(t_n, x) / b(t_n, x)
/// (ties to the smallest x) with mass saturating the budget, capped at
/// delta_cap; a slice with no profitable node stays empty.
inline TimeMeasure best_direction(const GradientField& gf,
                                  const SampledField& budget, const Grid& grid,
                                  double delta_cap = 0.0,
                                  int* blocked_slices = nullptr) {
    TimeMeasure s = TimeMeasure::uniform_slices(grid.R, grid.T, grid.nt);
    if (blocked_slices) *blocked_slices = 0;
    for (int n = 1; n <= grid.nt; ++n) {
        int best = -1;
        double best_val = 0.0;
        bool any_open = false;
        for (int i = 0; i < grid.nx; ++i) {
            if (gf.blocked_at(n, i)) continue;
            any_open = true;
            double mass = 1.0 / budget(grid.t(n), grid.x(i));
            if (delta_cap > 0) mass = std::min(mass, delta_cap);
            const double val = mass * gf.values.at(n, i);
            if (val > best_val) {
                best_val = val;
                best = i;
            }
        }
        if (!any_open && blocked_slices) ++*blocked_slices;
        if (best >= 0) {
            double mass = 1.0 / budget(grid.t(n), grid.x(best));
            if (delta_cap > 0) mass = std::min(mass, delta_cap);
            s.slices[n - 1].atoms.push_back({grid.x(best), mass});
        }
    }
    return s;
}

struct OptimizationReport {
    TimeMeasure mu_opt;
    std::vector<double> J_trace;
    double fw_gap = std::numeric_limits<double>::infinity();
    double euler_residual_value = -std::numeric_limits<double>::infinity();
    int euler_arg = -1;
    bool converged = false;
    int iterations = 0;
    std::string status;
    PayoffBreakdown payoff;
};

/// Deterministic probe dictionary, version 1: two uniform densities plus
/// random atomic directions (full-span, single-step and windowed atoms at
/// grid nodes), each of unit sup-TV, all avoiding the forbidden region.
inline std::vector<TimeMeasure> direction_dictionary(const ModelParams& p,
                                                     const Grid& grid, int count,
                                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> node(0, grid.nx - 1);
    std::uniform_int_distribution<int> stepd(1, grid.nt);
    std::vector<TimeMeasure> dict;
    auto node_ok = [&](int i) {
        if (p.forbidden.empty()) return true;
        for (int n = 0; n <= grid.nt; ++n)
            if (p.forbidden.forbidden_at(grid.t(n), grid.x(i))) return false;
        return true;
    };
    {
        TimeMeasure d = TimeMeasure::zero(grid.R, grid.T);
        d.slices[0].density.assign(static_cast<std::size_t>(grid.nx), 1.0 / grid.R);
        if (p.forbidden.empty()) dict.push_back(d);
    }
    {
        TimeMeasure d;
        d.R = grid.R;
        d.T = grid.T;
        d.breakpoints = {0.0, 0.5 * grid.T, grid.T};
        d.slices.resize(2);
        d.slices[0].density.assign(static_cast<std::size_t>(grid.nx), 1.0 / grid.R);
        if (p.forbidden.empty()) dict.push_back(d);
    }
    int guard = 0;
    while (static_cast<int>(dict.size()) < count && guard++ < 100 * count) {
        const int i = node(rng);
        if (!node_ok(i)) continue;
        const int kind = static_cast<int>(dict.size()) % 2;
        if (kind == 0) {
            TimeMeasure d = TimeMeasure::zero(grid.R, grid.T);
            d.slices[0].atoms.push_back({grid.x(i), 1.0});
            dict.push_back(d);
        } else {
            int a = stepd(rng), b = stepd(rng);
            if (a > b) std::swap(a, b);
            TimeMeasure d;
            d.R = grid.R;
            d.T = grid.T;
            d.breakpoints = {0.0};
            if (a > 1) d.breakpoints.push_back(grid.t(a - 1));
            d.breakpoints.push_back(grid.t(b));
            if (b < grid.nt) d.breakpoints.push_back(grid.T);
            d.slices.resize(d.breakpoints.size() - 1);
            d.slices[a > 1 ? 1 : 0].atoms.push_back({grid.x(i), 1.0});
            dict.push_back(d);
        }
    }
    return dict;
}

namespace detail {

// Iterates are stored as per-step convex weights over the slice vertices
// {zero} u {atom of mass v(n,i) at node i}, v(n,i) = min(1/b(t_n,x_i), cap).
// Any convex combination then satisfies both the budget and the TV cap.
struct VertexState {
    std::vector<std::map<int, double>> lambda;  // index n = 1..nt

    explicit VertexState(int nt) : lambda(nt + 1) {}

    double slack(int n) const {
        double s = 1.0;
        for (const auto& [i, l] : lambda[n]) s -= l;
        return std::max(s, 0.0);
    }

    void prune() {
        for (auto& m : lambda) {
            std::erase_if(m, [](const auto& kv) { return kv.second < 1e-15; });
            // Snap nearly saturated slices onto the exact face, so that
            // saturation is a clean state rather than a 1 - 1e-7 limbo.
            double s = 0.0;
            for (const auto& [i, l] : m) s += l;
            if (s != 1.0 && std::abs(s - 1.0) < 1e-9)
                for (auto& [i, l] : m) l /= s;
        }
    }
};

// Brent-style scalar maximization on [0,1].
template <class F>
inline double maximize_scalar(F&& f, double xtol, int max_eval, double* fbest) {
    const double gr = 0.5 * (3.0 - std::sqrt(5.0));
    double a = 0.0, b = 1.0;
    double x = a + gr * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int it = 2; it < max_eval; ++it) {
        const double m = 0.5 * (a + b);
        if (std::abs(x - m) <= 2.0 * xtol - 0.5 * (b - a)) break;
        double p = 0, q = 0, r = 0;
        bool parabolic = false;
        if (std::abs(e) > xtol) {
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0) p = -p;
            q = std::abs(q);
            if (std::abs(p) < std::abs(0.5 * q * e) && p > q * (a - x) &&
                p < q * (b - x)) {
                e = d;
                d = p / q;
                parabolic = true;
            }
        }
        if (!parabolic) {
            e = (x < m) ? b - x : a - x;
            d = gr * e;
        }
        const double u = x + ((std::abs(d) >= xtol) ? d : (d > 0 ? xtol : -xtol));
        const double fu = f(u);
        if (fu >= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu >= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu >= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    if (fbest) *fbest = fx;
    return x;
}

}  // namespace detail

/// Maximizes J over admissible controls by conditional gradient on the
/// product of per-step budget simplices. Each iteration takes either the
/// classical step toward the linear maximizer or a pairwise step moving
/// weight from the worst active vertex toward the best one, whichever has
/// the larger initial slope; the pairwise steps are what lets the gap reach
/// the 1e-8 scale instead of stalling at the O(1/k) rate of plain steps.
inline OptimizationReport optimize(const ModelParams& p, const Grid& grid,
                                   const OptimizerConfig& cfg = {},
                                   const SolveOptions& opts = {},
                                   const TimeMeasure* start = nullptr,
                                   const TimeMeasure* background = nullptr) {
    grid.require_valid();
    cfg.require_valid();
    const double cap = cfg.delta_cap;
    const int nt = grid.nt, nx = grid.nx;

    const auto problem = detail::discretize(p, grid, opts);
    const detail::MeasureSteps bg_steps =
        background ? detail::measure_steps(*background, grid)
                   : detail::MeasureSteps(nt + 1);
    const Field cost = sample_on_grid(p.cost, grid);
    const auto blocked = detail::blocked_mask(p, grid);
    auto is_blocked = [&](int n, int i) {
        return !blocked.empty() &&
               blocked[static_cast<std::size_t>(n) * nx + i] != 0;
    };

    // Vertex masses v(n,i) and the per-step pairing weight of one vertex.
    Field vmass(grid);
    for (int n = 0; n <= nt; ++n)
        for (int i = 0; i < nx; ++i) {
            double m = 1.0 / p.budget(grid.t(n), grid.x(i));
            if (cap > 0) m = std::min(m, cap);
            vmass.at(n, i) = m;
        }

    detail::VertexState st(nt);
    if (start) {
        start->require_box(grid.R, grid.T);
        const auto sv = detail::measure_steps(*start, grid);
        for (int n = 1; n <= nt; ++n) {
            double total = 0.0;
            for (int i = 0; i < nx; ++i) {
                const double mass = sv[n][i] * grid.node_weight(i);
                if (mass <= 0) continue;
                const double l = mass / vmass.at(n, i);
                st.lambda[n][i] = l;
                total += l;
            }
            if (total > 1.0)
                for (auto& [i, l] : st.lambda[n]) l /= total;
        }
    }

    // lambda -> per-step node densities of the player's own measure.
    auto own_steps = [&](const detail::VertexState& s) {
        detail::MeasureSteps m(nt + 1);
        for (int n = 1; n <= nt; ++n) {
            m[n].assign(nx, 0.0);
            for (const auto& [i, l] : s.lambda[n])
                m[n][i] += l * vmass.at(n, i) / grid.node_weight(i);
        }
        return m;
    };
    auto with_background = [&](detail::MeasureSteps m) {
        detail::add_steps(m, bg_steps);
        return m;
    };
    auto value_of_steps = [&](const detail::MeasureSteps& own) {
        const Field phi = detail::forward_march(problem, with_background(own));
        return detail::pair_steps(own, phi) -
               p.psi.value(detail::pair_steps(own, cost));
    };
    // Line search along own + gamma * (next - own) in step-vector space;
    // updates st to the accepted point. Returns the accepted gamma, or a
    // negative value when no point on the segment improves.
    auto search_and_step = [&](const detail::MeasureSteps& own, double j_now,
                               detail::VertexState& next) {
        const detail::MeasureSteps cand = own_steps(next);
        detail::MeasureSteps delta = cand;
        for (int n = 1; n <= nt; ++n)
            for (int i = 0; i < nx; ++i) delta[n][i] -= own[n][i];
        double jbest = 0.0;
        double gstar = detail::maximize_scalar(
            [&](double gamma) {
                return value_of_steps(detail::axpy_steps(own, gamma, delta));
            },
            cfg.line_search_tol, 24, &jbest);
        // Brent never touches the endpoints; a boundary optimum (full step
        // onto a face) must be probed explicitly or saturation is only ever
        // approached geometrically.
        const double j_full = value_of_steps(detail::axpy_steps(own, 1.0, delta));
        if (j_full >= jbest) {
            jbest = j_full;
            gstar = 1.0;
        }
        if (jbest < j_now) return -1.0;
        for (int n = 1; n <= nt; ++n)
            for (auto& [i, l] : st.lambda[n]) {
                const double ln = next.lambda[n].count(i) ? next.lambda[n][i] : 0.0;
                l += gstar * (ln - l);
            }
        for (int n = 1; n <= nt; ++n)
            for (const auto& [i, l] : next.lambda[n])
                if (!st.lambda[n].count(i)) st.lambda[n][i] = gstar * l;
        st.prune();
        return gstar;
    };
    // Projection onto {lambda >= 0, sum lambda <= 1} per slice.
    auto project_slice = [](std::vector<double>& v) {
        double s = 0.0;
        for (double& a : v) {
            a = std::max(a, 0.0);
            s += a;
        }
        if (s <= 1.0) return;
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double acc = 0.0, tau = 0.0;
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            acc += sorted[k];
            const double t = (acc - 1.0) / (k + 1);
            if (k + 1 == sorted.size() || sorted[k + 1] <= t) {
                tau = t;
                break;
            }
        }
        for (double& a : v) a = std::max(a - tau, 0.0);
    };

    OptimizationReport rep;
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        const detail::MeasureSteps own = own_steps(st);
        const detail::MeasureSteps dyn = with_background(own);
        const Field phi = detail::forward_march(problem, dyn);
        const Field adj = detail::adjoint_march(problem, dyn, own, phi);
        const double ci = detail::pair_steps(own, cost);
        const double psid = p.psi.d1(ci);
        rep.payoff.harvest = detail::pair_steps(own, phi);
        rep.payoff.cost_inner = ci;
        rep.payoff.cost_value = p.psi.value(ci);
        rep.payoff.value = rep.payoff.harvest - rep.payoff.cost_value;
        rep.J_trace.push_back(rep.payoff.value);

        Field gval(grid);
        for (int n = 1; n <= nt; ++n)
            for (int i = 0; i < nx; ++i)
                gval.at(n, i) = phi.at(n, i) * (1.0 - adj.at(n, i)) -
                                psid * cost.at(n, i);

        // Per-step linear maximizer, current value, and worst active vertex.
        double gap = 0.0, pw_slope = 0.0;
        std::vector<int> target(nt + 1, -1), away(nt + 1, -2);
        std::vector<double> away_weight(nt + 1, 0.0);
        for (int n = 1; n <= nt; ++n) {
            int best = -1;
            double best_val = 0.0;
            for (int i = 0; i < nx; ++i) {
                if (is_blocked(n, i)) continue;
                const double val = vmass.at(n, i) * gval.at(n, i);
                if (val > best_val) {
                    best_val = val;
                    best = i;
                }
            }
            double cur = 0.0;
            int worst = -2;  // -1 = zero vertex, -2 = none
            double worst_val = std::numeric_limits<double>::infinity();
            for (const auto& [i, l] : st.lambda[n]) {
                const double val = vmass.at(n, i) * gval.at(n, i);
                cur += l * val;
                if (val < worst_val) {
                    worst_val = val;
                    worst = i;
                }
            }
            if (st.slack(n) > 1e-15 && 0.0 < worst_val) {
                worst = -1;
                worst_val = 0.0;
            }
            gap += grid.dt() * (best_val - cur);
            target[n] = best;
            away[n] = worst;
            if (worst != -2) {
                away_weight[n] =
                    worst == -1 ? st.slack(n) : st.lambda[n][worst];
                pw_slope += grid.dt() * away_weight[n] * (best_val - worst_val);
            }
        }
        rep.fw_gap = gap;
        if (gap < cfg.fw_gap_tol) {
            rep.converged = true;
            break;
        }

        if (cfg.step_rule == OptimizerConfig::StepRule::Harmonic) {
            const double gamma = 2.0 / (it + 2.0);
            for (int n = 1; n <= nt; ++n) {
                for (auto& [i, l] : st.lambda[n]) l *= 1.0 - gamma;
                if (target[n] >= 0) st.lambda[n][target[n]] += gamma;
            }
            st.prune();
            continue;
        }

        // Truncated-Newton polish on the active set: conjugate gradient with
        // exact Hessian-vector products (one linearized and one adjoint-
        // derivative march each) fixes the mass-equalization phase, where
        // first-order steps crawl on a dense ill-conditioned Hessian.
        bool polish =
            cfg.polish_every > 0 && (it % cfg.polish_every) == cfg.polish_every - 1;
        detail::VertexState next = st;
        if (polish) {
            std::vector<std::pair<int, int>> act;
            for (int n = 1; n <= nt; ++n)
                for (const auto& [i, l] : st.lambda[n]) act.push_back({n, i});
            if (act.empty()) polish = false;
            if (polish) {
                const double ci_d2 = p.psi.d2(ci);
                auto face_project = [&](std::vector<double>& v) {
                    std::size_t a = 0;
                    while (a < act.size()) {
                        std::size_t b = a;
                        while (b < act.size() && act[b].first == act[a].first) ++b;
                        if (st.slack(act[a].first) <= 1e-12) {
                            double mean = 0.0;
                            for (std::size_t k = a; k < b; ++k) mean += v[k];
                            mean /= static_cast<double>(b - a);
                            for (std::size_t k = a; k < b; ++k) v[k] -= mean;
                        }
                        a = b;
                    }
                };
                auto hess_apply = [&](const std::vector<double>& delta) {
                    detail::MeasureSteps dstep(nt + 1);
                    for (int n = 1; n <= nt; ++n) dstep[n].assign(nx, 0.0);
                    for (std::size_t a = 0; a < act.size(); ++a) {
                        const auto [n, i] = act[a];
                        dstep[n][i] += delta[a] * vmass.at(n, i) /
                                       grid.node_weight(i);
                    }
                    const Field phi1 =
                        detail::linearized_march(problem, dyn, dstep, phi);
                    const Field p1 = detail::adjoint_derivative_march(
                        problem, dyn, dstep, phi, phi1, adj);
                    const double cid = detail::pair_steps(dstep, cost);
                    std::vector<double> out(act.size());
                    for (std::size_t a = 0; a < act.size(); ++a) {
                        const auto [n, i] = act[a];
                        const double dg = phi1.at(n, i) * (1.0 - adj.at(n, i)) -
                                          phi.at(n, i) * p1.at(n, i) -
                                          ci_d2 * cid * cost.at(n, i);
                        out[a] = -grid.dt() * vmass.at(n, i) * dg;  // -H delta
                    }
                    face_project(out);
                    return out;
                };
                // CG on (-H) d = g restricted to the active face.
                std::vector<double> gvec(act.size());
                for (std::size_t a = 0; a < act.size(); ++a) {
                    const auto [n, i] = act[a];
                    gvec[a] = grid.dt() * vmass.at(n, i) * gval.at(n, i);
                }
                face_project(gvec);
                std::vector<double> dir(act.size(), 0.0), r = gvec, pk = r;
                double rr = 0.0;
                for (double v : r) rr += v * v;
                const double rr0 = rr;
                for (int cg = 0; cg < 30 && rr > 1e-4 * rr0 && rr > 0; ++cg) {
                    const std::vector<double> hp = hess_apply(pk);
                    double php = 0.0;
                    for (std::size_t a = 0; a < act.size(); ++a)
                        php += pk[a] * hp[a];
                    if (php <= 0.0) {
                        if (cg == 0) dir = gvec;  // negative curvature at once
                        break;
                    }
                    const double alpha_cg = rr / php;
                    for (std::size_t a = 0; a < act.size(); ++a) {
                        dir[a] += alpha_cg * pk[a];
                        r[a] -= alpha_cg * hp[a];
                    }
                    double rr_new = 0.0;
                    for (double v : r) rr_new += v * v;
                    const double beta = rr_new / rr;
                    rr = rr_new;
                    for (std::size_t a = 0; a < act.size(); ++a)
                        pk[a] = r[a] + beta * pk[a];
                }
                // act was built in slice-major map order, so its entries for
                // slice n align positionally with next.lambda[n].
                std::size_t a = 0;
                for (int n = 1; n <= nt; ++n) {
                    auto& ln = next.lambda[n];
                    std::vector<int> idx;
                    std::vector<double> v;
                    for (const auto& [i, l] : ln) {
                        idx.push_back(i);
                        v.push_back(l);
                    }
                    for (std::size_t k = 0; k < idx.size(); ++k, ++a)
                        v[k] += dir[a];
                    project_slice(v);
                    for (std::size_t k = 0; k < idx.size(); ++k) ln[idx[k]] = v[k];
                }
                next.prune();
            }
        }
        if (!polish) {
            const bool pairwise = pw_slope > gap;
            for (int n = 1; n <= nt; ++n) {
                if (pairwise) {
                    if (away[n] == -2 || target[n] == away[n]) continue;
                    const double move = away_weight[n];
                    if (move <= 0) continue;
                    if (away[n] >= 0) next.lambda[n][away[n]] -= move;
                    if (target[n] >= 0) next.lambda[n][target[n]] += move;
                } else {
                    for (auto& [i, l] : next.lambda[n]) l = 0.0;
                    if (target[n] >= 0) next.lambda[n][target[n]] = 1.0;
                }
            }
            next.prune();
        }
        const double gstar = search_and_step(own, rep.payoff.value, next);
        if (gstar < 0.0 && !polish) {
            // Harmonic fallback keeps the ascent property.
            const double gamma = 2.0 / (it + 2.0);
            for (int n = 1; n <= nt; ++n) {
                for (auto& [i, l] : st.lambda[n]) l *= 1.0 - gamma;
                if (target[n] >= 0) st.lambda[n][target[n]] += gamma;
            }
            st.prune();
        }
    }

    rep.iterations = it;
    rep.mu_opt = TimeMeasure::uniform_slices(grid.R, grid.T, nt);
    for (int n = 1; n <= nt; ++n)
        for (const auto& [i, l] : st.lambda[n])
            rep.mu_opt.slices[n - 1].atoms.push_back(
                {grid.x(i), l * vmass.at(n, i)});
    if (!rep.converged) {
        const auto own = own_steps(st);
        const Field phi = detail::forward_march(problem, with_background(own));
        rep.payoff.harvest = detail::pair_steps(own, phi);
        rep.payoff.cost_inner = detail::pair_steps(own, cost);
        rep.payoff.cost_value = p.psi.value(rep.payoff.cost_inner);
        rep.payoff.value = rep.payoff.harvest - rep.payoff.cost_value;
    }
    if (rep.J_trace.empty()) rep.J_trace.push_back(rep.payoff.value);
    rep.status = rep.converged ? "converged" : "max-iterations";

    const auto dict = direction_dictionary(p, grid, cfg.dictionary_size, cfg.seed);
    const ResidualReport rr =
        euler_residual(p, rep.mu_opt, dict, grid, opts, background);
    rep.euler_residual_value = rr.value;
    rep.euler_arg = rr.arg_index;
    return rep;
}

struct ProbeReport {
    bool refused = false;
    std::string refusal;
    double max_pairwise_distance = 0.0;
    bool all_segments_concave = true;
    std::vector<TimeMeasure> optima;
    std::vector<double> payoffs;
};

/// Multi-start check of local uniqueness inside the small-TV set: every
/// random feasible start must come back to (weak-*) the same optimum, and
/// every connecting segment must scan concave.
inline ProbeReport local_uniqueness_probe(const ModelParams& p,
                                          const OptimizationReport& base,
                                          int n_competitors, const Grid& grid,
                                          const OptimizerConfig& cfg,
                                          const SolveOptions& opts = {}) {
    ProbeReport rep;
    auto refuse = [&](std::string why) {
        rep.refused = true;
        rep.refusal = std::move(why);
        return rep;
    };
    if (!base.converged) return refuse("base report did not converge");
    if (cfg.delta_cap <= 0) return refuse("delta_cap must be set");
    if (!p.carrying_cap.is_constant())
        return refuse("(H.6): carrying capacity must be one constant");
    {
        std::vector<double> d(grid.nx);
        for (int i = 0; i < grid.nx; ++i)
            d[i] = p.initial_density(grid.x(i)) - p.habitat_const();
        const double l2 = space_l2(d, grid), g2 = grad_l2(d, grid);
        const double h1 = std::sqrt(l2 * l2 + g2 * g2);
        if (h1 + base.mu_opt.sup_total_variation() > cfg.delta_cap)
            return refuse("H1 distance of phi0 from h plus sup-TV exceeds delta_cap");
    }

    std::mt19937_64 rng(cfg.seed + 17);
    std::uniform_int_distribution<int> node(0, grid.nx - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    rep.optima.push_back(base.mu_opt);
    rep.payoffs.push_back(base.payoff.value);
    for (int c = 1; c < n_competitors; ++c) {
        TimeMeasure start = TimeMeasure::uniform_slices(grid.R, grid.T, grid.nt);
        for (int n = 1; n <= grid.nt; ++n) {
            const int na = 1 + static_cast<int>(rng() % 3);
            const double tv = cfg.delta_cap * (0.2 + 0.8 * unif(rng));
            std::vector<Atom> atoms;
            double total = 0.0, bsum = 0.0;
            for (int a = 0; a < na; ++a) {
                const double m = 0.1 + unif(rng);
                atoms.push_back({grid.x(node(rng)), m});
                total += m;
            }
            for (auto& a : atoms) {
                a.mass *= tv / total;
                bsum += a.mass * p.budget(grid.t(n), a.x);
            }
            if (bsum > 1.0)
                for (auto& a : atoms) a.mass /= bsum;
            start.slices[n - 1].atoms = std::move(atoms);
        }
        const OptimizationReport run = optimize(p, grid, cfg, opts, &start);
        rep.optima.push_back(run.mu_opt);
        rep.payoffs.push_back(run.payoff.value);
    }

    const auto probes = default_probe_set(grid.R, grid.T);
    for (std::size_t i = 0; i < rep.optima.size(); ++i)
        for (std::size_t j = i + 1; j < rep.optima.size(); ++j) {
            rep.max_pairwise_distance =
                std::max(rep.max_pairwise_distance,
                         weakstar_distance(rep.optima[i], rep.optima[j], probes));
            const double eps =
                measure_difference(rep.optima[i], rep.optima[j])
                    .sup_total_variation();
            if (eps > 1e-10) {
                const CertificateReport cert = concavity_certificate(
                    p, rep.optima[i], rep.optima[j], cfg.delta_cap, grid, opts);
                if (!cert.refused && !cert.all_negative)
                    rep.all_segments_concave = false;
            }
        }
    return rep;
}

}  // namespace harvest
