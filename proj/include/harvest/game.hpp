#pragma once

#include <string>
#include <vector>

#include "harvest/optimizer.hpp"

namespace harvest {

/// Per-player payoff data; the dynamics (alpha, h, phi0) are shared.
struct PlayerData {
    CostAggregator psi;
    SampledField cost;
    SampledField budget;
    ForbiddenMask forbidden;
};

struct GameSpec {
    ModelParams base;                // shared dynamics; its cost/budget unused
    std::vector<PlayerData> players; // size m >= 1
    double delta_cap = 0.0;          // the C_delta radius

    int player_count() const { return static_cast<int>(players.size()); }

    ModelParams player_params(int i) const {
        ModelParams p = base;
        p.psi = players[i].psi;
        p.cost = players[i].cost;
        p.budget = players[i].budget;
        p.forbidden = players[i].forbidden;
        return p;
    }

    void require_valid() const {
        if (players.empty()) throw InputError("game: needs at least one player");
        for (const auto& pl : players) {
            if (pl.budget.min_sample() < base.budget_floor)
                throw InputError("game: a player budget drops below b0");
            if (pl.cost.min_sample() < 0.0)
                throw InputError("game: player costs must be nonnegative");
        }
    }
};

/// Sum of the other players' controls, the frozen coefficient eta.
inline TimeMeasure opponents_total(std::span<const TimeMeasure> profile, int i,
                                   double R, double T) {
    TimeMeasure eta = TimeMeasure::zero(R, T);
    for (int j = 0; j < static_cast<int>(profile.size()); ++j)
        if (j != i) eta = combine(1.0, eta, 1.0, profile[j]);
    return eta;
}

/// Best response of player i against the frozen opponents: maximizes the
/// player's payoff with eta + mu driving the shared dynamics.
inline OptimizationReport best_response(const GameSpec& spec, int i,
                                        std::span<const TimeMeasure> others,
                                        const Grid& grid,
                                        const OptimizerConfig& cfg,
                                        const SolveOptions& opts = {},
                                        const TimeMeasure* warm_start = nullptr) {
    spec.require_valid();
    const ModelParams p = spec.player_params(i);
    OptimizerConfig c = cfg;
    if (spec.delta_cap > 0) c.delta_cap = spec.delta_cap;
    if (spec.player_count() == 1) return optimize(p, grid, c, opts, warm_start);
    const TimeMeasure eta = opponents_total(others, i, grid.R, grid.T);
    return optimize(p, grid, c, opts, warm_start, &eta);
}

struct NashConfig {
    int max_rounds = 40;
    double tol = 1e-4;       // weak-* displacement per player per round
    double damping = 0.5;    // mu_i <- (1-damping) mu_i + damping BR_i
    OptimizerConfig inner;
};

struct NashReport {
    std::vector<TimeMeasure> profile;
    std::vector<double> residuals;           // per-player Euler residual
    std::vector<std::vector<double>> displacement_trace;  // [round][player]
    int rounds = 0;
    bool converged = false;
    std::vector<double> payoffs;
};

/// Gauss-Seidel best-response iteration with damped updates; players sweep
/// in index order against the latest opponents. Convergence is declared in
/// the shared probe-based weak-* distance; cycling shows up honestly in the
/// displacement trace.
inline NashReport nash_solve(const GameSpec& spec, const Grid& grid,
                             const NashConfig& cfg,
                             const SolveOptions& opts = {}) {
    spec.require_valid();
    const int m = spec.player_count();
    NashReport rep;
    rep.profile.assign(m, TimeMeasure::zero(grid.R, grid.T));
    const auto probes = default_probe_set(grid.R, grid.T);

    // A single player cannot cycle; undamped updates make the game
    // degenerate exactly to the plain optimizer.
    const double damping = m == 1 ? 1.0 : cfg.damping;
    for (int round = 0; round < cfg.max_rounds; ++round) {
        std::vector<double> disp(m, 0.0);
        for (int i = 0; i < m; ++i) {
            const OptimizationReport br = best_response(
                spec, i, rep.profile, grid, cfg.inner, opts, &rep.profile[i]);
            TimeMeasure updated = damping == 1.0
                                      ? br.mu_opt
                                      : combine(1.0 - damping, rep.profile[i],
                                                damping, br.mu_opt);
            disp[i] = weakstar_distance(rep.profile[i], updated, probes);
            rep.profile[i] = std::move(updated);
        }
        rep.displacement_trace.push_back(disp);
        rep.rounds = round + 1;
        if (*std::max_element(disp.begin(), disp.end()) <= cfg.tol) {
            rep.converged = true;
            break;
        }
    }

    if (rep.converged && damping < 1.0) {
        // Finish with undamped sweeps: the damped iterate trails the best
        // response geometrically and would carry a phantom Euler residual.
        // Near the fixed point the plain best-response map contracts, so a
        // few sweeps reach the displacement tolerance honestly.
        rep.converged = false;
        for (int extra = 0; extra < 8; ++extra) {
            std::vector<double> disp(m, 0.0);
            for (int i = 0; i < m; ++i) {
                const OptimizationReport br = best_response(
                    spec, i, rep.profile, grid, cfg.inner, opts, &rep.profile[i]);
                disp[i] = weakstar_distance(rep.profile[i], br.mu_opt, probes);
                rep.profile[i] = br.mu_opt;
            }
            rep.displacement_trace.push_back(disp);
            if (*std::max_element(disp.begin(), disp.end()) <= cfg.tol) {
                rep.converged = true;
                break;
            }
        }
    }

    // Per-player optimality against the final frozen opponents.
    for (int i = 0; i < m; ++i) {
        const ModelParams p = spec.player_params(i);
        const TimeMeasure eta = opponents_total(rep.profile, i, grid.R, grid.T);
        const auto dict = direction_dictionary(p, grid, cfg.inner.dictionary_size,
                                               cfg.inner.seed);
        const ResidualReport rr =
            euler_residual(p, rep.profile[i], dict, grid, opts,
                           m == 1 ? nullptr : &eta);
        rep.residuals.push_back(rr.value);
        const Field phi = solve_forward(p, rep.profile[i], grid, opts,
                                        m == 1 ? nullptr : &eta);
        rep.payoffs.push_back(payoff_from_state(p, rep.profile[i], phi).value);
    }
    return rep;
}

}  // namespace harvest
