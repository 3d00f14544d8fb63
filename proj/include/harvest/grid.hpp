#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace harvest {

/// Base error for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad user input (files, parameters, domain mismatches).
struct InputError : Error {
    using Error::Error;
};

/// Numerical failure (iteration caps, non-finite values).
struct SolverError : Error {
    using Error::Error;
};

/// Uniform space-time grid on [0,T] x [0,R]: nx nodes including both
/// endpoints, nt time steps (nt+1 time levels).
struct Grid {
    int nx = 0;
    int nt = 0;
    double R = 0.0;
    double T = 0.0;

    double dx() const { return R / (nx - 1); }
    double dt() const { return T / nt; }
    double x(int i) const { return R * i / (nx - 1); }
    double t(int n) const { return T * n / nt; }

    // Trapezoid node weight: dx/2 at both endpoints, dx inside.
    double node_weight(int i) const {
        return (i == 0 || i == nx - 1) ? 0.5 * dx() : dx();
    }

    bool valid() const { return nx >= 3 && nt >= 1 && R > 0.0 && T > 0.0; }

    void require_valid() const {
        if (!valid())
            throw InputError("grid requires nx >= 3, nt >= 1, R > 0, T > 0");
    }

    bool operator==(const Grid&) const = default;
};

// L2 norm over space with trapezoid weights.
inline double space_l2(std::span<const double> v, const Grid& g) {
    double s = 0.0;
    for (int i = 0; i < g.nx; ++i) s += g.node_weight(i) * v[i] * v[i];
    return std::sqrt(s);
}

// L2 norm of the discrete gradient (midpoint cell rule).
inline double grad_l2(std::span<const double> v, const Grid& g) {
    double s = 0.0;
    const double dx = g.dx();
    for (int i = 0; i + 1 < g.nx; ++i) {
        const double d = (v[i + 1] - v[i]) / dx;
        s += dx * d * d;
    }
    return std::sqrt(s);
}

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}

}  // namespace harvest
