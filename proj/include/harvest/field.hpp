#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "harvest/grid.hpp"

namespace harvest {

/// Space-time grid function: (nt+1) x nx values, row n = time level t_n.
/// Holds states, sensitivities and adjoints alike.
class Field {
public:
    Field() = default;
    explicit Field(const Grid& g, double fill = 0.0)
        : grid_(g), v_(static_cast<std::size_t>(g.nt + 1) * g.nx, fill) {}

    double& at(int n, int i) { return v_[idx(n, i)]; }
    double at(int n, int i) const { return v_[idx(n, i)]; }

    std::span<double> trace(int n) {
        return {v_.data() + idx(n, 0), static_cast<std::size_t>(grid_.nx)};
    }
    std::span<const double> trace(int n) const {
        return {v_.data() + idx(n, 0), static_cast<std::size_t>(grid_.nx)};
    }

    // Linear interpolation in x at time level n.
    double value_at(int n, double x) const {
        const double pos =
            std::clamp(x / grid_.R * (grid_.nx - 1), 0.0, double(grid_.nx - 1));
        const int i = std::min(static_cast<int>(pos), grid_.nx - 2);
        const double f = pos - i;
        return at(n, i) * (1 - f) + at(n, i + 1) * f;
    }

    const Grid& grid() const { return grid_; }

    double min_value() const { return *std::min_element(v_.begin(), v_.end()); }
    double max_value() const { return *std::max_element(v_.begin(), v_.end()); }
    bool all_finite() const {
        return std::all_of(v_.begin(), v_.end(),
                           [](double a) { return std::isfinite(a); });
    }

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

private:
    std::size_t idx(int n, int i) const {
        return static_cast<std::size_t>(n) * grid_.nx + i;
    }
    Grid grid_;
    std::vector<double> v_;
};

// Space-time L2 norm: trapezoid in time, trapezoid in space.
inline double spacetime_l2(const Field& f) {
    const Grid& g = f.grid();
    double s = 0.0;
    for (int n = 0; n <= g.nt; ++n) {
        const double wt = (n == 0 || n == g.nt) ? 0.5 * g.dt() : g.dt();
        double row = 0.0;
        for (int i = 0; i < g.nx; ++i)
            row += g.node_weight(i) * f.at(n, i) * f.at(n, i);
        s += wt * row;
    }
    return std::sqrt(s);
}

inline double sup_difference(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k)
        m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

// Samples a scenario coefficient onto the run grid.
template <class FieldLike>
inline Field sample_on_grid(const FieldLike& c, const Grid& g) {
    Field out(g);
    for (int n = 0; n <= g.nt; ++n)
        for (int i = 0; i < g.nx; ++i) out.at(n, i) = c(g.t(n), g.x(i));
    return out;
}

}  // namespace harvest
