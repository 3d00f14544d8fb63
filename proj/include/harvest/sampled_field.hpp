#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "harvest/grid.hpp"

namespace harvest {

/// Scenario coefficient sampled on its own uniform (t,x) lattice over
/// [0,T] x [0,R]; queries between samples use bilinear interpolation.
/// A field built from a scalar is exactly constant everywhere.
class SampledField {
public:
    SampledField() = default;

    SampledField(int nt_samples, int nx_samples, double T, double R,
                 std::vector<double> values)
        : nts_(nt_samples), nxs_(nx_samples), T_(T), R_(R), v_(std::move(values)) {
        if (nts_ < 0 || nxs_ < 2 ||
            v_.size() != static_cast<std::size_t>((nts_ + 1) * nxs_))
            throw InputError("sampled field: bad dimensions");
    }

    static SampledField constant(double c, double T, double R) {
        return SampledField(0, 2, T, R, {c, c});
    }

    template <class F>
    static SampledField from_function(F&& f, int nt_samples, int nx_samples,
                                      double T, double R) {
        std::vector<double> v;
        v.reserve(static_cast<std::size_t>(nt_samples + 1) * nx_samples);
        for (int n = 0; n <= nt_samples; ++n) {
            const double t = nt_samples == 0 ? 0.0 : T * n / nt_samples;
            for (int i = 0; i < nx_samples; ++i)
                v.push_back(f(t, R * i / (nx_samples - 1)));
        }
        return SampledField(nt_samples, nx_samples, T, R, std::move(v));
    }

    double operator()(double t, double x) const {
        int n = 0;
        double tf = 0.0;
        if (nts_ > 0) {
            const double tp = std::clamp(t / T_ * nts_, 0.0, double(nts_));
            n = std::min(static_cast<int>(tp), nts_ - 1);
            tf = tp - n;
        }
        const double xp =
            std::clamp(x / R_ * (nxs_ - 1), 0.0, double(nxs_ - 1));
        const int i = std::min(static_cast<int>(xp), nxs_ - 2);
        const double xf = xp - i;
        const int n1 = nts_ > 0 ? n + 1 : n;
        const double top = at(n, i) * (1 - xf) + at(n, i + 1) * xf;
        const double bot = at(n1, i) * (1 - xf) + at(n1, i + 1) * xf;
        return top * (1 - tf) + bot * tf;
    }

    double min_sample() const { return *std::min_element(v_.begin(), v_.end()); }
    double max_sample() const { return *std::max_element(v_.begin(), v_.end()); }

    bool is_constant() const {
        return std::all_of(v_.begin(), v_.end(),
                           [&](double a) { return a == v_.front(); });
    }

    int nt_samples() const { return nts_; }
    int nx_samples() const { return nxs_; }
    double T() const { return T_; }
    double R() const { return R_; }
    double at(int n, int i) const { return v_[static_cast<std::size_t>(n) * nxs_ + i]; }
    const std::vector<double>& values() const { return v_; }

private:
    int nts_ = 0, nxs_ = 0;
    double T_ = 1.0, R_ = 1.0;
    std::vector<double> v_;
};

/// Initial density phi0(x): samples on a uniform x lattice, linear interpolation.
class Profile {
public:
    Profile() = default;
    Profile(std::vector<double> values, double R) : v_(std::move(values)), R_(R) {
        if (v_.size() < 2) throw InputError("profile needs at least 2 samples");
    }
    static Profile constant(double c, double R) { return Profile({c, c}, R); }

    double operator()(double x) const {
        double pos = std::clamp(x / R_ * (v_.size() - 1), 0.0,
                                static_cast<double>(v_.size() - 1));
        auto i = std::min(static_cast<std::size_t>(pos), v_.size() - 2);
        const double f = pos - i;
        return v_[i] * (1 - f) + v_[i + 1] * f;
    }

    double min_sample() const { return *std::min_element(v_.begin(), v_.end()); }
    double max_sample() const { return *std::max_element(v_.begin(), v_.end()); }
    const std::vector<double>& values() const { return v_; }
    double R() const { return R_; }

private:
    std::vector<double> v_;
    double R_ = 1.0;
};

/// Cost aggregation map Psi: identity or the convex quadratic a*u + b*u^2.
struct CostAggregator {
    enum class Kind { Identity, Quadratic };
    Kind kind = Kind::Identity;
    double a = 1.0;
    double b = 0.0;

    double value(double u) const {
        return kind == Kind::Identity ? u : a * u + b * u * u;
    }
    double d1(double u) const {
        return kind == Kind::Identity ? 1.0 : a + 2.0 * b * u;
    }
    double d2(double) const { return kind == Kind::Identity ? 0.0 : 2.0 * b; }

    static CostAggregator identity() { return {}; }
    static CostAggregator quadratic(double a, double b) {
        return {Kind::Quadratic, a, b};
    }
};

/// Marks grid cells where the cost is infinite (no fishing allowed).
/// Sampled on its own lattice; a point is forbidden when any sample
/// supporting its bilinear cell is marked.
class ForbiddenMask {
public:
    ForbiddenMask() = default;
    ForbiddenMask(int nt_samples, int nx_samples, double T, double R,
                  std::vector<std::uint8_t> mask)
        : nts_(nt_samples), nxs_(nx_samples), T_(T), R_(R), m_(std::move(mask)) {
        if (m_.size() != static_cast<std::size_t>((nts_ + 1) * nxs_))
            throw InputError("forbidden mask: bad dimensions");
    }

    bool empty() const { return m_.empty(); }

    bool forbidden_at(double t, double x) const {
        if (m_.empty()) return false;
        const int nrows = nts_ + 1;
        double tp = std::clamp(t / T_ * std::max(nts_, 1), 0.0, double(nrows - 1));
        double xp = std::clamp(x / R_ * (nxs_ - 1), 0.0, double(nxs_ - 1));
        int n0 = std::min(static_cast<int>(tp), std::max(nts_ - 1, 0));
        int i0 = std::min(static_cast<int>(xp), nxs_ - 2);
        for (int n = n0; n <= std::min(n0 + 1, nts_); ++n)
            for (int i = i0; i <= i0 + 1; ++i)
                if (m_[static_cast<std::size_t>(n) * nxs_ + i]) return true;
        return false;
    }

    int nt_samples() const { return nts_; }
    int nx_samples() const { return nxs_; }
    const std::vector<std::uint8_t>& mask() const { return m_; }
    double T() const { return T_; }
    double R() const { return R_; }

private:
    int nts_ = 0, nxs_ = 0;
    double T_ = 1.0, R_ = 1.0;
    std::vector<std::uint8_t> m_;
};

}  // namespace harvest
