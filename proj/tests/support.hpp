#pragma once

// Shared builders for randomized admissible scenarios and controls.

#include <random>

#include "harvest/measure.hpp"
#include "harvest/model.hpp"

namespace harvest::testsupport {

// Smooth nonnegative field from a few Fourier modes, with range [lo, hi].
inline SampledField random_smooth_field(std::mt19937_64& rng, double lo,
                                        double hi, double T, double R) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a1 = u(rng), a2 = u(rng), b1 = u(rng);
    return SampledField::from_function(
        [=](double t, double x) {
            const double base =
                0.5 + 0.25 * (a1 * std::cos(M_PI * x / R) +
                              a2 * std::cos(2.0 * M_PI * x / R) * std::cos(t) +
                              b1 * std::sin(M_PI * t / T));
            return lo + (hi - lo) * std::clamp(base, 0.0, 1.0);
        },
        24, 65, T, R);
}

inline Profile random_smooth_profile(std::mt19937_64& rng, double base,
                                     double amp, double R) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double c1 = u(rng), c2 = u(rng);
    std::vector<double> v(41);
    for (int i = 0; i < 41; ++i) {
        const double x = R * i / 40.0;
        v[i] = std::max(0.0, base + amp * (c1 * std::cos(M_PI * x / R) +
                                           c2 * std::cos(2 * M_PI * x / R)));
    }
    return Profile(v, R);
}

// Random control with atoms and an optional a.c. part, slice TV below tv_cap.
inline TimeMeasure random_control(std::mt19937_64& rng, double R, double T,
                                  int slices, double tv_cap) {
    std::uniform_real_distribution<double> ux(0.05 * R, 0.95 * R), um(0.0, 1.0);
    TimeMeasure mu = TimeMeasure::uniform_slices(R, T, slices);
    for (auto& s : mu.slices) {
        const int na = 1 + static_cast<int>(rng() % 2);
        double tv = 0.0;
        for (int a = 0; a < na; ++a) {
            const double m = um(rng);
            s.atoms.push_back({ux(rng), m});
            tv += m;
        }
        if (rng() % 2) {
            s.density.resize(33);
            for (auto& d : s.density) d = 0.3 * um(rng);
            tv = s.total_variation(R);
        }
        const double target = tv_cap * um(rng);
        if (tv > 0) {
            for (auto& a : s.atoms) a.mass *= target / tv;
            for (auto& d : s.density) d *= target / tv;
        }
    }
    return mu;
}

// Fully admissible randomized logistic scenario at unit box.
inline ModelParams random_admissible_scenario(std::mt19937_64& rng) {
    ModelParams p = ModelParams::homogeneous(1.0, 1.0, 0.5, 0.0, 2.0);
    p.repro_rate = random_smooth_field(rng, 0.3, 1.5, 1.0, 1.0);
    p.carrying_cap = random_smooth_field(rng, 0.4, 1.2, 1.0, 1.0);
    p.initial_density = random_smooth_profile(rng, 0.8, 0.3, 1.0);
    p.constant_habitat = false;
    return p;
}

}  // namespace harvest::testsupport
