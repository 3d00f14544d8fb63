#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "harvest/payoff.hpp"

using namespace harvest;

namespace {

TimeMeasure atom_over_time(double x, double mass, double R, double T) {
    TimeMeasure mu = TimeMeasure::zero(R, T);
    mu.slices[0].atoms = {{x, mass}};
    return mu;
}

TimeMeasure random_direction(std::mt19937_64& rng, double R, double T,
                             int slices, double tv_cap) {
    std::uniform_real_distribution<double> ux(0.05 * R, 0.95 * R), um(0.0, 1.0);
    TimeMeasure mu = TimeMeasure::uniform_slices(R, T, slices);
    for (auto& s : mu.slices) {
        const double m = tv_cap * um(rng);
        s.atoms.push_back({ux(rng), m});
    }
    return mu;
}

}  // namespace

TEST_CASE("payoff of the zero control is zero") {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 2.0);
    const Grid g{101, 200, 1.0, 1.0};
    const PayoffBreakdown b =
        evaluate_payoff(p, TimeMeasure::zero(1.0, 1.0), g);
    REQUIRE(b.ok());
    CHECK(b.value == 0.0);
    CHECK(b.harvest == 0.0);
    CHECK(b.cost_value == 0.0);
}

TEST_CASE("payoff of a tiny atom matches the first-order expansion") {
    // J(m) = m T (h - c(x0)) + O(m^2) at phi0 = h, Psi = identity.
    const double c0 = 0.3;
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, c0, 2.0);
    const Grid g{101, 200, 1.0, 1.0};
    const double lead = 1.0 - c0;  // (h - c) * T with h = T = 1
    std::vector<double> errs;
    for (double m : {1e-2, 1e-3}) {
        const PayoffBreakdown b =
            evaluate_payoff(p, atom_over_time(0.5, m, 1.0, 1.0), g);
        REQUIRE(b.ok());
        errs.push_back(std::abs(b.value / m - lead));
    }
    CHECK(errs[0] < 2e-2);
    CHECK(errs[1] < 2e-3);  // error scales like m
}

TEST_CASE("payoff never rises when the cost rises") {
    ModelParams lo = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.2, 2.0);
    ModelParams hi = lo;
    hi.cost = SampledField::constant(0.5, 1.0, 1.0);
    const Grid g{101, 200, 1.0, 1.0};
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const TimeMeasure mu = random_direction(rng, 1.0, 1.0, 4, 0.4);
        const PayoffBreakdown a = evaluate_payoff(lo, mu, g);
        const PayoffBreakdown b = evaluate_payoff(hi, mu, g);
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(b.value <= a.value + 1e-14);
    }
}

TEST_CASE("atoms in the forbidden region are infeasible, not numeric") {
    ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 2.0);
    // Park on the middle fifth of the interval.
    std::vector<std::uint8_t> mask(21, 0);
    for (int i = 8; i <= 12; ++i) mask[i] = 1;
    p.forbidden = ForbiddenMask(0, 21, 1.0, 1.0, mask);
    const Grid g{101, 200, 1.0, 1.0};
    const PayoffBreakdown inside =
        evaluate_payoff(p, atom_over_time(0.5, 0.1, 1.0, 1.0), g);
    CHECK_FALSE(inside.ok());
    const PayoffBreakdown outside =
        evaluate_payoff(p, atom_over_time(0.1, 0.1, 1.0, 1.0), g);
    CHECK(outside.ok());
}

TEST_CASE("budget violations are infeasible") {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 2.0);
    const Grid g{51, 100, 1.0, 1.0};
    // b = 2, so TV 0.7 uses budget 1.4 > 1.
    const PayoffBreakdown b =
        evaluate_payoff(p, atom_over_time(0.5, 0.7, 1.0, 1.0), g);
    CHECK_FALSE(b.ok());
}

TEST_CASE("directional derivative") {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 0.9, 0.25, 2.0);
    const Grid g{101, 200, 1.0, 1.0};
    std::mt19937_64 rng(21);

    SECTION("zero direction gives zero") {
        const TimeMeasure mu = random_direction(rng, 1.0, 1.0, 4, 0.3);
        CHECK(directional_derivative(p, mu, TimeMeasure::zero(1.0, 1.0), g) ==
              0.0);
    }

    SECTION("matches the finite-difference quotient of J") {
        const TimeMeasure mu = random_direction(rng, 1.0, 1.0, 4, 0.3);
        const TimeMeasure nu = random_direction(rng, 1.0, 1.0, 5, 0.5);
        const double dd = directional_derivative(p, mu, nu, g);
        const double j0 = evaluate_payoff(p, mu, g).value;
        std::vector<double> errs;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const double je =
                evaluate_payoff(p, combine(1.0, mu, eps, nu), g).value;
            errs.push_back(std::abs((je - j0) / eps - dd));
        }
        CHECK(errs[0] / errs[1] == Catch::Approx(10.0).epsilon(0.3));
        CHECK(errs[1] / errs[2] == Catch::Approx(10.0).epsilon(0.35));
    }

    SECTION("at mu* = 0 with phi0 = h the phi1 term vanishes") {
        const TimeMeasure zero = TimeMeasure::zero(1.0, 1.0);
        const TimeMeasure nu = random_direction(rng, 1.0, 1.0, 3, 0.4);
        ModelParams ph = p;
        ph.initial_density = Profile::constant(1.0, 1.0);
        const double dd = directional_derivative(ph, zero, nu, g);
        const Field phi = solve_forward(ph, zero, g);
        const Field cost = sample_on_grid(ph.cost, g);
        const double expected =
            pair_field(nu, phi) - ph.psi.d1(0.0) * pair_field(nu, cost);
        CHECK(dd == Catch::Approx(expected).margin(1e-14));
    }
}

TEST_CASE("euler residual") {
    const Grid g{101, 200, 1.0, 1.0};
    std::mt19937_64 rng(33);

    SECTION("free fish make the zero control suboptimal") {
        const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.0, 2.0);
        std::vector<TimeMeasure> dirs;
        for (int k = 0; k < 8; ++k)
            dirs.push_back(random_direction(rng, 1.0, 1.0, 4, 1.0));
        const ResidualReport r =
            euler_residual(p, TimeMeasure::zero(1.0, 1.0), dirs, g);
        REQUIRE(r.any_admissible());
        CHECK(r.value > 0.0);
        CHECK(r.arg_index >= 0);
    }

    SECTION("an empty dictionary yields the -inf sentinel") {
        const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.3, 2.0);
        const ResidualReport r =
            euler_residual(p, TimeMeasure::zero(1.0, 1.0), {}, g);
        CHECK_FALSE(r.any_admissible());
        CHECK(std::isinf(r.value));
        CHECK(r.value < 0.0);
    }

    SECTION("directions through saturated slices are filtered out") {
        const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.0, 2.0);
        // mu saturates: b * mass = 1 on every step.
        const TimeMeasure mu = atom_over_time(0.5, 0.5, 1.0, 1.0);
        std::vector<TimeMeasure> dirs = {atom_over_time(0.3, 1.0, 1.0, 1.0)};
        const ResidualReport r = euler_residual(p, mu, dirs, g);
        CHECK_FALSE(r.any_admissible());
    }
}

TEST_CASE("segment scan") {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.25, 20.0);
    const Grid g{101, 200, 1.0, 1.0};

    SECTION("coinciding endpoints are rejected") {
        const TimeMeasure mu = atom_over_time(0.5, 0.03, 1.0, 1.0);
        CHECK_THROWS_AS(payoff_segment_scan(p, mu, mu, 5, g), InputError);
    }

    SECTION("second derivative matches central differences at second order") {
        const TimeMeasure a = atom_over_time(0.3, 0.04, 1.0, 1.0);
        const TimeMeasure b = atom_over_time(0.7, 0.05, 1.0, 1.0);
        auto central_error = [&](int n_points) {
            const SegmentScan s = payoff_segment_scan(p, a, b, n_points, g);
            const double step = s.zeta[1] - s.zeta[0];
            double worst = 0.0;
            for (std::size_t q = 1; q + 1 < s.zeta.size(); ++q) {
                const double cd =
                    (s.j[q + 1] - 2.0 * s.j[q] + s.j[q - 1]) / (step * step);
                worst = std::max(worst, std::abs(cd - s.j_second[q]));
            }
            return worst;
        };
        const double e1 = central_error(5);
        const double e2 = central_error(9);   // halves the step
        const double e3 = central_error(17);  // halves it again
        CHECK(e1 / e2 > 2.5);
        CHECK(e2 / e3 > 2.5);
        CHECK(e1 / e2 < 6.5);
    }

    SECTION("a convex quadratic Psi only lowers the curvature") {
        ModelParams q = p;
        q.psi = CostAggregator::quadratic(1.0, 0.8);
        const TimeMeasure a = atom_over_time(0.35, 0.04, 1.0, 1.0);
        const TimeMeasure b = atom_over_time(0.6, 0.05, 1.0, 1.0);
        const SegmentScan sid = payoff_segment_scan(p, a, b, 5, g);
        const SegmentScan sq = payoff_segment_scan(q, a, b, 5, g);
        for (std::size_t k = 0; k < sid.zeta.size(); ++k)
            CHECK(sq.j_second[k] <= sid.j_second[k] + 1e-14);
    }
}

TEST_CASE("concavity certificate") {
    const ModelParams p = ModelParams::homogeneous(1.0, 1.0, 1.0, 0.25, 25.0);
    const Grid g{101, 200, 1.0, 1.0};

    SECTION("small controls near the habitat certify concave") {
        const TimeMeasure a = atom_over_time(0.3, 0.02, 1.0, 1.0);
        const TimeMeasure b = atom_over_time(0.7, 0.04, 1.0, 1.0);
        const CertificateReport r = concavity_certificate(p, a, b, 0.05, g);
        REQUIRE_FALSE(r.refused);
        CHECK(r.all_negative);
        CHECK(r.state_min >= r.half_h);
        CHECK(r.state_dist_h_inf < 0.5);
    }

    SECTION("large controls are refused, naming the bound") {
        TimeMeasure big = TimeMeasure::zero(1.0, 1.0);
        big.slices[0].atoms = {{0.5, 5.0}};
        const TimeMeasure small = atom_over_time(0.3, 0.02, 1.0, 1.0);
        const CertificateReport r = concavity_certificate(p, big, small, 0.05, g);
        CHECK(r.refused);
        CHECK(r.refusal.find("sup-TV") != std::string::npos);
    }

    SECTION("a wandering habitat is refused under (H.6)") {
        ModelParams q = p;
        q.carrying_cap = SampledField::from_function(
            [](double, double x) { return 1.0 + 0.2 * x; }, 0, 11, 1.0, 1.0);
        const TimeMeasure a = atom_over_time(0.3, 0.02, 1.0, 1.0);
        const TimeMeasure b = atom_over_time(0.7, 0.04, 1.0, 1.0);
        const CertificateReport r = concavity_certificate(q, a, b, 0.05, g);
        CHECK(r.refused);
        CHECK(r.refusal.find("H.6") != std::string::npos);
    }
}
