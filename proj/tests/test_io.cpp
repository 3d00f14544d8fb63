#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "harvest/io.hpp"

using namespace harvest;

TEST_CASE("scenario parsing") {
    SECTION("scalar fields become constant coefficients") {
        const io::json j = {
            {"R", 2.0},     {"T", 1.5},   {"alpha", 1.2}, {"h", 0.9},
            {"cost", 0.3},  {"budget", 2.0}, {"b0", 2.0},  {"phi0", 0.8},
            {"psi", {{"kind", "identity"}}}, {"forbidden_mask", nullptr}};
        const ModelParams p = io::scenario_from_json(j);
        CHECK(p.R == 2.0);
        CHECK(p.repro_rate(0.7, 1.3) == 1.2);
        CHECK(p.carrying_cap.is_constant());
        CHECK(p.constant_habitat);
        CHECK(p.initial_density(1.0) == 0.8);
    }

    SECTION("2D arrays and 1D phi0 are sampled fields") {
        io::json j = {
            {"R", 1.0},    {"T", 1.0},      {"b0", 1.0},
            {"alpha", io::json::array({{1.0, 2.0}, {3.0, 4.0}})},
            {"h", 1.0},    {"cost", 0.0},   {"budget", 1.0},
            {"phi0", io::json::array({0.0, 1.0, 0.5})}};
        const ModelParams p = io::scenario_from_json(j);
        CHECK(p.repro_rate(0.0, 0.0) == 1.0);
        CHECK(p.repro_rate(1.0, 1.0) == 4.0);
        CHECK(p.repro_rate(0.5, 0.5) == 2.5);
        CHECK(p.initial_density(0.25) == Catch::Approx(0.5));
        CHECK_FALSE(p.constant_habitat == false);  // scalar h stays constant
    }

    SECTION("quadratic psi") {
        io::json j = {{"kind", "quadratic"}, {"coeffs", {0.5, 2.0}}};
        const CostAggregator psi = io::psi_from_json(j);
        CHECK(psi.value(2.0) == Catch::Approx(0.5 * 2.0 + 2.0 * 4.0));
        CHECK(psi.d1(1.0) == Catch::Approx(0.5 + 4.0));
        CHECK(psi.d2(1.0) == Catch::Approx(4.0));
    }

    SECTION("field-level diagnostics for malformed input") {
        io::json j = {{"R", 1.0}, {"T", 1.0}, {"alpha", "soup"}, {"h", 1.0},
                      {"cost", 0.0}, {"budget", 1.0}, {"b0", 1.0}, {"phi0", 1.0}};
        CHECK_THROWS_AS(io::scenario_from_json(j), InputError);
        try {
            io::scenario_from_json(j);
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("alpha") != std::string::npos);
        }
        io::json ragged = j;
        ragged["alpha"] = io::json::array({{1.0, 2.0}, {3.0}});
        CHECK_THROWS_AS(io::scenario_from_json(ragged), InputError);
    }
}

TEST_CASE("measure files round-trip") {
    TimeMeasure mu = TimeMeasure::uniform_slices(1.0, 2.0, 3);
    mu.slices[0].atoms = {{0.25, 0.125}, {0.75, 0.0625}};
    mu.slices[1].density.assign(5, 0.3);
    mu.slices[2].atoms = {{1.0 / 3.0, 0.7071067811865476}};
    const TimeMeasure back = io::measure_from_json(io::measure_to_json(mu));
    REQUIRE(back.slice_count() == 3);
    CHECK(back.breakpoints == mu.breakpoints);
    CHECK(back.slices[0].atoms[1].mass == mu.slices[0].atoms[1].mass);
    CHECK(back.slices[2].atoms[0].x == mu.slices[2].atoms[0].x);
    CHECK(back.slices[1].density == mu.slices[1].density);
}

TEST_CASE("field CSV layout") {
    const Grid g{3, 2, 1.0, 1.0};
    Field f(g);
    for (int n = 0; n <= g.nt; ++n)
        for (int i = 0; i < g.nx; ++i) f.at(n, i) = n * 10 + i;
    std::ostringstream os;
    io::field_to_csv(f, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,x0,x0.5,x1");
    std::getline(is, line);
    CHECK(line == "0,0,1,2");
    std::getline(is, line);
    CHECK(line == "0.5,10,11,12");
    std::getline(is, line);
    CHECK(line == "1,20,21,22");
}

TEST_CASE("shipped scenarios load and validate") {
    for (const char* name :
         {"baseline", "hub", "hub_interior", "park", "smalldelta", "seasonal",
          "wide", "nash_symmetric"}) {
        const ModelParams p =
            io::load_scenario(std::string(SCENARIO_DIR) + "/" + name + ".json");
        const Grid g{51, 40, p.R, p.T};
        const ValidationReport r = validate_scenario(p, g);
        INFO(name);
        CHECK(r.admissible());
    }
}

TEST_CASE("game spec loading") {
    std::ifstream in(std::string(SCENARIO_DIR) + "/nash_symmetric.json");
    io::json j;
    in >> j;
    const GameSpec spec = io::game_from_json(j);
    CHECK(spec.player_count() == 2);
    const GameSpec spec4 = io::game_from_json(j, 4);
    CHECK(spec4.player_count() == 4);
}
