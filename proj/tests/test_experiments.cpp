#include <doctest.h>

#include <cmath>
#include <sstream>

#include "koopcert/errors.hpp"
#include "koopcert/experiments.hpp"

using namespace koopcert;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

SweepSpec linear_spec(std::vector<int> ms, int trials) {
    // x' = -x + u with dict {1, x}: the dictionary is invariant for every constant control
    const auto sys = linear_scalar(-1.0, 1.0);
    Scenario sc{sys, StateDomain{Box(v1(-1), v1(1)), {}}, monomial_dictionary(1, 1), v1(0.5), 1.0, 1e-2, 40, false};
    return SweepSpec{sc, std::move(ms), trials, 3, {1e-9, 1e-3, 1.0}};
}

SweepSpec duffing_spec(std::vector<int> ms, int trials, double horizon = 1.0) {
    Scenario sc{duffing(), StateDomain{symmetric_box(2, 2.0), {}}, monomial_dictionary(2, 3),
                (Vec(2) << 1.0, 1.0).finished(), horizon, 1e-2, 40, false};
    return SweepSpec{sc, std::move(ms), trials, 17, {0.5, 2.0, 8.0}};
}

}  // namespace

TEST_CASE("Wilson interval") {
    const auto half = wilson_interval(5, 10);
    CHECK(half.lower == doctest::Approx(0.2366).epsilon(1e-3));
    CHECK(half.upper == doctest::Approx(0.7634).epsilon(1e-3));
    CHECK(wilson_interval(0, 10).lower == 0.0);
    CHECK(wilson_interval(10, 10).upper == 1.0);
    CHECK(wilson_interval(10, 10).lower == doctest::Approx(0.7225).epsilon(1e-3));
    CHECK(wilson_interval(0, 0).upper == 1.0);
}

TEST_CASE("summary statistics") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(std::isinf(median({1.0, INFINITY, INFINITY})));
    CHECK(loglog_slope({1, 10, 100}, {1, std::pow(10, -0.5), 0.1}) == doctest::Approx(-0.5));
    CHECK(std::isnan(loglog_slope({1, 10}, {0.0, 1.0})));
    CHECK_THROWS_AS(loglog_slope({1}, {1}), UsageError);
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 45}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 2, 3}, {1, 2, 2, 3}) == doctest::Approx(1.0));
    CHECK(time_below({0, 1, 2, 3}, {0.1, 0.2, 0.5, 0.1}, 0.3) == 1.0);
    CHECK(time_below({0, 1}, {0.5, 0.1}, 0.3) == 0.0);
}

TEST_CASE("sweep specs are validated") {
    CHECK_THROWS_AS(linear_spec({100, 100}, 2).validate(), UsageError);
    CHECK_THROWS_AS(linear_spec({100, 10}, 2).validate(), UsageError);
    CHECK_THROWS_AS(linear_spec({10}, 0).validate(), UsageError);
    CHECK_THROWS_AS(linear_spec({0, 10}, 1).validate(), UsageError);
    CHECK(cell_seed(1, 100, 0) != cell_seed(1, 100, 1));
    CHECK(cell_seed(1, 100, 0) != cell_seed(1, 1000, 0));
}

TEST_CASE("invariant dictionary gives exact generators and trajectories") {
    const auto spec = linear_spec({5, 50}, 4);
    const auto g = run_generator_sweep(spec);
    CHECK(g.cells.size() == 8);
    for (const auto& c : g.cells) {
        CHECK_FALSE(c.failed);
        CHECK(c.max_error < 1e-10);
    }
    const auto t = run_trajectory_sweep(spec, random_zoh(Box(v1(-1), v1(1)), 0.1, 1.0, 2));
    for (const auto& c : t.cells) CHECK(c.max_trajectory_error < 1e-10);
    for (const auto& p : t.probabilities)
        if (p.epsilon >= 1e-3) CHECK(p.p == 1.0);
}

TEST_CASE("generator sweep bookkeeping") {
    const auto spec = duffing_spec({100, 400}, 6);
    const auto r = run_generator_sweep(spec);
    CHECK(r.cells.size() == 12);
    CHECK(r.median_error.size() == 2);
    CHECK(r.median_error[0].size() == 2);
    CHECK(r.slope_per_control.size() == 2);
    CHECK(r.probabilities.size() == 6);
    for (const auto& p : r.probabilities) {
        CHECK(p.p >= 0.0);
        CHECK(p.p <= 1.0);
        CHECK(p.ci.lower <= p.p);
        CHECK(p.ci.upper >= p.p);
    }
    // nested events: non-decreasing in epsilon for each m
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t e = 1; e < 3; ++e) CHECK(r.probabilities[m * 3 + e].p >= r.probabilities[m * 3 + e - 1].p);

    SUBCASE("bit-reproducible CSV") {
        std::ostringstream a, b;
        write_generator_sweep_csv(a, r, "abc");
        write_generator_sweep_csv(b, run_generator_sweep(spec), "abc");
        CHECK(a.str() == b.str());
        CHECK(a.str().rfind("# config_hash=abc\nm,trial,seed,err_u0,err_e1,max_error,failed\n", 0) == 0);
    }
    SUBCASE("resume skips completed cells and reproduces the output") {
        CellStore store;
        int computed = 0;
        store.on_complete = [&](const std::string& key, const nlohmann::json& cell) {
            ++computed;
            if (key.find("trial=0") != std::string::npos) store.completed[key] = cell;
        };
        run_generator_sweep(spec, &store);
        CHECK(computed == 12);
        CHECK(store.completed.size() == 2);
        computed = 0;
        const auto resumed = run_generator_sweep(spec, &store);
        CHECK(computed == 10);
        std::ostringstream a, b;
        write_generator_sweep_csv(a, r, "h");
        write_generator_sweep_csv(b, resumed, "h");
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("failed cells are recorded without aborting the sweep") {
    const auto r = run_generator_sweep(duffing_spec({3, 200}, 3));
    CHECK(r.cells.size() == 6);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.cells[static_cast<std::size_t>(i)].failed);
        CHECK(std::isinf(r.cells[static_cast<std::size_t>(i)].max_error));
        CHECK_FALSE(r.cells[static_cast<std::size_t>(i)].failure.empty());
    }
    for (int i = 3; i < 6; ++i) CHECK_FALSE(r.cells[static_cast<std::size_t>(i)].failed);
    CHECK(r.probabilities[0].successes == 0);
}

TEST_CASE("trajectory sweep") {
    const auto u = random_zoh(Box(v1(-1), v1(1)), 0.1, 1.0, 4);
    SUBCASE("smaller generator error goes with smaller trajectory error") {
        const auto r = run_trajectory_sweep(duffing_spec({100}, 50), u);
        REQUIRE(r.rank_correlation.size() == 1);
        CHECK(r.rank_correlation[0] > 0.0);
        CHECK(r.cells.size() == 50);
        CHECK(r.times.size() == 101);
    }
    SUBCASE("a longer horizon never lowers the per-trial maximum") {
        const auto shortr = run_trajectory_sweep(duffing_spec({200}, 10, 0.5), u);
        const auto longr = run_trajectory_sweep(duffing_spec({200}, 10, 1.0), u);
        for (std::size_t i = 0; i < shortr.cells.size(); ++i) {
            CHECK(shortr.cells[i].seed == longr.cells[i].seed);
            CHECK(longr.cells[i].max_trajectory_error >= shortr.cells[i].max_trajectory_error);
        }
    }
}

TEST_CASE("finite-element sweep") {
    const Box box(v1(-1), v1(1));
    const ScalarObservable smooth{"s", [](const Vec& x) { return std::sin(2 * x[0]) + 0.5 * x[0] * x[0]; },
                                  [](const Vec& x) { return v1(2 * std::cos(2 * x[0]) + x[0]); }};
    FemSweepSpec spec{linear_scalar(-1.0, 1.0), box, {}, smooth, {0.2}, MRule{}, 0, 5, v1(0.8),
                      ControlSignal::constant(v1(0.0), Box(v1(-1), v1(1))), 1.0, 1e-2, 40, false};
    SUBCASE("single level") {
        const auto r = run_fem_sweep(spec);
        CHECK(r.levels.size() == 1);
        CHECK(r.reduction_factors.empty());
        CHECK_FALSE(r.rate);
        CHECK(r.levels[0].N == 11);
        CHECK(r.cells.empty());
    }
    SUBCASE("refinement reduces the quadrature-level error") {
        spec.mesh_sizes = {0.2, 0.1, 0.05};
        const auto r = run_fem_sweep(spec);
        REQUIRE(r.reduction_factors.size() == 2);
        for (double f : r.reduction_factors) CHECK(f >= 1.5);
        REQUIRE(r.rate);
        CHECK(*r.rate > 0.5);
    }
    SUBCASE("constraint in the dictionary: sampled error decreases in m towards the quadrature term") {
        const ScalarObservable h{"h", [](const Vec& x) { return x[0] - 0.9; }, [](const Vec&) { return v1(1.0); }};
        // nonlinear drift so that span(V) is not invariant and both error terms are visible
        spec.system = ControlAffineSystem("cubic", 1, [](const Vec& x) { return Vec(-x.array().cube()); },
                                          {[](const Vec&) { return v1(1.0); }});
        spec.constraints = {h};
        spec.observable = h;
        spec.mesh_sizes = {0.25};
        spec.trials = 9;
        spec.m_rule = MRule{MRule::Kind::fixed, 40};
        const auto small = run_fem_sweep(spec);
        spec.m_rule = MRule{MRule::Kind::fixed, 4000};
        const auto large = run_fem_sweep(spec);
        const double quad = small.levels[0].quadrature_error;
        CHECK(quad > 0.0);
        CHECK(small.levels[0].median_sampled_error > 1.5 * quad);
        CHECK(large.levels[0].median_sampled_error < small.levels[0].median_sampled_error);
        // the sampled error approaches the quadrature-level term as m grows
        CHECK(large.levels[0].median_sampled_error - quad < 0.25 * (small.levels[0].median_sampled_error - quad));
        CHECK(small.cells.size() == 9);
    }
    SUBCASE("invalid inputs") {
        spec.mesh_sizes = {};
        CHECK_THROWS_AS(run_fem_sweep(spec), UsageError);
    }
}

TEST_CASE("duffing benchmark with zero control is exact") {
    DuffingBenchmarkSpec spec;
    spec.seeds = 3;
    spec.zero_control = true;
    spec.with_edmdc = false;
    const auto r = run_duffing_benchmark(spec);
    CHECK(r.times.size() == 3001);
    for (double e : r.median_bilinear) CHECK(e <= 1e-6);
    CHECK(r.truth_diverged == 0);
}

TEST_CASE("duffing benchmark bookkeeping") {
    DuffingBenchmarkSpec spec;
    spec.seeds = 4;
    spec.horizon = 1.0;
    const auto a = run_duffing_benchmark(spec);
    const auto b = run_duffing_benchmark(spec);
    CHECK(a.crossings.size() == 3);
    CHECK(a.median_bilinear == b.median_bilinear);
    CHECK(a.seeds.size() == 4);
    for (const auto& s : a.seeds) {
        CHECK(s.rel_err_bilinear.size() == a.times.size());
        CHECK(s.rel_err_edmdc.size() == a.times.size());
        CHECK(s.scale > 0.0);
    }
    std::ostringstream csv;
    write_benchmark_csv(csv, a, true, "h");
    CHECK(csv.str().find("t,median_rel_err_bilinear,median_rel_err_edmdc\n") != std::string::npos);
    const auto summary = benchmark_summary(a, spec);
    CHECK(summary.at("threshold_crossings").size() == 3);
    CHECK_FALSE(summary.contains("generated_at"));
}
