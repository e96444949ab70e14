#include "vpmb/errors.hpp"
#include "vpmb/experiment.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace vpmb;

TEST_SUITE("experiment-cli") {

TEST_CASE("generate_scenario") {
    const ScenarioTruth truth = generate_scenario(kCanonicalTruthSeed);
    const Region region;
    CHECK(truth.horizon == 101);
    REQUIRE(truth.targets.size() == 4);
    int dying = 0;
    for (const auto& t : truth.targets) {
        CHECK(t.birth_step == 1);
        if (t.death_step == 50) ++dying;
        else CHECK(t.death_step == 101);
        REQUIRE(t.states.size() == t.death_step - t.birth_step + 1);
        for (const auto& x : t.states) CHECK(region.contains(x(0), x(2)));
        const auto& mid = t.state_at(50);
        CHECK(std::abs(mid(0) - 150.0) <= 5.0);
        CHECK(std::abs(mid(2) - 150.0) <= 5.0);
        CHECK(std::abs(mid(1)) <= 2.0);
        CHECK(std::abs(mid(3)) <= 2.0);
    }
    CHECK(dying == 1);
    CHECK(truth.states_at(50).size() == 4);
    CHECK(truth.states_at(51).size() == 3);

    std::ostringstream a, b;
    write_scenario(a, truth);
    write_scenario(b, generate_scenario(kCanonicalTruthSeed));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("target,step,p_x,v_x,p_y,v_y\n", 0) == 0);
    std::ostringstream c;
    write_scenario(c, generate_scenario(kCanonicalTruthSeed + 1));
    CHECK(c.str() != a.str());
}

TEST_CASE("the shipped truth seed is the most compact of 0..999") {
    std::uint64_t best_seed = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const ScenarioTruth t = generate_scenario(s);
        double total = 0.0;
        int pairs = 0;
        for (std::size_t k = 40; k <= 60; ++k) {
            const auto x = t.states_at(k);
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = i + 1; j < x.size(); ++j) {
                    total += (position_of(x[i]) - position_of(x[j])).norm();
                    ++pairs;
                }
        }
        if (total / pairs < best) {
            best = total / pairs;
            best_seed = s;
        }
    }
    CHECK(best_seed == kCanonicalTruthSeed);
}

TEST_CASE("simulate_measurements") {
    const ScenarioTruth truth = generate_scenario(kCanonicalTruthSeed);
    const auto m = constant_velocity_model();
    SensorModel sensor;
    sensor.obs = m.obs;
    sensor.obs_noise = m.obs_noise;

    SUBCASE("nothing to see") {
        sensor.detection_prob = 0.0;
        sensor.clutter_rate = 0.0;
        for (const auto& z : simulate_measurements(truth, sensor, Region{}, 1)) CHECK(z.empty());
    }
    SUBCASE("certain detection with tiny noise") {
        sensor.detection_prob = 1.0;
        sensor.clutter_rate = 0.0;
        sensor.obs_noise = 1e-8 * Eigen::MatrixXd::Identity(2, 2);
        const auto z = simulate_measurements(truth, sensor, Region{}, 2);
        REQUIRE(z.size() == 101);
        // sigma = 1e-4 per axis: nearly all within 3 sigma, none beyond 6.
        std::size_t inside = 0, total = 0;
        for (std::size_t k = 1; k <= 101; ++k) {
            const auto x = truth.states_at(k);
            REQUIRE(z[k - 1].size() == x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double err = (z[k - 1][i] - position_of(x[i])).cwiseAbs().maxCoeff();
                CHECK(err <= 6e-4);
                inside += err <= 3e-4;
                ++total;
            }
        }
        CHECK(static_cast<double>(inside) >= 0.98 * static_cast<double>(total));
    }
    SUBCASE("clutter count has the Poisson mean") {
        ScenarioTruth empty;
        empty.horizon = 10000;
        sensor.detection_prob = 0.9;
        sensor.clutter_rate = 10.0;
        const Region region;
        std::size_t total = 0;
        for (const auto& z : simulate_measurements(empty, sensor, region, 3)) {
            total += z.size();
            for (const auto& p : z) CHECK(region.contains(p(0), p(1)));
        }
        CHECK(std::abs(static_cast<double>(total) / 10000.0 - 10.0) <= 0.3);
    }
    SUBCASE("deterministic per seed") {
        const auto a = simulate_measurements(truth, sensor, Region{}, 9);
        const auto b = simulate_measurements(truth, sensor, Region{}, 9);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            REQUIRE(a[k].size() == b[k].size());
            for (std::size_t i = 0; i < a[k].size(); ++i) CHECK(a[k][i] == b[k][i]);
        }
    }
}

TEST_CASE("run_experiment") {
    ExperimentConfig cfg;
    cfg.filter = FilterKind::v_pmb;
    cfg.n_runs = 3;
    cfg.rng_seed = 11;
    cfg.workers = 1;
    const ExperimentResult serial = run_experiment(cfg);
    cfg.workers = 3;
    const ExperimentResult parallel = run_experiment(cfg);

    SUBCASE("worker count does not change the numbers") {
        std::ostringstream a, b;
        write_step_csv(a, {serial});
        write_step_csv(b, {parallel});
        CHECK(a.str() == b.str());
        CHECK(serial.summary == parallel.summary);
    }
    SUBCASE("summary is the RMS over every step and run") {
        REQUIRE(serial.rows.size() == 101);
        REQUIRE(serial.per_step.size() == 101);
        double sq = 0.0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < serial.per_step.size(); ++k) {
            std::vector<double> totals;
            for (const auto& g : serial.per_step[k]) {
                totals.push_back(g.total);
                sq += g.total * g.total;
                ++count;
            }
            CHECK(serial.rows[k].step == k + 1);
            CHECK(serial.rows[k].rms_total == doctest::Approx(rms_gospa(totals)).epsilon(1e-12));
            const double parts = serial.rows[k].rms_loc * serial.rows[k].rms_loc +
                                 serial.rows[k].rms_missed * serial.rows[k].rms_missed +
                                 serial.rows[k].rms_false * serial.rows[k].rms_false;
            CHECK(parts == doctest::Approx(serial.rows[k].rms_total * serial.rows[k].rms_total).epsilon(1e-9));
        }
        CHECK(count == 303);
        CHECK(std::abs(serial.summary - std::sqrt(sq / static_cast<double>(count))) <= 1e-9);
    }
    SUBCASE("projection reports of run 0") {
        CHECK(serial.projections.size() == 101);
        for (const auto& r : serial.projections) CHECK(r.iterations_run >= 1);
    }
    SUBCASE("csv layout") {
        std::ostringstream steps, summary;
        write_step_csv(steps, {serial});
        write_summary_csv(summary, {serial});
        CHECK(steps.str().rfind("step,filter,rms_total,rms_loc,rms_missed,rms_false\n1,v-pmb,", 0) == 0);
        CHECK(summary.str().rfind("pd,pmbm,m-pmb,bp-pmb,gnn-pmb,v-pmb\n0.9,", 0) == 0);
    }
}

TEST_CASE("every filter runs") {
    for (FilterKind kind : kAllFilters) {
        ExperimentConfig cfg;
        cfg.filter = kind;
        cfg.n_runs = 1;
        cfg.workers = 1;
        const auto res = run_experiment(cfg);
        INFO(to_string(kind));
        CHECK(res.summary > 0.0);
        CHECK(res.summary < 10.0);
        CHECK(parse_filter_kind(to_string(kind)) == kind);
    }
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS((void)parse_filter_kind("kalman"), ContractViolation);
    ExperimentConfig cfg;
    cfg.n_runs = 0;
    CHECK_THROWS_AS(validate(cfg), ContractViolation);
    cfg = {};
    cfg.p_detect = 1.5;
    CHECK_THROWS_AS(validate(cfg), ContractViolation);
    cfg = {};
    cfg.gamma_ppp = -1.0;
    CHECK_THROWS_AS((void)run_experiment(cfg), ContractViolation);
}

}  // TEST_SUITE
