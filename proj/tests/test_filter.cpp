#include "support/oracles.hpp"
#include "support/properties.hpp"
#include "support/random_models.hpp"

#include "vpmb/experiment.hpp"
#include "vpmb/filter.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace vpmb;
using vpmb::testing::Rng;

namespace {

GaussianDensity g1(double mean, double var) {
    return {Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var)};
}

SensorModel scalar_sensor(double pd) {
    SensorModel s;
    s.detection_prob = pd;
    s.clutter_rate = 10.0;
    s.clutter_region_area = 90000.0;
    s.obs = Eigen::MatrixXd::Identity(1, 1);
    s.obs_noise = Eigen::MatrixXd::Identity(1, 1);
    return s;
}

PmbDensity single_track(double r, const GaussianDensity& g) {
    PmbDensity d;
    d.tracks = {Track{0, {{r, g, 0.0}}}};
    d.hypotheses = {{0.0, {0}}};
    d.next_track_id = 1;
    return d;
}

FilterStepConfig scenario_step_config(double birth_weight) {
    const auto m = constant_velocity_model();
    FilterStepConfig cfg;
    cfg.dynamics = m;
    cfg.birth.terms = {{birth_weight,
                        {Eigen::Vector4d(100, 0, 100, 0),
                         Eigen::Vector4d(150.0 * 150.0, 1.0, 150.0 * 150.0, 1.0).asDiagonal()}}};
    cfg.sensor.obs = m.obs;
    cfg.sensor.obs_noise = m.obs_noise;
    return cfg;
}

}  // namespace

TEST_SUITE("pmbm-filter") {

TEST_CASE("predict") {
    const LinearGaussianModel<double> still{Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Zero(1, 1),
                                            Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)};
    SUBCASE("identity dynamics, certain survival, no birth") {
        PmbDensity d = single_track(0.5, g1(2.0, 3.0));
        d.ppp.terms = {{0.2, g1(1.0, 1.0)}};
        const auto out = predict(d, still, 1.0, {});
        CHECK(out.tracks[0].locals[0].existence == 0.5);
        CHECK(out.tracks[0].locals[0].density.mean(0) == 2.0);
        CHECK(out.tracks[0].locals[0].density.cov(0, 0) == 3.0);
        REQUIRE(out.ppp.terms.size() == 1);
        CHECK(out.ppp.terms[0].weight == 0.2);
    }
    SUBCASE("survival scales existence") {
        const auto out = predict(single_track(0.5, g1(0, 1)), still, 0.99, {});
        CHECK(out.tracks[0].locals[0].existence == doctest::Approx(0.495));
    }
    SUBCASE("birth into an empty density") {
        BirthModel birth{{{3.0, g1(4.0, 9.0)}}};
        const auto out = predict(PmbmDensity{}, still, 0.99, birth);
        REQUIRE(out.ppp.terms.size() == 1);
        CHECK(out.ppp.terms[0].weight == 3.0);
        CHECK(out.ppp.terms[0].density.mean(0) == 4.0);
        CHECK(out.tracks.empty());
    }
}

TEST_CASE("missed-detection existence never grows") {
    for (double r = 0.0; r <= 1.0; r += 0.05)
        for (double pd = 0.0; pd <= 1.0; pd += 0.05) {
            const double out = missed_detection_existence(r, pd);
            CHECK(out <= r + 1e-15);
            CHECK(out >= 0.0);
        }
}

TEST_CASE("update") {
    SUBCASE("no measurements: every track misses") {
        PmbDensity d = single_track(0.8, g1(0, 1));
        d.ppp.terms = {{0.5, g1(3, 1)}};
        const auto out = update(d, scalar_sensor(0.9), {}, 10);
        REQUIRE(out.hypotheses.size() == 1);
        const auto& b = out.tracks[0].locals[out.hypotheses[0].locals_chosen[0]];
        CHECK(b.existence == doctest::Approx(0.8 * 0.1 / (1 - 0.8 * 0.9)));
        CHECK(b.density.mean(0) == 0.0);
        CHECK(out.ppp.terms[0].weight == doctest::Approx(0.05));
    }
    SUBCASE("detection against missed detection for one measurement") {
        const auto sensor = scalar_sensor(0.9);
        const auto out = update(single_track(1.0, g1(0, 1)), sensor, {Eigen::VectorXd::Constant(1, 0.0)}, 10);
        REQUIRE(out.hypotheses.size() == 2);
        REQUIRE(out.tracks.size() == 2);
        double w_detect = 0.0, w_missed = 0.0;
        for (const auto& h : out.hypotheses)
            (h.locals_chosen[1] == 1 ? w_missed : w_detect) += h.weight();
        const double expected = 0.9 * (1.0 / std::sqrt(4.0 * std::numbers::pi)) / (0.1 * (10.0 / 90000.0));
        CHECK(w_detect / w_missed == doctest::Approx(expected).epsilon(1e-12));
        CHECK(w_detect > 0.99);
    }
    SUBCASE("gating removes a measurement at squared distance 25") {
        const auto sensor = scalar_sensor(0.9);
        // S = 1 + 1, so z = sqrt(50) sits at squared Mahalanobis distance 25.
        const auto out = update(single_track(1.0, g1(0, 1)), sensor,
                                {Eigen::VectorXd::Constant(1, std::sqrt(50.0))}, 10);
        CHECK(out.tracks[0].locals.size() == 1);
        REQUIRE(out.hypotheses.size() == 1);
        const auto in_gate = update(single_track(1.0, g1(0, 1)), sensor,
                                    {Eigen::VectorXd::Constant(1, std::sqrt(30.0))}, 10);
        CHECK(in_gate.tracks[0].locals.size() == 2);
    }
    SUBCASE("measurement outside every PPP gate gives an r = 0 new track") {
        PmbDensity d;
        d.ppp.terms = {{1.0, g1(0, 1)}};
        const auto out = update(d, scalar_sensor(0.9), {Eigen::VectorXd::Constant(1, 100.0)}, 10);
        REQUIRE(out.tracks.size() == 1);
        CHECK(out.tracks[0].locals[1].existence == 0.0);
    }
    SUBCASE("PPP intensity is scaled by 1 - pD everywhere") {
        Rng rng(31);
        PmbDensity d;
        for (int t = 0; t < 3; ++t) d.ppp.terms.push_back({testing::uniform(rng, 0.1, 1), testing::random_gaussian(rng, 1)});
        const auto sensor = scalar_sensor(0.7);
        const auto out = update(d, sensor, {Eigen::VectorXd::Constant(1, 0.5)}, 10);
        for (int p = 0; p < 100; ++p) {
            const Eigen::VectorXd x = testing::random_vector(rng, 1, -8, 8);
            CHECK(out.ppp.evaluate(x) == doctest::Approx(0.3 * d.ppp.evaluate(x)).epsilon(1e-12));
        }
    }
    SUBCASE("weights match enumeration of all association maps") {
        const auto outcome = testing::check_update_bookkeeping(32, 300);
        INFO(outcome.detail);
        CHECK(outcome.passed);
    }
}

TEST_CASE("step") {
    SUBCASE("empty density, no measurements") {
        const auto cfg = scenario_step_config(3.0);
        const auto out = step(PmbmDensity{}, cfg, {});
        CHECK(out.tracks.empty());
        REQUIRE(out.ppp.terms.size() == 1);
        CHECK(out.ppp.terms[0].weight == doctest::Approx(3.0 * 0.1));
    }
    SUBCASE("zero thresholds and a huge cap equal predict then update") {
        // Up to compact(): nonexistent bookkeeping entries describe no target.
        auto cfg = scenario_step_config(0.5);
        cfg.thresholds = {0.0, 0.0, 1000000};
        const auto truth = generate_scenario(kCanonicalTruthSeed);
        const auto z = simulate_measurements(truth, cfg.sensor, Region{}, 4);
        PmbmDensity d;
        for (std::size_t k = 1; k <= 3; ++k) {
            auto direct = update(predict(d, cfg.dynamics, cfg.survival, cfg.birth), cfg.sensor, z[k - 1], 1000000);
            compact(direct);
            normalise_weights(direct.hypotheses);
            const auto stepped = step(d, cfg, z[k - 1]);
            std::ostringstream a, b;
            write_pmbm(a, direct);
            write_pmbm(b, stepped);
            CHECK(a.str() == b.str());
            d = stepped;
        }
    }
}

TEST_CASE("golden snapshot of the first scenario steps") {
    const auto truth = generate_scenario(kCanonicalTruthSeed);
    auto cfg = scenario_step_config(3.0);
    const auto z = simulate_measurements(truth, cfg.sensor, Region{}, 0);
    PmbmDensity d;
    for (std::size_t k = 1; k <= 4; ++k) {
        cfg.birth.terms[0].weight = k == 1 ? 3.0 : 5e-3;
        d = step(d, cfg, z[k - 1]);
    }
    const std::string path = std::string(VPMB_TEST_DATA_DIR) + "/step4.pmbm";
    if (std::getenv("VPMB_REGENERATE_GOLDEN")) {
        std::ofstream os(path);
        write_pmbm(os, d);
    }
    std::ifstream is(path);
    REQUIRE(is.good());
    const PmbmDensity golden = read_pmbm(is);
    REQUIRE(golden.tracks.size() == d.tracks.size());
    REQUIRE(golden.hypotheses.size() == d.hypotheses.size());
    REQUIRE(golden.ppp.terms.size() == d.ppp.terms.size());
    for (std::size_t i = 0; i < d.tracks.size(); ++i) {
        REQUIRE(golden.tracks[i].locals.size() == d.tracks[i].locals.size());
        for (std::size_t l = 0; l < d.tracks[i].locals.size(); ++l) {
            const auto &a = golden.tracks[i].locals[l], &b = d.tracks[i].locals[l];
            CHECK(a.existence == doctest::Approx(b.existence).epsilon(1e-9));
            CHECK((a.density.mean - b.density.mean).norm() <= 1e-9 * std::max(1.0, b.density.mean.norm()));
            CHECK((a.density.cov - b.density.cov).norm() <= 1e-9 * std::max(1.0, b.density.cov.norm()));
        }
    }
    for (std::size_t h = 0; h < d.hypotheses.size(); ++h) {
        CHECK(golden.hypotheses[h].locals_chosen == d.hypotheses[h].locals_chosen);
        CHECK(golden.hypotheses[h].weight() == doctest::Approx(d.hypotheses[h].weight()).epsilon(1e-9));
    }
    for (std::size_t t = 0; t < d.ppp.terms.size(); ++t)
        CHECK(golden.ppp.terms[t].weight == doctest::Approx(d.ppp.terms[t].weight).epsilon(1e-9));
}

}  // TEST_SUITE
