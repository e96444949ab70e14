#pragma once

#include "vpmb/pmbm.hpp"

#include <vector>

namespace vpmb {

/// Gaussian-mixture PPP birth intensity added at every prediction.
struct BirthModel {
    std::vector<WeightedGaussian> terms;
};

/// Point-target sensor with uniform Poisson clutter over a region of given area.
struct SensorModel {
    double detection_prob = 0.9;
    double clutter_rate = 10.0;
    double clutter_region_area = 300.0 * 300.0;
    Eigen::MatrixXd obs;        // H
    Eigen::MatrixXd obs_noise;  // R
    double gate_threshold = 20.0;  // squared Mahalanobis distance on the innovation

    /// lambda^C(z), constant over the region.
    [[nodiscard]] double clutter_intensity() const { return clutter_rate / clutter_region_area; }
};

using Measurements = std::vector<Eigen::VectorXd>;

/// Kalman-predicts PPP terms and Bernoulli locals, scales weights and
/// existences by the survival probability, and appends the birth terms.
[[nodiscard]] PmbmDensity predict(const PmbmDensity& d, const LinearGaussianModel<double>& dyn,
                                  double survival, const BirthModel& birth);

/// Track-oriented PMBM measurement update. Child hypotheses of each parent are
/// the best ceil(max_hyp * w_parent) association maps from Murty's algorithm;
/// the union is normalised and capped at max_hyp.
[[nodiscard]] PmbmDensity update(const PmbmDensity& d, const SensorModel& sensor,
                                 const Measurements& measurements, std::size_t max_hyp);

/// Missed-detection existence r (1 - pD) / (1 - r pD).
[[nodiscard]] double missed_detection_existence(double r, double detection_prob);

/// Bernoulli created by the first detection of a measurement, from the PPP
/// terms whose predicted measurement gates it. Also returns log(e(z) + lambda^C).
struct NewTrackLocal {
    BernoulliComponent detected;
    double log_weight = 0.0;
};
[[nodiscard]] NewTrackLocal new_track_from_measurement(const PppIntensity& ppp,
                                                       const SensorModel& sensor,
                                                       const Eigen::VectorXd& z,
                                                       std::size_t state_dim);

struct FilterStepConfig {
    LinearGaussianModel<double> dynamics;
    double survival = 0.99;
    BirthModel birth;
    SensorModel sensor;
    PruneThresholds thresholds;
};

/// predict, update, prune_and_cap.
[[nodiscard]] PmbmDensity step(const PmbmDensity& d, const FilterStepConfig& cfg,
                               const Measurements& measurements);

}  // namespace vpmb
