#include "vpmb/filter.hpp"

#include "vpmb/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vpmb {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

GaussianDensity placeholder_density(std::size_t n) {
    const auto dim = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
}

// Detection bookkeeping of one prior local hypothesis against every measurement.
struct LocalAssociations {
    double log_missed = 0.0;
    std::vector<double> log_detected;     // -inf where gated out
    std::vector<std::size_t> new_index;   // index of the detection local in the updated track
};

}  // namespace

double missed_detection_existence(double r, double detection_prob) {
    const double denom = 1.0 - r * detection_prob;
    if (denom <= 0.0) return r;
    return r * (1.0 - detection_prob) / denom;
}

PmbmDensity predict(const PmbmDensity& d, const LinearGaussianModel<double>& dyn,
                    double survival, const BirthModel& birth) {
    if (survival < 0.0 || survival > 1.0)
        throw ContractViolation("predict: survival probability outside [0, 1]");
    PmbmDensity out = d;
    for (auto& t : out.ppp.terms) {
        t.weight *= survival;
        t.density = kalman_predict(t.density, dyn);
    }
    for (const auto& b : birth.terms) out.ppp.terms.push_back(b);
    for (auto& tr : out.tracks)
        for (auto& l : tr.locals) {
            l.existence *= survival;
            l.density = kalman_predict(l.density, dyn);
        }
    return out;
}

NewTrackLocal new_track_from_measurement(const PppIntensity& ppp, const SensorModel& sensor,
                                         const Eigen::VectorXd& z, std::size_t state_dim) {
    const double pd = sensor.detection_prob;
    double log_e = kNegInf;
    std::vector<double> log_terms;
    std::vector<GaussianDensity> posteriors;
    if (pd > 0.0) {
        for (const auto& term : ppp.terms) {
            if (term.weight <= 0.0) continue;
            const Innovation<double> inn(term.density, sensor.obs, sensor.obs_noise);
            const double d2 = inn.mahalanobis2(z);
            if (d2 >= sensor.gate_threshold) continue;
            const double lt = std::log(term.weight) + std::log(pd) + inn.log_likelihood(z);
            log_terms.push_back(lt);
            posteriors.push_back(inn.posterior(z));
            log_e = log_add(log_e, lt);
        }
    }

    NewTrackLocal out;
    const double log_total = log_add(log_e, safe_log(sensor.clutter_intensity()));
    out.log_weight = log_total;
    out.detected.assoc_weight_log = log_total;
    if (log_e == kNegInf) {
        out.detected.existence = 0.0;
        out.detected.density = placeholder_density(state_dim);
        return out;
    }
    out.detected.existence = std::exp(log_e - log_total);
    std::vector<double> weights(log_terms.size());
    for (std::size_t b = 0; b < log_terms.size(); ++b) weights[b] = std::exp(log_terms[b] - log_e);
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= sum;
    out.detected.density = moment_match(weights, posteriors);
    return out;
}

PmbmDensity update(const PmbmDensity& d, const SensorModel& sensor,
                   const Measurements& measurements, std::size_t max_hyp) {
    if (max_hyp == 0) throw ContractViolation("update: max_hyp must be at least 1");
    const double pd = sensor.detection_prob;
    if (pd < 0.0 || pd > 1.0) throw ContractViolation("update: detection probability outside [0, 1]");
    for (const auto& z : measurements)
        if (z.size() != sensor.obs.rows()) throw ContractViolation("update: measurement dimension");

    const std::size_t n = d.tracks.size();
    const std::size_t m = measurements.size();
    const std::size_t n_x = static_cast<std::size_t>(sensor.obs.cols());

    PmbmDensity out;
    out.next_track_id = d.next_track_id;
    out.ppp = d.ppp;
    for (auto& t : out.ppp.terms) t.weight *= (1.0 - pd);

    // Prior tracks: local h keeps index h as its missed-detection child; detection
    // children follow.
    std::vector<std::vector<LocalAssociations>> assoc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& prior = d.tracks[i].locals;
        Track tr{d.tracks[i].id, {}};
        assoc[i].resize(prior.size());
        for (std::size_t h = 0; h < prior.size(); ++h) {
            const auto& b = prior[h];
            BernoulliComponent missed = b;
            const double missed_factor = 1.0 - b.existence * pd;
            assoc[i][h].log_missed = std::log(std::max(missed_factor, 1e-300));
            missed.existence = missed_detection_existence(b.existence, pd);
            missed.assoc_weight_log = b.assoc_weight_log + assoc[i][h].log_missed;
            tr.locals.push_back(std::move(missed));
        }
        for (std::size_t h = 0; h < prior.size(); ++h) {
            const auto& b = prior[h];
            auto& a = assoc[i][h];
            a.log_detected.assign(m, kNegInf);
            a.new_index.assign(m, kNone);
            if (b.existence <= 0.0 || pd <= 0.0 || m == 0) continue;
            const Innovation<double> inn(b.density, sensor.obs, sensor.obs_noise);
            for (std::size_t j = 0; j < m; ++j) {
                const double d2 = inn.mahalanobis2(measurements[j]);
                if (d2 >= sensor.gate_threshold) continue;
                const double lw = std::log(b.existence) + std::log(pd) +
                                  inn.log_likelihood(measurements[j]);
                a.log_detected[j] = lw;
                a.new_index[j] = tr.locals.size();
                tr.locals.push_back({1.0, inn.posterior(measurements[j]), b.assoc_weight_log + lw});
            }
        }
        out.tracks.push_back(std::move(tr));
    }

    // One new track per measurement: local 0 = does not exist, local 1 = first detection.
    std::vector<double> log_new(m);
    for (std::size_t j = 0; j < m; ++j) {
        const NewTrackLocal nt = new_track_from_measurement(d.ppp, sensor, measurements[j], n_x);
        log_new[j] = nt.log_weight;
        BernoulliComponent absent{0.0, nt.detected.density, 0.0};
        out.tracks.push_back({out.next_track_id++, {std::move(absent), nt.detected}});
    }

    out.hypotheses.clear();
    for (const auto& parent : d.hypotheses) {
        const auto& chosen = parent.locals_chosen;

        // Measurements that no prior track can claim are forced onto their new track.
        std::vector<std::size_t> contested;
        double base = parent.log_weight;
        for (std::size_t i = 0; i < n; ++i) base += assoc[i][chosen[i]].log_missed;
        for (std::size_t j = 0; j < m; ++j) {
            bool claimable = false;
            for (std::size_t i = 0; i < n && !claimable; ++i)
                claimable = assoc[i][chosen[i]].log_detected[j] != kNegInf;
            if (claimable)
                contested.push_back(j);
            else
                base += log_new[j];
        }

        GlobalHypothesis child;
        child.locals_chosen.assign(n + m, 1);
        for (std::size_t i = 0; i < n; ++i) child.locals_chosen[i] = chosen[i];

        if (contested.empty()) {
            child.log_weight = base;
            if (child.log_weight != kNegInf) out.hypotheses.push_back(std::move(child));
            continue;
        }

        const auto rows = static_cast<Eigen::Index>(contested.size());
        const auto n_old = static_cast<Eigen::Index>(n);
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(rows, n_old + rows, kForbidden);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::size_t j = contested[static_cast<std::size_t>(r)];
            for (std::size_t i = 0; i < n; ++i) {
                const auto& a = assoc[i][chosen[i]];
                if (a.log_detected[j] != kNegInf)
                    cost(r, static_cast<Eigen::Index>(i)) = -(a.log_detected[j] - a.log_missed);
            }
            if (log_new[j] != kNegInf) cost(r, n_old + r) = -log_new[j];
        }

        const double share = std::ceil(static_cast<double>(max_hyp) * parent.weight());
        const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(share));
        for (const auto& assignment : murty_kbest(cost, k)) {
            GlobalHypothesis c = child;
            for (std::size_t j : contested) c.locals_chosen[n + j] = 0;
            for (Eigen::Index r = 0; r < rows; ++r) {
                const std::size_t j = contested[static_cast<std::size_t>(r)];
                const int col = assignment.mapping[static_cast<std::size_t>(r)];
                if (col < n_old) {
                    const auto i = static_cast<std::size_t>(col);
                    c.locals_chosen[i] = assoc[i][chosen[i]].new_index[j];
                } else {
                    c.locals_chosen[n + j] = 1;
                }
            }
            c.log_weight = base - assignment.cost;
            out.hypotheses.push_back(std::move(c));
        }
    }
    if (out.hypotheses.empty())
        throw NumericalError("update: no association hypothesis has non-zero weight");

    merge_duplicate_hypotheses(out.hypotheses);
    normalise_weights(out.hypotheses);
    if (out.hypotheses.size() > max_hyp) {
        std::vector<std::size_t> order(out.hypotheses.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return out.hypotheses[a].log_weight > out.hypotheses[b].log_weight;
        });
        order.resize(max_hyp);
        std::sort(order.begin(), order.end());
        std::vector<GlobalHypothesis> kept;
        for (std::size_t a : order) kept.push_back(std::move(out.hypotheses[a]));
        out.hypotheses = std::move(kept);
        normalise_weights(out.hypotheses);
    }
    return out;
}

PmbmDensity step(const PmbmDensity& d, const FilterStepConfig& cfg,
                 const Measurements& measurements) {
    const PmbmDensity predicted = predict(d, cfg.dynamics, cfg.survival, cfg.birth);
    const PmbmDensity updated =
        update(predicted, cfg.sensor, measurements, cfg.thresholds.max_hypotheses);
    return prune_and_cap(updated, cfg.thresholds);
}

}  // namespace vpmb
