#pragma once

#include "vpmb/gaussian.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace vpmb {

using GaussianDensity = Gaussian<double>;

struct WeightedGaussian {
    double weight = 0.0;
    GaussianDensity density;
};

/// Intensity of the Poisson point process of undetected targets, a weighted
/// Gaussian mixture.
struct PppIntensity {
    std::vector<WeightedGaussian> terms;

    [[nodiscard]] double evaluate(const Eigen::VectorXd& x) const;
    [[nodiscard]] double total_weight() const;
};

/// One local hypothesis of a track.
struct BernoulliComponent {
    double existence = 0.0;
    GaussianDensity density;
    /// Log of the accumulated local-hypothesis weight factors.
    double assoc_weight_log = 0.0;
};

struct Track {
    std::size_t id = 0;
    std::vector<BernoulliComponent> locals;
};

/// One local hypothesis index per track, plus the hypothesis weight in log domain.
struct GlobalHypothesis {
    double log_weight = 0.0;
    std::vector<std::size_t> locals_chosen;

    [[nodiscard]] double weight() const;
};

/// Poisson multi-Bernoulli mixture. A PMB is the special case of one global
/// hypothesis and one local hypothesis per track.
///
/// Invariants: at least one hypothesis; log weights normalised (weights sum to
/// one); every hypothesis picks a valid local of every track; track ids unique.
struct PmbmDensity {
    PppIntensity ppp;
    std::vector<Track> tracks;
    std::vector<GlobalHypothesis> hypotheses{GlobalHypothesis{}};
    std::size_t next_track_id = 0;

    [[nodiscard]] std::size_t state_dim() const;
    [[nodiscard]] bool is_pmb() const;
    /// Expected number of targets: PPP mass plus expected Bernoulli existence.
    [[nodiscard]] double expected_cardinality() const;
    /// Throws ContractViolation describing the first broken invariant.
    void validate() const;
};

using PmbDensity = PmbmDensity;

/// Returned by bernoulli_kld when absolute continuity fails.
inline constexpr double kDivergenceCap = 1e9;

/// D(f || q) between Bernoulli densities with Gaussian single-target densities.
[[nodiscard]] double bernoulli_kld(const BernoulliComponent& f, const BernoulliComponent& q);

/// Binary part of bernoulli_kld plus r_f times the supplied Gaussian KLD.
/// Lets callers reuse a precomputed Gaussian term.
[[nodiscard]] double bernoulli_kld_from_parts(double r_f, double r_q, double gaussian_term);

/// Probability hypothesis density evaluated at x.
[[nodiscard]] double compute_phd(const PmbmDensity& d, const Eigen::VectorXd& x);

struct PruneThresholds {
    double ppp_weight = 1e-5;   // Gamma_p
    double existence = 1e-5;    // Gamma_b
    std::size_t max_hypotheses = 200;  // N_h
};

/// Drops light PPP terms, zeroes low-existence locals, caps the hypothesis
/// count, removes tracks that exist in no hypothesis, merges duplicate
/// hypotheses, and renormalises.
[[nodiscard]] PmbmDensity prune_and_cap(const PmbmDensity& d, const PruneThresholds& t);

/// Means of the Bernoullis in the most likely global hypothesis with existence
/// above the threshold. Ties pick the lowest hypothesis index.
[[nodiscard]] std::vector<Eigen::VectorXd> estimate_targets(const PmbmDensity& d,
                                                            double threshold);

/// Index of the highest-weight hypothesis (lowest index on ties).
[[nodiscard]] std::size_t best_hypothesis(const PmbmDensity& d);

/// Log-sum-exp normalisation of the hypothesis weights.
void normalise_weights(std::vector<GlobalHypothesis>& hypotheses);

/// Sums the weights of hypotheses with identical locals_chosen; keeps first-seen order.
void merge_duplicate_hypotheses(std::vector<GlobalHypothesis>& hypotheses);

/// Removes locals referenced by no hypothesis, collapses each track's
/// nonexistent (r = 0) locals onto one, drops tracks whose referenced locals
/// are all nonexistent, then merges duplicate hypotheses.
void compact(PmbmDensity& d);

/// Self-describing text form: fixed field order, reals with 17 significant digits.
void write_pmbm(std::ostream& os, const PmbmDensity& d);
[[nodiscard]] PmbmDensity read_pmbm(std::istream& is);

}  // namespace vpmb
