#pragma once

#include "vpmb/filter.hpp"
#include "vpmb/pmbm.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace vpmb {

/// slot -> track index: permutation[l] is the track whose local hypothesis
/// fills Bernoulli slot l of the PMB approximation.
using Permutation = std::vector<std::size_t>;

/// One permutation per global hypothesis.
struct PermutationSet {
    std::vector<Permutation> per_hypothesis;

    [[nodiscard]] static PermutationSet identity(std::size_t n_hypotheses, std::size_t n_tracks);
    friend bool operator==(const PermutationSet&, const PermutationSet&) = default;
};

/// Best PMB for fixed permutations: PPP copied, slot existence the
/// weight-averaged existence of the permuted locals, slot density the moment
/// match of their densities with weights w^a r / r_slot. Slots with zero
/// existence get a zero-mean unit-covariance placeholder. Keeps every slot.
[[nodiscard]] PmbDensity merge_bernoullis_under_permutations(const PmbmDensity& d,
                                                             const PermutationSet& perms);

struct PermutationOptimum {
    PermutationSet perms;
    double cost = 0.0;  // sum_a w^a sum_l D(permuted local || slot l)
};

/// Per hypothesis, the permutation minimising the summed Bernoulli KLDs to the
/// slots of q (one 2-D assignment each). q must have one Bernoulli per track of d.
[[nodiscard]] PermutationOptimum optimize_permutations(const PmbmDensity& d, const PmbDensity& q);

/// sum_a w^a sum_l bernoulli_kld(local of track perms_a[l], slot l of q), evaluated directly.
[[nodiscard]] double permutation_cost(const PmbmDensity& d, const PmbDensity& q,
                                      const PermutationSet& perms);

struct ProjectionReport {
    std::size_t iterations_run = 0;
    std::vector<double> cost_trace;
    bool converged = false;
    PermutationSet permutations;  // permutations of the returned PMB
};

struct VpmbResult {
    PmbDensity pmb;
    ProjectionReport report;
};

/// Variational PMB projection by coordinate descent: starting from identity
/// permutations, alternate optimize_permutations and the merge until two
/// successive costs differ by at most gamma or max_iter iterations ran.
/// Zero-existence slots are dropped from the returned PMB.
[[nodiscard]] VpmbResult vpmb_project(const PmbmDensity& d, double gamma, std::size_t max_iter);

/// Track-oriented PMB: marginalises each track over its local hypotheses.
[[nodiscard]] PmbDensity to_pmb(const PmbmDensity& d);

/// PMB made of the Bernoullis of the most likely global hypothesis.
[[nodiscard]] PmbDensity gnn_pmb(const PmbmDensity& d);

struct BpOptions {
    double tolerance = 1e-4;
    double damping = 0.5;
    std::size_t max_iterations = 1000;
};

struct BpResult {
    PmbDensity pmb;
    std::size_t iterations = 0;
    bool converged = false;
    /// marginals[i][0] is the missed-detection probability of track i,
    /// marginals[i][1 + j] the probability that it generated measurement j.
    std::vector<std::vector<double>> track_marginals;
    /// Probability that measurement j starts a new track (or is clutter).
    std::vector<double> new_track_marginals;
};

/// Track-oriented PMB update with association marginals from loopy belief
/// propagation on the track/measurement graph; no gating. A predicted density
/// with several hypotheses is first reduced with to_pmb.
[[nodiscard]] BpResult bp_pmb_update(const PmbmDensity& predicted, const SensorModel& sensor,
                                     const Measurements& measurements,
                                     const BpOptions& options = {});

/// PMB whose Bernoulli densities are kept as the exact weighted mixtures of
/// the permuted locals, before the Gaussian moment match.
struct MixtureBernoulli {
    double existence = 0.0;
    std::vector<WeightedGaussian> components;  // weights sum to existence
};
struct MixturePmb {
    PppIntensity ppp;
    std::vector<MixtureBernoulli> bernoullis;

    [[nodiscard]] double phd(const Eigen::VectorXd& x) const;
};
[[nodiscard]] MixturePmb merge_exact(const PmbmDensity& d, const PermutationSet& perms);

void write_projection_report(std::ostream& os, const ProjectionReport& report);

}  // namespace vpmb
