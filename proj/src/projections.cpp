#include "vpmb/projections.hpp"

#include "vpmb/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace vpmb {
namespace {

GaussianDensity placeholder(std::size_t n) {
    const auto dim = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
}

void check_perms(const PmbmDensity& d, const PermutationSet& perms) {
    if (perms.per_hypothesis.size() != d.hypotheses.size())
        throw ContractViolation("permutation set does not cover every hypothesis");
    const std::size_t n = d.tracks.size();
    for (const auto& p : perms.per_hypothesis) {
        if (p.size() != n) throw ContractViolation("permutation has wrong length");
        std::vector<char> seen(n, 0);
        for (std::size_t t : p) {
            if (t >= n || seen[t]) throw ContractViolation("permutation is not a bijection");
            seen[t] = 1;
        }
    }
}

// Existence-weighted moment match; weights need not be normalised.
BernoulliComponent merge_weighted(const std::vector<double>& mass,
                                  const std::vector<const GaussianDensity*>& densities,
                                  std::size_t n_x) {
    const double r = std::accumulate(mass.begin(), mass.end(), 0.0);
    BernoulliComponent out;
    out.existence = std::clamp(r, 0.0, 1.0);
    if (r <= 0.0) {
        out.existence = 0.0;
        out.density = placeholder(n_x);
        return out;
    }
    std::vector<double> w(mass.size());
    for (std::size_t k = 0; k < mass.size(); ++k) w[k] = mass[k] / r;
    out.density = moment_match(std::span<const double>(w),
                               std::span<const GaussianDensity* const>(densities));
    return out;
}

// Slot of q with its covariance factor, for repeated KLD evaluation.
struct SlotFactor {
    double existence;
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision;
    double log_det;
};

double gaussian_kld_to(const GaussianDensity& f, double log_det_f, const SlotFactor& q) {
    const Eigen::Index n = f.dim();
    double trace = 0.0;
    double maha = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
        const double dc = q.mean(c) - f.mean(c);
        for (Eigen::Index r = 0; r < n; ++r) {
            trace += q.precision(r, c) * f.cov(r, c);
            maha += (q.mean(r) - f.mean(r)) * q.precision(r, c) * dc;
        }
    }
    return 0.5 * (trace - (log_det_f - q.log_det) - static_cast<double>(n) + maha);
}

bool needs_gaussian_term(double r_f, double r_q) {
    if (r_f <= 0.0) return false;
    if (r_q <= 0.0) return false;
    return !(r_q >= 1.0 && r_f < 1.0);
}

}  // namespace

PermutationSet PermutationSet::identity(std::size_t n_hypotheses, std::size_t n_tracks) {
    Permutation id(n_tracks);
    std::iota(id.begin(), id.end(), std::size_t{0});
    return {std::vector<Permutation>(n_hypotheses, id)};
}

PmbDensity merge_bernoullis_under_permutations(const PmbmDensity& d, const PermutationSet& perms) {
    check_perms(d, perms);
    const std::size_t n = d.tracks.size();
    const std::size_t n_x = d.state_dim();
    PmbDensity q;
    q.ppp = d.ppp;
    q.next_track_id = d.next_track_id;
    q.hypotheses = {GlobalHypothesis{0.0, std::vector<std::size_t>(n, 0)}};
    for (std::size_t l = 0; l < n; ++l) {
        // Hypotheses placing the same local in this slot contribute one component.
        std::vector<double> mass;
        std::vector<const GaussianDensity*> densities;
        for (std::size_t a = 0; a < d.hypotheses.size(); ++a) {
            const auto& h = d.hypotheses[a];
            const std::size_t t = perms.per_hypothesis[a][l];
            const auto& b = d.tracks[t].locals[h.locals_chosen[t]];
            if (b.existence <= 0.0) continue;
            const auto it = std::find(densities.begin(), densities.end(), &b.density);
            if (it == densities.end()) {
                mass.push_back(h.weight() * b.existence);
                densities.push_back(&b.density);
            } else {
                mass[static_cast<std::size_t>(it - densities.begin())] += h.weight() * b.existence;
            }
        }
        q.tracks.push_back({d.tracks[l].id, {merge_weighted(mass, densities, n_x)}});
    }
    return q;
}

MixturePmb merge_exact(const PmbmDensity& d, const PermutationSet& perms) {
    check_perms(d, perms);
    MixturePmb out;
    out.ppp = d.ppp;
    for (std::size_t l = 0; l < d.tracks.size(); ++l) {
        MixtureBernoulli slot;
        for (std::size_t a = 0; a < d.hypotheses.size(); ++a) {
            const auto& h = d.hypotheses[a];
            const std::size_t t = perms.per_hypothesis[a][l];
            const auto& b = d.tracks[t].locals[h.locals_chosen[t]];
            const double mass = h.weight() * b.existence;
            slot.existence += mass;
            if (mass > 0.0) slot.components.push_back({mass, b.density});
        }
        out.bernoullis.push_back(std::move(slot));
    }
    return out;
}

double MixturePmb::phd(const Eigen::VectorXd& x) const {
    double total = ppp.evaluate(x);
    for (const auto& b : bernoullis)
        for (const auto& c : b.components) total += c.weight * pdf(c.density, x);
    return total;
}

PermutationOptimum optimize_permutations(const PmbmDensity& d, const PmbDensity& q) {
    const std::size_t n = d.tracks.size();
    if (q.tracks.size() != n || q.hypotheses.size() != 1)
        throw ContractViolation("optimize_permutations: q must be a PMB with one slot per track");

    std::vector<SlotFactor> slots;
    slots.reserve(n);
    for (std::size_t l = 0; l < n; ++l) {
        const auto& b = q.tracks[l].locals[q.hypotheses[0].locals_chosen[l]];
        const auto llt = detail::cholesky<double>(b.density.cov, "slot covariance");
        const auto dim = b.density.dim();
        slots.push_back({b.existence, b.density.mean,
                         llt.solve(Eigen::MatrixXd::Identity(dim, dim)), detail::log_det(llt)});
    }

    // D(i, a^i, l) for every local hypothesis of every track against every slot.
    std::vector<std::vector<Eigen::VectorXd>> divergence(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& locals = d.tracks[i].locals;
        divergence[i].resize(locals.size());
        for (std::size_t h = 0; h < locals.size(); ++h) {
            const auto& f = locals[h];
            double log_det_f = 0.0;
            if (f.existence > 0.0)
                log_det_f = detail::log_det(detail::cholesky<double>(f.density.cov, "local covariance"));
            Eigen::VectorXd row(static_cast<Eigen::Index>(n));
            for (std::size_t l = 0; l < n; ++l) {
                const double g = needs_gaussian_term(f.existence, slots[l].existence)
                                     ? gaussian_kld_to(f.density, log_det_f, slots[l])
                                     : 0.0;
                row(static_cast<Eigen::Index>(l)) =
                    bernoulli_kld_from_parts(f.existence, slots[l].existence, g);
            }
            divergence[i][h] = std::move(row);
        }
    }

    // Rows of tracks whose local is the same in every hypothesis are shared by
    // all the assignment problems; they are solved once and branched from.
    std::vector<std::size_t> shared, varying;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = d.hypotheses.front().locals_chosen[i];
        const bool same = std::all_of(d.hypotheses.begin(), d.hypotheses.end(),
                                      [&](const GlobalHypothesis& h) { return h.locals_chosen[i] == first; });
        (same ? shared : varying).push_back(i);
    }
    const auto dim = static_cast<Eigen::Index>(n);
    IncrementalAssignment base(dim);
    base.reserve(dim);
    for (std::size_t i : shared)
        if (!base.add_row(divergence[i][d.hypotheses.front().locals_chosen[i]].transpose()))
            throw InfeasibleAssignment("optimize_permutations: infeasible assignment");

    PermutationOptimum out;
    out.perms.per_hypothesis.reserve(d.hypotheses.size());
    for (const auto& h : d.hypotheses) {
        IncrementalAssignment state = base;
        for (std::size_t i : varying)
            if (!state.add_row(divergence[i][h.locals_chosen[i]].transpose()))
                throw InfeasibleAssignment("optimize_permutations: infeasible assignment");
        const Assignment best = state.result();
        if (best.cost >= kDivergenceCap)
            throw InfeasibleAssignment(
                "optimize_permutations: no permutation keeps every Bernoulli absolutely continuous");
        Permutation perm(n);
        for (std::size_t k = 0; k < shared.size(); ++k)
            perm[static_cast<std::size_t>(best.mapping[k])] = shared[k];
        for (std::size_t k = 0; k < varying.size(); ++k)
            perm[static_cast<std::size_t>(best.mapping[shared.size() + k])] = varying[k];
        out.perms.per_hypothesis.push_back(std::move(perm));
        out.cost += h.weight() * best.cost;
    }
    return out;
}

double permutation_cost(const PmbmDensity& d, const PmbDensity& q, const PermutationSet& perms) {
    check_perms(d, perms);
    double total = 0.0;
    for (std::size_t a = 0; a < d.hypotheses.size(); ++a) {
        const auto& h = d.hypotheses[a];
        double c = 0.0;
        for (std::size_t l = 0; l < d.tracks.size(); ++l) {
            const std::size_t t = perms.per_hypothesis[a][l];
            const auto& slot = q.tracks[l].locals[q.hypotheses[0].locals_chosen[l]];
            c += bernoulli_kld(d.tracks[t].locals[h.locals_chosen[t]], slot);
        }
        total += h.weight() * c;
    }
    return total;
}

VpmbResult vpmb_project(const PmbmDensity& d, double gamma, std::size_t max_iter) {
    if (gamma < 0.0) throw ContractViolation("vpmb_project: gamma must be non-negative");
    if (max_iter == 0) throw ContractViolation("vpmb_project: max_iter must be at least 1");

    VpmbResult out;
    auto& report = out.report;
    report.permutations = PermutationSet::identity(d.hypotheses.size(), d.tracks.size());
    PmbDensity q = merge_bernoullis_under_permutations(d, report.permutations);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < max_iter; ++j) {
        PermutationOptimum opt = optimize_permutations(d, q);
        report.cost_trace.push_back(opt.cost);
        report.iterations_run = j + 1;
        q = merge_bernoullis_under_permutations(d, opt.perms);
        report.permutations = std::move(opt.perms);
        if (std::abs(opt.cost - previous) <= gamma) {
            report.converged = true;
            break;
        }
        previous = opt.cost;
    }

    // Drop empty slots; the remaining tracks keep their ids.
    PmbDensity pmb;
    pmb.ppp = std::move(q.ppp);
    pmb.next_track_id = q.next_track_id;
    pmb.hypotheses = {GlobalHypothesis{}};
    for (auto& tr : q.tracks) {
        if (tr.locals[0].existence <= 0.0) continue;
        pmb.tracks.push_back(std::move(tr));
        pmb.hypotheses[0].locals_chosen.push_back(0);
    }
    out.pmb = std::move(pmb);
    return out;
}

PmbDensity to_pmb(const PmbmDensity& d) {
    const std::size_t n_x = d.state_dim();
    PmbDensity q;
    q.ppp = d.ppp;
    q.next_track_id = d.next_track_id;
    q.hypotheses = {GlobalHypothesis{0.0, std::vector<std::size_t>(d.tracks.size(), 0)}};
    for (std::size_t i = 0; i < d.tracks.size(); ++i) {
        const auto& locals = d.tracks[i].locals;
        std::vector<double> local_weight(locals.size(), 0.0);
        for (const auto& h : d.hypotheses) local_weight[h.locals_chosen[i]] += h.weight();
        std::vector<double> mass;
        std::vector<const GaussianDensity*> densities;
        for (std::size_t h = 0; h < locals.size(); ++h) {
            const double m = local_weight[h] * locals[h].existence;
            if (m <= 0.0) continue;
            mass.push_back(m);
            densities.push_back(&locals[h].density);
        }
        q.tracks.push_back({d.tracks[i].id, {merge_weighted(mass, densities, n_x)}});
    }
    return q;
}

PmbDensity gnn_pmb(const PmbmDensity& d) {
    if (d.hypotheses.empty()) throw ContractViolation("gnn_pmb: no hypotheses");
    const auto& h = d.hypotheses[best_hypothesis(d)];
    PmbDensity q;
    q.ppp = d.ppp;
    q.next_track_id = d.next_track_id;
    q.hypotheses = {GlobalHypothesis{0.0, std::vector<std::size_t>(d.tracks.size(), 0)}};
    for (std::size_t i = 0; i < d.tracks.size(); ++i)
        q.tracks.push_back({d.tracks[i].id, {d.tracks[i].locals[h.locals_chosen[i]]}});
    return q;
}

BpResult bp_pmb_update(const PmbmDensity& predicted, const SensorModel& sensor,
                       const Measurements& measurements, const BpOptions& options) {
    const PmbDensity prior = predicted.is_pmb() ? predicted : to_pmb(predicted);
    const double pd = sensor.detection_prob;
    const std::size_t n = prior.tracks.size();
    const std::size_t m = measurements.size();
    const std::size_t n_x = static_cast<std::size_t>(sensor.obs.cols());
    for (const auto& z : measurements)
        if (z.size() != sensor.obs.rows()) throw ContractViolation("bp_pmb_update: measurement dimension");

    SensorModel ungated = sensor;
    ungated.gate_threshold = std::numeric_limits<double>::infinity();

    // New-track weights c_j = e(z_j) + lambda^C; detection ratios are taken
    // relative to c_j and to the missed-detection weight of the track.
    std::vector<NewTrackLocal> fresh;
    fresh.reserve(m);
    for (const auto& z : measurements)
        fresh.push_back(new_track_from_measurement(prior.ppp, ungated, z, n_x));

    Eigen::MatrixXd ratio = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(m));
    std::vector<std::vector<GaussianDensity>> posterior(n);
    std::vector<BernoulliComponent> bern(n);
    for (std::size_t i = 0; i < n; ++i) {
        bern[i] = prior.tracks[i].locals[prior.hypotheses[0].locals_chosen[i]];
        const auto& b = bern[i];
        posterior[i].assign(m, b.density);
        if (b.existence <= 0.0 || pd <= 0.0 || m == 0) continue;
        const double log_missed = std::log(std::max(1.0 - b.existence * pd, 1e-300));
        const Innovation<double> inn(b.density, sensor.obs, sensor.obs_noise);
        for (std::size_t j = 0; j < m; ++j) {
            const double lw = std::log(b.existence) + std::log(pd) +
                              inn.log_likelihood(measurements[j]);
            ratio(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                std::exp(lw - log_missed - fresh[j].log_weight);
            posterior[i][j] = inn.posterior(measurements[j]);
        }
    }

    // Flooding sum-product with damping on the measurement-to-track messages.
    const auto N = static_cast<Eigen::Index>(n);
    const auto M = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd to_track = Eigen::MatrixXd::Ones(M, N);  // nu(j -> i)
    Eigen::MatrixXd to_meas = Eigen::MatrixXd::Zero(N, M);   // mu(i -> j)
    BpResult out;
    for (std::size_t it = 0; it < options.max_iterations && n > 0 && m > 0; ++it) {
        // Sums exclude the recipient's own term directly; one dominant ratio
        // would otherwise cancel catastrophically.
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < M; ++j) {
                double others = 1.0;
                for (Eigen::Index k = 0; k < M; ++k)
                    if (k != j) others += ratio(i, k) * to_track(k, i);
                to_meas(i, j) = ratio(i, j) / others;
            }
        double change = 0.0;
        for (Eigen::Index j = 0; j < M; ++j)
            for (Eigen::Index i = 0; i < N; ++i) {
                double others = 1.0;
                for (Eigen::Index k = 0; k < N; ++k)
                    if (k != i) others += to_meas(k, j);
                const double damped =
                    options.damping * to_track(j, i) + (1.0 - options.damping) / others;
                change = std::max(change, std::abs(damped - to_track(j, i)));
                to_track(j, i) = damped;
            }
        out.iterations = it + 1;
        if (change <= options.tolerance) {
            out.converged = true;
            break;
        }
    }
    if (n == 0 || m == 0) out.converged = true;

    PmbDensity q;
    q.next_track_id = prior.next_track_id;
    q.ppp = prior.ppp;
    for (auto& t : q.ppp.terms) t.weight *= (1.0 - pd);
    q.hypotheses = {GlobalHypothesis{}};

    out.track_marginals.assign(n, std::vector<double>(m + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = out.track_marginals[i];
        p[0] = 1.0;
        for (std::size_t j = 0; j < m; ++j)
            p[j + 1] = ratio(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                       to_track(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        for (double& v : p) v /= sum;

        std::vector<double> mass{p[0] * missed_detection_existence(bern[i].existence, pd)};
        std::vector<const GaussianDensity*> densities{&bern[i].density};
        for (std::size_t j = 0; j < m; ++j) {
            if (p[j + 1] <= 0.0) continue;
            mass.push_back(p[j + 1]);
            densities.push_back(&posterior[i][j]);
        }
        q.tracks.push_back({prior.tracks[i].id, {merge_weighted(mass, densities, n_x)}});
        q.hypotheses[0].locals_chosen.push_back(0);
    }

    out.new_track_marginals.assign(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        double total = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            total += to_meas(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out.new_track_marginals[j] = 1.0 / total;
        BernoulliComponent b = fresh[j].detected;
        b.existence *= out.new_track_marginals[j];
        q.tracks.push_back({q.next_track_id++, {std::move(b)}});
        q.hypotheses[0].locals_chosen.push_back(0);
    }
    out.pmb = std::move(q);
    return out;
}

void write_projection_report(std::ostream& os, const ProjectionReport& report) {
    const auto prec = os.precision();
    os << std::setprecision(17);
    os << "projection_report iterations " << report.iterations_run << " converged "
       << (report.converged ? 1 : 0) << " cost_trace [";
    for (double c : report.cost_trace) os << ' ' << c;
    os << " ]\n";
    os.precision(prec);
}

}  // namespace vpmb
