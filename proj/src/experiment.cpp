#include "vpmb/experiment.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace vpmb {

std::string_view to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::pmbm: return "pmbm";
        case FilterKind::m_pmb: return "m-pmb";
        case FilterKind::bp_pmb: return "bp-pmb";
        case FilterKind::gnn_pmb: return "gnn-pmb";
        case FilterKind::v_pmb: return "v-pmb";
    }
    return "?";
}

FilterKind parse_filter_kind(std::string_view name) {
    for (FilterKind k : kAllFilters)
        if (to_string(k) == name) return k;
    throw ContractViolation("unknown filter '" + std::string(name) +
                            "' (expected pmbm, m-pmb, bp-pmb, gnn-pmb or v-pmb)");
}

LinearGaussianModel<double> constant_velocity_model(double sampling_time, double q, double r) {
    const double t = sampling_time;
    Eigen::Matrix2d f1, q1;
    f1 << 1, t, 0, 1;
    q1 << t * t * t / 3, t * t / 2, t * t / 2, t;
    const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();

    LinearGaussianModel<double> m;
    m.transition = Eigen::MatrixXd::Zero(4, 4);
    m.process_noise = Eigen::MatrixXd::Zero(4, 4);
    for (int b = 0; b < 2; ++b) {
        m.transition.block<2, 2>(2 * b, 2 * b) = i2(b, b) * f1;
        m.process_noise.block<2, 2>(2 * b, 2 * b) = q * q1;
    }
    m.obs = Eigen::MatrixXd::Zero(2, 4);
    m.obs(0, 0) = 1;
    m.obs(1, 2) = 1;
    m.obs_noise = r * Eigen::MatrixXd::Identity(2, 2);
    return m;
}

// ---- scenario ----

std::vector<Eigen::VectorXd> ScenarioTruth::states_at(std::size_t k) const {
    std::vector<Eigen::VectorXd> out;
    for (const auto& t : targets)
        if (t.alive_at(k)) out.push_back(t.state_at(k));
    return out;
}

namespace {

Eigen::VectorXd sample_normal(std::mt19937_64& rng, const Eigen::LLT<Eigen::MatrixXd>& chol,
                              Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = normal(rng);
    return chol.matrixL() * e;
}

bool inside(const Region& region, const std::vector<Eigen::VectorXd>& states) {
    return std::all_of(states.begin(), states.end(), [&](const Eigen::VectorXd& x) {
        return region.contains(x(0), x(2));
    });
}

}  // namespace

ScenarioTruth generate_scenario(std::uint64_t seed, const ScenarioOptions& o) {
    if (o.midpoint_step < 1 || o.midpoint_step > o.horizon)
        throw ContractViolation("generate_scenario: midpoint outside the horizon");
    const auto& dyn = o.dynamics;
    const Eigen::LLT<Eigen::MatrixXd> noise(dyn.process_noise);
    if (noise.info() != Eigen::Success)
        throw NumericalError("generate_scenario: process noise is not positive definite");
    const Eigen::MatrixXd f_inv = dyn.transition.inverse();
    const double cx = 0.5 * (o.region.x_min + o.region.x_max);
    const double cy = 0.5 * (o.region.y_min + o.region.y_max);

    ScenarioTruth truth;
    truth.horizon = o.horizon;
    constexpr int kMaxRetries = 1000;
    for (std::size_t t = 0; t < o.n_targets; ++t) {
        ScenarioTarget target;
        target.birth_step = 1;
        target.death_step = t == o.dying_target ? o.midpoint_step : o.horizon;
        bool ok = false;
        for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
            std::seed_seq seq{seed, static_cast<std::uint64_t>(t),
                              static_cast<std::uint64_t>(attempt)};
            std::mt19937_64 rng(seq);
            std::uniform_real_distribution<double> pos(-o.midpoint_box / 2, o.midpoint_box / 2);
            std::uniform_real_distribution<double> vel(-o.max_midpoint_speed, o.max_midpoint_speed);
            Eigen::VectorXd mid(4);
            mid << cx + pos(rng), vel(rng), cy + pos(rng), vel(rng);

            const std::size_t len = target.death_step - target.birth_step + 1;
            std::vector<Eigen::VectorXd> states(len);
            const std::size_t mid_index = o.midpoint_step - target.birth_step;
            states[mid_index] = mid;
            for (std::size_t k = mid_index; k + 1 < len; ++k)
                states[k + 1] = dyn.transition * states[k] + sample_normal(rng, noise, 4);
            for (std::size_t k = mid_index; k > 0; --k)
                states[k - 1] = f_inv * (states[k] - sample_normal(rng, noise, 4));
            if (inside(o.region, states)) {
                target.states = std::move(states);
                ok = true;
            }
        }
        if (!ok) throw NumericalError("generate_scenario: could not keep a trajectory in the region");
        truth.targets.push_back(std::move(target));
    }
    return truth;
}

std::vector<Measurements> simulate_measurements(const ScenarioTruth& truth,
                                                const SensorModel& sensor, const Region& region,
                                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::LLT<Eigen::MatrixXd> noise(sensor.obs_noise);
    if (noise.info() != Eigen::Success)
        throw NumericalError("simulate_measurements: R is not positive definite");
    std::bernoulli_distribution detect(std::clamp(sensor.detection_prob, 0.0, 1.0));
    std::poisson_distribution<int> clutter_count(sensor.clutter_rate);
    std::uniform_real_distribution<double> ux(region.x_min, region.x_max);
    std::uniform_real_distribution<double> uy(region.y_min, region.y_max);

    std::vector<Measurements> out(truth.horizon);
    for (std::size_t k = 1; k <= truth.horizon; ++k) {
        auto& z = out[k - 1];
        for (const auto& x : truth.states_at(k))
            if (detect(rng)) z.push_back(sensor.obs * x + sample_normal(rng, noise, sensor.obs.rows()));
        const int n_clutter = sensor.clutter_rate > 0.0 ? clutter_count(rng) : 0;
        for (int c = 0; c < n_clutter; ++c) {
            const double x = ux(rng);
            z.push_back(Eigen::Vector2d(x, uy(rng)));
        }
    }
    return out;
}

void write_scenario(std::ostream& os, const ScenarioTruth& truth) {
    const auto prec = os.precision();
    os << std::setprecision(17);
    os << "target,step,p_x,v_x,p_y,v_y\n";
    for (std::size_t t = 0; t < truth.targets.size(); ++t) {
        const auto& target = truth.targets[t];
        for (std::size_t k = target.birth_step; k <= target.death_step; ++k) {
            const auto& x = target.state_at(k);
            os << t << ',' << k << ',' << x(0) << ',' << x(1) << ',' << x(2) << ',' << x(3) << '\n';
        }
    }
    os.precision(prec);
}

// ---- filters ----

void validate(const ExperimentConfig& cfg) {
    if (cfg.n_runs == 0) throw ContractViolation("config: runs must be at least 1");
    if (cfg.max_hyp == 0) throw ContractViolation("config: max-hyp must be at least 1");
    if (cfg.p_detect < 0.0 || cfg.p_detect > 1.0) throw ContractViolation("config: pd outside [0, 1]");
    if (cfg.clutter_rate < 0.0 || cfg.gamma_ppp < 0.0 || cfg.gamma_bern < 0.0 || cfg.gate <= 0.0 ||
        cfg.vpmb_gamma < 0.0 || cfg.estimator_threshold <= 0.0 || cfg.estimator_threshold >= 1.0)
        throw ContractViolation("config: thresholds out of range");
    if (cfg.vpmb_max_iter == 0) throw ContractViolation("config: vpmb-max-iter must be at least 1");
}

Tracker::Tracker(FilterKind kind, const ExperimentConfig& cfg)
    : kind_(kind), cfg_(cfg), model_(constant_velocity_model()) {
    const Region region;
    sensor_.detection_prob = cfg.p_detect;
    sensor_.clutter_rate = cfg.clutter_rate;
    sensor_.clutter_region_area = region.area();
    sensor_.obs = model_.obs;
    sensor_.obs_noise = model_.obs_noise;
    sensor_.gate_threshold = cfg.gate;
    birth_density_.mean = Eigen::Vector4d(100.0, 0.0, 100.0, 0.0);
    birth_density_.cov = Eigen::Vector4d(150.0 * 150.0, 1.0, 150.0 * 150.0, 1.0).asDiagonal();
}

void Tracker::step(std::size_t k, const Measurements& measurements) {
    const BirthModel birth{
        {{k == 1 ? cfg_.birth_weight_first : cfg_.birth_weight, birth_density_}}};
    const PruneThresholds prune{cfg_.gamma_ppp, cfg_.gamma_bern, cfg_.max_hyp};
    const PmbmDensity predicted = predict(density_, model_, cfg_.survival, birth);

    switch (kind_) {
        case FilterKind::pmbm:
            density_ = prune_and_cap(update(predicted, sensor_, measurements, cfg_.max_hyp), prune);
            break;
        case FilterKind::m_pmb: {
            const auto posterior =
                prune_and_cap(update(predicted, sensor_, measurements, cfg_.max_hyp), prune);
            density_ = prune_and_cap(to_pmb(posterior), prune);
            break;
        }
        case FilterKind::v_pmb: {
            const auto posterior =
                prune_and_cap(update(predicted, sensor_, measurements, cfg_.max_hyp), prune);
            VpmbResult projected = vpmb_project(posterior, cfg_.vpmb_gamma, cfg_.vpmb_max_iter);
            density_ = prune_and_cap(projected.pmb, prune);
            last_projection_ = std::move(projected.report);
            break;
        }
        case FilterKind::gnn_pmb:
            density_ = prune_and_cap(gnn_pmb(update(predicted, sensor_, measurements, 1)), prune);
            break;
        case FilterKind::bp_pmb:
            density_ = prune_and_cap(bp_pmb_update(predicted, sensor_, measurements).pmb, prune);
            break;
    }
}

std::vector<Eigen::VectorXd> Tracker::estimates() const {
    return estimate_targets(density_, cfg_.estimator_threshold);
}

// ---- Monte Carlo ----

namespace {

std::size_t worker_count(const ExperimentConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("VPMB_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct RunOutput {
    std::vector<GospaResult> per_step;
    double seconds = 0.0;
    std::vector<ProjectionReport> projections;
};

RunOutput run_once(const ExperimentConfig& cfg, const ScenarioTruth& truth, std::size_t run) {
    SensorModel sensor;
    const LinearGaussianModel<double> m = constant_velocity_model();
    const Region region;
    sensor.detection_prob = cfg.p_detect;
    sensor.clutter_rate = cfg.clutter_rate;
    sensor.clutter_region_area = region.area();
    sensor.obs = m.obs;
    sensor.obs_noise = m.obs_noise;
    const auto scans = simulate_measurements(truth, sensor, region, cfg.rng_seed + run);

    RunOutput out;
    Tracker tracker(cfg.filter, cfg);
    double seconds = 0.0;
    for (std::size_t k = 1; k <= truth.horizon; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            tracker.step(k, scans[k - 1]);
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << to_string(cfg.filter) << " failed in run " << run << " at step " << k << ": "
               << e.what();
            throw std::runtime_error(os.str());
        }
        const auto est = tracker.estimates();
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::vector<Eigen::VectorXd> truth_pos, est_pos;
        for (const auto& x : truth.states_at(k)) truth_pos.push_back(position_of(x));
        for (const auto& x : est) est_pos.push_back(position_of(x));
        out.per_step.push_back(gospa(truth_pos, est_pos, cfg.gospa_p, cfg.gospa_c));
        if (run == 0 && tracker.last_projection()) out.projections.push_back(*tracker.last_projection());
    }
    out.seconds = seconds;
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const ScenarioTruth truth = generate_scenario(cfg.truth_seed);

    std::vector<RunOutput> runs(cfg.n_runs);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t r = next++; r < cfg.n_runs; r = next++) {
            try {
                runs[r] = run_once(cfg, truth, r);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = cfg.n_runs;
            }
        }
    };
    const std::size_t n_workers = std::min(worker_count(cfg), cfg.n_runs);
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentResult result;
    result.config = cfg;
    result.per_step.assign(truth.horizon, std::vector<GospaResult>(cfg.n_runs));
    double all_sq = 0.0;
    double seconds = 0.0;
    const double n_runs = static_cast<double>(cfg.n_runs);
    for (std::size_t k = 0; k < truth.horizon; ++k) {
        StepRow row;
        row.step = k + 1;
        double sq = 0.0, loc = 0.0, missed = 0.0, fals = 0.0;
        for (std::size_t r = 0; r < cfg.n_runs; ++r) {
            const GospaResult& g = runs[r].per_step[k];
            result.per_step[k][r] = g;
            sq += g.total * g.total;
            loc += g.localisation;
            missed += g.missed_cost;
            fals += g.false_cost;
        }
        all_sq += sq;
        row.rms_total = std::sqrt(sq / n_runs);
        row.rms_loc = std::sqrt(loc / n_runs);
        row.rms_missed = std::sqrt(missed / n_runs);
        row.rms_false = std::sqrt(fals / n_runs);
        result.rows.push_back(row);
    }
    for (const auto& r : runs) seconds += r.seconds;
    result.summary = std::sqrt(all_sq / (n_runs * static_cast<double>(truth.horizon)));
    result.mean_seconds_per_run = seconds / n_runs;
    result.projections = std::move(runs[0].projections);
    return result;
}

void write_step_csv(std::ostream& os, const std::vector<ExperimentResult>& results) {
    const auto prec = os.precision();
    os << std::setprecision(6);
    os << "step,filter,rms_total,rms_loc,rms_missed,rms_false\n";
    for (const auto& res : results)
        for (const auto& row : res.rows)
            os << row.step << ',' << to_string(res.config.filter) << ',' << row.rms_total << ','
               << row.rms_loc << ',' << row.rms_missed << ',' << row.rms_false << '\n';
    os.precision(prec);
}

void write_summary_csv(std::ostream& os, const std::vector<ExperimentResult>& results) {
    std::vector<double> pds;
    std::map<std::pair<double, FilterKind>, double> cell;
    for (const auto& r : results) {
        if (std::find(pds.begin(), pds.end(), r.config.p_detect) == pds.end())
            pds.push_back(r.config.p_detect);
        cell[{r.config.p_detect, r.config.filter}] = r.summary;
    }
    const auto prec = os.precision();
    os << std::setprecision(6);
    os << "pd";
    for (FilterKind k : kAllFilters) os << ',' << to_string(k);
    os << '\n';
    for (double pd : pds) {
        os << pd;
        for (FilterKind k : kAllFilters) {
            os << ',';
            if (auto it = cell.find({pd, k}); it != cell.end()) os << it->second;
        }
        os << '\n';
    }
    os.precision(prec);
}

}  // namespace vpmb
