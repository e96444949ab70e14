#pragma once

#include "vpmb/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace vpmb {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Single-target Gaussian density N(x; mean, cov).
template <typename Scalar = double>
struct Gaussian {
    Vector<Scalar> mean;
    Matrix<Scalar> cov;

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

/// Linear-Gaussian motion and observation model:
/// x' = F x + w, w ~ N(0, Q);  z = H x + v, v ~ N(0, R).
template <typename Scalar = double>
struct LinearGaussianModel {
    Matrix<Scalar> transition;     // F
    Matrix<Scalar> process_noise;  // Q
    Matrix<Scalar> obs;            // H
    Matrix<Scalar> obs_noise;      // R
};

namespace detail {

inline std::string shape(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

template <typename Scalar>
void require_square(const Matrix<Scalar>& m, Eigen::Index n, const char* what) {
    if (m.rows() != n || m.cols() != n)
        throw ContractViolation(std::string(what) + ": expected " + shape(n, n) + ", got " +
                                shape(m.rows(), m.cols()));
}

template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> cholesky(const Matrix<Scalar>& m, const char* what) {
    Eigen::LLT<Matrix<Scalar>> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(what) + " is not positive definite");
    return llt;
}

template <typename Scalar>
Scalar log_det(const Eigen::LLT<Matrix<Scalar>>& llt) {
    return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

template <typename Scalar>
[[nodiscard]] Matrix<Scalar> symmetrised(const Matrix<Scalar>& p) {
    return (p + p.transpose()) / Scalar(2);
}

/// Throws ContractViolation on inconsistent dimensions and NumericalError when
/// the covariance is not symmetric positive definite.
template <typename Scalar>
void validate(const Gaussian<Scalar>& g) {
    detail::require_square(g.cov, g.dim(), "covariance");
    const Scalar scale = std::max(Scalar(1), g.cov.cwiseAbs().maxCoeff());
    if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale)
        throw NumericalError("covariance is not symmetric");
    detail::cholesky<Scalar>(g.cov, "covariance");
}

template <typename Scalar>
[[nodiscard]] Scalar log_pdf(const Gaussian<Scalar>& g, const Vector<Scalar>& x) {
    if (x.size() != g.dim()) throw ContractViolation("log_pdf: dimension mismatch");
    const auto llt = detail::cholesky<Scalar>(g.cov, "covariance");
    const Vector<Scalar> white = llt.matrixL().solve(x - g.mean);
    const Scalar n = static_cast<Scalar>(g.dim());
    return Scalar(-0.5) * (white.squaredNorm() + detail::log_det(llt) +
                           n * std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
}

template <typename Scalar>
[[nodiscard]] Scalar pdf(const Gaussian<Scalar>& g, const Vector<Scalar>& x) {
    return std::exp(log_pdf(g, x));
}

template <typename Scalar>
[[nodiscard]] Gaussian<Scalar> kalman_predict(const Gaussian<Scalar>& d,
                                              const LinearGaussianModel<Scalar>& m) {
    detail::require_square(m.transition, d.dim(), "transition");
    detail::require_square(m.process_noise, d.dim(), "process noise");
    if (d.cov.rows() != d.dim() || d.cov.cols() != d.dim())
        throw ContractViolation("kalman_predict: mean and covariance disagree");
    Gaussian<Scalar> out;
    out.mean = m.transition * d.mean;
    out.cov = symmetrised<Scalar>(m.transition * d.cov * m.transition.transpose() +
                                  m.process_noise);
    return out;
}

/// Everything about a measurement update that does not depend on z: the
/// predicted measurement, the innovation covariance S and its factor, the gain,
/// and the posterior covariance. Build once per density, reuse for every z.
template <typename Scalar = double>
class Innovation {
public:
    Innovation(const Gaussian<Scalar>& d, const Matrix<Scalar>& h, const Matrix<Scalar>& r)
        : prior_mean_(d.mean) {
        if (h.cols() != d.dim()) throw ContractViolation("observation matrix width != state dim");
        detail::require_square(r, h.rows(), "observation noise");
        predicted_ = h * d.mean;
        const Matrix<Scalar> pht = d.cov * h.transpose();
        const Matrix<Scalar> s = symmetrised<Scalar>(h * pht + r);
        llt_ = Eigen::LLT<Matrix<Scalar>>(s);
        if (llt_.info() != Eigen::Success)
            throw NumericalError("innovation covariance S is singular or indefinite");
        gain_ = llt_.solve(pht.transpose()).transpose();
        const Eigen::Index n = d.dim();
        posterior_cov_ = symmetrised<Scalar>(
            (Matrix<Scalar>::Identity(n, n) - gain_ * h) * d.cov);
        log_norm_ = Scalar(-0.5) * (detail::log_det(llt_) +
                                    static_cast<Scalar>(h.rows()) *
                                        std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
    }

    /// Squared Mahalanobis distance of z from the predicted measurement under S.
    [[nodiscard]] Scalar mahalanobis2(const Vector<Scalar>& z) const {
        check(z);
        return llt_.matrixL().solve(z - predicted_).squaredNorm();
    }

    /// log N(z; H mean, S).
    [[nodiscard]] Scalar log_likelihood(const Vector<Scalar>& z) const {
        return log_norm_ - Scalar(0.5) * mahalanobis2(z);
    }

    [[nodiscard]] Gaussian<Scalar> posterior(const Vector<Scalar>& z) const {
        check(z);
        return {prior_mean_ + gain_ * (z - predicted_), posterior_cov_};
    }

    [[nodiscard]] const Vector<Scalar>& predicted_measurement() const { return predicted_; }

private:
    void check(const Vector<Scalar>& z) const {
        if (z.size() != predicted_.size())
            throw ContractViolation("measurement dimension mismatch");
    }

    Vector<Scalar> prior_mean_;
    Vector<Scalar> predicted_;
    Eigen::LLT<Matrix<Scalar>> llt_;
    Matrix<Scalar> gain_;
    Matrix<Scalar> posterior_cov_;
    Scalar log_norm_{};
};

template <typename Scalar>
struct KalmanUpdate {
    Gaussian<Scalar> posterior;
    Scalar likelihood;       // N(z; H mean, S)
    Scalar log_likelihood;
};

template <typename Scalar>
[[nodiscard]] KalmanUpdate<Scalar> kalman_update(const Gaussian<Scalar>& d,
                                                 const LinearGaussianModel<Scalar>& m,
                                                 const Vector<Scalar>& z) {
    const Innovation<Scalar> inn(d, m.obs, m.obs_noise);
    const Scalar ll = inn.log_likelihood(z);
    return {inn.posterior(z), std::exp(ll), ll};
}

/// KL divergence D(f || q) between two Gaussians, with log-determinants from
/// Cholesky factors.
template <typename Scalar>
[[nodiscard]] Scalar gaussian_kld(const Gaussian<Scalar>& f, const Gaussian<Scalar>& q) {
    if (f.dim() != q.dim()) throw ContractViolation("gaussian_kld: dimension mismatch");
    const auto lq = detail::cholesky<Scalar>(q.cov, "q covariance");
    const auto lf = detail::cholesky<Scalar>(f.cov, "f covariance");
    const Vector<Scalar> diff = q.mean - f.mean;
    const Scalar trace = lq.solve(f.cov).trace();
    const Scalar maha = lq.matrixL().solve(diff).squaredNorm();
    const Scalar n = static_cast<Scalar>(f.dim());
    return Scalar(0.5) * (trace - (detail::log_det(lf) - detail::log_det(lq)) - n + maha);
}

namespace detail {

template <typename Scalar, typename Get>
Gaussian<Scalar> moment_match_impl(std::span<const Scalar> weights, std::size_t count, Get&& get) {
    if (weights.empty() || weights.size() != count)
        throw ContractViolation("moment_match: need equally many weights and components (>0)");
    Scalar total = 0;
    for (Scalar w : weights) {
        if (!(w >= 0)) throw ContractViolation("moment_match: negative weight");
        total += w;
    }
    if (std::abs(total - Scalar(1)) > Scalar(1e-9))
        throw ContractViolation("moment_match: weights do not sum to 1");

    const Eigen::Index n = get(0).dim();
    Gaussian<Scalar> out{Vector<Scalar>::Zero(n), Matrix<Scalar>::Zero(n, n)};
    for (std::size_t i = 0; i < count; ++i) {
        if (get(i).dim() != n) throw ContractViolation("moment_match: dimension mismatch");
        out.mean += weights[i] * get(i).mean;
    }
    Vector<Scalar> d(n);
    for (std::size_t i = 0; i < count; ++i) {
        const Gaussian<Scalar>& c = get(i);
        d = c.mean - out.mean;
        out.cov += weights[i] * c.cov;
        out.cov.noalias() += (weights[i] * d) * d.transpose();
    }
    out.cov = symmetrised<Scalar>(out.cov);
    return out;
}

}  // namespace detail

/// Single Gaussian with the first two moments of a weighted mixture. Weights
/// must be non-negative and sum to one.
template <typename Scalar>
[[nodiscard]] Gaussian<Scalar> moment_match(std::span<const Scalar> weights,
                                            std::span<const Gaussian<Scalar>> components) {
    return detail::moment_match_impl<Scalar>(
        weights, components.size(), [&](std::size_t i) -> const Gaussian<Scalar>& { return components[i]; });
}

/// Same, over components held elsewhere.
template <typename Scalar>
[[nodiscard]] Gaussian<Scalar> moment_match(std::span<const Scalar> weights,
                                            std::span<const Gaussian<Scalar>* const> components) {
    return detail::moment_match_impl<Scalar>(
        weights, components.size(), [&](std::size_t i) -> const Gaussian<Scalar>& { return *components[i]; });
}

template <typename Scalar>
[[nodiscard]] Gaussian<Scalar> moment_match(const std::vector<Scalar>& weights,
                                            const std::vector<Gaussian<Scalar>>& components) {
    return moment_match(std::span<const Scalar>(weights),
                        std::span<const Gaussian<Scalar>>(components));
}

}  // namespace vpmb
