// Zero-mean Gaussian-process regression with the squared-exponential kernel.
//
// A PosteriorGp is built once per (dataset, hyperparameters) pair and is
// immutable afterwards, so it can be shared between threads. K + sigma^2 I is
// factored as is when possible; otherwise a diagonal jitter eta * s^2 starting
// at 1e-10 escalates by x10 up to 1e-4.
#pragma once

#include <memory>
#include <span>
#include <sstream>
#include <vector>

#include "core.hpp"

namespace bgo {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

namespace detail {

inline void check_kernel_dim(Index a, Index b, const Hyperparameters& psi) {
    if (a != psi.dim() || b != psi.dim()) {
        std::ostringstream os;
        os << "se_cov: dimension mismatch (x: " << a << ", x2: " << b << ", lengthscales: " << psi.dim() << ")";
        throw std::invalid_argument(os.str());
    }
}

/// Lower Cholesky factor of `a + eta * scale * I`. With `exact_first` the
/// first attempt uses eta = 0; after that eta runs 1e-10, 1e-9, ..., 1e-4.
/// Returns the factor and the absolute diagonal jitter that was added.
inline std::pair<Eigen::LLT<Matrix>, double> jittered_llt(const Matrix& a, double scale, const char* what,
                                                          bool exact_first = true) {
    if (exact_first) {
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return {std::move(llt), 0.0};
    }
    double eta = kJitterStart;
    for (;;) {
        Matrix work = a;
        work.diagonal().array() += eta * scale;
        Eigen::LLT<Matrix> llt(work);
        if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return {std::move(llt), eta * scale};
        if (eta >= kJitterMax * (1 - 1e-12)) {
            std::ostringstream os;
            os << what << ": Cholesky factorization failed at relative jitter " << eta;
            throw NumericalError(os.str(), eta);
        }
        eta *= 10;
    }
}

}  // namespace detail

/// k(x, x2) = s^2 exp(-1/2 sum_i (x_i - x2_i)^2 / l_i^2)
inline double se_cov(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2, const Hyperparameters& psi) {
    detail::check_kernel_dim(x.size(), x2.size(), psi);
    const double r2 = ((x - x2).array() / psi.lengthscales.array()).square().sum();
    return psi.signal * psi.signal * std::exp(-0.5 * r2);
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
inline Matrix cross_cov(const Matrix& a, const Matrix& b, const Hyperparameters& psi) {
    detail::check_kernel_dim(a.cols(), b.cols(), psi);
    const Eigen::RowVectorXd inv_ell = psi.lengthscales.cwiseInverse().transpose();
    const Matrix as = a.array().rowwise() * inv_ell.array();
    const Matrix bs = b.array().rowwise() * inv_ell.array();
    const double s2 = psi.signal * psi.signal;
    Matrix out(a.rows(), b.rows());
    for (Index j = 0; j < b.rows(); ++j)
        out.col(j) = s2 * (-0.5 * (as.rowwise() - bs.row(j)).rowwise().squaredNorm().array()).exp();
    return out;
}

/// K_n(psi) over the rows of `points`. Symmetric with diagonal s^2.
inline Matrix cov_matrix(const Matrix& points, const Hyperparameters& psi) {
    Matrix k = cross_cov(points, points, psi);
    // enforce exact symmetry
    Matrix sym = 0.5 * (k + k.transpose());
    sym.diagonal().setConstant(psi.signal * psi.signal);
    return sym;
}

/// Fitted GP posterior for fixed hyperparameters.
class PosteriorGp {
public:
    const Dataset& data() const noexcept { return *data_; }
    std::shared_ptr<const Dataset> data_ptr() const noexcept { return data_; }
    const Hyperparameters& theta() const noexcept { return theta_; }

    Index size() const noexcept { return data_->size(); }
    Index dim() const noexcept { return data_->dim(); }

    /// Lower-triangular L with L L^T = K_n + (sigma^2 + jitter) I.
    Matrix chol() const {
        if (size() == 0) return Matrix(0, 0);
        return llt_.matrixL();
    }
    const Eigen::LLT<Matrix>& llt() const noexcept { return llt_; }

    /// (K_n + sigma^2 I)^{-1} y
    const Vector& alpha() const noexcept { return alpha_; }

    /// Absolute jitter added to the diagonal during factorization.
    double jitter() const noexcept { return jitter_; }

    /// L^{-1} k_n(q) for each row q of `queries` (n x m).
    Matrix whiten(const Matrix& queries) const {
        Matrix kq = cross_cov(data_->points(), queries, theta_);
        llt_.matrixL().solveInPlace(kq);
        return kq;
    }

private:
    friend PosteriorGp gp_fit(std::shared_ptr<const Dataset>, const Hyperparameters&);

    std::shared_ptr<const Dataset> data_;
    Hyperparameters theta_;
    Eigen::LLT<Matrix> llt_;
    Vector alpha_;
    double jitter_ = 0;
};

/// Factorize K_n + sigma^2 I for `theta` and solve for the weight vector.
/// sigma = 0 is accepted; the jitter then keeps the factorization alive.
inline PosteriorGp gp_fit(std::shared_ptr<const Dataset> data, const Hyperparameters& theta) {
    if (!data) throw std::invalid_argument("gp_fit: null dataset");
    if (!(theta.signal > 0) || !std::isfinite(theta.signal) || !(theta.noise >= 0) || !std::isfinite(theta.noise) ||
        theta.lengthscales.size() == 0 || !(theta.lengthscales.array() > 0).all() || !theta.lengthscales.allFinite())
        throw std::invalid_argument("gp_fit: require s > 0, l_i > 0 and sigma >= 0");
    if (theta.dim() != data->dim()) throw std::invalid_argument("gp_fit: hyperparameter dimension differs from data");

    PosteriorGp gp;
    gp.data_ = std::move(data);
    gp.theta_ = theta;
    if (gp.data_->size() == 0) return gp;

    Matrix k = cov_matrix(gp.data_->points(), theta);
    k.diagonal().array() += theta.noise * theta.noise;
    auto [llt, jitter] = detail::jittered_llt(k, theta.signal * theta.signal, "gp_fit");
    gp.llt_ = std::move(llt);
    gp.jitter_ = jitter;
    gp.alpha_ = gp.llt_.solve(gp.data_->values());
    return gp;
}

inline PosteriorGp gp_fit(const Dataset& data, const Hyperparameters& theta) {
    return gp_fit(std::make_shared<const Dataset>(data), theta);
}

/// m_n(x) = k_n(x)^T alpha
inline double posterior_mean(const PosteriorGp& gp, const Eigen::Ref<const Vector>& x) {
    if (x.size() != gp.dim()) throw std::invalid_argument("posterior_mean: dimension mismatch");
    if (gp.size() == 0) return 0.0;
    const Matrix q = x.transpose();
    return (cross_cov(gp.data().points(), q, gp.theta()).col(0).dot(gp.alpha()));
}

/// k_n(x, x2) = k(x, x2) - k_n(x)^T (K_n + sigma^2 I)^{-1} k_n(x2)
inline double posterior_cov(const PosteriorGp& gp, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2) {
    const double prior = se_cov(x, x2, gp.theta());
    if (gp.size() == 0) return prior;
    Matrix q(2, gp.dim());
    q.row(0) = x.transpose();
    q.row(1) = x2.transpose();
    const Matrix v = gp.whiten(q);
    return prior - v.col(0).dot(v.col(1));
}

struct Prediction {
    double mean = 0;
    double var = 0;
};

namespace detail {
inline double clamp_variance(double v, double s2) {
    if (v < 0) {
        if (v < -1e-8 * s2) {
            std::ostringstream os;
            os << "negative predictive variance " << v << " clamped to 0";
            warn(os.str());
        }
        return 0.0;
    }
    return v;
}
}  // namespace detail

/// Mean and (clamped, nonnegative) variance of f(x) under the posterior.
inline Prediction point_predict(const PosteriorGp& gp, const Eigen::Ref<const Vector>& x) {
    const double s2 = gp.theta().signal * gp.theta().signal;
    return {posterior_mean(gp, x), detail::clamp_variance(posterior_cov(gp, x, x), s2)};
}

struct PredictionBatch {
    Vector mean;
    Vector var;
};

/// point_predict for every row of `queries`.
inline PredictionBatch predict(const PosteriorGp& gp, const Matrix& queries) {
    if (queries.cols() != gp.dim()) throw std::invalid_argument("predict: dimension mismatch");
    const double s2 = gp.theta().signal * gp.theta().signal;
    PredictionBatch out;
    if (gp.size() == 0) {
        out.mean = Vector::Zero(queries.rows());
        out.var = Vector::Constant(queries.rows(), s2);
        return out;
    }
    Matrix kq = cross_cov(gp.data().points(), queries, gp.theta());
    out.mean = kq.transpose() * gp.alpha();
    gp.llt().matrixL().solveInPlace(kq);
    out.var = (s2 - kq.colwise().squaredNorm().array()).matrix().transpose();
    for (Index i = 0; i < out.var.size(); ++i) out.var[i] = detail::clamp_variance(out.var[i], s2);
    return out;
}

/// Posterior covariance matrix over the rows of `grid`.
inline Matrix posterior_cov_matrix(const PosteriorGp& gp, const Matrix& grid) {
    Matrix c = cov_matrix(grid, gp.theta());
    if (gp.size() > 0) {
        const Matrix v = gp.whiten(grid);
        c.noalias() -= v.transpose() * v;
        c = 0.5 * (c + c.transpose()).eval();
    }
    return c;
}

/// Joint draws of f(grid) from the posterior. Returns an m x G matrix whose
/// rows are independent samples.
inline Matrix sample_functions(const PosteriorGp& gp, const Matrix& grid, Index m, Rng& rng) {
    if (grid.rows() == 0) throw std::invalid_argument("sample_functions: empty grid");
    if (m < 1) throw std::invalid_argument("sample_functions: m must be >= 1");
    if (grid.cols() != gp.dim()) throw std::invalid_argument("sample_functions: dimension mismatch");

    const Vector mean = gp.size() == 0 ? Vector::Zero(grid.rows())
                                       : Vector(cross_cov(gp.data().points(), grid, gp.theta()).transpose() * gp.alpha());
    const Matrix c = posterior_cov_matrix(gp, grid);
    const auto [llt, jitter] = detail::jittered_llt(c, gp.theta().signal * gp.theta().signal, "sample_functions", false);
    (void)jitter;

    std::normal_distribution<double> normal;
    Matrix z(grid.rows(), m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < grid.rows(); ++i) z(i, j) = normal(rng);
    Matrix out = (llt.matrixL() * z).transpose();
    out.rowwise() += mean.transpose();
    return out;
}

}  // namespace bgo
