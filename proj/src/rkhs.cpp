#include "radpose/rkhs.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "radpose/errors.h"

namespace radpose::rkhs {

void validate_batch(const FeatureBatch& batch) {
    if (batch.rows() < 2 || batch.cols() < 1) {
        throw DomainError("feature batch needs at least 2 samples and 1 feature");
    }
    if (!batch.allFinite()) {
        throw DomainError("feature batch has non-finite entries");
    }
}

KernelWeights KernelWeights::identity(Eigen::Index d) {
    return {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)};
}

double kernel_linear_trainable(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelWeights& w) {
    if (x.size() != w.wx.cols() || y.size() != w.wy.cols() || w.wx.rows() != w.wy.rows()) {
        throw DomainError("kernel weight and feature dimensions do not match");
    }
    return (w.wx * x).dot(w.wy * y);
}

double kernel_rbf_trainable(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double w) {
    if (!(w > 0.0)) {
        throw DomainError("RBF weight must be positive");
    }
    if (x.size() != y.size()) {
        throw DomainError("RBF arguments differ in dimension");
    }
    return std::exp(-w * (x - y).squaredNorm());
}

Eigen::MatrixXd gram(const Kernel& kernel, const FeatureBatch& a, const FeatureBatch& b) {
    if (a.cols() != b.cols()) {
        throw DomainError("batches differ in feature dimension");
    }
    if (const auto* lin = std::get_if<LinearKernel>(&kernel)) {
        const auto& w = lin->weights;
        if (w.wx.cols() != a.cols() || w.wy.cols() != b.cols() || w.wx.rows() != w.wy.rows()) {
            throw DomainError("kernel weight and feature dimensions do not match");
        }
        return (a * w.wx.transpose()) * (b * w.wy.transpose()).transpose();
    }
    const double w = std::get<RbfKernel>(kernel).w;
    if (!(w > 0.0)) {
        throw DomainError("RBF weight must be positive");
    }
    Eigen::MatrixXd g(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            g(i, j) = std::exp(-w * (a.row(i) - b.row(j)).squaredNorm());
        }
    }
    return g;
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::paper:
            return "paper";
        case Estimator::biased:
            return "biased";
        case Estimator::unbiased:
            return "unbiased";
    }
    return "paper";
}

Estimator estimator_from_string(const std::string& s) {
    if (s == "paper") {
        return Estimator::paper;
    }
    if (s == "biased") {
        return Estimator::biased;
    }
    if (s == "unbiased") {
        return Estimator::unbiased;
    }
    throw DomainError("unknown estimator '" + s + "'");
}

namespace {

MMDReport finish(double squared, Estimator e) {
    MMDReport rep;
    rep.estimator = e;
    rep.squared = squared;
    rep.clamped = squared < 0.0;
    rep.value = std::sqrt(std::max(squared, 0.0));
    return rep;
}

void check_pair(const FeatureBatch& sr, const FeatureBatch& r, bool equal_counts) {
    validate_batch(sr);
    validate_batch(r);
    if (sr.cols() != r.cols()) {
        throw DomainError("batches differ in feature dimension");
    }
    if (equal_counts && sr.rows() != r.rows()) {
        throw DomainError("estimator requires equal sample counts");
    }
}

double scale_factor(Estimator e, PaperScale scale, double m) {
    switch (e) {
        case Estimator::paper:
            return scale == PaperScale::per_m_squared ? 1.0 / (m * m) : 1.0 / m;
        case Estimator::biased:
            return 1.0 / (m * m);
        case Estimator::unbiased:
            return 1.0 / (m * (m - 1.0));
    }
    return 1.0;
}

// Coefficients c_ab such that MMD^2 = sum_ab c_ab k(z_a, z_b) over the stacked
// samples z = [sr; r].
Eigen::MatrixXd coefficient_matrix(Estimator e, PaperScale scale, Eigen::Index m) {
    const double s = scale_factor(e, scale, static_cast<double>(m));
    const Eigen::MatrixXd off = Eigen::MatrixXd::Ones(m, m) - Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd all = Eigen::MatrixXd::Ones(m, m);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    switch (e) {
        case Estimator::paper:
            c.topLeftCorner(m, m) = s * off;
            c.topRightCorner(m, m) = -s * off;
            c.bottomRightCorner(m, m) = s * off;
            break;
        case Estimator::biased:
            c.topLeftCorner(m, m) = s * all;
            c.topRightCorner(m, m) = -s * all;
            c.bottomLeftCorner(m, m) = -s * all;
            c.bottomRightCorner(m, m) = s * all;
            break;
        case Estimator::unbiased:
            c.topLeftCorner(m, m) = s * off;
            c.topRightCorner(m, m) = -s * off;
            c.bottomLeftCorner(m, m) = -s * off;
            c.bottomRightCorner(m, m) = s * off;
            break;
    }
    return c;
}

Eigen::MatrixXd stack(const FeatureBatch& sr, const FeatureBatch& r) {
    Eigen::MatrixXd z(sr.rows() + r.rows(), sr.cols());
    z << sr, r;
    return z;
}

}  // namespace

MMDReport mmd_paper(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel, PaperScale scale) {
    check_pair(sr, r, true);
    const double m = static_cast<double>(sr.rows());
    const Eigen::MatrixXd kss = gram(kernel, sr, sr);
    const Eigen::MatrixXd ksr = gram(kernel, sr, r);
    const Eigen::MatrixXd krr = gram(kernel, r, r);
    const double bracket = (kss.sum() - kss.trace()) - (ksr.sum() - ksr.trace()) + (krr.sum() - krr.trace());
    return finish(bracket * scale_factor(Estimator::paper, scale, m), Estimator::paper);
}

MMDReport mmd_biased(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel) {
    check_pair(sr, r, false);
    const double mean_ss = gram(kernel, sr, sr).mean();
    const double mean_sr = gram(kernel, sr, r).mean();
    const double mean_rs = gram(kernel, r, sr).mean();
    const double mean_rr = gram(kernel, r, r).mean();
    return finish(mean_ss - (mean_sr + mean_rs) + mean_rr, Estimator::biased);
}

MMDReport mmd_unbiased(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel) {
    check_pair(sr, r, true);
    const double m = static_cast<double>(sr.rows());
    const Eigen::MatrixXd kss = gram(kernel, sr, sr);
    const Eigen::MatrixXd ksr = gram(kernel, sr, r);
    const Eigen::MatrixXd krs = gram(kernel, r, sr);
    const Eigen::MatrixXd krr = gram(kernel, r, r);
    const double off_sum = (kss.sum() - kss.trace()) + (krr.sum() - krr.trace()) - (ksr.sum() - ksr.trace()) -
                           (krs.sum() - krs.trace());
    return finish(off_sum / (m * (m - 1.0)), Estimator::unbiased);
}

MMDReport mmd(Estimator estimator, const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel,
              PaperScale scale) {
    switch (estimator) {
        case Estimator::paper:
            return mmd_paper(sr, r, kernel, scale);
        case Estimator::biased:
            return mmd_biased(sr, r, kernel);
        case Estimator::unbiased:
            return mmd_unbiased(sr, r, kernel);
    }
    return mmd_paper(sr, r, kernel, scale);
}

bool truncate_to_common(FeatureBatch& a, FeatureBatch& b) {
    const Eigen::Index m = std::min(a.rows(), b.rows());
    const bool changed = a.rows() != m || b.rows() != m;
    a.conservativeResize(m, Eigen::NoChange);
    b.conservativeResize(m, Eigen::NoChange);
    return changed;
}

WeightGradient mmd_grad_weights(const FeatureBatch& sr, const FeatureBatch& r, const KernelWeights& w,
                                Estimator estimator, PaperScale scale) {
    check_pair(sr, r, true);
    const MMDReport rep = mmd(estimator, sr, r, LinearKernel{w}, scale);
    WeightGradient g;
    g.d_wx = Eigen::MatrixXd::Zero(w.wx.rows(), w.wx.cols());
    g.d_wy = Eigen::MatrixXd::Zero(w.wy.rows(), w.wy.cols());
    if (!(rep.squared > 0.0)) {
        g.defined = false;
        return g;
    }
    const Eigen::MatrixXd z = stack(sr, r);
    const Eigen::MatrixXd c = coefficient_matrix(estimator, scale, sr.rows());
    // d = sum_ab c_ab z_b z_a^T
    const Eigen::MatrixXd d = z.transpose() * c.transpose() * z;
    const double chain = 0.5 / rep.value;
    g.d_wx = chain * (w.wy * d);
    g.d_wy = chain * (w.wx * d.transpose());
    return g;
}

std::pair<double, bool> mmd_grad_rbf(const FeatureBatch& sr, const FeatureBatch& r, double w, Estimator estimator,
                                     PaperScale scale) {
    check_pair(sr, r, true);
    const MMDReport rep = mmd(estimator, sr, r, RbfKernel{w}, scale);
    if (!(rep.squared > 0.0)) {
        return {0.0, false};
    }
    const Eigen::MatrixXd z = stack(sr, r);
    const Eigen::MatrixXd c = coefficient_matrix(estimator, scale, sr.rows());
    double ds = 0.0;
    for (Eigen::Index a = 0; a < z.rows(); ++a) {
        for (Eigen::Index b = 0; b < z.rows(); ++b) {
            if (c(a, b) == 0.0) {
                continue;
            }
            const double d2 = (z.row(a) - z.row(b)).squaredNorm();
            ds += c(a, b) * (-d2) * std::exp(-w * d2);
        }
    }
    return {0.5 * ds / rep.value, true};
}

FitResult fit_kernel_weights(const std::vector<BatchPair>& pairs, const Kernel& initial, const FitOptions& options) {
    if (pairs.empty()) {
        throw DomainError("kernel fitting needs at least one batch pair");
    }
    if (!(options.lr > 0.0) || options.epochs < 0) {
        throw DomainError("learning rate must be positive and epochs non-negative");
    }
    FitResult result;
    result.kernel = initial;
    const double direction = options.objective == Objective::minimize ? -1.0 : 1.0;
    const double inv = 1.0 / static_cast<double>(pairs.size());

    auto mean_value = [&](const Kernel& k) {
        double sum = 0.0;
        for (const auto& [a, b] : pairs) {
            sum += mmd(options.estimator, a, b, k, options.scale).value;
        }
        return sum * inv;
    };

    for (int epoch = 0; epoch <= options.epochs; ++epoch) {
        const double loss = mean_value(result.kernel);
        result.trace.push_back(loss);
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
        if (epoch == options.epochs) {
            break;
        }
        if (auto* lin = std::get_if<LinearKernel>(&result.kernel)) {
            Eigen::MatrixXd gx = Eigen::MatrixXd::Zero(lin->weights.wx.rows(), lin->weights.wx.cols());
            Eigen::MatrixXd gy = Eigen::MatrixXd::Zero(lin->weights.wy.rows(), lin->weights.wy.cols());
            for (const auto& [a, b] : pairs) {
                const WeightGradient g = mmd_grad_weights(a, b, lin->weights, options.estimator, options.scale);
                gx += g.d_wx;
                gy += g.d_wy;
            }
            lin->weights.wx += direction * options.lr * inv * gx;
            lin->weights.wy += direction * options.lr * inv * gy;
        } else {
            auto& rbf = std::get<RbfKernel>(result.kernel);
            double g = 0.0;
            for (const auto& [a, b] : pairs) {
                g += mmd_grad_rbf(a, b, rbf.w, options.estimator, options.scale).first;
            }
            rbf.w = std::max(rbf.w + direction * options.lr * inv * g, 1e-8);
        }
    }
    return result;
}

FitResult fit_kernel_weights(const std::vector<BatchPair>& pairs, const FitOptions& options) {
    if (pairs.empty()) {
        throw DomainError("kernel fitting needs at least one batch pair");
    }
    return fit_kernel_weights(pairs, LinearKernel{KernelWeights::identity(pairs.front().first.cols())}, options);
}

namespace {

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const FeatureBatch& x, double ridge) {
    const Eigen::VectorXd mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    cov.diagonal().array() += ridge;
    return {mu, cov};
}

}  // namespace

double kl_divergence_gaussianized(const FeatureBatch& sr, const FeatureBatch& r, double ridge) {
    check_pair(sr, r, false);
    const auto [mu_s, cov_s] = moments(sr, ridge);
    const auto [mu_r, cov_r] = moments(r, ridge);
    const Eigen::LLT<Eigen::MatrixXd> llt_r(cov_r);
    const Eigen::LLT<Eigen::MatrixXd> llt_s(cov_s);
    if (llt_r.info() != Eigen::Success || llt_s.info() != Eigen::Success) {
        throw DomainError("sample covariance is singular after regularization");
    }
    const Eigen::Index d = sr.cols();
    const Eigen::VectorXd delta = mu_r - mu_s;
    const double trace_term = llt_r.solve(cov_s).trace();
    const double mahalanobis = delta.dot(llt_r.solve(delta));
    const Eigen::MatrixXd lr = llt_r.matrixL();
    const Eigen::MatrixXd ls = llt_s.matrixL();
    const double logdet_r = 2.0 * lr.diagonal().array().log().sum();
    const double logdet_s = 2.0 * ls.diagonal().array().log().sum();
    return 0.5 * (trace_term + mahalanobis - static_cast<double>(d) + logdet_r - logdet_s);
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw DomainError("Wasserstein distance needs non-empty samples");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double total = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k + 1 < all.size(); ++k) {
        while (ia < a.size() && a[ia] <= all[k]) {
            ++ia;
        }
        while (ib < b.size() && b[ib] <= all[k]) {
            ++ib;
        }
        total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (all[k + 1] - all[k]);
    }
    return total;
}

double wasserstein_1d_sliced(const FeatureBatch& sr, const FeatureBatch& r, int n_projections, std::uint64_t seed) {
    check_pair(sr, r, false);
    if (n_projections < 1) {
        throw DomainError("need at least one projection");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double total = 0.0;
    for (int p = 0; p < n_projections; ++p) {
        Eigen::VectorXd dir(sr.cols());
        do {
            for (Eigen::Index i = 0; i < dir.size(); ++i) {
                dir[i] = normal(rng);
            }
        } while (dir.norm() < 1e-12);
        dir.normalize();
        const Eigen::VectorXd ps = sr * dir;
        const Eigen::VectorXd pr = r * dir;
        total += wasserstein_1d(std::vector<double>(ps.data(), ps.data() + ps.size()),
                                std::vector<double>(pr.data(), pr.data() + pr.size()));
    }
    return total / n_projections;
}

Eigen::MatrixXd random_lift_matrix(Eigen::Index d, int factor, std::uint64_t seed) {
    if (d < 1 || factor < 1) {
        throw DomainError("lift needs positive dimension and factor");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    Eigen::MatrixXd lift(factor * d, d);
    for (Eigen::Index i = 0; i < lift.rows(); ++i) {
        for (Eigen::Index j = 0; j < lift.cols(); ++j) {
            lift(i, j) = normal(rng);
        }
    }
    return lift;
}

FeatureBatch apply_lift(const FeatureBatch& batch, const Eigen::MatrixXd& lift) {
    if (lift.cols() != batch.cols()) {
        throw DomainError("lift dimension does not match the batch");
    }
    return batch * lift.transpose();
}

}  // namespace radpose::rkhs
