#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace radpose::rkhs {

/// m samples (rows) by d features (columns).
using FeatureBatch = Eigen::MatrixXd;

/// Throws DomainError unless the batch has at least two rows, one column and
/// only finite entries.
void validate_batch(const FeatureBatch& batch);

/// Trainable inner-product kernel k(x, y) = <W_X x, W_Y y>.
struct KernelWeights {
    Eigen::MatrixXd wx;
    Eigen::MatrixXd wy;

    static KernelWeights identity(Eigen::Index d);
    bool operator==(const KernelWeights&) const = default;
};

struct LinearKernel {
    KernelWeights weights;
};

/// k(x, y) = exp(-w |x - y|^2) with a trainable scalar w > 0.
struct RbfKernel {
    double w = 1.0;
};

using Kernel = std::variant<LinearKernel, RbfKernel>;

double kernel_linear_trainable(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelWeights& w);
double kernel_rbf_trainable(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double w);

/// G(i, j) = k(a_i, b_j), with rows of `a` in the first kernel slot.
Eigen::MatrixXd gram(const Kernel& kernel, const FeatureBatch& a, const FeatureBatch& b);

enum class Estimator { paper, biased, unbiased };
std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

/// Normalization of the paper estimator's bracket: divided by m^2 inside the
/// square root (default) or by m.
enum class PaperScale { per_m_squared, per_m };

struct MMDReport {
    double value = 0.0;
    /// Quantity under the square root before clamping (a signed MMD^2
    /// estimate).
    double squared = 0.0;
    Estimator estimator = Estimator::paper;
    bool clamped = false;
};

/// Self-term-excluded estimator with a single-counted cross term:
/// sqrt(max(0, [(S_ss - tr K_ss) - (S_sr - tr K_sr) + (S_rr - tr K_rr)] / m^2))
/// where S_ab sums all entries of K_ab. Requires equal sample counts.
MMDReport mmd_paper(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel,
                    PaperScale scale = PaperScale::per_m_squared);
/// sqrt(mean K_ss - mean K_sr - mean K_rs + mean K_rr), clamped.
MMDReport mmd_biased(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel);
/// U-statistic with all diagonals excluded, clamped before the square root.
MMDReport mmd_unbiased(const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel);

MMDReport mmd(Estimator estimator, const FeatureBatch& sr, const FeatureBatch& r, const Kernel& kernel,
              PaperScale scale = PaperScale::per_m_squared);

/// Truncates the longer batch to the common row count; returns true when a
/// batch was shortened.
bool truncate_to_common(FeatureBatch& a, FeatureBatch& b);

struct WeightGradient {
    Eigen::MatrixXd d_wx;
    Eigen::MatrixXd d_wy;
    /// False when the estimate was clamped at zero; gradients are then zero.
    bool defined = true;
};

/// Analytic gradient of the MMD value (after the square root) with respect
/// to every entry of W_X and W_Y for the linear trainable kernel.
WeightGradient mmd_grad_weights(const FeatureBatch& sr, const FeatureBatch& r, const KernelWeights& w,
                                Estimator estimator = Estimator::paper,
                                PaperScale scale = PaperScale::per_m_squared);

/// d value / d w for the trainable RBF kernel. `defined` as above.
std::pair<double, bool> mmd_grad_rbf(const FeatureBatch& sr, const FeatureBatch& r, double w,
                                     Estimator estimator = Estimator::paper,
                                     PaperScale scale = PaperScale::per_m_squared);

enum class Objective { minimize, maximize };

struct FitOptions {
    double lr = 1e-2;
    int epochs = 200;
    Objective objective = Objective::minimize;
    Estimator estimator = Estimator::paper;
    PaperScale scale = PaperScale::per_m_squared;
};

struct FitResult {
    Kernel kernel;
    /// Mean MMD over the pairs before every epoch's update, plus the final
    /// value: epochs + 1 entries.
    std::vector<double> trace;
    bool diverged = false;
};

using BatchPair = std::pair<FeatureBatch, FeatureBatch>;

/// Plain gradient descent (or ascent) on the mean MMD over `pairs`, starting
/// from `initial`. Stops early and sets `diverged` on a non-finite loss.
FitResult fit_kernel_weights(const std::vector<BatchPair>& pairs, const Kernel& initial, const FitOptions& options);

/// Identity-initialized linear kernel fit.
FitResult fit_kernel_weights(const std::vector<BatchPair>& pairs, const FitOptions& options);

/// KL(N(mu_sr, S_sr) || N(mu_r, S_r)) between moment-matched Gaussians with
/// covariances regularized by `ridge` * I.
double kl_divergence_gaussianized(const FeatureBatch& sr, const FeatureBatch& r, double ridge = 1e-6);

/// Mean over random unit directions of the 1D Wasserstein-1 distance between
/// the projected samples.
double wasserstein_1d_sliced(const FeatureBatch& sr, const FeatureBatch& r, int n_projections = 64,
                             std::uint64_t seed = 0);

/// Exact 1D Wasserstein-1 distance between two empirical distributions.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Fixed random linear lift d -> factor * d with N(0, 1/d) entries.
Eigen::MatrixXd random_lift_matrix(Eigen::Index d, int factor, std::uint64_t seed);
FeatureBatch apply_lift(const FeatureBatch& batch, const Eigen::MatrixXd& lift);

}  // namespace radpose::rkhs
