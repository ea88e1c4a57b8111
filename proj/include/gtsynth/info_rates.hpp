#pragma once

// Mutual-information quantities behind the per-layer rate region, the
// Monte-Carlo estimator for the Gaussian-mixture term, and the grid search
// over sign parameters. All values are in nats.

#include "gtsynth/kernels.hpp"
#include "gtsynth/layering.hpp"
#include "gtsynth/tree_model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gtsynth {

inline constexpr std::uint64_t kMinRateSamples = 1000;

/// 1/2 log(|S_A| |S_B| / |S_{A u B}|). Throws DomainError on empty,
/// overlapping or unknown sets and on a singular block.
double gaussian_mi(const CovarianceMatrix& cov, std::span<const std::string> a,
                   std::span<const std::string> b);

/// log-determinant via Cholesky; throws DomainError when not positive definite.
double log_det_spd(const Eigen::MatrixXd& m);

struct RateBounds {
  int layer = 0;
  std::vector<double> pi;  // sign parameters of layer l+1, canonical order
  double sum_rate_lb = 0.0;
  double y_rate_lb = 0.0;
  double y_rate_ci = 0.0;
};

/// I[Y(l+1),B(l+1); Y(l) | B(l)] = 1/2 log(|S_{Y(l)|b}| / prod(1 - rho^2)),
/// evaluated on the layer block of joint_covariance(tree, signs).
double sum_rate_bound(const LayeredTree& lt, const GaussianTree& tree, int l,
                      const SignAssignment& signs);

/// Law of the upper layer of a channel: reference-sign covariance of
/// Y(l+1) and the input positions carrying signs (canonical order).
struct UpperLaw {
  Eigen::MatrixXd cov;
  std::vector<int> sign_pos;
};

UpperLaw upper_law(const LayeredTree& lt, const GaussianTree& tree, int l);

/// pi of the latent nodes of layer l, canonical order.
std::vector<double> layer_pi(const LayeredTree& lt, const GaussianTree& tree, int l);

struct MixtureMiEstimate {
  double estimate = 0.0;    // I[Y(l+1); Y(l) | B(l)]
  double ci = 0.0;          // 95% half-width
  double divergence = 0.0;  // mean of D, the gap to the sum rate
  double sum_rate = 0.0;    // closed-form sum rate of this channel
};

MixtureKernel make_mixture_kernel(const LayerChannel& ch, const UpperLaw& up,
                                  const std::vector<double>& pi);

/// Monte-Carlo estimate of I[Y(l+1); Y(l) | B(l)].
///
/// Given y = Y(l+1) and the lower signs, Y(l) is a mixture over the upper
/// signs beta with weights w_beta(y) proportional to
/// eta_beta N(y; 0, D_beta S D_beta) and components N(A_beta y, S_z).
/// Writing D = log N_beta(x) - log p(x | y) for the true beta, the estimate
/// is (closed-form sum rate) - E[D]; the expectation over beta is taken
/// exactly per sample, and samples are common across pi so curves in pi
/// are smooth. Throws DomainError for fewer than 1000 samples.
MixtureMiEstimate mc_mi_mixture(const LayerChannel& ch, const UpperLaw& up,
                                const std::vector<double>& pi, std::uint64_t samples,
                                std::uint64_t seed);

/// Rate bounds of channel l at the given sign parameters for layer l+1
/// (empty = the tree's own pi). Throws DomainError on a bad layer or budget.
RateBounds layer_rate_bounds(const LayeredTree& lt, const GaussianTree& tree, int l,
                             const std::vector<double>& pi, std::uint64_t samples,
                             std::uint64_t seed);

struct PiCurvePoint {
  int coordinate = 0;  // which component was varied
  std::vector<double> pi;
  double estimate = 0.0;
  double ci = 0.0;
};

struct PiOptimum {
  std::vector<double> pi_star;
  double objective = 0.0;
  double ci = 0.0;
  /// Profile through pi_star along each coordinate, in grid order.
  std::vector<PiCurvePoint> curve;
};

/// Grid values step, 2*step, ... strictly inside (0,1).
std::vector<double> pi_grid(double step);

/// Coordinate-wise grid search minimising I[Y(l+1); Y(l) | B(l)] over the
/// sign parameters of layer l+1, starting from the first grid value.
/// Throws DomainError for step outside (0, 0.25] or a layer without signs.
PiOptimum optimize_pi(const LayeredTree& lt, const GaussianTree& tree, int l, double grid_step,
                      std::uint64_t samples, std::uint64_t seed);

}  // namespace gtsynth
