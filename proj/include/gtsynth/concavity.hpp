#pragma once

// Numerical check that h(X|Y) is concave in the mixture weights eta over
// sign classes. eta is treated as an unnormalised weight vector (the
// extended function whose Hessian is the object of the concavity argument).

#include "gtsynth/tree_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace gtsynth {

using EtaFunctional = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd fd_gradient(const EtaFunctional& f, const Eigen::VectorXd& eta, double h);
/// Central-difference Hessian, symmetrised.
Eigen::MatrixXd fd_hessian(const EtaFunctional& f, const Eigen::VectorXd& eta, double h);
double max_eigenvalue(const Eigen::MatrixXd& m);

inline constexpr std::size_t kConcavityMaxLatents = 3;

/// h(X|Y) of the tree as a function of extended eta (length 2^k, sign-index
/// order), X = observed nodes, Y = latent nodes.
///
/// k = 1: nested fixed-node Gauss-Legendre quadrature after whitening, with
/// `budget` panels per unit length. k = 2, 3: importance sampling with
/// `budget` fixed samples from the uniform-weight mixture; every sample's
/// contribution is itself concave in eta. Throws DomainError for k = 0 or
/// k > 3.
EtaFunctional conditional_entropy_functional(const GaussianTree& tree, std::uint64_t budget,
                                             std::uint64_t seed);

/// Interior points: eta_from_pi of pi_j = (i + 0.5) / count, alternating
/// with 1 - pi_j across coordinates.
std::vector<Eigen::VectorXd> interior_eta_points(std::size_t k, std::size_t count);

struct ConcavityResult {
  double max_eigenvalue = 0.0;
  std::vector<double> point_max_eigenvalues;
  /// Gradient at uniform eta; stationarity of the Lagrangian means all
  /// components agree.
  Eigen::VectorXd gradient_at_uniform;
  double gradient_spread = 0.0;
};

ConcavityResult concavity_check(const EtaFunctional& f, const std::vector<Eigen::VectorXd>& points,
                                double fd_step = 1e-3);
ConcavityResult concavity_check(const GaussianTree& tree, const std::vector<Eigen::VectorXd>& points,
                                std::uint64_t budget, std::uint64_t seed);

}  // namespace gtsynth
