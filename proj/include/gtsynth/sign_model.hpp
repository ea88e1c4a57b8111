#pragma once

// Sign classes of a latent tree and the Bernoulli-product mixture weights
// over them.

#include "gtsynth/tree_model.hpp"

#include <vector>

namespace gtsynth {

inline constexpr std::size_t kSignEnumerationGuard = 20;

/// All 2^k sign assignments in index order (see SignAssignment).
/// Throws DomainError for k = 0 and GuardExceeded for k > 20.
std::vector<SignAssignment> enumerate_signs(const GaussianTree& tree);
std::vector<SignAssignment> enumerate_signs(std::size_t k);

struct SignParameters {
  std::vector<double> pi;
  std::vector<double> eta;
};

/// eta_i = prod_j pi_j^{b_ji} (1 - pi_j)^{1 - b_ji}, i in sign-index order.
std::vector<double> eta_from_pi(const std::vector<double>& pi);
SignParameters make_sign_parameters(const std::vector<double>& pi);

/// Marginal pi_j = P(b_j = 1). Throws DomainError if the length is not a
/// power of two or entries are negative, NotProductForm if eta does not
/// factor (sup-norm tolerance 1e-9).
std::vector<double> pi_from_eta(const std::vector<double>& eta);

/// Largest entrywise deviation of observed_covariance over all sign classes
/// from the all-positive class.
double verify_sign_invariance(const GaussianTree& tree);

/// Per-class deviation from the all-positive class, in index order.
std::vector<double> sign_class_deviations(const GaussianTree& tree);

}  // namespace gtsynth
