#include "gtsynth/sign_model.hpp"

#include "gtsynth/errors.hpp"

#include <algorithm>
#include <cmath>

namespace gtsynth {

std::vector<SignAssignment> enumerate_signs(std::size_t k) {
  if (k == 0) throw DomainError("no latent nodes to enumerate");
  if (k > kSignEnumerationGuard)
    throw GuardExceeded("2^" + std::to_string(k) + " sign classes exceed the enumeration guard 2^" +
                        std::to_string(kSignEnumerationGuard));
  std::vector<SignAssignment> out;
  out.reserve(std::size_t{1} << k);
  for (std::uint64_t i = 0; i < (std::uint64_t{1} << k); ++i)
    out.push_back(SignAssignment::from_index(i, k));
  return out;
}

std::vector<SignAssignment> enumerate_signs(const GaussianTree& tree) {
  return enumerate_signs(tree.latent_count());
}

std::vector<double> eta_from_pi(const std::vector<double>& pi) {
  if (pi.size() > kSignEnumerationGuard) throw GuardExceeded("too many sign parameters");
  for (double p : pi)
    if (!(p > 0.0 && p < 1.0)) throw DomainError("pi outside (0,1)");
  const std::size_t k = pi.size();
  std::vector<double> eta(std::size_t{1} << k);
  for (std::size_t i = 0; i < eta.size(); ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const bool one = (i >> (k - 1 - j)) & 1u;
      w *= one ? pi[j] : 1.0 - pi[j];
    }
    eta[i] = w;
  }
  return eta;
}

SignParameters make_sign_parameters(const std::vector<double>& pi) { return {pi, eta_from_pi(pi)}; }

std::vector<double> pi_from_eta(const std::vector<double>& eta) {
  const std::size_t n = eta.size();
  if (n < 2 || (n & (n - 1)) != 0) throw DomainError("eta length is not a power of two >= 2");
  for (double w : eta)
    if (!(w >= 0.0)) throw DomainError("negative or NaN mixture weight");
  std::size_t k = 0;
  while ((std::size_t{1} << k) < n) ++k;

  std::vector<double> pi(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if ((i >> (k - 1 - j)) & 1u) pi[j] += eta[i];

  bool interior = std::all_of(pi.begin(), pi.end(), [](double p) { return p > 0.0 && p < 1.0; });
  if (!interior) throw NotProductForm("a marginal sign probability is 0 or 1");
  const std::vector<double> back = eta_from_pi(pi);
  double dev = 0.0;
  for (std::size_t i = 0; i < n; ++i) dev = std::max(dev, std::abs(back[i] - eta[i]));
  if (dev > 1e-9) throw NotProductForm("weights do not factor into independent signs");
  return pi;
}

std::vector<double> sign_class_deviations(const GaussianTree& tree) {
  const auto classes = enumerate_signs(tree);
  const Eigen::MatrixXd ref =
      observed_covariance(tree, SignAssignment::all_positive(tree.latent_count())).values;
  std::vector<double> out;
  out.reserve(classes.size());
  for (const auto& s : classes)
    out.push_back((observed_covariance(tree, s).values - ref).cwiseAbs().maxCoeff());
  return out;
}

double verify_sign_invariance(const GaussianTree& tree) {
  const auto dev = sign_class_deviations(tree);
  return *std::max_element(dev.begin(), dev.end());
}

}  // namespace gtsynth
