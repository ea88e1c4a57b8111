#include "gtsynth/info_rates.hpp"

#include "gtsynth/errors.hpp"
#include "gtsynth/sign_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gtsynth {

double log_det_spd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DomainError("matrix is not positive definite");
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

double gaussian_mi(const CovarianceMatrix& cov, std::span<const std::string> a,
                   std::span<const std::string> b) {
  if (a.empty() || b.empty()) throw DomainError("gaussian_mi needs two non-empty sets");
  std::set<std::string> seen(a.begin(), a.end());
  for (const auto& id : b)
    if (seen.count(id)) throw DomainError("sets overlap at " + id);
  std::vector<std::string> joint(a.begin(), a.end());
  joint.insert(joint.end(), b.begin(), b.end());
  const double la = log_det_spd(cov.block(a));
  const double lb = log_det_spd(cov.block(b));
  const double lab = log_det_spd(cov.block(joint));
  return 0.5 * (la + lb - lab);
}

namespace {

void check_layer(const LayeredTree& lt, int l) {
  if (l < 0 || l >= lt.top_layer())
    throw DomainError("layer " + std::to_string(l) + " has no channel (top layer is " +
                      std::to_string(lt.top_layer()) + ")");
}

double log_noise_det(const LayerChannel& ch) {
  double acc = 0.0;
  for (double v : ch.noise_var) acc += std::log(v);
  return acc;
}

}  // namespace

double sum_rate_bound(const LayeredTree& lt, const GaussianTree& tree, int l,
                      const SignAssignment& signs) {
  check_layer(lt, l);
  const CovarianceMatrix joint = joint_covariance(tree, signs);
  const auto& nodes = lt.layer(l);
  Eigen::MatrixXd block(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j)
      block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = joint.values(nodes[i], nodes[j]);
  const LayerChannel ch = build_layer_channel(lt, tree, l);
  return 0.5 * (log_det_spd(block) - log_noise_det(ch));
}

UpperLaw upper_law(const LayeredTree& lt, const GaussianTree& tree, int l) {
  check_layer(lt, l);
  const CovarianceMatrix joint =
      joint_covariance(tree, SignAssignment::all_positive(tree.latent_count()));
  const auto& inputs = lt.layer(l + 1);
  UpperLaw up;
  up.cov.resize(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = 0; j < inputs.size(); ++j)
      up.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = joint.values(inputs[i], inputs[j]);
  for (int v : lt.latents_at(tree, l + 1)) {
    const auto pos = std::find(inputs.begin(), inputs.end(), v) - inputs.begin();
    up.sign_pos.push_back(static_cast<int>(pos));
  }
  return up;
}

std::vector<double> layer_pi(const LayeredTree& lt, const GaussianTree& tree, int l) {
  std::vector<double> out;
  for (int v : lt.latents_at(tree, l)) out.push_back(*tree.node(v).pi);
  return out;
}

MixtureKernel make_mixture_kernel(const LayerChannel& ch, const UpperLaw& up,
                                  const std::vector<double>& pi) {
  if (pi.size() != up.sign_pos.size())
    throw DomainError("expected " + std::to_string(up.sign_pos.size()) + " sign parameters, got " +
                      std::to_string(pi.size()));
  MixtureKernel k;
  k.inputs = static_cast<int>(up.cov.rows());
  k.outputs = static_cast<int>(ch.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(up.cov);
  if (llt.info() != Eigen::Success) throw DomainError("upper-layer covariance is not positive definite");
  k.chol = llt.matrixL();
  k.precision = llt.solve(Eigen::MatrixXd::Identity(k.inputs, k.inputs));
  k.parent_pos = ch.parent_pos;
  k.coef = ch.coef;
  for (double v : ch.noise_var) k.noise_sd.push_back(std::sqrt(v));
  k.sign_pos = up.sign_pos;
  k.stream_layer = static_cast<std::uint64_t>(ch.layer);

  const std::size_t kk = pi.size();
  if (kk > kSignEnumerationGuard) throw GuardExceeded("too many signs in one layer");
  k.eta = kk == 0 ? std::vector<double>{1.0} : eta_from_pi(pi);
  for (std::size_t c = 0; c < k.eta.size(); ++c) {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(k.inputs);
    for (std::size_t j = 0; j < kk; ++j)
      if (!((c >> (kk - 1 - j)) & 1u)) s(k.sign_pos[j]) = -1.0;
    k.branch_signs.push_back(std::move(s));
    k.log_eta.push_back(std::log(k.eta[c]));
  }
  return k;
}

MixtureMiEstimate mc_mi_mixture(const LayerChannel& ch, const UpperLaw& up,
                                const std::vector<double>& pi, std::uint64_t samples,
                                std::uint64_t seed) {
  if (samples < kMinRateSamples)
    throw DomainError("Monte-Carlo budget " + std::to_string(samples) + " below " +
                      std::to_string(kMinRateSamples));
  const MixtureKernel k = make_mixture_kernel(ch, up, pi);

  // |A S A' + S_z| is the sign-free layer determinant.
  const Eigen::MatrixXd a = ch.transition();
  Eigen::MatrixXd cov = a * up.cov * a.transpose();
  for (std::size_t r = 0; r < ch.rows(); ++r)
    cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += ch.noise_var[r];

  MixtureMiEstimate out;
  out.sum_rate = 0.5 * (log_det_spd(cov) - log_noise_det(ch));
  const Moments m = omp::mixture_divergence(k, seed, samples);
  const double n = static_cast<double>(m.count);
  const double mean = m.sum / n;
  const double var = std::max(0.0, (m.sumsq - n * mean * mean) / (n - 1.0));
  out.divergence = mean;
  out.ci = 1.96 * std::sqrt(var / n);
  out.estimate = std::max(0.0, out.sum_rate - mean);
  return out;
}

RateBounds layer_rate_bounds(const LayeredTree& lt, const GaussianTree& tree, int l,
                             const std::vector<double>& pi, std::uint64_t samples,
                             std::uint64_t seed) {
  check_layer(lt, l);
  RateBounds rb;
  rb.layer = l;
  rb.pi = pi.empty() ? layer_pi(lt, tree, l + 1) : pi;
  rb.sum_rate_lb =
      sum_rate_bound(lt, tree, l, SignAssignment::all_positive(tree.latent_count()));
  const MixtureMiEstimate est = mc_mi_mixture(build_layer_channel(lt, tree, l),
                                              upper_law(lt, tree, l), rb.pi, samples, seed);
  rb.y_rate_lb = std::max(0.0, rb.sum_rate_lb - est.divergence);
  rb.y_rate_ci = est.ci;
  return rb;
}

std::vector<double> pi_grid(double step) {
  if (!(step > 0.0 && step <= 0.25)) throw DomainError("grid step must lie in (0, 0.25]");
  std::vector<double> g;
  for (int i = 1;; ++i) {
    const double p = i * step;
    if (p >= 1.0 - 1e-9) break;
    g.push_back(p);
  }
  return g;
}

PiOptimum optimize_pi(const LayeredTree& lt, const GaussianTree& tree, int l, double grid_step,
                      std::uint64_t samples, std::uint64_t seed) {
  check_layer(lt, l);
  const std::vector<double> grid = pi_grid(grid_step);
  const LayerChannel ch = build_layer_channel(lt, tree, l);
  const UpperLaw up = upper_law(lt, tree, l);
  const std::size_t k = up.sign_pos.size();
  if (k == 0) throw DomainError("layer " + std::to_string(l + 1) + " carries no signs");

  auto eval = [&](const std::vector<double>& pi) { return mc_mi_mixture(ch, up, pi, samples, seed); };

  std::vector<std::size_t> at(k, 0);
  auto point = [&]() {
    std::vector<double> pi(k);
    for (std::size_t j = 0; j < k; ++j) pi[j] = grid[at[j]];
    return pi;
  };

  // Coordinate descent over the grid; each sweep moves one coordinate to its
  // best grid value with the others held.
  bool changed = true;
  for (int pass = 0; changed && pass < 8; ++pass) {
    changed = false;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t before = at[j];
      std::size_t best = before;
      double best_val = INFINITY;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        at[j] = g;
        const double v = eval(point()).estimate;
        if (v < best_val) {
          best_val = v;
          best = g;
        }
      }
      at[j] = best;
      if (best != before) changed = true;
    }
    if (k == 1) break;
  }

  PiOptimum out;
  out.pi_star = point();
  const MixtureMiEstimate opt = eval(out.pi_star);
  out.objective = opt.estimate;
  out.ci = opt.ci;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t keep = at[j];
    for (std::size_t g = 0; g < grid.size(); ++g) {
      at[j] = g;
      const std::vector<double> pi = point();
      const MixtureMiEstimate e = eval(pi);
      out.curve.push_back({static_cast<int>(j), pi, e.estimate, e.ci});
    }
    at[j] = keep;
  }
  return out;
}

}  // namespace gtsynth
