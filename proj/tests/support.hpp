#pragma once
// Test-only helpers: fixture loading, a random valid-tree generator and an
// ancestral-simulation sampler that shares no code with the library.

#include <gtsynth/tree_model.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace gtsynth::test {

inline std::string fixture(const std::string& name) {
  return std::string(GTSYNTH_FIXTURES) + "/" + name;
}

inline GaussianTree load_fixture(const std::string& name) { return load_tree(fixture(name)); }

/// Random valid tree: k latents joined by a random tree, then observed
/// leaves so every latent has degree >= 3, then extra observed nodes (up to
/// max_obs) hung off random nodes. Requires max_obs >= 6 for k = 4.
inline GaussianTree random_valid_tree(std::mt19937_64& gen, int k, int max_obs) {
  std::uniform_real_distribution<double> mag(0.2, 0.9);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> pi_d(0.1, 0.9);
  auto rho = [&] { return coin(gen) ? mag(gen) : -mag(gen); };

  for (;;) {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<int> deg(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
      nodes.push_back({"h" + std::to_string(i), NodeKind::Latent, pi_d(gen)});
      if (i > 0) {
        const int p = std::uniform_int_distribution<int>(0, i - 1)(gen);
        edges.push_back({"h" + std::to_string(p), "h" + std::to_string(i), rho()});
        ++deg[static_cast<std::size_t>(p)];
        ++deg[static_cast<std::size_t>(i)];
      }
    }
    int need = 0;
    for (int d : deg) need += std::max(0, 3 - d);
    need = std::max(need, 3);
    if (need > max_obs) continue;
    const int n = std::uniform_int_distribution<int>(need, max_obs)(gen);
    int made = 0;
    auto add_obs = [&](const std::string& parent) {
      const std::string id = "o" + std::to_string(made++);
      nodes.push_back({id, NodeKind::Observed, std::nullopt});
      edges.push_back({parent, id, rho()});
    };
    for (int i = 0; i < k; ++i)
      for (int d = deg[static_cast<std::size_t>(i)]; d < 3; ++d) add_obs("h" + std::to_string(i));
    while (made < n) {
      const int pick = std::uniform_int_distribution<int>(0, k + made - 1)(gen);
      add_obs(pick < k ? "h" + std::to_string(pick) : "o" + std::to_string(pick - k));
    }
    return GaussianTree(std::move(nodes), std::move(edges));
  }
}

/// Draws rows of all nodes (document order) by walking the tree from node 0:
/// child = r * parent + sqrt(1 - r^2) * z with r the edge rho times the
/// given sign factors of both endpoints.
inline Eigen::MatrixXd ancestral_samples(const GaussianTree& tree, const std::vector<int>& sign_by_node,
                                         std::size_t rows, std::uint64_t seed) {
  const auto n = tree.node_count();
  std::vector<int> order{0};
  std::vector<int> parent(n, -1), via(n, -1);
  std::vector<bool> seen(n, false);
  seen[0] = true;
  for (std::size_t h = 0; h < order.size(); ++h) {
    const int u = order[h];
    for (std::size_t e = 0; e < tree.edges().size(); ++e) {
      auto [a, b] = tree.endpoints(static_cast<int>(e));
      const int v = a == u ? b : (b == u ? a : -1);
      if (v < 0 || seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = true;
      parent[static_cast<std::size_t>(v)] = u;
      via[static_cast<std::size_t>(v)] = static_cast<int>(e);
      order.push_back(v);
    }
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (int u : order) {
      const auto uu = static_cast<std::size_t>(u);
      if (parent[uu] < 0) {
        x(ri, u) = z(gen);
        continue;
      }
      const double c = tree.rho(via[uu]) * sign_by_node[uu] *
                       sign_by_node[static_cast<std::size_t>(parent[uu])];
      x(ri, u) = c * x(ri, parent[uu]) + std::sqrt(1.0 - c * c) * z(gen);
    }
  }
  return x;
}

/// Sample covariance with known zero mean (divisor rows).
inline Eigen::MatrixXd zero_mean_cov(const Eigen::MatrixXd& x) {
  return (x.transpose() * x) / static_cast<double>(x.rows());
}

/// Standard error of a zero-mean unit-variance product moment with
/// correlation c over `rows` samples.
inline double cov_se(double c, std::size_t rows) {
  return std::sqrt((1.0 + c * c) / static_cast<double>(rows));
}

inline double trapezoid(double lo, double hi, int steps, const auto& f) {
  const double h = (hi - lo) / steps;
  double s = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < steps; ++i) s += f(lo + i * h);
  return s * h;
}

/// Star with one latent Y ~ N(0,1), B = +/-1 with P(+1) = p and
/// X_i = rho_i B Y + Z_i: h(X|Y) by trapezoid rule, reducing the mixture to
/// one dimension along the whitened mean direction.
inline double star_conditional_entropy_oracle(const std::vector<double>& rho, double p) {
  const double log_2pie = std::log(2 * M_PI) + 1.0;
  double log_det_s = 0, c2 = 0;
  for (double r : rho) {
    log_det_s += std::log(1 - r * r);
    c2 += r * r / (1 - r * r);
  }
  const double c = std::sqrt(c2);
  auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * M_PI); };
  auto h1 = [&](double mu) {
    const double reach = std::abs(mu) + 12;
    return trapezoid(-reach, reach, 6000, [&](double t) {
      const double q = p * phi(t - mu) + (1 - p) * phi(t + mu);
      return q > 0 ? -q * std::log(q) : 0.0;
    });
  };
  const double eh1 = trapezoid(-9.0, 9.0, 3600, [&](double y) { return phi(y) * h1(c * y); });
  return 0.5 * log_det_s + 0.5 * static_cast<double>(rho.size() - 1) * log_2pie + eh1;
}

/// I(Y; X) of the same star: h(X) from the 3x3 determinant minus h(X|Y).
inline double star_mixture_mi_oracle(const std::vector<double>& rho, double p = 0.5) {
  const double s01 = rho[0] * rho[1], s02 = rho[0] * rho[2], s12 = rho[1] * rho[2];
  const double det_x = 1 + 2 * s01 * s02 * s12 - s01 * s01 - s02 * s02 - s12 * s12;
  const double hx = 0.5 * (3 * (std::log(2 * M_PI) + 1.0) + std::log(det_x));
  return hx - star_conditional_entropy_oracle(rho, p);
}

}  // namespace gtsynth::test
