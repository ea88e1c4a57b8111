#include "gtsynth/concavity.hpp"

#include "gtsynth/errors.hpp"
#include "gtsynth/rng.hpp"
#include "gtsynth/sign_model.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace gtsynth {

Eigen::VectorXd fd_gradient(const EtaFunctional& f, const Eigen::VectorXd& eta, double h) {
  Eigen::VectorXd g(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    Eigen::VectorXd p = eta, m = eta;
    p(i) += h;
    m(i) -= h;
    g(i) = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const EtaFunctional& f, const Eigen::VectorXd& eta, double h) {
  const Eigen::Index n = eta.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(eta);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd p = eta, m = eta;
    p(i) += h;
    m(i) -= h;
    hess(i, i) = (f(p) - 2.0 * f0 + f(m)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd pp = eta, pm = eta, mp = eta, mm = eta;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return hess;
}

double max_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

namespace {

constexpr double kLog2PiE = 1.8378770664093453 + 1.0;  // log(2 pi) + 1

double log_sum_exp(const double* v, std::size_t n) {
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// k = 1: X | Y = y, B = b is N(b c y, C) with Y ~ N(0,1). Along the
// whitened direction of c the two components are N(+-a y, 1); the other
// n-1 whitened coordinates are standard normal under both.
EtaFunctional quadrature_functional(const GaussianTree& tree, std::uint64_t panels_per_unit) {
  const CovarianceMatrix joint = joint_covariance(tree, SignAssignment::all_positive(1));
  const auto& obs = tree.observed();
  const int y = tree.latents()[0];
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd sxx(n, n);
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i) = joint.values(obs[static_cast<std::size_t>(i)], y);
    for (Eigen::Index j = 0; j < n; ++j)
      sxx(i, j) = joint.values(obs[static_cast<std::size_t>(i)], obs[static_cast<std::size_t>(j)]);
  }
  const Eigen::MatrixXd cc = sxx - c * c.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(cc);
  if (llt.info() != Eigen::Success) throw DomainError("conditional covariance is not positive definite");
  const double a = std::sqrt(c.dot(llt.solve(c)));
  double log_det_c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_c += 2.0 * std::log(llt.matrixLLT()(i, i));
  const double rest = 0.5 * static_cast<double>(n - 1) * kLog2PiE + 0.5 * log_det_c;
  const double width = 1.0 / static_cast<double>(std::max<std::uint64_t>(panels_per_unit, 1));

  using Rule = boost::math::quadrature::gauss<double, 30>;
  auto composite = [width](auto&& g, double lo, double hi) {
    const auto panels = static_cast<int>(std::ceil((hi - lo) / width));
    const double w = (hi - lo) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) acc += Rule::integrate(g, lo + p * w, lo + (p + 1) * w);
    return acc;
  };

  return [=](const Eigen::VectorXd& eta) {
    if (eta.size() != 2) throw DomainError("eta must have 2 entries for one latent node");
    const double wm = eta(0);  // b = -1
    const double wp = eta(1);  // b = +1
    const double s = wm + wp;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    auto inner = [&](double yv) {
      const double m = a * yv;
      auto q_log_q = [&](double t) {
        const double q = kInvSqrt2Pi * (wp * std::exp(-0.5 * (t - m) * (t - m)) +
                                        wm * std::exp(-0.5 * (t + m) * (t + m)));
        return q > 0.0 ? q * std::log(q) : 0.0;
      };
      const double reach = std::abs(m) + 10.0;
      return kInvSqrt2Pi * std::exp(-0.5 * yv * yv) * composite(q_log_q, -reach, reach);
    };
    const double iqlq = composite(inner, -10.0, 10.0);
    return s * std::log(s) - iqlq + s * rest;
  };
}

// k = 2, 3: per sample store the class densities relative to the proposal;
// the estimate is the mean of -(eta.F) log((eta.F)/(eta.G)), F joint and G
// latent-marginal densities, each term concave in eta.
EtaFunctional sampled_functional(const GaussianTree& tree, std::uint64_t samples, std::uint64_t seed) {
  const std::size_t k = tree.latent_count();
  const auto classes = enumerate_signs(k);
  const std::size_t nc = classes.size();
  const auto d = static_cast<Eigen::Index>(tree.node_count());
  const auto& lat = tree.latents();
  const auto kl = static_cast<Eigen::Index>(k);

  std::vector<Eigen::MatrixXd> chol, prec, lat_prec;
  double log_det_joint = 0.0, log_det_lat = 0.0;
  for (const auto& s : classes) {
    const Eigen::MatrixXd cov = joint_covariance(tree, s).values;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    chol.push_back(llt.matrixL());
    prec.push_back(llt.solve(Eigen::MatrixXd::Identity(d, d)));
    Eigen::MatrixXd lc(kl, kl);
    for (Eigen::Index i = 0; i < kl; ++i)
      for (Eigen::Index j = 0; j < kl; ++j) lc(i, j) = cov(lat[static_cast<std::size_t>(i)], lat[static_cast<std::size_t>(j)]);
    Eigen::LLT<Eigen::MatrixXd> lllt(lc);
    lat_prec.push_back(lllt.solve(Eigen::MatrixXd::Identity(kl, kl)));
    if (chol.size() == 1) {
      for (Eigen::Index i = 0; i < d; ++i) log_det_joint += 2.0 * std::log(llt.matrixLLT()(i, i));
      for (Eigen::Index i = 0; i < kl; ++i) log_det_lat += 2.0 * std::log(lllt.matrixLLT()(i, i));
    }
  }
  const double cf = -0.5 * log_det_joint - 0.5 * static_cast<double>(d) * 1.8378770664093453;
  const double cg = -0.5 * log_det_lat - 0.5 * static_cast<double>(kl) * 1.8378770664093453;

  auto fa = std::make_shared<Eigen::MatrixXd>(samples, nc);
  auto gb = std::make_shared<Eigen::MatrixXd>(samples, nc);
  auto scale = std::make_shared<Eigen::VectorXd>(samples);
  auto offset = std::make_shared<Eigen::VectorXd>(samples);
  std::vector<double> lf(nc), lg(nc);
  Eigen::VectorXd xi(d), v(d), yv(kl);
  for (std::uint64_t s = 0; s < samples; ++s) {
    const rng::Stream st(seed, rng::Tag::Concavity, 0, s);
    const std::size_t cls = st.below(0, nc);
    for (Eigen::Index i = 0; i < d; ++i) xi(i) = st.normal(static_cast<std::uint64_t>(2 + i));
    v = chol[cls] * xi;
    for (Eigen::Index i = 0; i < kl; ++i) yv(i) = v(lat[static_cast<std::size_t>(i)]);
    for (std::size_t c = 0; c < nc; ++c) {
      lf[c] = cf - 0.5 * v.dot(prec[c] * v);
      lg[c] = cg - 0.5 * yv.dot(lat_prec[c] * yv);
    }
    const double log_r = log_sum_exp(lf.data(), nc) - std::log(static_cast<double>(nc));
    const double mf = *std::max_element(lf.begin(), lf.end());
    const double mg = *std::max_element(lg.begin(), lg.end());
    for (std::size_t c = 0; c < nc; ++c) {
      (*fa)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = std::exp(lf[c] - mf);
      (*gb)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) = std::exp(lg[c] - mg);
    }
    (*scale)(static_cast<Eigen::Index>(s)) = std::exp(mf - log_r);
    (*offset)(static_cast<Eigen::Index>(s)) = mf - mg;
  }

  return [fa, gb, scale, offset, nc](const Eigen::VectorXd& eta) {
    if (static_cast<std::size_t>(eta.size()) != nc)
      throw DomainError("eta must have " + std::to_string(nc) + " entries");
    const Eigen::VectorXd a = (*fa) * eta;
    const Eigen::VectorXd b = (*gb) * eta;
    double acc = 0.0;
    for (Eigen::Index s = 0; s < a.size(); ++s)
      acc -= (*scale)(s) * a(s) * (std::log(a(s)) - std::log(b(s)) + (*offset)(s));
    return acc / static_cast<double>(a.size());
  };
}

}  // namespace

EtaFunctional conditional_entropy_functional(const GaussianTree& tree, std::uint64_t budget,
                                             std::uint64_t seed) {
  const std::size_t k = tree.latent_count();
  if (k == 0 || k > kConcavityMaxLatents)
    throw DomainError("concavity check supports 1 to 3 latent nodes, tree has " + std::to_string(k));
  if (k == 1) return quadrature_functional(tree, budget);
  return sampled_functional(tree, budget, seed);
}

std::vector<Eigen::VectorXd> interior_eta_points(std::size_t k, std::size_t count) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    std::vector<double> pi(k);
    for (std::size_t j = 0; j < k; ++j) pi[j] = j % 2 == 0 ? e : 1.0 - e;
    const auto eta = eta_from_pi(pi);
    out.push_back(Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(eta.size())));
  }
  return out;
}

ConcavityResult concavity_check(const EtaFunctional& f, const std::vector<Eigen::VectorXd>& points,
                                double fd_step) {
  if (points.empty()) throw DomainError("no eta points");
  ConcavityResult out;
  out.max_eigenvalue = -INFINITY;
  for (const auto& p : points) {
    const double ev = max_eigenvalue(fd_hessian(f, p, fd_step));
    out.point_max_eigenvalues.push_back(ev);
    out.max_eigenvalue = std::max(out.max_eigenvalue, ev);
  }
  const auto n = points.front().size();
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  out.gradient_at_uniform = fd_gradient(f, uniform, fd_step);
  out.gradient_spread = out.gradient_at_uniform.maxCoeff() - out.gradient_at_uniform.minCoeff();
  return out;
}

ConcavityResult concavity_check(const GaussianTree& tree, const std::vector<Eigen::VectorXd>& points,
                                std::uint64_t budget, std::uint64_t seed) {
  return concavity_check(conditional_entropy_functional(tree, budget, seed), points);
}

}  // namespace gtsynth
