#include "gtsynth/validation.hpp"

#include "gtsynth/errors.hpp"
#include "gtsynth/kernels.hpp"
#include "gtsynth/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace gtsynth {

CovarianceMatrix empirical_covariance(const Eigen::MatrixXd& samples, std::vector<std::string> labels) {
  if (samples.rows() < 2) throw InsufficientData("covariance needs at least 2 rows");
  if (static_cast<Eigen::Index>(labels.size()) != samples.cols())
    throw DomainError("label count does not match sample columns");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centred = samples.rowwise() - mean;
  CovarianceMatrix out;
  out.labels = std::move(labels);
  out.values = centred.transpose() * centred / static_cast<double>(samples.rows() - 1);
  return out;
}

Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& cov, std::uint64_t rows, std::uint64_t seed) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const auto d = cov.rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), d);
  Eigen::VectorXd xi(d);
  for (std::uint64_t r = 0; r < rows; ++r) {
    const rng::Stream st(seed, rng::Tag::Test, 0, r);
    for (Eigen::Index j = 0; j < d; ++j) xi(j) = st.normal(static_cast<std::uint64_t>(j));
    out.row(static_cast<Eigen::Index>(r)) = (l * xi).transpose();
  }
  return out;
}

double histogram_tv_normal(std::span<const double> x, int bins) {
  if (bins < 2) throw DomainError("need at least 2 bins");
  if (x.empty()) throw InsufficientData("no samples");
  const boost::math::normal nd;
  std::vector<double> edges;
  for (int i = 1; i < bins; ++i) edges.push_back(boost::math::quantile(nd, static_cast<double>(i) / bins));
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : x) counts[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin())] += 1.0;
  double tv = 0.0;
  const double n = static_cast<double>(x.size());
  for (double c : counts) tv += std::abs(c / n - 1.0 / bins);
  return 0.5 * tv;
}

double histogram_tv_two_sample(std::span<const double> a, std::span<const double> b, int bins) {
  if (bins < 2) throw DomainError("need at least 2 bins");
  if (a.empty() || b.empty()) throw InsufficientData("empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> edges;
  for (int i = 1; i < bins; ++i) edges.push_back(pooled[pooled.size() * static_cast<std::size_t>(i) / static_cast<std::size_t>(bins)]);
  auto hist = [&](std::span<const double> x) {
    std::vector<double> c(static_cast<std::size_t>(bins), 0.0);
    for (double v : x) c[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin())] += 1.0;
    for (double& v : c) v /= static_cast<double>(x.size());
    return c;
  };
  const auto ha = hist(a);
  const auto hb = hist(b);
  double tv = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) tv += std::abs(ha[i] - hb[i]);
  return 0.5 * tv;
}

double gaussian_kl(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const Eigen::MatrixXd& target) {
  Eigen::LLT<Eigen::MatrixXd> lt(target), lc(cov);
  if (lt.info() != Eigen::Success || lc.info() != Eigen::Success)
    throw DomainError("KL needs positive definite covariances");
  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& f) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.matrixLLT().rows(); ++i) s += 2.0 * std::log(f.matrixLLT()(i, i));
    return s;
  };
  const double tr = lt.solve(cov).trace();
  const double quad = mean.dot(lt.solve(mean));
  const double kl = 0.5 * (tr + quad - static_cast<double>(cov.rows()) + log_det(lt) - log_det(lc));
  return std::max(0.0, kl);
}

FidelityReport fidelity_report(const SynthesisRun& run, const CovarianceMatrix& target, int bins) {
  if (bins < 8) throw DomainError("bins must be >= 8");
  if (run.data.rows() < 2) throw InsufficientData("run has fewer than 2 slots");
  FidelityReport rep;
  rep.pooled_slots = static_cast<std::uint64_t>(run.data.rows());
  rep.bins = bins;
  rep.labels = run.observed_ids;
  const Eigen::MatrixXd tgt = target.block(run.observed_ids);
  const CovarianceMatrix emp = empirical_covariance(run.data, run.observed_ids);
  const Eigen::MatrixXd diff = emp.values - tgt;
  rep.max_cov_error = diff.cwiseAbs().maxCoeff();
  rep.frobenius_error = diff.norm();
  for (Eigen::Index j = 0; j < run.data.cols(); ++j) {
    const Eigen::VectorXd col = run.data.col(j);
    const double tv = histogram_tv_normal({col.data(), static_cast<std::size_t>(col.size())}, bins);
    rep.marginal_tv.push_back(tv);
    rep.max_marginal_tv = std::max(rep.max_marginal_tv, tv);
  }
  const Eigen::VectorXd mean = run.data.colwise().mean().transpose();
  rep.kl = gaussian_kl(mean, emp.values, tgt);
  rep.pinsker_tv_bound = std::sqrt(rep.kl / 2.0);
  return rep;
}

namespace {

double two_sided_p(double z) {
  const boost::math::normal nd;
  return 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z)));
}

// Per block: mean of each x_j, then mean of each x_j x_k (j <= k).
Eigen::MatrixXd block_features(const SynthesisRun& run, std::vector<std::string>& names) {
  const auto n = run.data.cols();
  const auto nf = n + n * (n + 1) / 2;
  names.clear();
  for (Eigen::Index j = 0; j < n; ++j) names.push_back("mean(" + run.observed_ids[static_cast<std::size_t>(j)] + ")");
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j; k < n; ++k)
      names.push_back("moment(" + run.observed_ids[static_cast<std::size_t>(j)] + "," +
                      run.observed_ids[static_cast<std::size_t>(k)] + ")");
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(run.blocks), nf);
  const auto nn = static_cast<Eigen::Index>(run.N);
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(run.blocks); ++b) {
    const auto rows = run.data.middleRows(b * nn, nn);
    f.row(b).head(n) = rows.colwise().mean();
    Eigen::Index c = n;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = j; k < n; ++k) f(b, c++) = rows.col(j).dot(rows.col(k)) / static_cast<double>(nn);
  }
  return f;
}

}  // namespace

std::vector<TestVerdict> sign_group_tests(const SynthesisRun& run, const IndependenceOptions& opt,
                                          std::uint64_t* groups_used) {
  if (opt.layer < 1 || opt.layer > static_cast<int>(run.codebooks.size()))
    throw DomainError("no codebook at layer " + std::to_string(opt.layer));
  if (run.lineage.size() != run.blocks) throw DomainError("run lineage is incomplete");
  std::map<std::uint64_t, std::vector<Eigen::Index>> groups;
  for (std::uint64_t b = 0; b < run.blocks; ++b)
    groups[run.lineage[b].b[static_cast<std::size_t>(opt.layer - 1)]].push_back(static_cast<Eigen::Index>(b));
  std::vector<std::uint64_t> used;
  for (const auto& [idx, members] : groups)
    if (members.size() >= opt.min_group) used.push_back(idx);
  if (used.size() < 2)
    throw InsufficientData("need at least 2 sign groups with >= " + std::to_string(opt.min_group) +
                           " blocks, found " + std::to_string(used.size()));
  if (groups_used) *groups_used = used.size();

  std::vector<std::string> names;
  const Eigen::MatrixXd f = block_features(run, names);
  const double per_test = opt.alpha / static_cast<double>(used.size() * names.size());
  std::vector<TestVerdict> out;
  for (std::uint64_t g : used) {
    std::vector<char> in(static_cast<std::size_t>(run.blocks), 0);
    for (Eigen::Index b : groups[g]) in[static_cast<std::size_t>(b)] = 1;
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      double s1 = 0, q1 = 0, s0 = 0, q0 = 0, n1 = 0, n0 = 0;
      for (Eigen::Index b = 0; b < f.rows(); ++b) {
        const double v = f(b, c);
        if (in[static_cast<std::size_t>(b)]) { s1 += v; q1 += v * v; n1 += 1; }
        else { s0 += v; q0 += v * v; n0 += 1; }
      }
      const double m1 = s1 / n1, m0 = s0 / n0;
      const double v1 = (q1 - n1 * m1 * m1) / (n1 - 1), v0 = (q0 - n0 * m0 * m0) / (n0 - 1);
      const double se = std::sqrt(v1 / n1 + v0 / n0);
      TestVerdict t;
      t.name = "group " + std::to_string(g) + " " + names[static_cast<std::size_t>(c)];
      t.statistic = se > 0 ? (m1 - m0) / se : 0.0;
      t.p_value = se > 0 ? two_sided_p(t.statistic) : 1.0;
      t.alpha = per_test;
      t.reject = t.p_value < per_test;
      out.push_back(std::move(t));
    }
  }
  return out;
}

TestVerdict cross_block_test(const SynthesisRun& run, std::uint64_t permutations, std::uint64_t seed,
                             double alpha) {
  if (run.blocks < 2 || run.N < 2) throw InsufficientData("cross-block test needs >= 2 blocks of length >= 2");
  const auto nn = static_cast<Eigen::Index>(run.N);
  Eigen::MatrixXd q(static_cast<Eigen::Index>(run.blocks), nn);
  for (Eigen::Index b = 0; b < q.rows(); ++b)
    for (Eigen::Index t = 0; t < nn; ++t) q(b, t) = run.data.row(b * nn + t).squaredNorm();
  const std::vector<double> stats = omp::permutation_statistics(q, seed, permutations);
  std::uint64_t ge = 0;
  for (std::size_t p = 1; p < stats.size(); ++p)
    if (stats[p] >= stats[0]) ++ge;
  TestVerdict v;
  v.name = "cross-block dependence";
  v.statistic = stats[0];
  v.p_value = static_cast<double>(1 + ge) / static_cast<double>(1 + permutations);
  v.alpha = alpha;
  v.reject = v.p_value < alpha;
  return v;
}

IndependenceReport independence_tests(const SynthesisRun& run, const IndependenceOptions& opt) {
  IndependenceReport rep;
  rep.layer = opt.layer;
  rep.family_alpha = opt.alpha;
  rep.sign_group = sign_group_tests(run, opt, &rep.groups);
  rep.per_test_alpha = rep.sign_group.empty() ? opt.alpha : rep.sign_group.front().alpha;
  rep.sign_groups_pass = std::none_of(rep.sign_group.begin(), rep.sign_group.end(),
                                      [](const TestVerdict& t) { return t.reject; });
  rep.cross_block = cross_block_test(run, opt.permutations, opt.seed, opt.alpha);
  return rep;
}

SynthesisRun shuffle_lineage(const SynthesisRun& run, std::uint64_t seed) {
  SynthesisRun out = run;
  const rng::Stream st(seed, rng::Tag::Permutation, std::uint64_t{1} << 32, 0);
  for (std::size_t i = out.lineage.size(); i > 1; --i) {
    const std::size_t j = st.below(i, i);
    std::swap(out.lineage[i - 1].b, out.lineage[j].b);
  }
  return out;
}

}  // namespace gtsynth
