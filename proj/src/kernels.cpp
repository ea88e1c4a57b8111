#include "gtsynth/kernels.hpp"

#include "gtsynth/parallel.hpp"
#include "gtsynth/rng.hpp"
#include "gtsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gtsynth {

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double m = -INFINITY;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct MixtureScratch {
  Eigen::VectorXd xi, base, y, w, g;
  std::vector<double> z, yl, lw, lws;
  explicit MixtureScratch(const MixtureKernel& k)
      : xi(k.inputs), base(k.inputs), y(k.inputs), w(k.inputs), g(k.inputs),
        z(static_cast<std::size_t>(k.outputs)), yl(static_cast<std::size_t>(k.outputs)),
        lw(k.eta.size()), lws(k.eta.size()) {}
};

// E over the true upper branch of D = log N_beta(x) - log p(x | y), for one
// draw of the standard normals of sample s.
double mixture_sample(const MixtureKernel& k, std::uint64_t seed, std::uint64_t s, MixtureScratch& w) {
  const rng::Stream st(seed, rng::Tag::MonteCarlo, k.stream_layer, s);
  for (int i = 0; i < k.inputs; ++i) w.xi(i) = st.normal(static_cast<std::uint64_t>(i));
  for (int r = 0; r < k.outputs; ++r)
    w.z[static_cast<std::size_t>(r)] = st.normal(static_cast<std::uint64_t>(k.inputs + r));
  w.base.noalias() = k.chol * w.xi;

  const std::size_t nc = k.eta.size();
  double acc = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    w.y = k.branch_signs[c].cwiseProduct(w.base);
    // Lower signs are fixed to +1: flipping an output coordinate flips every
    // component mean with it, leaving D unchanged.
    w.g.setZero();
    for (int r = 0; r < k.outputs; ++r) {
      const auto ru = static_cast<std::size_t>(r);
      const int p = k.parent_pos[ru];
      const double sd = k.noise_sd[ru];
      w.yl[ru] = k.coef[ru] * k.branch_signs[c](p) * w.y(p) + sd * w.z[ru];
      w.g(p) += k.coef[ru] * w.yl[ru] * w.y(p) / (sd * sd);
    }
    double own = 0.0;
    for (std::size_t d = 0; d < nc; ++d) {
      w.w = k.branch_signs[d].cwiseProduct(w.y);
      const double q = w.w.dot(k.precision * w.w);
      double sg = 0.0;
      for (int u : k.sign_pos) sg += k.branch_signs[d](u) * w.g(u);
      w.lw[d] = k.log_eta[d] - 0.5 * q;
      w.lws[d] = w.lw[d] + sg;
      if (d == c) own = sg;
    }
    acc += k.eta[c] * (own - log_sum_exp(w.lws) + log_sum_exp(w.lw));
  }
  return acc;
}

Moments mixture_chunk(const MixtureKernel& k, std::uint64_t seed, std::uint64_t begin, std::uint64_t end) {
  MixtureScratch w(k);
  Moments m;
  for (std::uint64_t s = begin; s < end; ++s) {
    const double v = mixture_sample(k, seed, s, w);
    m.sum += v;
    m.sumsq += v * v;
  }
  m.count = end - begin;
  return m;
}

Moments combine(const std::vector<Moments>& parts) {
  Moments out;
  for (const Moments& p : parts) {
    out.sum += p.sum;
    out.sumsq += p.sumsq;
    out.count += p.count;
  }
  return out;
}

std::uint64_t chunk_count(std::uint64_t n) { return (n + kKernelChunk - 1) / kKernelChunk; }

double permuted_statistic(const Eigen::MatrixXd& q, std::uint64_t seed, std::uint64_t p) {
  const auto blocks = q.rows();
  const auto slots = q.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(slots);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(slots));
  for (Eigen::Index i = 0; i < blocks; ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const rng::Stream st(seed, rng::Tag::Permutation, p, static_cast<std::uint64_t>(i));
    for (Eigen::Index j = slots - 1; j > 0; --j) {
      const auto r = static_cast<Eigen::Index>(st.below(static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(j + 1)));
      std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(r)]);
    }
    for (Eigen::Index t = 0; t < slots; ++t) mean(t) += q(i, order[static_cast<std::size_t>(t)]);
  }
  mean /= static_cast<double>(blocks);
  const double mu = mean.mean();
  return (mean.array() - mu).square().sum() / static_cast<double>(slots - 1);
}

}  // namespace

double cross_block_statistic(const Eigen::MatrixXd& q) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) mean += q.row(i).transpose();
  mean /= static_cast<double>(q.rows());
  const double mu = mean.mean();
  return (mean.array() - mu).square().sum() / static_cast<double>(q.cols() - 1);
}

namespace serial {

Moments mixture_divergence(const MixtureKernel& k, std::uint64_t seed, std::uint64_t samples) {
  std::vector<Moments> parts(chunk_count(samples));
  for (std::uint64_t c = 0; c < parts.size(); ++c)
    parts[c] = mixture_chunk(k, seed, c * kKernelChunk, std::min(samples, (c + 1) * kKernelChunk));
  return combine(parts);
}

Eigen::MatrixXd emit_blocks(const Synthesizer& s, std::uint64_t first, std::uint64_t count) {
  const std::uint64_t n = s.config().N;
  const std::size_t nobs = s.observed_count();
  std::vector<double> buf(count * n * nobs);
  for (std::uint64_t b = 0; b < count; ++b) s.emit_block(first + b, buf.data() + b * n * nobs);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buf.data(), static_cast<Eigen::Index>(count * n), static_cast<Eigen::Index>(nobs));
}

std::vector<double> permutation_statistics(const Eigen::MatrixXd& q, std::uint64_t seed,
                                           std::uint64_t permutations) {
  std::vector<double> out(permutations + 1);
  out[0] = cross_block_statistic(q);
  for (std::uint64_t p = 1; p <= permutations; ++p) out[p] = permuted_statistic(q, seed, p);
  return out;
}

}  // namespace serial

namespace omp {

Moments mixture_divergence(const MixtureKernel& k, std::uint64_t seed, std::uint64_t samples) {
  const auto chunks = static_cast<std::int64_t>(chunk_count(samples));
  std::vector<Moments> parts(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (std::int64_t c = 0; c < chunks; ++c) {
    const auto cu = static_cast<std::uint64_t>(c);
    parts[static_cast<std::size_t>(c)] =
        mixture_chunk(k, seed, cu * kKernelChunk, std::min(samples, (cu + 1) * kKernelChunk));
  }
  return combine(parts);
}

Eigen::MatrixXd emit_blocks(const Synthesizer& s, std::uint64_t first, std::uint64_t count) {
  const std::uint64_t n = s.config().N;
  const std::size_t nobs = s.observed_count();
  std::vector<double> buf(count * n * nobs);
  const auto total = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 16) num_threads(worker_count())
  for (std::int64_t b = 0; b < total; ++b) {
    const auto bu = static_cast<std::uint64_t>(b);
    s.emit_block(first + bu, buf.data() + bu * n * nobs);
  }
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buf.data(), static_cast<Eigen::Index>(count * n), static_cast<Eigen::Index>(nobs));
}

std::vector<double> permutation_statistics(const Eigen::MatrixXd& q, std::uint64_t seed,
                                           std::uint64_t permutations) {
  std::vector<double> out(permutations + 1);
  out[0] = cross_block_statistic(q);
  const auto total = static_cast<std::int64_t>(permutations);
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (std::int64_t p = 1; p <= total; ++p)
    out[static_cast<std::size_t>(p)] = permuted_statistic(q, seed, static_cast<std::uint64_t>(p));
  return out;
}

}  // namespace omp

}  // namespace gtsynth
