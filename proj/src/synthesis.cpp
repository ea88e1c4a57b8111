#include "gtsynth/synthesis.hpp"

#include "gtsynth/errors.hpp"
#include "gtsynth/kernels.hpp"
#include "gtsynth/rng.hpp"

#include <algorithm>
#include <cmath>

namespace gtsynth {

void check_config(const SynthesisConfig& c) {
  if (c.N < 1) throw DomainError("block length N must be >= 1");
  if (c.blocks < 1) throw DomainError("blocks must be >= 1");
  if (!(c.rate_margin >= 1.0) || !std::isfinite(c.rate_margin))
    throw DomainError("rate margin must be a finite value >= 1");
  if (!(c.noise_scale >= 0.0) || !std::isfinite(c.noise_scale))
    throw DomainError("noise scale must be finite and >= 0");
  for (const auto& [m, size] : c.force_y_size)
    if (size < 1) throw DomainError("forced codebook size must be >= 1 at layer " + std::to_string(m));
}

std::uint64_t codebook_size(std::uint64_t n, double rate) {
  if (!std::isfinite(rate) || rate < 0.0) throw DomainError("rate must be finite and >= 0");
  const double exponent = static_cast<double>(n) * rate;
  if (exponent > kMaxLogCodebookSize)
    throw GuardExceeded("codebook size exp(" + std::to_string(exponent) +
                        ") exceeds the 2^62 index space; lower N or the rate margin");
  double m = std::exp(exponent);
  // exp(N log k / N) can land a few ulps above k.
  const double r = std::round(m);
  m = std::abs(m - r) <= 1e-12 * r ? r : std::ceil(m);
  return m < 1.0 ? 1 : static_cast<std::uint64_t>(m);
}

std::vector<int> layer_sign_slots(const LayeredTree& lt, const GaussianTree& tree, int l) {
  const std::vector<int> lat = lt.latents_at(tree, l);
  std::vector<int> slots;
  for (int v : lt.layer(l)) {
    int s = -1;
    for (std::size_t j = 0; j < lat.size(); ++j)
      if (lat[j] == v) s = static_cast<int>(j);
    slots.push_back(s);
  }
  return slots;
}

void propagate_slot(const LayerChannel& ch, const std::vector<int>& up_slots, int k_up,
                    const std::vector<int>& low_slots, int k_low, std::span<const double> in,
                    std::uint64_t beta_up, std::uint64_t beta_low, std::span<const double> z,
                    double noise_scale, std::span<double> out) {
  for (std::size_t r = 0; r < ch.rows(); ++r) {
    const int p = ch.parent_pos[r];
    const double s = branch_sign(beta_up, k_up, up_slots[static_cast<std::size_t>(p)]) *
                     branch_sign(beta_low, k_low, low_slots[r]);
    out[r] = ch.coef[r] * s * in[static_cast<std::size_t>(p)] +
             noise_scale * std::sqrt(ch.noise_var[r]) * z[r];
  }
}

Eigen::MatrixXd propagate_layer(const Eigen::MatrixXd& upper, const std::vector<std::uint64_t>& b_codeword,
                                const LayerChannel& ch, const std::vector<int>& up_slots, int k_up,
                                const std::vector<int>& low_slots, int k_low, std::uint64_t seed,
                                std::uint64_t item, double noise_scale) {
  const std::uint64_t n = b_codeword.size();
  const std::uint64_t up_br = std::uint64_t{1} << k_up;
  const std::uint64_t low_br = std::uint64_t{1} << k_low;
  const auto dim = static_cast<Eigen::Index>(ch.rows());
  if (static_cast<std::uint64_t>(upper.rows()) != n * up_br)
    throw DomainError("upper codeword has the wrong number of rows");
  const rng::Stream noise(seed, rng::Tag::CodewordNoise, static_cast<std::uint64_t>(ch.layer), item);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n * low_br), dim);
  std::vector<double> in(static_cast<std::size_t>(upper.cols())), z(ch.rows()), o(ch.rows());
  for (std::uint64_t t = 0; t < n; ++t) {
    const std::uint64_t bu = b_codeword[t];
    if (bu >= up_br) throw DomainError("branch index out of range");
    for (Eigen::Index j = 0; j < upper.cols(); ++j)
      in[static_cast<std::size_t>(j)] = upper(static_cast<Eigen::Index>(t * up_br + bu), j);
    for (std::uint64_t bl = 0; bl < low_br; ++bl) {
      for (std::size_t r = 0; r < ch.rows(); ++r)
        z[r] = noise.normal((t * low_br + bl) * ch.rows() + r);
      propagate_slot(ch, up_slots, k_up, low_slots, k_low, in, bu, bl, z, noise_scale, o);
      for (std::size_t r = 0; r < ch.rows(); ++r)
        out(static_cast<Eigen::Index>(t * low_br + bl), static_cast<Eigen::Index>(r)) = o[r];
    }
  }
  return out;
}

std::vector<RateBounds> all_rate_bounds(const LayeredTree& lt, const GaussianTree& tree,
                                        std::uint64_t samples, std::uint64_t seed) {
  std::vector<RateBounds> out;
  for (int l = 0; l < lt.top_layer(); ++l) out.push_back(layer_rate_bounds(lt, tree, l, {}, samples, seed));
  return out;
}

// ---- Synthesizer -----------------------------------------------------------

struct Synthesizer::Chain {
  std::vector<Eigen::VectorXd> value;   // index layer
  std::vector<std::uint64_t> branch;    // index layer
};

Synthesizer::Synthesizer(const GaussianTree& tree, LayeredTree lt, SynthesisConfig cfg,
                         std::vector<RateBounds> rates)
    : tree_(&tree), lt_(std::move(lt)), cfg_(std::move(cfg)), rates_(std::move(rates)) {
  check_config(cfg_);
  const int top = lt_.top_layer();
  if (top < 1) throw DomainError("tree has a single layer; nothing to synthesize");
  if (rates_.empty()) rates_ = all_rate_bounds(lt_, tree, cfg_.rate_samples, cfg_.seed);
  if (static_cast<int>(rates_.size()) != top)
    throw DomainError("expected rate bounds for " + std::to_string(top) + " channels");

  for (int l = 0; l < top; ++l) channels_.push_back(build_layer_channel(lt_, tree, l));
  for (int l = 0; l <= top; ++l) {
    slots_.push_back(layer_sign_slots(lt_, tree, l));
    pi_.push_back(layer_pi(lt_, tree, l));
  }

  shapes_.resize(static_cast<std::size_t>(top) + 1);
  for (int m = 1; m <= top; ++m) {
    CodebookShape& s = shapes_[static_cast<std::size_t>(m)];
    const RateBounds& rb = rates_[static_cast<std::size_t>(m - 1)];
    s.layer = m;
    s.r_y = cfg_.rate_margin * rb.y_rate_lb;
    s.r_b = std::max(0.0, cfg_.rate_margin * rb.sum_rate_lb - s.r_y);
    if (auto it = cfg_.rate_override.find(m - 1); it != cfg_.rate_override.end()) {
      s.r_y = it->second.r_y;
      s.r_b = it->second.r_b;
    }
    s.m_y = codebook_size(cfg_.N, s.r_y);
    s.m_b = codebook_size(cfg_.N, s.r_b);
    if (auto it = cfg_.force_y_size.find(m); it != cfg_.force_y_size.end()) s.m_y = it->second;
    s.dim = static_cast<int>(lt_.layer(m).size());
    s.signs = static_cast<int>(pi_[static_cast<std::size_t>(m)].size());
    if (s.signs > 20) throw GuardExceeded("more than 20 signs in layer " + std::to_string(m));
    s.branches = std::uint64_t{1} << s.signs;
  }

  const UpperLaw up = upper_law(lt_, tree, top - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(up.cov);
  if (llt.info() != Eigen::Success) throw DomainError("top-layer covariance is not positive definite");
  top_chol_ = llt.matrixL();

  for (int v : tree.observed()) {
    const int l = lt_.layer_of[static_cast<std::size_t>(v)];
    const auto& nodes = lt_.layer(l);
    obs_layer_.push_back(l);
    obs_pos_.push_back(static_cast<int>(std::find(nodes.begin(), nodes.end(), v) - nodes.begin()));
  }
}

std::uint64_t Synthesizer::sign_branch(int m, std::uint64_t b, std::uint64_t t) const {
  const auto& pi = pi_[static_cast<std::size_t>(m)];
  if (pi.empty()) return 0;
  const rng::Stream st(cfg_.seed, rng::Tag::SignCodeword, static_cast<std::uint64_t>(m), b);
  std::uint64_t beta = 0;
  for (std::size_t j = 0; j < pi.size(); ++j)
    beta = (beta << 1) | (st.uniform(t * pi.size() + j) < pi[j] ? 1u : 0u);
  return beta;
}

std::pair<std::uint64_t, std::uint64_t> Synthesizer::parent(int m, std::uint64_t i) const {
  if (m < 1 || m >= top_layer()) throw DomainError("layer " + std::to_string(m) + " has no parent codebook");
  const CodebookShape& up = codebook(m + 1);
  const rng::Stream st(cfg_.seed, rng::Tag::Parent, static_cast<std::uint64_t>(m), i);
  return {st.below(0, up.m_y), st.below(1, up.m_b)};
}

void Synthesizer::top_value(std::uint64_t i, std::uint64_t t, std::uint64_t beta, double* out) const {
  const int top = top_layer();
  const CodebookShape& s = codebook(top);
  const rng::Stream st(cfg_.seed, rng::Tag::TopCodeword, static_cast<std::uint64_t>(top), i);
  const auto dim = static_cast<std::uint64_t>(s.dim);
  Eigen::VectorXd xi(s.dim);
  for (std::uint64_t j = 0; j < dim; ++j) xi(static_cast<Eigen::Index>(j)) = st.normal((t * s.branches + beta) * dim + j);
  const Eigen::VectorXd y = top_chol_ * xi;
  const auto& slots = slots_[static_cast<std::size_t>(top)];
  for (std::uint64_t j = 0; j < dim; ++j)
    out[j] = branch_sign(beta, s.signs, slots[j]) * y(static_cast<Eigen::Index>(j));
}

Eigen::VectorXd Synthesizer::codeword_value(int m, std::uint64_t i, std::uint64_t t,
                                            std::uint64_t beta) const {
  const int top = top_layer();
  if (m < 1 || m > top) throw DomainError("no codebook at layer " + std::to_string(m));
  const CodebookShape& s = codebook(m);
  if (i >= s.m_y || beta >= s.branches || t >= cfg_.N) throw DomainError("codeword index out of range");
  Eigen::VectorXd out(s.dim);
  if (m == top) {
    top_value(i, t, beta, out.data());
    return out;
  }
  const auto [py, pb] = parent(m, i);
  const std::uint64_t bu = sign_branch(m + 1, pb, t);
  const Eigen::VectorXd in = codeword_value(m + 1, py, t, bu);
  const LayerChannel& ch = channels_[static_cast<std::size_t>(m)];
  const rng::Stream noise(cfg_.seed, rng::Tag::CodewordNoise, static_cast<std::uint64_t>(m), i);
  std::vector<double> z(ch.rows());
  for (std::size_t r = 0; r < ch.rows(); ++r) z[r] = noise.normal((t * s.branches + beta) * ch.rows() + r);
  propagate_slot(ch, slots_[static_cast<std::size_t>(m + 1)], codebook(m + 1).signs,
                 slots_[static_cast<std::size_t>(m)], s.signs, {in.data(), static_cast<std::size_t>(in.size())},
                 bu, beta, z, cfg_.noise_scale, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Lineage Synthesizer::lineage(std::uint64_t block) const {
  const int top = top_layer();
  Lineage lin;
  const rng::Stream st(cfg_.seed, rng::Tag::Block, 0, block);
  lin.y.push_back(st.below(0, codebook(1).m_y));
  lin.b.push_back(st.below(1, codebook(1).m_b));
  for (int m = 1; m < top; ++m) {
    const auto [py, pb] = parent(m, lin.y.back());
    lin.y.push_back(py);
    lin.b.push_back(pb);
  }
  return lin;
}

void Synthesizer::fill_chain(const Lineage& lin, std::uint64_t t, Chain& c) const {
  const int top = top_layer();
  c.value.resize(static_cast<std::size_t>(top) + 1);
  c.branch.resize(static_cast<std::size_t>(top) + 1);
  for (int m = top; m >= 1; --m) {
    const auto mi = static_cast<std::size_t>(m);
    const CodebookShape& s = codebook(m);
    c.branch[mi] = sign_branch(m, lin.b[mi - 1], t);
    c.value[mi].resize(s.dim);
    if (m == top) {
      top_value(lin.y[mi - 1], t, c.branch[mi], c.value[mi].data());
      continue;
    }
    const LayerChannel& ch = channels_[mi];
    const rng::Stream noise(cfg_.seed, rng::Tag::CodewordNoise, static_cast<std::uint64_t>(m), lin.y[mi - 1]);
    std::vector<double> z(ch.rows());
    for (std::size_t r = 0; r < ch.rows(); ++r)
      z[r] = noise.normal((t * s.branches + c.branch[mi]) * ch.rows() + r);
    const Eigen::VectorXd& in = c.value[mi + 1];
    propagate_slot(ch, slots_[mi + 1], codebook(m + 1).signs, slots_[mi], s.signs,
                   {in.data(), static_cast<std::size_t>(in.size())}, c.branch[mi + 1], c.branch[mi], z,
                   cfg_.noise_scale, {c.value[mi].data(), static_cast<std::size_t>(s.dim)});
  }
}

void Synthesizer::emit_block(std::uint64_t block, double* out) const {
  const Lineage lin = lineage(block);
  const LayerChannel& ch0 = channels_[0];
  const rng::Stream emit(cfg_.seed, rng::Tag::Emit, 0, block);
  const std::size_t nobs = obs_layer_.size();
  Chain c;
  std::vector<double> z(ch0.rows()), x0(ch0.rows());
  for (std::uint64_t t = 0; t < cfg_.N; ++t) {
    fill_chain(lin, t, c);
    for (std::size_t r = 0; r < ch0.rows(); ++r) z[r] = emit.normal(t * ch0.rows() + r);
    const Eigen::VectorXd& in = c.value[1];
    propagate_slot(ch0, slots_[1], codebook(1).signs, slots_[0], 0,
                   {in.data(), static_cast<std::size_t>(in.size())}, c.branch[1], 0, z, cfg_.noise_scale, x0);
    double* row = out + t * nobs;
    for (std::size_t j = 0; j < nobs; ++j) {
      const int l = obs_layer_[j];
      const auto pos = static_cast<std::size_t>(obs_pos_[j]);
      row[j] = l == 0 ? x0[pos] : c.value[static_cast<std::size_t>(l)](static_cast<Eigen::Index>(pos));
    }
  }
}

Codebook Synthesizer::materialize(int m) const {
  const CodebookShape& s = codebook(m);
  const double doubles = static_cast<double>(s.m_y) * static_cast<double>(cfg_.N) *
                             static_cast<double>(s.branches) * s.dim +
                         static_cast<double>(s.m_b) * static_cast<double>(cfg_.N);
  if (doubles > static_cast<double>(kMaterializeLimit))
    throw GuardExceeded("codebook at layer " + std::to_string(m) + " needs " + std::to_string(doubles) +
                        " doubles, above the materialisation limit");
  Codebook cb;
  cb.shape = s;
  for (std::uint64_t i = 0; i < s.m_y; ++i) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(cfg_.N * s.branches), s.dim);
    for (std::uint64_t t = 0; t < cfg_.N; ++t)
      for (std::uint64_t beta = 0; beta < s.branches; ++beta)
        w.row(static_cast<Eigen::Index>(t * s.branches + beta)) = codeword_value(m, i, t, beta).transpose();
    cb.y.push_back(std::move(w));
  }
  for (std::uint64_t i = 0; i < s.m_b; ++i) {
    std::vector<std::uint64_t> seq(cfg_.N);
    for (std::uint64_t t = 0; t < cfg_.N; ++t) seq[t] = sign_branch(m, i, t);
    cb.b.push_back(std::move(seq));
  }
  return cb;
}

SynthesisRun synthesize(const Synthesizer& s) {
  SynthesisRun run;
  for (int v : s.tree().observed()) run.observed_ids.push_back(s.tree().node(v).id);
  run.N = s.config().N;
  run.blocks = s.config().blocks;
  run.data = omp::emit_blocks(s, 0, run.blocks);
  run.lineage.reserve(run.blocks);
  for (std::uint64_t b = 0; b < run.blocks; ++b) run.lineage.push_back(s.lineage(b));
  for (int m = 1; m <= s.top_layer(); ++m) run.codebooks.push_back(s.codebook(m));
  run.rates = s.rates();
  return run;
}

SynthesisRun synthesize(const GaussianTree& tree, const LayeredTree& lt, const SynthesisConfig& cfg) {
  return synthesize(Synthesizer(tree, lt, cfg));
}

}  // namespace gtsynth
