#pragma once

// Layered random-codebook synthesis. Codebooks are never stored: codeword
// i of layer m at slot t and sign branch beta is a pure function of
// (seed, m, i, t, beta), so cardinalities far beyond memory are usable and
// any block can be regenerated on its own.
//
// Layer m >= 1 holds a Y-codebook of M_Y mixture codewords (one Gaussian
// sequence per realisation of the layer's signs B(m)) and a B-codebook of
// M_B Bernoulli(pi) sign sequences. Both are sized by the rate bounds of
// channel m-1. A lower codeword is generated from a uniformly chosen
// (y, b) pair of the layer above: at slot t the b-codeword picks the branch
// of the y-codeword that is sent through the channel.

#include "gtsynth/info_rates.hpp"
#include "gtsynth/layering.hpp"
#include "gtsynth/tree_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gtsynth {

inline constexpr double kMaxLogCodebookSize = 42.975125194716098;  // log(2^62)
inline constexpr std::uint64_t kMaterializeLimit = std::uint64_t{1} << 25;  // doubles

struct RatePair {
  double r_y = 0.0;
  double r_b = 0.0;
};

struct SynthesisConfig {
  std::uint64_t N = 64;
  double rate_margin = 1.1;
  std::uint64_t seed = 0;
  std::uint64_t blocks = 1000;
  std::uint64_t rate_samples = 20000;
  /// Replaces the margin-scaled rates of channel l (keyed by l).
  std::map<int, RatePair> rate_override;
  /// Forces M_Y of codebook layer m (keyed by m); test hook.
  std::map<int, std::uint64_t> force_y_size;
  /// Multiplies every channel noise standard deviation; test hook.
  double noise_scale = 1.0;
};

/// Throws DomainError on N = 0, blocks = 0, rate_margin < 1 or a non-finite
/// / negative noise scale.
void check_config(const SynthesisConfig& c);

struct CodebookShape {
  int layer = 0;
  double r_y = 0.0;
  double r_b = 0.0;
  std::uint64_t m_y = 1;
  std::uint64_t m_b = 1;
  int dim = 0;          // nodes in the layer
  int signs = 0;        // k_m
  std::uint64_t branches = 1;  // 2^k_m
};

/// ceil(exp(N R)); throws GuardExceeded beyond 2^62 and DomainError on a
/// non-finite or negative rate.
std::uint64_t codebook_size(std::uint64_t n, double rate);

/// One codeword index pair per layer 1..L (entry m-1 is layer m).
struct Lineage {
  std::vector<std::uint64_t> y;
  std::vector<std::uint64_t> b;
};

/// Materialised codebook (tests and small runs only).
struct Codebook {
  CodebookShape shape;
  /// y[i] is (N * branches) x dim, row t * branches + beta.
  std::vector<Eigen::MatrixXd> y;
  /// b[i][t] is the branch index selected at slot t.
  std::vector<std::vector<std::uint64_t>> b;
};

/// Sign factors of a layer: position in the layer -> sign slot among the
/// layer's latents (canonical order), or -1.
std::vector<int> layer_sign_slots(const LayeredTree& lt, const GaussianTree& tree, int l);

/// Bit of sign slot j in branch beta of a layer with k signs (first slot
/// most significant), as +1 / -1; slot -1 gives +1.
inline double branch_sign(std::uint64_t beta, int k, int slot) {
  if (slot < 0) return 1.0;
  return ((beta >> (k - 1 - slot)) & 1u) ? 1.0 : -1.0;
}

/// One channel use: out_r = coef_r s_up s_low in[parent_r] + noise_scale sd_r z_r,
/// s_up from the upper branch beta_up, s_low from the lower branch beta_low.
void propagate_slot(const LayerChannel& ch, const std::vector<int>& up_slots, int k_up,
                    const std::vector<int>& low_slots, int k_low, std::span<const double> in,
                    std::uint64_t beta_up, std::uint64_t beta_low, std::span<const double> z,
                    double noise_scale, std::span<double> out);

/// Lower mixture codeword from an upper codeword's branch sequence:
/// upper is (N * 2^k_up) x dim_up, b_codeword holds N upper branch indices.
/// Returns (N * 2^k_low) x dim_low with noise from (seed, layer, item).
Eigen::MatrixXd propagate_layer(const Eigen::MatrixXd& upper, const std::vector<std::uint64_t>& b_codeword,
                                const LayerChannel& ch, const std::vector<int>& up_slots, int k_up,
                                const std::vector<int>& low_slots, int k_low, std::uint64_t seed,
                                std::uint64_t item, double noise_scale = 1.0);

class Synthesizer {
 public:
  /// rates[l] are the bounds of channel l; computed when empty.
  Synthesizer(const GaussianTree& tree, LayeredTree lt, SynthesisConfig cfg,
              std::vector<RateBounds> rates = {});

  const GaussianTree& tree() const { return *tree_; }
  const LayeredTree& layered() const { return lt_; }
  const SynthesisConfig& config() const { return cfg_; }
  const std::vector<RateBounds>& rates() const { return rates_; }
  int top_layer() const { return lt_.top_layer(); }
  /// Codebook of layer m, 1 <= m <= L.
  const CodebookShape& codebook(int m) const { return shapes_[static_cast<std::size_t>(m)]; }
  std::size_t observed_count() const { return obs_layer_.size(); }

  /// Branch of B-codeword `b` of layer m at slot t.
  std::uint64_t sign_branch(int m, std::uint64_t b, std::uint64_t t) const;
  /// Upper (y, b) pair that generated Y-codeword i of layer m < L.
  std::pair<std::uint64_t, std::uint64_t> parent(int m, std::uint64_t i) const;
  /// Value of Y-codeword i of layer m at slot t, branch beta (one entry per layer node).
  Eigen::VectorXd codeword_value(int m, std::uint64_t i, std::uint64_t t, std::uint64_t beta) const;

  Lineage lineage(std::uint64_t block) const;
  /// Observed values of one block into out (N x n_obs, row-major), tree observed order.
  void emit_block(std::uint64_t block, double* out) const;

  /// Throws GuardExceeded if M_Y * N * branches * dim + M_B * N exceeds the memory guard.
  Codebook materialize(int m) const;

 private:
  struct Chain;
  void fill_chain(const Lineage& lin, std::uint64_t t, Chain& ch) const;
  void top_value(std::uint64_t i, std::uint64_t t, std::uint64_t beta, double* out) const;

  const GaussianTree* tree_;
  LayeredTree lt_;
  SynthesisConfig cfg_;
  std::vector<RateBounds> rates_;
  std::vector<CodebookShape> shapes_;   // index m, entry 0 unused
  std::vector<LayerChannel> channels_;  // index l
  std::vector<std::vector<int>> slots_; // index layer
  std::vector<std::vector<double>> pi_; // index layer
  Eigen::MatrixXd top_chol_;
  std::vector<int> obs_layer_;          // per observed column
  std::vector<int> obs_pos_;
};

/// Rate bounds of every channel at the tree's own pi.
std::vector<RateBounds> all_rate_bounds(const LayeredTree& lt, const GaussianTree& tree,
                                        std::uint64_t samples, std::uint64_t seed);

struct SynthesisRun {
  std::vector<std::string> observed_ids;
  std::uint64_t N = 0;
  std::uint64_t blocks = 0;
  /// (blocks * N) x n_obs, row block * N + t.
  Eigen::MatrixXd data;
  std::vector<Lineage> lineage;
  std::vector<CodebookShape> codebooks;  // layers 1..L
  std::vector<RateBounds> rates;
};

SynthesisRun synthesize(const Synthesizer& s);
SynthesisRun synthesize(const GaussianTree& tree, const LayeredTree& lt, const SynthesisConfig& cfg);

}  // namespace gtsynth
