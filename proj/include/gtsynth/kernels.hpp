#pragma once

// Hot loops in two builds: serial:: is the reference, omp:: splits the
// same fixed-size chunks across OpenMP workers and reduces the per-chunk
// partials in chunk order, so both return bit-identical results.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace gtsynth {

class Synthesizer;

/// Precomputed pieces of one layer channel used by the Monte-Carlo
/// estimator of the mixture divergence E[D] (see info_rates.hpp).
struct MixtureKernel {
  int inputs = 0;                  // m: nodes of the upper layer
  int outputs = 0;                 // n: nodes of the lower layer
  Eigen::MatrixXd chol;            // lower Cholesky factor of the reference upper covariance
  Eigen::MatrixXd precision;       // its inverse
  std::vector<int> parent_pos;     // per output
  std::vector<double> coef;        // per output
  std::vector<double> noise_sd;    // per output
  std::vector<int> sign_pos;       // input positions that carry a sign, canonical order
  std::vector<Eigen::VectorXd> branch_signs;  // per sign class: +/-1 per input
  std::vector<double> eta;         // per sign class
  std::vector<double> log_eta;     // per sign class (-inf where eta = 0)
  std::uint64_t stream_layer = 0;  // layer key of the random stream
};

struct Moments {
  double sum = 0.0;
  double sumsq = 0.0;
  std::uint64_t count = 0;
};

inline constexpr std::uint64_t kKernelChunk = 4096;

namespace serial {
Moments mixture_divergence(const MixtureKernel& k, std::uint64_t seed, std::uint64_t samples);
/// Observed values of blocks [first, first + count): row (b*N + t), columns
/// in tree observed order.
Eigen::MatrixXd emit_blocks(const Synthesizer& s, std::uint64_t first, std::uint64_t count);
/// Cross-block statistic for the observed data and each seeded permutation.
std::vector<double> permutation_statistics(const Eigen::MatrixXd& q, std::uint64_t seed,
                                           std::uint64_t permutations);
}  // namespace serial

namespace omp {
Moments mixture_divergence(const MixtureKernel& k, std::uint64_t seed, std::uint64_t samples);
Eigen::MatrixXd emit_blocks(const Synthesizer& s, std::uint64_t first, std::uint64_t count);
std::vector<double> permutation_statistics(const Eigen::MatrixXd& q, std::uint64_t seed,
                                           std::uint64_t permutations);
}  // namespace omp

/// Cross-block dependence statistic of a blocks x slots matrix q:
/// variance over slots of the across-block mean.
double cross_block_statistic(const Eigen::MatrixXd& q);

}  // namespace gtsynth
