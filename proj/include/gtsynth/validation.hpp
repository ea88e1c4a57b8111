#pragma once

// Fidelity of synthesized output: covariance error, per-marginal histogram
// TV, a Pinsker bound from a fitted Gaussian, sign-group two-sample tests
// and a cross-block dependence permutation test.

#include "gtsynth/synthesis.hpp"
#include "gtsynth/tree_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gtsynth {

/// Unbiased sample covariance (divisor rows - 1). Throws InsufficientData
/// for fewer than 2 rows.
CovarianceMatrix empirical_covariance(const Eigen::MatrixXd& samples, std::vector<std::string> labels);

/// rows x dim draws from N(0, cov).
Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& cov, std::uint64_t rows, std::uint64_t seed);

/// TV between the empirical law of x and N(0,1) on `bins` equal-mass bins.
double histogram_tv_normal(std::span<const double> x, int bins);
/// TV between two samples on `bins` bins cut at quantiles of the pooled sample.
double histogram_tv_two_sample(std::span<const double> a, std::span<const double> b, int bins);

/// KL(N(mean, cov) || N(0, target)).
double gaussian_kl(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const Eigen::MatrixXd& target);

struct FidelityReport {
  std::uint64_t pooled_slots = 0;
  int bins = 0;
  double max_cov_error = 0.0;
  double frobenius_error = 0.0;
  std::vector<std::string> labels;
  std::vector<double> marginal_tv;
  double max_marginal_tv = 0.0;
  double kl = 0.0;
  double pinsker_tv_bound = 0.0;
};

/// Compares pooled slots of the run with the target law N(0, target).
/// Throws DomainError for bins < 8 or mismatched labels.
FidelityReport fidelity_report(const SynthesisRun& run, const CovarianceMatrix& target, int bins);

struct TestVerdict {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.01;
  bool reject = false;
};

struct IndependenceReport {
  int layer = 1;
  std::uint64_t groups = 0;  // groups with at least min_group blocks
  double family_alpha = 0.01;
  double per_test_alpha = 0.01;
  std::vector<TestVerdict> sign_group;  // one per (group, statistic)
  bool sign_groups_pass = true;
  TestVerdict cross_block;
};

struct IndependenceOptions {
  double alpha = 0.01;
  std::uint64_t min_group = 100;
  std::uint64_t permutations = 199;
  std::uint64_t seed = 0;
  /// Codebook layer whose b-codeword index defines the groups.
  int layer = 1;
};

/// Groups blocks by B-codeword index and runs Welch z-tests (group vs rest)
/// on block means of every x_j and x_j x_k, Bonferroni-corrected; then the
/// cross-block permutation test. Throws InsufficientData when fewer than
/// two groups reach min_group blocks.
IndependenceReport independence_tests(const SynthesisRun& run, const IndependenceOptions& opt);

/// Sign-group part only.
std::vector<TestVerdict> sign_group_tests(const SynthesisRun& run, const IndependenceOptions& opt,
                                          std::uint64_t* groups_used = nullptr);

/// Cross-block dependence: q(i, t) = |x_{i,t}|^2, statistic = variance over
/// slots of the across-block mean; slots are shuffled within each block.
TestVerdict cross_block_test(const SynthesisRun& run, std::uint64_t permutations, std::uint64_t seed,
                             double alpha);

/// Copy of the run with B-codeword indices randomly reassigned across blocks.
SynthesisRun shuffle_lineage(const SynthesisRun& run, std::uint64_t seed);

}  // namespace gtsynth
