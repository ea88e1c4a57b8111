#include <doctest.h>

#include <gtsynth/errors.hpp>
#include <gtsynth/layering.hpp>
#include <gtsynth/synthesis.hpp>
#include <gtsynth/validation.hpp>

#include "support.hpp"

#include <cmath>
#include <random>

using namespace gtsynth;

namespace {

// Observed columns of an exact ancestral sample packaged as a run with N = 1.
SynthesisRun exact_run(const GaussianTree& t, std::size_t rows, std::uint64_t seed) {
  const std::vector<int> plus(t.node_count(), 1);
  const Eigen::MatrixXd all = test::ancestral_samples(t, plus, rows, seed);
  SynthesisRun run;
  run.N = 1;
  run.blocks = rows;
  run.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(t.observed_count()));
  for (std::size_t j = 0; j < t.observed_count(); ++j) {
    run.data.col(static_cast<Eigen::Index>(j)) = all.col(t.observed()[j]);
    run.observed_ids.push_back(t.node(t.observed()[j]).id);
  }
  return run;
}

// Star with a rate override that leaves eight b-codewords, so every sign
// group collects enough blocks.
SynthesisRun grouped_star_run(std::uint64_t seed, std::uint64_t blocks) {
  static const auto t = test::load_fixture("star.json");
  SynthesisConfig cfg;
  cfg.N = 32;
  cfg.seed = seed;
  cfg.blocks = blocks;
  cfg.rate_samples = 5000;
  const auto lt = *assign_layers(t).layered;
  const auto rates = all_rate_bounds(lt, t, cfg.rate_samples, seed);
  cfg.rate_override[0] = {1.1 * rates[0].sum_rate_lb, std::log(8.0) / 32};
  return synthesize(Synthesizer(t, lt, cfg, rates));
}

}  // namespace

TEST_CASE("empirical covariance") {
  const auto t = test::load_fixture("star.json");
  const auto run = exact_run(t, 1000000, 1);
  const auto emp = empirical_covariance(run.data, run.observed_ids);
  const auto target = observed_covariance(t, SignAssignment{{1}});
  for (const auto& a : run.observed_ids)
    for (const auto& b : run.observed_ids)
      CHECK(std::abs(emp.at(a, b) - target.at(a, b)) <= 4 * 1e-3 * (1 + std::abs(target.at(a, b))));

  const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(10, 3, 2.5);
  CHECK(empirical_covariance(constant, {"a", "b", "c"}).values.isZero(0.0));

  Eigen::MatrixXd pair(2, 3);
  pair << 1, -2, 3, -1, 2, -3;
  const Eigen::Vector3d v(1, -2, 3);
  CHECK(empirical_covariance(pair, {"a", "b", "c"}).values.isApprox(2.0 * v * v.transpose()));
  CHECK_THROWS_AS(empirical_covariance(Eigen::MatrixXd(1, 3), {"a", "b", "c"}), InsufficientData);
}

TEST_CASE("sample_gaussian matches its covariance") {
  const Eigen::Matrix2d cov{{1.0, -0.4}, {-0.4, 1.0}};
  const Eigen::MatrixXd x = sample_gaussian(cov, 400000, 3);
  const Eigen::MatrixXd emp = test::zero_mean_cov(x);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      CHECK(std::abs(emp(i, j) - cov(i, j)) <= 4 * test::cov_se(cov(i, j), 400000));
}

TEST_CASE("histogram TV properties") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  std::vector<double> a(50000), b(50000), shifted(200000);
  for (auto& x : a) x = z(gen);
  for (auto& x : b) x = z(gen);
  for (auto& x : shifted) x = z(gen) + 0.1;
  CHECK(histogram_tv_two_sample(a, a, 32) == 0.0);
  CHECK(histogram_tv_two_sample(a, b, 32) == doctest::Approx(histogram_tv_two_sample(b, a, 32)));
  CHECK(histogram_tv_two_sample(a, b, 32) < 0.03);
  const double tv_a = histogram_tv_normal(a, 64);
  CHECK(tv_a >= 0.0);
  CHECK(tv_a < 0.03);

  // KL(N(0.1,1) || N(0,1)) = 0.005, Pinsker bound 0.05; the exact TV is
  // 2 Phi(0.05) - 1 ~ 0.0399.
  const double kl = gaussian_kl(Eigen::VectorXd::Constant(1, 0.1), Eigen::MatrixXd::Identity(1, 1),
                                Eigen::MatrixXd::Identity(1, 1));
  CHECK(kl == doctest::Approx(0.005));
  const double tv_shift = histogram_tv_normal(shifted, 64);
  CHECK(tv_shift <= std::sqrt(kl / 2) + 0.01);
  CHECK(tv_shift > 0.02);
}

TEST_CASE("fidelity of an exact sample") {
  const auto t = test::load_fixture("star.json");
  const auto run = exact_run(t, 1000000, 2);
  const auto target = observed_covariance(t, SignAssignment{{1}});
  const auto r = fidelity_report(run, target, 64);
  CHECK(r.pooled_slots == 1000000);
  CHECK(r.pinsker_tv_bound <= 0.01);
  CHECK(r.max_cov_error <= 0.01);
  CHECK(r.max_marginal_tv <= 0.01);
  for (double tv : r.marginal_tv) {
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
  }
  CHECK_THROWS_AS(fidelity_report(run, target, 4), DomainError);
}

TEST_CASE("a wrong edge correlation is detected") {
  const auto t = test::load_fixture("star.json");
  const auto wrong = parse_tree(R"({"nodes":[{"id":"x1","kind":"observed"},{"id":"x2","kind":"observed"},
    {"id":"x3","kind":"observed"},{"id":"y1","kind":"latent","pi":0.5}],
    "edges":[{"a":"y1","b":"x1","rho":0.9},{"a":"y1","b":"x2","rho":0.5},{"a":"y1","b":"x3","rho":0.8}]})");
  SynthesisConfig cfg;
  cfg.N = 16;
  cfg.blocks = 2000;
  cfg.seed = 5;
  cfg.rate_samples = 5000;
  const auto run = synthesize(wrong, *assign_layers(wrong).layered, cfg);
  const auto r = fidelity_report(run, observed_covariance(t, SignAssignment{{1}}), 64);
  CHECK(r.max_cov_error >= 0.1);
}

TEST_CASE("independence tests on a properly rated run") {
  const auto run = grouped_star_run(21, 2000);
  IndependenceOptions opt;
  opt.seed = 3;
  const auto rep = independence_tests(run, opt);
  CHECK(rep.groups == 8);
  CHECK(rep.sign_group.size() == 8 * 9);
  CHECK(rep.per_test_alpha == doctest::Approx(0.01 / 72));
  CHECK(rep.sign_groups_pass);
  CHECK_FALSE(rep.cross_block.reject);

  const auto again = independence_tests(run, opt);
  REQUIRE(again.sign_group.size() == rep.sign_group.size());
  for (std::size_t i = 0; i < rep.sign_group.size(); ++i)
    CHECK(again.sign_group[i].p_value == rep.sign_group[i].p_value);
  CHECK(again.cross_block.p_value == rep.cross_block.p_value);

  const auto shuffled = shuffle_lineage(run, 8);
  CHECK(independence_tests(shuffled, opt).sign_groups_pass);
}

TEST_CASE("too few blocks per group") {
  const auto run = grouped_star_run(22, 300);
  CHECK_THROWS_AS(independence_tests(run, IndependenceOptions{}), InsufficientData);
}

TEST_CASE("a single top codeword makes blocks dependent") {
  const auto t = test::load_fixture("star.json");
  SynthesisConfig cfg;
  cfg.N = 64;
  cfg.blocks = 300;
  cfg.seed = 9;
  cfg.rate_samples = 5000;
  cfg.force_y_size[1] = 1;
  const auto run = synthesize(t, *assign_layers(t).layered, cfg);
  const auto v = cross_block_test(run, 199, 1, 0.01);
  CHECK(v.reject);
  CHECK(v.p_value == doctest::Approx(0.005));
}
