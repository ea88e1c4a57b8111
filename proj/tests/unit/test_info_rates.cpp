#include <doctest.h>

#include <gtsynth/errors.hpp>
#include <gtsynth/info_rates.hpp>
#include <gtsynth/layering.hpp>
#include <gtsynth/sign_model.hpp>

#include "support.hpp"

#include <cmath>

using namespace gtsynth;

namespace {

CovarianceMatrix bivariate(double rho) {
  CovarianceMatrix c;
  c.labels = {"a", "b"};
  c.values = Eigen::Matrix2d{{1.0, rho}, {rho, 1.0}};
  return c;
}

}  // namespace

TEST_CASE("gaussian_mi examples") {
  const std::vector<std::string> a{"a"}, b{"b"};
  CHECK(gaussian_mi(bivariate(0.0), a, b) == doctest::Approx(0.0));
  CHECK(gaussian_mi(bivariate(0.6), a, b) == doctest::Approx(-0.5 * std::log(0.64)));
  CHECK(gaussian_mi(bivariate(0.6), a, b) == doctest::Approx(0.22314).epsilon(1e-4));

  const auto star = test::load_fixture("star.json");
  const auto cov = joint_covariance(star, SignAssignment{{1}});
  const std::vector<std::string> x{"x1", "x2", "x3"}, y{"y1"};
  const double det_x = 1 + 2 * 0.30 * 0.48 * 0.40 - 0.30 * 0.30 - 0.48 * 0.48 - 0.40 * 0.40;
  const double expect = 0.5 * std::log(det_x / (0.64 * 0.75 * 0.36));
  CHECK(gaussian_mi(cov, x, y) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.6506).epsilon(1e-4));
  CHECK_THROWS_AS(gaussian_mi(cov, x, x), DomainError);
  CHECK_THROWS_AS(gaussian_mi(cov, std::vector<std::string>{}, y), DomainError);
  CHECK_THROWS_AS(gaussian_mi(cov, std::vector<std::string>{"q"}, y), DomainError);
}

TEST_CASE("star rate bounds") {
  const auto star = test::load_fixture("star.json");
  const auto lt = *assign_layers(star).layered;
  const auto r = layer_rate_bounds(lt, star, 0, {}, 200000, 42);
  const std::vector<std::string> x{"x1", "x2", "x3"}, y{"y1"};
  CHECK(r.sum_rate_lb == doctest::Approx(gaussian_mi(joint_covariance(star, SignAssignment{{1}}), x, y)));
  CHECK(r.y_rate_lb <= r.sum_rate_lb + r.y_rate_ci);
  CHECK(r.y_rate_lb >= 0.0);

  const double oracle = test::star_mixture_mi_oracle({0.6, 0.5, 0.8});
  INFO("oracle " << oracle << " estimate " << r.y_rate_lb << " ci " << r.y_rate_ci);
  CHECK(std::abs(r.y_rate_lb - oracle) <= 3 * r.y_rate_ci);

  const auto degenerate = layer_rate_bounds(lt, star, 0, {1.0 - 1e-9}, 20000, 42);
  CHECK(std::abs(degenerate.y_rate_lb - degenerate.sum_rate_lb) <= 3 * degenerate.y_rate_ci + 1e-6);

  CHECK_THROWS_AS(layer_rate_bounds(lt, star, 0, {}, 999, 1), DomainError);
  CHECK_THROWS_AS(layer_rate_bounds(lt, star, 1, {}, 5000, 1), DomainError);
}

TEST_CASE("sum rate is fixed across pi and sign classes") {
  const auto t = test::load_fixture("fig2.json");
  const auto lt = *assign_layers(t).layered;
  for (int l = 0; l < lt.top_layer(); ++l) {
    const double ref = sum_rate_bound(lt, t, l, SignAssignment::all_positive(t.latent_count()));
    for (const auto& s : enumerate_signs(t)) CHECK(sum_rate_bound(lt, t, l, s) == ref);
    const auto k = layer_pi(lt, t, l + 1).size();
    for (double p : {0.1, 0.5, 0.9})
      CHECK(layer_rate_bounds(lt, t, l, std::vector<double>(k, p), 1000, 3).sum_rate_lb == ref);
  }
}

TEST_CASE("monotonicity and pi symmetry") {
  for (const char* f : {"star.json", "dumbbell.json"}) {
    const auto t = test::load_fixture(f);
    const auto lt = *assign_layers(t).layered;
    const auto k = layer_pi(lt, t, 1).size();
    for (double p : {0.1, 0.3}) {
      const auto a = layer_rate_bounds(lt, t, 0, std::vector<double>(k, p), 20000, 9);
      const auto b = layer_rate_bounds(lt, t, 0, std::vector<double>(k, 1 - p), 20000, 9);
      CHECK(a.y_rate_lb <= a.sum_rate_lb + 3 * a.y_rate_ci);
      CHECK(std::abs(a.y_rate_lb - b.y_rate_lb) <= 3 * std::max(a.y_rate_ci, b.y_rate_ci));
    }
  }
}

TEST_CASE("rate estimates are deterministic") {
  const auto t = test::load_fixture("fig6.json");
  const auto lt = restructure(t);
  for (int l = 0; l < lt.top_layer(); ++l) {
    const auto a = layer_rate_bounds(lt, t, l, {}, 5000, 77);
    const auto b = layer_rate_bounds(lt, t, l, {}, 5000, 77);
    CHECK(a.y_rate_lb == b.y_rate_lb);
    CHECK(a.y_rate_ci == b.y_rate_ci);
  }
}

TEST_CASE("optimize_pi on the star") {
  const auto t = test::load_fixture("star.json");
  const auto lt = *assign_layers(t).layered;
  const auto opt = optimize_pi(lt, t, 0, 0.05, 50000, 4);
  REQUIRE(opt.pi_star.size() == 1);
  CHECK(std::abs(opt.pi_star[0] - 0.5) <= 0.05 + 1e-12);
  const auto grid = pi_grid(0.05);
  CHECK(grid.size() == 19);
  REQUIRE(opt.curve.size() == grid.size());
  const auto& lo = opt.curve.front();
  const auto& mid = opt.curve[9];
  const auto& hi = opt.curve.back();
  CHECK(mid.pi[0] == doctest::Approx(0.5));
  CHECK(lo.estimate >= mid.estimate - 3 * mid.ci);
  CHECK(hi.estimate >= mid.estimate - 3 * mid.ci);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& a = opt.curve[i];
    const auto& b = opt.curve[grid.size() - 1 - i];
    CHECK(std::abs(a.estimate - b.estimate) <= 3 * std::max(a.ci, b.ci));
  }
  CHECK_THROWS_AS(pi_grid(0.3), DomainError);
  CHECK_THROWS_AS(pi_grid(0.0), DomainError);
}
