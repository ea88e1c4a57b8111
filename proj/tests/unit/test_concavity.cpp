#include <doctest.h>

#include <gtsynth/concavity.hpp>
#include <gtsynth/errors.hpp>

#include "support.hpp"

using namespace gtsynth;

TEST_CASE("finite differences are exact on a quadratic") {
  Eigen::Matrix3d q{{-2.0, 0.5, 0.0}, {0.5, -1.0, 0.25}, {0.0, 0.25, -3.0}};
  const EtaFunctional f = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(q * x) + x.sum(); };
  const Eigen::Vector3d x0(0.2, 0.3, 0.5);
  CHECK((fd_hessian(f, x0, 1e-3) - Eigen::MatrixXd(q)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((fd_gradient(f, x0, 1e-3) - (q * x0 + Eigen::Vector3d::Ones())).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(max_eigenvalue(Eigen::MatrixXd(q)) ==
        doctest::Approx(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(q).eigenvalues().maxCoeff()));
}

TEST_CASE("interior points lie on the simplex") {
  const auto pts = interior_eta_points(2, 10);
  REQUIRE(pts.size() == 10);
  for (const auto& p : pts) {
    CHECK(p.size() == 4);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p.minCoeff() > 0.0);
  }
}

TEST_CASE("star quadrature functional matches an independent trapezoid rule") {
  const auto t = test::load_fixture("star.json");
  const auto f = conditional_entropy_functional(t, 2, 0);
  for (double p : {0.5, 0.2}) {
    const Eigen::Vector2d eta(1 - p, p);
    CHECK(f(eta) == doctest::Approx(test::star_conditional_entropy_oracle({0.6, 0.5, 0.8}, p)).epsilon(1e-7));
  }
}

TEST_CASE("star conditional entropy is concave in eta") {
  const auto t = test::load_fixture("star.json");
  const auto r = concavity_check(t, interior_eta_points(1, 10), 2, 0);
  CHECK(r.point_max_eigenvalues.size() == 10);
  CHECK(r.max_eigenvalue <= 1e-3);
  CHECK(r.gradient_spread <= 1e-6);
}

TEST_CASE("two-latent sampled functional is concave") {
  const auto t = test::load_fixture("dumbbell.json");
  const auto r = concavity_check(t, interior_eta_points(2, 4), 20000, 5);
  CHECK(r.max_eigenvalue <= 1e-3);
  CHECK(r.gradient_at_uniform.size() == 4);
}

TEST_CASE("harness detects a convex functional") {
  const auto t = test::load_fixture("star.json");
  const auto f = conditional_entropy_functional(t, 2, 0);
  const EtaFunctional neg = [&](const Eigen::VectorXd& e) { return -f(e); };
  const auto r = concavity_check(neg, interior_eta_points(1, 10));
  CHECK(r.max_eigenvalue > 1e-3);
}

TEST_CASE("latent count guard") {
  auto big = test::load_fixture("fig2.json");
  CHECK_THROWS_AS(conditional_entropy_functional(big, 100, 0), DomainError);
}
