#include <doctest.h>

#include <gtsynth/errors.hpp>
#include <gtsynth/sign_model.hpp>

#include "support.hpp"

#include <random>
#include <set>

using namespace gtsynth;

TEST_CASE("enumerate_signs") {
  const auto star = enumerate_signs(test::load_fixture("star.json"));
  REQUIRE(star.size() == 2);
  CHECK(star[0].b == std::vector<int>{-1});
  CHECK(star[1].b == std::vector<int>{1});
  CHECK(star[1].bitstring() == "1");

  const auto four = enumerate_signs(4);
  REQUIRE(four.size() == 16);
  std::set<std::vector<int>> distinct;
  for (std::size_t i = 0; i < four.size(); ++i) {
    CHECK(four[i].index() == i);
    distinct.insert(four[i].b);
  }
  CHECK(distinct.size() == 16);
  CHECK(four[1].bitstring() == "0001");
  CHECK(four[8].bitstring() == "1000");
  CHECK(enumerate_signs(test::load_fixture("fig2.json")).size() == 64);

  CHECK_THROWS_AS(enumerate_signs(0), DomainError);
  CHECK_THROWS_AS(enumerate_signs(21), GuardExceeded);
}

TEST_CASE("eta_from_pi examples") {
  const auto u = eta_from_pi({0.5, 0.5});
  for (double e : u) CHECK(e == doctest::Approx(0.25));
  const auto e = eta_from_pi({0.3, 0.7});
  REQUIRE(e.size() == 4);
  CHECK(e[0] == doctest::Approx(0.21));
  CHECK(e[1] == doctest::Approx(0.49));
  CHECK(e[2] == doctest::Approx(0.09));
  CHECK(e[3] == doctest::Approx(0.21));
  const auto one = eta_from_pi({0.5});
  CHECK(one == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(eta_from_pi({1.5}), DomainError);
  CHECK_THROWS_AS(eta_from_pi({0.0}), DomainError);
}

TEST_CASE("pi_from_eta examples") {
  const auto u = pi_from_eta(std::vector<double>(8, 0.125));
  REQUIRE(u.size() == 3);
  for (double p : u) CHECK(p == doctest::Approx(0.5));
  const auto p = pi_from_eta({0.21, 0.49, 0.09, 0.21});
  CHECK(p[0] == doctest::Approx(0.3));
  CHECK(p[1] == doctest::Approx(0.7));
  CHECK_THROWS_AS(pi_from_eta({0.5, 0.0, 0.0, 0.5}), NotProductForm);
  CHECK_THROWS_AS(pi_from_eta({0.3, 0.3, 0.4}), DomainError);
  CHECK_THROWS_AS(pi_from_eta({1.0}), DomainError);
}

TEST_CASE("pi and eta round trip") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> d(0.01, 0.99);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> pi(static_cast<std::size_t>(1 + rep % 6));
    for (auto& x : pi) x = d(gen);
    const auto eta = eta_from_pi(pi);
    double sum = 0;
    for (double x : eta) sum += x;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    const auto back = pi_from_eta(eta);
    for (std::size_t j = 0; j < pi.size(); ++j) CHECK(std::abs(back[j] - pi[j]) <= 1e-12);
  }
}

TEST_CASE("sign invariance on fixtures") {
  for (const char* f : {"star.json", "fig2.json", "fig6.json", "dumbbell.json"})
    CHECK(verify_sign_invariance(test::load_fixture(f)) <= 1e-12);
  const auto t = test::load_fixture("fig2.json");
  const auto devs = sign_class_deviations(t);
  CHECK(devs.size() == 64);
  CHECK(devs[63] == 0.0);
}

TEST_CASE("negation leaves the latent and observed blocks unchanged") {
  // Latent-observed entries flip sign under negation; the two diagonal
  // blocks do not.
  const auto t = test::load_fixture("fig2.json");
  std::vector<std::string> lat, obs;
  for (int i : t.latents()) lat.push_back(t.node(i).id);
  for (int i : t.observed()) obs.push_back(t.node(i).id);
  for (const auto& s : enumerate_signs(t)) {
    const auto a = joint_covariance(t, s);
    const auto b = joint_covariance(t, s.negated());
    CHECK(a.block(lat) == b.block(lat));
    CHECK(a.block(obs) == b.block(obs));
    CHECK(a.at("x1", "y1_1") == -b.at("x1", "y1_1"));
  }
}
