#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/orbit.hpp"

using namespace shearlab;

namespace {

// eta with a(eta) = target, by bisection on the interpolated path.
double eta_of_a(const OrbitPath& path, double target) {
  double lo = path.eta_min(), hi = path.eta_max();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (path.at(mid).a < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("planar params") {
  const PlanarParams p(0.1, 0.5, 0.1);
  CHECK(p.c_nu() == doctest::Approx(1.22).epsilon(1e-15));
  CHECK_THROWS_AS(PlanarParams(0.0, 0.5, 0.1), DomainError);
  CHECK_THROWS_AS(PlanarParams(0.1, 0.5, 0.0), DomainError);
  CHECK_THROWS_AS(vector_field(p, {0.5, 0.0}), DomainError);
}

TEST_CASE("equilibria are zeros of the field") {
  for (double nu : {0.05, 0.1, 0.5, 2.0}) {
    const PlanarParams p(0.1, 0.5, nu);
    const auto fq = vector_field(p, {1.0, 1.0});
    const auto fp = vector_field(p, {0.0, 1.0 / p.c_nu()});
    CHECK(std::hypot(fq.a, fq.b) < 1e-14);
    CHECK(std::hypot(fp.a, fp.b) < 1e-14);
  }
}

TEST_CASE("field on the parabola b = a^2") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const double a = 0.5;
  const auto f = vector_field(p, {a, a * a});
  CHECK(f.a == 0.0);
  CHECK(f.b == doctest::Approx(0.5 / (0.1 * 0.1) * (a * a - 1.0)).epsilon(1e-13));
  CHECK(f.b < 0.0);
}

TEST_CASE("eigenstructure") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const auto eq = equilibria(p);
  CHECK(eq.P.eigenvalues[0] == 1.0);
  CHECK(eq.P.eigenvalues[1] == doctest::Approx(61.0).epsilon(1e-14));
  CHECK(eq.P.kind == EquilibriumKind::repelling_node);
  CHECK(eq.Q.kind == EquilibriumKind::saddle);
  const double r = std::sqrt(59.0 * 59.0 + 400.0);
  CHECK(eq.Q.eigenvalues[0] == doctest::Approx((59.0 - r) / 2).epsilon(1e-12));
  CHECK(eq.Q.eigenvalues[1] == doctest::Approx((59.0 + r) / 2).epsilon(1e-12));

  // independent eigen-solve of the Jacobian at Q
  const Matrix2 J = planar_jacobian(p, {1.0, 1.0});
  Eigen::Matrix2d m;
  m << J[0][0], J[0][1], J[1][0], J[1][1];
  Eigen::Vector2d ev = Eigen::EigenSolver<Eigen::Matrix2d>(m).eigenvalues().real();
  std::sort(ev.data(), ev.data() + 2);
  CHECK(ev(0) == doctest::Approx(eq.Q.eigenvalues[0]).epsilon(1e-12));
  CHECK(ev(1) == doctest::Approx(eq.Q.eigenvalues[1]).epsilon(1e-12));
  for (int k = 0; k < 2; ++k) {
    const auto v = eq.Q.eigenvectors[k];
    const double l = eq.Q.eigenvalues[k];
    CHECK(std::abs(J[0][0] * v.a + J[0][1] * v.b - l * v.a) < 1e-12 * std::abs(l));
    CHECK(std::abs(J[1][0] * v.a + J[1][1] * v.b - l * v.b) < 1e-12 * std::abs(l));
  }

  for (double n : {0.01, 0.05, 0.1, 0.5})
    for (double alpha : {0.1, 0.5, 1.0, 3.0})
      for (double nu : {0.01, 0.1, 1.0, 10.0}) {
        const auto e = equilibria(PlanarParams(n, alpha, nu));
        CHECK(2.0 + e.Q.eigenvalues[0] > 0.0);
        CHECK(2.0 + e.Q.eigenvalues[0] < 2.0);
        CHECK(e.Q.eigenvalues[1] > 0.0);
        CHECK(e.P.eigenvalues[1] > 1.0);
      }
}

TEST_CASE("R is negatively invariant on its boundary") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const double h = 1e-6;
  for (int i = 1; i < 100; ++i) {
    const double a = i / 100.0;
    for (PlanarState s : {PlanarState{a, a * a}, PlanarState{a, 1.0}}) {
      const auto f = vector_field(p, s);
      const PlanarState back{s.a - h * f.a, s.b - h * f.b};
      CHECK(in_region_R(back, 1e-15));
    }
  }
}

TEST_CASE("heteroclinic shot for n=0.1, alpha=0.5, nu=0.1") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const OrbitPath path = shoot_heteroclinic(p, {.eps = 1e-6, .tol = 1e-8});
  CHECK(std::hypot(path.a().front(), path.d().front()) < 1e-8);
  CHECK(std::hypot(path.a().back() - 1.0, path.b(path.size() - 1) - 1.0) ==
        doctest::Approx(1e-6).epsilon(1e-9));
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto s = path.state(i);
    REQUIRE(in_region_R(s, 1e-14));
    REQUIRE(s.b >= 1.0 / p.c_nu());
    if (i > 0) REQUIRE(path.a()[i] > path.a()[i - 1]);
    REQUIRE(vector_field(p, s).a > 0.0);
  }
  // interpolation reproduces the nodes and stays on the field
  const auto mid = path.at(0.5 * (path.eta()[100] + path.eta()[101]));
  const auto f = vector_field(p, {mid.a, mid.d + 1.0 / p.c_nu()});
  CHECK(mid.da == doctest::Approx(f.a).epsilon(1e-8));
  CHECK(mid.dd == doctest::Approx(f.b).epsilon(1e-6));
  CHECK_THROWS_AS(path.at(path.eta_max() + 1.0), DomainError);
  CHECK_THROWS_AS(shoot_heteroclinic(p, {.eps = 1e-2}), DomainError);
}

TEST_CASE("reparametrization") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const OrbitPath path = shoot_heteroclinic(p);
  const auto k = estimate_kappa1(path);
  CHECK(k.kappa1 > 0.0);
  CHECK(k.plateau_variation < 1e-4);

  const OrbitPath same = reparametrize(path, 1.0 / k.kappa1);
  CHECK(std::abs(same.eta0()) < 1e-12);
  CHECK(same.eta().front() == doctest::Approx(path.eta().front()).epsilon(1e-14));

  const double sigma0 = 1.88;
  const OrbitPath r = reparametrize(path, sigma0);
  CHECK(r.kappa1() == k.kappa1);
  CHECK(std::exp(r.eta0()) * k.kappa1 == doctest::Approx(1.0 / sigma0).epsilon(1e-12));
  const double lim = r.a().front() * std::exp(-r.eta().front());
  CHECK(std::abs(lim * sigma0 - 1.0) < 1e-3);
  CHECK_THROWS_AS(reparametrize(path, -1.0), DomainError);
}

TEST_CASE("node tail exponents") {
  for (double nu : {0.05, 0.5}) {
    const PlanarParams p(0.05, 1.0, nu);
    const auto fit = fit_tail_exponents(shoot_heteroclinic(p));
    CHECK(fit.slope_a == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.lambda2 == doctest::Approx(p.stiffness() * p.c_nu()));
    // b - 1/c_nu is driven by a^2 ~ e^{2 eta}, which outlasts e^{lambda2 eta}
    // whenever lambda2 > 2.
    CHECK(fit.lambda2 > 2.0);
    CHECK(fit.slope_d == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("shooting is stable in eps") {
  const PlanarParams p(0.1, 0.5, 0.1);
  const OrbitPath p1 = reparametrize(shoot_heteroclinic(p, {.eps = 1e-6}), 1.88);
  const OrbitPath p2 = reparametrize(shoot_heteroclinic(p, {.eps = 5e-7}), 1.88);
  double worst = 0.0;
  const double a_hi = std::min(p1.a().back(), p2.a().back());
  for (int i = 0; i <= 200; ++i) {
    const double a = std::exp(std::log(1e-6) + (std::log(a_hi) - std::log(1e-6)) * i / 200.0);
    const auto s1 = p1.at(eta_of_a(p1, a)), s2 = p2.at(eta_of_a(p2, a));
    worst = std::max(worst, std::abs(s1.d - s2.d));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("orbit csv") {
  const OrbitPath path = reparametrize(shoot_heteroclinic(PlanarParams(0.1, 0.5, 0.1)), 1.88);
  std::stringstream ss;
  write_orbit_csv(ss, path);
  const auto t = csv::read(ss);
  CHECK(t.columns == std::vector<std::string>{"eta", "a", "b"});
  CHECK(t.rows.size() == path.size());
  CHECK(std::stod(t.meta.at("c_nu")) == doctest::Approx(1.22));
  CHECK(std::stod(t.meta.at("eta0")) == path.eta0());
  CHECK(t.rows[7][1] == path.a()[7]);
}
