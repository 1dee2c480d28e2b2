#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/profile.hpp"

using namespace shearlab;

namespace {

std::vector<double> log_grid(double lo, double hi, int m) {
  std::vector<double> x;
  for (int i = 0; i <= m; ++i) x.push_back(lo * std::pow(hi / lo, double(i) / m));
  return x;
}

const Profile& band_profile() {
  static const Profile prof(reparametrize(shoot_heteroclinic(PlanarParams(0.1, 0.5, 0.1)), 1.88));
  return prof;
}

}  // namespace

TEST_CASE("closed form for nu = 0") {
  const double n = 0.1, alpha = 0.5, s0 = 1.3;
  const Triple t0 = closed_form_nu0(s0, n, alpha, 0.0);
  CHECK(t0.U == doctest::Approx(1 / s0));
  CHECK(t0.Sigma == s0);
  CHECK(t0.Theta == doctest::Approx(-(n + 1) / alpha * std::log(s0)));
  CHECK(closed_form_nu0(s0, n, alpha, s0 * std::sqrt(3.0)).Sigma ==
        doctest::Approx(2 * s0).epsilon(1e-15));
  for (double x : log_grid(1e-3, 1e3, 50)) {
    const Triple t = closed_form_nu0(s0, n, alpha, x);
    CHECK(t.U * t.Sigma == doctest::Approx(1.0).epsilon(1e-15));
  }
  const auto r = msys_residual(
      [&](double x) { return closed_form_nu0(s0, n, alpha, x); }, n, alpha, 0.0,
      log_grid(0.01, 100.0, 300));
  CHECK(r.max_sup() < 1e-10);
}

TEST_CASE("special solution solves the profile system for every nu") {
  const double n = 0.1, alpha = 0.5;
  for (double nu : {0.05, 0.1, 1.0, 7.0}) {
    const auto r = msys_residual([&](double x) { return special_solution(n, alpha, x); }, n,
                                 alpha, nu, log_grid(0.1, 100.0, 300));
    CHECK(r.max_sup() < 1e-10);
  }
  // and it is a fixed point of the scaling
  const auto g = scale_orbit_family([&](double x) { return special_solution(n, alpha, x); }, 3.0,
                                    n, alpha);
  CHECK(g(2.0).Theta == doctest::Approx(special_solution(n, alpha, 2.0).Theta).epsilon(1e-13));
}

TEST_CASE("residual detects a wrong triple") {
  const double n = 0.1, alpha = 0.5;
  const auto r = msys_residual(
      [&](double x) {
        Triple t = special_solution(n, alpha, x);
        t.Sigma *= 1.01;
        return t;
      },
      n, alpha, 0.1, log_grid(0.1, 10.0, 20));
  CHECK(r.sup[2] > 1e-3);
  CHECK_THROWS_AS(msys_residual([&](double x) { return special_solution(n, alpha, x); }, n, alpha,
                                0.1, std::vector<double>{0.0}),
                  std::exception);
}

TEST_CASE("reconstructed profile: endpoint data") {
  const Profile& prof = band_profile();
  CHECK(prof.U0() == doctest::Approx(1.22 / 1.88).epsilon(1e-14));
  CHECK(prof.Theta0() ==
        doctest::Approx(1.1 / 0.5 * std::log(1.22 / 1.88) - std::log(1.22) / 0.5).epsilon(1e-13));
  CHECK(prof.U0() * prof.sigma0() == doctest::Approx(prof.c_nu()).epsilon(1e-14));
  const Triple first{prof.U().front(), prof.Sigma().front(), prof.Theta().front()};
  CHECK(std::abs(first.Sigma - 1.88) < 1e-3);
  CHECK(std::abs(first.U - prof.U0()) < 1e-6);
  CHECK(std::abs(first.Theta - prof.Theta0()) < 1e-6);
  CHECK(prof.eval(0.0).region == ProfileRegion::inner);
  CHECK(prof.eval(1.0).region == ProfileRegion::orbit);
  CHECK(prof.eval(1e9).region == ProfileRegion::outer);
  CHECK_THROWS_AS(Profile(shoot_heteroclinic(PlanarParams(0.1, 0.5, 0.1))), DomainError);
}

TEST_CASE("reconstructed profile: shape invariants") {
  const Profile& prof = band_profile();
  const double n = 0.1, alpha = 0.5;
  for (std::size_t i = 0; i < prof.xi().size(); ++i) {
    const double U = prof.U()[i], S = prof.Sigma()[i], T = prof.Theta()[i];
    REQUIRE(S * U > 1.0);
    REQUIRE(S * U <= prof.c_nu() * (1 + 1e-14));
    REQUIRE(std::abs(S - std::exp(-alpha * T) * std::pow(U, n)) <= 1e-12 * S);
    if (i > 0) {
      // near 0 the increments are O(xi^2), below the round-off of the orbit data
      const bool strict = prof.xi()[i] > 1e-4;
      REQUIRE((strict ? S > prof.Sigma()[i - 1] : S >= prof.Sigma()[i - 1] * (1 - 1e-13)));
      REQUIRE((strict ? U < prof.U()[i - 1] : U <= prof.U()[i - 1] * (1 + 1e-13)));
      REQUIRE(S * U <= prof.Sigma()[i - 1] * prof.U()[i - 1] * (1 + 1e-15));
    }
  }
  for (double x : log_grid(1e-9, 1e7, 200)) {
    const Triple a = prof(x), b = prof(-x);
    CHECK(a.U == b.U);
    CHECK(a.Sigma == b.Sigma);
    CHECK(a.Theta == b.Theta);
  }
}

TEST_CASE("reconstructed profile solves the profile system") {
  const Profile& prof = band_profile();
  const auto r = msys_residual(prof.as_function(), 0.1, 0.5, 0.1, log_grid(1e-3, 1e3, 400));
  CHECK(r.max_sup() < 1e-6);
  CHECK_FALSE(r.grid_too_coarse);
}

TEST_CASE("endpoint report") {
  const Profile& prof = band_profile();
  const auto r = endpoint_report(prof);
  CHECK(std::abs(r.dU0) < 1e-4);
  CHECK(std::abs(r.dSigma0) < 1e-4);
  CHECK(std::abs(r.dTheta0) < 1e-4);
  CHECK(r.taylor_expected == doctest::Approx(0.5 * 1.22 / 1.88));
  CHECK(r.taylor_rel_error < 0.02);
  CHECK_FALSE(r.tail_extrapolated);
  CHECK(std::abs(r.tail_sigma) < 1e-3);
  CHECK(std::abs(r.tail_u) < 1e-3);
  CHECK(std::abs(r.tail_theta) < 1e-3);
  CHECK(std::abs(r.product_0plus - prof.c_nu()) < 1e-3);
}

TEST_CASE("scaling coherence") {
  const Profile& prof = band_profile();
  const double n = 0.1, alpha = 0.5, nu = 0.1;
  const auto grid = log_grid(0.01, 100.0, 200);
  const double base = msys_residual(prof.as_function(), n, alpha, nu, grid).max_sup();
  for (double b : {0.5, 2.0}) {
    const auto g = scale_orbit_family(prof.as_function(), b, n, alpha);
    CHECK(g(0.0).Sigma == doctest::Approx(1.88 / b).epsilon(1e-14));
    const double res = msys_residual(g, n, alpha, nu, grid).max_sup();
    CHECK(res < 10.0 * std::max(base, 1e-12) * std::max(b, 1.0 / b));
    CHECK(res < 1e-6);
  }
}

TEST_CASE("profile csv") {
  const Profile& prof = band_profile();
  std::stringstream ss;
  write_profile_csv(ss, prof);
  const auto t = csv::read(ss);
  CHECK(t.columns == std::vector<std::string>{"xi", "U", "Sigma", "Theta"});
  CHECK(t.rows.size() == prof.xi().size());
  CHECK(std::stod(t.meta.at("U0")) == prof.U0());
  CHECK(std::stod(t.meta.at("sigma0")) == 1.88);
}
