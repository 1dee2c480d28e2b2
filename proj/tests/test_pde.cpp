#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "shearlab/csv.hpp"
#include "shearlab/interp.hpp"
#include "shearlab/localization.hpp"
#include "shearlab/pde.hpp"
#include "shearlab/stability.hpp"

using namespace shearlab;
using namespace shearlab::pde;
using std::numbers::pi;

namespace {

const MaterialParams kBumpCase(0.05, 0.5, 0.5, 1.0);

FieldState random_state(const Grid1D& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  FieldState s;
  s.v.resize(g.N() + 1);
  s.theta.resize(g.N());
  for (int i = 0; i <= g.N(); ++i) s.v[i] = g.node(i) + (i > 0 && i < g.N() ? 0.2 * g.h() * d(rng) : 0.0);
  for (int j = 0; j < g.N(); ++j) s.theta[j] = 1.0 + d(rng);
  return s;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("grid and scheme names") {
  CHECK_THROWS_AS(Grid1D(15), DomainError);
  const Grid1D g(20);
  CHECK(g.h() == doctest::Approx(0.05));
  CHECK(g.center(0) == doctest::Approx(0.025));
  CHECK(g.node(20) == doctest::Approx(1.0));
  for (Scheme s : {Scheme::explicit_rk, Scheme::implicit_ros2, Scheme::automatic})
    CHECK(scheme_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scheme_from_string("euler"), DomainError);
}

TEST_CASE("pack and unpack") {
  const Grid1D g(16);
  const Problem prob(kBumpCase, g);
  const FieldState s = random_state(g, 1);
  const auto y = prob.pack(s);
  CHECK(y.size() == 31);
  const FieldState r = prob.unpack(0.0, y);
  CHECK(r.v == s.v);
  CHECK(r.theta == s.theta);
  FieldState bad = s;
  bad.theta.pop_back();
  CHECK_THROWS_AS(prob.pack(bad), DomainError);
}

TEST_CASE("banded Jacobian matches finite differences") {
  const Grid1D g(16);
  Boundary bc{[](double t) { return 0.1 * t; }, [](double t) { return 1.0 + 0.2 * t; }};
  const Problem prob(MaterialParams(0.3, 0.7, 0.4, 0.5), g, bc);
  const FieldState s = random_state(g, 7);
  auto y = prob.pack(s);
  const int m = static_cast<int>(prob.dim());
  std::vector<double> ab, f0(m), f1(m);
  const double t = 0.3;
  prob.jacobian_band(t, y.data(), ab);
  prob.rhs(t, y.data(), f0.data());
  double worst = 0.0;
  for (int c = 0; c < m; ++c) {
    const double dy = 1e-6 * std::max(1.0, std::abs(y[c]));
    const double keep = y[c];
    y[c] += dy;
    prob.rhs(t, y.data(), f1.data());
    y[c] -= 2 * dy;
    std::vector<double> f2(m);
    prob.rhs(t, y.data(), f2.data());
    y[c] = keep;
    for (int r = 0; r < m; ++r) {
      const double fd = (f1[r] - f2[r]) / (2 * dy);
      const double an = std::abs(r - c) <= 2 ? ab[(4 + r - c) + static_cast<std::size_t>(c) * 7] : 0.0;
      worst = std::max(worst, std::abs(fd - an) / (1.0 + std::abs(fd)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("uniform shear is tracked by both schemes") {
  const Grid1D g(256);
  const Problem prob(kBumpCase, g);
  RunConfig c;
  c.params = kBumpCase;
  c.N = 256;
  const FieldState s = initial_state(c, g);
  std::vector<double> ts;
  for (int k = 1; k <= 50; ++k) ts.push_back(0.2 * k);
  for (Scheme sch : {Scheme::explicit_rk, Scheme::implicit_ros2}) {
    StepControl ctl;
    ctl.scheme = sch;
    double err = 0.0;
    SolverStats st;
    prob.advance(s, 10.0, ctl, ts, [&](const FieldState& f) {
      const double th = uniform_shear(kBumpCase, f.t).theta_s;
      for (double x : f.theta) err = std::max(err, std::abs(x - th));
      for (int i = 0; i <= g.N(); ++i) err = std::max(err, std::abs(f.v[i] - g.node(i)));
    }, &st);
    CHECK(st.scheme_used == sch);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("manufactured solution: second order in space") {
  const MaterialParams p(0.2, 0.5, 0.1, 0.0);
  const double eps = 0.2, n = p.n(), a = p.alpha(), k = p.kappa();
  auto v_ex = [&](double x, double t) { return x + eps * std::exp(-t) * std::sin(2 * pi * x) / (2 * pi); };
  auto th_ex = [&](double x, double t) { return 1.0 + 0.3 * std::exp(-t) * std::cos(pi * x) + 0.1 * t; };
  auto fields = [&](double x, double t) {
    const double u = 1.0 + eps * std::exp(-t) * std::cos(2 * pi * x);
    const double ux = -2 * pi * eps * std::exp(-t) * std::sin(2 * pi * x);
    const double th = th_ex(x, t);
    const double thx = -0.3 * pi * std::exp(-t) * std::sin(pi * x);
    const double sig = std::exp(-a * th) * std::pow(u, n);
    return std::array<double, 4>{u, sig, sig * (-a * thx + n * ux / u), thx};
  };
  Sources src{
      [&](double x, double t) {
        return -eps * std::exp(-t) * std::sin(2 * pi * x) / (2 * pi) - fields(x, t)[2];
      },
      [&](double x, double t) {
        const auto f = fields(x, t);
        const double tht = -0.3 * std::exp(-t) * std::cos(pi * x) + 0.1;
        const double thxx = -0.3 * pi * pi * std::exp(-t) * std::cos(pi * x);
        return tht - k * thxx - f[1] * f[0];
      }};
  std::vector<double> errs;
  for (int N : {32, 64, 128}) {
    const Grid1D g(N);
    const Problem prob(p, g, {}, src);
    FieldState s;
    s.v.resize(N + 1);
    s.theta.resize(N);
    for (int i = 0; i <= N; ++i) s.v[i] = v_ex(g.node(i), 0.0);
    for (int j = 0; j < N; ++j) s.theta[j] = th_ex(g.center(j), 0.0);
    StepControl ctl;
    ctl.scheme = Scheme::explicit_rk;
    ctl.rtol = ctl.atol = 1e-11;
    const FieldState r = prob.advance(s, 0.5, ctl);
    double e = 0.0;
    for (int i = 0; i <= N; ++i) e = std::max(e, std::abs(r.v[i] - v_ex(g.node(i), 0.5)));
    for (int j = 0; j < N; ++j) e = std::max(e, std::abs(r.theta[j] - th_ex(g.center(j), 0.5)));
    errs.push_back(e);
  }
  for (std::size_t i = 1; i < errs.size(); ++i)
    CHECK(std::log2(errs[i - 1] / errs[i]) == doctest::Approx(2.0).epsilon(0.1));

  // the implicit scheme handles the non-autonomous forcing too
  const Grid1D g(64);
  const Problem prob(p, g, {}, src);
  FieldState s;
  s.v.resize(65);
  s.theta.resize(64);
  for (int i = 0; i <= 64; ++i) s.v[i] = v_ex(g.node(i), 0.0);
  for (int j = 0; j < 64; ++j) s.theta[j] = th_ex(g.center(j), 0.0);
  StepControl ci;
  ci.scheme = Scheme::implicit_ros2;
  ci.rtol = ci.atol = 1e-10;
  StepControl ce = ci;
  ce.scheme = Scheme::explicit_rk;
  const FieldState ri = prob.advance(s, 0.5, ci), re = prob.advance(s, 0.5, ce);
  CHECK(max_diff(ri.theta, re.theta) < 1e-7);
  CHECK(max_diff(ri.v, re.v) < 1e-7);
}

TEST_CASE("boundary invariants and stress flux on a bump run") {
  std::vector<double> flux;
  for (int N : {64, 128, 256}) {
    RunConfig c;
    c.N = N;
    c.initial.type = "gaussian_bump";
    c.initial.width = 0.1;
    c.t_end = 2.0;
    c.output.count = 11;
    c.output.snapshots = 11;
    const auto r = run(c);
    REQUIRE_FALSE(r.aborted);
    REQUIRE(r.snapshots.size() == 11);
    for (const auto& d : r.diagnostics) CHECK(d.integral_u == doctest::Approx(1.0).epsilon(1e-13));
    for (const auto& s : r.snapshots) {
      CHECK(s.v.front() == 0.0);
      CHECK(s.v.back() == 1.0);
    }
    const Grid1D g(N);
    const auto& s = r.snapshots[5];
    flux.push_back(std::max(std::abs(boundary_stress_flux(c.params, g, s, 0)),
                            std::abs(boundary_stress_flux(c.params, g, s, 1))));
  }
  CHECK(flux[1] < flux[0] / 3.0);
  CHECK(flux[2] < flux[1] / 3.0);
  CHECK(flux[2] < 1e-4);
}

TEST_CASE("zero-amplitude bump stays on the uniform state") {
  RunConfig c;
  c.N = 64;
  c.initial.type = "gaussian_bump";
  c.initial.amplitude = 0.0;
  c.t_end = 20.0;
  c.output.count = 21;
  const auto r = run(c);
  for (const auto& d : r.diagnostics) {
    CHECK(d.inhomogeneity == 0.0);
    CHECK(std::abs(d.max_u - 1.0) < 1e-13);
    CHECK(std::abs(d.mode1_u) < 1e-13);
    CHECK(std::abs(d.mode1_theta) < 1e-13);
    CHECK(d.energy < 1e-14);
  }
}

TEST_CASE("schemes agree on a bump run") {
  RunConfig c;
  c.N = 64;
  c.initial.type = "gaussian_bump";
  c.initial.width = 0.1;
  c.t_end = 5.0;
  c.output.count = 6;
  c.control.scheme = Scheme::explicit_rk;
  const auto re = run(c);
  c.control.scheme = Scheme::implicit_ros2;
  const auto ri = run(c);
  CHECK(re.stats.scheme_used == Scheme::explicit_rk);
  CHECK(ri.stats.scheme_used == Scheme::implicit_ros2);
  for (std::size_t k = 0; k < re.diagnostics.size(); ++k) {
    CHECK(std::abs(re.diagnostics[k].mode1_theta - ri.diagnostics[k].mode1_theta) < 1e-6);
    CHECK(std::abs(re.diagnostics[k].max_u - ri.diagnostics[k].max_u) < 1e-6);
  }
  c.control.scheme = Scheme::automatic;
  c.N = 512;
  c.t_end = 500.0;
  CHECK(choose_scheme(Problem(c.params, Grid1D(512)), initial_state(c, Grid1D(512)), 500.0) ==
        Scheme::implicit_ros2);
}

TEST_CASE("small cosine perturbation grows at the linear rate") {
  const MaterialParams p(0.05, 0.5, 0.0, 0.0);
  const auto me = mode_eigen(p, 0.0, 1);
  REQUIRE(me.lambda_plus > 0.0);
  const double x = pi * pi, amp = 1e-4;
  RunConfig c;
  c.params = p;
  c.N = 128;
  c.initial.type = "cosine_mode";
  c.initial.amplitude = amp;
  c.initial.amplitude_u = p.alpha() * x * amp / (p.n() * x + me.lambda_plus);
  c.t_end = t_of_tau(p, 1.0 / me.lambda_plus);
  c.output.count = 21;
  c.output.snapshots = 0;
  const auto r = run(c);
  const auto& d0 = r.diagnostics.front();
  CHECK(d0.mode1_theta == doctest::Approx(amp).epsilon(1e-3));
  for (const auto& d : r.diagnostics) {
    const double pred = std::log(d.mode1_theta / amp);
    CHECK(pred == doctest::Approx(me.lambda_plus * tau_of_t(p, d.t)).epsilon(1e-3).scale(1e-6));
  }
}

TEST_CASE("kappa = 0 run follows the exact localized solution") {
  const MaterialParams p(0.1, 0.5, 0.0, 0.0);
  const auto sol = make_localized(p, ScalingParams(0.1, 0.023));
  const double t_end = 2.0;
  // v(x) = int_{1/2}^x u, tabulated boundary data
  auto half_integral = [&](double t) {
    const int m = 4000;
    double acc = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double y = 0.5 * i / m;
      const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * sol.evaluate(y, t).u;
    }
    return acc * 0.5 / m / 3.0;
  };
  std::vector<double> tt, It;
  for (int k = 0; k <= 100; ++k) {
    tt.push_back(t_end * k / 100.0);
    It.push_back(half_integral(tt.back()));
  }
  const interp::MonotoneCubic I(tt, It);
  Boundary bc{[&](double t) { return -I(t); }, [&](double t) { return I(t); }};

  std::vector<double> errs;
  for (int N : {256, 512}) {
    const Grid1D g(N);
    FieldState s;
    s.v.assign(N + 1, 0.0);
    s.theta.resize(N);
    s.v[0] = -It[0];
    for (int i = 1; i <= N; ++i) {
      const double xa = g.node(i - 1) - 0.5, xb = g.node(i) - 0.5, xm = 0.5 * (xa + xb);
      s.v[i] = s.v[i - 1] + (xb - xa) / 6.0 *
                                (sol.evaluate(xa, 0).u + 4 * sol.evaluate(xm, 0).u + sol.evaluate(xb, 0).u);
    }
    for (int j = 0; j < N; ++j) s.theta[j] = sol.evaluate(g.center(j) - 0.5, 0.0).theta;
    const Problem prob(p, g, bc);
    StepControl ctl;
    ctl.scheme = Scheme::explicit_rk;
    const FieldState r = prob.advance(s, t_end, ctl);
    const auto u = strain_rate(g, r);
    double e = 0.0, scale = 0.0;
    for (int j = 0; j < N; ++j) {
      const double x = g.center(j);
      if (x < 1.0 / 3.0 || x > 2.0 / 3.0) continue;
      const auto ex = sol.evaluate(x - 0.5, t_end);
      e = std::max({e, std::abs(u[j] - ex.u) / ex.u, std::abs(r.theta[j] - ex.theta)});
      scale = std::max(scale, ex.u);
    }
    errs.push_back(e);
  }
  CHECK(errs[1] < 1e-3);
  CHECK(errs[1] < errs[0] / 3.0);
}

TEST_CASE("positivity failure aborts with the state") {
  const Grid1D g(32);
  const Problem prob(kBumpCase, g);
  RunConfig c;
  c.N = 32;
  c.initial.type = "cosine_mode";
  c.initial.amplitude_u = 1.5;
  const FieldState s = initial_state(c, g);
  try {
    prob.advance(s, 1.0, {});
    FAIL("expected a positivity error");
  } catch (const PositivityError& e) {
    CHECK(e.kind() == "positivity");
    CHECK(e.state().v == s.v);
  }
  c.t_end = 1.0;
  const auto r = run(c);
  CHECK(r.aborted.has_value());
  CHECK(r.snapshots.back().v == s.v);
}

TEST_CASE("late-time weighted energy is non-increasing after T") {
  RunConfig c;
  c.N = 128;
  c.initial.type = "gaussian_bump";
  c.initial.amplitude = 1e-3;
  c.initial.width = 0.1;
  c.t_end = 300.0;
  c.output.count = 301;
  c.output.snapshots = 0;
  const auto r = run(c);
  const double T = energy_certificate(c.params).T;
  CHECK(r.energy_weight == doctest::Approx(energy_certificate(c.params).A));
  double prev = INFINITY;
  int n_after = 0;
  for (const auto& d : r.diagnostics) {
    if (d.t < T) continue;
    CHECK(d.energy <= prev * (1.0 + 1e-8));
    prev = d.energy;
    ++n_after;
  }
  CHECK(n_after > 100);
}

TEST_CASE("config parsing and output times") {
  const auto j = nlohmann::json::parse(R"({
    "params": {"n": 0.1, "alpha": 0.4, "kappa": 0.2, "theta0": 2},
    "grid": {"N": 64},
    "initial": {"type": "gaussian_bump", "width": 0.07, "amplitude": 0.02, "noise": 1e-3, "seed": 9},
    "t_end": 50,
    "output": {"spacing": "log", "count": 5, "t_first": 0.5, "snapshots": 3},
    "solver": {"scheme": "implicit", "rtol": 1e-7}
  })");
  const RunConfig c = parse_run_config(j);
  CHECK(c.params.kappa() == 0.2);
  CHECK(c.N == 64);
  CHECK(c.initial.seed == 9);
  CHECK(c.control.scheme == Scheme::implicit_ros2);
  CHECK(c.control.atol == 1e-8);
  const RunConfig back = parse_run_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const auto t = output_times(c.output, c.t_end);
  REQUIRE(t.size() == 5);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == 0.5);
  CHECK(t[2] == doctest::Approx(0.5 * std::pow(100.0, 1.0 / 3.0)));
  CHECK(t[4] == 50.0);
  CHECK(snapshot_times(c.output, c.t_end) == std::vector<double>{0.0, 0.5, 50.0});
  OutputSpec lin;
  lin.count = 3;
  CHECK(output_times(lin, 4.0) == std::vector<double>{0.0, 2.0, 4.0});

  for (const char* bad : {R"({"t_end": -1})", R"({"grid": {"N": 8}})",
                          R"({"initial": {"type": "sawtooth"}})",
                          R"({"initial": {"type": "gaussian_bump", "width": 0}})",
                          R"({"output": {"spacing": "cubic"}})", R"({"params": {"n": "x"}})",
                          R"({"solver": {"scheme": "euler"}})"}) {
    CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(bad)), DomainError);
  }
}

TEST_CASE("noise is reproducible from the seed") {
  RunConfig c;
  c.N = 32;
  c.initial.type = "gaussian_bump";
  c.initial.noise = 1e-3;
  c.initial.seed = 5;
  const Grid1D g(32);
  const auto a = initial_state(c, g), b = initial_state(c, g);
  CHECK(a.theta == b.theta);
  c.initial.seed = 6;
  CHECK(initial_state(c, g).theta != a.theta);
}

TEST_CASE("initial data from a file") {
  const auto path = std::filesystem::temp_directory_path() / "shearlab_init_test.csv";
  {
    std::ofstream os(path);
    csv::write_header(os, {"x", "v", "theta"});
    for (int i = 0; i <= 200; ++i) {
      const double x = i / 200.0;
      csv::write_row(os, {x, x + 0.01 * std::sin(pi * x), 1.0 + 0.05 * std::cos(pi * x)});
    }
  }
  RunConfig c;
  c.N = 64;
  c.initial.type = "from_file";
  c.initial.path = path.string();
  const Grid1D g(64);
  const auto s = initial_state(c, g);
  CHECK(s.v.front() == 0.0);
  CHECK(s.v.back() == 1.0);
  CHECK(s.v[32] == doctest::Approx(0.5 + 0.01).epsilon(1e-6));
  CHECK(s.theta[0] == doctest::Approx(1.0 + 0.05 * std::cos(pi * g.center(0))).epsilon(1e-6));
  {
    std::ofstream os(path);
    csv::write_header(os, {"x", "v", "theta"});
    csv::write_row(os, {0.0, 0.1, 1.0});
    csv::write_row(os, {1.0, 1.0, 1.0});
  }
  CHECK_THROWS_AS(initial_state(c, g), DomainError);
  std::filesystem::remove(path);
}

TEST_CASE("csv outputs and determinism") {
  RunConfig c;
  c.N = 32;
  c.initial.type = "gaussian_bump";
  c.t_end = 1.0;
  c.output.count = 3;
  c.output.snapshots = 2;
  const auto r1 = run(c), r2 = run(c);
  std::stringstream d1, d2, s1;
  write_diagnostics_csv(d1, c, r1);
  write_diagnostics_csv(d2, c, r2);
  CHECK(d1.str() == d2.str());
  const auto td = csv::read(d1);
  CHECK(td.columns ==
        std::vector<std::string>{"t", "inhomogeneity", "max_u", "mode1_u", "mode1_theta", "energy"});
  CHECK(td.rows.size() == 3);
  CHECK(td.meta.at("scheme") == "explicit");
  write_snapshots_csv(s1, c, r1);
  const auto ts = csv::read(s1);
  CHECK(ts.rows.size() == 64);
  CHECK(ts.columns == std::vector<std::string>{"t", "x", "v", "u", "theta", "sigma"});
  CHECK(ts.rows[32][0] == 1.0);
}
