#include "shearlab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <set>

#include "shearlab/csv.hpp"
#include "shearlab/interp.hpp"
#include "shearlab/ode.hpp"
#include "shearlab/stability.hpp"

extern "C" {
void dgbtrf_(const int* m, const int* n, const int* kl, const int* ku, double* ab,
             const int* ldab, int* ipiv, int* info);
void dgbtrs_(const char* trans, const int* n, const int* kl, const int* ku, const int* nrhs,
             const double* ab, const int* ldab, const int* ipiv, double* b, const int* ldb,
             int* info, std::size_t trans_len);
}

namespace shearlab::pde {

namespace {
constexpr int kKl = 2, kKu = 2, kLdab = 2 * kKl + kKu + 1;
}

Grid1D::Grid1D(int N) : N_(N), h_(1.0 / N) {
  if (N < 16) throw DomainError("grid needs N >= 16 cells");
}

std::vector<double> strain_rate(const Grid1D& g, const FieldState& s) {
  std::vector<double> u(g.N());
  for (int j = 0; j < g.N(); ++j) u[j] = (s.v[j + 1] - s.v[j]) / g.h();
  return u;
}

std::vector<double> stress(const MaterialParams& p, const Grid1D& g, const FieldState& s) {
  const auto u = strain_rate(g, s);
  std::vector<double> sig(g.N());
  for (int j = 0; j < g.N(); ++j) sig[j] = constitutive_stress(p, s.theta[j], u[j]);
  return sig;
}

double boundary_stress_flux(const MaterialParams& p, const Grid1D& g, const FieldState& s,
                            int side) {
  const auto sig = stress(p, g, s);
  const int N = g.N();
  // quadratic through the three cells next to the wall
  if (side == 0) return (-2.0 * sig[0] + 3.0 * sig[1] - sig[2]) / g.h();
  if (side == 1) return (2.0 * sig[N - 1] - 3.0 * sig[N - 2] + sig[N - 3]) / g.h();
  throw DomainError("side must be 0 or 1");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::explicit_rk: return "explicit";
    case Scheme::implicit_ros2: return "implicit";
    case Scheme::automatic: return "auto";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "explicit") return Scheme::explicit_rk;
  if (s == "implicit") return Scheme::implicit_ros2;
  if (s == "auto") return Scheme::automatic;
  throw DomainError("unknown scheme '" + s + "' (explicit | implicit | auto)");
}

// ---------------------------------------------------------------------------

Problem::Problem(MaterialParams p, Grid1D g, Boundary bc, Sources src)
    : p_(p), g_(g), bc_(std::move(bc)), src_(std::move(src)) {}

std::vector<double> Problem::pack(const FieldState& s) const {
  const int N = g_.N();
  if (static_cast<int>(s.v.size()) != N + 1 || static_cast<int>(s.theta.size()) != N) {
    throw DomainError("state size does not match the grid");
  }
  std::vector<double> y(dim());
  for (int j = 0; j < N; ++j) y[2 * j] = s.theta[j];
  for (int i = 1; i < N; ++i) y[2 * i - 1] = s.v[i];
  return y;
}

FieldState Problem::unpack(double t, const std::vector<double>& y) const {
  const int N = g_.N();
  FieldState s;
  s.t = t;
  s.v.resize(N + 1);
  s.theta.resize(N);
  s.v[0] = bc_.at_left(t);
  s.v[N] = bc_.at_right(t);
  for (int j = 0; j < N; ++j) s.theta[j] = y[2 * j];
  for (int i = 1; i < N; ++i) s.v[i] = y[2 * i - 1];
  return s;
}

void Problem::rhs(double t, const double* y, double* dydt) const {
  const int N = g_.N();
  const double h = g_.h(), n = p_.n(), a = p_.alpha(), k = p_.kappa();
  const double vl = bc_.at_left(t), vr = bc_.at_right(t);
  auto v = [&](int i) { return i == 0 ? vl : (i == N ? vr : y[2 * i - 1]); };
  thread_local std::vector<double> sig, u;
  sig.resize(N);
  u.resize(N);
  for (int j = 0; j < N; ++j) {
    u[j] = (v(j + 1) - v(j)) / h;
    sig[j] = u[j] > 0.0 ? std::exp(-a * y[2 * j] + n * std::log(u[j])) : NAN;
  }
  const double kh = k / (h * h);
  for (int j = 0; j < N; ++j) {
    const double tl = y[2 * std::max(j - 1, 0)], tr = y[2 * std::min(j + 1, N - 1)];
    double r = kh * (tl - 2.0 * y[2 * j] + tr) + sig[j] * u[j];
    if (src_.theta) r += src_.theta(g_.center(j), t);
    dydt[2 * j] = r;
  }
  for (int i = 1; i < N; ++i) {
    double r = (sig[i] - sig[i - 1]) / h;
    if (src_.v) r += src_.v(g_.node(i), t);
    dydt[2 * i - 1] = r;
  }
}

void Problem::jacobian_band(double t, const double* y, std::vector<double>& ab) const {
  const int N = g_.N(), m = static_cast<int>(dim());
  const double h = g_.h(), n = p_.n(), a = p_.alpha(), kh = p_.kappa() / (h * h);
  const double vl = bc_.at_left(t), vr = bc_.at_right(t);
  auto v = [&](int i) { return i == 0 ? vl : (i == N ? vr : y[2 * i - 1]); };
  ab.assign(static_cast<std::size_t>(kLdab) * m, 0.0);
  auto set = [&](int r, int c, double val) {
    if (c < 0 || c >= m) return;
    ab[(kKl + kKu + r - c) + static_cast<std::size_t>(c) * kLdab] += val;
  };
  std::vector<double> sig(N), s(N), u(N);
  for (int j = 0; j < N; ++j) {
    u[j] = (v(j + 1) - v(j)) / h;
    sig[j] = constitutive_stress(p_, y[2 * j], u[j]);
    s[j] = n * sig[j] / u[j];  // d sigma / d u
  }
  for (int j = 0; j < N; ++j) {
    const int r = 2 * j;
    double diag = -2.0 * kh - a * sig[j] * u[j];
    if (j > 0) set(r, r - 2, kh); else diag += kh;
    if (j < N - 1) set(r, r + 2, kh); else diag += kh;
    set(r, r, diag);
    const double dsu = (n + 1.0) * sig[j] / h;  // d(sigma u)/du * du/dv
    if (j + 1 <= N - 1) set(r, 2 * j + 1, dsu);
    if (j >= 1) set(r, 2 * j - 1, -dsu);
  }
  const double h2 = h * h;
  for (int i = 1; i < N; ++i) {
    const int r = 2 * i - 1;
    set(r, 2 * i, -a * sig[i] / h);
    set(r, 2 * i - 2, a * sig[i - 1] / h);
    if (i + 1 <= N - 1) set(r, 2 * i + 1, s[i] / h2);
    set(r, r, -(s[i] + s[i - 1]) / h2);
    if (i - 1 >= 1) set(r, 2 * i - 3, s[i - 1] / h2);
  }
}

Scheme choose_scheme(const Problem& prob, const FieldState& s, double t_end) {
  const auto& p = prob.params();
  const auto& g = prob.grid();
  const auto u = strain_rate(g, s);
  double D = p.kappa();
  for (int j = 0; j < g.N(); ++j) {
    if (u[j] > 0.0) D = std::max(D, p.n() * constitutive_stress(p, s.theta[j], u[j]) / u[j]);
  }
  const double dt = 2.5 * g.h() * g.h() / (4.0 * D);
  return (t_end - s.t) / dt > 1e5 ? Scheme::implicit_ros2 : Scheme::explicit_rk;
}

namespace {

void check_positive(const Problem& prob, const FieldState& s) {
  const auto u = strain_rate(prob.grid(), s);
  for (int j = 0; j < prob.grid().N(); ++j) {
    if (!(u[j] > 0.0)) {
      throw PositivityError("strain rate u=" + csv::fmt(u[j]) + " <= 0 at x=" +
                                csv::fmt(prob.grid().center(j)) + ", t=" + csv::fmt(s.t),
                            s);
    }
  }
}

double err_norm(const std::vector<double>& e, const std::vector<double>& y0,
                const std::vector<double>& y1, double atol, double rtol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (e[i] / sc) * (e[i] / sc);
  }
  return std::sqrt(acc / static_cast<double>(e.size()));
}

FieldState advance_explicit(const Problem& prob, const FieldState& s, double t_end,
                            const StepControl& ctl, const std::vector<double>& out,
                            const std::function<void(const FieldState&)>& observe,
                            SolverStats& st) {
  ode::Options o;
  o.rtol = ctl.rtol;
  o.atol = ctl.atol;
  o.max_steps = ctl.max_steps;
  o.h_max = ctl.h_max;
  const ode::Dopri5 solver(o);
  std::size_t next = 0;
  std::vector<double> buf(prob.dim());
  auto f = [&](double t, std::span<const double> y, std::span<double> dy) {
    prob.rhs(t, y.data(), dy.data());
  };
  auto obs = [&](const ode::StepInfo& info) {
    const std::vector<double> y(info.y.begin(), info.y.end());
    check_positive(prob, prob.unpack(info.t, y));
    while (next < out.size() && out[next] <= info.t) {
      info.dense.eval(out[next], buf);
      if (observe) observe(prob.unpack(out[next], buf));
      ++next;
    }
    return true;
  };
  const auto y0 = prob.pack(s);
  try {
    const auto r = solver.integrate(f, s.t, y0, t_end, obs);
    st.accepted += r.stats.accepted;
    st.rejected += r.stats.rejected;
    return prob.unpack(r.t, r.y);
  } catch (const NumericalError& e) {
    if (e.kind() == "step-underflow" || e.kind() == "max-steps") {
      throw NumericalError(e.kind(), std::string(e.what()) +
                                         "; the problem is stiff, try the implicit scheme");
    }
    throw;
  }
}

FieldState advance_ros2(const Problem& prob, const FieldState& s, double t_end,
                        const StepControl& ctl, const std::vector<double>& out,
                        const std::function<void(const FieldState&)>& observe,
                        SolverStats& st) {
  const int m = static_cast<int>(prob.dim());
  const double gamma = 1.0 + 1.0 / std::numbers::sqrt2;
  std::vector<double> y = prob.pack(s), y1(m), ynew(m), f0(m), f1(m), ft(m), k1(m), k2(m),
                      e(m), ab, lu(static_cast<std::size_t>(kLdab) * m);
  std::vector<int> ipiv(m);
  double t = s.t;
  double h = std::min({1e-4 * std::max(1.0, t_end - t), ctl.h_max, t_end - t});
  std::size_t next = 0;
  long steps = 0;

  auto solve = [&](std::vector<double>& b) {
    const int nrhs = 1;
    int info = 0;
    const char tr = 'N';
    dgbtrs_(&tr, &m, &kKl, &kKu, &nrhs, lu.data(), &kLdab, ipiv.data(), b.data(), &m, &info, 1);
    if (info != 0) throw NumericalError("linear-solve", "dgbtrs failed");
  };

  while (t < t_end) {
    if (++steps > ctl.max_steps) {
      throw NumericalError("max-steps", "implicit solver exceeded " +
                                            std::to_string(ctl.max_steps) + " steps at t=" +
                                            csv::fmt(t));
    }
    const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t);
    if (h < h_floor) {
      throw NumericalError("step-underflow", "implicit step size underflow at t=" + csv::fmt(t));
    }
    double target = t_end;
    if (next < out.size()) target = std::min(target, out[next]);
    const double h_free = h;
    const bool hits = t + h >= target;
    if (hits) h = target - t;

    prob.rhs(t, y.data(), f0.data());
    prob.jacobian_band(t, y.data(), ab);
    if (!prob.autonomous()) {
      const double dt = 1e-7 * std::max(1.0, std::abs(t));
      prob.rhs(t + dt, y.data(), ft.data());
      for (int i = 0; i < m; ++i) ft[i] = (ft[i] - f0[i]) / dt;
    } else {
      std::fill(ft.begin(), ft.end(), 0.0);
    }
    for (std::size_t i = 0; i < lu.size(); ++i) lu[i] = -gamma * h * ab[i];
    for (int c = 0; c < m; ++c) lu[(kKl + kKu) + static_cast<std::size_t>(c) * kLdab] += 1.0;
    int info = 0;
    dgbtrf_(&m, &m, &kKl, &kKu, lu.data(), &kLdab, ipiv.data(), &info);
    bool ok = info == 0;
    double err = INFINITY;
    if (ok) {
      for (int i = 0; i < m; ++i) k1[i] = f0[i] + gamma * h * ft[i];
      solve(k1);
      for (int i = 0; i < m; ++i) y1[i] = y[i] + h * k1[i];
      prob.rhs(t + h, y1.data(), f1.data());
      for (int i = 0; i < m; ++i) k2[i] = f1[i] - 2.0 * k1[i] - gamma * h * ft[i];
      solve(k2);
      for (int i = 0; i < m; ++i) {
        ynew[i] = y[i] + 1.5 * h * k1[i] + 0.5 * h * k2[i];
        e[i] = 0.5 * h * (k1[i] + k2[i]);
      }
      err = err_norm(e, y, ynew, ctl.atol, ctl.rtol);
    }
    if (!ok || !std::isfinite(err) || err > 1.0) {
      ++st.rejected;
      h *= std::isfinite(err) ? std::max(0.2, 0.9 / std::sqrt(err)) : 0.25;
      continue;
    }
    ++st.accepted;
    t = hits ? target : t + h;
    y.swap(ynew);
    const FieldState cur = prob.unpack(t, y);
    check_positive(prob, cur);
    while (next < out.size() && out[next] <= t) {
      if (observe) observe(cur);
      ++next;
    }
    const double grow = std::min(5.0, std::max(0.2, 0.9 / std::sqrt(std::max(err, 1e-10))));
    h = std::min(ctl.h_max, (hits ? std::max(h, h_free) : h) * grow);
  }
  return prob.unpack(t, y);
}

}  // namespace

FieldState Problem::advance(const FieldState& s, double t_end, const StepControl& ctl,
                            const std::vector<double>& out_times,
                            const std::function<void(const FieldState&)>& observe,
                            SolverStats* stats) const {
  if (!(t_end > s.t)) throw DomainError("advance: t_end must exceed the state time");
  if (!(ctl.rtol > 0.0) || !(ctl.atol > 0.0)) throw DomainError("tolerances must be > 0");
  for (std::size_t i = 0; i < out_times.size(); ++i) {
    if (out_times[i] <= s.t || out_times[i] > t_end || (i > 0 && out_times[i] <= out_times[i - 1])) {
      throw DomainError("output times must increase within (t, t_end]");
    }
  }
  check_positive(*this, s);
  SolverStats local;
  const Scheme sch = ctl.scheme == Scheme::automatic ? choose_scheme(*this, s, t_end) : ctl.scheme;
  local.scheme_used = sch;
  FieldState r = sch == Scheme::explicit_rk
                     ? advance_explicit(*this, s, t_end, ctl, out_times, observe, local)
                     : advance_ros2(*this, s, t_end, ctl, out_times, observe, local);
  if (stats) {
    stats->accepted += local.accepted;
    stats->rejected += local.rejected;
    stats->scheme_used = sch;
  }
  return r;
}

// ---------------------------------------------------------------------------

Diagnostics diagnose(const MaterialParams& p, const Grid1D& g, const FieldState& s,
                     double energy_weight) {
  const auto u = strain_rate(g, s);
  const double ts = uniform_shear(p, s.t).theta_s, h = g.h();
  Diagnostics d{};
  d.t = s.t;
  const auto [lo, hi] = std::minmax_element(s.theta.begin(), s.theta.end());
  d.inhomogeneity = *hi - *lo;
  d.max_u = *std::max_element(u.begin(), u.end());
  d.min_u = *std::min_element(u.begin(), u.end());
  for (int j = 0; j < g.N(); ++j) {
    const double c = std::cos(std::numbers::pi * g.center(j));
    d.mode1_u += 2.0 * h * u[j] * c;
    d.mode1_theta += 2.0 * h * s.theta[j] * c;
    const double du = u[j] - 1.0, dt = s.theta[j] - ts;
    d.energy += h * (0.5 * energy_weight * du * du + 0.5 * dt * dt);
    d.integral_u += h * u[j];
  }
  return d;
}

// ---------------------------------------------------------------------------

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("params")) {
      const auto& p = j.at("params");
      c.params = MaterialParams(p.value("n", c.params.n()), p.value("alpha", c.params.alpha()),
                                p.value("kappa", c.params.kappa()),
                                p.value("theta0", c.params.theta0()));
    }
    if (j.contains("grid")) c.N = j.at("grid").value("N", c.N);
    if (j.contains("initial")) {
      const auto& i = j.at("initial");
      auto& d = c.initial;
      d.type = i.value("type", d.type);
      d.center = i.value("center", d.center);
      d.width = i.value("width", d.width);
      d.amplitude = i.value("amplitude", d.amplitude);
      d.noise = i.value("noise", d.noise);
      d.seed = i.value("seed", d.seed);
      d.mode = i.value("mode", d.mode);
      d.amplitude_u = i.value("amplitude_u", d.amplitude_u);
      d.path = i.value("path", d.path);
    }
    c.t_end = j.value("t_end", c.t_end);
    if (j.contains("output")) {
      const auto& o = j.at("output");
      c.output.spacing = o.value("spacing", c.output.spacing);
      c.output.count = o.value("count", c.output.count);
      c.output.t_first = o.value("t_first", c.output.t_first);
      c.output.snapshots = o.value("snapshots", c.output.snapshots);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      c.control.scheme = scheme_from_string(s.value("scheme", to_string(c.control.scheme)));
      c.control.rtol = s.value("rtol", c.control.rtol);
      c.control.atol = s.value("atol", c.control.atol);
      c.control.max_steps = s.value("max_steps", c.control.max_steps);
    }
    if (j.contains("energy_weight") && !j.at("energy_weight").is_null()) {
      c.energy_weight = j.at("energy_weight").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("run config: ") + e.what());
  }
  if (!(c.t_end > 0.0)) throw DomainError("t_end must be > 0");
  if (c.N < 16) throw DomainError("grid.N must be >= 16");
  const auto& t = c.initial.type;
  if (t != "uniform" && t != "gaussian_bump" && t != "cosine_mode" && t != "from_file") {
    throw DomainError("unknown initial data type '" + t + "'");
  }
  if (t == "gaussian_bump" && !(c.initial.width > 0.0)) throw DomainError("bump width must be > 0");
  if (t == "cosine_mode" && c.initial.mode < 1) throw DomainError("cosine mode must be >= 1");
  if (t == "from_file" && c.initial.path.empty()) throw DomainError("from_file needs a path");
  if (c.output.spacing != "linear" && c.output.spacing != "log") {
    throw DomainError("output.spacing must be linear or log");
  }
  if (c.output.count < 2) throw DomainError("output.count must be >= 2");
  if (c.output.snapshots < 0) throw DomainError("output.snapshots must be >= 0");
  if (c.output.spacing == "log" && !(c.output.t_first > 0.0 && c.output.t_first < c.t_end)) {
    throw DomainError("output.t_first must lie in (0, t_end)");
  }
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["params"] = {{"n", c.params.n()},
                 {"alpha", c.params.alpha()},
                 {"kappa", c.params.kappa()},
                 {"theta0", c.params.theta0()}};
  j["grid"] = {{"N", c.N}};
  const auto& d = c.initial;
  j["initial"] = {{"type", d.type}};
  if (d.type == "gaussian_bump") {
    j["initial"].update({{"center", d.center},
                         {"width", d.width},
                         {"amplitude", d.amplitude},
                         {"noise", d.noise},
                         {"seed", d.seed}});
  } else if (d.type == "cosine_mode") {
    j["initial"].update({{"mode", d.mode}, {"amplitude", d.amplitude}, {"amplitude_u", d.amplitude_u}});
  } else if (d.type == "from_file") {
    j["initial"]["path"] = d.path;
  }
  j["t_end"] = c.t_end;
  j["output"] = {{"spacing", c.output.spacing},
                 {"count", c.output.count},
                 {"t_first", c.output.t_first},
                 {"snapshots", c.output.snapshots}};
  j["solver"] = {{"scheme", to_string(c.control.scheme)},
                 {"rtol", c.control.rtol},
                 {"atol", c.control.atol},
                 {"max_steps", c.control.max_steps}};
  j["energy_weight"] = resolve_energy_weight(c);
  return j;
}

FieldState initial_state(const RunConfig& c, const Grid1D& g) {
  const int N = g.N();
  const auto& d = c.initial;
  const double th0 = c.params.theta0();
  FieldState s;
  s.v.resize(N + 1);
  s.theta.assign(N, th0);
  for (int i = 0; i <= N; ++i) s.v[i] = g.node(i);
  if (d.type == "gaussian_bump") {
    std::mt19937_64 rng(d.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int j = 0; j < N; ++j) {
      const double z = (g.center(j) - d.center) / d.width;
      s.theta[j] += d.amplitude * std::exp(-0.5 * z * z);
      if (d.noise != 0.0) s.theta[j] += d.noise * uni(rng);
    }
  } else if (d.type == "cosine_mode") {
    const double w = d.mode * std::numbers::pi;
    for (int j = 0; j < N; ++j) s.theta[j] += d.amplitude * std::cos(w * g.center(j));
    for (int i = 0; i <= N; ++i) s.v[i] += d.amplitude_u * std::sin(w * g.node(i)) / w;
    s.v[0] = 0.0;
    s.v[N] = 1.0;
  } else if (d.type == "from_file") {
    const auto tab = csv::read_file(d.path);
    const auto x = tab.column_values("x");
    if (x.size() < 2 || x.front() > 1e-12 || x.back() < 1.0 - 1e-12) {
      throw DomainError("from_file: x must cover [0, 1]");
    }
    const interp::MonotoneCubic fv(x, tab.column_values("v")), ft(x, tab.column_values("theta"));
    for (int i = 0; i <= N; ++i) s.v[i] = fv(g.node(i));
    for (int j = 0; j < N; ++j) s.theta[j] = ft(g.center(j));
    if (std::abs(s.v[0]) > 1e-6 || std::abs(s.v[N] - 1.0) > 1e-6) {
      throw DomainError("from_file: v must satisfy v(0) = 0 and v(1) = 1");
    }
    s.v[0] = 0.0;
    s.v[N] = 1.0;
  }
  return s;
}

namespace {

std::vector<double> spaced(const std::string& spacing, int count, double t_first, double t_end) {
  std::vector<double> t;
  if (count <= 0) return t;
  if (count == 1) return {t_end};
  t.push_back(0.0);
  if (spacing == "linear") {
    for (int k = 1; k < count; ++k) t.push_back(k == count - 1 ? t_end : t_end * k / (count - 1));
  } else {
    const int m = count - 1;
    for (int k = 0; k < m; ++k) {
      t.push_back(k == m - 1 ? t_end
                             : t_first * std::pow(t_end / t_first, m == 1 ? 1.0 : double(k) / (m - 1)));
    }
  }
  return t;
}

}  // namespace

std::vector<double> output_times(const OutputSpec& o, double t_end) {
  return spaced(o.spacing, o.count, o.t_first, t_end);
}

std::vector<double> snapshot_times(const OutputSpec& o, double t_end) {
  return spaced(o.spacing, o.snapshots, o.t_first, t_end);
}

double resolve_energy_weight(const RunConfig& c) {
  if (c.energy_weight) return *c.energy_weight;
  if (c.params.kappa() > 0.0 && c.params.n() > 0.0) return energy_certificate(c.params).A;
  return 1.0;
}

RunResult run(const RunConfig& c) {
  const Grid1D g(c.N);
  const Problem prob(c.params, g);
  RunResult r;
  r.energy_weight = resolve_energy_weight(c);
  const auto diag_t = output_times(c.output, c.t_end);
  const auto snap_t = snapshot_times(c.output, c.t_end);
  const std::set<double> dset(diag_t.begin(), diag_t.end()), sset(snap_t.begin(), snap_t.end());
  std::set<double> all = dset;
  all.insert(sset.begin(), sset.end());

  FieldState s = initial_state(c, g);
  auto record = [&](const FieldState& st) {
    if (dset.count(st.t)) r.diagnostics.push_back(diagnose(c.params, g, st, r.energy_weight));
    if (sset.count(st.t)) r.snapshots.push_back(st);
  };
  record(s);
  std::vector<double> out;
  for (double t : all)
    if (t > 0.0) out.push_back(t);
  try {
    prob.advance(s, c.t_end, c.control, out, record, &r.stats);
  } catch (const PositivityError& e) {
    r.aborted = e.what();
    r.snapshots.push_back(e.state());
  }
  return r;
}

namespace {

csv::Meta run_meta(const RunConfig& c, const RunResult& r) {
  csv::Meta m{{"n", csv::fmt(c.params.n())},
              {"alpha", csv::fmt(c.params.alpha())},
              {"kappa", csv::fmt(c.params.kappa())},
              {"theta0", csv::fmt(c.params.theta0())},
              {"N", std::to_string(c.N)},
              {"initial", c.initial.type},
              {"scheme", to_string(r.stats.scheme_used)},
              {"energy_weight", csv::fmt(r.energy_weight)}};
  if (r.aborted) m.emplace_back("aborted", *r.aborted);
  return m;
}

}  // namespace

void write_diagnostics_csv(std::ostream& os, const RunConfig& c, const RunResult& r) {
  csv::write_meta(os, run_meta(c, r));
  csv::write_header(os, {"t", "inhomogeneity", "max_u", "mode1_u", "mode1_theta", "energy"});
  for (const auto& d : r.diagnostics) {
    csv::write_row(os, {d.t, d.inhomogeneity, d.max_u, d.mode1_u, d.mode1_theta, d.energy});
  }
}

void write_snapshots_csv(std::ostream& os, const RunConfig& c, const RunResult& r) {
  const Grid1D g(c.N);
  csv::write_meta(os, run_meta(c, r));
  csv::write_header(os, {"t", "x", "v", "u", "theta", "sigma"});
  for (const auto& s : r.snapshots) {
    const auto u = strain_rate(g, s);
    for (int j = 0; j < g.N(); ++j) {
      const double sig = u[j] > 0.0 ? constitutive_stress(c.params, s.theta[j], u[j]) : NAN;
      csv::write_row(os, {s.t, g.center(j), 0.5 * (s.v[j] + s.v[j + 1]), u[j], s.theta[j], sig});
    }
  }
}

}  // namespace shearlab::pde
