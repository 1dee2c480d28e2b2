#include "shearlab/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <variant>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/interp.hpp"
#include "shearlab/ode.hpp"

namespace shearlab {

PlanarParams::PlanarParams(double n, double alpha, double nu)
    : n_(n), alpha_(alpha), nu_(nu), c_nu_(1.0 + nu * (n + 1.0) / alpha) {
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("n must be > 0 for the planar system");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be > 0");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("nu must be > 0");
}

PlanarState vector_field(const PlanarParams& p, PlanarState s) {
  if (!(s.b > 0.0)) throw DomainError("vector_field: b must be > 0");
  return {s.a * (1.0 - s.a * s.a / s.b),
          p.stiffness() * (p.c_nu() * s.b - 1.0 - (p.n() + 1.0) * p.nu() * s.a * s.a / p.alpha())};
}

Matrix2 planar_jacobian(const PlanarParams& p, PlanarState s) {
  if (!(s.b > 0.0)) throw DomainError("planar_jacobian: b must be > 0");
  const double a = s.a, b = s.b;
  return {{{1.0 - 3.0 * a * a / b, a * a * a / (b * b)},
           {-2.0 * (p.n() + 1.0) * a / p.n(), p.stiffness() * p.c_nu()}}};
}

bool in_region_R(PlanarState s, double tol) {
  return s.a >= -tol && s.a <= 1.0 + tol && s.a * s.a <= s.b + tol && s.b <= 1.0 + tol;
}

Equilibria equilibria(const PlanarParams& p) {
  const double L = p.stiffness() * p.c_nu();
  EquilibriumInfo P{{0.0, 1.0 / p.c_nu()}, {1.0, L}, {{{1.0, 0.0}, {0.0, 1.0}}},
                    EquilibriumKind::repelling_node};

  // lambda^2 - (L - 2) lambda - 2 alpha/(nu n) = 0
  const double B = -(L - 2.0), C = -2.0 * p.stiffness();
  const double disc = B * B - 4.0 * C;
  const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
  const double r1 = q, r2 = C / q;
  const double lm = std::min(r1, r2), lp = std::max(r1, r2);
  EquilibriumInfo Q{{1.0, 1.0}, {lm, lp}, {{{1.0, 2.0 + lm}, {1.0, 2.0 + lp}}},
                    EquilibriumKind::saddle};
  return {P, Q};
}

// ---------------------------------------------------------------------------

namespace {

struct Derivs {
  double da, dd, d2a, d2d;
};

Derivs node_derivs(const PlanarParams& p, double a, double d) {
  const PlanarState s{a, d + 1.0 / p.c_nu()};
  const PlanarState f = vector_field(p, s);
  const Matrix2 J = planar_jacobian(p, s);
  return {f.a, f.b, J[0][0] * f.a + J[0][1] * f.b, J[1][0] * f.a + J[1][1] * f.b};
}

}  // namespace

OrbitPath::OrbitPath(PlanarParams p, std::vector<double> eta, std::vector<double> a,
                     std::vector<double> d, double eps_used)
    : p_(p), eta_(std::move(eta)), a_(std::move(a)), d_(std::move(d)), eps_used_(eps_used) {
  const std::size_t m = eta_.size();
  if (m < 2 || a_.size() != m || d_.size() != m) throw DomainError("OrbitPath: size mismatch");
  da_.resize(m);
  dd_.resize(m);
  d2a_.resize(m);
  d2d_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0 && !(eta_[i] > eta_[i - 1])) throw DomainError("OrbitPath: eta not increasing");
    const Derivs g = node_derivs(p_, a_[i], d_[i]);
    da_[i] = g.da;
    dd_[i] = g.dd;
    d2a_[i] = g.d2a;
    d2d_[i] = g.d2d;
  }
}

OrbitPath::Sample OrbitPath::at(double eta) const {
  if (eta < eta_.front() || eta > eta_.back()) throw DomainError("OrbitPath: eta outside path");
  const std::size_t i = interp::locate(eta_, eta);
  const double x0 = eta_[i], x1 = eta_[i + 1];
  const auto ha = interp::quintic_hermite(x0, x1, a_[i], da_[i], d2a_[i], a_[i + 1], da_[i + 1],
                                          d2a_[i + 1], eta);
  const auto hd = interp::quintic_hermite(x0, x1, d_[i], dd_[i], d2d_[i], d_[i + 1], dd_[i + 1],
                                          d2d_[i + 1], eta);
  return {ha.f, ha.df, ha.d2f, hd.f, hd.df, hd.d2f};
}

OrbitPath OrbitPath::shifted(double shift, double kappa1, double sigma0) const {
  OrbitPath out = *this;
  for (double& e : out.eta_) e -= shift;
  out.eta0_ = eta0_ + shift;
  out.kappa1_ = kappa1;
  out.sigma0_ = sigma0;
  out.reparametrized_ = true;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ShootFailure {
  std::string kind;
  std::string what;
};

// One backward shot; returns the path or the failure reason.
std::variant<OrbitPath, ShootFailure> shoot_once(const PlanarParams& p, const ShootOptions& o,
                                                 double eps) {
  const Equilibria eq = equilibria(p);
  const PlanarState r = eq.Q.eigenvectors[0];
  const double nr = std::hypot(r.a, r.b);
  const double a0 = 1.0 - eps * r.a / nr;
  const double d0 = (1.0 - 1.0 / p.c_nu()) - eps * r.b / nr;

  ode::Options opts;
  opts.rtol = o.rtol;
  opts.atol = 1e-300;  // pure relative control: a and d both tend to 0
  opts.max_steps = o.max_steps;
  opts.h_max = o.h_max;
  const ode::Dopri5 solver(opts);

  // s = -eta; y = (a, d)
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
    const double b = y[1] + 1.0 / p.c_nu();
    dy[0] = -(y[0] * (1.0 - y[0] * y[0] / b));
    dy[1] = -(p.stiffness() * (p.c_nu() * y[1] - (p.n() + 1.0) * p.nu() * y[0] * y[0] / p.alpha()));
  };

  std::vector<double> s_list{0.0}, a_list{a0}, d_list{d0};
  std::optional<ShootFailure> failure;
  bool reached = false;
  const std::array<double, 2> y0{a0, d0};
  solver.integrate(rhs, 0.0, y0, 1e4, [&](const ode::StepInfo& info) {
    const double a = info.y[0], d = info.y[1];
    const PlanarState st{a, d + 1.0 / p.c_nu()};
    if (!in_region_R(st, 1e-14)) {
      failure = ShootFailure{"region-exit", "orbit left the invariant region R at eta=" +
                                                std::to_string(-info.t) + "; reduce eps"};
      return false;
    }
    if (!(a < a_list.back())) {
      failure = ShootFailure{"non-monotone", "a failed to decrease along the backward orbit"};
      return false;
    }
    s_list.push_back(info.t);
    a_list.push_back(a);
    d_list.push_back(d);
    if (std::hypot(a, d) < o.tol) {
      reached = true;
      return false;
    }
    return true;
  });
  if (failure) return *failure;
  if (!reached) {
    return ShootFailure{"not-converged", "backward orbit did not reach the node P"};
  }

  const std::size_t m = s_list.size();
  std::vector<double> eta(m), a(m), d(m);
  for (std::size_t i = 0; i < m; ++i) {
    eta[i] = -s_list[m - 1 - i];
    a[i] = a_list[m - 1 - i];
    d[i] = d_list[m - 1 - i];
  }
  return OrbitPath(p, std::move(eta), std::move(a), std::move(d), eps);
}

}  // namespace

OrbitPath shoot_heteroclinic(const PlanarParams& p, const ShootOptions& opts) {
  if (!(opts.eps > 0.0) || opts.eps > 1e-3) throw DomainError("eps must lie in (0, 1e-3]");
  if (!(opts.tol > 0.0)) throw DomainError("tol must be > 0");
  double eps = opts.eps;
  ShootFailure last;
  for (int attempt = 0; attempt <= opts.retries; ++attempt, eps /= 10.0) {
    auto r = shoot_once(p, opts, eps);
    if (auto* path = std::get_if<OrbitPath>(&r)) return std::move(*path);
    last = std::get<ShootFailure>(r);
    if (last.kind != "region-exit") break;
  }
  throw NumericalError(last.kind, last.what);
}

Kappa1Estimate estimate_kappa1(const OrbitPath& path) {
  const auto& a = path.a();
  const auto& eta = path.eta();
  const double a_min = a.front();
  double gmin = INFINITY, gmax = -INFINITY;
  std::size_t count = 0;
  for (std::size_t i = 0; i < path.size() && a[i] <= 10.0 * a_min; ++i) {
    const double g = a[i] * std::exp(-eta[i]);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    ++count;
  }
  const double k1 = a.front() * std::exp(-eta.front());
  return {k1, (gmax - gmin) / std::abs(k1), count};
}

OrbitPath reparametrize(const OrbitPath& path, double sigma0) {
  if (!(sigma0 > 0.0)) throw DomainError("sigma0 must be > 0");
  const Kappa1Estimate k = estimate_kappa1(path);
  if (!(k.kappa1 > 0.0)) {
    throw NumericalError("unresolved-tail", "kappa1 is not positive on the node tail");
  }
  if (k.samples < 3 || !(k.plateau_variation < 1e-4)) {
    throw NumericalError("unresolved-tail",
                         "a(eta) exp(-eta) has no plateau on the node tail (variation " +
                             std::to_string(k.plateau_variation) + "); decrease tol");
  }
  // kappa1 e^{eta0} = 1/sigma0
  const double eta0 = std::log(1.0 / (k.kappa1 * sigma0));
  return path.shifted(eta0, k.kappa1, sigma0);
}

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

TailFit fit_tail_exponents(const OrbitPath& path) {
  const auto& eta = path.eta();
  TailFit fit{};
  fit.lambda1 = 1.0;
  fit.lambda2 = path.params().stiffness() * path.params().c_nu();

  std::vector<double> x, y;
  for (std::size_t i = 0; i < path.size() && path.a()[i] <= 10.0 * path.a().front(); ++i) {
    x.push_back(eta[i]);
    y.push_back(std::log(path.a()[i]));
  }
  fit.samples_a = x.size();
  fit.slope_a = x.size() >= 2 ? ls_slope(x, y) : NAN;

  x.clear();
  y.clear();
  const double d_min = path.d().front();
  for (std::size_t i = 0; i < path.size() && path.d()[i] <= 10.0 * d_min; ++i) {
    if (!(path.d()[i] > 0.0)) continue;
    x.push_back(eta[i]);
    y.push_back(std::log(path.d()[i]));
  }
  fit.samples_d = x.size();
  fit.slope_d = x.size() >= 2 ? ls_slope(x, y) : NAN;
  return fit;
}

void write_orbit_csv(std::ostream& os, const OrbitPath& path) {
  const PlanarParams& p = path.params();
  csv::write_meta(os, {{"n", csv::fmt(p.n())},
                       {"alpha", csv::fmt(p.alpha())},
                       {"nu", csv::fmt(p.nu())},
                       {"c_nu", csv::fmt(p.c_nu())},
                       {"eta0", csv::fmt(path.eta0())},
                       {"kappa1", csv::fmt(path.kappa1())},
                       {"sigma0", csv::fmt(path.sigma0())},
                       {"eps", csv::fmt(path.eps_used())}});
  csv::write_header(os, {"eta", "a", "b"});
  for (std::size_t i = 0; i < path.size(); ++i) {
    csv::write_row(os, {path.eta()[i], path.a()[i], path.b(i)});
  }
}

}  // namespace shearlab
