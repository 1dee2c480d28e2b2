#include "shearlab/profile.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"

namespace shearlab {

Profile::Profile(OrbitPath path) : path_(std::move(path)) {
  if (!path_.reparametrized()) throw DomainError("Profile: orbit path is not reparametrized");
  const PlanarParams& p = path_.params();
  sigma0_ = path_.sigma0();
  U0_ = p.c_nu() / sigma0_;
  Theta0_ = (p.n() + 1.0) / p.alpha() * std::log(U0_) - std::log(p.c_nu()) / p.alpha();
  xi_inner_ = std::exp(path_.eta_min());
  xi_outer_ = std::exp(path_.eta_max());

  const double k = (p.n() + 1.0) / p.alpha(), m = p.n() / p.alpha();
  const std::size_t N = path_.size();
  xi_.resize(N);
  U_.resize(N);
  Sigma_.resize(N);
  Theta_.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double eta = path_.eta()[i], a = path_.a()[i], b = path_.b(i);
    const double ae = a * std::exp(-eta);  // a / xi
    xi_[i] = std::exp(eta);
    U_[i] = ae / b;
    Sigma_[i] = 1.0 / ae;
    Theta_[i] = k * std::log(ae) - m * std::log(b);
  }
}

ProfileValue Profile::eval(double xi) const {
  const PlanarParams& p = path_.params();
  const double k = (p.n() + 1.0) / p.alpha();
  xi = std::abs(xi);
  if (xi < xi_inner_) {
    return {{U0_, sigma0_ + 0.5 * U0_ * xi * xi, Theta0_}, ProfileRegion::inner};
  }
  if (xi > xi_outer_) {
    return {{1.0 / xi, xi, -k * std::log(xi)}, ProfileRegion::outer};
  }
  const double eta = std::clamp(std::log(xi), path_.eta_min(), path_.eta_max());
  const auto s = path_.at(eta);
  const double b = s.d + 1.0 / p.c_nu();
  const double ae = s.a / xi;
  return {{ae / b, 1.0 / ae, k * std::log(ae) - p.n() / p.alpha() * std::log(b)},
          ProfileRegion::orbit};
}

TripleFunction Profile::as_function() const {
  return [self = *this](double xi) { return self.eval(xi).v; };
}

Profile reconstruct(const OrbitPath& path) { return Profile(path); }

Triple closed_form_nu0(double sigma0, double n, double alpha, double xi) {
  if (!(sigma0 > 0.0)) throw DomainError("sigma0 must be > 0");
  const double S = std::hypot(xi, sigma0);
  return {1.0 / S, S, -(n + 1.0) / alpha * std::log(S)};
}

Triple special_solution(double n, double alpha, double xi) {
  if (!(xi > 0.0)) throw DomainError("special solution needs xi > 0");
  return {1.0 / xi, xi, -(n + 1.0) / alpha * std::log(xi)};
}

// ---------------------------------------------------------------------------

double MsysResidual::max_sup() const { return *std::max_element(sup.begin(), sup.end()); }

MsysResidual msys_residual(const TripleFunction& f, double n, double alpha, double nu,
                           std::span<const double> xi, double rel_step) {
  if (xi.empty()) throw DomainError("msys_residual: empty grid");
  if (!(rel_step > 0.0) || rel_step > 0.2) throw DomainError("rel_step must lie in (0, 0.2]");
  MsysResidual r;
  double fd = 0.0;
  for (double x : xi) {
    if (!(x > 0.0)) throw DomainError("msys_residual: grid must be positive");
    const double h = rel_step * x;
    const Triple c = f(x);
    // D4 with step h and 2h on one set of samples
    Triple s[9];
    for (int k = -4; k <= 4; ++k) s[k + 4] = k == 0 ? c : f(x + k * h);
    auto d4 = [&](auto get, int w) {
      return (-get(s[4 + 2 * w]) + 8.0 * get(s[4 + w]) - 8.0 * get(s[4 - w]) +
              get(s[4 - 2 * w])) /
             (12.0 * w * h);
    };
    auto gS = [](const Triple& t) { return t.Sigma; };
    auto gT = [](const Triple& t) { return t.Theta; };
    const double dS = d4(gS, 1), dT = d4(gT, 1);
    fd = std::max({fd, std::abs(dS - d4(gS, 2)) / 15.0, x * std::abs(dT - d4(gT, 2)) / 15.0});

    const std::array<double, 3> res{
        dS - x * c.U, nu * ((n + 1.0) / alpha + x * dT) - (c.Sigma * c.U - 1.0),
        c.Sigma - std::exp(-alpha * c.Theta) * std::pow(c.U, n)};
    for (int e = 0; e < 3; ++e) {
      r.sup[e] = std::max(r.sup[e], std::abs(res[e]));
      r.rms[e] += res[e] * res[e];
    }
  }
  for (double& v : r.rms) v = std::sqrt(v / static_cast<double>(xi.size()));
  r.fd_error = fd;
  r.grid_too_coarse = fd > r.max_sup();
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Least-squares polynomial fit on [0, w]; returns coefficients in powers of xi.
std::vector<double> poly_fit(const std::vector<double>& x, const std::vector<double>& y,
                             int degree, double w) {
  Eigen::MatrixXd V(x.size(), degree + 1);
  Eigen::VectorXd rhs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double t = 1.0;
    for (int k = 0; k <= degree; ++k, t *= x[i] / w) V(i, k) = t;
    rhs(i) = y[i];
  }
  const Eigen::VectorXd c = V.colPivHouseholderQr().solve(rhs);
  std::vector<double> out(degree + 1);
  for (int k = 0; k <= degree; ++k) out[k] = c(k) / std::pow(w, k);
  return out;
}

}  // namespace

EndpointReport endpoint_report(const Profile& prof, double xi_tail) {
  if (prof.xi_inner() > 1e-3) {
    throw NumericalError("insufficient-range",
                         "profile is resolved only down to xi=" + std::to_string(prof.xi_inner()));
  }
  const PlanarParams& p = prof.params();
  const double k = (p.n() + 1.0) / p.alpha();

  EndpointReport r{};
  r.xi_inner = prof.xi_inner();
  r.xi_outer = prof.xi_outer();
  const Triple v0 = prof(prof.xi_inner());
  r.Sigma_0plus = v0.Sigma;
  r.U_0plus = v0.U;
  r.Theta_0plus = v0.Theta;
  r.product_0plus = v0.U * v0.Sigma;

  // Fit on orbit samples in (xi_inner, w]; the profile is even, so only even
  // powers survive, but the fit keeps the odd ones to measure them.
  const double w = 0.05;
  std::vector<double> xs, us, ss, ts;
  for (int i = 1; i <= 60; ++i) {
    const double x = w * i / 60.0;
    if (x <= prof.xi_inner()) continue;
    const Triple t = prof(x);
    xs.push_back(x);
    us.push_back(t.U);
    ss.push_back(t.Sigma - prof.sigma0());
    ts.push_back(t.Theta);
  }
  const auto cu = poly_fit(xs, us, 5, w), cs = poly_fit(xs, ss, 5, w),
             ct = poly_fit(xs, ts, 5, w);
  r.dU0 = cu[1];
  r.dSigma0 = cs[1];
  r.dTheta0 = ct[1];
  r.taylor_coeff = cs[2];
  r.taylor_expected = 0.5 * prof.U0();
  r.taylor_rel_error = std::abs(r.taylor_coeff / r.taylor_expected - 1.0);

  r.xi_tail = xi_tail;
  const ProfileValue tv = prof.eval(xi_tail);
  r.tail_extrapolated = tv.region == ProfileRegion::outer;
  r.tail_sigma = tv.v.Sigma / xi_tail - 1.0;
  r.tail_u = xi_tail * tv.v.U - 1.0;
  r.tail_theta = tv.v.Theta + k * std::log(xi_tail);
  return r;
}

void write_profile_csv(std::ostream& os, const Profile& prof) {
  const PlanarParams& p = prof.params();
  csv::write_meta(os, {{"n", csv::fmt(p.n())},
                       {"alpha", csv::fmt(p.alpha())},
                       {"nu", csv::fmt(p.nu())},
                       {"sigma0", csv::fmt(prof.sigma0())},
                       {"U0", csv::fmt(prof.U0())},
                       {"Theta0", csv::fmt(prof.Theta0())},
                       {"c_nu", csv::fmt(prof.c_nu())}});
  csv::write_header(os, {"xi", "U", "Sigma", "Theta"});
  for (std::size_t i = 0; i < prof.xi().size(); ++i) {
    csv::write_row(os, {prof.xi()[i], prof.U()[i], prof.Sigma()[i], prof.Theta()[i]});
  }
}

}  // namespace shearlab
