#include "shearlab/localization.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"

namespace shearlab {

LocalizedSolution::LocalizedSolution(MaterialParams p, ScalingParams s, Profile prof,
                                     double max_extrapolation)
    : p_(p), s_(s), prof_(std::move(prof)), max_extrapolation_(max_extrapolation) {
  if (p_.kappa() != 0.0) throw DomainError("localized solutions require kappa = 0");
  const PlanarParams& q = prof_.params();
  if (q.nu() != s_.lam) throw DomainError("profile nu must equal lambda");
  if (q.n() != p_.n() || q.alpha() != p_.alpha()) {
    throw DomainError("profile n, alpha differ from the material parameters");
  }
  if (prof_.sigma0() != s_.sigma0) throw DomainError("profile sigma0 differs from the scaling");
  if (!(max_extrapolation_ >= 1.0)) throw DomainError("max_extrapolation must be >= 1");
}

double LocalizedSolution::phi(double t) const { return std::exp(s_.lam * tau_of_t(p_, t)); }

double LocalizedSolution::xi_of(double x, double t) const {
  return std::sqrt(s_.lam) * x * phi(t);
}

FieldValue LocalizedSolution::evaluate(double x, double t) const {
  const UniformShearState us = uniform_shear(p_, t);
  const double ph = phi(t);
  const double xi = std::sqrt(s_.lam) * x * ph;
  if (std::abs(xi) > max_extrapolation_ * prof_.xi_outer()) {
    throw DomainError("out-of-range: |xi|=" + std::to_string(std::abs(xi)) +
                      " is beyond the profile's asymptotic window");
  }
  const ProfileValue pv = prof_.eval(xi);
  const double g = s_.lam * (p_.n() + 1.0) / p_.alpha();
  return {ph * pv.v.U, us.sigma_s * pv.v.Sigma / ph,
          (1.0 + g) * us.theta_s - g * p_.theta0() + pv.v.Theta,
          pv.region == ProfileRegion::outer};
}

double LocalizedSolution::theta_alternate(double x, double t) const {
  const double ts = uniform_shear(p_, t).theta_s;
  return ts + s_.lam * (p_.n() + 1.0) / p_.alpha() * (ts - p_.theta0()) +
         prof_(xi_of(x, t)).Theta;
}

FieldFunction LocalizedSolution::as_field() const {
  return [self = *this](double x, double t) { return self.evaluate(x, t); };
}

LocalizedSolution make_localized(const MaterialParams& p, const ScalingParams& s,
                                 const ShootOptions& opts) {
  const PlanarParams q(p.n(), p.alpha(), s.lam);
  Profile prof = reconstruct(reparametrize(shoot_heteroclinic(q, opts), s.sigma0));
  return LocalizedSolution(p, s, std::move(prof));
}

FieldFunction uniform_shear_field(const MaterialParams& p) {
  return [p](double, double t) {
    const UniformShearState s = uniform_shear(p, t);
    return FieldValue{1.0, s.sigma_s, s.theta_s, false};
  };
}

// ---------------------------------------------------------------------------

double PdeResidual::max_sup() const { return *std::max_element(sup.begin(), sup.end()); }

namespace {

struct RawResidual {
  std::array<double, 3> sup{};
  std::array<double, 3> sumsq{};
  long count = 0;
  bool extrapolated = false;
};

// Residuals with stencil width w (in grid steps) at t-rows [j0, j1).
RawResidual residual_rows(const FieldFunction& f, const MaterialParams& p, const SpaceTimeGrid& g,
                          int w, int j0, int j1) {
  const double hx = (g.x_max - g.x_min) / g.nx, ht = (g.t_max - g.t_min) / g.nt;
  const double Hx = w * hx, Ht = w * ht;
  RawResidual r;
  for (int j = j0; j < j1; ++j) {
    const double t = g.t_min + j * ht;
    for (int i = 0; i <= g.nx; ++i) {
      const double x = g.x_min + i * hx;
      const FieldValue c = f(x, t);
      FieldValue xs[4], ts[4];
      const int off[4] = {-2, -1, 1, 2};
      for (int k = 0; k < 4; ++k) {
        xs[k] = f(x + off[k] * Hx, t);
        ts[k] = f(x, t + off[k] * Ht);
      }
      r.extrapolated = r.extrapolated || c.extrapolated;
      const double sxx = (-xs[0].sigma + 16.0 * xs[1].sigma - 30.0 * c.sigma + 16.0 * xs[2].sigma -
                          xs[3].sigma) /
                         (12.0 * Hx * Hx);
      const double ut = (ts[0].u - 8.0 * ts[1].u + 8.0 * ts[2].u - ts[3].u) / (12.0 * Ht);
      const double tht =
          (ts[0].theta - 8.0 * ts[1].theta + 8.0 * ts[2].theta - ts[3].theta) / (12.0 * Ht);
      const std::array<double, 3> res{ut - sxx, tht - c.sigma * c.u,
                                      c.sigma - constitutive_stress(p, c.theta, c.u)};
      for (int e = 0; e < 3; ++e) {
        r.sup[e] = std::max(r.sup[e], std::abs(res[e]));
        r.sumsq[e] += res[e] * res[e];
      }
      ++r.count;
    }
  }
  return r;
}

RawResidual residual_all(const FieldFunction& f, const MaterialParams& p, const SpaceTimeGrid& g,
                         int w, int threads) {
  // Rows whose stencil (with the widest width 2) stays inside [t_min, t_max].
  const int j_lo = 4, j_hi = g.nt - 4 + 1;
  if (j_hi <= j_lo) throw DomainError("pde_residual: need nt >= 8");
  threads = std::clamp(threads, 1, j_hi - j_lo);
  // one partial per row so the reduction order never depends on the chunking
  std::vector<RawResidual> parts(j_hi - j_lo);
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](int k) {
    const int a = j_lo + (j_hi - j_lo) * k / threads, b = j_lo + (j_hi - j_lo) * (k + 1) / threads;
    try {
      for (int j = a; j < b; ++j) parts[j - j_lo] = residual_rows(f, p, g, w, j, j + 1);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  RawResidual total;
  for (const auto& r : parts) {
    for (int e = 0; e < 3; ++e) {
      total.sup[e] = std::max(total.sup[e], r.sup[e]);
      total.sumsq[e] += r.sumsq[e];
    }
    total.count += r.count;
    total.extrapolated = total.extrapolated || r.extrapolated;
  }
  return total;
}

}  // namespace

PdeResidual pde_residual(const FieldFunction& f, const MaterialParams& p, const SpaceTimeGrid& g,
                         int threads) {
  if (g.nx < 1 || g.nt < 8) throw DomainError("pde_residual: grid too small");
  if (!(g.x_max > g.x_min) || !(g.t_max > g.t_min) || g.t_min < 0.0) {
    throw DomainError("pde_residual: invalid grid bounds");
  }
  PdeResidual out;
  out.hx = (g.x_max - g.x_min) / g.nx;
  out.ht = (g.t_max - g.t_min) / g.nt;
  const RawResidual fine = residual_all(f, p, g, 1, threads);
  const RawResidual coarse = residual_all(f, p, g, 2, threads);
  out.sup = fine.sup;
  for (int e = 0; e < 3; ++e) out.rms[e] = std::sqrt(fine.sumsq[e] / fine.count);
  out.sup_coarse = std::max(coarse.sup[0], coarse.sup[1]);
  out.floor_warning = !(4.0 * std::max(fine.sup[0], fine.sup[1]) < out.sup_coarse);
  out.any_extrapolated = fine.extrapolated || coarse.extrapolated;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<BandSample> band_diagnostics(const LocalizedSolution& sol,
                                         const std::vector<double>& t_grid) {
  std::vector<BandSample> out;
  double prev = -INFINITY;
  for (double t : t_grid) {
    if (!(t > prev) || t < 0.0) throw DomainError("band_diagnostics: t-grid must increase");
    prev = t;
    const FieldValue c = sol.evaluate(0.0, t);
    const double half = 0.5 * c.u;
    // bracket in xi, then map back to x
    const double scale = std::sqrt(sol.scaling().lam) * sol.phi(t);
    double lo = 0.0, hi = 1.0 / scale;
    while (sol.evaluate(hi, t).u > half) {
      lo = hi;
      hi *= 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sol.evaluate(mid, t).u > half ? lo : hi) = mid;
    }
    out.push_back({t, c.u, 0.5 * (lo + hi), c.theta - uniform_shear(sol.params(), t).theta_s});
  }
  return out;
}

namespace {

csv::Meta solution_meta(const LocalizedSolution& sol) {
  const auto& p = sol.params();
  return {{"n", csv::fmt(p.n())},
          {"alpha", csv::fmt(p.alpha())},
          {"theta0", csv::fmt(p.theta0())},
          {"lambda", csv::fmt(sol.scaling().lam)},
          {"sigma0", csv::fmt(sol.scaling().sigma0)},
          {"c0", csv::fmt(p.c0())}};
}

}  // namespace

void write_space_time_csv(std::ostream& os, const LocalizedSolution& sol,
                          const std::vector<double>& x, const std::vector<double>& t,
                          int threads) {
  // Evaluate row blocks in parallel, write sequentially.
  std::vector<std::vector<FieldValue>> rows(t.size());
  threads = std::clamp<int>(threads, 1, std::max<int>(1, static_cast<int>(t.size())));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](int k) {
    try {
      for (std::size_t j = k; j < t.size(); j += threads) {
        rows[j].reserve(x.size());
        for (double xv : x) rows[j].push_back(sol.evaluate(xv, t[j]));
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work, k);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  csv::write_meta(os, solution_meta(sol));
  csv::write_header(os, {"x", "t", "u", "sigma", "theta", "extrapolated"});
  for (std::size_t j = 0; j < t.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const FieldValue& v = rows[j][i];
      csv::write_row(os, {x[i], t[j], v.u, v.sigma, v.theta, v.extrapolated ? 1.0 : 0.0});
    }
  }
}

void write_band_csv(std::ostream& os, const LocalizedSolution& sol,
                    const std::vector<BandSample>& band) {
  csv::write_meta(os, solution_meta(sol));
  csv::write_header(os, {"t", "peak_u", "halfwidth", "theta_excess"});
  for (const auto& b : band) csv::write_row(os, {b.t, b.peak_u, b.halfwidth, b.theta_excess});
}

}  // namespace shearlab
