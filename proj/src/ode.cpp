#include "shearlab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shearlab/errors.hpp"

namespace shearlab::ode {

namespace {

// Butcher tableau of Dormand & Prince (1980).
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer & Wanner, DOPRI5 defaults).
constexpr double kSafe = 0.9;
constexpr double kFacMin = 0.2;  // hnew/h bounded to [kFacMin, kFacMax]
constexpr double kFacMax = 10.0;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;

}  // namespace

void DenseStep::eval(double t, std::span<double> out) const {
  const double s = h_ == 0.0 ? 0.0 : (t - t0_) / h_;
  const double s1 = 1.0 - s;
  const double* r1 = coeffs_.data();
  const double* r2 = r1 + dim_;
  const double* r3 = r2 + dim_;
  const double* r4 = r3 + dim_;
  const double* r5 = r4 + dim_;
  for (std::size_t i = 0; i < dim_; ++i) {
    out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
  }
}

std::vector<double> Trajectory::eval(double t) const {
  if (steps_.empty()) throw DomainError("empty trajectory");
  auto it = std::lower_bound(steps_.begin(), steps_.end(), t,
                             [](const DenseStep& s, double v) { return s.t1() < v; });
  if (it == steps_.end()) it = std::prev(steps_.end());
  std::vector<double> out(it->dim());
  it->eval(t, out);
  return out;
}

Result Dopri5::integrate(const Rhs& f, double t0, std::span<const double> y0, double t1,
                         const Observer& observer) const {
  const std::size_t n = y0.size();
  if (!(t1 > t0)) throw DomainError("integrate: t1 must exceed t0");

  std::vector<double> y(y0.begin(), y0.end()), y1(n), ystage(n);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), err(n);
  Stats stats;

  auto norm_scaled = [&](std::span<const double> v, std::span<const double> ya,
                         std::span<const double> yb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sk = opts_.atol + opts_.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      const double q = v[i] / sk;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  f(t0, y, k1);
  ++stats.rhs_evals;

  double h = opts_.h_initial;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic.
    const double dnf = norm_scaled(k1, y, y);
    const double dny = norm_scaled(y, y, y);
    double h0 = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i) ystage[i] = y[i] + h0 * k1[i];
    f(t0 + h0, ystage, k2);
    ++stats.rhs_evals;
    for (std::size_t i = 0; i < n; ++i) err[i] = k2[i] - k1[i];
    const double der2 = norm_scaled(err, y, y) / h0;
    const double der12 = std::max(der2, dnf);
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der12, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, opts_.h_max, t1 - t0});

  double t = t0;
  double facold = 1e-4;
  bool last_rejected = false;
  long steps = 0;

  while (t < t1) {
    if (steps++ >= opts_.max_steps) {
      throw NumericalError("max-steps", "integrator exceeded " + std::to_string(opts_.max_steps) +
                                            " steps at t=" + std::to_string(t));
    }
    const double floor = std::max(opts_.h_min, 16.0 * std::numeric_limits<double>::epsilon() *
                                                   std::max(1.0, std::abs(t)));
    if (h < floor) {
      throw NumericalError("step-underflow",
                           "step size " + std::to_string(h) + " below floor at t=" + std::to_string(t));
    }
    bool final_step = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }

    for (std::size_t i = 0; i < n; ++i) ystage[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ystage, k2);
    for (std::size_t i = 0; i < n; ++i) ystage[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ystage, k3);
    for (std::size_t i = 0; i < n; ++i)
      ystage[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ystage, k4);
    for (std::size_t i = 0; i < n; ++i)
      ystage[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ystage, k5);
    for (std::size_t i = 0; i < n; ++i)
      ystage[i] =
          y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + h, ystage, k6);
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    f(t + h, y1, k7);
    stats.rhs_evals += 6;

    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
    double errn = norm_scaled(err, y, y1);
    if (!std::isfinite(errn)) errn = 1e10;

    const double fac11 = std::pow(std::max(errn, 1e-300), kExpo);
    double fac = fac11 / std::pow(facold, kBeta);
    fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
    double hnew = h / fac;

    if (errn <= 1.0) {
      facold = std::max(errn, 1e-4);
      ++stats.accepted;

      std::vector<double> coeffs(5 * n);
      for (std::size_t i = 0; i < n; ++i) {
        const double ydiff = y1[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        coeffs[i] = y[i];
        coeffs[n + i] = ydiff;
        coeffs[2 * n + i] = bspl;
        coeffs[3 * n + i] = ydiff - h * k7[i] - bspl;
        coeffs[4 * n + i] =
            h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      DenseStep dense(t, h, std::move(coeffs), n);

      const double t_old = t;
      t = final_step ? t1 : t + h;
      y.swap(y1);
      k1.swap(k7);  // FSAL

      if (observer) {
        StepInfo info{t_old, t, y, dense};
        if (!observer(info)) return Result{t, y, stats, true};
      }
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = std::min(hnew, opts_.h_max);
    } else {
      ++stats.rejected;
      last_rejected = true;
      h = h / std::min(1.0 / kFacMin, fac11 / kSafe);
    }
  }
  return Result{t, y, stats, false};
}

}  // namespace shearlab::ode
