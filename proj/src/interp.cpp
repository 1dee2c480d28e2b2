#include "shearlab/interp.hpp"

#include <algorithm>
#include <cmath>

#include "shearlab/errors.hpp"

namespace shearlab::interp {

std::size_t locate(std::span<const double> x, double v) {
  if (x.size() < 2) throw DomainError("locate: need at least two nodes");
  auto it = std::upper_bound(x.begin(), x.end(), v);
  std::size_t i = static_cast<std::size_t>(std::distance(x.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, x.size() - 2);
}

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Shape-preserving one-sided end slope (three-point formula, as in PCHIP).
double end_slope(double h0, double h1, double del0, double del1) {
  double d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
  if (sign(d) != sign(del0)) {
    d = 0.0;
  } else if (sign(del0) != sign(del1) && std::abs(d) > std::abs(3.0 * del0)) {
    d = 3.0 * del0;
  }
  return d;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw DomainError("MonotoneCubic: size mismatch");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) throw DomainError("MonotoneCubic: abscissae not increasing");
  }
  d_.assign(n, 0.0);
  std::vector<double> h(n - 1), del(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    del[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  if (n == 2) {
    d_[0] = d_[1] = del[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (del[k - 1] * del[k] <= 0.0) {
      d_[k] = 0.0;
    } else {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      d_[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
    }
  }
  d_[0] = end_slope(h[0], h[1], del[0], del[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

double MonotoneCubic::operator()(double v) const {
  const std::size_t i = locate(x_, v);
  const double h = x_[i + 1] - x_[i];
  const double t = (v - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double MonotoneCubic::derivative(double v) const {
  const std::size_t i = locate(x_, v);
  const double h = x_[i + 1] - x_[i];
  const double t = (v - x_[i]) / h;
  const double t2 = t * t;
  const double h00 = 6 * t2 - 6 * t, h10 = 3 * t2 - 4 * t + 1;
  const double h01 = -6 * t2 + 6 * t, h11 = 3 * t2 - 2 * t;
  return (h00 * y_[i] + h01 * y_[i + 1]) / h + h10 * d_[i] + h11 * d_[i + 1];
}

HermiteValue quintic_hermite(double x0, double x1, double f0, double d0, double s0, double f1,
                             double d1, double s1, double v) {
  const double dx = x1 - x0;
  const double t = (v - x0) / dx;
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;

  const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double H2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
  const double H3 = 0.5 * t3 - t4 + 0.5 * t5;
  const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
  const double H5 = 10 * t3 - 15 * t4 + 6 * t5;

  const double H0p = -30 * t2 + 60 * t3 - 30 * t4;
  const double H1p = 1 - 18 * t2 + 32 * t3 - 15 * t4;
  const double H2p = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
  const double H3p = 1.5 * t2 - 4 * t3 + 2.5 * t4;
  const double H4p = -12 * t2 + 28 * t3 - 15 * t4;
  const double H5p = 30 * t2 - 60 * t3 + 30 * t4;

  const double H0pp = -60 * t + 180 * t2 - 120 * t3;
  const double H1pp = -36 * t + 96 * t2 - 60 * t3;
  const double H2pp = 1 - 9 * t + 18 * t2 - 10 * t3;
  const double H3pp = 3 * t - 12 * t2 + 10 * t3;
  const double H4pp = -24 * t + 84 * t2 - 60 * t3;
  const double H5pp = 60 * t - 180 * t2 + 120 * t3;

  const double g0 = dx * d0, g1 = dx * d1;
  const double q0 = dx * dx * s0, q1 = dx * dx * s1;

  HermiteValue r{};
  r.f = f0 * H0 + g0 * H1 + q0 * H2 + f1 * H5 + g1 * H4 + q1 * H3;
  r.df = (f0 * H0p + g0 * H1p + q0 * H2p + f1 * H5p + g1 * H4p + q1 * H3p) / dx;
  r.d2f = (f0 * H0pp + g0 * H1pp + q0 * H2pp + f1 * H5pp + g1 * H4pp + q1 * H3pp) / (dx * dx);
  return r;
}

}  // namespace shearlab::interp
