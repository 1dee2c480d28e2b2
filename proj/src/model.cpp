#include "shearlab/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "shearlab/errors.hpp"
#include "shearlab/interp.hpp"

namespace shearlab {

MaterialParams::MaterialParams(double n, double alpha, double kappa, double theta0)
    : n_(n), alpha_(alpha), kappa_(kappa), theta0_(theta0), c0_(std::exp(alpha * theta0)) {
  if (!std::isfinite(n) || n < 0.0) throw DomainError("n must be finite and >= 0");
  if (!std::isfinite(alpha) || alpha <= 0.0) throw DomainError("alpha must be finite and > 0");
  if (!std::isfinite(kappa) || kappa < 0.0) throw DomainError("kappa must be finite and >= 0");
  if (!std::isfinite(theta0)) throw DomainError("theta0 must be finite");
}

ScalingParams::ScalingParams(double lam_, double sigma0_) : lam(lam_), sigma0(sigma0_) {
  if (!(lam > 0.0) || !std::isfinite(lam)) throw DomainError("lambda must be > 0");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw DomainError("sigma0 must be > 0");
}

namespace {

// log(alpha t + c0), evaluated without forming c0.
double log_shift(const MaterialParams& p, double t) {
  const double r = p.alpha() * t * std::exp(-p.log_c0());  // alpha t / c0
  if (!(r > -1.0)) throw DomainError("alpha t + c0 must be positive");
  return p.log_c0() + std::log1p(r);
}

}  // namespace

UniformShearState uniform_shear(const MaterialParams& p, double t) {
  if (t < 0.0) throw DomainError("uniform_shear: t must be >= 0");
  const double L = log_shift(p, t);
  return UniformShearState{t, L / p.alpha(), std::exp(-L)};
}

double tau_of_t(const MaterialParams& p, double t) {
  if (t < 0.0) throw DomainError("tau_of_t: t must be >= 0");
  return std::log1p(p.alpha() * t * std::exp(-p.log_c0())) / p.alpha();
}

double t_of_tau(const MaterialParams& p, double tau) {
  if (tau < 0.0) throw DomainError("t_of_tau: tau must be >= 0");
  if (tau == 0.0) return 0.0;
  const double at = p.alpha() * tau;
  // log t = log c0 + log(expm1(alpha tau)) - log alpha
  const double log_em1 = at > 30.0 ? at + std::log1p(-std::exp(-at)) : std::log(std::expm1(at));
  const double log_t = p.log_c0() + log_em1 - std::log(p.alpha());
  if (log_t > std::log(std::numeric_limits<double>::max())) {
    throw NumericalError("overflow", "t_of_tau: alpha*tau=" + std::to_string(at) +
                                         " exceeds the floating-point range; shorten the horizon");
  }
  return std::exp(log_t);
}

double constitutive_stress(const MaterialParams& p, double theta, double u) {
  if (!(u > 0.0) && std::floor(p.n()) != p.n()) {
    throw DomainError("constitutive_stress: u <= 0 with non-integral n");
  }
  return std::exp(-p.alpha() * theta) * std::pow(u, p.n());
}

double uniform_shear_residual(const MaterialParams& p, double t, double h) {
  const double lo = std::max(0.0, t - h);
  const double hi = lo + 2.0 * h;
  const double mid = 0.5 * (lo + hi);
  const double dtheta = (uniform_shear(p, hi).theta_s - uniform_shear(p, lo).theta_s) / (hi - lo);
  return dtheta - uniform_shear(p, mid).sigma_s;
}

// ---------------------------------------------------------------------------

Triple SampledTriple::interpolate(double x) const {
  if (xi.size() < 2) throw DomainError("SampledTriple: need at least two samples");
  if (x < xi.front() || x > xi.back()) throw DomainError("SampledTriple: xi outside sampled range");
  std::vector<double> eta(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) eta[i] = std::log(xi[i]);
  const double v = std::log(x);
  return Triple{interp::MonotoneCubic(eta, U)(v), interp::MonotoneCubic(eta, Sigma)(v),
                interp::MonotoneCubic(eta, Theta)(v)};
}

TripleFunction scale_orbit_family(TripleFunction f, double a, double n, double alpha) {
  if (!(a > 0.0)) throw DomainError("scale factor must be > 0");
  const double shift = (n + 1.0) / alpha * std::log(a);
  return [f = std::move(f), a, shift](double xi) {
    const Triple v = f(a * xi);
    return Triple{a * v.U, v.Sigma / a, shift + v.Theta};
  };
}

SampledTriple scale_orbit_family(const SampledTriple& s, double a, double n, double alpha) {
  if (!(a > 0.0)) throw DomainError("scale factor must be > 0");
  if (s.size() < 2) throw DomainError("scale_orbit_family: need at least two samples");

  std::vector<double> eta(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) eta[i] = std::log(s.xi[i]);
  const interp::MonotoneCubic iu(eta, s.U), is(eta, s.Sigma), ith(eta, s.Theta);
  const double shift = (n + 1.0) / alpha * std::log(a);

  SampledTriple out;
  for (double x : s.xi) {
    const double y = a * x;
    // Tolerate round-off at the ends of the sampled range.
    const double slack = 1e-12 * y;
    if (y < s.xi.front() - slack || y > s.xi.back() + slack) continue;
    const double v = std::clamp(std::log(y), eta.front(), eta.back());
    out.xi.push_back(x);
    out.U.push_back(a * iu(v));
    out.Sigma.push_back(is(v) / a);
    out.Theta.push_back(shift + ith(v));
  }
  if (out.xi.empty()) throw DomainError("scale_orbit_family: rescaled grid does not overlap");
  return out;
}

}  // namespace shearlab
