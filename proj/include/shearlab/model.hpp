#ifndef SHEARLAB_MODEL_HPP
#define SHEARLAB_MODEL_HPP

// Constitutive parameters, the uniform shearing base state, the rescaled
// time map and the scaling transforms shared by every other module.

#include <functional>
#include <vector>

namespace shearlab {

/// Constants of the exponential viscosity law sigma = exp(-alpha theta) u^n
/// together with the base temperature theta0. c0 = exp(alpha theta0) is
/// derived at construction and cannot be set independently.
class MaterialParams {
 public:
  MaterialParams(double n, double alpha, double kappa, double theta0);

  double n() const { return n_; }
  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }
  double theta0() const { return theta0_; }
  double c0() const { return c0_; }
  /// log(c0) = alpha theta0, exact even when c0 overflows.
  double log_c0() const { return alpha_ * theta0_; }

  MaterialParams with_kappa(double kappa) const { return {n_, alpha_, kappa, theta0_}; }

 private:
  double n_;
  double alpha_;
  double kappa_;
  double theta0_;
  double c0_;
};

struct UniformShearState {
  double t;
  double theta_s;
  double sigma_s;
};

/// Localization rate lambda and profile amplitude Sigma0 of the focusing ansatz.
struct ScalingParams {
  ScalingParams(double lam, double sigma0);
  double lam;
  double sigma0;
};

/// Closed-form uniform shearing solution at time t >= 0.
UniformShearState uniform_shear(const MaterialParams& p, double t);

/// Rescaled time tau(t) = (1/alpha) log((c0 + alpha t)/c0).
double tau_of_t(const MaterialParams& p, double t);

/// Inverse map t(tau) = (c0/alpha)(exp(alpha tau) - 1). Throws
/// NumericalError("overflow") when the result is not representable.
double t_of_tau(const MaterialParams& p, double tau);

/// sigma = exp(-alpha theta) u^n for u > 0.
double constitutive_stress(const MaterialParams& p, double theta, double u);

/// Residual d(theta_s)/dt - sigma_s using a central difference of width h.
double uniform_shear_residual(const MaterialParams& p, double t, double h);

// ---------------------------------------------------------------------------
// Profile triples (U, Sigma, Theta) as functions of the similarity variable.

struct Triple {
  double U;
  double Sigma;
  double Theta;
};

using TripleFunction = std::function<Triple(double xi)>;

struct SampledTriple {
  std::vector<double> xi;  // strictly increasing, positive
  std::vector<double> U;
  std::vector<double> Sigma;
  std::vector<double> Theta;

  std::size_t size() const { return xi.size(); }
  /// Cubic interpolation in log(xi) of each component; xi must lie in
  /// [xi.front(), xi.back()].
  Triple interpolate(double x) const;
};

/// Applies the scaling invariance (U, Sigma, Theta) ->
/// (a U(a xi), Sigma(a xi)/a, ((n+1)/alpha) log a + Theta(a xi)).
TripleFunction scale_orbit_family(TripleFunction f, double a, double n, double alpha);

/// Sampled variant: the scaled triple is resampled on the points of the
/// original grid whose image a*xi stays inside the sampled range. Throws
/// DomainError when that overlap is empty.
SampledTriple scale_orbit_family(const SampledTriple& s, double a, double n, double alpha);

}  // namespace shearlab

#endif  // SHEARLAB_MODEL_HPP
