#ifndef SHEARLAB_PROFILE_HPP
#define SHEARLAB_PROFILE_HPP

// Self-similar profile (U, Sigma, Theta)(xi) rebuilt from a reparametrized
// heteroclinic orbit:
//
//   U = a / (b xi),  Sigma = xi / a,
//   Theta = -((n+1)/alpha) log xi + ((n+1)/alpha) log a - (n/alpha) log b,
//
// evaluated at eta = log xi. The triple solves
//
//   Sigma' = xi U,  nu ((n+1)/alpha + xi Theta') = Sigma U - 1,
//   Sigma = exp(-alpha Theta) U^n,  Sigma(0) = Sigma0.

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "shearlab/model.hpp"
#include "shearlab/orbit.hpp"

namespace shearlab {

enum class ProfileRegion { inner, orbit, outer };

struct ProfileValue {
  Triple v;
  ProfileRegion region;
};

class Profile {
 public:
  /// Requires a reparametrized path.
  explicit Profile(OrbitPath path);

  const PlanarParams& params() const { return path_.params(); }
  const OrbitPath& path() const { return path_; }
  double sigma0() const { return sigma0_; }
  double U0() const { return U0_; }
  double Theta0() const { return Theta0_; }
  double c_nu() const { return path_.params().c_nu(); }

  /// Orbit-resolved range. Below xi_inner the Taylor data
  /// (U0, Sigma0 + U0 xi^2 / 2, Theta0) are used, above xi_outer the limiting
  /// forms (1/xi, xi, -((n+1)/alpha) log xi).
  double xi_inner() const { return xi_inner_; }
  double xi_outer() const { return xi_outer_; }

  /// Samples at the orbit nodes.
  const std::vector<double>& xi() const { return xi_; }
  const std::vector<double>& U() const { return U_; }
  const std::vector<double>& Sigma() const { return Sigma_; }
  const std::vector<double>& Theta() const { return Theta_; }

  /// Even in xi: evaluates at |xi|.
  ProfileValue eval(double xi) const;
  Triple operator()(double xi) const { return eval(xi).v; }
  TripleFunction as_function() const;

 private:
  OrbitPath path_;
  double sigma0_, U0_, Theta0_;
  double xi_inner_, xi_outer_;
  std::vector<double> xi_, U_, Sigma_, Theta_;
};

Profile reconstruct(const OrbitPath& path);

/// Closed-form solution for nu = 0: Sigma = sqrt(xi^2 + sigma0^2), U = 1/Sigma,
/// Theta = -((n+1)/alpha) log Sigma.
Triple closed_form_nu0(double sigma0, double n, double alpha, double xi);

/// Special solution Sigma = xi, U = 1/xi, Theta = -((n+1)/alpha) log xi,
/// valid for every nu.
Triple special_solution(double n, double alpha, double xi);

struct MsysResidual {
  std::array<double, 3> sup{};  // Sigma' - xi U, momentum/energy balance, constitutive
  std::array<double, 3> rms{};
  /// Richardson estimate of the finite-difference error in the derivatives.
  double fd_error = 0.0;
  bool grid_too_coarse = false;
  double max_sup() const;
};

/// Residuals of the profile system at the points of `xi`. Derivatives use
/// the fourth-order central difference with step rel_step * xi; comparing with
/// a doubled step gives the error estimate.
MsysResidual msys_residual(const TripleFunction& f, double n, double alpha, double nu,
                           std::span<const double> xi, double rel_step = 1e-3);

struct EndpointReport {
  double xi_inner, xi_outer;
  // values at the smallest orbit-resolved xi
  double Sigma_0plus, U_0plus, Theta_0plus, product_0plus;
  // fitted one-sided derivatives at xi = 0
  double dU0, dSigma0, dTheta0;
  // coefficient of xi^2 in Sigma - Sigma0 and its expected value U0/2
  double taylor_coeff, taylor_expected, taylor_rel_error;
  // deviations from the limiting forms at xi_tail
  double xi_tail;
  double tail_sigma, tail_u, tail_theta;
  bool tail_extrapolated;
};

/// Throws NumericalError("insufficient-range") if the orbit does not reach
/// xi <= 1e-3.
EndpointReport endpoint_report(const Profile& prof, double xi_tail = 1e3);

/// CSV dump: xi, U, Sigma, Theta at the orbit nodes with a metadata header.
void write_profile_csv(std::ostream& os, const Profile& prof);

}  // namespace shearlab

#endif  // SHEARLAB_PROFILE_HPP
