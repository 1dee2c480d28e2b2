#ifndef SHEARLAB_LOCALIZATION_HPP
#define SHEARLAB_LOCALIZATION_HPP

// Exact localizing solutions of the adiabatic system
//
//   u_t = sigma_xx,  theta_t = sigma u,  sigma = exp(-alpha theta) u^n
//
// built from a profile with nu = lambda:
//
//   phi(t) = (alpha t / c0 + 1)^{lambda/alpha},  xi = sqrt(lambda) x phi(t),
//   u = phi U(xi),  sigma = sigma_s(t) Sigma(xi) / phi,
//   theta = (1 + lambda (n+1)/alpha) theta_s(t) - lambda (n+1) theta0 / alpha + Theta(xi).

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "shearlab/model.hpp"
#include "shearlab/profile.hpp"

namespace shearlab {

struct FieldValue {
  double u;
  double sigma;
  double theta;
  bool extrapolated = false;
};

using FieldFunction = std::function<FieldValue(double x, double t)>;

class LocalizedSolution {
 public:
  /// Requires kappa == 0 and profile nu == lambda (and matching n, alpha).
  /// Evaluation beyond max_extrapolation * xi_outer throws.
  LocalizedSolution(MaterialParams p, ScalingParams s, Profile prof,
                    double max_extrapolation = 1e3);

  const MaterialParams& params() const { return p_; }
  const ScalingParams& scaling() const { return s_; }
  const Profile& profile() const { return prof_; }

  double phi(double t) const;
  double xi_of(double x, double t) const;

  /// Throws DomainError("out-of-range") beyond the extrapolation window.
  FieldValue evaluate(double x, double t) const;
  /// Temperature in the arrangement theta_s + lambda ((n+1)/alpha)(theta_s - theta0) + Theta.
  double theta_alternate(double x, double t) const;

  FieldFunction as_field() const;

 private:
  MaterialParams p_;
  ScalingParams s_;
  Profile prof_;
  double max_extrapolation_;
};

/// Shoot, reparametrize and reconstruct with nu = lambda.
LocalizedSolution make_localized(const MaterialParams& p, const ScalingParams& s,
                                 const ShootOptions& opts = {});

/// Exact uniform shearing field v = x, theta = theta_s(t).
FieldFunction uniform_shear_field(const MaterialParams& p);

struct SpaceTimeGrid {
  double x_min, x_max;
  int nx;
  double t_min, t_max;
  int nt;
};

struct PdeResidual {
  // u_t - sigma_xx, theta_t - sigma u, sigma - exp(-alpha theta) u^n
  std::array<double, 3> sup{};
  std::array<double, 3> rms{};
  double hx = 0.0, ht = 0.0;
  /// Same residual with doubled steps; the ratio shows the observed order.
  double sup_coarse = 0.0;
  /// Set when the residual does not drop by at least 4x from 2h to h, i.e.
  /// something other than the difference formulas (profile interpolation,
  /// round-off) dominates.
  bool floor_warning = false;
  bool any_extrapolated = false;
  double max_sup() const;
};

/// Fourth-order central differences in x and t at every grid node with
/// t_min + 2 ht <= t <= t_max - 2 ht (x stencils may leave the box).
PdeResidual pde_residual(const FieldFunction& f, const MaterialParams& p,
                         const SpaceTimeGrid& g, int threads = 1);

struct BandSample {
  double t;
  double peak_u;
  double halfwidth;
  double theta_excess;
};

/// peak_u = u(0,t); halfwidth solves u(x,t) = peak_u/2 for x > 0;
/// theta_excess = theta(0,t) - theta_s(t).
std::vector<BandSample> band_diagnostics(const LocalizedSolution& sol,
                                         const std::vector<double>& t_grid);

/// Long-format samples (x, t, u, sigma, theta, extrapolated).
void write_space_time_csv(std::ostream& os, const LocalizedSolution& sol,
                          const std::vector<double>& x, const std::vector<double>& t,
                          int threads = 1);
void write_band_csv(std::ostream& os, const LocalizedSolution& sol,
                    const std::vector<BandSample>& band);

}  // namespace shearlab

#endif  // SHEARLAB_LOCALIZATION_HPP
