#ifndef SHEARLAB_ORBIT_HPP
#define SHEARLAB_ORBIT_HPP

// Heteroclinic orbit of the desingularized planar system
//
//   a' = a (1 - a^2 / b)
//   b' = (alpha / (nu n)) (c_nu b - 1 - (n+1) nu a^2 / alpha),
//   c_nu = 1 + nu (n+1) / alpha,
//
// joining the repelling node P = (0, 1/c_nu) to the saddle Q = (1, 1).
// Here a = 1/sigma, b = 1/(sigma u) and ' = d/d eta with eta = log xi.

#include <array>
#include <iosfwd>
#include <vector>

#include "shearlab/stability.hpp"

namespace shearlab {

class PlanarParams {
 public:
  /// Requires n > 0, alpha > 0, nu > 0.
  PlanarParams(double n, double alpha, double nu);

  double n() const { return n_; }
  double alpha() const { return alpha_; }
  double nu() const { return nu_; }
  double c_nu() const { return c_nu_; }
  /// Coefficient alpha / (nu n) of the b-equation.
  double stiffness() const { return alpha_ / (nu_ * n_); }

 private:
  double n_, alpha_, nu_, c_nu_;
};

struct PlanarState {
  double a;
  double b;
};

/// Right-hand side of the planar system. Throws DomainError for b <= 0.
PlanarState vector_field(const PlanarParams& p, PlanarState s);

Matrix2 planar_jacobian(const PlanarParams& p, PlanarState s);

/// Membership in R = { a^2 <= b <= 1, 0 <= a <= 1 } with slack `tol`.
bool in_region_R(PlanarState s, double tol = 0.0);

enum class EquilibriumKind { repelling_node, saddle };

struct EquilibriumInfo {
  PlanarState point;
  std::array<double, 2> eigenvalues;  // ascending
  std::array<PlanarState, 2> eigenvectors;
  EquilibriumKind kind;
};

struct Equilibria {
  EquilibriumInfo P;
  EquilibriumInfo Q;
};

/// At P: eigenvalues (1, (alpha/(nu n)) c_nu), eigenvectors (1,0), (0,1).
/// At Q: lambda_- < 0 < lambda_+, eigenvectors (1, 2 + lambda).
Equilibria equilibria(const PlanarParams& p);

struct ShootOptions {
  double eps = 1e-6;
  double tol = 1e-8;
  double rtol = 1e-10;
  /// Number of retries at eps/10 after a region exit.
  int retries = 3;
  long max_steps = 200000;
  double h_max = 0.1;
};

/// Sampled heteroclinic, stored in increasing eta. Besides (a, b) the path
/// keeps d = b - 1/c_nu, integrated directly so that it stays accurate when
/// it drops below the round-off level of b.
class OrbitPath {
 public:
  OrbitPath() = default;
  OrbitPath(PlanarParams p, std::vector<double> eta, std::vector<double> a,
            std::vector<double> d, double eps_used);

  const PlanarParams& params() const { return p_; }
  const std::vector<double>& eta() const { return eta_; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& d() const { return d_; }
  double b(std::size_t i) const { return d_[i] + 1.0 / p_.c_nu(); }
  PlanarState state(std::size_t i) const { return {a_[i], b(i)}; }
  std::size_t size() const { return eta_.size(); }
  double eta_min() const { return eta_.front(); }
  double eta_max() const { return eta_.back(); }

  double eta0() const { return eta0_; }
  double kappa1() const { return kappa1_; }
  /// Amplitude selected by reparametrize (0 before).
  double sigma0() const { return sigma0_; }
  bool reparametrized() const { return reparametrized_; }
  double eps_used() const { return eps_used_; }

  struct Sample {
    double a, da, d2a;
    double d, dd, d2d;
  };
  /// Quintic Hermite interpolation in eta; node derivatives come from the
  /// vector field, second derivatives from J F. Requires eta in range.
  Sample at(double eta) const;

  /// Shifted copy with eta replaced by eta - shift.
  OrbitPath shifted(double shift, double kappa1, double sigma0) const;

 private:
  PlanarParams p_{1.0, 1.0, 1.0};
  std::vector<double> eta_, a_, d_;
  std::vector<double> da_, dd_, d2a_, d2d_;
  double eta0_ = 0.0;
  double kappa1_ = 0.0;
  double sigma0_ = 0.0;
  bool reparametrized_ = false;
  double eps_used_ = 0.0;
};

/// Seeds at Q - eps r_-/|r_-| and integrates backward until |state - P| < tol.
/// Throws NumericalError("region-exit") if every retry leaves R,
/// NumericalError("non-monotone") if a fails to decrease, and the
/// integrator's "max-steps"/"step-underflow" errors.
OrbitPath shoot_heteroclinic(const PlanarParams& p, const ShootOptions& opts = {});

/// Plateau estimate of kappa1 = lim a(eta) e^{-eta} over the last decade of a.
struct Kappa1Estimate {
  double kappa1;
  double plateau_variation;  // relative, over the fit window
  std::size_t samples;
};
Kappa1Estimate estimate_kappa1(const OrbitPath& path);

/// Shifts eta so that a(eta) ~ e^{eta}/sigma0 on the node tail:
/// eta0 = log(1/(kappa1 sigma0)). Throws NumericalError("unresolved-tail")
/// when the plateau variation exceeds 1e-4 or kappa1 <= 0.
OrbitPath reparametrize(const OrbitPath& path, double sigma0);

/// Least-squares slopes of log a and log(b - 1/c_nu) against eta over the
/// last decade of each quantity on the node tail.
struct TailFit {
  double slope_a;
  double slope_d;
  double lambda1;  // 1
  double lambda2;  // (alpha/(nu n)) c_nu
  std::size_t samples_a;
  std::size_t samples_d;
};
TailFit fit_tail_exponents(const OrbitPath& path);

/// CSV dump: eta, a, b with a metadata header.
void write_orbit_csv(std::ostream& os, const OrbitPath& path);

}  // namespace shearlab

#endif  // SHEARLAB_ORBIT_HPP
