#ifndef SHEARLAB_STABILITY_HPP
#define SHEARLAB_STABILITY_HPP

// Linearized stability of the uniform shearing solution.
//
// In rescaled time tau the cosine modes (u_j, theta_j) of the relative
// perturbation decouple and obey
//
//   d/dtau [u_j, theta_j]^T = M_j(k) [u_j, theta_j]^T,
//   M_j(k) = [[-n x, alpha x], [n + 1, -alpha - k x]],   x = (j pi)^2,
//
// with k = kappa c0 exp(alpha tau) for the true problem and k frozen for the
// eigenvalue analysis.

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shearlab/model.hpp"
#include "shearlab/ode.hpp"

namespace shearlab {

enum class Stability { asymptotically_stable, unstable, marginal };
enum class Regime { hadamard, turing, diffusive, unclassified };

std::string to_string(Stability s);
std::string to_string(Regime r);

/// Regime of the frozen linearization: hadamard (n = k = 0), turing
/// (k = 0 < n), diffusive (k, n > 0); unclassified for k > 0 = n.
Regime classify_regime(double n, double k);

struct ModeEigen {
  int j;
  double lambda_minus;
  double lambda_plus;
  double discriminant;
  Stability classification;
};

struct ModeSpectrum {
  MaterialParams params;
  double k;
  std::vector<ModeEigen> modes;
  int num_unstable;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Mode matrix M_j(k).
Matrix2 mode_matrix(const MaterialParams& p, double k, int j);

/// Both real roots of lambda^2 + lambda(alpha + (n+k)x) + n k x^2 - alpha x = 0.
ModeEigen mode_eigen(const MaterialParams& p, double k, int j);

/// Left-hand side of the characteristic polynomial at lambda.
double binomial_residual(const MaterialParams& p, double k, int j, double lambda);

constexpr int kDefaultJmax = 256;

ModeSpectrum spectrum(const MaterialParams& p, double k, int jmax = kDefaultJmax);

struct AsymptoticEigen {
  double lambda_minus;
  double lambda_plus;
  Regime regime;
};

/// Large-j expansions of the eigenvalues. Throws NumericalError
/// ("unsupported-regime") for k > 0 = n.
AsymptoticEigen asymptotic_eigen(const MaterialParams& p, double k, int j);

// ---------------------------------------------------------------------------
// Mode time integration

struct ModeState {
  double u;
  double theta;
};

enum class ModeMethod { explicit_rk, implicit_trapezoid, automatic };

/// Sampled solution of one mode ODE in rescaled time.
class ModeTrajectory {
 public:
  ModeTrajectory() = default;
  ModeTrajectory(std::vector<double> tau, std::vector<ModeState> states,
                 std::vector<ModeState> rates, ModeMethod method)
      : tau_(std::move(tau)), states_(std::move(states)), rates_(std::move(rates)),
        method_(method) {}

  const std::vector<double>& tau() const { return tau_; }
  const std::vector<ModeState>& states() const { return states_; }
  ModeState back() const { return states_.back(); }
  ModeMethod method() const { return method_; }
  /// Cubic Hermite evaluation between stored nodes (node derivatives come
  /// from the right-hand side, so the interpolant is C^1).
  ModeState at(double tau) const;

 private:
  std::vector<double> tau_;
  std::vector<ModeState> states_;
  std::vector<ModeState> rates_;
  ModeMethod method_ = ModeMethod::explicit_rk;
};

/// Diffusion coefficient seen by the modes: frozen value, or
/// kappa c0 exp(alpha tau) evaluated analytically.
double mode_diffusion(const MaterialParams& p, double tau, std::optional<double> frozen_k);

/// Integrates one mode from tau = 0 to tau_end.
///
/// explicit_rk uses Dormand-Prince 5(4) with rtol 1e-10; implicit_trapezoid
/// uses the trapezoidal rule with fixed step min(1e-3, 0.1 / k(tau_end));
/// automatic tries the explicit scheme and falls back to the trapezoidal rule
/// if the explicit run hits its step budget or step floor.
ModeTrajectory integrate_mode(const MaterialParams& p, int j, ModeState init, double tau_end,
                              std::optional<double> frozen_k = std::nullopt,
                              ModeMethod method = ModeMethod::automatic);

/// Closed-form solution of the frozen system from its eigen-decomposition.
ModeState frozen_mode_exact(const MaterialParams& p, double k, int j, ModeState init,
                            double tau);

// ---------------------------------------------------------------------------
// Energy certificate

struct EnergyCertificate {
  double A;
  double B;
  double C_B;
  double Cp;
  double T;
};

/// Poincare constant for zero-mean functions on [0, 1] with Neumann data.
double poincare_constant();

/// Weights of the two energy functionals: A and B are the smallest admissible
/// values times 1.1; T is the time after which the A-weighted energy cannot
/// increase. Requires n > 0 and kappa > 0.
EnergyCertificate energy_certificate(const MaterialParams& p);

struct EnergySample {
  double tau;
  double t;
  double E;
};

struct EnergyReport {
  bool applicable = true;
  std::string note;
  double T = 0.0;
  std::vector<EnergySample> samples;
  double max_E_before_T = 0.0;
  bool monotone_after_T = true;
  double ratio_end_to_start = 0.0;
};

/// Weighted energy sum_j (1/2)[(A/2)u_j^2 + (1/2)theta_j^2] of the supplied
/// modes integrated with the non-autonomous diffusion. Mode j = 0 is rejected
/// (the mean strain-rate perturbation vanishes). For kappa = 0 the report is
/// returned with applicable = false.
EnergyReport energy_decay_check(const MaterialParams& p, const EnergyCertificate& cert,
                                const std::vector<std::pair<int, ModeState>>& modes,
                                double tau_end, int num_samples = 400);

}  // namespace shearlab

#endif  // SHEARLAB_STABILITY_HPP
