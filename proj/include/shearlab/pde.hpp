#ifndef SHEARLAB_PDE_HPP
#define SHEARLAB_PDE_HPP

// Method-of-lines solver for
//
//   v_t = sigma_x,  theta_t = kappa theta_xx + sigma u,  u = v_x,
//   sigma = exp(-alpha theta) u^n
//
// on [0, 1] with v(0) = 0, v(1) = 1 and theta_x = 0 at both ends.
//
// Staggered grid: v lives on the N+1 nodes x_i = i h, theta on the N cell
// centres x_j = (j + 1/2) h. The strain rate u_j = (v_{j+1} - v_j) / h and the
// stress are cell quantities, so sum_j u_j h = v(1) - v(0) holds exactly.
// The Neumann condition is a mirror ghost cell.

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shearlab/errors.hpp"
#include "shearlab/model.hpp"

namespace shearlab::pde {

class Grid1D {
 public:
  /// N >= 16 cells on [0, 1].
  explicit Grid1D(int N);
  int N() const { return N_; }
  double h() const { return h_; }
  double node(int i) const { return i * h_; }
  double center(int j) const { return (j + 0.5) * h_; }

 private:
  int N_;
  double h_;
};

struct FieldState {
  double t = 0.0;
  std::vector<double> v;      // N + 1 nodes
  std::vector<double> theta;  // N cells
};

std::vector<double> strain_rate(const Grid1D& g, const FieldState& s);
std::vector<double> stress(const MaterialParams& p, const Grid1D& g, const FieldState& s);

/// One-sided second-order estimate of sigma_x at x = 0 (side 0) or x = 1 (side 1).
double boundary_stress_flux(const MaterialParams& p, const Grid1D& g, const FieldState& s,
                            int side);

/// Dirichlet data for v. Defaults to v(0) = 0, v(1) = 1.
struct Boundary {
  std::function<double(double t)> left;
  std::function<double(double t)> right;
  bool time_dependent() const { return left || right; }
  double at_left(double t) const { return left ? left(t) : 0.0; }
  double at_right(double t) const { return right ? right(t) : 1.0; }
};

/// Optional forcing added to the v-equation (at nodes) and the theta-equation
/// (at cell centres).
struct Sources {
  std::function<double(double x, double t)> v;
  std::function<double(double x, double t)> theta;
  bool any() const { return v || theta; }
};

enum class Scheme { explicit_rk, implicit_ros2, automatic };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// explicit_rk: Dormand-Prince 5(4) with PI control.
/// implicit_ros2: two-stage L-stable Rosenbrock method (gamma = 1 + 1/sqrt 2)
/// with exact banded Jacobian and embedded first-order error estimate.
/// automatic: implicit when the explicit scheme would need more than about
/// 1e5 steps, judged from the largest diffusion coefficient
/// max(kappa, n sigma / u) and the stability bound dt <= 2.5 h^2 / (4 D).
struct StepControl {
  double rtol = 1e-8;
  double atol = 1e-8;
  Scheme scheme = Scheme::automatic;
  long max_steps = 5000000;
  double h_max = std::numeric_limits<double>::infinity();
};

struct SolverStats {
  long accepted = 0;
  long rejected = 0;
  Scheme scheme_used = Scheme::explicit_rk;
};

/// u dropped to zero or below at an accepted step. Carries the last state.
class PositivityError : public NumericalError {
 public:
  PositivityError(const std::string& what, FieldState state)
      : NumericalError("positivity", what), state_(std::move(state)) {}
  const FieldState& state() const { return state_; }

 private:
  FieldState state_;
};

class Problem {
 public:
  Problem(MaterialParams p, Grid1D g, Boundary bc = {}, Sources src = {});

  const MaterialParams& params() const { return p_; }
  const Grid1D& grid() const { return g_; }
  const Boundary& boundary() const { return bc_; }
  bool autonomous() const { return !bc_.time_dependent() && !src_.any(); }

  /// Packed unknowns: theta_j at 2j, interior v_i at 2i - 1 (size 2N - 1).
  std::size_t dim() const { return 2 * static_cast<std::size_t>(g_.N()) - 1; }
  std::vector<double> pack(const FieldState& s) const;
  FieldState unpack(double t, const std::vector<double>& y) const;

  /// Right-hand side on packed unknowns. Returns NaN entries where u <= 0.
  void rhs(double t, const double* y, double* dydt) const;
  /// Banded Jacobian (two sub- and two super-diagonals) in LAPACK band
  /// storage with leading dimension 7 and room for the LU fill-in.
  void jacobian_band(double t, const double* y, std::vector<double>& ab) const;

  /// Advances s to t_end. `observe` is called at each time of `out_times`
  /// (sorted, within (s.t, t_end]) with the interpolated or exactly hit state.
  FieldState advance(const FieldState& s, double t_end, const StepControl& ctl,
                     const std::vector<double>& out_times = {},
                     const std::function<void(const FieldState&)>& observe = nullptr,
                     SolverStats* stats = nullptr) const;

 private:
  MaterialParams p_;
  Grid1D g_;
  Boundary bc_;
  Sources src_;
};

/// Single step-size decision of the automatic scheme.
Scheme choose_scheme(const Problem& prob, const FieldState& s, double t_end);

// ---------------------------------------------------------------------------
// Diagnostics

struct Diagnostics {
  double t;
  double inhomogeneity;  // max theta - min theta
  double max_u;
  double mode1_u;      // 2 int u cos(pi x) dx
  double mode1_theta;  // 2 int theta cos(pi x) dx
  double energy;       // int (A/2)(u - 1)^2 + (1/2)(theta - theta_s)^2 dx
  double min_u;
  double integral_u;
};

/// Midpoint-rule integrals over the cells. `energy_weight` is A.
Diagnostics diagnose(const MaterialParams& p, const Grid1D& g, const FieldState& s,
                     double energy_weight);

// ---------------------------------------------------------------------------
// Runs from a configuration document

struct InitialData {
  std::string type = "uniform";  // uniform | gaussian_bump | cosine_mode | from_file
  // gaussian_bump: theta = theta0 + amplitude exp(-(x - center)^2 / (2 width^2)),
  // plus optional uniform noise of size `noise` drawn with `seed`.
  double center = 0.5;
  double width = 0.05;
  double amplitude = 0.1;
  double noise = 0.0;
  unsigned long long seed = 0;
  // cosine_mode: theta = theta0 + amplitude cos(j pi x), u = 1 + amplitude_u cos(j pi x)
  int mode = 1;
  double amplitude_u = 0.0;
  // from_file: CSV with columns x, v, theta, interpolated onto the grid
  std::string path;
};

struct OutputSpec {
  std::string spacing = "linear";  // linear | log
  int count = 101;                 // diagnostic times, t = 0 included
  double t_first = 1e-3;           // first nonzero time for log spacing
  int snapshots = 5;               // snapshot times, chosen with the same spacing
};

struct RunConfig {
  MaterialParams params{0.05, 0.5, 0.5, 1.0};
  int N = 512;
  InitialData initial;
  double t_end = 500.0;
  OutputSpec output;
  StepControl control;
  /// Weight A of the energy diagnostic. Defaults to the certificate value
  /// when kappa > 0 and n > 0, else 1.
  std::optional<double> energy_weight;
};

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

FieldState initial_state(const RunConfig& c, const Grid1D& g);
std::vector<double> output_times(const OutputSpec& o, double t_end);
std::vector<double> snapshot_times(const OutputSpec& o, double t_end);
double resolve_energy_weight(const RunConfig& c);

struct RunResult {
  std::vector<Diagnostics> diagnostics;
  std::vector<FieldState> snapshots;
  SolverStats stats;
  double energy_weight = 1.0;
  /// Set when the run stopped early on a positivity failure.
  std::optional<std::string> aborted;
};

/// Runs to t_end. A positivity failure ends the run early: the result keeps
/// the diagnostics so far plus the failing state as the last snapshot, and
/// `aborted` holds the message.
RunResult run(const RunConfig& c);

void write_diagnostics_csv(std::ostream& os, const RunConfig& c, const RunResult& r);
/// Rows at cell centres: x, v (node average), u, theta, sigma; one block per
/// snapshot distinguished by the t column.
void write_snapshots_csv(std::ostream& os, const RunConfig& c, const RunResult& r);

}  // namespace shearlab::pde

#endif  // SHEARLAB_PDE_HPP
