#ifndef SHEARLAB_ODE_HPP
#define SHEARLAB_ODE_HPP

// Adaptive Dormand-Prince 5(4) integrator with PI step control and the
// fourth-order continuous extension of Hairer & Wanner (DOPRI5).

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace shearlab::ode {

using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  /// First trial step; 0 selects one automatically.
  double h_initial = 0.0;
  double h_max = std::numeric_limits<double>::infinity();
  /// Absolute floor on the step size. The effective floor is
  /// max(h_min, 16 eps |t|).
  double h_min = 0.0;
  long max_steps = 1000000;
};

/// Continuous extension over one accepted step [t0, t0 + h].
class DenseStep {
 public:
  DenseStep() = default;
  DenseStep(double t0, double h, std::vector<double> coeffs, std::size_t dim)
      : t0_(t0), h_(h), dim_(dim), coeffs_(std::move(coeffs)) {}

  double t0() const { return t0_; }
  double t1() const { return t0_ + h_; }
  std::size_t dim() const { return dim_; }
  void eval(double t, std::span<double> out) const;

 private:
  double t0_ = 0.0;
  double h_ = 0.0;
  std::size_t dim_ = 0;
  std::vector<double> coeffs_;  // 5 blocks of length dim
};

/// Piecewise dense output assembled from consecutive accepted steps.
class Trajectory {
 public:
  void push(DenseStep step) { steps_.push_back(std::move(step)); }
  bool empty() const { return steps_.empty(); }
  double t_begin() const { return steps_.front().t0(); }
  double t_end() const { return steps_.back().t1(); }
  std::size_t num_steps() const { return steps_.size(); }
  const std::vector<DenseStep>& steps() const { return steps_; }
  std::vector<double> eval(double t) const;

 private:
  std::vector<DenseStep> steps_;
};

struct StepInfo {
  double t_old;
  double t;
  std::span<const double> y;
  const DenseStep& dense;
};

/// Observer called after each accepted step; return false to stop.
using Observer = std::function<bool(const StepInfo&)>;

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

struct Result {
  double t;
  std::vector<double> y;
  Stats stats;
  bool stopped_by_observer = false;
};

class Dopri5 {
 public:
  explicit Dopri5(Options opts = {}) : opts_(opts) {}

  /// Integrates y' = f(t, y) from t0 to t1 (t1 > t0).
  /// Throws NumericalError("step-underflow") when the controller drives the
  /// step below the floor and NumericalError("max-steps") when the step
  /// budget is exhausted.
  Result integrate(const Rhs& f, double t0, std::span<const double> y0, double t1,
                   const Observer& observer = nullptr) const;

  const Options& options() const { return opts_; }

 private:
  Options opts_;
};

}  // namespace shearlab::ode

#endif  // SHEARLAB_ODE_HPP
