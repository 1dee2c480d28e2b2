#ifndef SHEARLAB_INTERP_HPP
#define SHEARLAB_INTERP_HPP

#include <span>
#include <vector>

namespace shearlab::interp {

/// Index i with x[i] <= v <= x[i+1], clamped to the end intervals.
std::size_t locate(std::span<const double> x, double v);

/// Monotone piecewise cubic (Fritsch-Carlson slopes, as in PCHIP).
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double v) const;
  double derivative(double v) const;
  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, d_;
};

/// Quintic Hermite basis evaluation on one interval [x0, x1] given the value,
/// first and second derivative at both ends. Returns value and first two
/// derivatives.
struct HermiteValue {
  double f;
  double df;
  double d2f;
};
HermiteValue quintic_hermite(double x0, double x1, double f0, double d0, double s0, double f1,
                             double d1, double s1, double v);

}  // namespace shearlab::interp

#endif  // SHEARLAB_INTERP_HPP
