#include "shearlab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shearlab/errors.hpp"

namespace shearlab {

using std::numbers::pi;

std::string to_string(Stability s) {
  switch (s) {
    case Stability::asymptotically_stable: return "asymptotically-stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: return "marginal";
  }
  return "?";
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::hadamard: return "hadamard";
    case Regime::turing: return "turing";
    case Regime::diffusive: return "diffusive";
    case Regime::unclassified: return "unclassified";
  }
  return "?";
}

Regime classify_regime(double n, double k) {
  if (k == 0.0) return n == 0.0 ? Regime::hadamard : Regime::turing;
  return n > 0.0 ? Regime::diffusive : Regime::unclassified;
}

namespace {

double wavenumber_sq(int j) {
  const double w = j * pi;
  return w * w;
}

void check_mode_args(double k, int j) {
  if (j < 0) throw DomainError("mode index must be >= 0");
  if (!(k >= 0.0)) throw DomainError("diffusion k must be >= 0");
}

}  // namespace

Matrix2 mode_matrix(const MaterialParams& p, double k, int j) {
  const double x = wavenumber_sq(j);
  return {{{-p.n() * x, p.alpha() * x}, {p.n() + 1.0, -p.alpha() - k * x}}};
}

ModeEigen mode_eigen(const MaterialParams& p, double k, int j) {
  check_mode_args(k, j);
  const double n = p.n(), alpha = p.alpha(), x = wavenumber_sq(j);
  const double b = alpha + (n + k) * x;
  const double c = n * k * x * x - alpha * x;
  // Expanded discriminant: no cancellation between b^2 and 4c.
  const double disc = (n - k) * (n - k) * x * x + (2.0 * alpha * (n + k) + 4.0 * alpha) * x +
                      alpha * alpha;
  // b > 0, so the larger-magnitude root is -(b + sqrt(disc))/2.
  const double big = -0.5 * (b + std::sqrt(disc));
  const double small = c / big;

  Stability cls = Stability::marginal;
  if (j > 0) {
    const double lhs = n * k * x;
    if (lhs < alpha) cls = Stability::unstable;
    else if (lhs > alpha) cls = Stability::asymptotically_stable;
  }
  return ModeEigen{j, std::min(big, small), std::max(big, small), disc, cls};
}

double binomial_residual(const MaterialParams& p, double k, int j, double lambda) {
  const double x = wavenumber_sq(j);
  return lambda * lambda + lambda * (p.alpha() + (p.n() + k) * x) + p.n() * k * x * x -
         p.alpha() * x;
}

ModeSpectrum spectrum(const MaterialParams& p, double k, int jmax) {
  if (jmax < 1) throw DomainError("jmax must be >= 1");
  ModeSpectrum s{p, k, {}, 0};
  s.modes.reserve(static_cast<std::size_t>(jmax) + 1);
  for (int j = 0; j <= jmax; ++j) {
    s.modes.push_back(mode_eigen(p, k, j));
    if (s.modes.back().classification == Stability::unstable) ++s.num_unstable;
  }
  return s;
}

AsymptoticEigen asymptotic_eigen(const MaterialParams& p, double k, int j) {
  check_mode_args(k, j);
  if (j < 1) throw DomainError("asymptotic_eigen: j must be >= 1");
  const double n = p.n(), alpha = p.alpha();
  const double w = j * pi, x = w * w;
  const Regime regime = classify_regime(n, k);

  switch (regime) {
    case Regime::hadamard: {
      const double sa = std::sqrt(alpha);
      const double corr = alpha * sa / (8.0 * w);
      return {-sa * w - 0.5 * alpha - corr, sa * w - 0.5 * alpha + corr, regime};
    }
    case Regime::turing: {
      const double q = alpha * x / (alpha + n * x);
      return {-n * x - alpha - q, q, regime};
    }
    case Regime::diffusive: {
      if (std::abs(n - k) < 1e-8) {
        const ModeEigen e = mode_eigen(p, k, j);
        return {e.lambda_minus, e.lambda_plus, regime};
      }
      if (n > k) {
        const double q = alpha * (k + 1.0) / std::abs(n - k + alpha / x);
        return {-n * x - alpha - q, -k * x + q, regime};
      }
      // n < k: the slow root follows -n x instead of -k x.
      const double q = alpha * (n + 1.0) / (k - n);
      return {-k * x - alpha - q, -n * x + q, regime};
    }
    case Regime::unclassified:
      break;
  }
  throw NumericalError("unsupported-regime", "no large-j expansion for k > 0 with n = 0");
}

// ---------------------------------------------------------------------------

double mode_diffusion(const MaterialParams& p, double tau, std::optional<double> frozen_k) {
  if (frozen_k) return *frozen_k;
  return p.kappa() * std::exp(p.log_c0() + p.alpha() * tau);
}

namespace {

ModeState mode_rhs(const MaterialParams& p, int j, double k, ModeState s) {
  const double x = wavenumber_sq(j);
  return {-p.n() * x * s.u + p.alpha() * x * s.theta,
          (p.n() + 1.0) * s.u - (p.alpha() + k * x) * s.theta};
}

ModeTrajectory integrate_explicit(const MaterialParams& p, int j, ModeState init, double tau_end,
                                  std::optional<double> frozen_k) {
  ode::Options opts;
  opts.rtol = 1e-10;
  opts.atol = 1e-20 * std::max({1.0, std::abs(init.u), std::abs(init.theta)});
  opts.max_steps = 200000;
  const ode::Dopri5 solver(opts);

  auto f = [&](double tau, std::span<const double> y, std::span<double> dy) {
    const ModeState r = mode_rhs(p, j, mode_diffusion(p, tau, frozen_k), {y[0], y[1]});
    dy[0] = r.u;
    dy[1] = r.theta;
  };

  std::vector<double> taus{0.0};
  std::vector<ModeState> states{init};
  std::vector<ModeState> rates{mode_rhs(p, j, mode_diffusion(p, 0.0, frozen_k), init)};
  const std::array<double, 2> y0{init.u, init.theta};
  solver.integrate(f, 0.0, y0, tau_end, [&](const ode::StepInfo& info) {
    const ModeState s{info.y[0], info.y[1]};
    taus.push_back(info.t);
    states.push_back(s);
    rates.push_back(mode_rhs(p, j, mode_diffusion(p, info.t, frozen_k), s));
    return true;
  });
  return ModeTrajectory(std::move(taus), std::move(states), std::move(rates),
                        ModeMethod::explicit_rk);
}

ModeTrajectory integrate_trapezoid(const MaterialParams& p, int j, ModeState init, double tau_end,
                                   std::optional<double> frozen_k) {
  const double k_end = mode_diffusion(p, tau_end, frozen_k);
  const double h_target = k_end > 0.0 ? std::min(1e-3, 0.1 / k_end) : 1e-3;
  const long steps = std::max(1L, static_cast<long>(std::ceil(tau_end / h_target)));
  const double h = tau_end / static_cast<double>(steps);
  const double x = wavenumber_sq(j);

  std::vector<double> taus(static_cast<std::size_t>(steps) + 1);
  std::vector<ModeState> states(taus.size()), rates(taus.size());
  taus[0] = 0.0;
  states[0] = init;
  rates[0] = mode_rhs(p, j, mode_diffusion(p, 0.0, frozen_k), init);

  for (long s = 0; s < steps; ++s) {
    const double tau1 = static_cast<double>(s + 1) * h;
    const double k1 = mode_diffusion(p, tau1, frozen_k);
    const ModeState y0 = states[s];
    const ModeState f0 = rates[s];
    // (I - h/2 M1) y1 = y0 + h/2 f0
    const double m11 = 1.0 + 0.5 * h * p.n() * x, m12 = -0.5 * h * p.alpha() * x;
    const double m21 = -0.5 * h * (p.n() + 1.0), m22 = 1.0 + 0.5 * h * (p.alpha() + k1 * x);
    const double r1 = y0.u + 0.5 * h * f0.u, r2 = y0.theta + 0.5 * h * f0.theta;
    const double det = m11 * m22 - m12 * m21;
    const ModeState y1{(r1 * m22 - m12 * r2) / det, (m11 * r2 - m21 * r1) / det};
    taus[s + 1] = tau1;
    states[s + 1] = y1;
    rates[s + 1] = mode_rhs(p, j, k1, y1);
  }
  taus.back() = tau_end;
  return ModeTrajectory(std::move(taus), std::move(states), std::move(rates),
                        ModeMethod::implicit_trapezoid);
}

}  // namespace

ModeState ModeTrajectory::at(double tau) const {
  if (tau_.empty()) throw DomainError("empty mode trajectory");
  if (tau <= tau_.front()) return states_.front();
  if (tau >= tau_.back()) return states_.back();
  const auto it = std::upper_bound(tau_.begin(), tau_.end(), tau);
  const std::size_t i = static_cast<std::size_t>(std::distance(tau_.begin(), it)) - 1;
  const double h = tau_[i + 1] - tau_[i];
  const double s = (tau - tau_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2,
               h11 = s3 - s2;
  auto blend = [&](double y0, double d0, double y1, double d1) {
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
  };
  return {blend(states_[i].u, rates_[i].u, states_[i + 1].u, rates_[i + 1].u),
          blend(states_[i].theta, rates_[i].theta, states_[i + 1].theta, rates_[i + 1].theta)};
}

ModeTrajectory integrate_mode(const MaterialParams& p, int j, ModeState init, double tau_end,
                              std::optional<double> frozen_k, ModeMethod method) {
  if (j < 0) throw DomainError("mode index must be >= 0");
  if (!(tau_end > 0.0)) throw DomainError("tau_end must be > 0");
  if (frozen_k && *frozen_k < 0.0) throw DomainError("frozen k must be >= 0");

  switch (method) {
    case ModeMethod::explicit_rk: return integrate_explicit(p, j, init, tau_end, frozen_k);
    case ModeMethod::implicit_trapezoid: return integrate_trapezoid(p, j, init, tau_end, frozen_k);
    case ModeMethod::automatic:
      try {
        return integrate_explicit(p, j, init, tau_end, frozen_k);
      } catch (const NumericalError&) {
        return integrate_trapezoid(p, j, init, tau_end, frozen_k);
      }
  }
  throw DomainError("unknown mode integration method");
}

ModeState frozen_mode_exact(const MaterialParams& p, double k, int j, ModeState init,
                            double tau) {
  const ModeEigen e = mode_eigen(p, k, j);
  const Matrix2 m = mode_matrix(p, k, j);
  const double lp = e.lambda_plus, lm = e.lambda_minus;
  // exp(M tau) = [e^{lp tau}(M - lm I) - e^{lm tau}(M - lp I)] / (lp - lm)
  const double ep = std::exp(lp * tau), em = std::exp(lm * tau);
  const double d = lp - lm;
  auto entry = [&](int r, int c) {
    const double mrc = m[r][c];
    const double id = r == c ? 1.0 : 0.0;
    return (ep * (mrc - lm * id) - em * (mrc - lp * id)) / d;
  };
  return {entry(0, 0) * init.u + entry(0, 1) * init.theta,
          entry(1, 0) * init.u + entry(1, 1) * init.theta};
}

// ---------------------------------------------------------------------------

double poincare_constant() { return 1.0 / (pi * pi); }

EnergyCertificate energy_certificate(const MaterialParams& p) {
  const double n = p.n(), alpha = p.alpha(), kappa = p.kappa();
  if (!(n > 0.0)) throw DomainError("energy certificate requires n > 0");
  if (!(kappa > 0.0)) throw DomainError("energy certificate requires kappa > 0");
  constexpr double headroom = 1.1;
  const double cp = poincare_constant();
  const double sigma0 = std::exp(-p.log_c0());

  EnergyCertificate c{};
  c.Cp = cp;
  // A n / (2 Cp) >= (n+1)^2 / alpha
  c.A = headroom * 2.0 * cp * (n + 1.0) * (n + 1.0) / (alpha * n);
  // B kappa > (alpha^2 / 2n) sigma_s(0) >= (alpha^2 / 2n) sigma_s(t)
  c.B = headroom * alpha * alpha / (2.0 * n * kappa) * sigma0;
  // d/dt F <= [B(n+1)^2/alpha - n/Cp]_+ sigma_s(t) F, maximal at t = 0.
  c.C_B = std::max(0.0, c.B * (n + 1.0) * (n + 1.0) / alpha - n / cp) * sigma0;
  // (A alpha^2 / 2n) sigma_s(T) = kappa
  const double ratio = c.A * alpha * alpha / (2.0 * n * kappa);
  c.T = std::max(0.0, (ratio - p.c0()) / alpha);
  return c;
}

EnergyReport energy_decay_check(const MaterialParams& p, const EnergyCertificate& cert,
                                const std::vector<std::pair<int, ModeState>>& modes,
                                double tau_end, int num_samples) {
  EnergyReport rep;
  if (!(p.kappa() > 0.0)) {
    rep.applicable = false;
    rep.note = "energy certificate requires kappa > 0";
    return rep;
  }
  if (modes.empty()) throw DomainError("energy_decay_check: no modes supplied");
  if (num_samples < 2) throw DomainError("energy_decay_check: need at least two samples");
  for (const auto& [j, init] : modes) {
    if (j < 1) throw DomainError("energy_decay_check: mode j = 0 carries the mean and is excluded");
  }
  rep.T = cert.T;

  std::vector<ModeTrajectory> trajs;
  trajs.reserve(modes.size());
  for (const auto& [j, init] : modes) {
    trajs.push_back(integrate_mode(p, j, init, tau_end, std::nullopt, ModeMethod::automatic));
  }

  auto energy_at = [&](double tau) {
    double e = 0.0;
    for (const auto& tr : trajs) {
      const ModeState s = tr.at(tau);
      e += 0.5 * (0.5 * cert.A * s.u * s.u + 0.5 * s.theta * s.theta);
    }
    return e;
  };

  // Uniform samples in tau plus the exact certificate time.
  std::vector<double> taus;
  for (int i = 0; i < num_samples; ++i) taus.push_back(tau_end * i / (num_samples - 1));
  const double tau_T = tau_of_t(p, cert.T);
  if (tau_T > 0.0 && tau_T < tau_end) taus.push_back(tau_T);
  std::sort(taus.begin(), taus.end());

  double prev_after = INFINITY;
  for (double tau : taus) {
    const double t = tau == 0.0 ? 0.0 : t_of_tau(p, tau);
    const double e = energy_at(tau);
    rep.samples.push_back({tau, t, e});
    if (t <= cert.T) rep.max_E_before_T = std::max(rep.max_E_before_T, e);
    if (t >= cert.T) {
      // Integration error allowance: relative 1e-8.
      if (e > prev_after * (1.0 + 1e-8)) rep.monotone_after_T = false;
      prev_after = e;
    }
  }
  rep.ratio_end_to_start = rep.samples.back().E / rep.samples.front().E;
  return rep;
}

}  // namespace shearlab
