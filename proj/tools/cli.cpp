#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "shearlab/csv.hpp"
#include "shearlab/errors.hpp"
#include "shearlab/localization.hpp"
#include "shearlab/model.hpp"
#include "shearlab/orbit.hpp"
#include "shearlab/pde.hpp"
#include "shearlab/profile.hpp"
#include "shearlab/stability.hpp"

namespace shearlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const CLI::Validator kPositive(
    [](std::string& in) {
      double v = 0.0;
      if (!CLI::detail::lexical_cast(in, v) || !(v > 0.0)) return "must be > 0, got " + in;
      return std::string();
    },
    "POSITIVE");
const CLI::Validator kNonNegative(
    [](std::string& in) {
      double v = 0.0;
      if (!CLI::detail::lexical_cast(in, v) || !(v >= 0.0)) return "must be >= 0, got " + in;
      return std::string();
    },
    "NONNEGATIVE");

// Options that can also come from a JSON config. Explicit flags win.
class ParamSet {
 public:
  explicit ParamSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& flag, const std::string& key, T& var,
                   const std::string& desc, bool tolerance = false) {
    CLI::Option* o = app_->add_option(flag, var, desc)->capture_default_str();
    entries_.push_back({key, o, tolerance,
                        [&var, key](const json& j) { var = j.at(key).get<T>(); },
                        [&var] { return json(var); }});
    return o;
  }

  void apply(const json& cfg) {
    for (auto& e : entries_) {
      if (e.opt->count() > 0 || !cfg.contains(e.key)) continue;
      try {
        e.load(cfg);
      } catch (const json::exception& ex) {
        throw DomainError("config key '" + e.key + "': " + ex.what());
      }
    }
  }

  json parameters() const {
    json j = json::object();
    for (const auto& e : entries_)
      if (!e.tolerance) j[e.key] = e.save();
    return j;
  }
  json tolerances() const {
    json j = json::object();
    for (const auto& e : entries_)
      if (e.tolerance) j[e.key] = e.save();
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    bool tolerance;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };
  CLI::App* app_;
  std::vector<Entry> entries_;
};

struct Context {
  explicit Context(std::ostream& o) : out(o) {}
  std::ostream& out;
  int threads = 1;
  std::string out_dir = ".";
  std::string prefix;
  std::string config_path;
  std::vector<std::string> outputs;
  json seed = nullptr;

  std::ofstream open(const std::string& name) {
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / (prefix + "_" + name)).string();
    std::ofstream os(path);
    if (!os) throw Error("io", "cannot write " + path);
    os.precision(17);
    outputs.push_back(path);
    return os;
  }
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<ParamSet> params;
  std::string config_path;
  std::string out_dir = ".";
  std::string prefix;
  // Builds a command-specific config override (simulate) or nothing.
  std::function<json(const json&)> merge;
  std::function<json()> resolved;  // overrides params->parameters() when set
  std::function<void(Context&)> body;
};

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot read config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DomainError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  // a manifest is accepted as a config
  if (j.contains("parameters")) {
    json merged = j.at("parameters");
    if (j.contains("tolerances")) merged.update(j.at("tolerances"));
    return merged;
  }
  return j;
}

int threads_from_env() {
  if (const char* s = std::getenv("SHEARLAB_THREADS")) {
    try {
      const int v = std::stoi(s);
      if (v >= 1) return v;
    } catch (...) {
    }
  }
  return 1;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : (i == n - 1 ? b : a + (b - a) * i / (n - 1));
  return v;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = i == n - 1 ? b : a * std::pow(b / a, n == 1 ? 0.0 : double(i) / (n - 1));
  return v;
}

// Adds a user-facing hint to orbit failures.
[[noreturn]] void rethrow_with_hint(const NumericalError& e) {
  std::string hint;
  if (e.kind() == "region-exit") hint = "; reduce --eps";
  else if (e.kind() == "unresolved-tail") hint = "; tighten --tol so the orbit reaches deeper into the node";
  else if (e.kind() == "not-converged" || e.kind() == "max-steps") hint = "; loosen --tol or raise the step budget";
  throw NumericalError(e.kind(), std::string(e.what()) + hint);
}

json residual_json(const PdeResidual& r) {
  const double fine = std::max(r.sup[0], r.sup[1]);
  return {{"sup", r.sup},
          {"rms", r.rms},
          {"hx", r.hx},
          {"ht", r.ht},
          {"sup_coarse", r.sup_coarse},
          {"observed_order", fine > 0.0 ? std::log2(r.sup_coarse / fine) : NAN},
          {"floor_warning", r.floor_warning},
          {"any_extrapolated", r.any_extrapolated}};
}

json msys_json(const MsysResidual& r) {
  return {{"sup", r.sup}, {"rms", r.rms}, {"fd_error", r.fd_error}, {"grid_too_coarse", r.grid_too_coarse}};
}

json endpoint_json(const EndpointReport& e) {
  return {{"xi_inner", e.xi_inner},
          {"xi_outer", e.xi_outer},
          {"Sigma_0plus", e.Sigma_0plus},
          {"U_0plus", e.U_0plus},
          {"Theta_0plus", e.Theta_0plus},
          {"product_0plus", e.product_0plus},
          {"dU0", e.dU0},
          {"dSigma0", e.dSigma0},
          {"dTheta0", e.dTheta0},
          {"taylor_coeff", e.taylor_coeff},
          {"taylor_expected", e.taylor_expected},
          {"taylor_rel_error", e.taylor_rel_error},
          {"xi_tail", e.xi_tail},
          {"tail_sigma", e.tail_sigma},
          {"tail_u", e.tail_u},
          {"tail_theta", e.tail_theta},
          {"tail_extrapolated", e.tail_extrapolated}};
}

void write_json(Context& ctx, const std::string& name, const json& j) {
  auto os = ctx.open(name);
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands

struct Material {
  double n = 0.05, alpha = 0.5, kappa = 0.0, theta0 = 0.0;
};

void add_material(ParamSet& ps, Material& m, bool with_kappa, bool with_theta0) {
  ps.add("--n", "n", m.n, "strain-rate sensitivity n >= 0");
  ps.add("--alpha", "alpha", m.alpha, "thermal softening alpha > 0");
  if (with_kappa) ps.add("--kappa", "kappa", m.kappa, "thermal diffusivity kappa >= 0");
  if (with_theta0) ps.add("--theta0", "theta0", m.theta0, "base temperature theta0");
}

MaterialParams material(const Material& m) { return {m.n, m.alpha, m.kappa, m.theta0}; }

Command make_spectrum(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("spectrum", "eigenvalues of the frozen linearization, modes 0..jmax");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  auto k = std::make_shared<double>(0.0);
  auto jmax = std::make_shared<int>(10);
  add_material(*c.params, *m, false, false);
  c.params->add("--k", "k", *k, "frozen diffusion coefficient k >= 0");
  c.params->add("--jmax", "jmax", *jmax, "highest mode index (>= 1)")->check(kPositive);
  c.body = [m, k, jmax](Context& ctx) {
    const auto sp = spectrum(MaterialParams(m->n, m->alpha, 0.0, 0.0), *k, *jmax);
    const std::string regime = to_string(classify_regime(m->n, *k));
    auto os = ctx.open("spectrum.csv");
    csv::write_meta(os, {{"n", csv::fmt(m->n)},
                         {"alpha", csv::fmt(m->alpha)},
                         {"k", csv::fmt(*k)},
                         {"jmax", std::to_string(*jmax)},
                         {"num_unstable", std::to_string(sp.num_unstable)},
                         {"regime", regime}});
    os << "j,lambda_minus,lambda_plus,discriminant,unstable,classification\n";
    for (const auto& e : sp.modes) {
      os << e.j << ',' << csv::fmt(e.lambda_minus) << ',' << csv::fmt(e.lambda_plus) << ','
         << csv::fmt(e.discriminant) << ',' << (e.classification == Stability::unstable ? 1 : 0)
         << ',' << to_string(e.classification) << '\n';
    }
    ctx.out << "num_unstable=" << sp.num_unstable << " regime=" << regime << '\n';
  };
  return c;
}

Command make_uniform(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("uniform-shear", "uniform shearing base state on a time grid");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  auto tmax = std::make_shared<double>(200.0);
  auto points = std::make_shared<int>(201);
  auto spacing = std::make_shared<std::string>("linear");
  m->theta0 = 10.0;
  c.params->add("--alpha", "alpha", m->alpha, "thermal softening alpha > 0");
  c.params->add("--theta0", "theta0", m->theta0, "base temperature theta0");
  c.params->add("--tmax", "tmax", *tmax, "final time")->check(kPositive);
  c.params->add("--points", "points", *points, "number of samples (>= 2)")->check(CLI::Range(2, 100000000));
  c.params->add("--spacing", "spacing", *spacing, "linear | log")->check(CLI::IsMember({"linear", "log"}));
  c.body = [m, tmax, points, spacing](Context& ctx) {
    const MaterialParams p(0.0, m->alpha, 0.0, m->theta0);
    std::vector<double> ts = *spacing == "linear" ? linspace(0.0, *tmax, *points)
                                                   : logspace(*tmax * 1e-6, *tmax, *points - 1);
    if (*spacing == "log") ts.insert(ts.begin(), 0.0);
    auto os = ctx.open("uniform.csv");
    csv::write_meta(os, {{"alpha", csv::fmt(m->alpha)}, {"theta0", csv::fmt(m->theta0)}, {"c0", csv::fmt(p.c0())}});
    csv::write_header(os, {"t", "tau", "theta_s", "sigma_s"});
    for (double t : ts) {
      const auto s = uniform_shear(p, t);
      csv::write_row(os, {t, tau_of_t(p, t), s.theta_s, s.sigma_s});
    }
    const auto e = uniform_shear(p, *tmax);
    ctx.out << "theta_s=" << csv::fmt(e.theta_s) << " sigma_s=" << csv::fmt(e.sigma_s) << '\n';
  };
  return c;
}

Command make_modes(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("modes", "integrate one cosine mode of the linearized problem");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  m->kappa = 0.5;
  auto j = std::make_shared<int>(1);
  auto u0 = std::make_shared<double>(0.0), th0 = std::make_shared<double>(1.0);
  auto tau_end = std::make_shared<double>(10.0);
  auto frozen = std::make_shared<double>(-1.0);
  auto method = std::make_shared<std::string>("auto");
  auto samples = std::make_shared<int>(201);
  add_material(*c.params, *m, true, true);
  c.params->add("--j", "j", *j, "mode index")->check(kNonNegative);
  c.params->add("--u0", "u0", *u0, "initial u_j");
  c.params->add("--theta-init", "theta_init", *th0, "initial theta_j");
  c.params->add("--tau-end", "tau_end", *tau_end, "final rescaled time")->check(kPositive);
  c.params->add("--frozen-k", "frozen_k", *frozen,
                "frozen diffusion coefficient; negative uses k = kappa c0 exp(alpha tau)");
  c.params->add("--method", "method", *method, "auto | explicit | implicit")
      ->check(CLI::IsMember({"auto", "explicit", "implicit"}));
  c.params->add("--samples", "samples", *samples, "output samples (>= 2)")->check(CLI::Range(2, 100000000));
  c.body = [=](Context& ctx) {
    const MaterialParams p = material(*m);
    const ModeMethod mm = *method == "explicit"   ? ModeMethod::explicit_rk
                          : *method == "implicit" ? ModeMethod::implicit_trapezoid
                                                  : ModeMethod::automatic;
    std::optional<double> fk;
    if (*frozen >= 0.0) fk = *frozen;
    const auto tr = integrate_mode(p, *j, {*u0, *th0}, *tau_end, fk, mm);
    auto os = ctx.open("mode.csv");
    csv::write_meta(os, {{"n", csv::fmt(m->n)},
                         {"alpha", csv::fmt(m->alpha)},
                         {"kappa", csv::fmt(m->kappa)},
                         {"theta0", csv::fmt(m->theta0)},
                         {"j", std::to_string(*j)},
                         {"frozen_k", fk ? csv::fmt(*fk) : "none"},
                         {"method", tr.method() == ModeMethod::explicit_rk ? "explicit" : "implicit"}});
    csv::write_header(os, {"tau", "t", "u", "theta"});
    for (double tau : linspace(0.0, *tau_end, *samples)) {
      double t = INFINITY;
      try {
        t = t_of_tau(p, tau);
      } catch (const NumericalError&) {
      }
      const auto s = tr.at(tau);
      csv::write_row(os, {tau, t, s.u, s.theta});
    }
    const auto e = tr.back();
    ctx.out << "u_end=" << csv::fmt(e.u) << " theta_end=" << csv::fmt(e.theta) << '\n';
  };
  return c;
}

Command make_energy(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("energy", "energy certificate and decay check of the linearized modes");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  m->kappa = 0.5;
  auto modes = std::make_shared<std::vector<int>>(std::vector<int>{1, 2, 3});
  auto u0 = std::make_shared<double>(0.0), th0 = std::make_shared<double>(1.0);
  auto tau_end = std::make_shared<double>(0.0);
  auto samples = std::make_shared<int>(400);
  add_material(*c.params, *m, true, true);
  c.params->add("--modes", "modes", *modes, "mode indices, comma separated")->delimiter(',');
  c.params->add("--u0", "u0", *u0, "initial u_j of every mode");
  c.params->add("--theta-init", "theta_init", *th0, "initial theta_j of every mode");
  c.params->add("--tau-end", "tau_end", *tau_end, "final rescaled time; 0 picks tau(max(2T, 50))");
  c.params->add("--samples", "samples", *samples, "energy samples")->check(CLI::Range(2, 100000000));
  c.body = [=](Context& ctx) {
    const MaterialParams p = material(*m);
    const auto cert = energy_certificate(p);
    std::vector<std::pair<int, ModeState>> init;
    for (int j : *modes) init.push_back({j, {*u0, *th0}});
    const double te = *tau_end > 0.0 ? *tau_end : tau_of_t(p, std::max(2.0 * cert.T, 50.0));
    const auto rep = energy_decay_check(p, cert, init, te, *samples);
    auto os = ctx.open("energy.csv");
    csv::write_meta(os, {{"n", csv::fmt(m->n)},
                         {"alpha", csv::fmt(m->alpha)},
                         {"kappa", csv::fmt(m->kappa)},
                         {"theta0", csv::fmt(m->theta0)},
                         {"A", csv::fmt(cert.A)},
                         {"T", csv::fmt(cert.T)}});
    csv::write_header(os, {"tau", "t", "E"});
    for (const auto& s : rep.samples) csv::write_row(os, {s.tau, s.t, s.E});
    write_json(ctx, "certificate.json",
               {{"A", cert.A},
                {"B", cert.B},
                {"C_B", cert.C_B},
                {"Cp", cert.Cp},
                {"T", cert.T},
                {"max_E_before_T", rep.max_E_before_T},
                {"monotone_after_T", rep.monotone_after_T},
                {"ratio_end_to_start", rep.ratio_end_to_start}});
    ctx.out << "A=" << csv::fmt(cert.A) << " T=" << csv::fmt(cert.T)
            << " monotone_after_T=" << (rep.monotone_after_T ? "true" : "false") << '\n';
  };
  return c;
}

struct OrbitFlags {
  double nu = 0.1;
  double sigma0 = 1.88;
  ShootOptions shoot;
};

void add_orbit_flags(ParamSet& ps, OrbitFlags& o) {
  ps.add("--eps", "eps", o.shoot.eps, "seed distance from the saddle", true)->check(kPositive);
  ps.add("--tol", "tol", o.shoot.tol, "stop radius around the node", true)->check(kPositive);
  ps.add("--rtol", "rtol", o.shoot.rtol, "integrator relative tolerance", true)->check(kPositive);
}

Command make_heteroclinic(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("heteroclinic", "shoot the heteroclinic orbit of the planar system");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  m->n = 0.1;
  auto o = std::make_shared<OrbitFlags>();
  o->sigma0 = 0.0;
  add_material(*c.params, *m, false, false);
  c.params->add("--nu", "nu", o->nu, "profile parameter nu > 0");
  c.params->add("--sigma0", "sigma0", o->sigma0, "reparametrize to this Sigma0 (0 keeps the raw orbit)");
  add_orbit_flags(*c.params, *o);
  c.body = [m, o](Context& ctx) {
    const PlanarParams q(m->n, m->alpha, o->nu);
    OrbitPath path;
    try {
      path = shoot_heteroclinic(q, o->shoot);
      if (o->sigma0 > 0.0) path = reparametrize(path, o->sigma0);
    } catch (const NumericalError& e) {
      rethrow_with_hint(e);
    }
    {
      auto os = ctx.open("orbit.csv");
      write_orbit_csv(os, path);
    }
    const auto eq = equilibria(q);
    const auto k1 = estimate_kappa1(path);
    const auto tf = fit_tail_exponents(path);
    write_json(ctx, "orbit.json",
               {{"c_nu", q.c_nu()},
                {"P", {eq.P.point.a, eq.P.point.b}},
                {"Q", {eq.Q.point.a, eq.Q.point.b}},
                {"P_eigenvalues", eq.P.eigenvalues},
                {"Q_eigenvalues", eq.Q.eigenvalues},
                {"eps_used", path.eps_used()},
                {"samples", path.size()},
                {"eta_range", {path.eta_min(), path.eta_max()}},
                {"kappa1", k1.kappa1},
                {"kappa1_plateau_variation", k1.plateau_variation},
                {"eta0", path.eta0()},
                {"tail_slope_a", tf.slope_a},
                {"tail_slope_d", tf.slope_d},
                {"lambda1", tf.lambda1},
                {"lambda2", tf.lambda2}});
    ctx.out << "samples=" << path.size() << " kappa1=" << csv::fmt(k1.kappa1)
            << " eps_used=" << csv::fmt(path.eps_used()) << '\n';
  };
  return c;
}

Command make_profile(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("profile", "reconstruct the self-similar profile and check it");
  c.params = std::make_unique<ParamSet>(c.app);
  auto m = std::make_shared<Material>();
  m->n = 0.1;
  auto o = std::make_shared<OrbitFlags>();
  auto xi_tail = std::make_shared<double>(1e3);
  add_material(*c.params, *m, false, false);
  c.params->add("--nu", "nu", o->nu, "profile parameter nu > 0");
  c.params->add("--sigma0", "sigma0", o->sigma0, "Sigma(0)")->check(kPositive);
  c.params->add("--xi-tail", "xi_tail", *xi_tail, "where the tail deviations are measured")->check(kPositive);
  add_orbit_flags(*c.params, *o);
  c.body = [m, o, xi_tail](Context& ctx) {
    const PlanarParams q(m->n, m->alpha, o->nu);
    std::unique_ptr<Profile> prof;
    try {
      prof = std::make_unique<Profile>(reconstruct(reparametrize(shoot_heteroclinic(q, o->shoot), o->sigma0)));
    } catch (const NumericalError& e) {
      rethrow_with_hint(e);
    }
    {
      auto os = ctx.open("profile.csv");
      write_profile_csv(os, *prof);
    }
    const auto grid = logspace(1e-3, 1e3, 400);
    const auto res = msys_residual(prof->as_function(), m->n, m->alpha, o->nu, grid);
    json rep = {{"sigma0", prof->sigma0()},
                {"U0", prof->U0()},
                {"Theta0", prof->Theta0()},
                {"c_nu", prof->c_nu()},
                {"msys_residual", msys_json(res)},
                {"msys_range", {1e-3, 1e3}}};
    rep["endpoints"] = endpoint_json(endpoint_report(*prof, *xi_tail));
    write_json(ctx, "report.json", rep);
    ctx.out << "U0=" << csv::fmt(prof->U0()) << " msys_sup=" << csv::fmt(res.max_sup()) << '\n';
  };
  return c;
}

struct LocalFlags {
  Material m{0.1, 0.5, 0.0, 10.0};
  double lambda = 0.1;
  OrbitFlags o;
};

void add_local_flags(ParamSet& ps, LocalFlags& f) {
  add_material(ps, f.m, false, true);
  ps.add("--lambda", "lambda", f.lambda, "localization rate lambda > 0")->check(kPositive);
  ps.add("--sigma0", "sigma0", f.o.sigma0, "profile amplitude Sigma0 > 0")->check(kPositive);
  add_orbit_flags(ps, f.o);
}

LocalizedSolution build_localized(const LocalFlags& f) {
  try {
    return make_localized(material(f.m), ScalingParams(f.lambda, f.o.sigma0), f.o.shoot);
  } catch (const NumericalError& e) {
    rethrow_with_hint(e);
  }
}

Command make_localize(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("localize", "exact localizing solution: profile, fields, band, residual");
  c.params = std::make_unique<ParamSet>(c.app);
  auto f = std::make_shared<LocalFlags>();
  auto xmax = std::make_shared<double>(5.0), tmax = std::make_shared<double>(200.0);
  auto frames = std::make_shared<int>(5), nx = std::make_shared<int>(201);
  auto res_n = std::make_shared<int>(80);
  add_local_flags(*c.params, *f);
  c.params->add("--xmax", "xmax", *xmax, "x range [-xmax, xmax]")->check(kPositive);
  c.params->add("--tmax", "tmax", *tmax, "time range [0, tmax]")->check(kPositive);
  c.params->add("--frames", "frames", *frames, "number of output times")->check(CLI::Range(2, 100000));
  c.params->add("--nx", "nx", *nx, "x samples per frame")->check(CLI::Range(2, 10000000));
  c.params->add("--residual-n", "residual_n", *res_n, "residual grid cells per direction")->check(CLI::Range(8, 100000));
  c.body = [=](Context& ctx) {
    const LocalizedSolution sol = build_localized(*f);
    {
      auto os = ctx.open("profile.csv");
      write_profile_csv(os, sol.profile());
    }
    const auto ts = linspace(0.0, *tmax, *frames);
    {
      auto os = ctx.open("fields.csv");
      write_space_time_csv(os, sol, linspace(-*xmax, *xmax, *nx), ts, ctx.threads);
    }
    const auto band = band_diagnostics(sol, ts);
    {
      auto os = ctx.open("band.csv");
      write_band_csv(os, sol, band);
    }
    const auto res = pde_residual(sol.as_field(), sol.params(), {-*xmax, *xmax, *res_n, 0.0, *tmax, *res_n},
                                  ctx.threads);
    write_json(ctx, "residual.json", residual_json(res));
    ctx.out << "peak_u_end=" << csv::fmt(band.back().peak_u)
            << " halfwidth_end=" << csv::fmt(band.back().halfwidth)
            << " residual_sup=" << csv::fmt(res.max_sup()) << '\n';
  };
  return c;
}

Command make_residual(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("residual", "pde residual of a localizing solution on a space-time grid");
  c.params = std::make_unique<ParamSet>(c.app);
  auto f = std::make_shared<LocalFlags>();
  auto g = std::make_shared<SpaceTimeGrid>(SpaceTimeGrid{-5.0, 5.0, 80, 0.0, 10.0, 80});
  add_local_flags(*c.params, *f);
  c.params->add("--xmin", "xmin", g->x_min, "grid x_min");
  c.params->add("--xmax", "xmax", g->x_max, "grid x_max");
  c.params->add("--nx", "nx", g->nx, "cells in x")->check(CLI::Range(1, 10000000));
  c.params->add("--tmin", "tmin", g->t_min, "grid t_min")->check(kNonNegative);
  c.params->add("--tmax", "tmax", g->t_max, "grid t_max");
  c.params->add("--nt", "nt", g->nt, "cells in t (>= 8)")->check(CLI::Range(8, 10000000));
  c.body = [f, g](Context& ctx) {
    const LocalizedSolution sol = build_localized(*f);
    const auto res = pde_residual(sol.as_field(), sol.params(), *g, ctx.threads);
    const json j = residual_json(res);
    write_json(ctx, "residual.json", j);
    ctx.out << "sup=" << csv::fmt(res.max_sup()) << " observed_order=" << csv::fmt(j["observed_order"].get<double>())
            << " floor_warning=" << (res.floor_warning ? "true" : "false") << '\n';
  };
  return c;
}

Command make_simulate(CLI::App& root) {
  Command c;
  c.app = root.add_subcommand("simulate", "nonlinear initial-boundary-value problem on [0, 1]");
  c.params = std::make_unique<ParamSet>(c.app);
  // Flags are stored as strings/doubles and merged into the run config JSON.
  struct Flags {
    double n, alpha, kappa, theta0, t_end, width, amplitude, center, noise, amplitude_u, rtol, atol, t_first;
    int N, count, snapshots, mode;
    unsigned long long seed;
    std::string initial, scheme, spacing, path;
  };
  auto fl = std::make_shared<Flags>();
  auto opts = std::make_shared<std::vector<std::pair<CLI::Option*, std::function<void(json&)>>>>();
  auto add = [&](const std::string& flag, auto& var, const std::string& desc, std::vector<std::string> ptr) {
    CLI::Option* o = c.app->add_option(flag, var, desc);
    opts->push_back({o, [&var, ptr](json& j) {
                       json* cur = &j;
                       for (std::size_t i = 0; i + 1 < ptr.size(); ++i) cur = &(*cur)[ptr[i]];
                       (*cur)[ptr.back()] = var;
                     }});
    return o;
  };
  add("--n", fl->n, "strain-rate sensitivity", {"params", "n"});
  add("--alpha", fl->alpha, "thermal softening", {"params", "alpha"});
  add("--kappa", fl->kappa, "thermal diffusivity", {"params", "kappa"});
  add("--theta0", fl->theta0, "base temperature", {"params", "theta0"});
  add("--N", fl->N, "grid cells", {"grid", "N"});
  add("--t-end", fl->t_end, "final time", {"t_end"});
  add("--initial", fl->initial, "uniform | gaussian_bump | cosine_mode | from_file", {"initial", "type"});
  add("--width", fl->width, "bump width", {"initial", "width"});
  add("--amplitude", fl->amplitude, "bump or cosine amplitude", {"initial", "amplitude"});
  add("--center", fl->center, "bump centre", {"initial", "center"});
  add("--noise", fl->noise, "uniform noise added to the bump", {"initial", "noise"});
  add("--seed", fl->seed, "noise seed", {"initial", "seed"});
  add("--mode", fl->mode, "cosine mode index", {"initial", "mode"});
  add("--amplitude-u", fl->amplitude_u, "cosine amplitude of u", {"initial", "amplitude_u"});
  add("--init-file", fl->path, "CSV with x, v, theta", {"initial", "path"});
  add("--scheme", fl->scheme, "explicit | implicit | auto", {"solver", "scheme"});
  add("--rtol", fl->rtol, "relative tolerance", {"solver", "rtol"});
  add("--atol", fl->atol, "absolute tolerance", {"solver", "atol"});
  add("--count", fl->count, "diagnostic times", {"output", "count"});
  add("--spacing", fl->spacing, "linear | log", {"output", "spacing"});
  add("--t-first", fl->t_first, "first nonzero time of log spacing", {"output", "t_first"});
  add("--snapshots", fl->snapshots, "snapshot times", {"output", "snapshots"});

  auto cfg = std::make_shared<pde::RunConfig>();
  c.merge = [fl, opts, cfg](const json& base) {
    json j = base;
    for (auto& [o, set] : *opts)
      if (o->count() > 0) set(j);
    *cfg = pde::parse_run_config(j);
    return j;
  };
  c.resolved = [cfg] { return pde::to_json(*cfg); };
  c.body = [cfg](Context& ctx) {
    ctx.seed = cfg->initial.type == "gaussian_bump" && cfg->initial.noise != 0.0 ? json(cfg->initial.seed) : json(nullptr);
    const auto r = pde::run(*cfg);
    {
      auto os = ctx.open("diagnostics.csv");
      pde::write_diagnostics_csv(os, *cfg, r);
    }
    {
      auto os = ctx.open("snapshots.csv");
      pde::write_snapshots_csv(os, *cfg, r);
    }
    const auto& d = r.diagnostics.back();
    ctx.out << "t=" << csv::fmt(d.t) << " inhomogeneity=" << csv::fmt(d.inhomogeneity)
            << " max_u=" << csv::fmt(d.max_u) << " scheme=" << pde::to_string(r.stats.scheme_used)
            << " steps=" << r.stats.accepted << '\n';
    if (r.aborted) throw pde::PositivityError(*r.aborted, r.snapshots.back());
  };
  return c;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& msg, int code) {
  err << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"shearlab: shear-band localization toolkit", "shearlab"};
  app.set_version_flag("--version", std::string(SHEARLAB_VERSION));
  app.require_subcommand(1);
  int threads = threads_from_env();
  app.add_option("--threads", threads, "worker threads (default: SHEARLAB_THREADS or 1)")
      ->check(kPositive);

  std::vector<Command> cmds;
  cmds.push_back(make_spectrum(app));
  cmds.push_back(make_uniform(app));
  cmds.push_back(make_modes(app));
  cmds.push_back(make_energy(app));
  cmds.push_back(make_heteroclinic(app));
  cmds.push_back(make_profile(app));
  cmds.push_back(make_localize(app));
  cmds.push_back(make_residual(app));
  cmds.push_back(make_simulate(app));
  for (auto& c : cmds) {
    c.prefix = c.app->get_name();
    c.app->add_option("--config", c.config_path, "JSON config or manifest; flags override it");
    c.app->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    c.app->add_option("--prefix", c.prefix, "output file prefix")->capture_default_str();
    c.app->add_option("--threads", threads, "worker threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  Command* cmd = nullptr;
  for (auto& c : cmds)
    if (c.app->parsed()) cmd = &c;

  const auto start = std::chrono::steady_clock::now();
  Context ctx(out);
  ctx.threads = threads;
  ctx.out_dir = cmd->out_dir;
  ctx.prefix = cmd->prefix;
  ctx.config_path = cmd->config_path;
  try {
    const json cfg = cmd->config_path.empty() ? json::object() : load_config(cmd->config_path);
    cmd->params->apply(cfg);
    if (cmd->merge) cmd->merge(cfg);
    std::exception_ptr failure;
    try {
      cmd->body(ctx);
    } catch (const pde::PositivityError&) {
      failure = std::current_exception();  // outputs were written; still record the manifest
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest = {{"subcommand", cmd->app->get_name()},
                     {"version", SHEARLAB_VERSION},
                     {"parameters", cmd->resolved ? cmd->resolved() : cmd->params->parameters()},
                     {"tolerances", cmd->params->tolerances()},
                     {"inputs", {{"config", cmd->config_path.empty() ? json(nullptr) : json(cmd->config_path)}}},
                     {"outputs", ctx.outputs},
                     {"seed", ctx.seed},
                     {"threads", threads},
                     {"wall_clock_seconds", secs}};
    fs::create_directories(ctx.out_dir);
    std::ofstream ms(fs::path(ctx.out_dir) / (ctx.prefix + ".manifest.json"));
    ms << manifest.dump(2) << '\n';
    if (failure) std::rethrow_exception(failure);
  } catch (const DomainError& e) {
    error_json(err, e.kind(), e.what(), kUsage);
    return kUsage;
  } catch (const Error& e) {
    error_json(err, e.kind(), e.what(), kNumerical);
    return kNumerical;
  } catch (const std::exception& e) {
    error_json(err, "internal", e.what(), kNumerical);
    return kNumerical;
  }
  return kOk;
}

}  // namespace shearlab::cli
