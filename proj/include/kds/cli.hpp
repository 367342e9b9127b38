#pragma once
// Batch front-end: admissibility sweeps, flow studies, resonance tables,
// expansion fits and symbol evaluation. Each command reads a key=value config,
// writes its outputs into one run directory and records them in manifest.json.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kds/absorption.hpp"
#include "kds/dynamics.hpp"
#include "kds/io.hpp"
#include "kds/mellin.hpp"
#include "kds/resonances.hpp"
#include "kds/shooting.hpp"
#include "kds/spacetime.hpp"
#include "kds/symbols.hpp"

namespace kds {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  ExitOk = 0,
  ExitCheckFailed = 1,
  ExitConfig = 2,
  ExitStep = 3,
  ExitSolver = 4,
  ExitContour = 5
};

struct RunConfig {
  std::string command;
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::string config_text;
  std::uint64_t seed = 12345;
  int threads = 1;
  std::string format = "csv";

  // spacetime
  SpacetimeParams params = de_sitter();
  double delta = 0.1;       // domain margin as a fraction of r_+ - r_-
  double mu_tilde_1 = 0.5;  // exact-c threshold as a fraction of max mu~

  // admissible
  int grid = 2048;
  std::vector<std::string> flags;

  // flow and symbols
  double z = 1.0;
  int horizon_sign = 1;
  int trajectories = 8;
  double length = 50.0;
  double tol = 1e-10;
  int samples = 201;
  int retries = 2;
  int max_steps = 2000000;  // integrator step budget per attempt
  bool radial = true;
  std::string points;

  // resonances
  int ell_min = 0, ell_max = 0;
  int N = 60;
  Region region{-6.0, 6.0, -4.0, 0.5};
  double mu0 = -0.5;
  bool oracle = false;
  bool dump_operator = false;
  double spurious_threshold = 1e-4;

  // expand
  std::string source = "resonance";
  int ell = 0;
  double ell_target = 2.5;
  double alpha_top = -0.5;
  double xi_max = 24.0;
  int n_xi = 961;
  double source_width = 1.0;
  double source_lo = std::numeric_limits<double>::quiet_NaN();
  double source_hi = std::numeric_limits<double>::quiet_NaN();
  double synthetic_re = 0.3, synthetic_im = -0.5;
  int synthetic_order = 1;
  double fit_lo = 1e-6, fit_hi = 1e-2;
  bool log_correction = false;
  double bound = 1e-6;
  int series_stride = 8;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur.erase(0, cur.find_first_not_of(" \t"));
    cur.erase(cur.find_last_not_of(" \t") + 1);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline void check_range(bool ok, const std::string& what) {
  if (!ok) raise(ErrorCode::ConfigError, "config: " + what);
}

}  // namespace detail

// Parses the config text into a RunConfig. Unknown keys and out-of-range knobs raise ConfigError.
inline RunConfig parse_run_config(const std::string& text, RunConfig c = {}) {
  namespace po = boost::program_options;
  std::string model = "deSitter", flags = "horizons_exist,classical_nontrapping,semiclassical_regime,ergoregions_disjoint";
  double lambda = 3.0, r_s = 0.0, alpha = 0.0;
  int n = 4;
  std::uint64_t seed = c.seed;
  po::options_description d;
  d.add_options()
    ("model", po::value(&model))
    ("lambda", po::value(&lambda))
    ("r_s", po::value(&r_s))
    ("alpha", po::value(&alpha))
    ("n", po::value(&n))
    ("delta", po::value(&c.delta))
    ("mu_tilde_1", po::value(&c.mu_tilde_1))
    ("seed", po::value(&seed))
    ("grid", po::value(&c.grid))
    ("flags", po::value(&flags))
    ("z", po::value(&c.z))
    ("horizon_sign", po::value(&c.horizon_sign))
    ("trajectories", po::value(&c.trajectories))
    ("length", po::value(&c.length))
    ("tol", po::value(&c.tol))
    ("samples", po::value(&c.samples))
    ("retries", po::value(&c.retries))
    ("max_steps", po::value(&c.max_steps))
    ("radial", po::value(&c.radial))
    ("points", po::value(&c.points))
    ("ell_min", po::value(&c.ell_min))
    ("ell_max", po::value(&c.ell_max))
    ("N", po::value(&c.N))
    ("re_min", po::value(&c.region.re_min))
    ("re_max", po::value(&c.region.re_max))
    ("im_min", po::value(&c.region.im_min))
    ("im_max", po::value(&c.region.im_max))
    ("mu0", po::value(&c.mu0))
    ("oracle", po::value(&c.oracle))
    ("dump_operator", po::value(&c.dump_operator))
    ("spurious_threshold", po::value(&c.spurious_threshold))
    ("source", po::value(&c.source))
    ("ell", po::value(&c.ell))
    ("ell_target", po::value(&c.ell_target))
    ("alpha_top", po::value(&c.alpha_top))
    ("xi_max", po::value(&c.xi_max))
    ("n_xi", po::value(&c.n_xi))
    ("source_width", po::value(&c.source_width))
    ("source_lo", po::value(&c.source_lo))
    ("source_hi", po::value(&c.source_hi))
    ("synthetic_re", po::value(&c.synthetic_re))
    ("synthetic_im", po::value(&c.synthetic_im))
    ("synthetic_order", po::value(&c.synthetic_order))
    ("fit_lo", po::value(&c.fit_lo))
    ("fit_hi", po::value(&c.fit_hi))
    ("log_correction", po::value(&c.log_correction))
    ("bound", po::value(&c.bound))
    ("series_stride", po::value(&c.series_stride));
  const auto vm = parse_key_value(text, d);
  c.config_text = text;
  if (vm.count("seed")) c.seed = seed;
  c.flags = detail::split_list(flags);

  const Model m = model_from_string(model);
  c.params = SpacetimeParams{lambda, r_s, alpha, m, n};
  if (m == Model::MinkowskiBoundary) c.params = minkowski_boundary(n);
  try {
    validate(c.params);
  } catch (const Error& e) {
    raise(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }

  using detail::check_range;
  check_range(c.delta > 0.0 && c.delta < 0.5, "delta must lie in (0, 0.5)");
  check_range(c.mu_tilde_1 > 0.0 && c.mu_tilde_1 < 1.0, "mu_tilde_1 must lie in (0, 1)");
  check_range(c.grid >= 16 && c.grid <= (1 << 20), "grid must lie in [16, 2^20]");
  for (const auto& f : c.flags)
    check_range(f == "horizons_exist" || f == "classical_nontrapping" || f == "semiclassical_regime" ||
                    f == "ergoregions_disjoint" || f == "c_feasible",
                "unknown admissibility flag '" + f + "'");
  check_range(c.horizon_sign == 1 || c.horizon_sign == -1, "horizon_sign must be 1 or -1");
  check_range(c.trajectories >= 0 && c.trajectories <= 100000, "trajectories must lie in [0, 1e5]");
  check_range(c.length > 0.0 && c.length <= 1e4, "length must lie in (0, 1e4]");
  check_range(c.tol >= 1e-14 && c.tol <= 1e-3, "tol must lie in [1e-14, 1e-3]");
  check_range(c.samples >= 2 && c.samples <= 100000, "samples must lie in [2, 1e5]");
  check_range(c.retries >= 0 && c.retries <= 8, "retries must lie in [0, 8]");
  check_range(c.max_steps >= 1, "max_steps must be >= 1");
  check_range(c.ell_min >= 0 && c.ell_max >= c.ell_min && c.ell_max <= 64, "need 0 <= ell_min <= ell_max <= 64");
  check_range(c.N >= 8 && c.N <= 400, "N must lie in [8, 400]");
  check_range(c.region.re_min < c.region.re_max && c.region.im_min < c.region.im_max, "empty sigma region");
  check_range(c.mu0 < 0.0 && c.mu0 > -1.0, "mu0 must lie in (-1, 0)");
  check_range(c.spurious_threshold > 0.0, "spurious_threshold must be positive");
  check_range(c.source == "resonance" || c.source == "synthetic", "source must be resonance or synthetic");
  check_range(c.ell >= 0 && c.ell <= 64, "ell must lie in [0, 64]");
  check_range(c.ell_target > -c.alpha_top, "ell_target must exceed -alpha_top");
  check_range(c.xi_max > 0.0 && c.n_xi >= 8, "need xi_max > 0 and n_xi >= 8");
  check_range(c.source_width > 0.0, "source_width must be positive");
  check_range(c.synthetic_order == 1 || c.synthetic_order == 2, "synthetic_order must be 1 or 2");
  check_range(c.fit_lo > 0.0 && c.fit_hi > c.fit_lo && c.fit_hi <= 1.0, "need 0 < fit_lo < fit_hi <= 1");
  check_range(c.bound > 0.0, "bound must be positive");
  check_range(c.series_stride >= 1, "series_stride must be >= 1");
  return c;
}

inline json config_json(const RunConfig& c) {
  return json{{"params", params_json(c.params)},
              {"delta", c.delta},
              {"mu_tilde_1", c.mu_tilde_1},
              {"seed", c.seed},
              {"grid", c.grid},
              {"flags", c.flags},
              {"z", c.z},
              {"horizon_sign", c.horizon_sign},
              {"trajectories", c.trajectories},
              {"length", c.length},
              {"tol", c.tol},
              {"samples", c.samples},
              {"retries", c.retries},
              {"max_steps", c.max_steps},
              {"radial", c.radial},
              {"points", c.points},
              {"ell_min", c.ell_min},
              {"ell_max", c.ell_max},
              {"N", c.N},
              {"region", {c.region.re_min, c.region.re_max, c.region.im_min, c.region.im_max}},
              {"mu0", c.mu0},
              {"oracle", c.oracle},
              {"dump_operator", c.dump_operator},
              {"spurious_threshold", c.spurious_threshold},
              {"source", c.source},
              {"ell", c.ell},
              {"ell_target", c.ell_target},
              {"alpha_top", c.alpha_top},
              {"xi_max", c.xi_max},
              {"n_xi", c.n_xi},
              {"source_width", c.source_width},
              {"source_lo", to_json_value(c.source_lo)},
              {"source_hi", to_json_value(c.source_hi)},
              {"synthetic", {c.synthetic_re, c.synthetic_im, c.synthetic_order}},
              {"fit", {c.fit_lo, c.fit_hi, c.log_correction}},
              {"bound", c.bound},
              {"series_stride", c.series_stride}};
}

// Collects output files and writes the manifest last.
class RunDirectory {
 public:
  explicit RunDirectory(const RunConfig& c) : c_(c) { std::filesystem::create_directories(c.out_dir); }

  void write(const std::string& name, const std::string& data) {
    write_file(c_.out_dir / name, data);
    files_.push_back({{"file", name}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}});
  }

  void finish(int exit_code) {
    json m;
    m["command"] = c_.command;
    m["config_sha256"] = sha256_hex(c_.config_text);
    m["config"] = config_json(c_);
    m["seed"] = c_.seed;
    m["format"] = c_.format;
    m["exit_code"] = exit_code;
    m["versions"] = {{"kds", kVersion},         {"spacetime", kVersion}, {"symbols", kVersion},
                     {"dynamics", kVersion},    {"absorption", kVersion}, {"resonances", kVersion},
                     {"mellin", kVersion},      {"cli", kVersion}};
    m["outputs"] = files_;
    write_file(c_.out_dir / "manifest.json", m.dump(2) + "\n");
  }

 private:
  const RunConfig& c_;
  json files_ = json::array();
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results go into
// caller-owned slots, so the output order never depends on scheduling. The
// exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
  const int w = std::max(1, std::min(threads, n));
  std::vector<std::exception_ptr> err(static_cast<std::size_t>(n));
  auto worker = [&](int id) {
    for (int i = id; i < n; i += w) {
      try {
        fn(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (w == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int id = 0; id < w; ++id) pool.emplace_back(worker, id);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------- admissible

inline int cmd_admissible(const RunConfig& c) {
  RunDirectory run(c);
  const auto rep = admissibility(c.params, c.delta, c.grid);
  json out;
  out["params"] = params_json(c.params);
  out["report"] = admissibility_json(rep);
  bool c_feasible = false;
  std::string c_error;
  if (rep.horizons_exist) {
    out["horizons"] = horizon_json(horizon_roots(c.params));
    if (c.params.model == Model::KerrDeSitter || c.params.model == Model::DSSchwarzschild) {
      try {
        choose_c(c.params, c.mu_tilde_1, c.delta);
        c_feasible = true;
      } catch (const Error& e) {
        c_error = e.what();
      }
    } else {
      c_feasible = true;
    }
  }
  out["c_feasible"] = c_feasible;
  if (!c_error.empty()) out["c_error"] = c_error;
  auto flag = [&](const std::string& f) {
    if (f == "horizons_exist") return rep.horizons_exist;
    if (f == "classical_nontrapping") return rep.classical_nontrapping;
    if (f == "semiclassical_regime") return rep.semiclassical_regime;
    if (f == "ergoregions_disjoint") return rep.ergoregions_disjoint;
    return c_feasible;
  };
  bool ok = true;
  for (const auto& f : c.flags) ok = ok && flag(f);
  out["requested_flags"] = c.flags;
  out["passed"] = ok;
  run.write("admissible.json", out.dump(2) + "\n");
  const int code = ok ? ExitOk : ExitCheckFailed;
  run.finish(code);
  return code;
}

// ---------------------------------------------------------------- flow

namespace detail {

inline Bicharacteristic integrate_with_retries(const FlowSystem& sys, const FlowState& start, const RunConfig& c) {
  FlowOptions o;
  o.n_output = c.samples;
  o.max_steps = static_cast<std::size_t>(c.max_steps);
  for (int attempt = 0;; ++attempt) {
    try {
      return integrate_flow(sys, start, c.length, c.tol, o);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::StepFailure || attempt >= c.retries) throw;
      o.max_steps *= 4;
    }
  }
}

}  // namespace detail

inline int cmd_flow(const RunConfig& c) {
  RunDirectory run(c);
  const auto sys = make_flow_system(c.params, c.z, c.horizon_sign, c.delta);
  // starting points are drawn up front so that the thread count cannot change them
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> R(sys.base_lo, sys.base_hi), Th(0.4, pi - 0.4), X(-3.0, 3.0);
  std::vector<PhasePoint> starts;
  for (int k = 0; k < c.trajectories; ++k) {
    const double r = R(rng), th = Th(rng), xi = X(rng), eta = X(rng), zeta = X(rng);
    starts.push_back({r, th, 0.0, xi, eta, zeta});
  }
  std::vector<Bicharacteristic> runs(starts.size());
  parallel_for(static_cast<int>(starts.size()), c.threads,
               [&](int k) { runs[k] = detail::integrate_with_retries(sys, FlowState::from(starts[k]), c); });

  json report;
  report["params"] = params_json(c.params);
  report["z"] = c.z;
  report["horizon_sign"] = c.horizon_sign;
  try {
    report["horizons"] = horizon_json(horizon_roots(c.params));
  } catch (const Error&) {
  }
  json traj = json::array();
  CsvTable csv{{"trajectory", "t", "chart", "r", "theta", "phi", "y3", "y4", "y5", "p", "zeta", "ptilde"}, {}};
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& b = runs[k];
    const char* status = b.status == FlowStatus::Completed ? "completed"
                         : b.status == FlowStatus::DomainExit ? "domain_exit" : "polar_singularity";
    traj.push_back({{"trajectory", k},
                    {"status", status},
                    {"steps", b.stats.steps},
                    {"rejected", b.stats.rejected},
                    {"chart_switches", b.stats.chart_switches},
                    {"drift_p", to_json_value(b.max_drift_p())},
                    {"drift_zeta", to_json_value(b.max_drift_zeta())},
                    {"drift_ptilde", to_json_value(b.max_drift_ptilde())}});
    for (const auto& s : b.samples) {
      const auto& y = s.state.y;
      csv.add({fmt(k), fmt(s.t), s.state.chart == Chart::Compact ? "compact" : "affine", fmt(y[0]), fmt(y[1]),
               fmt(y[2]), fmt(y[3]), fmt(y[4]), fmt(y[5]), fmt(s.p), fmt(s.zeta), fmt(s.ptilde)});
    }
  }
  report["trajectories"] = traj;

  if (c.radial) {
    json radial = json::array();
    const bool ds = symbol_for(c.params) == SymbolId::DeSitter;
    const bool inner = !ds && horizon_roots(c.params).has_inner;
    for (int hs : {1, -1}) {
      if (hs < 0 && !inner && !ds) continue;
      RadialOptions o;
      o.seed = c.seed + static_cast<std::uint64_t>(hs > 0 ? 0 : 1);
      o.tol = std::max(c.tol, 1e-10);
      radial.push_back(radial_json(classify_radial(c.params, hs, o)));
    }
    report["radial"] = radial;
  }

  if (c.format == "json") {
    json dump = json::array();
    for (std::size_t k = 0; k < runs.size(); ++k)
      for (const auto& s : runs[k].samples)
        dump.push_back({{"trajectory", k},
                        {"t", s.t},
                        {"chart", s.state.chart == Chart::Compact ? "compact" : "affine"},
                        {"y", s.state.y},
                        {"p", to_json_value(s.p)},
                        {"zeta", to_json_value(s.zeta)},
                        {"ptilde", to_json_value(s.ptilde)}});
    run.write("trajectories.json", dump.dump() + "\n");
  } else {
    run.write("trajectories.csv", csv.str());
  }
  run.write("flow.json", report.dump(2) + "\n");
  run.finish(ExitOk);
  return ExitOk;
}

// ---------------------------------------------------------------- resonances

inline AbsorbingSpec run_spec(const RunConfig& c) {
  return radial_mu_model(c.params) ? default_absorbing_spec(c.mu0) : absorbing_spec_for(c.params, c.delta);
}

inline int cmd_resonances(const RunConfig& c) {
  RunDirectory run(c);
  const int nl = c.ell_max - c.ell_min + 1;
  const AbsorbingSpec spec = run_spec(c);
  std::vector<ResonanceList> lists(static_cast<std::size_t>(nl));
  std::vector<std::vector<double>> oracle(static_cast<std::size_t>(nl));
  std::vector<std::string> dumps(static_cast<std::size_t>(nl));
  ResonanceOptions ro;
  ro.spurious_threshold = c.spurious_threshold;
  parallel_for(nl, c.threads, [&](int i) {
    const int ell = c.ell_min + i;
    const auto op = build_operator(c.params, ell, c.N, spec);
    lists[i] = solve_resonances(op, c.region, ro);
    if (c.dump_operator) dumps[i] = encode_matrices(operator_container(op));
    if (c.oracle)
      for (const auto& e : lists[i].entries) {
        double d = std::numeric_limits<double>::quiet_NaN();
        try {
          d = std::abs(shooting_zero(c.params, ell, e.sigma + 1e-7) - e.sigma);
        } catch (const Error&) {
        }
        oracle[i].push_back(d);
      }
  });

  std::vector<std::string> head = {"model", "ell", "N", "re_sigma", "im_sigma", "multiplicity", "convergence_delta"};
  if (c.oracle) head.push_back("oracle_delta");
  CsvTable table{head, {}};
  CsvTable appendix{{"ell", "N", "N_check", "re_sigma", "im_sigma", "convergence_delta", "spurious_warning",
                     "collar_fraction"},
                    {}};
  json js = json::array();
  std::size_t total = 0;
  for (int i = 0; i < nl; ++i) {
    const int ell = c.ell_min + i;
    const auto& L = lists[i];
    for (std::size_t k = 0; k < L.entries.size(); ++k) {
      const auto& e = L.entries[k];
      std::vector<std::string> row = {to_string(c.params.model), fmt(ell), fmt(L.N), fmt(e.sigma.real()),
                                      fmt(e.sigma.imag()), fmt(e.multiplicity), fmt(e.convergence_delta)};
      if (c.oracle) row.push_back(fmt(oracle[i][k]));
      table.add(row);
      appendix.add({fmt(ell), fmt(L.N), fmt(L.N_check), fmt(e.sigma.real()), fmt(e.sigma.imag()),
                    fmt(e.convergence_delta), e.spurious_warning ? "1" : "0", fmt(e.collar_fraction)});
      json r = resonance_json(e);
      r["model"] = to_string(c.params.model);
      r["ell"] = ell;
      r["N"] = L.N;
      if (c.oracle) r["oracle_delta"] = to_json_value(oracle[i][k]);
      js.push_back(r);
      ++total;
    }
    if (c.dump_operator) run.write("operator_ell" + std::to_string(ell) + ".kdsmat", dumps[i]);
  }
  if (c.format == "json")
    run.write("resonances.json", js.dump(2) + "\n");
  else
    run.write("resonances.csv", table.str());
  run.write("convergence.csv", appendix.str());
  std::cout << total << " resonances in region\n";
  run.finish(ExitOk);
  return ExitOk;
}

// ---------------------------------------------------------------- expand

inline int cmd_expand(const RunConfig& c) {
  RunDirectory run(c);
  ExpansionSpec e;
  e.alpha_top = c.alpha_top;
  e.xi_max = c.xi_max;
  e.n_xi = c.n_xi;
  e.source_width = c.source_width;
  Expansion ex;
  json report;
  report["source"] = c.source;
  if (c.source == "synthetic") {
    const cplx s1(c.synthetic_re, c.synthetic_im);
    const double w = c.source_width;
    const int order = c.synthetic_order;
    CVec f(2);
    f << cplx(1.0, 0.2), cplx(-0.7, 0.4);
    auto v = [=](cplx s) -> CVec {
      CMat A(2, 2);
      A << s - s1, (order == 2 ? 1.0 : 0.0), 0.0, s - s1;
      return A.partialPivLu().solve(f) * std::exp(-s * s / (2.0 * w * w));
    };
    ex = expand_meromorphic(v, {s1}, c.ell_target, e);
    report["synthetic_pole"] = complex_json(s1);
    report["synthetic_order"] = order;
  } else {
    const auto op = build_operator(c.params, c.ell, c.N, run_spec(c));
    const double lo = op.physical_lo(), hi = op.physical_hi(), wdt = hi - lo;
    const double a = std::isnan(c.source_lo) ? lo + 0.3 * wdt : c.source_lo;
    const double b = std::isnan(c.source_hi) ? lo + 0.9 * wdt : c.source_hi;
    if (!(a < b && a >= lo && b <= hi)) raise(ErrorCode::ConfigError, "config: source support outside the physical region");
    const CVec f = sample_source(op, [=](double x) {
      return x > a && x < b ? std::pow(std::sin(pi * (x - a) / (b - a)), 4) : 0.0;
    });
    ex = resonance_expand(f, op, c.ell_target, e);
    report["params"] = params_json(c.params);
    report["ell"] = c.ell;
    report["N"] = c.N;
    report["source_support"] = {a, b};
    report["spec_hash"] = spec_hash(op.spec);
  }
  const auto fit = fit_decay(ex.remainder, c.fit_lo, c.fit_hi, c.log_correction);
  report["ell_target"] = c.ell_target;
  report["expansion"] = expansion_json(ex);
  report["remainder_fit"] = decay_json(fit);
  report["bound"] = c.bound;
  const bool ok = ex.reconstruction < c.bound;
  report["passed"] = ok;

  CsvTable series{{"tau", "index", "re_direct", "im_direct", "re_remainder", "im_remainder"}, {}};
  for (std::size_t k = 0; k < ex.direct.tau.size(); k += static_cast<std::size_t>(c.series_stride))
    for (Eigen::Index j = 0; j < ex.direct.values.cols(); ++j) {
      const auto kk = static_cast<Eigen::Index>(k);
      const cplx d = ex.direct.values(kk, j), r = ex.remainder.values(kk, j);
      series.add({fmt(ex.direct.tau[k]), fmt(static_cast<std::size_t>(j)), fmt(d.real()), fmt(d.imag()), fmt(r.real()),
                  fmt(r.imag())});
    }
  run.write("expansion.json", report.dump(2) + "\n");
  run.write("series.csv", series.str());
  std::cout << "reconstruction residual " << fmt(ex.reconstruction) << " (bound " << fmt(c.bound) << ")\n";
  std::cout << "remainder rate " << fmt(fit.rate) << "\n";
  const int code = ok ? ExitOk : ExitCheckFailed;
  run.finish(code);
  return code;
}

// ---------------------------------------------------------------- symbols

// Batch evaluation: one phase point per row (r, theta, phi, xi, eta, zeta[, z])
// to the symbol value and Hamilton vector field components.
inline int cmd_symbols(const RunConfig& c) {
  RunDirectory run(c);
  if (c.points.empty()) raise(ErrorCode::ConfigError, "config: symbols needs points = <csv path>");
  std::filesystem::path in = c.points;
  if (in.is_relative() && c.config_path.has_parent_path()) in = c.config_path.parent_path() / in;
  const auto table = read_csv(read_file(in));
  const std::vector<std::string> need = {"r", "theta", "phi", "xi", "eta", "zeta"};
  std::vector<std::size_t> col;
  for (const auto& n : need) {
    const auto it = std::find(table.header.begin(), table.header.end(), n);
    if (it == table.header.end()) raise(ErrorCode::ConfigError, "points: missing column " + n);
    col.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  const auto zit = std::find(table.header.begin(), table.header.end(), "z");
  const auto sys = make_flow_system(c.params, c.z, c.horizon_sign, c.delta);
  CsvTable out{{"row", "r", "theta", "phi", "xi", "eta", "zeta", "z", "p", "H_r", "H_theta", "H_phi", "H_xi", "H_eta",
                "H_zeta"},
               {}};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::array<double, 6> v{};
    try {
      for (int k = 0; k < 6; ++k) v[k] = std::stod(table.rows[i][col[k]]);
    } catch (const std::exception&) {
      raise(ErrorCode::ConfigError, "points: bad number in row " + std::to_string(i + 1));
    }
    const double z = zit == table.header.end() ? c.z : std::stod(table.rows[i][zit - table.header.begin()]);
    const PhasePoint pt{v[0], v[1], v[2], v[3], v[4], v[5]};
    const auto g = sys.grad(pt, z);
    const auto H = hamilton_from_grad(g);
    out.add({fmt(i), fmt(v[0]), fmt(v[1]), fmt(v[2]), fmt(v[3]), fmt(v[4]), fmt(v[5]), fmt(z), fmt(g.value),
             fmt(H[0]), fmt(H[1]), fmt(H[2]), fmt(H[3]), fmt(H[4]), fmt(H[5])});
  }
  run.write("symbols.csv", out.str());
  run.finish(ExitOk);
  return ExitOk;
}

// ---------------------------------------------------------------- entry point

inline int exit_code_for(ErrorCode e) {
  switch (e) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnsupportedModel: return ExitConfig;
    case ErrorCode::StepFailure:
    case ErrorCode::StiffFailure: return ExitStep;
    case ErrorCode::SolverFailure:
    case ErrorCode::NearPole:
    case ErrorCode::DegenerateLinearization: return ExitSolver;
    case ErrorCode::PoleOnContour:
    case ErrorCode::ContourDivergence: return ExitContour;
    default: return ExitCheckFailed;
  }
}

inline int run_command(RunConfig c) {
  if (c.command == "admissible") return cmd_admissible(c);
  if (c.command == "flow") return cmd_flow(c);
  if (c.command == "resonances") return cmd_resonances(c);
  if (c.command == "expand") return cmd_expand(c);
  if (c.command == "symbols") return cmd_symbols(c);
  raise(ErrorCode::ConfigError, "unknown command " + c.command);
}

inline int cli_main(int argc, char** argv) {
  CLI::App app{"kds: wave asymptotics on Kerr-de Sitter type spaces"};
  app.require_subcommand(1);
  std::string config, out, format = "csv";
  std::uint64_t seed = 0;
  int threads = 1;
  for (const char* name : {"admissible", "flow", "resonances", "expand", "symbols"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "key=value parameter file")->required();
    sub->add_option("--out", out, "run directory (default runs/<command>-<config hash>)");
    sub->add_option("--seed", seed, "seed overriding the config value");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ExitOk : ExitConfig;
  }
  RunConfig c;
  c.command = app.get_subcommands().front()->get_name();
  c.config_path = config;
  c.threads = threads;
  c.format = format;
  try {
    const bool seed_flag = app.get_subcommands().front()->count("--seed") > 0;
    c = parse_run_config(read_file(config), c);
    if (seed_flag) c.seed = seed;
    c.out_dir = out.empty() ? std::filesystem::path("runs") / (c.command + "-" + sha256_hex(c.config_text).substr(0, 12))
                            : std::filesystem::path(out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitConfig;
  }
  try {
    return run_command(c);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    const int code = exit_code_for(e.code());
    try {
      json fail{{"command", c.command}, {"error", to_string(e.code())}, {"message", e.what()}, {"exit_code", code}};
      write_file(c.out_dir / "error.json", fail.dump(2) + "\n");
    } catch (...) {
    }
    return code;
  }
}

}  // namespace kds
