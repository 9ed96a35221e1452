// dnarx: command-line front end for fitting and decoupling polynomial NARX
// models.
//
// Exit codes: 0 ok, 2 parse / I/O / configuration, 3 numeric failure,
// 4 unstable free-run simulation.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dnarx/cpd.hpp"
#include "dnarx/decoupler.hpp"
#include "dnarx/errors.hpp"
#include "dnarx/excitation.hpp"
#include "dnarx/io.hpp"
#include "dnarx/linalg.hpp"
#include "dnarx/metrics.hpp"
#include "dnarx/narx.hpp"
#include "dnarx/systems.hpp"
#include "dnarx/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dnarx;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUnstable = 4;

struct Global {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  double mem_budget_gb = 4.0;
  std::string out_dir = ".";
};

struct Lags {
  int n_u = 2;
  int n_y = 2;
  int n_k = 1;
  int degree = 3;

  narx::NarxConfig config() const { return {n_u, n_y, n_k, degree}; }
};

void add_lags(CLI::App* app, Lags& l) {
  app->add_option("--n-u", l.n_u, "number of past inputs")->capture_default_str();
  app->add_option("--n-y", l.n_y, "number of past outputs")->capture_default_str();
  app->add_option("--n-k", l.n_k, "input delay")->capture_default_str();
  app->add_option("--degree", l.degree, "coupled polynomial degree")->capture_default_str();
}

json lags_json(const Lags& l) { return io::config_to_json(l.config()); }

std::uint64_t need_seed(const Global& g, const char* what) {
  if (!g.seed) throw ParseError(std::string(what) + " is stochastic: --seed is required");
  return *g.seed;
}

fs::path out_path(const Global& g, const std::string& name) {
  const fs::path dir(g.out_dir);
  if (!fs::is_directory(dir)) throw ParseError("output directory '" + g.out_dir + "' does not exist");
  return dir / name;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json fits_json(const decouple::FitPair& f) {
  return json{{"prediction_fit", optional_json(f.prediction)},
              {"simulation_fit", optional_json(f.simulation)},
              {"simulation_unstable", f.simulation_unstable}};
}

// Hash of the run configuration: command, options and input file hashes.
std::string run_hash(const json& run_config) { return io::config_hash(run_config); }

json provenance(const json& run_config, const std::string& hash) {
  return json{{"tool_version", kVersion}, {"run_config", run_config}, {"run_config_hash", hash}};
}

void write_json(const fs::path& p, const json& j) { io::write_text(p.string(), io::dump(j)); }

narx::Dataset load_dataset(const std::string& path, const std::string& segments, std::size_t zero_run) {
  return io::read_dataset_csv(path, segments, zero_run);
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::string kind;
  std::string name;
  std::size_t period = 8192;
  int periods = 1;
  bool odd = false;
  std::optional<double> rms;
  std::optional<double> fs;
  int lines_lo = 0;
  int lines_hi = 0;
  double band_lo_hz = 5.0;
  double band_hi_hz = 150.0;
  double f_start = 1.0;
  double f_end = 150.0;
  double duration = 10.0;
  double amplitude = 1.0;
  int oversample = 20;
  std::string input = "multisine";
};

std::vector<int> lines_for(const GenOptions& o, double fs) {
  int lo = o.lines_lo;
  int hi = o.lines_hi;
  if (lo <= 0) lo = std::max(1, static_cast<int>(std::ceil(o.band_lo_hz * o.period / fs)));
  if (hi <= 0) hi = static_cast<int>(std::floor(o.band_hi_hz * o.period / fs));
  hi = std::min<int>(hi, static_cast<int>(o.period / 2) - 1);
  if (hi < lo) throw ParseError("empty harmonic band");
  return bench::harmonic_band(lo, hi);
}

int cmd_gen(const Global& g, const GenOptions& o) {
  json cfg{{"command", "gen"},
           {"kind", o.kind},
           {"period", o.period},
           {"periods", o.periods},
           {"odd", o.odd},
           {"rms", optional_json(o.rms)},
           {"fs", optional_json(o.fs)},
           {"lines_lo", o.lines_lo},
           {"lines_hi", o.lines_hi},
           {"band_hz", {o.band_lo_hz, o.band_hi_hz}},
           {"sweep", {{"f_start", o.f_start}, {"f_end", o.f_end}, {"duration", o.duration},
                      {"amplitude", o.amplitude}}},
           {"oversample", o.oversample},
           {"input", o.input},
           {"seed", g.seed ? json(*g.seed) : json(nullptr)}};
  const std::string name = o.name.empty() ? o.kind : o.name;
  const fs::path csv = out_path(g, name + ".csv");
  narx::Dataset d;
  json params;

  if (o.kind == "multisine") {
    const double fs = o.fs.value_or(1.0);
    const auto lines = o.lines_lo > 0 || o.lines_hi > 0 || o.fs
                           ? lines_for(o, fs)
                           : bench::harmonic_band(1, static_cast<int>(o.period / 4));
    const auto one = bench::gen_multisine(o.period, lines, o.rms.value_or(1.0), o.odd,
                                          need_seed(g, "multisine generation"));
    d.u = bench::repeat_periods(one, o.periods);
    d.y = Eigen::VectorXd::Zero(d.u.size());
    d.sample_rate_hz = fs;
    params = {{"lines", {lines.front(), lines.back()}}};
  } else if (o.kind == "sweptsine") {
    const double fs = o.fs.value_or(750.0);
    d.u = bench::gen_swept_sine(o.f_start, o.f_end, o.duration, fs, o.amplitude);
    d.y = Eigen::VectorXd::Zero(d.u.size());
    d.sample_rate_hz = fs;
  } else if (o.kind == "boucwen") {
    const double fs = o.fs.value_or(750.0);
    const bench::BoucWenParams bw;
    const double dt = 1.0 / (fs * o.oversample);
    Eigen::VectorXd fine;
    int keep_from = 0;
    if (o.input == "multisine") {
      const auto lines = lines_for(o, fs);
      const auto one = bench::gen_multisine(o.period, lines, o.rms.value_or(55.0), o.odd,
                                            need_seed(g, "Bouc-Wen multisine"), o.oversample);
      const int transient = std::max(1, o.periods);
      fine = bench::repeat_periods(one, transient + 1);
      keep_from = transient;
      params["lines"] = {lines.front(), lines.back()};
    } else if (o.input == "sweptsine") {
      fine = bench::gen_swept_sine(o.f_start, o.f_end, o.duration, fs * o.oversample, o.amplitude);
    } else {
      throw ParseError("--input must be multisine or sweptsine");
    }
    const Eigen::VectorXd yf = bench::simulate_boucwen(bw, fine, dt);
    const Eigen::Index start = static_cast<Eigen::Index>(keep_from) *
                               static_cast<Eigen::Index>(o.period) * o.oversample;
    const Eigen::Index n = (fine.size() - start) / o.oversample;
    d.u.resize(n);
    d.y.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      d.u[k] = fine[start + k * o.oversample];
      d.y[k] = yf[start + k * o.oversample];
    }
    d.sample_rate_hz = fs;
    params["boucwen"] = {{"m_L", bw.m_L}, {"c_L", bw.c_L}, {"k_L", bw.k_L}, {"alpha", bw.alpha},
                         {"beta", bw.beta}, {"gamma", bw.gamma}, {"delta", bw.delta}, {"nu", bw.nu}};
    params["integrator"] = {{"method", "newmark"}, {"beta", 0.25}, {"gamma", 0.5},
                            {"oversample", o.oversample}, {"kept_from_period", keep_from}};
  } else if (o.kind == "duffing") {
    const double fs = o.fs.value_or(610.35);
    const bench::DuffingParams dp;
    const auto lines = lines_for(o, fs);
    const auto one = bench::gen_multisine(o.period, lines, o.rms.value_or(1000.0), o.odd,
                                          need_seed(g, "Duffing multisine"));
    const int transient = std::max(1, o.periods);
    const Eigen::VectorXd u = bench::repeat_periods(one, transient + 1);
    bench::Rk4Options rk;
    rk.substeps = o.oversample;
    const Eigen::VectorXd y = bench::simulate_duffing(dp, u, 1.0 / fs, rk);
    const auto np = static_cast<Eigen::Index>(o.period);
    d.u = u.tail(np);
    d.y = y.tail(np);
    d.sample_rate_hz = fs;
    params["duffing"] = {{"m", dp.m}, {"d", dp.d}, {"a", dp.a}, {"b", dp.b}, {"synthetic", true}};
    params["lines"] = {lines.front(), lines.back()};
  } else {
    throw ParseError("unknown generator '" + o.kind + "' (boucwen | duffing | multisine | sweptsine)");
  }

  const std::string hash = run_hash(cfg);
  io::write_dataset_csv(csv.string(), d, hash);
  json prov = provenance(cfg, hash);
  prov["generator"] = params;
  prov["samples"] = d.size();
  prov["sample_rate_hz"] = d.sample_rate_hz;
  write_json(out_path(g, name + ".provenance.json"), prov);
  std::cout << "wrote " << csv.string() << " (" << d.size() << " samples)\n";
  return 0;
}

// ---------------------------------------------------------------- fit

struct DataOptions {
  std::string data;
  std::string segments;
  std::size_t zero_run = 100;
};

void add_data(CLI::App* app, DataOptions& d, bool required = true) {
  auto* opt = app->add_option("--data", d.data, "dataset CSV (t,u,y)");
  if (required) opt->required();
  app->add_option("--segments", d.segments, "segment sidecar JSON");
  app->add_option("--zero-run", d.zero_run, "zero-run length separating segments (0: off)")
      ->capture_default_str();
}

json data_json(const DataOptions& d) {
  json j{{"data", fs::path(d.data).filename().string()},
         {"data_hash", io::file_hash(d.data)},
         {"zero_run", d.zero_run}};
  if (!d.segments.empty()) j["segments_hash"] = io::file_hash(d.segments);
  return j;
}

struct FitOptions {
  DataOptions data;
  Lags lags;
  std::string selection = "frols";
  double err_threshold = 1e-4;
  std::size_t max_terms = 0;
  bool no_standardize = false;
};

narx::SelectionPolicy selection_of(const std::string& s, double thr, std::size_t max_terms) {
  if (s == "none") return std::monostate{};
  if (s == "frols") return narx::Frols{thr, max_terms};
  throw ParseError("--selection must be none or frols");
}

int cmd_fit(const Global& g, const FitOptions& o) {
  json cfg{{"command", "fit"},
           {"input", data_json(o.data)},
           {"narx", lags_json(o.lags)},
           {"selection", o.selection},
           {"err_threshold", o.err_threshold},
           {"max_terms", o.max_terms},
           {"standardize", !o.no_standardize}};
  const std::string hash = run_hash(cfg);
  const auto d = load_dataset(o.data.data, o.data.segments, o.data.zero_run);
  const auto ncfg = o.lags.config();
  const auto fit = decouple::fit_coupled(d, ncfg, selection_of(o.selection, o.err_threshold, o.max_terms),
                                         !o.no_standardize);
  io::write_text(out_path(g, "coupled.json").string(), io::poly_to_json(fit.model, hash));
  const auto fits = decouple::evaluate_fits(narx::as_nonlinearity(fit.model), d, ncfg);
  json rep{{"run_config_hash", hash},
           {"provenance", provenance(cfg, hash)},
           {"candidate_count", fit.candidate_count},
           {"retained_terms", fit.model.size()},
           {"selection_order", fit.selection_order},
           {"err", fit.err},
           {"condition", fit.condition},
           {"fits", fits_json(fits)}};
  write_json(out_path(g, "fit_report.json"), rep);
  std::printf("coupled model: %zu of %zu candidate terms\n", fit.model.size(), fit.candidate_count);
  if (fits.prediction) std::printf("prediction FIT %.4f %%\n", *fits.prediction);
  if (fits.simulation) std::printf("simulation FIT %.4f %%\n", *fits.simulation);
  return 0;
}

// ---------------------------------------------------------------- decouple

struct DecoupleOptions {
  DataOptions data;
  Lags lags;
  std::string coupled;
  int r = 2;
  int M = 3;
  std::string init = "cpd_structured";
  std::size_t hessian_points = 4096;
  int als_restarts = 5;
  int als_max_iter = 1000;
  int sls_max_iter = 500;
  bool no_standardize = false;
  bool save_tensor = false;
};

decouple::Algorithm1Options algo_options(const Global& g, const DecoupleOptions& o, std::uint64_t seed) {
  decouple::Algorithm1Options a;
  a.r = o.r;
  a.M = o.M;
  a.init_mode = decouple::init_mode_from_string(o.init);
  a.init.hessian_points = o.hessian_points;
  a.init.seed = seed;
  a.init.als.restarts = o.als_restarts;
  a.init.als.max_iter = o.als_max_iter;
  a.init.als.seed = seed;
  a.init.als.threads = g.threads;
  a.init.structured.mem_budget_bytes = g.mem_budget_gb * 1024.0 * 1024.0 * 1024.0;
  a.sls.max_iter = o.sls_max_iter;
  a.sls.seed = seed;
  a.standardize = !o.no_standardize;
  return a;
}

json decouple_config(const DecoupleOptions& o, std::uint64_t seed, double budget_gb) {
  return json{{"command", "decouple"},
              {"input", data_json(o.data)},
              {"coupled_hash", io::file_hash(o.coupled)},
              {"narx", lags_json(o.lags)},
              {"r", o.r},
              {"M", o.M},
              {"init", o.init},
              {"hessian_points", o.hessian_points},
              {"als_restarts", o.als_restarts},
              {"als_max_iter", o.als_max_iter},
              {"sls_max_iter", o.sls_max_iter},
              {"standardize", !o.no_standardize},
              {"mem_budget_gb", budget_gb},
              {"seed", seed}};
}

void write_plot_data(const Global& g, const decouple::DecoupledModel& model, const narx::Dataset& d,
                     const std::vector<double>& cost, const std::string& hash) {
  const auto tab = narx::build_regressors(d, model.cfg);
  std::string s = "# run_config_hash=" + hash + "\niteration,cost\n";
  char buf[128];
  for (std::size_t i = 0; i < cost.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, cost[i]);
    s += buf;
  }
  io::write_text(out_path(g, "cost.csv").string(), s);

  s = "# run_config_hash=" + hash + "\nbranch,x_normalized,g_nonlinear\n";
  for (Eigen::Index b = 0; b < model.rank(); ++b) {
    const auto c = decouple::branch_curve(model, tab.Z, b);
    for (Eigen::Index i = 0; i < c.x_normalized.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", static_cast<long long>(b),
                    c.x_normalized[i], c.g_nonlinear[i]);
      s += buf;
    }
  }
  io::write_text(out_path(g, "branches.csv").string(), s);

  s = "# run_config_hash=" + hash + "\nbranch,omega_rad_per_sample,freq_hz,mag_y,mag_u\n";
  for (Eigen::Index b = 0; b < model.rank(); ++b) {
    const auto f = decouple::fir_response(model, b, d.sample_rate_hz);
    for (Eigen::Index i = 0; i < f.omega.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(b),
                    f.omega[i], f.hz[i], f.mag_y[i], f.mag_u[i]);
      s += buf;
    }
  }
  io::write_text(out_path(g, "fir_response.csv").string(), s);
}

int cmd_decouple(const Global& g, const DecoupleOptions& o) {
  const std::uint64_t seed = need_seed(g, "decoupling (random inits, ALS restarts)");
  const json cfg = decouple_config(o, seed, g.mem_budget_gb);
  const std::string hash = run_hash(cfg);
  const auto d = load_dataset(o.data.data, o.data.segments, o.data.zero_run);
  const auto ncfg = o.lags.config();
  json pj;
  try {
    pj = json::parse(io::read_text(o.coupled));
  } catch (const json::exception& e) {
    throw ParseError("coupled model JSON: " + std::string(e.what()));
  }
  const auto coupled = io::poly_from_json(pj);
  const auto opts = algo_options(g, o, seed);

  const auto dec = decouple::decouple_coupled(coupled, d, ncfg, opts);
  json prov = provenance(cfg, hash);
  prov["init_mode"] = o.init;
  prov["seeds"] = {{"base", seed}, {"als", seed}, {"jitter", seed}};
  write_json(out_path(g, "model.json"), io::model_to_json(dec.model, prov));
  write_json(out_path(g, "initial_model.json"), io::model_to_json(dec.initial, prov));

  const auto f_init = decouple::evaluate_fits(dec.initial.as_nonlinearity(), d, ncfg);
  const auto f_final = decouple::evaluate_fits(dec.model.as_nonlinearity(), d, ncfg);
  json rep{{"run_config_hash", hash},
           {"provenance", prov},
           {"coupled_params", coupled.size()},
           {"decoupled_params", dec.model.param_count()},
           {"hessian_points", dec.hessian_points},
           {"cpd_relative_error", dec.cpd_relative_error},
           {"sls", {{"iterations", dec.sls.iterations},
                    {"converged", dec.sls.converged},
                    {"condition", dec.sls.condition},
                    {"initializer", decouple::to_string(dec.sls.initializer)},
                    {"cost", dec.sls.cost}}},
           {"initial_fits", fits_json(f_init)},
           {"final_fits", fits_json(f_final)},
           {"notes", dec.notes}};
  write_json(out_path(g, "decouple_report.json"), rep);
  write_plot_data(g, dec.model, d, dec.sls.cost, hash);

  if (o.save_tensor) {
    const auto st = decouple::make_standardization(d, ncfg, opts.standardize);
    const auto tab = narx::build_regressors(st.apply(d), ncfg).subsample(o.hessian_points);
    const auto T = decouple::build_hessian_tensor(st.to_standard(coupled), tab.Z);
    io::write_tensor(out_path(g, "hessian").string(), T, hash);
    io::write_matrix_csv(out_path(g, "V.csv").string(), dec.model.V, hash);
  }
  std::printf("decoupled model: r=%d M=%d, %llu parameters (coupled: %zu)\n", o.r, o.M,
              static_cast<unsigned long long>(dec.model.param_count()), coupled.size());
  std::printf("SLS: %d iterations, final cost %.6g\n", dec.sls.iterations, dec.sls.cost.back());
  if (f_final.prediction) std::printf("prediction FIT %.4f %%\n", *f_final.prediction);
  if (f_final.simulation) std::printf("simulation FIT %.4f %%\n", *f_final.simulation);
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  DataOptions data;
  Lags lags;
  std::string model;
  std::string report = "eval.json";
};

narx::Nonlinearity load_model(const std::string& path, const narx::NarxConfig& cfg, std::string& kind) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ParseError("model JSON: " + std::string(e.what()));
  }
  if (j.contains("terms")) {
    kind = "coupled";
    const auto p = io::poly_from_json(j);
    if (p.input_dim() != cfg.input_dim()) throw ParseError("model width does not match --n-u + --n-y");
    return narx::as_nonlinearity(p);
  }
  kind = "decoupled";
  const auto m = io::model_from_json(j);
  if (m.cfg.n_u != cfg.n_u || m.cfg.n_y != cfg.n_y || m.cfg.n_k != cfg.n_k) {
    throw ParseError("model lags differ from --n-u/--n-y/--n-k");
  }
  return m.as_nonlinearity();
}

int cmd_eval(const Global& g, const EvalOptions& o) {
  json cfg{{"command", "eval"},
           {"input", data_json(o.data)},
           {"model_hash", io::file_hash(o.model)},
           {"narx", lags_json(o.lags)}};
  const std::string hash = run_hash(cfg);
  const auto d = load_dataset(o.data.data, o.data.segments, o.data.zero_run);
  const auto ncfg = o.lags.config();
  std::string kind;
  const auto f = load_model(o.model, ncfg, kind);

  const auto tab = narx::build_regressors(d, ncfg);
  const auto pred = bench::compute_metrics(tab.target, narx::predict_one_step(f, d, ncfg));
  const auto sim = narx::simulate_free_run(f, d, ncfg);
  json rep{{"run_config_hash", hash}, {"provenance", provenance(cfg, hash)}, {"model_kind", kind}};
  rep["prediction"] = {{"fit_percent", optional_json(pred.fit_percent)}, {"e_rms", pred.e_rms},
                       {"n_points", pred.n_points}};
  std::printf("prediction: FIT %s %%, e_RMS %.6g\n",
              pred.fit_percent ? std::to_string(*pred.fit_percent).c_str() : "undefined", pred.e_rms);
  if (sim.unstable) {
    rep["simulation"] = {{"unstable", true}, {"unstable_segments", sim.unstable_segments}};
    std::printf("simulation: UNSTABLE\n");
  } else {
    const auto sm = bench::compute_metrics(tab.target, sim.y_hat);
    rep["simulation"] = {{"unstable", false}, {"fit_percent", optional_json(sm.fit_percent)},
                         {"e_rms", sm.e_rms}, {"n_points", sm.n_points}};
    std::printf("simulation: FIT %s %%, e_RMS %.6g\n",
                sm.fit_percent ? std::to_string(*sm.fit_percent).c_str() : "undefined", sm.e_rms);
  }
  write_json(out_path(g, o.report), rep);
  std::cout << rep.dump() << "\n";
  return sim.unstable ? kExitUnstable : 0;
}

// ---------------------------------------------------------------- sweep

struct SweepOptions {
  DecoupleOptions dec;
  std::vector<int> r_list{1, 2, 3};
  std::vector<int> M_list{2, 3, 4};
};

int cmd_sweep(const Global& g, const SweepOptions& o) {
  const std::uint64_t seed = need_seed(g, "sweep");
  json cfg = decouple_config(o.dec, seed, g.mem_budget_gb);
  cfg["command"] = "sweep";
  cfg["r_list"] = o.r_list;
  cfg["M_list"] = o.M_list;
  cfg.erase("r");
  cfg.erase("M");
  const std::string hash = run_hash(cfg);
  const auto d = load_dataset(o.dec.data.data, o.dec.data.segments, o.dec.data.zero_run);
  const auto ncfg = o.dec.lags.config();
  const auto coupled = io::poly_from_json(json::parse(io::read_text(o.dec.coupled)));

  std::string s = "# run_config_hash=" + hash + "\nr,M,params,prediction_fit,simulation_fit,status\n";
  char buf[256];
  for (int r : o.r_list) {
    for (int M : o.M_list) {
      DecoupleOptions one = o.dec;
      one.r = r;
      one.M = M;
      std::string status = "ok";
      std::string pf = "", sf = "";
      std::uint64_t params = decouple::count_dpnarx_params(ncfg.input_dim(), M, r);
      try {
        const auto dec = decouple::decouple_coupled(coupled, d, ncfg, algo_options(g, one, seed));
        const auto f = decouple::evaluate_fits(dec.model.as_nonlinearity(), d, ncfg);
        params = dec.model.param_count();
        if (f.prediction) pf = std::to_string(*f.prediction);
        if (f.simulation) sf = std::to_string(*f.simulation);
        if (f.simulation_unstable) status = "unstable";
      } catch (const Error& e) {
        status = std::string("error: ") + e.what();
        for (auto& c : status) if (c == ',' || c == '\n') c = ';';
      }
      std::snprintf(buf, sizeof buf, "%d,%d,%llu,", r, M, static_cast<unsigned long long>(params));
      s += buf + pf + "," + sf + "," + status + "\n";
      std::printf("r=%d M=%d params=%llu pred=%s sim=%s %s\n", r, M,
                  static_cast<unsigned long long>(params), pf.c_str(), sf.c_str(), status.c_str());
    }
  }
  io::write_text(out_path(g, "sweep.csv").string(), s);
  return 0;
}

// ---------------------------------------------------------------- demo-jacobian

struct DemoOptions {
  DataOptions data;
  Lags lags;
  std::string model;
  std::string transform = "rotation";
  double angle_deg = 30.0;
};

int cmd_demo(const Global& g, const DemoOptions& o) {
  json cfg{{"command", "demo-jacobian"},
           {"input", data_json(o.data)},
           {"model_hash", io::file_hash(o.model)},
           {"narx", lags_json(o.lags)},
           {"transform", o.transform},
           {"angle_deg", o.angle_deg},
           {"seed", g.seed ? json(*g.seed) : json(nullptr)}};
  const std::string hash = run_hash(cfg);
  const auto d = load_dataset(o.data.data, o.data.segments, o.data.zero_run);
  const auto m = io::model_from_json(json::parse(io::read_text(o.model)));
  const auto tab = narx::build_regressors(d, m.cfg);
  const Eigen::Index r = m.rank();
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(r, r);
  if (o.transform == "rotation") {
    if (r < 2) throw ParseError("rotation needs r >= 2");
    const double a = o.angle_deg * std::numbers::pi / 180.0;
    T(0, 0) = std::cos(a);
    T(0, 1) = -std::sin(a);
    T(1, 0) = std::sin(a);
    T(1, 1) = std::cos(a);
  } else if (o.transform == "random") {
    std::mt19937_64 rng(need_seed(g, "random transform"));
    std::normal_distribution<double> nd;
    do {
      for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = nd(rng);
    } while (linalg::condition_number(T) >= 1e3);
  } else if (o.transform != "identity") {
    throw ParseError("--transform must be rotation, random or identity");
  }
  const auto rep = decouple::demo_jacobian_matrix_nonuniqueness(m, tab.Z, T);
  json out{{"run_config_hash", hash},
           {"provenance", provenance(cfg, hash)},
           {"reconstruction_error", rep.reconstruction_error},
           {"transform_condition", rep.transform_condition},
           {"factor_change", rep.factor_change},
           {"explanation",
            "J = V W^T admits (V T^-1)(T W^T) for every invertible T, so factoring the stacked "
            "Jacobians cannot identify V; the Hessian tensor CPD is used instead"}};
  write_json(out_path(g, "demo_jacobian.json"), out);
  std::printf("||(V T^-1)(T W^T) - J|| / ||J|| = %.3g, ||V' - V|| / ||V|| = %.3g\n",
              rep.reconstruction_error, rep.factor_change);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identify polynomial NARX models and decouple them into V and univariate branches"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "seed for every stochastic step (required where randomness is used)");
  app.add_option("--threads", g.threads, "worker thread cap")->capture_default_str();
  app.add_option("--mem-budget-gb", g.mem_budget_gb, "memory budget for the Hessian Jacobian")
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "existing directory for all artifacts")->capture_default_str();

  GenOptions gen;
  auto* c_gen = app.add_subcommand("gen", "generate benchmark or excitation data");
  c_gen->add_option("kind", gen.kind, "boucwen | duffing | multisine | sweptsine")->required();
  c_gen->add_option("--name", gen.name, "output base name (default: kind)");
  c_gen->add_option("--period", gen.period, "multisine period in samples")->capture_default_str();
  c_gen->add_option("--periods", gen.periods, "periods to emit (multisine) or transient periods (systems)")
      ->capture_default_str();
  c_gen->add_flag("--odd", gen.odd, "odd harmonic lines only");
  c_gen->add_option("--rms", gen.rms, "multisine RMS (defaults: 1, Bouc-Wen 55 N, Duffing 1000)");
  c_gen->add_option("--fs", gen.fs, "sample rate in Hz");
  c_gen->add_option("--lines-lo", gen.lines_lo, "first harmonic line (overrides band)");
  c_gen->add_option("--lines-hi", gen.lines_hi, "last harmonic line (overrides band)");
  c_gen->add_option("--band-lo-hz", gen.band_lo_hz, "excited band start")->capture_default_str();
  c_gen->add_option("--band-hi-hz", gen.band_hi_hz, "excited band end")->capture_default_str();
  c_gen->add_option("--f-start", gen.f_start, "swept sine start frequency")->capture_default_str();
  c_gen->add_option("--f-end", gen.f_end, "swept sine end frequency")->capture_default_str();
  c_gen->add_option("--duration", gen.duration, "swept sine duration in s")->capture_default_str();
  c_gen->add_option("--amplitude", gen.amplitude, "swept sine amplitude")->capture_default_str();
  c_gen->add_option("--oversample", gen.oversample, "integration steps per output sample")
      ->capture_default_str();
  c_gen->add_option("--input", gen.input, "Bouc-Wen excitation: multisine | sweptsine")
      ->capture_default_str();

  FitOptions fit;
  auto* c_fit = app.add_subcommand("fit", "fit a coupled polynomial NARX model");
  add_data(c_fit, fit.data);
  add_lags(c_fit, fit.lags);
  c_fit->add_option("--selection", fit.selection, "none | frols")->capture_default_str();
  c_fit->add_option("--err-threshold", fit.err_threshold, "FROLS: stop when 1 - sum ERR <= this")
      ->capture_default_str();
  c_fit->add_option("--max-terms", fit.max_terms, "FROLS term cap (0: none)")->capture_default_str();
  c_fit->add_flag("--no-standardize", fit.no_standardize, "fit in raw signal units");

  DecoupleOptions dec;
  auto add_decouple = [](CLI::App* c, DecoupleOptions& o) {
    add_data(c, o.data);
    add_lags(c, o.lags);
    c->add_option("--coupled", o.coupled, "coupled model JSON from `fit`")->required();
    c->add_option("--init", o.init, "random | cpd | cpd_structured")->capture_default_str();
    c->add_option("--hessian-points", o.hessian_points, "regressor rows used for the Hessian tensor")
        ->capture_default_str();
    c->add_option("--als-restarts", o.als_restarts, "ALS restarts")->capture_default_str();
    c->add_option("--als-max-iter", o.als_max_iter, "ALS iteration cap")->capture_default_str();
    c->add_option("--sls-max-iter", o.sls_max_iter, "SLS iteration cap")->capture_default_str();
    c->add_flag("--no-standardize", o.no_standardize, "work in raw signal units");
  };
  auto* c_dec = app.add_subcommand("decouple", "decouple a coupled model (Hessian CPD + SLS)");
  add_decouple(c_dec, dec);
  c_dec->add_option("-r,--r", dec.r, "number of branches")->capture_default_str();
  c_dec->add_option("-M,--M", dec.M, "branch polynomial degree")->capture_default_str();
  c_dec->add_flag("--save-tensor", dec.save_tensor, "also write the Hessian tensor and V");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "FIT and e_RMS in prediction and simulation");
  add_data(c_eval, ev.data);
  add_lags(c_eval, ev.lags);
  c_eval->add_option("--model", ev.model, "coupled or decoupled model JSON")->required();
  c_eval->add_option("--report", ev.report, "report file name in --out-dir")->capture_default_str();

  SweepOptions sw;
  auto* c_sweep = app.add_subcommand("sweep", "FIT over an r x M grid");
  add_decouple(c_sweep, sw.dec);
  c_sweep->add_option("--r-list", sw.r_list, "branch counts")->delimiter(',')->capture_default_str();
  c_sweep->add_option("--M-list", sw.M_list, "branch degrees")->delimiter(',')->capture_default_str();

  DemoOptions demo;
  auto* c_demo = app.add_subcommand("demo-jacobian", "show that stacked Jacobians do not fix V");
  add_data(c_demo, demo.data);
  add_lags(c_demo, demo.lags);
  c_demo->add_option("--model", demo.model, "decoupled model JSON")->required();
  c_demo->add_option("--transform", demo.transform, "rotation | random | identity")->capture_default_str();
  c_demo->add_option("--angle", demo.angle_deg, "rotation angle in degrees")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*c_gen) return cmd_gen(g, gen);
    if (*c_fit) return cmd_fit(g, fit);
    if (*c_dec) return cmd_decouple(g, dec);
    if (*c_eval) return cmd_eval(g, ev);
    if (*c_sweep) return cmd_sweep(g, sw);
    if (*c_demo) return cmd_demo(g, demo);
  } catch (const BudgetError& e) {
    std::fprintf(stderr, "error: %s\n  Jacobian elements: %llu (%.4g GB at 8 bytes each)\n", e.what(),
                 static_cast<unsigned long long>(e.elements()), e.bytes() / 1e9);
    return kExitNumeric;
  } catch (const UnstableError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnstable;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error%s: %s\n", e.stage().empty() ? "" : (" [" + e.stage() + "]").c_str(),
                 e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error%s: %s\n", e.stage().empty() ? "" : (" [" + e.stage() + "]").c_str(),
                 e.what());
    return kExitParse;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
    return kExitParse;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitParse;
  }
  return kExitParse;
}
