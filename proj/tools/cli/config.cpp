#include <cmath>
#include <cstdlib>
#include <sstream>

#include "sar/cli.hpp"
#include "sar/io.hpp"

namespace sar::cli {

namespace {

CommandError usage(const std::string& what) { return CommandError(kUsage, what); }

double number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw usage("bad number '" + s + "' in " + what);
  }
  if (used != s.size() || !std::isfinite(v)) throw usage("bad number '" + s + "' in " + what);
  return v;
}

json ml_base() {
  return {
      {"model", "morris_lecar"},
      {"seed", 1},
      {"params", json::object()},
      {"initial_state", {{"v", -52.14}, {"n_rec", 0.02}}},
      {"calibration", {{"lo", 0.0}, {"hi", 300.0}, {"step", 5.0}, {"dt", 1e-3}, {"t_end", 500.0}, {"record_stride", 10}}},
      {"sim", {{"dt", 1e-3}, {"t_end", 500.0}, {"n_paths", 1}, {"record_stride", 10}}},
      {"noise", {{"mode", "state"}, {"sigma", 0.0}}},
      {"filter_window", 1001},
  };
}

json approx_defaults() {
  return {
      {"width", 10},
      {"n_samples", 10000},
      {"box", {{"v_lo", -80.0}, {"v_hi", 120.0}, {"n_lo", 0.0}, {"n_hi", 1.0}}},
      {"train",
       {{"epochs", 3000}, {"batch_size", 256}, {"learning_rate", 1e-2}, {"momentum", 0.9}, {"decay", 1e-3}}},
      {"v_scale", 100.0},
      {"n_scale", 0.5},
      {"readout_ridge", 1e-9},
      {"kappa", 1.0},
      {"offset_tol", 1e-3},
  };
}

json solver_defaults() {
  return {{"nu_grid", SolverOptions::default_nu_grid()},
          {"max_iterations", 5000},
          {"restarts", 5},
          {"tol", 1e-8},
          {"step0", 1.0},
          {"restart_scale", 1.0},
          {"stall_window", 400},
          {"smoothing_iterations", 1200},
          {"coupling", "literal"}};
}

json defaults_for(const std::string& command) {
  if (command == "simulate" || command == "fig3") return ml_base();
  if (command == "approximate") {
    json j = ml_base();
    j["approx"] = approx_defaults();
    return j;
  }
  if (command == "certify" || command == "sweep") return {{"seed", 1}, {"solver", solver_defaults()}};
  if (command == "fig4") {
    json j = ml_base();
    j["fig4"] = {{"sigmas", {0.0, 0.85}}, {"n_paths", 20}, {"window", {300.0, 500.0}}};
    return j;
  }
  if (command == "fig5") {
    json j = ml_base();
    j["approx"] = approx_defaults();
    // A 30-state LMI at every sweep point: a thinner nu grid (keeping both
    // ends of the default one) and a short subgradient phase before the
    // smoothed polish.
    j["solver"] = solver_defaults();
    j["solver"]["nu_grid"] = {0.05, 0.25, 0.5, 0.75, 0.95};
    j["solver"]["restarts"] = 0;
    j["solver"]["max_iterations"] = 300;
    j["solver"]["smoothing_iterations"] = 900;
    j["sweep"] = {{"sigma", "0:2:0.1"}};
    j["fig5"] = {{"check_sigma", 0.85}};
    return j;
  }
  throw usage("unknown command '" + command + "'");
}

}  // namespace

std::vector<double> parse_range(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 3) throw usage("range '" + spec + "' must be a:b:step");
  const double a = number(parts[0], "range");
  const double b = number(parts[1], "range");
  const double step = number(parts[2], "range");
  if (!(step > 0.0)) throw usage("range step must be positive");
  if (b < a) throw usage("empty range '" + spec + "'");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = a + step * static_cast<double>(i);
  return out;
}

json resolve_config(const std::string& command, const Globals& g) {
  json cfg = defaults_for(command);
  if (g.config) {
    json user;
    try {
      user = io::read_json_file(*g.config);
    } catch (const Error& e) {
      throw usage(e.what());
    }
    if (!user.is_object()) throw usage("config must be a JSON object");
    if (user.contains("command") && user.contains("config")) user = user["config"];
    cfg.merge_patch(user);
  }
  if (g.seed) cfg["seed"] = *g.seed;
  if (g.filter_window) cfg["filter_window"] = *g.filter_window;
  if (g.noise_mode) {
    ml::parse_noise_mode(*g.noise_mode);
    cfg["noise"]["mode"] = *g.noise_mode;
  }
  if (g.nu_grid) {
    if (!cfg.contains("solver")) cfg["solver"] = solver_defaults();
    cfg["solver"]["nu_grid"] = parse_range(*g.nu_grid);
  }
  if (g.sigma) {
    if (command == "sweep" || command == "fig5") {
      parse_range(*g.sigma);
      cfg["sweep"]["sigma"] = *g.sigma;
    } else if (command == "fig4") {
      cfg["fig4"]["sigmas"] = parse_range(*g.sigma);
    } else {
      const auto values = g.sigma->find(':') == std::string::npos ? std::vector<double>{number(*g.sigma, "--sigma")}
                                                                  : parse_range(*g.sigma);
      if (values.size() != 1) throw usage("--sigma for " + command + " takes one value");
      if (cfg.value("model", std::string("morris_lecar")) == "lure" && cfg.contains("system"))
        cfg["system"]["sigma"] = values.front();
      cfg["noise"]["sigma"] = values.front();
    }
  }
  const int window = cfg.value("filter_window", 1);
  if (window < 1 || window % 2 == 0) throw usage("filter window must be an odd positive integer");
  return cfg;
}

namespace {

template <class T>
T get(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw usage(std::string(where) + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw usage(std::string(where) + ": bad value for '" + key + "'");
  }
}

std::uint64_t seed_of(const json& cfg) { return get<std::uint64_t>(cfg, "seed", "config"); }

}  // namespace

ml::Params ml_params(const json& cfg) {
  try {
    return io::params_from_json(cfg.value("params", json::object()));
  } catch (const Error& e) {
    throw usage(e.what());
  }
}

ml::State ml_initial_state(const json& cfg) {
  const json& s = cfg.at("initial_state");
  return {get<double>(s, "v", "initial_state"), get<double>(s, "n_rec", "initial_state")};
}

SimConfig sim_config(const json& cfg) {
  const json& s = cfg.at("sim");
  SimConfig c;
  c.dt = get<double>(s, "dt", "sim");
  c.t_end = get<double>(s, "t_end", "sim");
  c.n_paths = get<std::size_t>(s, "n_paths", "sim");
  c.record_stride = get<std::size_t>(s, "record_stride", "sim");
  c.seed = seed_of(cfg);
  try {
    check(c);
  } catch (const Error& e) {
    throw usage(e.what());
  }
  return c;
}

ml::ApproxOptions approx_options(const json& cfg) {
  const json& a = cfg.at("approx");
  ml::ApproxOptions o;
  o.width = get<Index>(a, "width", "approx");
  o.n_samples = get<std::size_t>(a, "n_samples", "approx");
  const json& box = a.at("box");
  o.box = {get<double>(box, "v_lo", "box"), get<double>(box, "v_hi", "box"), get<double>(box, "n_lo", "box"),
           get<double>(box, "n_hi", "box")};
  const json& t = a.at("train");
  o.train.epochs = get<std::size_t>(t, "epochs", "train");
  o.train.batch_size = get<std::size_t>(t, "batch_size", "train");
  o.train.learning_rate = get<double>(t, "learning_rate", "train");
  o.train.momentum = get<double>(t, "momentum", "train");
  o.train.decay = get<double>(t, "decay", "train");
  o.train.seed = seed_of(cfg);
  o.v_scale = get<double>(a, "v_scale", "approx");
  o.n_scale = get<double>(a, "n_scale", "approx");
  o.readout_ridge = get<double>(a, "readout_ridge", "approx");
  o.kappa = get<double>(a, "kappa", "approx");
  o.offset_tol = get<double>(a, "offset_tol", "approx");
  o.seed = seed_of(cfg);
  if (o.width < 1) throw usage("approx: width must be >= 1");
  return o;
}

SolverOptions solver_options(const json& cfg, unsigned jobs) {
  const json& s = cfg.at("solver");
  SolverOptions o;
  o.nu_grid = get<std::vector<double>>(s, "nu_grid", "solver");
  o.max_iterations = get<int>(s, "max_iterations", "solver");
  o.restarts = get<int>(s, "restarts", "solver");
  o.tol = get<double>(s, "tol", "solver");
  o.step0 = get<double>(s, "step0", "solver");
  o.restart_scale = get<double>(s, "restart_scale", "solver");
  o.stall_window = get<int>(s, "stall_window", "solver");
  o.smoothing_iterations = get<int>(s, "smoothing_iterations", "solver");
  const auto coupling = get<std::string>(s, "coupling", "solver");
  if (coupling == "literal") {
    o.coupling = SectorCoupling::kLiteral;
  } else if (coupling == "output_indexed") {
    o.coupling = SectorCoupling::kOutputIndexed;
  } else {
    throw usage("solver: coupling must be literal|output_indexed");
  }
  for (double nu : o.nu_grid)
    if (!(nu > 0.0 && nu < 1.0)) throw usage("solver: nu grid values must lie in (0, 1)");
  if (o.nu_grid.empty()) throw usage("solver: empty nu grid");
  o.seed = seed_of(cfg);
  o.jobs = jobs;
  return o;
}

Calibrated calibrated_params(const json& cfg) {
  Calibrated out;
  out.params = ml_params(cfg);
  if (cfg.at("params").contains("i_app")) return out;
  const json& c = cfg.at("calibration");
  SimConfig sc;
  sc.dt = get<double>(c, "dt", "calibration");
  sc.t_end = get<double>(c, "t_end", "calibration");
  sc.record_stride = get<std::size_t>(c, "record_stride", "calibration");
  out.scan = ml::calibrate_i_app(out.params, ml_initial_state(cfg), sc, get<double>(c, "lo", "calibration"),
                                 get<double>(c, "hi", "calibration"), get<double>(c, "step", "calibration"));
  out.scanned = true;
  if (!out.scan.found) throw CommandError(kUsage, "calibration: no sustained oscillation on the i_app scan");
  out.params.i_app = out.scan.i_app;
  return out;
}

}  // namespace sar::cli
