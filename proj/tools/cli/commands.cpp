#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "sar/cli.hpp"
#include "sar/io.hpp"

namespace sar::cli {

namespace fs = std::filesystem;

namespace {

// Collects written files so the manifest can list them.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void text(const std::string& name, const std::string& content) {
    io::write_text_file(dir_ / name, content);
    files_.push_back(name);
  }
  void json_file(const std::string& name, const json& j) {
    io::write_json_file(dir_ / name, j);
    files_.push_back(name);
  }
  const fs::path& dir() const { return dir_; }

  void manifest(const std::string& command, const json& cfg, const json& calibrated,
                std::chrono::steady_clock::time_point start) {
    files_.push_back("manifest.json");
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const json m = {
        {"command", command},
        {"tool_version", kVersion},
        {"config", cfg},
        {"seeds", {{"sim", seed}, {"train", seed}, {"solver", seed}}},
        {"calibrated", calibrated},
        {"outputs", files_},
        {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
    };
    io::write_json_file(dir_ / "manifest.json", m);
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json calibration_record(const Calibrated& c, const json& cfg) {
  const bool v2_given = cfg.contains("params") && cfg["params"].contains("v2");
  return {{"i_app", c.params.i_app},
          {"i_app_source", c.scanned ? "scan" : "config"},
          {"v2", c.params.v2},
          {"v2_source", v2_given ? "config" : "assumed"}};
}

std::string calibration_csv(const ml::Calibration& cal) {
  std::ostringstream out;
  out << "i_app,spikes,peak_to_peak,tail_spikes,tail_peak_to_peak,sustained\n";
  for (const auto& pt : cal.scan)
    out << io::format_double(pt.i_app) << ',' << pt.whole.spikes << ',' << io::format_double(pt.whole.peak_to_peak)
        << ',' << pt.tail.spikes << ',' << io::format_double(pt.tail.peak_to_peak) << ',' << (pt.sustained ? 1 : 0)
        << '\n';
  return out.str();
}

std::vector<double> column(const SdePath& p, Index c) {
  return {p.states.col(c).data(), p.states.col(c).data() + p.states.rows()};
}

std::vector<double> filtered(const SdePath& p, Index c, int window) {
  const auto col = column(p, c);
  if (static_cast<std::size_t>(window) > 2 * col.size())
    throw CommandError(kUsage, "filter window longer than twice the recorded trajectory");
  return lowpass(col, static_cast<std::size_t>(window));
}

std::string plot_columns(const std::string& csv, std::size_t first, std::size_t last) {
  std::ostringstream out;
  out << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nplot ";
  for (std::size_t c = first; c <= last; ++c)
    out << (c == first ? "'" + csv + "'" : std::string("''")) << " using 1:" << c << " with lines"
        << (c == last ? "\n" : ", ");
  return out.str();
}

std::string ml_plot(const std::string& csv, bool with_filtered) {
  std::ostringstream out;
  out << "set datafile separator ','\nset key autotitle columnhead\nset multiplot layout 2,1\n"
      << "set ylabel 'V (mV)'\nplot '" << csv << "' using 1:2 with lines"
      << (with_filtered ? ", '' using 1:4 with lines lw 2" : "") << "\n"
      << "set ylabel 'N'\nset xlabel 't (ms)'\nplot '" << csv << "' using 1:3 with lines"
      << (with_filtered ? ", '' using 1:5 with lines lw 2" : "") << "\nunset multiplot\n";
  return out.str();
}

std::string sweep_plot(const std::string& csv, const std::vector<SweepPoint>& sweep) {
  std::ostringstream out;
  out << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'sigma'\nset ylabel 'margin'\n"
      << "set arrow from graph 0, first 0 to graph 1, first 0 nohead dt 2\n";
  const auto it = std::find_if(sweep.begin(), sweep.end(), [](const SweepPoint& p) { return p.cert.feasible; });
  if (it != sweep.end()) {
    out << "set arrow from first " << io::format_double(it->sigma) << ", graph 0 to first "
        << io::format_double(it->sigma) << ", graph 1 nohead lc rgb 'red'\n"
        << "set label 'first certified sigma' at first " << io::format_double(it->sigma) << ", graph 0.9\n";
  } else {
    out << "set label 'no certified sigma on this grid' at graph 0.05, graph 0.9\n";
  }
  out << "plot '" << csv << "' using 1:2 with linespoints\n";
  return out.str();
}

void write_approximation(Outputs& out, const ml::Approximation& ap) {
  static const char* kNames[] = {"L", "Ca", "K"};
  json residual = json::object();
  residual["channels"] = json::array();
  for (std::size_t c = 0; c < ap.channel_nets.size(); ++c) {
    out.json_file(std::string("net_") + kNames[c] + ".json", io::to_json(ap.channel_nets[c]));
    const auto k = static_cast<Index>(c);
    residual["channels"].push_back({{"name", kNames[c]},
                                    {"rms", ap.residual.rms[k]},
                                    {"max_abs", ap.residual.max_abs[k]},
                                    {"range", ap.residual.range[k]},
                                    {"relative_rms", ap.residual.rms[k] / ap.residual.range[k]},
                                    {"train_rmse", ap.training[c].rmse},
                                    {"warnings", ap.training[c].warnings}});
  }
  residual["readout_rms"] = ap.readout_rms;
  residual["readout_range"] = ap.readout_range;
  residual["equilibrium"] = {ap.equilibrium.v, ap.equilibrium.n_rec};
  residual["model_equilibrium"] = {ap.center.v, ap.center.n_rec};
  out.json_file("residual.json", residual);

  json emb = io::to_json(ap.embedding);
  emb["coordinates"] = {{"origin", {ap.equilibrium.v, ap.equilibrium.n_rec}},
                        {"center_u", io::vector_to_json(ap.center_u)},
                        {"v_scale", ap.v_scale},
                        {"n_scale", ap.n_scale}};
  out.json_file("embedding.json", emb);
}

void check_training(const ml::Approximation& ap) {
  for (const auto& t : ap.training)
    if (t.diverged) throw CommandError(kTrainingFailure, "network training diverged");
}

ml::Approximation approximate_or_fail(const ml::Params& p, const ml::ApproxOptions& o) {
  try {
    auto ap = ml::approximate(p, o);
    check_training(ap);
    return ap;
  } catch (const CommandError&) {
    throw;
  } catch (const Error& e) {
    throw CommandError(kTrainingFailure, std::string("approximation failed: ") + e.what());
  }
}

LureSystem load_system(const fs::path& file) {
  try {
    return io::system_from_json(io::read_json_file(file));
  } catch (const Error& e) {
    throw CommandError(kUsage, e.what());
  }
}

std::string sigma_tag(double s) { return io::format_double(s); }

}  // namespace

// ---- figure pipelines ----

Fig4Result run_fig4(const json& cfg, unsigned jobs) {
  Fig4Result r;
  r.cal = calibrated_params(cfg);
  const ml::State s0 = ml_initial_state(cfg);
  SimConfig sc = sim_config(cfg);
  const json& f = cfg.at("fig4");
  sc.n_paths = f.at("n_paths").get<std::size_t>();
  const double t0 = f.at("window")[0].get<double>();
  const double t1 = f.at("window")[1].get<double>();
  const int window = cfg.at("filter_window").get<int>();
  ml::Noise noise;
  noise.mode = ml::parse_noise_mode(cfg.at("noise").at("mode").get<std::string>());
  noise.center = ml::dominant_equilibrium(r.cal.params);
  r.sigmas = f.at("sigmas").get<std::vector<double>>();

  for (double sigma : r.sigmas) {
    noise.sigma = sigma;
    const auto paths = ml::simulate_ml_ensemble(r.cal.params, s0, sc, noise, jobs);
    std::vector<double> p2p;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      Fig4Row row{sigma, i, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                  paths[i].diverged};
      if (!paths[i].diverged) {
        const auto v = column(paths[i], 0);
        row.p2p_raw = ml::oscillation_stats(paths[i].times, v, t0, t1).peak_to_peak;
        row.p2p_filtered = ml::oscillation_stats(paths[i].times, filtered(paths[i], 0, window), t0, t1).peak_to_peak;
      }
      p2p.push_back(row.p2p_filtered);
      r.rows.push_back(row);
    }
    std::sort(p2p.begin(), p2p.end());
    const std::size_t n = p2p.size();
    r.median_p2p.push_back(n % 2 ? p2p[n / 2] : 0.5 * (p2p[n / 2 - 1] + p2p[n / 2]));
    r.first_paths.push_back(paths.front());
    const bool ok = !paths.front().diverged;
    r.v_filt.push_back(ok ? filtered(paths.front(), 0, window) : std::vector<double>{});
    r.n_filt.push_back(ok ? filtered(paths.front(), 1, window) : std::vector<double>{});
  }
  return r;
}

Fig5Result run_fig5(const json& cfg, unsigned jobs) {
  Fig5Result r;
  r.cal = calibrated_params(cfg);
  r.approx = approximate_or_fail(r.cal.params, approx_options(cfg));
  const auto sigmas = parse_range(cfg.at("sweep").at("sigma").get<std::string>());
  const SolverOptions so = solver_options(cfg, jobs);
  r.sweep = sigma_sweep(r.approx.embedding.system, sigmas, so);
  LureSystem sys = r.approx.embedding.system;
  sys.sigma = cfg.at("fig5").at("check_sigma").get<double>();
  r.at_check = certify({sys, so});
  return r;
}

// ---- commands ----

int cmd_simulate(const Globals& g) {
  const auto start = std::chrono::steady_clock::now();
  const json cfg = resolve_config("simulate", g);
  Outputs out(g.out);
  const SimConfig sc = sim_config(cfg);
  const int window = cfg.at("filter_window").get<int>();
  const std::string model = cfg.value("model", std::string("morris_lecar"));

  std::vector<SdePath> paths;
  std::vector<std::string> names;
  json calibrated = nullptr;
  double sigma = 0.0;
  if (model == "morris_lecar") {
    const Calibrated cal = calibrated_params(cfg);
    ml::Noise noise;
    noise.mode = ml::parse_noise_mode(cfg.at("noise").at("mode").get<std::string>());
    noise.sigma = cfg.at("noise").at("sigma").get<double>();
    noise.center = ml::dominant_equilibrium(cal.params);
    sigma = noise.sigma;
    paths = ml::simulate_ml_ensemble(cal.params, ml_initial_state(cfg), sc, noise, g.jobs);
    names = {"V", "N"};
    calibrated = calibration_record(cal, cfg);
  } else if (model == "lure") {
    if (!cfg.contains("system")) throw CommandError(kUsage, "lure config needs a 'system'");
    LureSystem sys;
    try {
      sys = io::system_from_json(cfg["system"]);
    } catch (const Error& e) {
      throw CommandError(kUsage, e.what());
    }
    if (!cfg.contains("x0")) throw CommandError(kUsage, "lure config needs 'x0'");
    const Vector x0 = io::vector_from_json(cfg["x0"], "x0");
    if (x0.size() != sys.states()) throw CommandError(kUsage, "x0 has the wrong dimension");
    sigma = sys.sigma;
    paths = simulate_ensemble(sys, x0, sc, g.jobs);
    names = io::state_names(sys.states());
  } else {
    throw CommandError(kUsage, "unknown model '" + model + "'");
  }

  std::vector<io::Column> extra;
  const SdePath& first = paths.front();
  if (sigma != 0.0 && window > 1 && !first.diverged) {
    for (std::size_t c = 0; c < names.size(); ++c)
      extra.push_back({names[c] + "_filt", filtered(first, static_cast<Index>(c), window)});
  }
  out.text("traj.csv", io::path_csv(first, names, extra));
  out.text("traj.plt", model == "morris_lecar" ? ml_plot("traj.csv", !extra.empty())
                                               : plot_columns("traj.csv", 2, 1 + names.size() + extra.size()));

  std::vector<SdePath> ok;
  for (const auto& p : paths)
    if (!p.diverged) ok.push_back(p);
  if (paths.size() > 1 && !ok.empty()) {
    out.text("moments_1.csv", io::moments_csv(ensemble_moments(ok, 1)));
    out.text("moments_2.csv", io::moments_csv(ensemble_moments(ok, 2)));
  }
  out.manifest("simulate", cfg, calibrated, start);

  if (ok.size() != paths.size()) {
    std::cerr << "divergence: " << paths.size() - ok.size() << " of " << paths.size() << " paths (first at t="
              << io::format_double(paths.front().diverged ? paths.front().diverged_at : 0.0) << ")\n";
    return kDivergence;
  }
  return kOk;
}

int cmd_approximate(const Globals& g) {
  const auto start = std::chrono::steady_clock::now();
  const json cfg = resolve_config("approximate", g);
  const Calibrated cal = calibrated_params(cfg);
  const auto ap = approximate_or_fail(cal.params, approx_options(cfg));
  Outputs out(g.out);
  write_approximation(out, ap);
  out.manifest("approximate", cfg, calibration_record(cal, cfg), start);
  std::cout << "embedding states=" << ap.embedding.system.states() << " offset=" << io::format_double(ap.embedding.offset.norm()) << '\n';
  return kOk;
}

int cmd_certify(const fs::path& system_file, const Globals& g) {
  const json cfg = resolve_config("certify", g);
  const LureSystem sys = load_system(system_file);
  const Certificate cert = certify({sys, solver_options(cfg, g.jobs)});
  Outputs out(g.out);
  out.json_file("certificate.json", io::to_json(cert));
  std::cout << (cert.feasible ? "feasible" : "infeasible") << " margin=" << io::format_double(cert.margin)
            << " nu=" << io::format_double(cert.nu) << " sigma=" << io::format_double(cert.sigma) << '\n';
  return cert.feasible ? kOk : kInfeasible;
}

int cmd_sweep(const fs::path& system_file, const Globals& g) {
  const auto start = std::chrono::steady_clock::now();
  const json cfg = resolve_config("sweep", g);
  if (!cfg.contains("sweep")) throw CommandError(kUsage, "sweep needs --sigma a:b:step");
  const auto sigmas = parse_range(cfg["sweep"].at("sigma").get<std::string>());
  const LureSystem sys = load_system(system_file);
  std::vector<SweepPoint> sweep;
  try {
    sweep = sigma_sweep(sys, sigmas, solver_options(cfg, g.jobs));
  } catch (const CommandError&) {
    throw;
  } catch (const Error& e) {
    throw CommandError(kUsage, e.what());
  }
  Outputs out(g.out);
  out.text("sweep.csv", io::sweep_csv(sweep));
  out.text("sweep.plt", sweep_plot("sweep.csv", sweep));
  json manifest_cfg = cfg;
  manifest_cfg["system_file"] = system_file.string();
  out.manifest("sweep", manifest_cfg, nullptr, start);
  return kOk;
}

int cmd_reproduce(const std::string& figure, const Globals& g) {
  if (figure != "fig3" && figure != "fig4" && figure != "fig5")
    throw CommandError(kUsage, "unknown figure '" + figure + "' (expected fig3|fig4|fig5)");
  const auto start = std::chrono::steady_clock::now();
  const json cfg = resolve_config(figure, g);
  Outputs out(g.out / figure);

  if (figure == "fig3") {
    const Calibrated cal = calibrated_params(cfg);
    SimConfig sc = sim_config(cfg);
    sc.n_paths = 1;
    const SdePath path = ml::simulate_ml(cal.params, ml_initial_state(cfg), sc, ml::Noise{});
    if (cal.scanned) out.text("calibration.csv", calibration_csv(cal.scan));
    out.text("traj.csv", io::path_csv(path, {"V", "N"}));
    out.text("fig3.plt", ml_plot("traj.csv", false));
    out.manifest("reproduce fig3", cfg, calibration_record(cal, cfg), start);
    return path.diverged ? kDivergence : kOk;
  }

  if (figure == "fig4") {
    const Fig4Result r = run_fig4(cfg, g.jobs);
    if (r.cal.scanned) out.text("calibration.csv", calibration_csv(r.cal.scan));
    std::ostringstream summary;
    summary << "sigma,path,p2p_raw,p2p_filtered,diverged\n";
    for (const auto& row : r.rows)
      summary << io::format_double(row.sigma) << ',' << row.path << ',' << io::format_double(row.p2p_raw) << ','
              << io::format_double(row.p2p_filtered) << ',' << (row.diverged ? 1 : 0) << '\n';
    out.text("summary.csv", summary.str());
    std::ostringstream plt;
    plt << "set datafile separator ','\nset key autotitle columnhead\nset multiplot layout " << r.sigmas.size()
        << ",1\n";
    bool any_diverged = false;
    for (std::size_t k = 0; k < r.sigmas.size(); ++k) {
      const std::string name = "traj_sigma_" + sigma_tag(r.sigmas[k]) + ".csv";
      std::vector<io::Column> extra;
      if (!r.v_filt[k].empty()) extra = {{"V_filt", r.v_filt[k]}, {"N_filt", r.n_filt[k]}};
      out.text(name, io::path_csv(r.first_paths[k], {"V", "N"}, extra));
      plt << "set title 'sigma = " << sigma_tag(r.sigmas[k]) << "'\nplot '" << name << "' using 1:2 with lines"
          << (extra.empty() ? "" : ", '' using 1:4 with lines lw 2") << "\n";
      std::cout << "sigma=" << sigma_tag(r.sigmas[k]) << " median filtered p2p=" << io::format_double(r.median_p2p[k])
                << '\n';
      any_diverged = any_diverged || r.first_paths[k].diverged;
    }
    plt << "unset multiplot\n";
    out.text("fig4.plt", plt.str());
    out.manifest("reproduce fig4", cfg, calibration_record(r.cal, cfg), start);
    return any_diverged ? kDivergence : kOk;
  }

  const Fig5Result r = run_fig5(cfg, g.jobs);
  if (r.cal.scanned) out.text("calibration.csv", calibration_csv(r.cal.scan));
  write_approximation(out, r.approx);
  out.text("sweep.csv", io::sweep_csv(r.sweep));
  out.text("sweep.plt", sweep_plot("sweep.csv", r.sweep));
  for (const auto& pt : r.sweep) out.json_file("certificates/sigma_" + sigma_tag(pt.sigma) + ".json", io::to_json(pt.cert));
  const Certificate& check = r.at_check;
  out.json_file("certificate_check.json", io::to_json(check));
  out.manifest("reproduce fig5", cfg, calibration_record(r.cal, cfg), start);
  const auto feasible = std::count_if(r.sweep.begin(), r.sweep.end(), [](const SweepPoint& p) { return p.cert.feasible; });
  std::cout << "certified " << feasible << " of " << r.sweep.size() << " sweep points; sigma=" << sigma_tag(check.sigma)
            << " margin=" << io::format_double(check.margin) << '\n';
  return kOk;
}

}  // namespace sar::cli
