#include <iostream>

#include <CLI11.hpp>

#include "sar/cli.hpp"

namespace sar::cli {

int run(int argc, char** argv) {
  CLI::App app{"Stochastic anti-resonance: LMI certificates, SDE simulation and sector embeddings"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Globals g;
  std::string out = ".";
  std::uint64_t seed = 0;
  int window = 0;
  std::string config, sigma, nu_grid, noise_mode;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");
  auto* config_opt = app.add_option("--config", config, "JSON config or a manifest to replay");
  app.add_option("--out", out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  auto* sigma_opt = app.add_option("--sigma", sigma, "Noise level or sweep range a:b:step");
  auto* nu_opt = app.add_option("--nu-grid", nu_grid, "nu grid a:b:step");
  auto* window_opt = app.add_option("--filter-window", window, "Odd moving-average window (samples)");
  auto* noise_opt = app.add_option("--noise-mode", noise_mode, "Morris-Lecar noise mode")
                        ->check(CLI::IsMember({"none", "state", "current", "voltage"}));
  app.fallthrough();

  auto* sim = app.add_subcommand("simulate", "Simulate a Morris-Lecar or Lur'e config");
  auto* approx = app.add_subcommand("approximate", "Train the channel nets and build the sector embedding");
  std::string system_file;
  auto* cert = app.add_subcommand("certify", "Certify mean-square stability of a system file");
  cert->add_option("system", system_file, "System JSON")->required();
  auto* sweep = app.add_subcommand("sweep", "Certify over a sigma range");
  sweep->add_option("system", system_file, "System JSON")->required();
  std::string figure;
  auto* repro = app.add_subcommand("reproduce", "Regenerate the artifacts of one figure");
  repro->add_option("figure", figure, "fig3|fig4|fig5")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  g.out = out;
  if (*seed_opt) g.seed = seed;
  if (*config_opt) g.config = config;
  if (*sigma_opt) g.sigma = sigma;
  if (*nu_opt) g.nu_grid = nu_grid;
  if (*window_opt) g.filter_window = window;
  if (*noise_opt) g.noise_mode = noise_mode;

  try {
    if (*sim) return cmd_simulate(g);
    if (*approx) return cmd_approximate(g);
    if (*cert) return cmd_certify(system_file, g);
    if (*sweep) return cmd_sweep(system_file, g);
    if (*repro) return cmd_reproduce(figure, g);
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace sar::cli
