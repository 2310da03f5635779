#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/morris_lecar.hpp"
#include "sar/stability_cert.hpp"

namespace sar::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInfeasible = 1, kUsage = 2, kDivergence = 3, kTrainingFailure = 4 };

// Errors carrying their exit code.
struct CommandError : std::runtime_error {
  CommandError(ExitCode c, const std::string& what) : std::runtime_error(what), code(c) {}
  ExitCode code;
};

// Flags shared by every command. Unset optionals leave the config alone.
struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";
  unsigned jobs = 1;
  std::optional<std::string> sigma;
  std::optional<std::string> nu_grid;
  std::optional<int> filter_window;
  std::optional<std::string> noise_mode;
};

// "a:b:step" -> a, a+step, ..., <= b. Throws CommandError(kUsage) on an
// empty or malformed range.
std::vector<double> parse_range(const std::string& spec);

// Defaults for a command ("simulate", "approximate", "certify", "sweep",
// "fig3", "fig4", "fig5"), overlaid with the --config file (a manifest's
// "config" is unwrapped) and then the flags.
json resolve_config(const std::string& command, const Globals& g);

ml::Params ml_params(const json& cfg);
ml::State ml_initial_state(const json& cfg);
SimConfig sim_config(const json& cfg);
ml::ApproxOptions approx_options(const json& cfg);
SolverOptions solver_options(const json& cfg, unsigned jobs);

// i_app from the config, or from the calibration scan when absent.
struct Calibrated {
  ml::Params params;
  bool scanned = false;
  ml::Calibration scan;
};
Calibrated calibrated_params(const json& cfg);

// ---- figure pipelines (shared by reproduce and the acceptance suite) ----

struct Fig4Row {
  double sigma = 0.0;
  std::size_t path = 0;
  double p2p_raw = 0.0;
  double p2p_filtered = 0.0;
  bool diverged = false;
};

struct Fig4Result {
  Calibrated cal;
  std::vector<double> sigmas;
  std::vector<Fig4Row> rows;
  std::vector<SdePath> first_paths;            // path 0 per sigma
  std::vector<std::vector<double>> v_filt;     // per sigma, path 0
  std::vector<std::vector<double>> n_filt;
  std::vector<double> median_p2p;              // per sigma, filtered V over the window
};
Fig4Result run_fig4(const json& cfg, unsigned jobs);

struct Fig5Result {
  Calibrated cal;
  ml::Approximation approx;
  std::vector<SweepPoint> sweep;
  Certificate at_check;  // certificate at fig5.check_sigma
};
Fig5Result run_fig5(const json& cfg, unsigned jobs);

// Commands return an exit code and write under g.out.
int cmd_simulate(const Globals& g);
int cmd_approximate(const Globals& g);
int cmd_certify(const std::filesystem::path& system_file, const Globals& g);
int cmd_sweep(const std::filesystem::path& system_file, const Globals& g);
int cmd_reproduce(const std::string& figure, const Globals& g);

// Full command line entry point; maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace sar::cli
