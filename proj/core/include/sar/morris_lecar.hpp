#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sar/sde_sim.hpp"
#include "sar/shallow_net.hpp"
#include "sar/types.hpp"

namespace sar::ml {

// Conductance-based Morris-Lecar neuron. i_app and v2 are not part of the
// published parameter list; i_app comes from calibrate_i_app and v2 defaults
// to the conventional 18 mV.
struct Params {
  double cap = 5.0;
  double v1 = -1.2;
  double v2 = 18.0;
  double v3 = 12.0;
  double v4 = 17.4;
  double phi = 1.0 / 15.0;
  double v_leak = -60.0;
  double v_ca = 120.0;
  double v_k = -80.0;
  double g_leak = 2.0;
  double g_ca = 4.0;
  double g_k = 8.0;
  double i_app = 0.0;

  void check() const;
};

struct State {
  double v = -52.14;   // membrane voltage, mV
  double n_rec = 0.02; // K+ channel open probability
};

inline State default_initial_state() { return {-52.14, 0.02}; }

struct Gating {
  double m_ss;
  double n_ss;
  double tau_n;
};
Gating gating(const Params& p, double v);

struct Channels {
  double leak;
  double calcium;
  double potassium;
};
Channels channels(const Params& p, const State& s);

struct Derivative {
  double dv;
  double dn;
};
Derivative rhs(const Params& p, const State& s);

// 2x2 Jacobian of rhs with respect to (v, n_rec).
Matrix jacobian(const Params& p, const State& s);

// Equilibria in [v_lo, v_hi]: roots of dv/dt along the nullcline n = n_ss(v).
std::vector<State> equilibria(const Params& p, double v_lo = -100.0, double v_hi = 150.0);
// The equilibrium with the largest linearized growth rate (the one a limit
// cycle surrounds, if any).
State dominant_equilibrium(const Params& p);

// How noise enters the integration. kState is D = sigma I on the deviation
// from `center` (both states); kVoltage is sigma V dW / cap on V;
// kCurrent is sigma i_app dW / cap on V.
enum class NoiseMode { kNone, kState, kCurrent, kVoltage };
NoiseMode parse_noise_mode(const std::string& name);
std::string to_string(NoiseMode mode);

struct Noise {
  NoiseMode mode = NoiseMode::kNone;
  double sigma = 0.0;
  State center{};
};

// Euler-Maruyama on V with exponential Euler on the gating variable; paths
// have columns (V, N).
SdePath simulate_ml(const Params& p, const State& s0, const SimConfig& cfg, const Noise& noise,
                    std::uint64_t path_index = 0);
std::vector<SdePath> simulate_ml_ensemble(const Params& p, const State& s0, const SimConfig& cfg, const Noise& noise,
                                          unsigned jobs = 1);

struct OscillationStats {
  int spikes = 0;             // upward crossings of the threshold
  double peak_to_peak = 0.0;
};
OscillationStats oscillation_stats(std::span<const double> times, std::span<const double> v, double t0, double t1,
                                   double threshold = 0.0);

struct CalibrationPoint {
  double i_app;
  OscillationStats whole;
  OscillationStats tail;
  bool sustained;
};

struct Calibration {
  double i_app = 0.0;
  bool found = false;
  std::vector<CalibrationPoint> scan;
};

// Smallest i_app on [lo, hi] (step) whose sigma = 0 run from s0 shows >= 3
// spikes over [0, t_end] and keeps spiking with > 40 mV peak-to-peak over
// the second half.
Calibration calibrate_i_app(Params p, const State& s0, const SimConfig& cfg, double lo = 0.0, double hi = 300.0,
                            double step = 5.0);

struct Box {
  double v_lo = -80.0;
  double v_hi = 120.0;
  double n_lo = 0.0;
  double n_hi = 1.0;
};

// Uniform (V, N) samples with exact channel targets (L, Ca, K).
Dataset make_training_set(const Params& p, const Box& box, std::size_t n_samples, std::uint64_t seed);

// ---- shallow-net approximation and sector embedding ----

struct ApproxOptions {
  Index width = 10;
  std::size_t n_samples = 10000;
  Box box{};
  TrainOptions train{};
  double v_scale = 100.0;  // normalized coordinate u_V = (V - V*) / v_scale
  double n_scale = 0.5;    // u_N = (N - N*) / n_scale
  double readout_ridge = 1e-9;
  double kappa = 1.0;
  double offset_tol = 1e-3;
  std::uint64_t seed = 1;
};

struct Approximation {
  Params params;
  State equilibrium;  // true equilibrium used as the coordinate origin
  State center;       // equilibrium of the net model (origin of the embedding)
  double v_scale = 100.0;
  double n_scale = 0.5;
  Vector center_u;    // center in normalized coordinates

  std::vector<ShallowNet> channel_nets;  // L, Ca, K on normalized inputs
  std::vector<TrainResult> training;
  ResidualReport residual;               // channel nets vs exact channels over the box
  double readout_rms = 0.0;              // dN/dt readout fit (normalized units)
  double readout_range = 0.0;

  // Centred model handed to embed(): x = u - center_u.
  std::vector<ShallowNet> dynamics_nets;
  std::vector<Matrix> combiners;
  Matrix linear_part;
  Vector drive;
  SectorEmbedding embedding;

  // Physical state <-> embedded state (fictitious states zero).
  Vector to_embedded(const State& s) const;
  State from_embedded(const Vector& x) const;
};

// Trains one net per channel current, fits dN/dt as a readout over the same
// hidden units, recentres at the model equilibrium and embeds.
Approximation approximate(const Params& p, const ApproxOptions& opts);

}  // namespace sar::ml
