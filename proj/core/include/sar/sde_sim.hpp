#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sar/lure_model.hpp"
#include "sar/philox.hpp"
#include "sar/types.hpp"

namespace sar {

struct SimConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  std::uint64_t seed = 1;
  std::size_t n_paths = 1;
  std::size_t record_stride = 10;
};

void check(const SimConfig& cfg);
std::uint64_t step_count(const SimConfig& cfg);
std::size_t recorded_samples(const SimConfig& cfg);

struct SdePath {
  std::vector<double> times;
  Matrix states;  // samples x n
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  double sigma = 0.0;
  bool diverged = false;
  double diverged_at = 0.0;  // time of the first non-finite state, if any
};

// Wiener increments dW_k ~ N(0, dt) for one path; increment(k) depends only
// on (seed, path_index, k).
class WienerIncrements {
 public:
  WienerIncrements(std::uint64_t seed, std::uint64_t path_index, double dt);
  double operator()(std::uint64_t step) const { return sqrt_dt_ * normals_(step); }

 private:
  NormalStream normals_;
  double sqrt_dt_;
};

// x + (A x + F f(Cx)) dt + sigma x dW  (Ito, D = sigma I)
Vector em_step(const Vector& x, const LureSystem& sys, double dt, double dw);

SdePath simulate(const LureSystem& sys, const Vector& x0, const SimConfig& cfg, std::uint64_t path_index = 0);

// cfg.n_paths independent paths; path i uses stream (cfg.seed, i). Results
// do not depend on jobs.
std::vector<SdePath> simulate_ensemble(const LureSystem& sys, const Vector& x0, const SimConfig& cfg,
                                       unsigned jobs = 1);

struct Moments {
  std::vector<double> times;
  Matrix value;    // samples x n
  Matrix std_err;  // samples x n
};

// order 1: mean of x; order 2: mean of x_i^2. Diverged paths must be
// filtered by the caller (their grids are truncated and are rejected here).
Moments ensemble_moments(std::span<const SdePath> paths, int order);

// Centered moving average with reflected boundaries; window odd.
std::vector<double> lowpass(std::span<const double> signal, std::size_t window);

// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sar
