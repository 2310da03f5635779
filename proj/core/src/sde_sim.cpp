#include "sar/sde_sim.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace sar {

void check(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw Error("SimConfig: dt must be positive");
  if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) throw Error("SimConfig: t_end must be positive");
  if (cfg.dt > cfg.t_end) throw Error("SimConfig: dt exceeds t_end");
  if (cfg.n_paths < 1) throw Error("SimConfig: n_paths must be >= 1");
  if (cfg.record_stride < 1) throw Error("SimConfig: record_stride must be >= 1");
}

std::uint64_t step_count(const SimConfig& cfg) {
  // Tolerate t_end/dt landing a hair under an integer.
  return static_cast<std::uint64_t>(std::floor(cfg.t_end / cfg.dt * (1.0 + 1e-12)));
}

std::size_t recorded_samples(const SimConfig& cfg) { return step_count(cfg) / cfg.record_stride + 1; }

WienerIncrements::WienerIncrements(std::uint64_t seed, std::uint64_t path_index, double dt)
    : normals_(seed, path_index), sqrt_dt_(std::sqrt(dt)) {}

Vector em_step(const Vector& x, const LureSystem& sys, double dt, double dw) {
  if (!(dt > 0.0)) throw Error("em_step: dt must be positive");
  Vector next = x + sys.drift(x) * dt;
  if (sys.sigma != 0.0) next.noalias() += (sys.sigma * dw) * x;
  return next;
}

SdePath simulate(const LureSystem& sys, const Vector& x0, const SimConfig& cfg, std::uint64_t path_index) {
  check(cfg);
  if (x0.size() != sys.states()) throw Error("simulate: x0 has wrong dimension");
  const std::uint64_t steps = step_count(cfg);
  const std::size_t samples = recorded_samples(cfg);
  const double record_dt = cfg.dt * static_cast<double>(cfg.record_stride);

  SdePath path;
  path.seed = cfg.seed;
  path.path_index = path_index;
  path.sigma = sys.sigma;
  path.times.reserve(samples);
  path.states.resize(static_cast<Index>(samples), sys.states());

  const WienerIncrements dw(cfg.seed, path_index, cfg.dt);
  Vector x = x0;
  std::size_t row = 0;
  for (std::uint64_t k = 0;; ++k) {
    if (k % cfg.record_stride == 0) {
      path.times.push_back(static_cast<double>(row) * record_dt);
      path.states.row(static_cast<Index>(row)) = x.transpose();
      ++row;
    }
    if (k == steps) break;
    x = em_step(x, sys, cfg.dt, sys.sigma != 0.0 ? dw(k) : 0.0);
    if (!x.allFinite()) {
      path.diverged = true;
      path.diverged_at = static_cast<double>(k + 1) * cfg.dt;
      break;
    }
  }
  path.states.conservativeResize(static_cast<Index>(row), Eigen::NoChange);
  return path;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<SdePath> simulate_ensemble(const LureSystem& sys, const Vector& x0, const SimConfig& cfg, unsigned jobs) {
  check(cfg);
  std::vector<SdePath> paths(cfg.n_paths);
  parallel_for(cfg.n_paths, jobs, [&](std::size_t i) { paths[i] = simulate(sys, x0, cfg, i); });
  return paths;
}

Moments ensemble_moments(std::span<const SdePath> paths, int order) {
  if (order != 1 && order != 2) throw Error("ensemble_moments: order must be 1 or 2");
  if (paths.empty()) throw Error("ensemble_moments: no paths");
  const auto& ref = paths.front();
  const Index samples = ref.states.rows();
  const Index n = ref.states.cols();
  for (const auto& p : paths) {
    if (p.states.rows() != samples || p.states.cols() != n || p.times != ref.times)
      throw Error("ensemble_moments: paths do not share a time grid");
  }
  const double count = static_cast<double>(paths.size());
  Moments m;
  m.times = ref.times;
  m.value = Matrix::Zero(samples, n);
  Matrix sq = Matrix::Zero(samples, n);
  for (const auto& p : paths) {
    const Matrix v = order == 1 ? p.states : p.states.cwiseAbs2().eval();
    m.value += v;
    sq += v.cwiseAbs2();
  }
  m.value /= count;
  m.std_err = Matrix::Zero(samples, n);
  if (paths.size() > 1) {
    // Unbiased sample variance, clamped at 0 against cancellation.
    const Matrix var = ((sq / count - m.value.cwiseAbs2()) * (count / (count - 1.0))).cwiseMax(0.0);
    m.std_err = (var / count).cwiseSqrt();
  }
  return m;
}

std::vector<double> lowpass(std::span<const double> signal, std::size_t window) {
  if (window < 1 || window % 2 == 0) throw Error("lowpass: window must be odd and >= 1");
  const std::size_t len = signal.size();
  if (window > 2 * len) throw Error("lowpass: window larger than twice the signal length");
  if (window == 1) return {signal.begin(), signal.end()};
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(len);
  auto reflect = [n](std::ptrdiff_t i) -> std::ptrdiff_t {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  std::vector<double> out(len);
  const double inv = 1.0 / static_cast<double>(window);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) acc += signal[static_cast<std::size_t>(reflect(i + k))];
    out[static_cast<std::size_t>(i)] = acc * inv;
  }
  return out;
}

}  // namespace sar
