#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sar/sde_sim.hpp"

using namespace sar;

namespace {

LureSystem scalar(double a, double sigma) {
  LureSystem sys;
  sys.a = Matrix::Constant(1, 1, a);
  sys.f_gain = Matrix::Zero(1, 1);
  sys.c = Matrix::Identity(1, 1);
  sys.sigma = sigma;
  sys.sector_slopes = Vector::Ones(1);
  sys.deriv_bounds = Vector::Ones(1);
  bind_nonlinearity(sys);
  return sys;
}

}  // namespace

TEST_CASE("em_step hand values") {
  CHECK(em_step(Vector::Ones(1), scalar(-1.0, 0.0), 0.1, 0.0)[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(em_step(Vector::Ones(1), scalar(0.0, 1.0), 0.37, 0.5)[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(em_step(Vector::Zero(1), scalar(2.0, 3.0), 0.1, 0.9)[0] == 0.0);
}

TEST_CASE("SimConfig bookkeeping") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.record_stride = 10;
  CHECK(step_count(cfg) == 1000);
  CHECK(recorded_samples(cfg) == 101);
  cfg.dt = 0.0;
  CHECK_THROWS_AS(check(cfg), Error);
  cfg.dt = 2.0;
  CHECK_THROWS_AS(check(cfg), Error);
}

TEST_CASE("sigma = 0 matches the exponential within O(dt)") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  const SdePath p = simulate(scalar(-1.0, 0.0), Vector::Ones(1), cfg);
  CHECK(p.states.rows() == static_cast<Index>(p.times.size()));
  CHECK(std::abs(p.states(p.states.rows() - 1, 0) / std::exp(-1.0) - 1.0) < 1e-2);

  SimConfig other = cfg;
  other.seed = 99;
  CHECK(simulate(scalar(-1.0, 0.0), Vector::Ones(1), other).states == p.states);
}

TEST_CASE("recorded times are uniform") {
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 1.0;
  cfg.record_stride = 7;
  const SdePath p = simulate(scalar(-1.0, 0.2), Vector::Ones(1), cfg);
  REQUIRE(p.times.size() == recorded_samples(cfg));
  for (std::size_t i = 1; i < p.times.size(); ++i)
    CHECK(p.times[i] - p.times[i - 1] == doctest::Approx(0.07).epsilon(1e-12));
}

TEST_CASE("same seed is bit-identical; jobs do not matter") {
  SimConfig cfg;
  cfg.t_end = 0.5;
  cfg.n_paths = 6;
  cfg.seed = 5;
  const auto sys = scalar(0.1, 1.0);
  const auto one = simulate_ensemble(sys, Vector::Ones(1), cfg, 1);
  const auto three = simulate_ensemble(sys, Vector::Ones(1), cfg, 3);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].states == three[i].states);
  CHECK(one[0].states != one[1].states);
}

TEST_CASE("doubling x0 doubles the path when F = 0") {
  SimConfig cfg;
  cfg.t_end = 0.5;
  const auto sys = scalar(0.3, 0.8);
  const auto a = simulate(sys, Vector::Ones(1), cfg);
  const auto b = simulate(sys, Vector::Constant(1, 2.0), cfg);
  CHECK((b.states - 2.0 * a.states).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Wiener increments have variance dt") {
  const double dt = 1e-3;
  const WienerIncrements w(11, 0, dt);
  constexpr int kN = 200000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < kN; ++k) {
    const double d = w(static_cast<std::uint64_t>(k));
    sum += d;
    sq += d * d;
  }
  const double mean = sum / kN;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / kN));
  CHECK(std::abs((sq / kN - mean * mean) / dt - 1.0) < 0.05);
}

TEST_CASE("GBM pathwise decay: median |x(10)| < |x0|") {
  // Lyapunov exponent a - sigma^2/2 = -0.4 < 0 although E[x^2] grows.
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 10.0;
  cfg.n_paths = 201;
  cfg.record_stride = 1000;
  const auto paths = simulate_ensemble(scalar(0.1, 1.0), Vector::Ones(1), cfg);
  std::vector<double> last;
  for (const auto& p : paths) last.push_back(std::abs(p.states(p.states.rows() - 1, 0)));
  std::nth_element(last.begin(), last.begin() + 100, last.end());
  CHECK(last[100] < 1.0);
}

TEST_CASE("GBM mean oracle E[x] = x0 exp(a t)") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.n_paths = 2000;
  cfg.record_stride = 100;
  const auto paths = simulate_ensemble(scalar(0.5, 0.5), Vector::Ones(1), cfg);
  const Moments m = ensemble_moments(paths, 1);
  for (std::size_t i = 0; i < m.times.size(); ++i) {
    const auto r = static_cast<Index>(i);
    CHECK(std::abs(m.value(r, 0) - std::exp(0.5 * m.times[i])) < 4.0 * m.std_err(r, 0) + 1e-12);
  }
}

TEST_CASE("ensemble moments") {
  SdePath p;
  p.times = {0.0, 1.0};
  p.states = Matrix{{1.0}, {2.0}};
  SdePath q = p;
  q.states = -p.states;

  const std::vector<SdePath> same{p, p, p};
  const Moments m = ensemble_moments(same, 1);
  CHECK(m.value == p.states);
  CHECK(m.std_err.isZero(0));

  const std::vector<SdePath> sym{p, q};
  CHECK(ensemble_moments(sym, 1).value.isZero(0));
  CHECK(ensemble_moments(sym, 2).value == p.states.cwiseAbs2());

  SdePath short_path = p;
  short_path.times = {0.0};
  short_path.states = Matrix{{1.0}};
  const std::vector<SdePath> bad{p, short_path};
  CHECK_THROWS_AS(ensemble_moments(bad, 1), Error);
}

TEST_CASE("lowpass") {
  const std::vector<double> flat(20, 3.5);
  for (double v : lowpass(flat, 7)) CHECK(v == doctest::Approx(3.5).epsilon(1e-15));

  std::vector<double> impulse(11, 0.0);
  impulse[5] = 1.0;
  const auto out = lowpass(impulse, 5);
  for (int i = 3; i <= 7; ++i) CHECK(out[i] == doctest::Approx(0.2));
  CHECK(out[2] == 0.0);
  CHECK(out[8] == 0.0);

  const std::vector<double> ramp{1, 2, 4, 8};
  CHECK(lowpass(ramp, 1) == ramp);
  CHECK_THROWS_AS(lowpass(ramp, 4), Error);
}

TEST_CASE("non-finite state flags divergence") {
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.t_end = 1000.0;
  const SdePath p = simulate(scalar(50.0, 0.0), Vector::Ones(1), cfg);
  CHECK(p.diverged);
  CHECK(p.diverged_at > 0.0);
  CHECK(p.states.rows() == static_cast<Index>(p.times.size()));
}
