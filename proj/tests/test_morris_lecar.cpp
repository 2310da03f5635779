#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sar/morris_lecar.hpp"

using namespace sar;
using namespace sar::ml;

namespace {

std::vector<double> col(const SdePath& p, Index c) {
  return {p.states.col(c).data(), p.states.col(c).data() + p.states.rows()};
}

// Plain bisection on dv/dt along the V nullcline, independent of equilibria().
double bisect_root(const Params& p, double lo, double hi) {
  auto g = [&](double v) {
    const double n = 0.5 * (1.0 + std::tanh((v - p.v3) / p.v4));
    return rhs(p, {v, n}).dv;
  };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((g(mid) > 0.0) == (g(lo) > 0.0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("gating values and limits") {
  const Params p;
  CHECK(gating(p, p.v1).m_ss == doctest::Approx(0.5));
  const Gating at_v3 = gating(p, p.v3);
  CHECK(at_v3.n_ss == doctest::Approx(0.5));
  CHECK(at_v3.tau_n == doctest::Approx(15.0));
  const Gating high = gating(p, 1e4);
  CHECK(high.m_ss == doctest::Approx(1.0));
  CHECK(high.n_ss == doctest::Approx(1.0));
  CHECK(high.tau_n < 1e-10);
  for (double v = -200.0; v <= 200.0; v += 0.5) {
    const Gating g = gating(p, v);
    CHECK(g.m_ss > 0.0);
    CHECK(g.m_ss < 1.0);
    CHECK(g.n_ss > 0.0);
    CHECK(g.n_ss < 1.0);
    CHECK(g.tau_n > 0.0);
  }
}

TEST_CASE("channel currents vanish at their reversal potentials") {
  const Params p;
  CHECK(channels(p, {p.v_leak, 0.3}).leak == 0.0);
  CHECK(channels(p, {p.v_ca, 0.3}).calcium == 0.0);
  CHECK(channels(p, {10.0, 0.0}).potassium == 0.0);
}

TEST_CASE("rhs sanity") {
  Params deg;
  deg.v_leak = deg.v_ca = deg.v_k = 7.0;
  CHECK(rhs(deg, {7.0, 0.4}).dv == 0.0);

  const Params p;
  const double v = 3.0;
  CHECK(rhs(p, {v, gating(p, v).n_ss - 0.1}).dn > 0.0);
  CHECK(rhs(p, {v, gating(p, v).n_ss + 0.1}).dn < 0.0);
}

TEST_CASE("jacobian matches central differences") {
  Params p;
  p.i_app = 40.0;
  for (const State s : {State{-50.0, 0.1}, State{5.0, 0.3}, State{40.0, 0.7}}) {
    const Matrix j = jacobian(p, s);
    const double h = 1e-6;
    const Derivative vp = rhs(p, {s.v + h, s.n_rec}), vm = rhs(p, {s.v - h, s.n_rec});
    const Derivative np = rhs(p, {s.v, s.n_rec + h}), nm = rhs(p, {s.v, s.n_rec - h});
    CHECK(j(0, 0) == doctest::Approx((vp.dv - vm.dv) / (2 * h)).epsilon(1e-6));
    CHECK(j(1, 0) == doctest::Approx((vp.dn - vm.dn) / (2 * h)).epsilon(1e-6));
    CHECK(j(0, 1) == doctest::Approx((np.dv - nm.dv) / (2 * h)).epsilon(1e-6));
    CHECK(j(1, 1) == doctest::Approx((np.dn - nm.dn) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("equilibrium is a root of the vector field") {
  Params p;
  p.i_app = 40.0;
  const auto eq = equilibria(p);
  REQUIRE(eq.size() == 1);
  const Derivative d = rhs(p, eq[0]);
  CHECK(std::abs(d.dv) < 1e-10);
  CHECK(std::abs(d.dn) < 1e-10);
  CHECK(eq[0].v == doctest::Approx(bisect_root(p, -100.0, 150.0)).epsilon(1e-10));
  // Unstable focus at the oscillating current.
  CHECK(jacobian(p, eq[0]).eigenvalues().real().maxCoeff() > 0.0);
}

TEST_CASE("sigma = 0 keeps the rest state") {
  const Params p;  // i_app = 0: stable rest
  const State rest = dominant_equilibrium(p);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 100.0;
  cfg.record_stride = 100;
  const SdePath path = simulate_ml(p, rest, cfg, Noise{});
  double worst = 0.0;
  for (Index i = 0; i < path.states.rows(); ++i)
    worst = std::max(worst, std::hypot(path.states(i, 0) - rest.v, path.states(i, 1) - rest.n_rec));
  CHECK(worst < 1e-6);
}

TEST_CASE("zero current converges to rest") {
  const Params p;
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 500.0;
  const SdePath path = simulate_ml(p, default_initial_state(), cfg, Noise{});
  CHECK(oscillation_stats(path.times, col(path, 0), 400.0, 500.0).peak_to_peak < 1.0);
}

TEST_CASE("sigma = 0 is bit-identical to no noise") {
  Params p;
  p.i_app = 40.0;
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 50.0;
  const SdePath none = simulate_ml(p, default_initial_state(), cfg, Noise{});
  for (NoiseMode m : {NoiseMode::kState, NoiseMode::kCurrent, NoiseMode::kVoltage}) {
    Noise n;
    n.mode = m;
    n.sigma = 0.0;
    CHECK(simulate_ml(p, default_initial_state(), cfg, n).states == none.states);
  }
}

TEST_CASE("halving dt changes the deterministic trajectory little") {
  Params p;
  p.i_app = 40.0;
  SimConfig coarse;
  coarse.dt = 1e-3;
  coarse.t_end = 100.0;
  coarse.record_stride = 100;
  SimConfig fine = coarse;
  fine.dt = 5e-4;
  fine.record_stride = 200;
  const SdePath a = simulate_ml(p, default_initial_state(), coarse, Noise{});
  const SdePath b = simulate_ml(p, default_initial_state(), fine, Noise{});
  REQUIRE(a.states.rows() == b.states.rows());
  const Index last = a.states.rows() - 1;
  CHECK((a.states.row(last) - b.states.row(last)).norm() / b.states.row(last).norm() < 1e-3);
}

TEST_CASE("noisy ensembles are deterministic and diverge per path") {
  Params p;
  p.i_app = 40.0;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 20.0;
  cfg.n_paths = 3;
  Noise n;
  n.mode = NoiseMode::kState;
  n.sigma = 0.85;
  n.center = dominant_equilibrium(p);
  const auto a = simulate_ml_ensemble(p, default_initial_state(), cfg, n, 1);
  const auto b = simulate_ml_ensemble(p, default_initial_state(), cfg, n, 2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].states == b[i].states);
  CHECK(a[0].states != a[1].states);
}

TEST_CASE("noise mode names") {
  CHECK(parse_noise_mode("state") == NoiseMode::kState);
  CHECK(parse_noise_mode("current") == NoiseMode::kCurrent);
  CHECK(to_string(NoiseMode::kVoltage) == "voltage");
  CHECK_THROWS_AS(parse_noise_mode("loud"), Error);
}

TEST_CASE("oscillation_stats counts upward crossings") {
  std::vector<double> t, v;
  for (int i = 0; i <= 1000; ++i) {
    t.push_back(i * 0.01);
    v.push_back(50.0 * std::sin(2.0 * M_PI * t.back()) - 10.0);
  }
  const auto s = oscillation_stats(t, v, 0.0, 10.0);
  CHECK(s.spikes == 10);
  CHECK(s.peak_to_peak == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(oscillation_stats(t, v, 0.0, 2.2).spikes == 3);
  CHECK(oscillation_stats(t, v, 0.05, 2.0).spikes == 1);
}

TEST_CASE("calibration picks the smallest oscillating current") {
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.t_end = 500.0;
  const Calibration cal = calibrate_i_app(Params{}, default_initial_state(), cfg, 0.0, 300.0, 5.0);
  REQUIRE(cal.found);
  CHECK(cal.i_app == 40.0);
  CHECK(cal.scan.back().whole.spikes >= 3);
  for (std::size_t i = 0; i + 1 < cal.scan.size(); ++i) CHECK_FALSE(cal.scan[i].sustained);
}

TEST_CASE("training set") {
  const Params p;
  CHECK(make_training_set(p, Box{}, 0, 1).size() == 0);

  const Dataset d = make_training_set(p, Box{}, 500, 3);
  for (Index i = 0; i < d.size(); ++i) {
    const Channels c = channels(p, {d.x(i, 0), d.x(i, 1)});
    CHECK(d.y(i, 0) == c.leak);
    CHECK(d.y(i, 1) == c.calcium);
    CHECK(d.y(i, 2) == c.potassium);
    CHECK(d.x(i, 0) >= -80.0);
    CHECK(d.x(i, 0) <= 120.0);
  }
  const Dataset pt = make_training_set(p, Box{10.0, 10.0, 0.5, 0.5}, 20, 3);
  for (Index i = 1; i < pt.size(); ++i) CHECK(pt.y.row(i) == pt.y.row(0));
  CHECK(make_training_set(p, Box{}, 500, 3).x == d.x);
}

TEST_CASE("small approximation: bookkeeping and round trip") {
  Params p;
  p.i_app = 40.0;
  ApproxOptions o;
  o.width = 1;
  o.n_samples = 500;
  o.train.epochs = 200;
  o.offset_tol = 1e-3;
  const Approximation ap = approximate(p, o);
  CHECK(ap.embedding.system.states() == 3);
  CHECK(ap.embedding.n_phys == 2);
  CHECK(ap.embedding.p == 1);
  CHECK(ap.embedding.f_phys.rows() == 2);
  CHECK(ap.embedding.f_phys.cols() == 3);
  const State s{-30.0, 0.2};
  const State back = ap.from_embedded(ap.to_embedded(s));
  CHECK(back.v == doctest::Approx(s.v).epsilon(1e-12));
  CHECK(back.n_rec == doctest::Approx(s.n_rec).epsilon(1e-12));
  CHECK(ap.embedding.offset.norm() < 1e-9);
}
