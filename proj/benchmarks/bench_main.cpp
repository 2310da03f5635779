#include <benchmark/benchmark.h>

#include <cmath>

#include "sar/morris_lecar.hpp"
#include "sar/philox.hpp"
#include "sar/sde_sim.hpp"
#include "sar/shallow_net.hpp"
#include "sar/stability_cert.hpp"

using namespace sar;

namespace {

LureSystem damped_chain(Index n, double sigma) {
  LureSystem sys;
  sys.a = -2.0 * Matrix::Identity(n, n);
  for (Index i = 0; i + 1 < n; ++i) sys.a(i, i + 1) = 0.5;
  sys.f_gain = 0.3 * Matrix::Identity(n, n);
  sys.c = Matrix::Identity(n, n);
  sys.sigma = sigma;
  sys.sector_slopes = Vector::Ones(n);
  sys.deriv_bounds = Vector::Ones(n);
  sys.nonlinearity_name = "tanh_bank";
  bind_nonlinearity(sys);
  return sys;
}

void BM_Philox(benchmark::State& state) {
  const NormalStream s(7, 0);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s(i++));
}
BENCHMARK(BM_Philox);

void BM_LambdaMax(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix m = Matrix::Random(n, n);
  const Matrix sym = m + m.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(lambda_max(sym));
}
BENCHMARK(BM_LambdaMax)->Arg(4)->Arg(16)->Arg(64);

void BM_CertifyScalar(benchmark::State& state) {
  const LureSystem sys = damped_chain(1, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(certify({sys, {}}).margin);
}
BENCHMARK(BM_CertifyScalar)->Unit(benchmark::kMillisecond);

void BM_CertifyAtChain(benchmark::State& state) {
  const LureSystem sys = damped_chain(state.range(0), 0.5);
  SolverOptions o;
  o.restarts = 0;
  o.max_iterations = 300;
  for (auto _ : state) benchmark::DoNotOptimize(certify_at(sys, 0.5, o).margin);
}
BENCHMARK(BM_CertifyAtChain)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SimulateEnsemble(benchmark::State& state) {
  const LureSystem sys = damped_chain(4, 0.5);
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 1.0;
  cfg.n_paths = static_cast<std::size_t>(state.range(0));
  cfg.record_stride = 100;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_ensemble(sys, Vector::Ones(4), cfg).size());
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_SimulateEnsemble)->Arg(16)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SimulateMorrisLecar(benchmark::State& state) {
  ml::Params p;
  p.i_app = 40.0;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 100.0;
  cfg.record_stride = 10;
  const ml::Noise noise{ml::NoiseMode::kState, 0.85, ml::dominant_equilibrium(p)};
  for (auto _ : state)
    benchmark::DoNotOptimize(ml::simulate_ml(p, ml::default_initial_state(), cfg, noise).states.rows());
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_SimulateMorrisLecar)->Unit(benchmark::kMillisecond);

void BM_TrainEpochs(benchmark::State& state) {
  const UniformStream u(3, 0);
  Dataset data{Matrix(1024, 2), Matrix(1024, 1)};
  for (Index i = 0; i < 1024; ++i) {
    data.x(i, 0) = 2.0 * u(2 * i) - 1.0;
    data.x(i, 1) = 2.0 * u(2 * i + 1) - 1.0;
    data.y(i, 0) = std::tanh(2.0 * data.x(i, 0)) * data.x(i, 1);
  }
  TrainOptions o;
  o.epochs = 10;
  o.history_every = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, state.range(0), o).rmse);
}
BENCHMARK(BM_TrainEpochs)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
