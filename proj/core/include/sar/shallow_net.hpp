#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sar/lure_model.hpp"
#include "sar/types.hpp"

namespace sar {

// y = w2 tanh(w1 x + b1) + b2
struct ShallowNet {
  Matrix w1;  // h x d
  Vector b1;  // h
  Matrix w2;  // q x h
  Vector b2;  // q

  Index inputs() const { return w1.cols(); }
  Index hidden() const { return w1.rows(); }
  Index outputs() const { return w2.rows(); }
  void check() const;
};

Vector forward(const ShallowNet& net, const Vector& x);
// Batched forward: x is samples x d, result samples x q.
Matrix forward_batch(const ShallowNet& net, const Matrix& x);

struct Dataset {
  Matrix x;  // samples x d
  Matrix y;  // samples x q
  Index size() const { return x.rows(); }
};

// Parameter-shaped gradient of the mean squared error.
struct NetGradient {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Loss is mean over samples of ||net(x) - y||^2 / q.
double mse_loss(const ShallowNet& net, const Dataset& data);
double loss_and_gradient(const ShallowNet& net, const Dataset& data, NetGradient& grad);

struct TrainOptions {
  std::size_t epochs = 3000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double decay = 1e-3;  // lr_e = learning_rate / (1 + decay * e)
  std::uint64_t seed = 1;
  bool standardize_targets = true;  // train on z-scored targets, fold scale back into w2/b2
  std::size_t history_every = 10;
};

struct TrainResult {
  ShallowNet net;
  std::vector<double> loss_history;  // full-data MSE every history_every epochs
  double rmse = 0.0;                 // final training RMSE in target units
  bool diverged = false;
  std::vector<std::string> warnings;
};

// Mini-batch gradient descent with momentum, deterministic given seed.
TrainResult train(const Dataset& data, Index width, const TrainOptions& opts = {});

// Uniform +-1/sqrt(fan_in) initialization.
ShallowNet init_net(Index inputs, Index width, Index outputs, std::uint64_t seed);

// One hidden unit in sector form: g(u) = tanh(slope u + bias) - tanh(bias)
// on u = direction . x, with 0 <= u g(u) <= slope u^2 and |g'| <= slope.
struct UnitBound {
  Vector direction;  // unit-norm row of w1
  double slope = 0.0;
  double deriv_bound = 0.0;
  double bias = 0.0;
  Index unit = 0;  // index into the net's hidden layer
};

struct BoundsResult {
  std::vector<UnitBound> units;   // nonzero rows only
  std::vector<Index> pruned;      // zero rows of w1
  Vector constant;                // q: b2 + sum_j w2_j tanh(b_j) over all units
};

BoundsResult extract_bounds(const ShallowNet& net);

double unit_nonlinearity(const UnitBound& unit, double u);

struct EmbedOptions {
  double kappa = 1.0;
  double offset_tol = 1e-3;
  bool enforce_offset = true;
};

// Net outputs enter the state equations through combiners: dx/dt gets
// combiners[c] * net_c(x) for each net.
struct SectorEmbedding {
  LureSystem system;       // augmented, square; nonlinearity "tanh_units"
  Matrix c_rows;           // h_total x n_phys
  Vector slopes;           // h_total
  Vector dbounds;          // h_total
  Vector unit_bias;        // h_total
  Vector offset;           // n_phys: constant residue of the model at the origin
  Matrix f_phys;           // n_phys x h_total
  Matrix linear_part;      // n_phys x n_phys
  double kappa = 1.0;
  Index n_phys = 0;
  Index p = 0;
};

SectorEmbedding embed(const Matrix& linear_part, const std::vector<ShallowNet>& nets,
                      const std::vector<Matrix>& combiners, const Vector& drive, const EmbedOptions& opts = {});

// dx/dt of the model the embedding represents (physical coordinates).
Vector model_rhs(const Matrix& linear_part, const std::vector<ShallowNet>& nets, const std::vector<Matrix>& combiners,
                 const Vector& drive, const Vector& x);

struct ResidualReport {
  Vector max_abs;  // per output
  Vector rms;      // per output
  Vector range;    // per output, max - min of the reference over the samples
};

using VectorField = std::function<Vector(const Vector&)>;

// Monte-Carlo residual of the stacked net outputs against reference(x) over
// the box [lo, hi].
ResidualReport approx_residual(const std::vector<ShallowNet>& nets, const VectorField& reference, const Vector& lo,
                               const Vector& hi, std::size_t n_samples, std::uint64_t seed);

}  // namespace sar
