#include "sar/shallow_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sar/philox.hpp"

namespace sar {

void ShallowNet::check() const {
  const Index h = w1.rows();
  if (b1.size() != h || w2.cols() != h || b2.size() != w2.rows())
    throw Error("ShallowNet: inconsistent layer shapes");
  if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
    throw Error("ShallowNet: non-finite weight");
}

Vector forward(const ShallowNet& net, const Vector& x) {
  if (x.size() != net.inputs()) throw Error("forward: input dimension mismatch");
  const Vector hidden = (net.w1 * x + net.b1).array().tanh().matrix();
  return net.w2 * hidden + net.b2;
}

Matrix forward_batch(const ShallowNet& net, const Matrix& x) {
  if (x.cols() != net.inputs()) throw Error("forward_batch: input dimension mismatch");
  const Matrix hidden = ((x * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh().matrix();
  return (hidden * net.w2.transpose()).rowwise() + net.b2.transpose();
}

namespace {

void check_data(const ShallowNet& net, const Dataset& data) {
  if (data.size() == 0) throw Error("no samples");
  if (data.x.cols() != net.inputs() || data.y.cols() != net.outputs() || data.y.rows() != data.x.rows())
    throw Error("dataset shape does not match the network");
}

// Rows [begin, begin+count) of a permutation-indexed batch, or the whole set.
double batch_gradient(const ShallowNet& net, const Matrix& x, const Matrix& y, NetGradient& g) {
  const double scale = 1.0 / static_cast<double>(x.rows() * y.cols());
  const Matrix hidden = ((x * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh().matrix();
  const Matrix err = ((hidden * net.w2.transpose()).rowwise() + net.b2.transpose()) - y;
  const Matrix dout = 2.0 * scale * err;
  g.w2 = dout.transpose() * hidden;
  g.b2 = dout.colwise().sum().transpose();
  const Matrix dz = ((dout * net.w2).array() * (1.0 - hidden.array().square())).matrix();
  g.w1 = dz.transpose() * x;
  g.b1 = dz.colwise().sum().transpose();
  return err.squaredNorm() * scale;
}

}  // namespace

double mse_loss(const ShallowNet& net, const Dataset& data) {
  check_data(net, data);
  const Matrix err = forward_batch(net, data.x) - data.y;
  return err.squaredNorm() / static_cast<double>(data.y.rows() * data.y.cols());
}

double loss_and_gradient(const ShallowNet& net, const Dataset& data, NetGradient& grad) {
  check_data(net, data);
  return batch_gradient(net, data.x, data.y, grad);
}

ShallowNet init_net(Index inputs, Index width, Index outputs, std::uint64_t seed) {
  if (inputs < 1 || width < 1 || outputs < 1) throw Error("init_net: dimensions must be positive");
  const UniformStream u(seed, 0);
  std::uint64_t i = 0;
  auto draw = [&](double bound) { return bound * (2.0 * u(i++) - 1.0); };
  ShallowNet net;
  const double b_in = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double b_hid = 1.0 / std::sqrt(static_cast<double>(width));
  net.w1 = Matrix::NullaryExpr(width, inputs, [&] { return draw(b_in); });
  net.b1 = Vector::NullaryExpr(width, [&] { return draw(b_in); });
  net.w2 = Matrix::NullaryExpr(outputs, width, [&] { return draw(b_hid); });
  net.b2 = Vector::NullaryExpr(outputs, [&] { return draw(b_hid); });
  return net;
}

TrainResult train(const Dataset& data, Index width, const TrainOptions& opts) {
  if (data.size() == 0) throw Error("train: no samples");
  if (width < 1) throw Error("train: width must be >= 1");
  if (data.y.rows() != data.x.rows()) throw Error("train: x and y sample counts differ");
  if (!data.x.allFinite() || !data.y.allFinite()) throw Error("train: non-finite sample");
  if (opts.batch_size < 1) throw Error("train: batch_size must be >= 1");

  TrainResult result;
  const Index n = data.size();
  const Index d = data.x.cols();
  const Index q = data.y.cols();
  if (n < 10 * width)
    result.warnings.push_back("only " + std::to_string(n) + " samples for width " + std::to_string(width) +
                              " (>= 10 per hidden unit recommended)");

  Vector mean = Vector::Zero(q);
  Vector scale = Vector::Ones(q);
  if (opts.standardize_targets) {
    mean = data.y.colwise().mean().transpose();
    for (Index k = 0; k < q; ++k) {
      const double sd = std::sqrt((data.y.col(k).array() - mean[k]).square().mean());
      scale[k] = sd > 0.0 ? sd : 1.0;
    }
  }
  const Matrix y_std = ((data.y.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();

  ShallowNet net = init_net(d, width, q, opts.seed);
  NetGradient vel{Matrix::Zero(width, d), Vector::Zero(width), Matrix::Zero(q, width), Vector::Zero(q)};
  NetGradient g;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const auto batch = static_cast<Index>(std::min<std::size_t>(opts.batch_size, static_cast<std::size_t>(n)));
  Matrix xb(batch, d);
  Matrix yb(batch, q);
  ShallowNet last_good = net;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fisher-Yates with a per-epoch Philox stream.
    const UniformStream shuffle(opts.seed, epoch + 1);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle(i) * static_cast<double>(i + 1));
      std::swap(order[i], order[std::min(j, i)]);
    }
    const double lr = opts.learning_rate / (1.0 + opts.decay * static_cast<double>(epoch));
    for (Index start = 0; start < n; start += batch) {
      const Index count = std::min(batch, n - start);
      for (Index r = 0; r < count; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = data.x.row(src);
        yb.row(r) = y_std.row(src);
      }
      batch_gradient(net, xb.topRows(count), yb.topRows(count), g);
      vel.w1 = opts.momentum * vel.w1 - lr * g.w1;
      vel.b1 = opts.momentum * vel.b1 - lr * g.b1;
      vel.w2 = opts.momentum * vel.w2 - lr * g.w2;
      vel.b2 = opts.momentum * vel.b2 - lr * g.b2;
      net.w1 += vel.w1;
      net.b1 += vel.b1;
      net.w2 += vel.w2;
      net.b2 += vel.b2;
    }
    const bool finite = net.w1.allFinite() && net.b1.allFinite() && net.w2.allFinite() && net.b2.allFinite();
    if (!finite) {
      result.diverged = true;
      net = last_good;
      break;
    }
    last_good = net;
    if (opts.history_every > 0 && (epoch % opts.history_every == 0 || epoch + 1 == opts.epochs)) {
      const double loss = mse_loss(net, Dataset{data.x, y_std});
      if (!std::isfinite(loss)) {
        result.diverged = true;
        break;
      }
      result.loss_history.push_back(loss);
    }
  }

  // Undo target standardization: y = scale * y_std + mean.
  net.w2 = scale.asDiagonal() * net.w2;
  net.b2 = scale.cwiseProduct(net.b2) + mean;
  result.net = std::move(net);
  result.rmse = std::sqrt(mse_loss(result.net, data));
  return result;
}

BoundsResult extract_bounds(const ShallowNet& net) {
  net.check();
  BoundsResult out;
  out.constant = net.b2;
  for (Index j = 0; j < net.hidden(); ++j) {
    const double b = net.b1[j];
    out.constant += net.w2.col(j) * std::tanh(b);
    const double norm = net.w1.row(j).norm();
    if (norm == 0.0) {
      // Constant unit: tanh(b) already sits in the constant; g = 0.
      out.pruned.push_back(j);
      continue;
    }
    UnitBound u;
    u.direction = net.w1.row(j).transpose() / norm;
    u.slope = norm;
    u.deriv_bound = norm;
    u.bias = b;
    u.unit = j;
    out.units.push_back(std::move(u));
  }
  return out;
}

double unit_nonlinearity(const UnitBound& unit, double u) {
  return std::tanh(unit.slope * u + unit.bias) - std::tanh(unit.bias);
}

Vector model_rhs(const Matrix& linear_part, const std::vector<ShallowNet>& nets, const std::vector<Matrix>& combiners,
                 const Vector& drive, const Vector& x) {
  if (nets.size() != combiners.size()) throw Error("model_rhs: one combiner per net required");
  Vector dx = linear_part * x + drive;
  for (std::size_t c = 0; c < nets.size(); ++c) dx.noalias() += combiners[c] * forward(nets[c], x);
  return dx;
}

SectorEmbedding embed(const Matrix& linear_part, const std::vector<ShallowNet>& nets,
                      const std::vector<Matrix>& combiners, const Vector& drive, const EmbedOptions& opts) {
  const Index n = linear_part.rows();
  if (linear_part.cols() != n) throw Error("embed: linear part must be square");
  if (nets.size() != combiners.size()) throw Error("embed: one combiner per net required");
  if (drive.size() != n) throw Error("embed: drive has wrong dimension");
  if (!(opts.kappa > 0.0)) throw Error("embed: kappa must be positive");

  std::vector<UnitBound> units;
  std::vector<Vector> columns;
  Vector offset = drive;
  for (std::size_t c = 0; c < nets.size(); ++c) {
    const auto& net = nets[c];
    if (net.inputs() != n) throw Error("embed: net input dimension differs from the state dimension");
    if (combiners[c].rows() != n || combiners[c].cols() != net.outputs())
      throw Error("embed: combiner " + std::to_string(c) + " has the wrong shape");
    BoundsResult b = extract_bounds(net);
    offset += combiners[c] * b.constant;
    for (auto& u : b.units) {
      columns.push_back(combiners[c] * net.w2.col(u.unit));
      units.push_back(std::move(u));
    }
  }
  const auto h_total = static_cast<Index>(units.size());
  if (h_total < n) throw Error("embed: fewer hidden units than states");

  SectorEmbedding e;
  e.n_phys = n;
  e.p = h_total - n;
  e.kappa = opts.kappa;
  e.linear_part = linear_part;
  e.offset = offset;
  e.c_rows.resize(h_total, n);
  e.slopes.resize(h_total);
  e.dbounds.resize(h_total);
  e.unit_bias.resize(h_total);
  e.f_phys.resize(n, h_total);
  for (Index j = 0; j < h_total; ++j) {
    const auto& u = units[static_cast<std::size_t>(j)];
    e.c_rows.row(j) = u.direction.transpose();
    e.slopes[j] = u.slope;
    e.dbounds[j] = u.deriv_bound;
    e.unit_bias[j] = u.bias;
    e.f_phys.col(j) = columns[static_cast<std::size_t>(j)];
  }

  AugmentedSystem aug = augment(linear_part, e.f_phys, opts.kappa);
  e.system = std::move(aug.base);
  e.system.c = Matrix::Zero(h_total, h_total);
  e.system.c.leftCols(n) = e.c_rows;
  e.system.sigma = 0.0;
  e.system.sector_slopes = e.slopes;
  e.system.deriv_bounds = e.dbounds;
  e.system.nonlinearity_name = "tanh_units";
  e.system.nonlinearity_params = {{"gain", std::vector<double>(e.slopes.data(), e.slopes.data() + h_total)},
                                  {"bias", std::vector<double>(e.unit_bias.data(), e.unit_bias.data() + h_total)}};
  bind_nonlinearity(e.system);

  if (opts.enforce_offset && offset.cwiseAbs().maxCoeff() > opts.offset_tol)
    throw Error("embed: constant offset " + std::to_string(offset.cwiseAbs().maxCoeff()) +
                " exceeds tolerance; the origin is not an equilibrium of the model");
  return e;
}

ResidualReport approx_residual(const std::vector<ShallowNet>& nets, const VectorField& reference, const Vector& lo,
                               const Vector& hi, std::size_t n_samples, std::uint64_t seed) {
  if (nets.empty()) throw Error("approx_residual: no nets");
  const Index d = lo.size();
  if (hi.size() != d || !lo.allFinite() || !hi.allFinite()) throw Error("approx_residual: bad box");
  if (n_samples == 0) throw Error("approx_residual: need samples");
  Index q = 0;
  for (const auto& net : nets) q += net.outputs();

  const UniformStream u(seed, 0);
  Vector max_abs = Vector::Zero(q);
  Vector sq = Vector::Zero(q);
  Vector ref_min = Vector::Constant(q, std::numeric_limits<double>::infinity());
  Vector ref_max = Vector::Constant(q, -std::numeric_limits<double>::infinity());
  Vector x(d);
  Vector approx(q);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (Index k = 0; k < d; ++k)
      x[k] = lo[k] + (hi[k] - lo[k]) * u(static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(d) +
                                          static_cast<std::uint64_t>(k));
    Index off = 0;
    for (const auto& net : nets) {
      approx.segment(off, net.outputs()) = forward(net, x);
      off += net.outputs();
    }
    const Vector ref = reference(x);
    if (ref.size() != q || !ref.allFinite()) throw Error("approx_residual: reference evaluation failed");
    const Vector err = (approx - ref).cwiseAbs();
    max_abs = max_abs.cwiseMax(err);
    sq += err.cwiseAbs2();
    ref_min = ref_min.cwiseMin(ref);
    ref_max = ref_max.cwiseMax(ref);
  }
  ResidualReport r;
  r.max_abs = max_abs;
  r.rms = (sq / static_cast<double>(n_samples)).cwiseSqrt();
  r.range = ref_max - ref_min;
  return r;
}

}  // namespace sar
