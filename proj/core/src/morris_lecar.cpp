#include "sar/morris_lecar.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "sar/philox.hpp"

namespace sar::ml {

void Params::check() const {
  if (!(cap > 0.0)) throw Error("Morris-Lecar: cap must be positive");
  if (v2 == 0.0 || v4 == 0.0) throw Error("Morris-Lecar: v2 and v4 must be nonzero");
  if (!(phi > 0.0)) throw Error("Morris-Lecar: phi must be positive");
}

Gating gating(const Params& p, double v) {
  return {0.5 * (1.0 + std::tanh((v - p.v1) / p.v2)), 0.5 * (1.0 + std::tanh((v - p.v3) / p.v4)),
          1.0 / (p.phi * std::cosh((v - p.v3) / (2.0 * p.v4)))};
}

Channels channels(const Params& p, const State& s) {
  const double m_ss = 0.5 * (1.0 + std::tanh((s.v - p.v1) / p.v2));
  return {-p.g_leak * (s.v - p.v_leak), -p.g_ca * m_ss * (s.v - p.v_ca), -p.g_k * s.n_rec * (s.v - p.v_k)};
}

Derivative rhs(const Params& p, const State& s) {
  const Gating g = gating(p, s.v);
  const Channels c = channels(p, s);
  return {(p.i_app + c.leak + c.calcium + c.potassium) / p.cap, (g.n_ss - s.n_rec) / g.tau_n};
}

Matrix jacobian(const Params& p, const State& s) {
  const double tm = std::tanh((s.v - p.v1) / p.v2);
  const double tn = std::tanh((s.v - p.v3) / p.v4);
  const double m_ss = 0.5 * (1.0 + tm);
  const double n_ss = 0.5 * (1.0 + tn);
  const double dm = (1.0 - tm * tm) / (2.0 * p.v2);
  const double dn_ss = (1.0 - tn * tn) / (2.0 * p.v4);
  const double arg = (s.v - p.v3) / (2.0 * p.v4);
  const double rate = p.phi * std::cosh(arg);
  const double drate = p.phi * std::sinh(arg) / (2.0 * p.v4);

  Matrix j(2, 2);
  j(0, 0) = (-p.g_leak - p.g_ca * (dm * (s.v - p.v_ca) + m_ss) - p.g_k * s.n_rec) / p.cap;
  j(0, 1) = -p.g_k * (s.v - p.v_k) / p.cap;
  j(1, 0) = dn_ss * rate + (n_ss - s.n_rec) * drate;
  j(1, 1) = -rate;
  return j;
}

std::vector<State> equilibria(const Params& p, double v_lo, double v_hi) {
  p.check();
  auto g = [&](double v) { return rhs(p, {v, gating(p, v).n_ss}).dv; };
  constexpr int kGrid = 5000;
  std::vector<State> out;
  double prev_v = v_lo;
  double prev_g = g(v_lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double v = v_lo + (v_hi - v_lo) * i / kGrid;
    const double gv = g(v);
    if (prev_g == 0.0) {
      out.push_back({prev_v, gating(p, prev_v).n_ss});
    } else if ((prev_g < 0.0) != (gv < 0.0) && gv != 0.0) {
      double lo = prev_v, hi = v, glo = prev_g;
      for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      const double root = 0.5 * (lo + hi);
      out.push_back({root, gating(p, root).n_ss});
    }
    prev_v = v;
    prev_g = gv;
  }
  return out;
}

State dominant_equilibrium(const Params& p) {
  const auto eq = equilibria(p);
  if (eq.empty()) throw Error("Morris-Lecar: no equilibrium found");
  double best_rate = -std::numeric_limits<double>::infinity();
  State best = eq.front();
  for (const auto& s : eq) {
    const double rate = jacobian(p, s).eigenvalues().real().maxCoeff();
    if (rate > best_rate) {
      best_rate = rate;
      best = s;
    }
  }
  return best;
}

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "none") return NoiseMode::kNone;
  if (name == "state") return NoiseMode::kState;
  if (name == "current") return NoiseMode::kCurrent;
  if (name == "voltage") return NoiseMode::kVoltage;
  throw Error("unknown noise mode '" + name + "' (expected none|state|current|voltage)");
}

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kNone: return "none";
    case NoiseMode::kState: return "state";
    case NoiseMode::kCurrent: return "current";
    case NoiseMode::kVoltage: return "voltage";
  }
  return "none";
}

SdePath simulate_ml(const Params& p, const State& s0, const SimConfig& cfg, const Noise& noise,
                    std::uint64_t path_index) {
  p.check();
  check(cfg);
  const std::uint64_t steps = step_count(cfg);
  const std::size_t samples = recorded_samples(cfg);
  const double record_dt = cfg.dt * static_cast<double>(cfg.record_stride);
  const bool noisy = noise.mode != NoiseMode::kNone && noise.sigma != 0.0;
  const WienerIncrements dw(cfg.seed, path_index, cfg.dt);

  SdePath path;
  path.seed = cfg.seed;
  path.path_index = path_index;
  path.sigma = noisy ? noise.sigma : 0.0;
  path.times.reserve(samples);
  path.states.resize(static_cast<Index>(samples), 2);

  double v = s0.v;
  double n = s0.n_rec;
  std::size_t row = 0;
  for (std::uint64_t k = 0;; ++k) {
    if (k % cfg.record_stride == 0) {
      path.times.push_back(static_cast<double>(row) * record_dt);
      path.states(static_cast<Index>(row), 0) = v;
      path.states(static_cast<Index>(row), 1) = n;
      ++row;
    }
    if (k == steps) break;

    const Gating g = gating(p, v);
    const Channels c = channels(p, {v, n});
    const double dv = (p.i_app + c.leak + c.calcium + c.potassium) / p.cap;
    // Exact decay of n toward n_ss over dt at frozen v.
    double n_next = n + (g.n_ss - n) * -std::expm1(-cfg.dt / g.tau_n);
    double v_next = v + dv * cfg.dt;
    if (noisy) {
      const double w = dw(k);
      switch (noise.mode) {
        case NoiseMode::kState:
          v_next += noise.sigma * (v - noise.center.v) * w;
          n_next += noise.sigma * (n - noise.center.n_rec) * w;
          break;
        case NoiseMode::kVoltage: v_next += noise.sigma * v * w / p.cap; break;
        case NoiseMode::kCurrent: v_next += noise.sigma * p.i_app * w / p.cap; break;
        case NoiseMode::kNone: break;
      }
    }
    v = v_next;
    n = n_next;
    if (!std::isfinite(v) || !std::isfinite(n)) {
      path.diverged = true;
      path.diverged_at = static_cast<double>(k + 1) * cfg.dt;
      break;
    }
  }
  path.states.conservativeResize(static_cast<Index>(row), Eigen::NoChange);
  return path;
}

std::vector<SdePath> simulate_ml_ensemble(const Params& p, const State& s0, const SimConfig& cfg, const Noise& noise,
                                          unsigned jobs) {
  check(cfg);
  std::vector<SdePath> paths(cfg.n_paths);
  parallel_for(cfg.n_paths, jobs, [&](std::size_t i) { paths[i] = simulate_ml(p, s0, cfg, noise, i); });
  return paths;
}

OscillationStats oscillation_stats(std::span<const double> times, std::span<const double> v, double t0, double t1,
                                   double threshold) {
  if (times.size() != v.size()) throw Error("oscillation_stats: length mismatch");
  OscillationStats st;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  bool have_prev = false;
  double prev = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (times[i] < t0 || times[i] > t1) continue;
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
    if (have_prev && prev < threshold && v[i] >= threshold) ++st.spikes;
    prev = v[i];
    have_prev = true;
  }
  st.peak_to_peak = have_prev ? hi - lo : 0.0;
  return st;
}

Calibration calibrate_i_app(Params p, const State& s0, const SimConfig& cfg, double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw Error("calibrate_i_app: bad scan range");
  Calibration cal;
  const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) {
    p.i_app = lo + step * i;
    const SdePath path = simulate_ml(p, s0, cfg, Noise{});
    const std::vector<double> v(path.states.col(0).data(), path.states.col(0).data() + path.states.rows());
    CalibrationPoint pt;
    pt.i_app = p.i_app;
    pt.whole = oscillation_stats(path.times, v, 0.0, cfg.t_end);
    pt.tail = oscillation_stats(path.times, v, 0.5 * cfg.t_end, cfg.t_end);
    pt.sustained = !path.diverged && pt.whole.spikes >= 3 && pt.tail.spikes >= 1 && pt.tail.peak_to_peak > 40.0;
    cal.scan.push_back(pt);
    if (pt.sustained) {
      cal.i_app = pt.i_app;
      cal.found = true;
      break;
    }
  }
  return cal;
}

Dataset make_training_set(const Params& p, const Box& box, std::size_t n_samples, std::uint64_t seed) {
  if (!std::isfinite(box.v_lo) || !std::isfinite(box.v_hi) || !std::isfinite(box.n_lo) || !std::isfinite(box.n_hi))
    throw Error("make_training_set: box must be finite");
  const UniformStream u(seed, 0);
  Dataset d;
  d.x.resize(static_cast<Index>(n_samples), 2);
  d.y.resize(static_cast<Index>(n_samples), 3);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto r = static_cast<Index>(i);
    const State s{box.v_lo + (box.v_hi - box.v_lo) * u(2 * i), box.n_lo + (box.n_hi - box.n_lo) * u(2 * i + 1)};
    const Channels c = channels(p, s);
    d.x(r, 0) = s.v;
    d.x(r, 1) = s.n_rec;
    d.y(r, 0) = c.leak;
    d.y(r, 1) = c.calcium;
    d.y(r, 2) = c.potassium;
  }
  return d;
}

// ---- approximation pipeline ----

Vector Approximation::to_embedded(const State& s) const {
  Vector x = Vector::Zero(embedding.system.states());
  x[0] = (s.v - equilibrium.v) / v_scale - center_u[0];
  x[1] = (s.n_rec - equilibrium.n_rec) / n_scale - center_u[1];
  return x;
}

State Approximation::from_embedded(const Vector& x) const {
  return {(x[0] + center_u[0]) * v_scale + equilibrium.v, (x[1] + center_u[1]) * n_scale + equilibrium.n_rec};
}

namespace {

Matrix hidden_features(const std::vector<ShallowNet>& nets, const Matrix& u) {
  Index h = 0;
  for (const auto& net : nets) h += net.hidden();
  Matrix out(u.rows(), h);
  Index off = 0;
  for (const auto& net : nets) {
    out.middleCols(off, net.hidden()) =
        ((u * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh().matrix();
    off += net.hidden();
  }
  return out;
}

Vector newton_root(const std::function<Vector(const Vector&)>& f, Vector x) {
  for (int it = 0; it < 100; ++it) {
    const Vector fx = f(x);
    if (fx.cwiseAbs().maxCoeff() < 1e-14) return x;
    Matrix jac(x.size(), x.size());
    for (Index k = 0; k < x.size(); ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[k]));
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      jac.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    Vector dx = jac.colPivHouseholderQr().solve(-fx);
    // Backtrack until the residual drops so far-off starts do not run away.
    for (int half = 0; half < 30 && f(x + dx).norm() >= fx.norm(); ++half) dx *= 0.5;
    x += dx;
    if (dx.cwiseAbs().maxCoeff() < 1e-15) break;
  }
  if (f(x).cwiseAbs().maxCoeff() > 1e-10) throw Error("model equilibrium search did not converge");
  return x;
}

}  // namespace

Approximation approximate(const Params& p, const ApproxOptions& opts) {
  p.check();
  if (opts.width < 1) throw Error("approximate: width must be >= 1");
  Approximation ap;
  ap.params = p;
  ap.v_scale = opts.v_scale;
  ap.n_scale = opts.n_scale;
  ap.equilibrium = dominant_equilibrium(p);

  const Dataset raw = make_training_set(p, opts.box, opts.n_samples, opts.seed);
  Matrix u(raw.size(), 2);
  u.col(0) = (raw.x.col(0).array() - ap.equilibrium.v) / opts.v_scale;
  u.col(1) = (raw.x.col(1).array() - ap.equilibrium.n_rec) / opts.n_scale;

  for (Index c = 0; c < 3; ++c) {
    TrainOptions t = opts.train;
    t.seed = opts.train.seed + static_cast<std::uint64_t>(c);
    ap.training.push_back(train(Dataset{u, raw.y.col(c)}, opts.width, t));
    ap.channel_nets.push_back(ap.training.back().net);
  }

  const Vector lo_u{{(opts.box.v_lo - ap.equilibrium.v) / opts.v_scale,
                     (opts.box.n_lo - ap.equilibrium.n_rec) / opts.n_scale}};
  const Vector hi_u{{(opts.box.v_hi - ap.equilibrium.v) / opts.v_scale,
                     (opts.box.n_hi - ap.equilibrium.n_rec) / opts.n_scale}};
  auto exact = [&](const Vector& x) {
    const State s{x[0] * opts.v_scale + ap.equilibrium.v, x[1] * opts.n_scale + ap.equilibrium.n_rec};
    const Channels c = channels(p, s);
    return Vector{{c.leak, c.calcium, c.potassium}};
  };
  ap.residual = approx_residual(ap.channel_nets, exact, lo_u, hi_u, opts.n_samples, opts.seed + 101);

  // dN/dt readout over all hidden units plus an affine term.
  const Matrix h = hidden_features(ap.channel_nets, u);
  const Index h_total = h.cols();
  const Index cols = h_total + 3;
  Matrix design(u.rows() + h_total, cols);
  design.setZero();
  design.topLeftCorner(u.rows(), h_total) = h;
  design.block(0, h_total, u.rows(), 2) = u;
  design.block(0, h_total + 2, u.rows(), 1).setOnes();
  Vector target = Vector::Zero(u.rows() + h_total);
  for (Index i = 0; i < u.rows(); ++i)
    target[i] = rhs(p, {raw.x(i, 0), raw.x(i, 1)}).dn / opts.n_scale;
  {
    // Ridge rows weight each unit's coefficient by its sector slope.
    const double w = std::sqrt(opts.readout_ridge * static_cast<double>(u.rows()));
    Index j = 0;
    for (const auto& net : ap.channel_nets)
      for (Index r = 0; r < net.hidden(); ++r, ++j) design(u.rows() + j, j) = w * net.w1.row(r).norm();
  }
  const Vector readout = design.colPivHouseholderQr().solve(target);
  const Vector fit = design.topRows(u.rows()) * readout - target.head(u.rows());
  ap.readout_rms = std::sqrt(fit.squaredNorm() / static_cast<double>(u.rows()));
  ap.readout_range = target.head(u.rows()).maxCoeff() - target.head(u.rows()).minCoeff();

  // Two-output dynamics nets: row 0 the channel current, row 1 its share of dN/dt.
  Index off = 0;
  for (const auto& net : ap.channel_nets) {
    ShallowNet dyn = net;
    dyn.w2.resize(2, net.hidden());
    dyn.w2.row(0) = net.w2.row(0);
    dyn.w2.row(1) = readout.segment(off, net.hidden()).transpose();
    dyn.b2 = Vector{{net.b2[0], 0.0}};
    off += net.hidden();
    ap.dynamics_nets.push_back(std::move(dyn));
    Matrix comb = Matrix::Zero(2, 2);
    comb(0, 0) = 1.0 / (p.cap * opts.v_scale);
    comb(1, 1) = 1.0;
    ap.combiners.push_back(comb);
  }
  ap.linear_part = Matrix::Zero(2, 2);
  ap.linear_part(1, 0) = readout[h_total];
  ap.linear_part(1, 1) = readout[h_total + 1];
  ap.drive = Vector{{p.i_app / (p.cap * opts.v_scale), readout[h_total + 2]}};

  // Recentre at the model's own equilibrium so the embedded origin is exact.
  ap.center_u = newton_root(
      [&](const Vector& x) { return model_rhs(ap.linear_part, ap.dynamics_nets, ap.combiners, ap.drive, x); },
      Vector::Zero(2));
  for (auto& net : ap.dynamics_nets) net.b1 += net.w1 * ap.center_u;
  ap.drive += ap.linear_part * ap.center_u;
  ap.center = {ap.center_u[0] * opts.v_scale + ap.equilibrium.v, ap.center_u[1] * opts.n_scale + ap.equilibrium.n_rec};

  EmbedOptions eo;
  eo.kappa = opts.kappa;
  eo.offset_tol = opts.offset_tol;
  ap.embedding = embed(ap.linear_part, ap.dynamics_nets, ap.combiners, ap.drive, eo);
  ap.embedding.system.nonlinearity_name = "morris_lecar_bank";
  return ap;
}

}  // namespace sar::ml
