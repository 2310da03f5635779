#include "sar/stability_cert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sar/philox.hpp"
#include "sar/sde_sim.hpp"

namespace sar {

std::vector<double> SolverOptions::default_nu_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(0.05 * k);
  return grid;
}

namespace {

void require_square(const LureSystem& sys) {
  const Index n = sys.states();
  if (sys.a.cols() != n || sys.c.rows() != n || sys.c.cols() != n || sys.f_gain.rows() != n ||
      sys.f_gain.cols() != n || sys.sector_slopes.size() != n || sys.deriv_bounds.size() != n)
    throw Error("certifier needs a square system (m = n) with consistent dimensions");
}

}  // namespace

Matrix assemble_n(const LureSystem& sys, double nu, const Vector& lambda, const Vector& tau, SectorCoupling coupling) {
  require_square(sys);
  const Index n = sys.states();
  if (lambda.size() != n || tau.size() != n) throw Error("assemble_n: multiplier length mismatch");
  const Matrix& a = sys.a;
  const Matrix& c = sys.c;
  const Matrix& f = sys.f_gain;
  const double s2 = sys.sigma * sys.sigma;
  const Matrix id = Matrix::Identity(n, n);
  const auto lam = lambda.asDiagonal();
  const auto t = tau.asDiagonal();
  const auto s = sys.sector_slopes.asDiagonal();

  const Matrix n11 = nu * (a.transpose() + a - s2 * (1.0 - nu) * id) +
                     s2 * c.transpose() * lam * sys.deriv_bounds.asDiagonal() * c;
  Matrix n12 = nu * f + (a - 0.5 * s2 * (1.0 - 0.5 * nu) * id).transpose() * c.transpose() * lam;
  if (coupling == SectorCoupling::kLiteral)
    n12 += s * c.transpose() * t;
  else
    n12 += c.transpose() * s * t;
  const Matrix n22 = -2.0 * Matrix(t) + lam * c * f + f.transpose() * c.transpose() * lam;

  Matrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = n11;
  out.topRightCorner(n, n) = n12;
  out.bottomLeftCorner(n, n) = n12.transpose();
  out.bottomRightCorner(n, n) = n22;
  return 0.5 * (out + out.transpose());
}

Matrix AffineLmi::evaluate(const Vector& lambda, const Vector& tau) const {
  Matrix m = base;
  for (std::size_t i = 0; i < lambda_coeff.size(); ++i)
    if (lambda[static_cast<Index>(i)] != 0.0) m += lambda[static_cast<Index>(i)] * lambda_coeff[i];
  for (std::size_t i = 0; i < tau_coeff.size(); ++i)
    if (tau[static_cast<Index>(i)] != 0.0) m += tau[static_cast<Index>(i)] * tau_coeff[i];
  return m;
}

AffineLmi decompose(const LureSystem& sys, double nu, SectorCoupling coupling) {
  require_square(sys);
  const Index n = sys.states();
  const Vector zero = Vector::Zero(n);
  AffineLmi lmi;
  lmi.base = assemble_n(sys, nu, zero, zero, coupling);
  for (Index i = 0; i < n; ++i) {
    const Vector e = Vector::Unit(n, i);
    lmi.lambda_coeff.push_back(assemble_n(sys, nu, e, zero, coupling) - lmi.base);
    lmi.tau_coeff.push_back(assemble_n(sys, nu, zero, e, coupling) - lmi.base);
  }
  return lmi;
}

double lambda_max(const Matrix& m, double sym_tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw Error("lambda_max: need a nonempty square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > sym_tol * scale) throw Error("lambda_max: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("lambda_max: eigensolver failed");
  return es.eigenvalues()(m.rows() - 1);
}

namespace {

struct Evaluation {
  double value = std::numeric_limits<double>::infinity();
  Vector grad;  // subgradient with respect to (lambda, tau)
};

// lambda_max of the affine matrix function, with its coefficient matrices
// held as sparse entry lists (each multiplier touches a few rows/columns).
class Objective {
 public:
  Objective(const AffineLmi& lmi, double multiplicity_tol) : base_(lmi.base), mult_tol_(multiplicity_tol) {
    auto sparse = [](const Matrix& m) {
      std::vector<Entry> out;
      for (Index c = 0; c < m.cols(); ++c)
        for (Index r = 0; r < m.rows(); ++r)
          if (m(r, c) != 0.0) out.push_back({r, c, m(r, c)});
      return out;
    };
    for (const auto& m : lmi.lambda_coeff) coeff_.push_back(sparse(m));
    for (const auto& m : lmi.tau_coeff) coeff_.push_back(sparse(m));
  }

  Matrix matrix(const Vector& z) const {
    Matrix m = base_;
    for (std::size_t k = 0; k < coeff_.size(); ++k) {
      const double zk = z[static_cast<Index>(k)];
      if (zk == 0.0) continue;
      for (const auto& e : coeff_[k]) m(e.row, e.col) += zk * e.value;
    }
    return m;
  }

  Evaluation operator()(const Vector& z) const {
    const Matrix m = matrix(z);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const Index dim = m.rows();
    Evaluation ev;
    ev.value = es.eigenvalues()(dim - 1);
    // Average v^T M_i v over the (numerically) repeated top eigenvalues.
    const double cut = ev.value - mult_tol_ * std::max(1.0, std::abs(ev.value));
    Index first = dim - 1;
    while (first > 0 && es.eigenvalues()(first - 1) >= cut) --first;
    const auto top = es.eigenvectors().rightCols(dim - first);
    const Matrix g = top * top.transpose() / static_cast<double>(dim - first);
    ev.grad = contract(g);
    return ev;
  }

  // Log-sum-exp smoothing of lambda_max at temperature mu. The gradient is
  // filled only when with_grad; `top` receives the true lambda_max.
  Evaluation smoothed(const Vector& z, double mu, double& top, bool with_grad = true) const {
    const Matrix m = matrix(z);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, with_grad ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    const Index dim = m.rows();
    top = es.eigenvalues()(dim - 1);
    const Vector w = ((es.eigenvalues().array() - top) / mu).exp().matrix();
    const double total = w.sum();
    Evaluation ev;
    ev.value = top + mu * std::log(total);
    if (with_grad) ev.grad = contract(es.eigenvectors() * (w / total).asDiagonal() * es.eigenvectors().transpose());
    return ev;
  }

 private:
  struct Entry {
    Index row;
    Index col;
    double value;
  };

  // <M_k, G> for every coefficient matrix.
  Vector contract(const Matrix& g) const {
    Vector out(static_cast<Index>(coeff_.size()));
    for (std::size_t k = 0; k < coeff_.size(); ++k) {
      double acc = 0.0;
      for (const auto& e : coeff_[k]) acc += e.value * g(e.row, e.col);
      out[static_cast<Index>(k)] = acc;
    }
    return out;
  }

  Matrix base_;
  std::vector<std::vector<Entry>> coeff_;
  double mult_tol_;
};

struct RunResult {
  Vector z;
  double value;
  int iterations;
  bool cap_hit;
};

RunResult run_subgradient(const Objective& objective, Vector z, const SolverOptions& opts) {
  // Step length adapts: halve until the objective drops, then allow it to
  // grow again. Feasible sets can be far thinner than step0.
  constexpr int kMaxHalvings = 50;
  Evaluation cur = objective(z);
  RunResult best{z, cur.value, 0, false};
  double scale = opts.step0;
  int since_progress = 0;
  int k = 0;
  for (; k < opts.max_iterations; ++k) {
    const double gnorm = cur.grad.norm();
    if (gnorm == 0.0 || !std::isfinite(gnorm)) break;
    const Vector dir = cur.grad / gnorm;

    double a = scale;
    Vector trial = (z - a * dir).cwiseMax(0.0);
    Evaluation next = objective(trial);
    for (int b = 0; b < kMaxHalvings && !(next.value < cur.value); ++b) {
      a *= 0.5;
      trial = (z - a * dir).cwiseMax(0.0);
      next = objective(trial);
    }
    if (next.value < cur.value) {
      scale = std::min(opts.step0, 2.0 * a);
    } else {
      // No descent along this subgradient (a kink): take a short step anyway
      // to leave it and shrink the scale.
      scale *= 0.5;
      trial = (z - scale * dir).cwiseMax(0.0);
      next = objective(trial);
      if (scale < 1e-14 * std::max(1.0, z.norm())) {
        ++k;
        break;
      }
    }
    z = std::move(trial);
    cur = std::move(next);

    if (cur.value < best.value - opts.stall_rel * std::max(1.0, std::abs(best.value))) {
      since_progress = 0;
    } else if (++since_progress >= opts.stall_window) {
      ++k;
      break;
    }
    if (cur.value < best.value) {
      best.z = z;
      best.value = cur.value;
    }
  }
  best.iterations = k;
  best.cap_hit = k >= opts.max_iterations;
  return best;
}

// Accelerated projected gradient on the smoothed objective with the
// temperature lowered in stages. Returns the point with the best true
// lambda_max seen.
RunResult run_smoothed(const Objective& objective, Vector z, const SolverOptions& opts) {
  constexpr int kStages = 6;
  const int per_stage = std::max(1, opts.smoothing_iterations / kStages);
  double top = 0.0;
  objective.smoothed(z, 1.0, top, false);
  RunResult best{z, top, 0, false};
  double mu = 1e-2 * std::max(1.0, std::abs(top));
  double step = opts.step0;
  int k = 0;
  for (int stage = 0; stage < kStages; ++stage, mu *= 0.1) {
    Vector y = z;
    Vector z_prev = z;
    double t_prev = 1.0;
    double f_z = objective.smoothed(z, mu, top, false).value;
    for (int it = 0; it < per_stage; ++it, ++k) {
      double y_top = 0.0;
      const Evaluation at_y = objective.smoothed(y, mu, y_top);
      Vector next;
      double f_next = 0.0;
      double next_top = 0.0;
      // Backtracking on the quadratic upper model.
      for (int b = 0; b < 60; ++b) {
        next = (y - step * at_y.grad).cwiseMax(0.0);
        const Vector d = next - y;
        f_next = objective.smoothed(next, mu, next_top, false).value;
        if (f_next <= at_y.value + at_y.grad.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15 * std::abs(at_y.value))
          break;
        step *= 0.5;
      }
      if (next_top < best.value) {
        best.value = next_top;
        best.z = next;
      }
      const double moved = (next - z).norm();
      if (f_next > f_z) {
        // Momentum overshot: restart from the current iterate.
        y = z;
        t_prev = 1.0;
        continue;
      }
      const double t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
      z_prev = z;
      z = next;
      f_z = f_next;
      y = z + ((t_prev - 1.0) / t) * (z - z_prev);
      t_prev = t;
      step *= 1.25;
      if (moved < 1e-12 * std::max(1.0, z.norm())) break;
    }
  }
  best.iterations = k;
  best.cap_hit = false;
  return best;
}

}  // namespace

Certificate certify_at(const LureSystem& sys, double nu, const SolverOptions& opts) {
  if (!(nu > 0.0 && nu < 1.0)) throw Error("certify: nu must lie in (0, 1)");
  const AffineLmi lmi = decompose(sys, nu, opts.coupling);
  const Index n = sys.states();
  const Objective objective(lmi, opts.multiplicity_tol);

  // Restart streams are keyed by nu so grid points are independent.
  const auto nu_key = static_cast<std::uint64_t>(std::llround(nu * 1e9));
  const UniformStream uniform(opts.seed, nu_key);

  RunResult best{Vector::Zero(2 * n), std::numeric_limits<double>::infinity(), 0, false};
  int total_iterations = 0;
  for (int r = 0; r <= opts.restarts; ++r) {
    Vector z0 = Vector::Zero(2 * n);
    if (r > 0)
      for (Index i = 0; i < 2 * n; ++i)
        z0[i] = opts.restart_scale * uniform(static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(2 * n) +
                                             static_cast<std::uint64_t>(i));
    RunResult run = run_subgradient(objective, z0, opts);
    total_iterations += run.iterations;
    if (run.value < best.value) best = std::move(run);
  }
  // Subgradient steps stall at kinks of lambda_max; polish the best point on
  // a smoothed objective unless it already certifies.
  if (opts.smoothing_iterations > 0 && !(best.value < -opts.tol)) {
    RunResult polished = run_smoothed(objective, best.z, opts);
    total_iterations += polished.iterations;
    if (polished.value < best.value) {
      polished.cap_hit = best.cap_hit;
      best = std::move(polished);
    }
  }

  Certificate cert;
  cert.sigma = sys.sigma;
  cert.nu = nu;
  cert.lambda = best.z.head(n);
  cert.tau = best.z.tail(n);
  cert.margin = lambda_max(assemble_n(sys, nu, cert.lambda, cert.tau, opts.coupling));
  cert.feasible = cert.margin < -opts.tol;
  cert.iteration_cap_hit = best.cap_hit;
  cert.iterations = total_iterations;
  return cert;
}

Certificate certify(const CertProblem& prob) {
  const auto& opts = prob.options;
  if (opts.nu_grid.empty()) throw Error("certify: empty nu grid");
  for (double nu : opts.nu_grid)
    if (!(nu > 0.0 && nu < 1.0)) throw Error("certify: every nu must lie in (0, 1)");
  require_square(prob.sys);

  std::vector<Certificate> per_nu(opts.nu_grid.size());
  parallel_for(per_nu.size(), opts.jobs, [&](std::size_t i) { per_nu[i] = certify_at(prob.sys, opts.nu_grid[i], opts); });
  // First minimum wins so the result is independent of scheduling.
  auto best = std::min_element(per_nu.begin(), per_nu.end(),
                               [](const Certificate& x, const Certificate& y) { return x.margin < y.margin; });
  return *best;
}

std::vector<SweepPoint> sigma_sweep(const LureSystem& sys, const std::vector<double>& sigmas,
                                    const SolverOptions& opts) {
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] >= 0.0)) throw Error("sigma_sweep: sigma values must be nonnegative");
    if (i > 0 && sigmas[i] < sigmas[i - 1]) throw Error("sigma_sweep: sigma values must be ascending");
  }
  std::vector<SweepPoint> out(sigmas.size());
  SolverOptions inner = opts;
  inner.jobs = 1;
  parallel_for(sigmas.size(), opts.jobs, [&](std::size_t i) {
    CertProblem prob{sys, inner};
    prob.sys.sigma = sigmas[i];
    out[i] = {sigmas[i], certify(prob)};
  });
  return out;
}

double lyapunov_eval(const Vector& x, const LureSystem& sys, double nu, const Vector& lambda, double rho) {
  if (!(nu > 0.0 && nu < 1.0)) throw Error("lyapunov_eval: nu must lie in (0, 1)");
  if (!(rho < 1.0)) throw Error("lyapunov_eval: integrand s^{-2 rho} f(s) is not integrable at 0 for rho >= 1");
  if (x.size() != sys.states()) throw Error("lyapunov_eval: state dimension mismatch");
  const Index m = sys.outputs();
  if (lambda.size() != m) throw Error("lyapunov_eval: lambda length mismatch");
  if ((lambda.array() < 0.0).any()) throw Error("lyapunov_eval: lambda must be nonnegative");

  double v = std::pow(x.squaredNorm(), 0.5 * nu);
  const Vector y = sys.c * x;
  for (Index k = 0; k < m; ++k) {
    if (lambda[k] == 0.0 || y[k] == 0.0) continue;
    if (!sys.nonlinearity) throw Error("lyapunov_eval: nonlinearity is not bound");
    // f_k depends on y_k only, so probe with a unit-support vector.
    auto integrand = [&](double s) {
      Vector probe = Vector::Zero(m);
      probe[k] = s;
      const double weight = rho == 0.0 ? 1.0 : std::pow(std::abs(s), -2.0 * rho);
      return weight * sys.nonlinearity(probe)[k];
    };
    double error = 0.0;
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, 0.0, y[k], 30, 1e-12, &error);
    v += lambda[k] * integral;
  }
  return v;
}

}  // namespace sar
