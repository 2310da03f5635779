#include "sar/lure_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

namespace sar {

Vector LureSystem::drift(const Vector& x) const {
  Vector dx = a * x;
  if (f_gain.cols() > 0 && f_gain.cwiseAbs().maxCoeff() > 0.0) {
    if (!nonlinearity) throw Error("LureSystem: nonlinearity '" + nonlinearity_name + "' is not bound");
    dx.noalias() += f_gain * nonlinearity(c * x);
  }
  return dx;
}

double orthonormality_defect(const Matrix& c) {
  const Matrix g = c.transpose() * c;
  return (g - Matrix::Identity(g.rows(), g.cols())).norm();
}

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// Probe points are fixed so validation is deterministic.
double probe_value(Index i) { return 0.37 + 0.11 * static_cast<double>(i % 7) - 0.05 * static_cast<double>(i % 3); }

}  // namespace

std::vector<Violation> validate(const LureSystem& sys, const ValidateOptions& opts) {
  std::vector<Violation> out;
  auto error = [&](std::string what, double v = 0.0) { out.push_back({Severity::kError, std::move(what), v}); };

  const Index n = sys.a.rows();
  const Index m = sys.c.rows();
  bool shapes_ok = true;
  if (sys.a.cols() != n) {
    error("drift matrix a is " + dims(sys.a) + ", expected square");
    shapes_ok = false;
  }
  if (sys.f_gain.rows() != n || sys.f_gain.cols() != m) {
    error("f_gain is " + dims(sys.f_gain) + ", expected " + std::to_string(n) + "x" + std::to_string(m));
    shapes_ok = false;
  }
  if (sys.c.cols() != n) {
    error("output map c is " + dims(sys.c) + ", expected " + std::to_string(m) + "x" + std::to_string(n));
    shapes_ok = false;
  }
  if (sys.sector_slopes.size() != m) {
    error("sector_slopes has length " + std::to_string(sys.sector_slopes.size()), static_cast<double>(m));
    shapes_ok = false;
  }
  if (sys.deriv_bounds.size() != m) {
    error("deriv_bounds has length " + std::to_string(sys.deriv_bounds.size()), static_cast<double>(m));
    shapes_ok = false;
  }
  if (!(sys.sigma >= 0.0) || !std::isfinite(sys.sigma)) error("sigma must be finite and nonnegative", sys.sigma);
  for (Index i = 0; i < sys.sector_slopes.size(); ++i)
    if (!(sys.sector_slopes[i] > 0.0)) error("nonpositive sector slope", sys.sector_slopes[i]);
  for (Index i = 0; i < sys.deriv_bounds.size(); ++i)
    if (!(sys.deriv_bounds[i] > 0.0)) error("nonpositive derivative bound", sys.deriv_bounds[i]);
  if (!shapes_ok) return out;

  if (!sys.a.allFinite() || !sys.f_gain.allFinite() || !sys.c.allFinite()) error("non-finite matrix entry");

  const double defect = orthonormality_defect(sys.c);
  if (defect > opts.orthonormality_tol)
    out.push_back({Severity::kWarning, "output map is not orthonormal (||C^T C - I||_F)", defect});

  if (opts.probe_componentwise && sys.nonlinearity && m > 1) {
    Vector y(m);
    for (Index i = 0; i < m; ++i) y[i] = probe_value(i);
    const Vector f0 = sys.nonlinearity(y);
    for (Index j = 0; j < m; ++j) {
      Vector yj = y;
      yj[j] += 0.5;
      const Vector fj = sys.nonlinearity(yj);
      for (Index i = 0; i < m; ++i) {
        if (i == j) continue;
        const double diff = std::abs(fj[i] - f0[i]);
        if (diff > opts.probe_tol) {
          error("nonlinearity component " + std::to_string(i) + " depends on y_" + std::to_string(j), diff);
          j = m;
          break;
        }
      }
    }
  }
  return out;
}

bool has_errors(std::span<const Violation> violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::kError; });
}

SectorCheckResult sector_check(const std::function<double(double)>& f, double s, std::span<const double> grid,
                               double tol) {
  if (!(s > 0.0)) throw Error("sector_check: slope must be positive");
  if (grid.empty()) throw Error("sector_check: empty grid");
  SectorCheckResult r;
  r.worst_value = -std::numeric_limits<double>::infinity();
  for (double y : grid) {
    const double fy = f(y);
    if (!std::isfinite(fy)) throw Error("sector_check: evaluator returned non-finite value at y=" + std::to_string(y));
    const double v = fy * (fy - s * y);
    if (v > r.worst_value) {
      r.worst_value = v;
      r.worst_y = y;
    }
  }
  r.pass = r.worst_value <= tol;
  return r;
}

AugmentedSystem augment(const Matrix& a_phys, const Matrix& f_phys, double kappa) {
  if (!(kappa > 0.0)) throw Error("augment: kappa must be positive");
  const Index n = a_phys.rows();
  if (a_phys.cols() != n || f_phys.rows() != n) throw Error("augment: dimension mismatch");
  const Index m = f_phys.cols();
  if (m < n) throw Error("augment: need at least as many nonlinearities as states");

  AugmentedSystem out;
  out.kappa = kappa;
  out.n_phys = n;
  out.p = m - n;
  out.base.a = Matrix::Zero(m, m);
  out.base.a.topLeftCorner(n, n) = a_phys;
  out.base.a.bottomRightCorner(out.p, out.p) = -kappa * Matrix::Identity(out.p, out.p);
  out.base.f_gain = Matrix::Zero(m, m);
  out.base.f_gain.topRows(n) = f_phys;
  return out;
}

// ---- registry ----

namespace {

std::vector<double> read_vec(const nlohmann::json& params, const char* key, Index m) {
  if (!params.contains(key)) throw Error(std::string("nonlinearity params missing '") + key + "'");
  auto v = params.at(key).get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != m) throw Error(std::string("nonlinearity params '") + key + "' has wrong length");
  return v;
}

Nonlinearity tanh_units(const nlohmann::json& params, Index m) {
  const auto gain = read_vec(params, "gain", m);
  const auto bias = read_vec(params, "bias", m);
  std::vector<double> shift(bias.size());
  std::transform(bias.begin(), bias.end(), shift.begin(), [](double b) { return std::tanh(b); });
  return [gain, bias, shift](const Vector& y) {
    Vector out(y.size());
    for (Index j = 0; j < y.size(); ++j) out[j] = std::tanh(gain[j] * y[j] + bias[j]) - shift[j];
    return out;
  };
}

struct Registry {
  std::mutex mu;
  std::map<std::string, NonlinearityFactory> factories{
      {"zero", [](const nlohmann::json&, Index) { return Nonlinearity([](const Vector& y) { return Vector::Zero(y.size()).eval(); }); }},
      {"identity", [](const nlohmann::json&, Index) { return Nonlinearity([](const Vector& y) { return y; }); }},
      {"tanh_bank", [](const nlohmann::json&, Index) {
         return Nonlinearity([](const Vector& y) { return y.array().tanh().matrix().eval(); });
       }},
      {"tanh_units", tanh_units},
      {"morris_lecar_bank", tanh_units},
  };
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

Nonlinearity make_nonlinearity(const std::string& name, const nlohmann::json& params, Index m) {
  auto& r = registry();
  NonlinearityFactory factory;
  {
    std::lock_guard lock(r.mu);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw Error("unknown nonlinearity '" + name + "'");
    factory = it->second;
  }
  return factory(params, m);
}

void register_nonlinearity(const std::string& name, NonlinearityFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::vector<std::string> registered_nonlinearities() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

void bind_nonlinearity(LureSystem& sys) {
  sys.nonlinearity = make_nonlinearity(sys.nonlinearity_name, sys.nonlinearity_params, sys.c.rows());
}

}  // namespace sar
