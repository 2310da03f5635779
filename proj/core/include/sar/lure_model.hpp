#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sar/types.hpp"

namespace sar {

// Maps the output vector y = Cx to f(y). Must act componentwise: f_i may
// depend on y_i only.
using Nonlinearity = std::function<Vector(const Vector&)>;

// dx = A x dt + F f(C x) dt + sigma x dbeta, with sector data (S, Delta) for f.
struct LureSystem {
  Matrix a;        // n x n
  Matrix f_gain;   // n x m
  Matrix c;        // m x n
  double sigma = 0.0;
  Vector sector_slopes;  // m, each > 0
  Vector deriv_bounds;   // m, each > 0

  Nonlinearity nonlinearity;
  // Registry reference so the system can be serialized and rebuilt.
  std::string nonlinearity_name = "zero";
  nlohmann::json nonlinearity_params = nlohmann::json::object();

  Index states() const { return a.rows(); }
  Index outputs() const { return c.rows(); }
  bool square() const { return c.rows() == a.rows(); }

  // A x + F f(C x)
  Vector drift(const Vector& x) const;
};

enum class Severity { kError, kWarning };

struct Violation {
  Severity severity;
  std::string what;
  double value = 0.0;
};

struct ValidateOptions {
  double orthonormality_tol = 1e-9;
  bool probe_componentwise = true;
  double probe_tol = 1e-12;
};

std::vector<Violation> validate(const LureSystem& sys, const ValidateOptions& opts = {});
bool has_errors(std::span<const Violation> violations);

// ||C^T C - I||_F
double orthonormality_defect(const Matrix& c);

struct SectorCheckResult {
  bool pass = true;
  double worst_y = 0.0;
  double worst_value = 0.0;  // max over the grid of f(y)(f(y) - s y)
};

// Sampled check of f(y)(f(y) - s y) <= tol. Not a proof.
SectorCheckResult sector_check(const std::function<double(double)>& f, double s, std::span<const double> grid,
                               double tol = 0.0);

struct AugmentedSystem {
  LureSystem base;  // state dimension n_phys + p; a and f_gain filled
  double kappa = 1.0;
  Index n_phys = 0;
  Index p = 0;
};

// Pads an n-state system driven by m >= n nonlinearities up to m states:
// A_bar = [A 0; 0 -kappa I], F_bar = [F; 0].
AugmentedSystem augment(const Matrix& a_phys, const Matrix& f_phys, double kappa = 1.0);

// ---- nonlinearity registry ----

using NonlinearityFactory = std::function<Nonlinearity(const nlohmann::json& params, Index m)>;

// Built-ins: "zero", "identity", "tanh_bank", "tanh_units", "morris_lecar_bank".
Nonlinearity make_nonlinearity(const std::string& name, const nlohmann::json& params, Index m);
void register_nonlinearity(const std::string& name, NonlinearityFactory factory);
std::vector<std::string> registered_nonlinearities();

// Attaches the registry nonlinearity named in sys.nonlinearity_name.
void bind_nonlinearity(LureSystem& sys);

}  // namespace sar
