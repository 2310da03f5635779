#pragma once

#include <cstdint>
#include <vector>

#include "sar/lure_model.hpp"
#include "sar/types.hpp"

namespace sar {

// How the sector multiplier T couples to the state in the off-diagonal block.
// kLiteral:       S C^T T (S indexed by state row, as printed).
// kOutputIndexed: C^T S T (S indexed by nonlinearity). Identical when C = I.
enum class SectorCoupling { kLiteral, kOutputIndexed };

struct SolverOptions {
  std::vector<double> nu_grid = default_nu_grid();
  int max_iterations = 5000;
  int restarts = 5;                 // random restarts in addition to the origin start
  double tol = 1e-8;                // feasible iff margin < -tol
  double step0 = 1.0;               // initial step length in variable units
  double restart_scale = 1.0;       // restarts drawn uniformly from [0, restart_scale]
  int stall_window = 400;           // stop a run after this many iterations without progress
  double stall_rel = 1e-10;
  double multiplicity_tol = 1e-9;   // eigenvalues this close to the top share the subgradient
  int smoothing_iterations = 1200;  // log-sum-exp polish after each subgradient run; 0 disables
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  SectorCoupling coupling = SectorCoupling::kLiteral;

  static std::vector<double> default_nu_grid();  // {0.05, 0.10, ..., 0.95}
};

struct Certificate {
  double sigma = 0.0;
  double nu = 0.5;
  Vector lambda;
  Vector tau;
  double margin = 0.0;  // lambda_max of the symmetrized block matrix at (nu, lambda, tau)
  bool feasible = false;
  bool iteration_cap_hit = false;
  int iterations = 0;
};

struct CertProblem {
  LureSystem sys;
  SolverOptions options;
};

// The 2n x 2n matrix [[N11, N12], [N12^T, N22]], symmetrized.
Matrix assemble_n(const LureSystem& sys, double nu, const Vector& lambda, const Vector& tau,
                  SectorCoupling coupling = SectorCoupling::kLiteral);

// Affine decomposition at fixed nu: N = base + sum_i lambda_i L_i + sum_i tau_i T_i.
struct AffineLmi {
  Matrix base;
  std::vector<Matrix> lambda_coeff;
  std::vector<Matrix> tau_coeff;

  Matrix evaluate(const Vector& lambda, const Vector& tau) const;
};
AffineLmi decompose(const LureSystem& sys, double nu, SectorCoupling coupling = SectorCoupling::kLiteral);

// Largest eigenvalue of a symmetric matrix. Throws if the input is not
// symmetric to within sym_tol (relative to its max-abs entry).
double lambda_max(const Matrix& m, double sym_tol = 1e-9);

// Minimizes lambda_max(N) over the nonnegative diagonal cone for one nu.
Certificate certify_at(const LureSystem& sys, double nu, const SolverOptions& opts);

// Best certificate over opts.nu_grid. An infeasible result is not a proof
// of instability.
Certificate certify(const CertProblem& prob);

struct SweepPoint {
  double sigma;
  Certificate cert;
};

// certify with each sigma substituted; sigmas must be ascending and >= 0.
std::vector<SweepPoint> sigma_sweep(const LureSystem& sys, const std::vector<double>& sigmas,
                                    const SolverOptions& opts);

// V(x) = (x^T x)^{nu/2} + sum_k lambda_k int_0^{y_k} s^{-2 rho} f_k(s) ds, y = Cx.
// Diagnostic only. Requires rho < 1 for integrability at 0.
double lyapunov_eval(const Vector& x, const LureSystem& sys, double nu, const Vector& lambda, double rho = 0.0);

}  // namespace sar
