#include <doctest.h>

#include <cmath>

#include "sar/stability_cert.hpp"

using namespace sar;

namespace {

LureSystem scalar(double a, double f, double sigma) {
  LureSystem sys;
  sys.a = Matrix::Constant(1, 1, a);
  sys.f_gain = Matrix::Constant(1, 1, f);
  sys.c = Matrix::Identity(1, 1);
  sys.sigma = sigma;
  sys.sector_slopes = Vector::Ones(1);
  sys.deriv_bounds = Vector::Ones(1);
  sys.nonlinearity_name = "tanh_bank";
  bind_nonlinearity(sys);
  return sys;
}

// Largest eigenvalue of a symmetric 2x2 from the characteristic polynomial.
double lambda_max_2x2(double a, double b, double d) {
  return 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

}  // namespace

TEST_CASE("assemble_n: worked scalar example") {
  const Matrix n = assemble_n(scalar(-1.0, 0.5, 1.0), 0.5, Vector::Ones(1), Vector::Ones(1));
  CHECK(n(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(n(0, 1) == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(n(1, 0) == doctest::Approx(-0.125).epsilon(1e-12));
  CHECK(n(1, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(lambda_max(n) - (-1.25 + std::sqrt(0.625)) / 2) < 1e-12);
}

TEST_CASE("assemble_n: noise-free, multiplier-free reduction") {
  LureSystem sys;
  sys.a = Matrix{{-1.0, 2.0}, {0.5, -3.0}};
  sys.f_gain = Matrix{{0.3, -0.2}, {0.1, 0.4}};
  sys.c = Matrix::Identity(2, 2);
  sys.sector_slopes = Vector::Ones(2);
  sys.deriv_bounds = Vector::Ones(2);
  bind_nonlinearity(sys);
  const double nu = 0.4;
  const Matrix n = assemble_n(sys, nu, Vector::Zero(2), Vector::Zero(2));
  CHECK(n.topLeftCorner(2, 2).isApprox(nu * (sys.a + sys.a.transpose())));
  CHECK(n.topRightCorner(2, 2).isApprox(nu * sys.f_gain));
  CHECK(n.bottomRightCorner(2, 2).isZero(0));
}

TEST_CASE("assemble_n is affine in the multipliers") {
  LureSystem sys = scalar(0.2, -0.7, 0.9);
  const Vector l1{{0.3}}, t1{{1.2}}, l2{{2.0}}, t2{{0.1}};
  const Matrix avg = 0.5 * (assemble_n(sys, 0.3, l1, t1) + assemble_n(sys, 0.3, l2, t2));
  CHECK((avg - assemble_n(sys, 0.3, 0.5 * (l1 + l2), 0.5 * (t1 + t2))).cwiseAbs().maxCoeff() < 1e-14);

  const AffineLmi lmi = decompose(sys, 0.3);
  CHECK((lmi.evaluate(l1, t1) - assemble_n(sys, 0.3, l1, t1)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("lambda_max against hand formulas") {
  CHECK(lambda_max(Matrix{{-1.0, 0.0}, {0.0, -2.0}}) == doctest::Approx(-1.0));
  CHECK(lambda_max(Matrix{{0.0, 1.0}, {1.0, 0.0}}) == doctest::Approx(1.0));
  CHECK(std::abs(lambda_max(Matrix{{-0.25, -0.125}, {-0.125, -1.0}}) - (-0.22972)) < 1e-5);
  for (int k = 0; k < 10; ++k) {
    const double a = std::sin(k + 1.0), b = std::cos(3.0 * k), d = 0.1 * k - 0.4;
    CHECK(lambda_max(Matrix{{a, b}, {b, d}}) == doctest::Approx(lambda_max_2x2(a, b, d)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(lambda_max(Matrix{{0.0, 1.0}, {0.0, 0.0}}), Error);
}

TEST_CASE("certify: scalar closed-form cases") {
  CHECK(certify({scalar(-1.0, 0.0, 0.5), {}}).feasible);
  CHECK_FALSE(certify({scalar(0.1, 0.0, 0.3), {}}).feasible);
  const Certificate c = certify({scalar(0.1, 0.0, 0.7), {}});
  REQUIRE(c.feasible);
  // A feasible scalar certificate implies the nu-corrected exponent is negative.
  CHECK(0.1 - 0.49 * (1.0 - c.nu) / 2 < 0.0);
}

TEST_CASE("certificate margin is reproducible") {
  LureSystem sys;
  sys.a = Matrix{{-1.0, 0.4}, {-0.4, -0.5}};
  sys.f_gain = Matrix{{0.2, 0.0}, {0.0, -0.3}};
  sys.c = Matrix::Identity(2, 2);
  sys.sigma = 0.6;
  sys.sector_slopes = Vector::Ones(2);
  sys.deriv_bounds = Vector::Ones(2);
  sys.nonlinearity_name = "tanh_bank";
  bind_nonlinearity(sys);
  const Certificate c = certify({sys, {}});
  CHECK((c.lambda.array() >= 0.0).all());
  CHECK((c.tau.array() >= 0.0).all());
  CHECK(std::abs(lambda_max(assemble_n(sys, c.nu, c.lambda, c.tau)) - c.margin) < 1e-10);
  CHECK(c.feasible == (c.margin < -1e-8));
  CHECK(c.feasible);
}

TEST_CASE("sigma = 0 with A + A^T negative definite certifies") {
  LureSystem sys;
  sys.a = Matrix{{-1.0, 0.5}, {0.0, -1.0}};
  sys.f_gain = Matrix::Zero(2, 2);
  sys.c = Matrix::Identity(2, 2);
  sys.sector_slopes = Vector::Ones(2);
  sys.deriv_bounds = Vector::Ones(2);
  bind_nonlinearity(sys);
  CHECK(certify({sys, {}}).feasible);
}

TEST_CASE("certify rejects bad nu and non-square systems") {
  SolverOptions o;
  o.nu_grid = {1.0};
  CHECK_THROWS_AS(certify({scalar(-1.0, 0.0, 0.0), o}), Error);
  LureSystem sys = scalar(-1.0, 0.0, 0.0);
  sys.c = Matrix::Ones(2, 1);
  sys.f_gain = Matrix::Zero(1, 2);
  sys.sector_slopes = Vector::Ones(2);
  sys.deriv_bounds = Vector::Ones(2);
  CHECK_THROWS_AS(certify({sys, {}}), Error);
}

TEST_CASE("sigma sweep") {
  const auto sweep = sigma_sweep(scalar(0.1, 0.0, 0.0), {0.3, 0.5, 0.7}, {});
  REQUIRE(sweep.size() == 3);
  CHECK_FALSE(sweep[0].cert.feasible);
  CHECK(sweep[1].cert.feasible);
  CHECK(sweep[2].cert.feasible);
  CHECK(sigma_sweep(scalar(0.1, 0.0, 0.0), {}, {}).empty());
  CHECK_THROWS_AS(sigma_sweep(scalar(0.1, 0.0, 0.0), {0.5, 0.3}, {}), Error);

  const auto again = sigma_sweep(scalar(0.1, 0.0, 0.0), {0.3, 0.5, 0.7}, {});
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].cert.margin == sweep[i].cert.margin);
}

TEST_CASE("lyapunov_eval") {
  LureSystem sys = scalar(-1.0, 0.0, 0.0);
  const Vector unit{{1.0}};
  CHECK(lyapunov_eval(unit, sys, 0.3, Vector::Zero(1)) == doctest::Approx(1.0));
  CHECK(lyapunov_eval(Vector::Zero(1), sys, 0.3, Vector::Zero(1)) == 0.0);

  sys.nonlinearity_name = "identity";
  bind_nonlinearity(sys);
  const double nu = 0.6;
  CHECK(lyapunov_eval(Vector{{2.0}}, sys, nu, Vector::Ones(1)) ==
        doctest::Approx(std::pow(2.0, nu) + 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(lyapunov_eval(unit, sys, nu, Vector::Ones(1), 1.0), Error);
  // rho = 0.25: int_0^2 s^{1/2} ds = (2/3) 2^{3/2}
  CHECK(lyapunov_eval(Vector{{2.0}}, sys, nu, Vector::Ones(1), 0.25) ==
        doctest::Approx(std::pow(2.0, nu) + 2.0 / 3.0 * std::pow(2.0, 1.5)).epsilon(1e-9));
}
