#include <cmath>

#include "ddfl/rng.hpp"
#include "ddfl/solver.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace ddfl;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = rng.normal();
  return a;
}

ConstrainedNllsProblem linear_problem(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::MatrixXd& A,
                                      const Eigen::VectorXd& b, double reg = 0.0) {
  ConstrainedNllsProblem p;
  p.residual = [M, y](const Eigen::VectorXd& alpha) { return (M * alpha - y).eval(); };
  p.residual_jacobian = [M](const Eigen::VectorXd&) { return M; };
  p.A_eq = A;
  p.b_eq = b;
  p.reg_weight = reg;
  p.dim = static_cast<int>(M.cols());
  return p;
}

}  // namespace

TEST_CASE("linear constrained least squares matches the KKT oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd M = random_matrix(rng, 10, 6);
    const Eigen::VectorXd y = random_matrix(rng, 10, 1);
    const Eigen::MatrixXd A = random_matrix(rng, 2, 6);
    const Eigen::VectorXd b = random_matrix(rng, 2, 1);
    const SolveResult res = solve(linear_problem(M, y, A, b));
    const Eigen::VectorXd oracle = oracles::kkt_solve(M, y, A, b);
    CHECK(res.converged);
    CHECK((res.alpha_star - oracle).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(res.constraint_violation <= 1e-10);
  }
}

TEST_CASE("regularized linear case matches the ridge KKT oracle") {
  Rng rng(2);
  const Eigen::MatrixXd M = random_matrix(rng, 8, 5);
  const Eigen::VectorXd y = random_matrix(rng, 8, 1);
  const Eigen::MatrixXd A = random_matrix(rng, 1, 5);
  const Eigen::VectorXd b = random_matrix(rng, 1, 1);
  const double reg = 0.3;
  const SolveResult res = solve(linear_problem(M, y, A, b, reg));
  const Eigen::VectorXd oracle = oracles::kkt_solve(M, y, A, b, reg);
  CHECK((res.alpha_star - oracle).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("identity residual with a sum constraint projects onto the hyperplane") {
  const int dim = 5;
  Eigen::VectorXd c(dim);
  c << 1, -2, 0.5, 3, -1;
  const double target = 4.0;
  ConstrainedNllsProblem p;
  p.residual = [c](const Eigen::VectorXd& alpha) { return (alpha - c).eval(); };
  p.residual_jacobian = [dim](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(dim, dim).eval(); };
  p.A_eq = Eigen::MatrixXd::Ones(1, dim);
  p.b_eq = Eigen::VectorXd::Constant(1, target);
  p.dim = dim;
  const SolveResult res = solve(p);
  const Eigen::VectorXd expected = c.array() + (target - c.sum()) / dim;
  CHECK((res.alpha_star - expected).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("huge regularization drives the solution to the least-norm feasible point") {
  Rng rng(3);
  const Eigen::MatrixXd A = random_matrix(rng, 2, 6);
  const Eigen::VectorXd b = random_matrix(rng, 2, 1);
  Eigen::VectorXd c(6);
  for (int i = 0; i < 6; ++i) c(i) = rng.normal();
  ConstrainedNllsProblem p;
  p.residual = [c](const Eigen::VectorXd& alpha) { return (alpha - c).eval(); };
  p.residual_jacobian = [](const Eigen::VectorXd& a) { return Eigen::MatrixXd::Identity(a.size(), a.size()).eval(); };
  p.A_eq = A;
  p.b_eq = b;
  p.reg_weight = 1e12;
  p.dim = 6;
  const SolveResult res = solve(p);
  const FeasibleParameterization fp = feasible_parameterization(A, b);
  CHECK((res.alpha_star - fp.alpha_p).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("feasible parameterization basics") {
  SUBCASE("explicit 1x2 case") {
    Eigen::MatrixXd A(1, 2);
    A << 1, 0;
    const FeasibleParameterization fp = feasible_parameterization(A, Eigen::VectorXd::Constant(1, 1.0));
    CHECK((fp.alpha_p - Eigen::Vector2d(1, 0)).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK(fp.Z.rows() == 2);
    CHECK(fp.Z.cols() == 1);
    CHECK(std::abs(std::abs(fp.Z(1, 0)) - 1.0) <= 1e-14);
    CHECK(std::abs(fp.Z(0, 0)) <= 1e-14);
  }

  SUBCASE("homogeneous system has the zero least-norm solution") {
    Rng rng(4);
    const Eigen::MatrixXd A = random_matrix(rng, 3, 7);
    const FeasibleParameterization fp = feasible_parameterization(A, Eigen::VectorXd::Zero(3));
    CHECK(fp.alpha_p.lpNorm<Eigen::Infinity>() <= 1e-12);
  }

  SUBCASE("alpha_p + Z beta sweeps the feasible set") {
    Rng rng(5);
    const Eigen::MatrixXd A = random_matrix(rng, 3, 9);
    const Eigen::VectorXd b = random_matrix(rng, 3, 1);
    const FeasibleParameterization fp = feasible_parameterization(A, b);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd beta(fp.Z.cols());
      for (int i = 0; i < beta.size(); ++i) beta(i) = rng.normal();
      CHECK((A * (fp.alpha_p + fp.Z * beta) - b).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }

  SUBCASE("rank-deficient but consistent constraints pass through") {
    Eigen::MatrixXd A(2, 3);
    A << 1, 1, 0, 2, 2, 0;
    Eigen::VectorXd b(2);
    b << 1, 2;
    const FeasibleParameterization fp = feasible_parameterization(A, b);
    CHECK(fp.rank == 1);
    CHECK(fp.Z.cols() == 2);
    CHECK((A * fp.alpha_p - b).lpNorm<Eigen::Infinity>() <= 1e-12);
  }

  SUBCASE("inconsistent constraints raise an infeasibility error") {
    Eigen::MatrixXd A(2, 2);
    A << 1, 0, 1, 0;
    Eigen::VectorXd b(2);
    b << 1, 2;
    CHECK_THROWS_AS(feasible_parameterization(A, b), InfeasibleError);
  }
}

TEST_CASE("nonlinear solve: Rosenbrock-style residual under a constraint") {
  // rho(a) = [10(a2 - a1^2); 1 - a1], s.t. a1 + a2 + a3 = 2
  ConstrainedNllsProblem p;
  p.residual = [](const Eigen::VectorXd& a) {
    Eigen::VectorXd r(2);
    r << 10 * (a(1) - a(0) * a(0)), 1 - a(0);
    return r;
  };
  p.residual_jacobian = [](const Eigen::VectorXd& a) {
    Eigen::MatrixXd J(2, 3);
    J << -20 * a(0), 10, 0, -1, 0, 0;
    return J;
  };
  p.A_eq = Eigen::MatrixXd::Ones(1, 3);
  p.b_eq = Eigen::VectorXd::Constant(1, 2.0);
  p.dim = 3;
  const SolveResult res = solve(p);
  CHECK(res.converged);
  // a = (1, 1, 0) is feasible with zero residual
  CHECK(res.residual_mass <= 1e-18);
  CHECK(std::abs(res.alpha_star(0) - 1.0) <= 1e-7);
  CHECK(std::abs(res.alpha_star(1) - 1.0) <= 1e-7);
  CHECK(res.constraint_violation <= 1e-10);
}

TEST_CASE("objective never exceeds the value at the feasible start") {
  Rng rng(6);
  const Eigen::MatrixXd M = random_matrix(rng, 12, 8);
  const Eigen::VectorXd y = random_matrix(rng, 12, 1);
  const Eigen::MatrixXd A = random_matrix(rng, 2, 8);
  const Eigen::VectorXd b = random_matrix(rng, 2, 1);
  const ConstrainedNllsProblem p = linear_problem(M, y, A, b, 0.05);
  const FeasibleParameterization fp = feasible_parameterization(A, b);
  const double at_start = (M * fp.alpha_p - y).squaredNorm() + 0.05 * fp.alpha_p.squaredNorm();
  const SolveResult res = solve(p);
  CHECK(res.objective <= at_start + 1e-12);
  CHECK(res.residual_mass >= 0.0);
}

TEST_CASE("a wrong analytic Jacobian is refused") {
  Rng rng(7);
  const Eigen::MatrixXd M = random_matrix(rng, 6, 4);
  const Eigen::VectorXd y = random_matrix(rng, 6, 1);
  ConstrainedNllsProblem p = linear_problem(M, y, Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::Ones(1));
  p.residual_jacobian = [M](const Eigen::VectorXd&) { return (2.0 * M).eval(); };
  CHECK_THROWS_AS(solve(p), NumericalError);
}

TEST_CASE("iteration cap yields a flagged, not silent, result") {
  ConstrainedNllsProblem p;
  p.residual = [](const Eigen::VectorXd& a) {
    Eigen::VectorXd r(2);
    r << std::exp(a(0)) - 2.0, 10 * (a(1) - a(0) * a(0));
    return r;
  };
  p.A_eq = Eigen::MatrixXd::Zero(0, 2);
  p.b_eq = Eigen::VectorXd::Zero(0);
  p.dim = 2;
  SolverConfig cfg;
  cfg.max_iter = 1;
  const SolveResult res = solve(p, cfg);
  CHECK_FALSE(res.converged);
  CHECK(res.message == "max iterations reached");
}

TEST_CASE("finite-difference fallback solves without an analytic Jacobian") {
  Rng rng(8);
  const Eigen::MatrixXd M = random_matrix(rng, 8, 5);
  const Eigen::VectorXd y = random_matrix(rng, 8, 1);
  const Eigen::MatrixXd A = random_matrix(rng, 1, 5);
  const Eigen::VectorXd b = random_matrix(rng, 1, 1);
  ConstrainedNllsProblem p = linear_problem(M, y, A, b);
  p.residual_jacobian = nullptr;
  const SolveResult res = solve(p);
  const Eigen::VectorXd oracle = oracles::kkt_solve(M, y, A, b);
  CHECK((res.alpha_star - oracle).lpNorm<Eigen::Infinity>() <= 1e-6);
}
