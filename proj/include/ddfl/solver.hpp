#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "ddfl/errors.hpp"

namespace ddfl {

struct SolverConfig {
  double grad_tol = 1e-10;
  double step_tol = 1e-12;
  int max_iter = 200;
  bool check_jacobian = true;  // verify analytic Jacobians against finite differences at the start
  double jacobian_check_tol = 1e-4;
  double fd_step = 1e-6;
  double feasibility_tol = 1e-8;
};

// Equality-constrained, ridge-regularized nonlinear least squares:
//   min_alpha ||residual(alpha)||_2^2 + reg_weight * ||alpha||_2^2
//   s.t. A_eq alpha = b_eq
struct ConstrainedNllsProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> residual_jacobian;  // optional
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  double reg_weight = 0.0;
  int dim = 0;  // length of alpha
};

struct SolveResult {
  Eigen::VectorXd alpha_star;
  double objective = 0.0;           // J(alpha*)
  double residual_mass = 0.0;       // b = ||residual(alpha*)||^2, clipped at 0
  double raw_residual_mass = 0.0;   // J(alpha*) - reg_weight ||alpha*||^2 before clipping
  int iterations = 0;
  bool converged = false;
  double constraint_violation = 0.0;       // ||A_eq alpha* - b_eq||_inf
  double projected_gradient_norm = 0.0;    // stationarity on the reduced problem
  std::string message;
};

struct FeasibleParameterization {
  Eigen::VectorXd alpha_p;  // least-norm solution of A_eq alpha = b_eq
  Eigen::MatrixXd Z;        // orthonormal basis of null(A_eq); feasible set = alpha_p + range(Z)
  int rank = 0;
};

FeasibleParameterization feasible_parameterization(const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                                   double feasibility_tol = 1e-8);

SolveResult solve(const ConstrainedNllsProblem& problem, const SolverConfig& config = {});

}  // namespace ddfl
