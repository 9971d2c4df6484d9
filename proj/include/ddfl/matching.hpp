#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ddfl/plant.hpp"
#include "ddfl/simulation.hpp"

namespace ddfl {

// Output-matching task: recover the input that makes the system track the
// per-channel references ybar, using only the recorded noisy data.
struct MatchingTask {
  Trajectory data;
  std::vector<Eigen::VectorXd> ybar;  // channel i: L + d_i reference samples
  BasisDictionary dict;
  BoundParams bounds;
  double lambda = 0.1;
  SolverConfig solver;

  int horizon() const;
  void validate() const;
};

struct MatchingOutcome {
  Eigen::VectorXd alpha_star;
  Eigen::MatrixXd uhat;  // m x L, the estimated input H_L(u) alpha*
  double b = 0.0;
  double objective = 0.0;
  Eigen::VectorXd bound_curve;  // Eq.-(20)-style bound on |e_{i,k+d_i}|
  bool bounds_advisory = false;
  SolveResult solve;
};

struct MatchingProblem {
  ConstrainedNllsProblem nlls;
  Eigen::MatrixXd psi_data;   // r x N
  HankelMatrix h_psi;         // depth L
  HankelMatrix h_xi;          // depth L+1 (noisy data states)
  HankelMatrix h_u;           // depth L (recorded inputs)
  Eigen::MatrixXd xi_bar;     // n x (L+1) reference state sequence
};

MatchingProblem build_matching_residual(const MatchingTask& task);

MatchingOutcome match_output(const MatchingTask& task);

// Applies uhat to the true plant from the reference initial state and
// compares against the reference outputs. When the task's bound parameters
// are oracle-backed, the per-step errors are checked against the bound curve.
struct ClosedLoopReport {
  std::vector<Eigen::VectorXd> outputs;  // achieved outputs per channel
  std::vector<Eigen::VectorXd> errors;   // ybar - achieved
  double max_abs_error = 0.0;
  bool bound_checked = false;
  bool bound_satisfied = true;
};

ClosedLoopReport verify_closed_loop(const PendulumPlant& plant, const MatchingTask& task,
                                    const MatchingOutcome& outcome);

}  // namespace ddfl
