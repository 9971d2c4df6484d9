#include "ddfl/matching.hpp"

#include <cmath>

namespace ddfl {

int MatchingTask::horizon() const {
  if (ybar.empty() || data.structure.d.empty()) return 0;
  return static_cast<int>(ybar[0].size()) - data.structure.d[0];
}

void MatchingTask::validate() const {
  data.validate();
  dict.validate();
  const auto& s = data.structure;
  if (!dict.input_complete && !dict.input_injective)
    throw StructureError("matching task: dictionary must contain the inputs or be injective in u");
  if (static_cast<int>(ybar.size()) != s.m) throw DimensionError("matching task: one reference per output channel required");
  const int L = horizon();
  if (L < 1 || L > data.length())
    throw DimensionError("matching task: reference horizon L=" + std::to_string(L) + " out of range for N=" +
                         std::to_string(data.length()));
  for (int i = 0; i < s.m; ++i)
    if (static_cast<int>(ybar[static_cast<std::size_t>(i)].size()) != L + s.d[static_cast<std::size_t>(i)])
      throw DimensionError("matching task: reference channel " + std::to_string(i + 1) + " must have L+d_i samples");
  if (lambda <= 0.0) throw StructureError("matching task: lambda must be positive");
}

namespace {

// reference state sequence Xi_bar_k, k = 0..L, from shifted reference outputs
Eigen::MatrixXd reference_states(const MatchingTask& task) {
  const auto& s = task.data.structure;
  const int L = task.horizon();
  Eigen::MatrixXd xi(s.n, L + 1);
  for (int k = 0; k <= L; ++k) {
    int row = 0;
    for (int i = 0; i < s.m; ++i) {
      xi.col(k).segment(row, s.d[static_cast<std::size_t>(i)]) =
          task.ybar[static_cast<std::size_t>(i)].segment(k, s.d[static_cast<std::size_t>(i)]);
      row += s.d[static_cast<std::size_t>(i)];
    }
  }
  return xi;
}

}  // namespace

MatchingProblem build_matching_residual(const MatchingTask& task) {
  task.validate();
  const int L = task.horizon();
  const int r = task.dict.r;

  MatchingProblem problem;
  const StateSequence xi = build_state_sequence(task.data);
  problem.xi_bar = reference_states(task);

  problem.psi_data.resize(r, task.data.length());
  for (int k = 0; k < task.data.length(); ++k) {
    problem.psi_data.col(k) = task.dict.eval(task.data.inputs.col(k), xi.states.col(k));
    if (!problem.psi_data.col(k).allFinite())
      throw EvaluationError("dictionary evaluation produced non-finite values at data sample " + std::to_string(k));
  }
  problem.h_psi = hankel(problem.psi_data, L);
  problem.h_xi = hankel(xi.states, L + 1);
  problem.h_u = hankel(task.data.inputs, L);

  const Eigen::MatrixXd h_psi = problem.h_psi.data;
  const HankelMatrix h_xi = problem.h_xi;
  const HankelMatrix h_u = problem.h_u;
  const Eigen::MatrixXd xi_bar = problem.xi_bar;
  const Eigen::VectorXd xi_bar_stacked = Eigen::Map<const Eigen::VectorXd>(xi_bar.data(), xi_bar.size());
  const BasisDictionary dict = task.dict;

  problem.nlls.dim = static_cast<int>(h_psi.cols());
  problem.nlls.A_eq = h_xi.block_row(0);
  problem.nlls.b_eq = xi_bar.col(0);
  problem.nlls.reg_weight = task.lambda * std::max(task.bounds.eps_star, task.bounds.w_star);

  const Eigen::Index psi_rows = h_psi.rows();
  const Eigen::Index xi_rows = h_xi.data.rows();

  problem.nlls.residual = [h_psi, h_xi, h_u, xi_bar, xi_bar_stacked, dict, L, r, psi_rows,
                           xi_rows](const Eigen::VectorXd& alpha) {
    Eigen::VectorXd rho(psi_rows + xi_rows);
    rho.head(psi_rows) = h_psi * alpha;
    for (int k = 0; k < L; ++k) {
      const Eigen::VectorXd input = h_u.block_row(k) * alpha;
      Eigen::VectorXd psi_bar;
      try {
        psi_bar = dict.eval(input, xi_bar.col(k));
      } catch (const std::exception& e) {
        throw EvaluationError("dictionary evaluation failed at matching step " + std::to_string(k) + ": " + e.what());
      }
      if (!psi_bar.allFinite())
        throw EvaluationError("dictionary evaluation non-finite at matching step " + std::to_string(k));
      rho.segment(static_cast<Eigen::Index>(k) * r, r) -= psi_bar;
    }
    rho.tail(xi_rows) = h_xi.data * alpha - xi_bar_stacked;
    return rho;
  };

  if (dict.jac_u) {
    problem.nlls.residual_jacobian = [h_psi, h_xi, h_u, xi_bar, dict, L, r, psi_rows,
                                      xi_rows](const Eigen::VectorXd& alpha) {
      Eigen::MatrixXd jac(psi_rows + xi_rows, h_psi.cols());
      jac.topRows(psi_rows) = h_psi;
      for (int k = 0; k < L; ++k) {
        const Eigen::VectorXd input = h_u.block_row(k) * alpha;
        const Eigen::MatrixXd dpsi = dict.jac_u(input, xi_bar.col(k));  // r x m
        jac.middleRows(static_cast<Eigen::Index>(k) * r, r).noalias() -= dpsi * h_u.block_row(k);
      }
      jac.bottomRows(xi_rows) = h_xi.data;
      return jac;
    };
  }
  return problem;
}

MatchingOutcome match_output(const MatchingTask& task) {
  const MatchingProblem problem = build_matching_residual(task);
  const int L = task.horizon();
  const int m = task.data.structure.m;

  SolveResult solved;
  try {
    solved = solve(problem.nlls, task.solver);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string(e.what()) +
                              "; reference initial state not representable - check the row rank of H_1(Xi_[0,N-L])",
                          e.least_squares_residual);
  }

  MatchingOutcome outcome;
  outcome.solve = solved;
  outcome.alpha_star = solved.alpha_star;
  outcome.objective = solved.objective;
  outcome.b = solved.residual_mass;

  const Eigen::VectorXd uhat_stacked = problem.h_u.data * solved.alpha_star;
  outcome.uhat = Eigen::Map<const Eigen::MatrixXd>(uhat_stacked.data(), m, L);

  const double alpha_l1 = solved.alpha_star.lpNorm<1>();
  outcome.bound_curve.resize(L);
  for (int k = 0; k < L; ++k)
    outcome.bound_curve(k) = error_bound(k, task.bounds, alpha_l1, outcome.b, BoundKind::Matching);
  outcome.bounds_advisory = !task.bounds.oracle_backed;
  return outcome;
}

ClosedLoopReport verify_closed_loop(const PendulumPlant& plant, const MatchingTask& task,
                                    const MatchingOutcome& outcome) {
  const auto& s = task.data.structure;
  const int L = task.horizon();
  Eigen::MatrixXd xi_bar = reference_states(task);
  const PlantState x0 = plant.inverse_transform(xi_bar.col(0));
  const RolloutData run = rollout(plant, x0, outcome.uhat, s);

  ClosedLoopReport report;
  report.outputs.resize(static_cast<std::size_t>(s.m));
  report.errors.resize(static_cast<std::size_t>(s.m));
  for (int i = 0; i < s.m; ++i) {
    report.outputs[static_cast<std::size_t>(i)] = run.trajectory.outputs[static_cast<std::size_t>(i)];
    report.errors[static_cast<std::size_t>(i)] =
        task.ybar[static_cast<std::size_t>(i)] - report.outputs[static_cast<std::size_t>(i)];
    report.max_abs_error =
        std::max(report.max_abs_error, report.errors[static_cast<std::size_t>(i)].lpNorm<Eigen::Infinity>());
  }

  if (task.bounds.oracle_backed) {
    report.bound_checked = true;
    for (int i = 0; i < s.m && report.bound_satisfied; ++i) {
      const int di = s.d[static_cast<std::size_t>(i)];
      for (int k = 0; k < L; ++k) {
        if (std::abs(report.errors[static_cast<std::size_t>(i)](k + di)) > outcome.bound_curve(k)) {
          report.bound_satisfied = false;
          break;
        }
      }
    }
  }
  return report;
}

}  // namespace ddfl
