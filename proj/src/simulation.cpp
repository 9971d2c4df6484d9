#include "ddfl/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddfl {

void SimulationTask::validate() const {
  data.validate();
  dict.validate();
  const auto& s = data.structure;
  if (dict.m != s.m || dict.n != s.n) throw DimensionError("simulation task: dictionary dimensions do not match data");
  const int L = horizon();
  if (L < 1 || L > data.length())
    throw DimensionError("simulation task: horizon L=" + std::to_string(L) + " out of range for N=" +
                         std::to_string(data.length()));
  if (ubar.rows() != s.m) throw DimensionError("simulation task: ubar channel count mismatch");
  if (xi0_bar.size() != s.n)
    throw DimensionError("simulation task: initial state window must have n=" + std::to_string(s.n) + " entries");
  if (lambda <= 0.0) throw StructureError("simulation task: lambda must be positive");
}

double error_bound(int k, const BoundParams& bounds, double alpha_l1, double b, BoundKind kind) {
  if (k < 0) throw ContractViolation("error_bound: negative step index");
  if (b < -1e-12) throw ContractViolation("error_bound: negative residual mass b=" + std::to_string(b));
  b = std::max(0.0, b);
  const double coeff = kind == BoundKind::Simulation ? bounds.g_inf : bounds.g_inf + 1.0;
  const double base = bounds.eps_star * (1.0 + alpha_l1) + coeff * std::sqrt(b) +
                      bounds.w_star * (1.0 + bounds.K_w) * alpha_l1;
  // P^k(K_Xi) = K^k + ... + K + 1, evaluated iteratively; saturates at +inf
  double p = 1.0, power = 1.0;
  for (int j = 1; j <= k; ++j) {
    power *= bounds.K_Xi;
    p += power;
    if (!std::isfinite(p)) return std::numeric_limits<double>::infinity();
  }
  return p * base;
}

namespace {

Eigen::MatrixXd evaluate_dictionary_sequence(const BasisDictionary& dict, const Eigen::MatrixXd& inputs,
                                             const Eigen::MatrixXd& states) {
  const int N = static_cast<int>(inputs.cols());
  Eigen::MatrixXd psi(dict.r, N);
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd val = dict.eval(inputs.col(k), states.col(k));
    if (!val.allFinite())
      throw EvaluationError("dictionary evaluation produced non-finite values at data sample " + std::to_string(k));
    psi.col(k) = val;
  }
  return psi;
}

}  // namespace

SimulationProblem build_simulation_residual(const SimulationTask& task) {
  task.validate();
  const auto& s = task.data.structure;
  const int L = task.horizon();
  const int r = task.dict.r;

  SimulationProblem problem;
  const StateSequence xi = build_state_sequence(task.data);
  problem.psi_data = evaluate_dictionary_sequence(task.dict, task.data.inputs, xi.states.leftCols(task.data.length()));
  problem.h_psi = hankel(problem.psi_data, L);
  problem.h_xi = hankel(xi.states, L + 1);

  const Eigen::MatrixXd h_psi = problem.h_psi.data;
  const HankelMatrix h_xi = problem.h_xi;
  const Eigen::MatrixXd ubar = task.ubar;
  const BasisDictionary dict = task.dict;
  const int n = s.n;

  problem.nlls.dim = static_cast<int>(h_psi.cols());
  problem.nlls.A_eq = h_xi.block_row(0);
  problem.nlls.b_eq = task.xi0_bar;
  problem.nlls.reg_weight = task.lambda * std::max(task.bounds.eps_star, task.bounds.w_star);

  problem.nlls.residual = [h_psi, h_xi, ubar, dict, L, r](const Eigen::VectorXd& alpha) {
    Eigen::VectorXd rho = h_psi * alpha;
    for (int k = 0; k < L; ++k) {
      const Eigen::VectorXd state = h_xi.block_row(k) * alpha;
      Eigen::VectorXd psi_bar;
      try {
        psi_bar = dict.eval(ubar.col(k), state);
      } catch (const std::exception& e) {
        throw EvaluationError("dictionary evaluation failed at simulation step " + std::to_string(k) + ": " + e.what());
      }
      if (!psi_bar.allFinite())
        throw EvaluationError("dictionary evaluation non-finite at simulation step " + std::to_string(k) +
                              " (estimated state left the dictionary domain)");
      rho.segment(static_cast<Eigen::Index>(k) * r, r) -= psi_bar;
    }
    return rho;
  };

  if (dict.jac_xi) {
    problem.nlls.residual_jacobian = [h_psi, h_xi, ubar, dict, L, r, n](const Eigen::VectorXd& alpha) {
      Eigen::MatrixXd jac = h_psi;
      for (int k = 0; k < L; ++k) {
        const Eigen::VectorXd state = h_xi.block_row(k) * alpha;
        const Eigen::MatrixXd dpsi = dict.jac_xi(ubar.col(k), state);  // r x n
        jac.middleRows(static_cast<Eigen::Index>(k) * r, r).noalias() -= dpsi * h_xi.block_row(k);
      }
      return jac;
    };
  }
  return problem;
}

SimulationOutcome simulate(const SimulationTask& task) {
  const SimulationProblem problem = build_simulation_residual(task);
  const auto& s = task.data.structure;
  const int L = task.horizon();

  SolveResult solved;
  try {
    solved = solve(problem.nlls, task.solver);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(std::string(e.what()) +
                              "; initial condition not representable - check the row rank of H_1(Xi_[0,N-L])",
                          e.least_squares_residual);
  }

  SimulationOutcome outcome;
  outcome.solve = solved;
  outcome.alpha_star = solved.alpha_star;
  outcome.objective = solved.objective;
  outcome.b = solved.residual_mass;

  // estimated outputs: yhat_i = H_{L+d_i}(ytilde_i) alpha*; the constraint
  // pins the first d_i samples to the given initial window
  outcome.yhat.resize(static_cast<std::size_t>(s.m));
  int offset = 0;
  for (int i = 0; i < s.m; ++i) {
    const Eigen::MatrixXd yseq = task.data.outputs[static_cast<std::size_t>(i)].transpose();
    const HankelMatrix h_y = hankel(yseq, L + s.d[static_cast<std::size_t>(i)]);
    outcome.yhat[static_cast<std::size_t>(i)] = h_y.data * solved.alpha_star;
    outcome.yhat[static_cast<std::size_t>(i)].head(s.d[static_cast<std::size_t>(i)]) =
        task.xi0_bar.segment(offset, s.d[static_cast<std::size_t>(i)]);
    offset += s.d[static_cast<std::size_t>(i)];
  }

  const double alpha_l1 = solved.alpha_star.lpNorm<1>();
  outcome.bound_curve.resize(L);
  for (int k = 0; k < L; ++k)
    outcome.bound_curve(k) = error_bound(k, task.bounds, alpha_l1, outcome.b, BoundKind::Simulation);
  outcome.bounds_advisory = !task.bounds.oracle_backed;
  return outcome;
}

std::vector<NuSweepEntry> nu_sweep(const NuSweepFactory& factory, const std::vector<double>& scales,
                                   const std::vector<std::uint64_t>& seeds) {
  std::vector<NuSweepEntry> table;
  for (double scale : scales) {
    NuSweepEntry entry;
    entry.scale = scale;
    entry.pe_ok = true;
    std::vector<double> nus;
    for (std::uint64_t seed : seeds) {
      const NuSweepCase c = factory(scale, seed);
      const SimulationOutcome outcome = simulate(c.task);
      double err = 0.0;
      for (std::size_t i = 0; i < c.ybar.size(); ++i)
        err = std::max(err, (c.ybar[i] - outcome.yhat[i]).lpNorm<Eigen::Infinity>());
      entry.errors.push_back(err);
      nus.push_back(std::max(c.task.bounds.eps_star, c.task.bounds.w_star));

      const StateSequence xi = build_state_sequence(c.task.data);
      Eigen::MatrixXd psi(c.task.dict.r, c.task.data.length());
      for (int k = 0; k < c.task.data.length(); ++k)
        psi.col(k) = c.task.dict.eval(c.task.data.inputs.col(k), xi.states.col(k));
      const PeDecision pe = is_persistently_exciting(psi, c.task.horizon() + c.task.data.structure.n);
      if (!pe.is_pe) entry.pe_ok = false;
    }
    auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const std::size_t h = v.size() / 2;
      return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    };
    entry.median_err_inf = median(entry.errors);
    entry.nu = median(nus);
    table.push_back(std::move(entry));
  }
  return table;
}

}  // namespace ddfl
