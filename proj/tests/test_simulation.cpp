#include <cmath>

#include "ddfl/experiment.hpp"
#include "ddfl/simulation.hpp"
#include "doctest.h"

using namespace ddfl;

namespace {

ExperimentConfig small_cfg(int N, double w_star, double perturbation, int L) {
  ExperimentConfig cfg;
  cfg.N = N;
  cfg.w_star = w_star;
  cfg.perturbation = perturbation;
  cfg.L = L;
  cfg.grid_points = 3;
  cfg.validation_grid_points = 4;
  cfg.seed = 11;
  return cfg;
}

struct Setup {
  ExperimentConfig cfg;
  CollectResult data;
  FitArtifacts arts;
  EvalRollout eval;
};

Setup make_setup(int N, double w_star, double perturbation, int L) {
  Setup s{small_cfg(N, w_star, perturbation, L), {}, {}, {}};
  const PendulumPlant plant = make_plant(s.cfg);
  s.data = collect_data(plant, make_collect_controller(s.cfg), s.cfg.N, s.cfg.w_star, s.cfg.seed, s.cfg.omega);
  s.arts = fit_pipeline(s.cfg, perturbation > 0 ? 1.0 : 0.0, s.cfg.seed);
  s.eval = make_eval_rollout(s.cfg, L);
  return s;
}

}  // namespace

TEST_CASE("error bound formula") {
  BoundParams bp;
  bp.eps_star = 0.5;
  bp.w_star = 0.01;
  bp.K_Xi = 0.5;
  bp.K_w = 2.0;
  bp.g_inf = 1.5;

  SUBCASE("k = 0 multiplier is one") {
    const double base = 0.5 * (1 + 3.0) + 1.5 * std::sqrt(0.04) + 0.01 * 3.0 * 3.0;
    CHECK(error_bound(0, bp, 3.0, 0.04, BoundKind::Simulation) == doctest::Approx(base));
  }

  SUBCASE("matching swaps in the (g_inf + 1) coefficient") {
    const double sim = error_bound(0, bp, 3.0, 0.04, BoundKind::Simulation);
    const double match = error_bound(0, bp, 3.0, 0.04, BoundKind::Matching);
    CHECK(match - sim == doctest::Approx(std::sqrt(0.04)));
  }

  SUBCASE("geometric multiplier approaches 1/(1-K) for K < 1") {
    const double b0 = error_bound(0, bp, 1.0, 0.0, BoundKind::Simulation);
    const double blarge = error_bound(200, bp, 1.0, 0.0, BoundKind::Simulation);
    CHECK(blarge == doctest::Approx(2.0 * b0).epsilon(1e-10));
  }

  SUBCASE("nominal limit is zero") {
    BoundParams zero;
    zero.K_Xi = 0.7;
    CHECK(error_bound(5, zero, 10.0, 0.0, BoundKind::Simulation) == 0.0);
  }

  SUBCASE("bound grows with k") {
    bp.K_Xi = 1.3;
    double prev = 0.0;
    for (int k = 0; k < 30; ++k) {
      const double v = error_bound(k, bp, 1.0, 0.1, BoundKind::Simulation);
      CHECK(v >= prev);
      prev = v;
    }
  }

  SUBCASE("negative residual mass violates the contract") {
    CHECK_THROWS_AS(error_bound(0, bp, 1.0, -1e-3, BoundKind::Simulation), ContractViolation);
  }

  SUBCASE("divergent multipliers saturate at infinity instead of NaN") {
    bp.K_Xi = 1e6;
    const double v = error_bound(100, bp, 1.0, 0.1, BoundKind::Simulation);
    CHECK(std::isinf(v));
  }
}

TEST_CASE("simulation residual vanishes on a data window (unit coordinate alpha)") {
  const Setup s = make_setup(80, 0.0, 0.0, 10);
  const int L = 10, at = 5;

  SimulationTask task;
  task.data = s.data.noiseless;
  task.ubar = s.data.noiseless.inputs.middleCols(at, L);
  const StateSequence xi = build_state_sequence(s.data.noiseless);
  task.xi0_bar = xi.states.col(at);
  task.dict = s.arts.dict;
  task.bounds = s.arts.bounds;

  const SimulationProblem problem = build_simulation_residual(task);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(problem.nlls.dim);
  alpha(at) = 1.0;
  CHECK(problem.nlls.residual(alpha).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((problem.nlls.A_eq * alpha - problem.nlls.b_eq).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("simulation residual matches a naive per-step evaluation") {
  const Setup s = make_setup(60, 0.01, 0.05, 8);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noisy, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationProblem problem = build_simulation_residual(task);

  Rng rng(17);
  const int M = problem.nlls.dim;
  const int L = 8, r = s.arts.dict.r;
  const StateSequence xi = build_state_sequence(s.data.noisy);
  Eigen::MatrixXd psi(r, s.cfg.N);
  for (int k = 0; k < s.cfg.N; ++k) psi.col(k) = s.arts.dict.eval(s.data.noisy.inputs.col(k), xi.states.col(k));

  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd alpha(M);
    for (int i = 0; i < M; ++i) alpha(i) = rng.uniform(-0.2, 0.2);
    const Eigen::VectorXd rho = problem.nlls.residual(alpha);
    REQUIRE(rho.size() == r * L);
    for (int k = 0; k < L; ++k) {
      // naive: sum_j alpha_j psi_{k+j} - Psi(ubar_k, sum_j alpha_j xi_{k+j})
      Eigen::VectorXd lhs = Eigen::VectorXd::Zero(r);
      Eigen::VectorXd state = Eigen::VectorXd::Zero(4);
      for (int j = 0; j < M; ++j) {
        lhs += alpha(j) * psi.col(k + j);
        state += alpha(j) * xi.states.col(k + j);
      }
      const Eigen::VectorXd expected = lhs - s.arts.dict.eval(task.ubar.col(k), state);
      CHECK((rho.segment(k * r, r) - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("degenerate horizon L=1 gives an r-vector residual") {
  const Setup s = make_setup(40, 0.0, 0.0, 1);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noiseless, s.arts, s.eval.ubar.leftCols(1), s.eval.xi0);
  const SimulationProblem problem = build_simulation_residual(task);
  CHECK(problem.nlls.residual(Eigen::VectorXd::Zero(problem.nlls.dim)).size() == s.arts.dict.r);
}

TEST_CASE("nominal simulation reproduces the true outputs") {
  const Setup s = make_setup(150, 0.0, 0.0, 15);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noiseless, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationOutcome outcome = simulate(task);
  CHECK(outcome.solve.converged);
  CHECK(max_inf_error(s.eval.ybar, outcome.yhat) <= 1e-6);
  CHECK(outcome.b <= 1e-12);
}

TEST_CASE("estimated outputs pin the initial window exactly") {
  const Setup s = make_setup(100, 0.01, 0.05, 12);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noisy, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationOutcome outcome = simulate(task);
  int offset = 0;
  for (int i = 0; i < 2; ++i) {
    const int di = task.data.structure.d[static_cast<std::size_t>(i)];
    for (int k = 0; k < di; ++k) CHECK(outcome.yhat[static_cast<std::size_t>(i)](k) == task.xi0_bar(offset + k));
    offset += di;
  }
}

TEST_CASE("noisy simulation stays within the theorem bound") {
  const Setup s = make_setup(120, 0.01, 0.05, 10);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noisy, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationOutcome outcome = simulate(task);
  CHECK_FALSE(outcome.bounds_advisory);
  const BoundCheck check = check_bound_validity(task.data.structure, s.eval.ybar, outcome.yhat, outcome.bound_curve);
  CHECK(check.ok);
  CHECK(outcome.bound_curve.minCoeff() > 0.0);
}

TEST_CASE("solution improves on the least-norm feasible start") {
  const Setup s = make_setup(90, 0.01, 0.05, 8);
  const SimulationTask task = make_simulation_task(s.cfg, s.data.noisy, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationProblem problem = build_simulation_residual(task);
  const FeasibleParameterization fp = feasible_parameterization(problem.nlls.A_eq, problem.nlls.b_eq);
  const double at_start =
      problem.nlls.residual(fp.alpha_p).squaredNorm() + problem.nlls.reg_weight * fp.alpha_p.squaredNorm();
  const SimulationOutcome outcome = simulate(task);
  CHECK(outcome.objective <= at_start + 1e-12);
}

TEST_CASE("infeasible initial conditions surface as infeasibility errors") {
  Setup s = make_setup(40, 0.0, 0.0, 6);
  // constant-output fake data makes H_1(Xi) rank one
  Trajectory degenerate = s.data.noiseless;
  for (int i = 0; i < 2; ++i) degenerate.outputs[static_cast<std::size_t>(i)].setConstant(0.3);
  SimulationTask task = make_simulation_task(s.cfg, degenerate, s.arts, s.eval.ubar.leftCols(6), s.eval.xi0);
  task.xi0_bar << 0.1, 0.2, 0.3, 0.4;  // not in the span
  CHECK_THROWS_AS(simulate(task), InfeasibleError);
}

TEST_CASE("nu sweep reports non-increasing medians toward the nominal limit") {
  ExperimentConfig cfg = small_cfg(140, 0.01, 0.05, 10);
  const EvalRollout eval = make_eval_rollout(cfg, cfg.L);
  const NuSweepFactory factory = make_sweep_factory(cfg, eval);
  const std::vector<double> scales{1.0, 0.0};
  const std::vector<std::uint64_t> seeds{3, 4};
  const auto table = nu_sweep(factory, scales, seeds);
  REQUIRE(table.size() == 2);
  CHECK(table[0].median_err_inf >= table[1].median_err_inf);
  CHECK(table[1].median_err_inf <= 1e-6);
  CHECK(table[0].nu >= table[1].nu);
  CHECK(table[0].errors.size() == 2);
}
