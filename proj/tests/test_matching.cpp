#include <cmath>

#include "ddfl/experiment.hpp"
#include "ddfl/matching.hpp"
#include "doctest.h"

using namespace ddfl;

namespace {

ExperimentConfig small_cfg(int N, double w_star, double perturbation) {
  ExperimentConfig cfg;
  cfg.N = N;
  cfg.w_star = w_star;
  cfg.perturbation = perturbation;
  cfg.grid_points = 3;
  cfg.validation_grid_points = 4;
  cfg.seed = 21;
  return cfg;
}

struct Setup {
  ExperimentConfig cfg;
  CollectResult data;
  FitArtifacts arts;
  EvalRollout eval;
};

Setup make_setup(int N, double w_star, double perturbation, int L) {
  Setup s{small_cfg(N, w_star, perturbation), {}, {}, {}};
  const PendulumPlant plant = make_plant(s.cfg);
  s.data = collect_data(plant, make_collect_controller(s.cfg), s.cfg.N, s.cfg.w_star, s.cfg.seed, s.cfg.omega);
  s.arts = fit_pipeline(s.cfg, perturbation > 0 ? 1.0 : 0.0, s.cfg.seed);
  s.eval = make_eval_rollout(s.cfg, L);
  return s;
}

}  // namespace

TEST_CASE("matching residual has rL + n(L+1) entries and matches a naive loop") {
  const int L = 7;
  const Setup s = make_setup(60, 0.01, 0.05, L);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noisy, s.arts, s.eval.ybar);
  REQUIRE(task.horizon() == L);
  const MatchingProblem problem = build_matching_residual(task);

  const int r = s.arts.dict.r, n = 4, M = problem.nlls.dim;
  const StateSequence xi = build_state_sequence(s.data.noisy);
  Eigen::MatrixXd psi(r, s.cfg.N);
  for (int k = 0; k < s.cfg.N; ++k) psi.col(k) = s.arts.dict.eval(s.data.noisy.inputs.col(k), xi.states.col(k));

  Rng rng(30);
  Eigen::VectorXd alpha(M);
  for (int i = 0; i < M; ++i) alpha(i) = rng.uniform(-0.2, 0.2);
  const Eigen::VectorXd rho = problem.nlls.residual(alpha);
  REQUIRE(rho.size() == r * L + n * (L + 1));

  for (int k = 0; k < L; ++k) {
    Eigen::VectorXd psi_combo = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd u_combo = Eigen::VectorXd::Zero(2);
    for (int j = 0; j < M; ++j) {
      psi_combo += alpha(j) * psi.col(k + j);
      u_combo += alpha(j) * s.data.noisy.inputs.col(k + j);
    }
    const Eigen::VectorXd expected = psi_combo - s.arts.dict.eval(u_combo, problem.xi_bar.col(k));
    CHECK((rho.segment(k * r, r) - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  for (int k = 0; k <= L; ++k) {
    Eigen::VectorXd xi_combo = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < M; ++j) xi_combo += alpha(j) * xi.states.col(k + j);
    const Eigen::VectorXd expected = xi_combo - problem.xi_bar.col(k);
    CHECK((rho.segment(r * L + k * n, n) - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("matching residual vanishes on a replayed data window") {
  const int L = 9, at = 4;
  const Setup s = make_setup(70, 0.0, 0.0, L);

  MatchingTask task;
  task.data = s.data.noiseless;
  task.dict = s.arts.dict;
  task.bounds = s.arts.bounds;
  task.ybar.resize(2);
  for (int i = 0; i < 2; ++i)
    task.ybar[static_cast<std::size_t>(i)] = s.data.noiseless.outputs[static_cast<std::size_t>(i)].segment(at, L + 2);

  const MatchingProblem problem = build_matching_residual(task);
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(problem.nlls.dim);
  alpha(at) = 1.0;
  CHECK(problem.nlls.residual(alpha).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("nominal output matching recovers an input that tracks the reference") {
  const int L = 12;
  const Setup s = make_setup(140, 0.0, 0.0, L);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noiseless, s.arts, s.eval.ybar);
  const MatchingOutcome outcome = match_output(task);
  CHECK(outcome.solve.converged);
  CHECK(outcome.b <= 1e-10);

  const PendulumPlant plant = make_plant(s.cfg);
  const ClosedLoopReport report = verify_closed_loop(plant, task, outcome);
  CHECK(report.max_abs_error <= 1e-6);
  CHECK(report.bound_checked);
  CHECK(report.bound_satisfied);

  // the recovered input reproduces the evaluation torques
  CHECK((outcome.uhat - s.eval.ubar).lpNorm<Eigen::Infinity>() <= 1e-5);

  // errors on the first d_i samples are pinned by the initial condition
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) CHECK(std::abs(report.errors[static_cast<std::size_t>(i)](k)) <= 1e-12);
}

TEST_CASE("replaying a recorded window recovers the recorded input") {
  const int L = 10, at = 6;
  const Setup s = make_setup(90, 0.0, 0.0, L);
  std::vector<Eigen::VectorXd> ybar(2);
  for (int i = 0; i < 2; ++i)
    ybar[static_cast<std::size_t>(i)] = s.data.noiseless.outputs[static_cast<std::size_t>(i)].segment(at, L + 2);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noiseless, s.arts, ybar);
  const MatchingOutcome outcome = match_output(task);
  CHECK((outcome.uhat - s.data.noiseless.inputs.middleCols(at, L)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("uhat is the Hankel image of the recorded inputs") {
  const int L = 8;
  const Setup s = make_setup(60, 0.01, 0.05, L);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noisy, s.arts, s.eval.ybar);
  const MatchingOutcome outcome = match_output(task);
  const HankelMatrix h_u = hankel(s.data.noisy.inputs, L);
  const Eigen::VectorXd stacked = h_u.data * outcome.alpha_star;
  for (int k = 0; k < L; ++k)
    for (int i = 0; i < 2; ++i) CHECK(outcome.uhat(i, k) == stacked(2 * k + i));

  // scaling the recorded inputs scales the image linearly for fixed alpha
  Eigen::MatrixXd scaled_inputs = 3.0 * s.data.noisy.inputs;
  const HankelMatrix h_scaled = hankel(scaled_inputs, L);
  CHECK(((h_scaled.data * outcome.alpha_star) - 3.0 * stacked).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("noisy matching errors stay within the theorem bound") {
  const int L = 10;
  const Setup s = make_setup(120, 0.01, 0.05, L);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noisy, s.arts, s.eval.ybar);
  const MatchingOutcome outcome = match_output(task);
  const PendulumPlant plant = make_plant(s.cfg);
  const ClosedLoopReport report = verify_closed_loop(plant, task, outcome);
  CHECK(report.bound_checked);
  CHECK(report.bound_satisfied);
}

TEST_CASE("zero input against a nonzero reference is a plain negative control") {
  const int L = 10;
  const Setup s = make_setup(80, 0.0, 0.0, L);
  const MatchingTask task = make_matching_task(s.cfg, s.data.noiseless, s.arts, s.eval.ybar);
  MatchingOutcome zero;
  zero.uhat = Eigen::MatrixXd::Zero(2, L);
  zero.alpha_star = Eigen::VectorXd::Zero(s.cfg.N - L + 1);
  zero.bound_curve = Eigen::VectorXd::Zero(L);
  MatchingTask advisory = task;
  advisory.bounds.oracle_backed = false;  // alpha* contract not met; bound not asserted
  const PendulumPlant plant = make_plant(s.cfg);
  const ClosedLoopReport report = verify_closed_loop(plant, advisory, zero);
  CHECK_FALSE(report.bound_checked);
  CHECK(report.max_abs_error > 1e-2);
}

TEST_CASE("duality smoke test: matching the simulated outputs recovers the loop") {
  const int L = 10;
  const Setup s = make_setup(130, 0.0, 0.0, L);

  const SimulationTask sim_task = make_simulation_task(s.cfg, s.data.noiseless, s.arts, s.eval.ubar, s.eval.xi0);
  const SimulationOutcome sim = simulate(sim_task);

  const MatchingTask match_task = make_matching_task(s.cfg, s.data.noiseless, s.arts, sim.yhat);
  const MatchingOutcome matched = match_output(match_task);
  const PendulumPlant plant = make_plant(s.cfg);
  const ClosedLoopReport report = verify_closed_loop(plant, match_task, matched);

  // nominal: both stages are near-exact, so the loop lands near ybar
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst,
                     (report.outputs[static_cast<std::size_t>(i)] - s.eval.ybar[static_cast<std::size_t>(i)])
                         .lpNorm<Eigen::Infinity>());
  CHECK(worst <= 1e-5);
}

TEST_CASE("dictionaries without input recoverability are rejected") {
  const Setup s = make_setup(40, 0.0, 0.0, 5);
  MatchingTask task = make_matching_task(s.cfg, s.data.noiseless, s.arts, s.eval.ybar);
  task.dict.input_injective = false;
  task.dict.input_complete = false;
  CHECK_THROWS_AS(task.validate(), StructureError);
}
