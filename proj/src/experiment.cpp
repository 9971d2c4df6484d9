#include "ddfl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "ddfl/brunovsky.hpp"

namespace ddfl {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

OmegaBox omega_from_config(const Config& cfg) {
  OmegaBox box = OmegaBox::benchmark();
  if (cfg.has("omega.tau_ub")) {
    const auto v = cfg.get_list("omega.tau_ub");
    box.tau_ub = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    box.tau_lb = -box.tau_ub;
  } else if (cfg.has("omega.tau_max")) {
    box.tau_ub = Eigen::VectorXd::Constant(2, cfg.get_double("omega.tau_max"));
    box.tau_lb = -box.tau_ub;
  }
  if (cfg.has("omega.xi_ub")) {
    const auto v = cfg.get_list("omega.xi_ub");
    box.xi_ub = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    box.xi_lb = -box.xi_ub;
  } else if (cfg.has("omega.xi_max")) {
    box.xi_ub = Eigen::VectorXd::Constant(4, cfg.get_double("omega.xi_max"));
    box.xi_lb = -box.xi_ub;
  }
  box.validate();
  return box;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    throw IoError("stage '" + name + "': " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + name + "': " + e.what());
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error("stage '" + name + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  ExperimentConfig e;
  e.plant.m1 = cfg.get_double("plant.m1", e.plant.m1);
  e.plant.m2 = cfg.get_double("plant.m2", e.plant.m2);
  e.plant.l1 = cfg.get_double("plant.l1", e.plant.l1);
  e.plant.l2 = cfg.get_double("plant.l2", e.plant.l2);
  e.plant.g = cfg.get_double("plant.g", e.plant.g);
  e.plant.Ts = cfg.get_double("plant.Ts", e.plant.Ts);
  e.plant.validate();

  e.omega = omega_from_config(cfg);

  e.N = cfg.get_int("data.N", e.N);
  e.w_star = cfg.get_double("data.w_star", e.w_star);
  e.seed = cfg.get_u64("data.seed", e.seed);
  if (e.N < 1) throw ConfigError("data.N must be positive");
  if (e.w_star < 0) throw ConfigError("data.w_star must be non-negative");

  e.perturbation = cfg.get_double("dictionary.perturbation", e.perturbation);
  const std::string form = cfg.get_string("dictionary.form", "synthetic_input");
  if (form == "synthetic_input")
    e.dictionary_form = DictionaryForm::SyntheticInput;
  else if (form == "acceleration")
    e.dictionary_form = DictionaryForm::Acceleration;
  else
    throw ConfigError("dictionary.form must be synthetic_input or acceleration");

  e.grid_points = cfg.get_int("fit.grid_points", e.grid_points);
  e.validation_grid_points = cfg.get_int("fit.validation_grid_points", e.validation_grid_points);

  e.L = cfg.get_int("simulate.L", e.L);
  e.lambda = cfg.get_double("simulate.lambda", e.lambda);
  if (e.lambda <= 0) throw ConfigError("simulate.lambda must be positive");

  e.controller_kp = cfg.get_double("controller.kp", e.controller_kp);
  e.controller_kd = cfg.get_double("controller.kd", e.controller_kd);
  e.controller_dither = cfg.get_double("controller.dither", e.controller_dither);

  e.solver.grad_tol = cfg.get_double("solver.grad_tol", e.solver.grad_tol);
  e.solver.step_tol = cfg.get_double("solver.step_tol", e.solver.step_tol);
  e.solver.max_iter = cfg.get_int("solver.max_iter", e.solver.max_iter);
  e.solver.check_jacobian = cfg.get_bool("solver.check_jacobian", e.solver.check_jacobian);
  e.solver.fd_step = cfg.get_double("solver.fd_step", e.solver.fd_step);

  e.sweep_scales = cfg.get_list("sweep.scales", e.sweep_scales);
  e.sweep_seed_count = cfg.get_int("sweep.seeds", e.sweep_seed_count);
  e.sweep_horizon = cfg.get_int("sweep.L", e.sweep_horizon);

  e.run_match = cfg.get_bool("match.enabled", e.run_match);
  e.match_horizon = cfg.get_int("match.L", e.match_horizon);
  e.run_sweep = cfg.get_bool("sweep.enabled", e.run_sweep);
  return e;
}

PendulumPlant make_plant(const ExperimentConfig& cfg) { return PendulumPlant(cfg.plant); }

PdToneController make_collect_controller(const ExperimentConfig& cfg) {
  PdToneController c = PdToneController::benchmark(cfg.omega);
  c.kp = cfg.controller_kp;
  c.kd = cfg.controller_kd;
  c.dither = cfg.controller_dither;
  return c;
}

PdToneController make_eval_controller(const ExperimentConfig& cfg) {
  PdToneController c = PdToneController::evaluation(cfg.omega);
  c.kp = cfg.controller_kp;
  c.kd = cfg.controller_kd;
  return c;
}

VectorFn plant_phi_oracle(const PendulumPlant& plant) {
  return [plant](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) -> Eigen::VectorXd {
    const PlantState x = plant.inverse_transform(xi);
    return plant.synthetic_input(x, u.head<2>());
  };
}

FitArtifacts fit_pipeline(const ExperimentConfig& cfg, double scale, std::uint64_t seed) {
  FitArtifacts arts;
  arts.p_est = perturb_params(cfg.plant, cfg.perturbation * scale, seed);
  arts.dict = make_pendulum_dictionary(arts.p_est, cfg.dictionary_form);

  const PendulumPlant plant = make_plant(cfg);
  const VectorFn phi = plant_phi_oracle(plant);
  const int dims = static_cast<int>(cfg.omega.tau_lb.size() + cfg.omega.xi_lb.size());
  const GridSpec grid = GridSpec::uniform(dims, cfg.grid_points);

  arts.fit = fit_coefficients(arts.dict, phi, cfg.omega, grid);
  arts.validation =
      validate_eps_star(arts.fit, arts.dict, phi, cfg.omega, GridSpec::uniform(dims, cfg.validation_grid_points));

  const double w_scaled = cfg.w_star * scale;
  const LipschitzEstimate lip = estimate_lipschitz(phi, cfg.omega, grid, w_scaled);
  arts.bounds.eps_star = arts.fit.eps_star;
  arts.bounds.w_star = w_scaled;
  arts.bounds.K_Xi = lip.K_Xi;
  arts.bounds.K_w = lip.K_w;
  arts.bounds.g_inf = g_inf_norm(arts.fit);
  arts.bounds.oracle_backed = true;
  return arts;
}

EvalRollout make_eval_rollout(const ExperimentConfig& cfg, int horizon) {
  const PendulumPlant plant = make_plant(cfg);
  const PdToneController controller = make_eval_controller(cfg);
  const SystemStructure structure = plant.structure();
  const double Ts = cfg.plant.Ts;

  Rng unused(0);  // the evaluation controller runs without dither
  Eigen::MatrixXd inputs(2, horizon);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  for (int k = 0; k < horizon; ++k) {
    const Eigen::Vector2d theta(x(0), x(2));
    const Eigen::Vector2d thetadot(x(1), x(3));
    inputs.col(k) = controller.torque(k * Ts, theta, thetadot, unused);
    x = plant.step(x, inputs.col(k));
  }

  const RolloutData run = rollout(plant, Eigen::VectorXd::Zero(4), inputs, structure);
  EvalRollout eval;
  eval.ubar = inputs;
  eval.ybar = run.trajectory.outputs;
  const StateSequence xi = build_state_sequence(run.trajectory);
  eval.xi0 = xi.states.col(0);
  return eval;
}

SimulationTask make_simulation_task(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                                    const Eigen::MatrixXd& ubar, const Eigen::VectorXd& xi0) {
  SimulationTask task;
  task.data = data;
  task.ubar = ubar;
  task.xi0_bar = xi0;
  task.dict = arts.dict;
  task.bounds = arts.bounds;
  task.lambda = cfg.lambda;
  task.solver = cfg.solver;
  return task;
}

MatchingTask make_matching_task(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                                const std::vector<Eigen::VectorXd>& ybar) {
  MatchingTask task;
  task.data = data;
  task.ybar = ybar;
  task.dict = arts.dict;
  task.bounds = arts.bounds;
  task.lambda = cfg.lambda;
  task.solver = cfg.solver;
  return task;
}

NuSweepFactory make_sweep_factory(const ExperimentConfig& cfg, const EvalRollout& eval) {
  return [cfg, eval](double scale, std::uint64_t seed) -> NuSweepCase {
    const PendulumPlant plant = make_plant(cfg);
    const PdToneController controller = make_collect_controller(cfg);
    const CollectResult collected =
        collect_data(plant, controller, cfg.N, cfg.w_star * scale, Rng::derive(seed, "sweep/collect"), cfg.omega);
    const FitArtifacts arts = fit_pipeline(cfg, scale, Rng::derive(seed, "sweep/dict"));

    NuSweepCase c;
    c.task = make_simulation_task(cfg, collected.noisy, arts, eval.ubar, eval.xi0);
    c.ybar = eval.ybar;
    return c;
  };
}

double stacked_l2_error(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sq);
}

double max_inf_error(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
  return m;
}

BoundCheck check_bound_validity(const SystemStructure& s, const std::vector<Eigen::VectorXd>& ybar,
                                const std::vector<Eigen::VectorXd>& yhat, const Eigen::VectorXd& bound_curve) {
  BoundCheck check;
  check.min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < s.m; ++i) {
    const int di = s.d[static_cast<std::size_t>(i)];
    for (int k = 0; k < bound_curve.size(); ++k) {
      const double e = std::abs(ybar[static_cast<std::size_t>(i)](k + di) - yhat[static_cast<std::size_t>(i)](k + di));
      const double margin = bound_curve(k) - e;
      check.min_margin = std::min(check.min_margin, margin);
      if (margin < 0) check.ok = false;
    }
  }
  return check;
}

Json bound_params_to_json(const BoundParams& bp) {
  Json j;
  j["eps_star"] = bp.eps_star;
  j["w_star"] = bp.w_star;
  j["K_Xi"] = bp.K_Xi;
  j["K_w"] = bp.K_w;
  j["g_inf"] = bp.g_inf;
  j["oracle_backed"] = bp.oracle_backed;
  return j;
}

BoundParams bound_params_from_json(const Json& j) {
  BoundParams bp;
  bp.eps_star = j.at("eps_star").get<double>();
  bp.w_star = j.at("w_star").get<double>();
  bp.K_Xi = j.at("K_Xi").get<double>();
  bp.K_w = j.at("K_w").get<double>();
  bp.g_inf = j.at("g_inf").get<double>();
  bp.oracle_backed = j.value("oracle_backed", false);
  return bp;
}

Json solve_diagnostics_to_json(const SolveResult& r) {
  Json j;
  j["objective"] = r.objective;
  j["residual_mass"] = r.residual_mass;
  j["raw_residual_mass"] = r.raw_residual_mass;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["constraint_violation"] = r.constraint_violation;
  j["projected_gradient_norm"] = r.projected_gradient_norm;
  j["message"] = r.message;
  j["alpha_norm1"] = r.alpha_star.lpNorm<1>();
  j["alpha_norm2"] = r.alpha_star.norm();
  return j;
}

CollectResult stage_collect(const ExperimentConfig& cfg, const std::string& outdir) {
  fs::create_directories(outdir);
  const PendulumPlant plant = make_plant(cfg);
  const PdToneController controller = make_collect_controller(cfg);
  const CollectResult c = collect_data(plant, controller, cfg.N, cfg.w_star, cfg.seed, cfg.omega);
  write_trajectory_csv(c.noisy, join(outdir, "trajectory.csv"));
  Json meta;
  meta["seed"] = cfg.seed;
  meta["w_star"] = cfg.w_star;
  meta["N"] = cfg.N;
  meta["Ts"] = cfg.plant.Ts;
  meta["controller"] = {{"kp", cfg.controller_kp}, {"kd", cfg.controller_kd}, {"dither", cfg.controller_dither}};
  meta["omega"] = {{"tau_ub", vector_to_json(cfg.omega.tau_ub)}, {"xi_ub", vector_to_json(cfg.omega.xi_ub)}};
  meta["plant"] = {{"m1", cfg.plant.m1}, {"m2", cfg.plant.m2}, {"l1", cfg.plant.l1},
                   {"l2", cfg.plant.l2}, {"g", cfg.plant.g},   {"Ts", cfg.plant.Ts}};
  write_text_file(join(outdir, "metadata.json"), meta.dump(2) + "\n");
  return c;
}

FitArtifacts stage_fit(const ExperimentConfig& cfg, const std::string& outdir) {
  fs::create_directories(outdir);
  const FitArtifacts a = fit_pipeline(cfg, 1.0, cfg.seed);
  Json fit_json;
  fit_json["eps_star"] = a.fit.eps_star;
  fit_json["mean_residual"] = a.fit.mean_residual;
  fit_json["full_row_rank"] = a.fit.full_row_rank;
  fit_json["grid_points_per_dim"] = cfg.grid_points;
  fit_json["validation_max_residual"] = a.validation.max_residual;
  fit_json["validation_exceedances"] = a.validation.exceedances;
  fit_json["Ghat"] = Json::array();
  for (int i = 0; i < a.fit.Ghat.rows(); ++i) fit_json["Ghat"].push_back(vector_to_json(a.fit.Ghat.row(i)));
  write_text_file(join(outdir, "fit.json"), fit_json.dump(2) + "\n");
  write_text_file(join(outdir, "bounds.json"), bound_params_to_json(a.bounds).dump(2) + "\n");
  return a;
}

Json stage_check_pe(const ExperimentConfig& cfg, const Trajectory& data, const BasisDictionary& dict,
                    const std::string& outdir) {
  fs::create_directories(outdir);
  const int N = data.length();
  const StateSequence xi = build_state_sequence(data);
  Eigen::MatrixXd psi(dict.r, N);
  for (int k = 0; k < N; ++k) psi.col(k) = dict.eval(data.inputs.col(k), xi.states.col(k));
  const PeDecision pe = is_persistently_exciting(psi, cfg.L + data.structure.n);

  Json j;
  j["order"] = cfg.L + data.structure.n;
  j["is_pe"] = pe.is_pe;
  j["rank"] = pe.rank;
  j["reason"] = pe.reason;
  if (pe.singular_values.size() > 0) {
    j["sigma_max"] = pe.singular_values(0);
    j["sigma_min"] = pe.singular_values(pe.singular_values.size() - 1);
  }

  // Theorem-2 style membership diagnostic on a short fresh rollout
  const int check_L = std::max(1, std::min(20, N / 4));
  const EvalRollout probe = make_eval_rollout(cfg, check_L);
  Trajectory cand;
  cand.structure = data.structure;
  cand.inputs = probe.ubar;
  cand.outputs = probe.ybar;
  const StateSequence cand_xi = build_state_sequence(cand);
  Eigen::MatrixXd psi_bar(dict.r, check_L);
  for (int k = 0; k < check_L; ++k) psi_bar.col(k) = dict.eval(probe.ubar.col(k), cand_xi.states.col(k));
  const TrajectoryCheck check = nominal_trajectory_check(psi, xi.states, psi_bar, cand_xi.states, check_L, 1e-6);
  j["thm2_diagnostic"] = {{"L", check_L},
                          {"residual_inf", check.residual_inf},
                          {"is_trajectory", check.is_trajectory},
                          {"pe_verified", check.pe_verified}};
  write_text_file(join(outdir, "pe_report.json"), j.dump(2) + "\n");
  return j;
}

Json stage_simulate(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                    const Eigen::MatrixXd& ubar, const Eigen::VectorXd& xi0, const std::string& outdir) {
  fs::create_directories(outdir);
  const SimulationTask task = make_simulation_task(cfg, data, arts, ubar, xi0);
  const SimulationOutcome outcome = simulate(task);

  // ground truth: roll the true plant under ubar from the matching state
  const PendulumPlant plant = make_plant(cfg);
  const auto& s = data.structure;
  const RolloutData truth = rollout(plant, plant.inverse_transform(xi0), ubar, s);
  const std::vector<Eigen::VectorXd>& ybar = truth.trajectory.outputs;

  Json j;
  j["L"] = static_cast<int>(ubar.cols());
  j["lambda"] = cfg.lambda;
  j["b"] = outcome.b;
  j["solve"] = solve_diagnostics_to_json(outcome.solve);
  j["y_error_l2"] = stacked_l2_error(ybar, outcome.yhat);
  j["y_error_inf"] = max_inf_error(ybar, outcome.yhat);
  const BoundCheck bc = check_bound_validity(s, ybar, outcome.yhat, outcome.bound_curve);
  j["bound_valid"] = bc.ok;
  j["bound_min_margin"] = bc.min_margin;
  j["bounds_advisory"] = outcome.bounds_advisory;
  j["bound_at_0"] = outcome.bound_curve.size() ? outcome.bound_curve(0) : 0.0;

  write_input_csv(ubar, join(outdir, "ubar.csv"));
  for (int i = 0; i < s.m; ++i) {
    const Eigen::VectorXd err =
        (ybar[static_cast<std::size_t>(i)] - outcome.yhat[static_cast<std::size_t>(i)]).cwiseAbs();
    write_channel_csv(join(outdir, "simulate_channel_" + std::to_string(i + 1) + ".csv"),
                      ybar[static_cast<std::size_t>(i)], outcome.yhat[static_cast<std::size_t>(i)], err,
                      outcome.bound_curve, s.d[static_cast<std::size_t>(i)]);
  }
  write_text_file(join(outdir, "simulate_outcome.json"), j.dump(2) + "\n");
  return j;
}

Json stage_match(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                 const std::vector<Eigen::VectorXd>& ybar, const std::string& outdir) {
  fs::create_directories(outdir);
  const MatchingTask task = make_matching_task(cfg, data, arts, ybar);
  const MatchingOutcome outcome = match_output(task);
  const PendulumPlant plant = make_plant(cfg);
  const ClosedLoopReport loop = verify_closed_loop(plant, task, outcome);

  Json j;
  j["L"] = task.horizon();
  j["lambda"] = cfg.lambda;
  j["b"] = outcome.b;
  j["solve"] = solve_diagnostics_to_json(outcome.solve);
  j["closed_loop_max_error"] = loop.max_abs_error;
  j["bound_checked"] = loop.bound_checked;
  j["bound_satisfied"] = loop.bound_satisfied;
  j["bound_at_0"] = outcome.bound_curve.size() ? outcome.bound_curve(0) : 0.0;
  write_input_csv(outcome.uhat, join(outdir, "uhat.csv"));
  for (std::size_t i = 0; i < loop.outputs.size(); ++i) {
    const Eigen::VectorXd err = loop.errors[i].cwiseAbs();
    write_channel_csv(join(outdir, "match_channel_" + std::to_string(i + 1) + ".csv"), ybar[i], loop.outputs[i], err,
                      outcome.bound_curve, data.structure.d[i]);
  }
  write_text_file(join(outdir, "match_outcome.json"), j.dump(2) + "\n");
  return j;
}

Json stage_sweep(const ExperimentConfig& cfg, const std::string& outdir) {
  fs::create_directories(outdir);
  const EvalRollout eval = make_eval_rollout(cfg, cfg.sweep_horizon);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.sweep_seed_count; ++i) seeds.push_back(Rng::derive(cfg.seed, "sweep/seed" + std::to_string(i)));
  const auto table = nu_sweep(make_sweep_factory(cfg, eval), cfg.sweep_scales, seeds);
  Json j = Json::array();
  for (const auto& entry : table) {
    Json row;
    row["scale"] = entry.scale;
    row["nu"] = entry.nu;
    row["median_err_inf"] = entry.median_err_inf;
    row["pe_ok"] = entry.pe_ok;
    if (!entry.pe_ok) row["note"] = "convergence hypothesis unmet: data dictionary sequence not PE of order L+n";
    j.push_back(row);
  }
  write_text_file(join(outdir, "sweep.json"), j.dump(2) + "\n");
  return j;
}

Json run_experiment(const ExperimentConfig& cfg, const std::string& outdir, const std::string& config_hash) {
  fs::create_directories(outdir);

  Json report;
  report["config_hash"] = config_hash;
  report["seed"] = cfg.seed;

  const CollectResult collected = run_stage("collect", [&] { return stage_collect(cfg, outdir); });
  report["collect"] = {{"N", cfg.N}, {"w_star", cfg.w_star}};

  const FitArtifacts arts = run_stage("fit-basis", [&] { return stage_fit(cfg, outdir); });
  report["fit"] = {{"eps_star", arts.fit.eps_star},
                   {"full_row_rank", arts.fit.full_row_rank},
                   {"validation_max_residual", arts.validation.max_residual},
                   {"validation_exceedances", arts.validation.exceedances}};
  report["bounds"] = bound_params_to_json(arts.bounds);

  report["check_pe"] =
      run_stage("check-pe", [&] { return stage_check_pe(cfg, collected.noisy, arts.dict, outdir); });

  report["simulate"] = run_stage("simulate", [&] {
    const EvalRollout eval = make_eval_rollout(cfg, cfg.L);
    return stage_simulate(cfg, collected.noisy, arts, eval.ubar, eval.xi0, outdir);
  });

  if (cfg.run_match) {
    report["match"] = run_stage("match", [&] {
      const EvalRollout eval = make_eval_rollout(cfg, cfg.match_horizon);
      return stage_match(cfg, collected.noisy, arts, eval.ybar, outdir);
    });
  }

  if (cfg.run_sweep) {
    report["sweep"] = run_stage("sweep-nu", [&] { return stage_sweep(cfg, outdir); });
  }

  write_text_file(join(outdir, "report.json"), report.dump(2) + "\n");
  return report;
}

}  // namespace ddfl
