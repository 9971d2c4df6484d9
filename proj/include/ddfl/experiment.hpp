#pragma once

#include <string>
#include <vector>

#include "ddfl/config.hpp"
#include "ddfl/io.hpp"
#include "ddfl/matching.hpp"
#include "ddfl/simulation.hpp"

#include "json.hpp"

namespace ddfl {

using Json = nlohmann::ordered_json;

// All knobs of the benchmark pipeline, read from the flat config file.
struct ExperimentConfig {
  PendulumParams plant;
  OmegaBox omega = OmegaBox::benchmark();

  int N = 500;
  double w_star = 0.01;
  std::uint64_t seed = 1;

  double perturbation = 0.05;
  DictionaryForm dictionary_form = DictionaryForm::SyntheticInput;

  int grid_points = 5;
  int validation_grid_points = 8;

  int L = 100;
  double lambda = 0.1;

  double controller_kp = 20.0;
  double controller_kd = 2.0;
  double controller_dither = 0.5;

  SolverConfig solver;

  std::vector<double> sweep_scales{1.0, 0.1, 0.01, 0.0};
  int sweep_seed_count = 10;
  int sweep_horizon = 20;

  bool run_match = false;
  bool run_sweep = false;
  int match_horizon = 40;

  static ExperimentConfig from_config(const Config& cfg);
};

PendulumPlant make_plant(const ExperimentConfig& cfg);
PdToneController make_collect_controller(const ExperimentConfig& cfg);
PdToneController make_eval_controller(const ExperimentConfig& cfg);

// The unknown linearizing map Phi(u, Xi) of the benchmark plant, used as the
// fitting / bound oracle.
VectorFn plant_phi_oracle(const PendulumPlant& plant);

// Dictionary construction + coefficient fit + bound-parameter estimation.
// `scale` multiplies both the parameter perturbation and the noise bound (the
// convergence-study knob); seed drives the perturbation draw.
struct FitArtifacts {
  PendulumParams p_est;
  BasisDictionary dict;
  CoefficientFit fit;
  EpsValidation validation;
  BoundParams bounds;
};

FitArtifacts fit_pipeline(const ExperimentConfig& cfg, double scale, std::uint64_t seed);

// Fresh evaluation trajectory: closed-loop rollout from rest under the
// deterministic evaluation controller; ubar are the realized torques, ybar
// the true outputs, xi0 the stacked initial output windows.
struct EvalRollout {
  Eigen::MatrixXd ubar;
  std::vector<Eigen::VectorXd> ybar;
  Eigen::VectorXd xi0;
};

EvalRollout make_eval_rollout(const ExperimentConfig& cfg, int horizon);

SimulationTask make_simulation_task(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                                    const Eigen::MatrixXd& ubar, const Eigen::VectorXd& xi0);
MatchingTask make_matching_task(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                                const std::vector<Eigen::VectorXd>& ybar);

NuSweepFactory make_sweep_factory(const ExperimentConfig& cfg, const EvalRollout& eval);

// error metrics over per-channel sequences
double stacked_l2_error(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);
double max_inf_error(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);

// pointwise |e_{i,k+d_i}| <= bound(k) check
struct BoundCheck {
  bool ok = true;
  double min_margin = 0.0;  // min over (i,k) of bound - |e|
};

BoundCheck check_bound_validity(const SystemStructure& s, const std::vector<Eigen::VectorXd>& ybar,
                                const std::vector<Eigen::VectorXd>& yhat, const Eigen::VectorXd& bound_curve);

Json bound_params_to_json(const BoundParams& bp);
BoundParams bound_params_from_json(const Json& j);
Json solve_diagnostics_to_json(const SolveResult& r);

// Pipeline stages. Each writes its artifacts under outdir and returns the
// values downstream stages need.
CollectResult stage_collect(const ExperimentConfig& cfg, const std::string& outdir);
FitArtifacts stage_fit(const ExperimentConfig& cfg, const std::string& outdir);
Json stage_check_pe(const ExperimentConfig& cfg, const Trajectory& data, const BasisDictionary& dict,
                    const std::string& outdir);
// Ground-truth outputs for the error report come from rolling the true plant
// under ubar from the state matching xi0.
Json stage_simulate(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                    const Eigen::MatrixXd& ubar, const Eigen::VectorXd& xi0, const std::string& outdir);
Json stage_match(const ExperimentConfig& cfg, const Trajectory& data, const FitArtifacts& arts,
                 const std::vector<Eigen::VectorXd>& ybar, const std::string& outdir);
Json stage_sweep(const ExperimentConfig& cfg, const std::string& outdir);

// Full pipeline: collect -> fit-basis -> check-pe -> simulate (-> match,
// sweep-nu per config); aborts on the first stage failure, naming the stage.
// Returns the report written to report.json.
Json run_experiment(const ExperimentConfig& cfg, const std::string& outdir, const std::string& config_hash);

}  // namespace ddfl
