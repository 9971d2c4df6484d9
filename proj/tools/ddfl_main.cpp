#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ddfl/experiment.hpp"

namespace {

using ddfl::Json;

ddfl::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  const ddfl::Config raw = ddfl::Config::parse_file(path);
  ddfl::ExperimentConfig cfg = ddfl::ExperimentConfig::from_config(raw);
  if (seed_override) cfg.seed = *seed_override;
  return cfg;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::string tok;
  std::stringstream ss(text);
  while (std::getline(ss, tok, ',')) {
    try {
      values.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ddfl::ConfigError("cannot parse vector entry '" + tok + "'");
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven simulation and output matching for feedback-linearizable systems"};
  app.require_subcommand(1);

  std::string config_path = "ddfl.conf";
  std::string outdir = "out";
  std::string data_path, input_path, reference_path, bounds_path, xi0_text, out_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_flag;
  std::optional<int> horizon_flag;
  double alpha_l1 = 0.0, b_mass = 0.0;
  int bound_steps = 100;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->capture_default_str();
    sub->add_option("--out-dir", outdir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "master seed override");
  };

  auto* collect = app.add_subcommand("collect", "record a closed-loop data trajectory");
  add_common(collect);

  auto* fit = app.add_subcommand("fit-basis", "fit dictionary coefficients and bound parameters");
  add_common(fit);

  auto* checkpe = app.add_subcommand("check-pe", "persistency-of-excitation report for recorded data");
  add_common(checkpe);
  checkpe->add_option("--data", data_path, "trajectory CSV (defaults to <out-dir>/trajectory.csv)");

  auto* simulate_cmd = app.add_subcommand("simulate", "data-based simulation of a fresh input");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--data", data_path, "trajectory CSV (defaults to <out-dir>/trajectory.csv)");
  simulate_cmd->add_option("--input", input_path, "input CSV to simulate (defaults to a fresh evaluation rollout)");
  simulate_cmd->add_option("--xi0", xi0_text, "comma-separated initial state window (with --input; defaults to rest)");
  simulate_cmd->add_option("--bounds", bounds_path, "bound parameters JSON (defaults to a fresh oracle fit)");
  simulate_cmd->add_option("--lambda", lambda_flag, "regularization weight override");
  simulate_cmd->add_option("-L,--horizon", horizon_flag, "simulation horizon override");

  auto* match = app.add_subcommand("match", "data-based output matching against a reference");
  add_common(match);
  match->add_option("--data", data_path, "trajectory CSV (defaults to <out-dir>/trajectory.csv)");
  match->add_option("--reference", reference_path, "reference CSV (defaults to a fresh evaluation rollout)");
  match->add_option("--bounds", bounds_path, "bound parameters JSON (defaults to a fresh oracle fit)");
  match->add_option("--lambda", lambda_flag, "regularization weight override");
  match->add_option("-L,--horizon", horizon_flag, "reference horizon override (with generated references)");

  auto* bounds_cmd = app.add_subcommand("bounds", "evaluate the per-step error-bound curves");
  bounds_cmd->add_option("--bounds", bounds_path, "bound parameters JSON")->required();
  bounds_cmd->add_option("--alpha-l1", alpha_l1, "1-norm of the solution alpha*")->required();
  bounds_cmd->add_option("--b", b_mass, "residual mass b")->required();
  bounds_cmd->add_option("--steps", bound_steps, "number of steps")->capture_default_str();
  bounds_cmd->add_option("--out", out_file, "output CSV (default: stdout)");

  auto* sweep = app.add_subcommand("sweep-nu", "noise/perturbation convergence sweep");
  add_common(sweep);

  auto* runexp = app.add_subcommand("run-experiment", "full pipeline with a single report");
  add_common(runexp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto default_data = [&]() { return data_path.empty() ? outdir + "/trajectory.csv" : data_path; };

    if (collect->parsed()) {
      const auto cfg = load_config(config_path, seed);
      ddfl::stage_collect(cfg, outdir);
      std::cout << "wrote " << outdir << "/trajectory.csv and metadata.json\n";
    } else if (fit->parsed()) {
      const auto cfg = load_config(config_path, seed);
      const auto arts = ddfl::stage_fit(cfg, outdir);
      std::cout << "eps_star = " << arts.fit.eps_star << ", g_inf = " << arts.bounds.g_inf
                << ", K_Xi = " << arts.bounds.K_Xi << "\n";
    } else if (checkpe->parsed()) {
      const auto cfg = load_config(config_path, seed);
      const ddfl::Trajectory data = ddfl::read_trajectory_csv(default_data());
      const auto arts = ddfl::fit_pipeline(cfg, 1.0, cfg.seed);
      const Json j = ddfl::stage_check_pe(cfg, data, arts.dict, outdir);
      std::cout << j.dump(2) << "\n";
    } else if (simulate_cmd->parsed()) {
      auto cfg = load_config(config_path, seed);
      if (lambda_flag) cfg.lambda = *lambda_flag;
      if (horizon_flag) cfg.L = *horizon_flag;
      const ddfl::Trajectory data = ddfl::read_trajectory_csv(default_data());
      ddfl::FitArtifacts arts = ddfl::fit_pipeline(cfg, 1.0, cfg.seed);
      if (!bounds_path.empty())
        arts.bounds = ddfl::bound_params_from_json(Json::parse(ddfl::read_text_file(bounds_path)));

      Eigen::MatrixXd ubar;
      Eigen::VectorXd xi0;
      if (!input_path.empty()) {
        ubar = ddfl::read_input_csv(input_path);
        xi0 = xi0_text.empty() ? Eigen::VectorXd::Zero(data.structure.n).eval() : parse_vector(xi0_text);
      } else {
        const ddfl::EvalRollout eval = ddfl::make_eval_rollout(cfg, cfg.L);
        ubar = eval.ubar;
        xi0 = eval.xi0;
      }
      const Json j = ddfl::stage_simulate(cfg, data, arts, ubar, xi0, outdir);
      std::cout << "||ybar - yhat||_2 = " << j["y_error_l2"].dump() << ", b = " << j["b"].dump() << "\n";
    } else if (match->parsed()) {
      auto cfg = load_config(config_path, seed);
      if (lambda_flag) cfg.lambda = *lambda_flag;
      if (horizon_flag) cfg.match_horizon = *horizon_flag;
      const ddfl::Trajectory data = ddfl::read_trajectory_csv(default_data());
      ddfl::FitArtifacts arts = ddfl::fit_pipeline(cfg, 1.0, cfg.seed);
      if (!bounds_path.empty())
        arts.bounds = ddfl::bound_params_from_json(Json::parse(ddfl::read_text_file(bounds_path)));

      std::vector<Eigen::VectorXd> ybar;
      if (!reference_path.empty()) {
        ybar = ddfl::read_reference_csv(reference_path, data.structure);
      } else {
        ybar = ddfl::make_eval_rollout(cfg, cfg.match_horizon).ybar;
      }
      const Json j = ddfl::stage_match(cfg, data, arts, ybar, outdir);
      std::cout << "closed-loop max error = " << j["closed_loop_max_error"].dump() << ", b = " << j["b"].dump()
                << "\n";
    } else if (bounds_cmd->parsed()) {
      const ddfl::BoundParams bp = ddfl::bound_params_from_json(Json::parse(ddfl::read_text_file(bounds_path)));
      std::ostringstream csv;
      csv << "k,bound_simulation,bound_matching\n";
      for (int k = 0; k < bound_steps; ++k)
        csv << k << "," << ddfl::format_double(ddfl::error_bound(k, bp, alpha_l1, b_mass, ddfl::BoundKind::Simulation))
            << "," << ddfl::format_double(ddfl::error_bound(k, bp, alpha_l1, b_mass, ddfl::BoundKind::Matching))
            << "\n";
      if (out_file.empty())
        std::cout << csv.str();
      else
        ddfl::write_text_file(out_file, csv.str());
    } else if (sweep->parsed()) {
      const auto cfg = load_config(config_path, seed);
      const Json j = ddfl::stage_sweep(cfg, outdir);
      std::cout << j.dump(2) << "\n";
    } else if (runexp->parsed()) {
      auto cfg = load_config(config_path, seed);
      const std::string hash = ddfl::file_hash_hex(config_path);
      const Json report = ddfl::run_experiment(cfg, outdir, hash);
      std::cout << "report written to " << outdir << "/report.json\n";
    }
    return 0;
  } catch (const ddfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ddfl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const ddfl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
