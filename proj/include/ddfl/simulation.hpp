#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "ddfl/basis.hpp"
#include "ddfl/solver.hpp"
#include "ddfl/trajectories.hpp"

namespace ddfl {

// Data-based simulation task: predict the output response to the fresh input
// ubar from the initial state window xi0_bar, using only the recorded noisy
// data and the basis dictionary.
struct SimulationTask {
  Trajectory data;          // noisy recorded trajectory
  Eigen::MatrixXd ubar;     // m x L, input to simulate
  Eigen::VectorXd xi0_bar;  // n, stacked initial output windows
  BasisDictionary dict;
  BoundParams bounds;
  double lambda = 0.1;
  SolverConfig solver;

  int horizon() const { return static_cast<int>(ubar.cols()); }
  void validate() const;
};

enum class BoundKind { Simulation, Matching };

// Per-step output error bound: P^k(K_Xi) * (eps*(1+||alpha||_1) + coeff*sqrt(b)
// + w*(1+K_w)||alpha||_1), with coeff = ||G||_inf for simulation and
// ||G||_inf + 1 for matching.
double error_bound(int k, const BoundParams& bounds, double alpha_l1, double b, BoundKind kind);

struct SimulationOutcome {
  Eigen::VectorXd alpha_star;
  std::vector<Eigen::VectorXd> yhat;  // channel i: L + d_i estimated outputs
  double b = 0.0;
  double objective = 0.0;
  Eigen::VectorXd bound_curve;  // bound on |e_{i,k+d_i}|, k = 0..L-1 (channel-uniform)
  bool bounds_advisory = false;
  SolveResult solve;
};

// The stacked residual and constraint of the simulation problem. The
// residual is rL-dimensional: H_L(psi_data) alpha - Psi(ubar_k, s_k(alpha))
// stacked over k, where s_k(alpha) is the alpha-combination of data state
// windows.
struct SimulationProblem {
  ConstrainedNllsProblem nlls;
  Eigen::MatrixXd psi_data;  // r x N dictionary sequence on the data
  HankelMatrix h_psi;        // depth L
  HankelMatrix h_xi;         // depth L+1
};

SimulationProblem build_simulation_residual(const SimulationTask& task);

SimulationOutcome simulate(const SimulationTask& task);

// Empirical convergence study: rebuilds the task at each noise/perturbation
// scale and seed, runs simulate, and reports the per-scale error statistics
// together with the PE status of the data dictionary sequence (the
// convergence hypothesis).
struct NuSweepCase {
  SimulationTask task;
  std::vector<Eigen::VectorXd> ybar;  // ground-truth outputs per channel
};

using NuSweepFactory = std::function<NuSweepCase(double scale, std::uint64_t seed)>;

struct NuSweepEntry {
  double scale = 0.0;
  double nu = 0.0;  // median max{eps*, w*} across seeds
  double median_err_inf = 0.0;
  bool pe_ok = false;  // PE of order L+n held for every seed
  std::vector<double> errors;
};

std::vector<NuSweepEntry> nu_sweep(const NuSweepFactory& factory, const std::vector<double>& scales,
                                   const std::vector<std::uint64_t>& seeds);

}  // namespace ddfl
