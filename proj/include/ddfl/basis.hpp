#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ddfl/plant.hpp"

namespace ddfl {

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& u, const Eigen::VectorXd& xi)>;
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& u, const Eigen::VectorXd& xi)>;

// Dictionary of r scalar basis functions psi_j(u, Xi). Either the first m
// entries equal the input components (input_complete), or the map
// u -> Psi(u, Xi) is injective for every fixed Xi (input_injective); one of
// the two is required by the output-matching problem.
struct BasisDictionary {
  int r = 0;
  int m = 0;
  int n = 0;
  VectorFn eval;
  MatrixFn jac_xi;  // optional r x n Jacobian w.r.t. Xi
  MatrixFn jac_u;   // optional r x m Jacobian w.r.t. u
  std::vector<std::string> names;
  bool input_complete = false;
  bool input_injective = false;

  void validate() const;
};

// Uniform tensor grid over an input-state box.
struct GridSpec {
  std::vector<int> points_per_dim;  // length m + n

  static GridSpec uniform(int dims, int points);
  long total_points() const;
  void validate() const;
};

struct CoefficientFit {
  Eigen::MatrixXd Ghat;  // m x r
  double eps_star = 0.0;
  GridSpec grid;
  bool full_row_rank = false;
  double mean_residual = 0.0;
};

struct EpsValidation {
  double max_residual = 0.0;
  long exceedances = 0;  // validation points where the fitted eps_star is exceeded
  long total_points = 0;
};

// Scalars feeding the simulation / matching error bounds.
struct BoundParams {
  double eps_star = 0.0;
  double w_star = 0.0;
  double K_Xi = 0.0;
  double K_w = 0.0;
  double g_inf = 0.0;
  // true when every entry came from the oracle-backed fit pipeline; bounds
  // computed from user-supplied numbers are advisory only
  bool oracle_backed = false;
};

// Estimated-model dictionaries for the double pendulum, built from the
// manipulator terms Mtilde, Ctilde, Gtilde evaluated with user-provided
// parameter estimates and velocities reconstructed as (xi2-xi1)/Ts,
// (xi4-xi3)/Ts.
//
// SyntheticInput (r = m = 2, the default): psi_i = 2 xi_{2i} - xi_{2i-1} +
// Ts^2 ztilde_i, the estimated linearizing-input map. With exact parameters
// this equals the true map (G = I). Its data sequences can be persistently
// exciting, since each entry carries direct input dependence.
//
// Acceleration (r = m = 2): psi = ztilde alone. The shift terms then sit in
// the approximation error, which makes eps* large; kept for comparison.
enum class DictionaryForm { SyntheticInput, Acceleration };

BasisDictionary make_pendulum_dictionary(const PendulumParams& p_est,
                                         DictionaryForm form = DictionaryForm::SyntheticInput);

// Multiplicative parameter perturbation (1 + eta), eta ~ U(-max_rel, max_rel)
// per mechanical parameter (m1, m2, l1, l2); g and Ts are left untouched.
PendulumParams perturb_params(const PendulumParams& p, double max_rel, std::uint64_t seed);

// Discretized least-squares fit of Phi ~ G Psi over the grid, with the
// uniform-bound estimate eps_star = max over grid points of the residual
// infinity norm.
CoefficientFit fit_coefficients(const BasisDictionary& dict, const VectorFn& oracle_phi, const OmegaBox& box,
                                const GridSpec& grid);

// Re-evaluates the fitted residual on a (typically denser) validation grid.
EpsValidation validate_eps_star(const CoefficientFit& fit, const BasisDictionary& dict, const VectorFn& oracle_phi,
                                const OmegaBox& box, const GridSpec& validation_grid);

// Grid estimates of the Lipschitz constant of Phi w.r.t. Xi and of the noise
// sensitivity factor K_w (||Phi(u,Xi) - Phi(u,Xi+omega)||_inf <= K_w w* at the
// noise extremes). Both are inflated by a 1.1 safety factor.
struct LipschitzEstimate {
  double K_Xi = 0.0;
  double K_w = 0.0;
};

LipschitzEstimate estimate_lipschitz(const VectorFn& oracle_phi, const OmegaBox& box, const GridSpec& grid,
                                     double w_star);

// max absolute row sum, the induced infinity norm of the fitted coefficients
double g_inf_norm(const CoefficientFit& fit);

// Grid iteration helper: calls fn(u, xi) at every grid point.
void for_each_grid_point(const OmegaBox& box, const GridSpec& grid,
                         const std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&)>& fn);

}  // namespace ddfl
