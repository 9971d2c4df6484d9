#pragma once

#include <Eigen/Dense>
#include <optional>

#include "ddfl/trajectories.hpp"

namespace ddfl {

// Block-diagonal shift-chain triple: one chain of length d_i per channel,
// A_i upper shift, B_i last unit column, C_i first unit row.
struct BrunovskyTriple {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // m x n
};

BrunovskyTriple build_block_brunovsky(const SystemStructure& structure);

struct ControllabilityDecision {
  bool controllable = false;
  int rank = 0;
};

// Rank test on [BG, A*BG, ..., A^{n-1}*BG].
ControllabilityDecision is_controllable_pair(const Eigen::MatrixXd& A,
                                             const Eigen::MatrixXd& BG,
                                             double rel_tol = 1e-8);

struct TrajectoryCheck {
  bool is_trajectory = false;
  double residual_inf = 0.0;
  std::optional<Eigen::VectorXd> alpha;
  bool pe_verified = false;
  PeDecision pe;
};

// Data-based trajectory membership test: least-squares solve of the stacked
// linear system [H_L(psi); H_{L+1}(xi)] alpha = [psi_bar; xi_bar]. The data
// dictionary sequence should be PE of order L+n for the test to be exact;
// otherwise the decision carries pe_verified = false.
//
// psi:     r x N   dictionary sequence evaluated on the data
// xi:      n x N+1 data state sequence
// psi_bar: r x L   candidate dictionary sequence
// xi_bar:  n x L+1 candidate state sequence
TrajectoryCheck nominal_trajectory_check(const Eigen::MatrixXd& psi,
                                         const Eigen::MatrixXd& xi,
                                         const Eigen::MatrixXd& psi_bar,
                                         const Eigen::MatrixXd& xi_bar,
                                         int depth, double tol,
                                         double pe_rel_tol = 1e-8);

}  // namespace ddfl
