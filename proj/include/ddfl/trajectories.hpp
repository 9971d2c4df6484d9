#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddfl/errors.hpp"

namespace ddfl {

// Channel structure of a multi-output system: m input/output channels, state
// dimension n and per-channel relative degrees d with sum(d) = n (full-state
// linearizable, no internal dynamics).
struct SystemStructure {
  int m = 0;
  int n = 0;
  std::vector<int> d;

  int max_degree() const;
  void validate() const;
};

// Recorded input-output data: inputs u_0..u_{N-1} (one column per sample) and
// per-channel outputs y_{i,0..N+d_i-1}. Output channel i carries d_i extra
// samples beyond the input horizon.
struct Trajectory {
  Eigen::MatrixXd inputs;                // m x N
  std::vector<Eigen::VectorXd> outputs;  // channel i has N + d[i] entries
  SystemStructure structure;

  // noise metadata (0 / unset for noiseless data)
  double noise_bound = 0.0;
  std::uint64_t noise_seed = 0;

  int length() const { return static_cast<int>(inputs.cols()); }
  void validate() const;
};

// Dense Hankel matrix of depth L built from an eta-dimensional sequence;
// column j is the stacked window z_{[j, j+L-1]}.
struct HankelMatrix {
  Eigen::MatrixXd data;  // (eta*L) x (N-L+1)
  int depth = 0;
  int block_height = 0;

  // rows [k*eta, (k+1)*eta) -- equals H_1(z_{[k, k+N-L]})
  Eigen::Block<const Eigen::MatrixXd> block_row(int k) const {
    return data.block(k * block_height, 0, block_height, data.cols());
  }
};

// State sequence Xi_k, k = 0..N, each column the concatenation of the output
// windows y_{i,[k,k+d_i-1]} in channel order.
struct StateSequence {
  Eigen::MatrixXd states;  // n x (N+1)
  SystemStructure structure;
};

struct PeDecision {
  bool is_pe = false;
  int rank = 0;
  Eigen::VectorXd singular_values;
  std::string reason;
};

// Stacked window z_{[a,b]} (closed interval, as in the source conventions).
Eigen::VectorXd window(const Eigen::MatrixXd& z, int a, int b);

HankelMatrix hankel(const Eigen::MatrixXd& z, int depth);

StateSequence build_state_sequence(const Trajectory& traj);

// PE of order L: numeric rank of H_L(z) equals eta*L. Singular values below
// rel_tol * sigma_max count as zero.
PeDecision is_persistently_exciting(const Eigen::MatrixXd& z, int order,
                                    double rel_tol = 1e-8);

int numeric_rank(const Eigen::MatrixXd& a, double rel_tol = 1e-8);

}  // namespace ddfl
