#include "ddfl/trajectories.hpp"

#include <Eigen/SVD>
#include <numeric>

namespace ddfl {

int SystemStructure::max_degree() const {
  int dm = 0;
  for (int di : d) dm = std::max(dm, di);
  return dm;
}

void SystemStructure::validate() const {
  if (m < 1) throw StructureError("SystemStructure: channel count m must be positive, got " + std::to_string(m));
  if (static_cast<int>(d.size()) != m)
    throw StructureError("SystemStructure: expected " + std::to_string(m) + " relative degrees, got " +
                         std::to_string(d.size()));
  for (int i = 0; i < m; ++i)
    if (d[i] < 1)
      throw StructureError("SystemStructure: relative degree d[" + std::to_string(i) + "] must be positive");
  const int sum = std::accumulate(d.begin(), d.end(), 0);
  if (sum != n)
    throw StructureError("SystemStructure: sum of relative degrees (" + std::to_string(sum) +
                         ") must equal state dimension n=" + std::to_string(n));
  if (m > n) throw StructureError("SystemStructure: m must not exceed n");
}

void Trajectory::validate() const {
  structure.validate();
  const int N = length();
  if (N < 1) throw DimensionError("Trajectory: input sequence must contain at least one sample");
  if (inputs.rows() != structure.m)
    throw DimensionError("Trajectory: inputs have " + std::to_string(inputs.rows()) + " channels, structure says m=" +
                         std::to_string(structure.m));
  if (static_cast<int>(outputs.size()) != structure.m)
    throw DimensionError("Trajectory: expected " + std::to_string(structure.m) + " output channels, got " +
                         std::to_string(outputs.size()));
  for (int i = 0; i < structure.m; ++i) {
    const int want = N + structure.d[i];
    if (outputs[i].size() != want)
      throw DimensionError("Trajectory: output channel " + std::to_string(i + 1) + " has " +
                           std::to_string(outputs[i].size()) + " samples, expected N+d_i=" + std::to_string(want));
    if (!outputs[i].allFinite())
      throw NumericalError("Trajectory: output channel " + std::to_string(i + 1) + " contains non-finite samples");
  }
  if (!inputs.allFinite()) throw NumericalError("Trajectory: inputs contain non-finite samples");
}

Eigen::VectorXd window(const Eigen::MatrixXd& z, int a, int b) {
  if (a < 0 || b < a || b >= z.cols())
    throw DimensionError("window: interval [" + std::to_string(a) + "," + std::to_string(b) +
                         "] out of range for sequence of length " + std::to_string(z.cols()));
  const int eta = static_cast<int>(z.rows());
  Eigen::VectorXd out(eta * (b - a + 1));
  for (int k = a; k <= b; ++k) out.segment(static_cast<Eigen::Index>(k - a) * eta, eta) = z.col(k);
  return out;
}

HankelMatrix hankel(const Eigen::MatrixXd& z, int depth) {
  const int N = static_cast<int>(z.cols());
  const int eta = static_cast<int>(z.rows());
  if (N < 1 || eta < 1) throw DimensionError("hankel: empty sequence");
  if (depth < 1 || depth > N)
    throw DimensionError("hankel: depth L=" + std::to_string(depth) + " out of range for sequence length N=" +
                         std::to_string(N));
  HankelMatrix h;
  h.depth = depth;
  h.block_height = eta;
  h.data.resize(static_cast<Eigen::Index>(eta) * depth, N - depth + 1);
  for (int j = 0; j <= N - depth; ++j)
    for (int i = 0; i < depth; ++i) h.data.block(static_cast<Eigen::Index>(i) * eta, j, eta, 1) = z.col(i + j);
  return h;
}

StateSequence build_state_sequence(const Trajectory& traj) {
  traj.validate();
  const auto& s = traj.structure;
  const int N = traj.length();
  StateSequence seq;
  seq.structure = s;
  seq.states.resize(s.n, N + 1);
  for (int k = 0; k <= N; ++k) {
    int row = 0;
    for (int i = 0; i < s.m; ++i) {
      seq.states.col(k).segment(row, s.d[i]) = traj.outputs[i].segment(k, s.d[i]);
      row += s.d[i];
    }
  }
  return seq;
}

int numeric_rank(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cutoff = rel_tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

PeDecision is_persistently_exciting(const Eigen::MatrixXd& z, int order, double rel_tol) {
  const int N = static_cast<int>(z.cols());
  const int eta = static_cast<int>(z.rows());
  if (N < 1 || eta < 1) throw DimensionError("is_persistently_exciting: empty sequence");
  PeDecision dec;
  if (order < 1 || order > N) {
    dec.reason = "order L=" + std::to_string(order) + " out of range for N=" + std::to_string(N);
    return dec;
  }
  const int rows = eta * order;
  const int cols = N - order + 1;
  if (rows > cols) {
    dec.reason = "insufficient columns: eta*L=" + std::to_string(rows) + " > N-L+1=" + std::to_string(cols);
    return dec;
  }
  const HankelMatrix h = hankel(z, order);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h.data);
  dec.singular_values = svd.singularValues();
  const double smax = dec.singular_values.size() ? dec.singular_values(0) : 0.0;
  const double cutoff = rel_tol * smax;
  dec.rank = 0;
  for (Eigen::Index i = 0; i < dec.singular_values.size(); ++i)
    if (dec.singular_values(i) > cutoff) ++dec.rank;
  dec.is_pe = (dec.rank == rows);
  if (!dec.is_pe) dec.reason = "numeric rank " + std::to_string(dec.rank) + " < " + std::to_string(rows);
  return dec;
}

}  // namespace ddfl
