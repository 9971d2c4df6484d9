#include "ddfl/brunovsky.hpp"

#include <Eigen/QR>

namespace ddfl {

BrunovskyTriple build_block_brunovsky(const SystemStructure& structure) {
  structure.validate();
  const int n = structure.n;
  const int m = structure.m;
  BrunovskyTriple t;
  t.A = Eigen::MatrixXd::Zero(n, n);
  t.B = Eigen::MatrixXd::Zero(n, m);
  t.C = Eigen::MatrixXd::Zero(m, n);
  int offset = 0;
  for (int i = 0; i < m; ++i) {
    const int di = structure.d[i];
    for (int j = 0; j + 1 < di; ++j) t.A(offset + j, offset + j + 1) = 1.0;
    t.B(offset + di - 1, i) = 1.0;
    t.C(i, offset) = 1.0;
    offset += di;
  }
  return t;
}

ControllabilityDecision is_controllable_pair(const Eigen::MatrixXd& A, const Eigen::MatrixXd& BG, double rel_tol) {
  if (A.rows() != A.cols()) throw DimensionError("is_controllable_pair: A must be square");
  if (BG.rows() != A.rows()) throw DimensionError("is_controllable_pair: BG row count must match A");
  const int n = static_cast<int>(A.rows());
  const int r = static_cast<int>(BG.cols());
  Eigen::MatrixXd ctrb(n, static_cast<Eigen::Index>(n) * r);
  ctrb.leftCols(r) = BG;
  for (int i = 1; i < n; ++i)
    ctrb.middleCols(static_cast<Eigen::Index>(i) * r, r) = A * ctrb.middleCols(static_cast<Eigen::Index>(i - 1) * r, r);
  ControllabilityDecision dec;
  dec.rank = numeric_rank(ctrb, rel_tol);
  dec.controllable = (dec.rank == n);
  return dec;
}

TrajectoryCheck nominal_trajectory_check(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& xi,
                                         const Eigen::MatrixXd& psi_bar, const Eigen::MatrixXd& xi_bar, int depth,
                                         double tol, double pe_rel_tol) {
  const int r = static_cast<int>(psi.rows());
  const int n = static_cast<int>(xi.rows());
  const int N = static_cast<int>(psi.cols());
  if (xi.cols() != N + 1)
    throw StructureError("nominal_trajectory_check: state sequence must have N+1 samples for N dictionary samples");
  if (psi_bar.rows() != r || xi_bar.rows() != n)
    throw StructureError("nominal_trajectory_check: candidate dimensions do not match data");
  if (psi_bar.cols() != depth || xi_bar.cols() != depth + 1)
    throw StructureError("nominal_trajectory_check: candidate must have L dictionary and L+1 state samples");
  if (depth < 1 || depth > N) throw StructureError("nominal_trajectory_check: depth out of range");

  TrajectoryCheck check;
  check.pe = is_persistently_exciting(psi, depth + n, pe_rel_tol);
  check.pe_verified = check.pe.is_pe;

  const HankelMatrix h_psi = hankel(psi, depth);
  const HankelMatrix h_xi = hankel(xi, depth + 1);
  const Eigen::Index cols = h_psi.data.cols();
  Eigen::MatrixXd stacked(h_psi.data.rows() + h_xi.data.rows(), cols);
  stacked.topRows(h_psi.data.rows()) = h_psi.data;
  stacked.bottomRows(h_xi.data.rows()) = h_xi.data;

  Eigen::VectorXd rhs(stacked.rows());
  rhs.head(h_psi.data.rows()) = Eigen::Map<const Eigen::VectorXd>(psi_bar.data(), psi_bar.size());
  rhs.tail(h_xi.data.rows()) = Eigen::Map<const Eigen::VectorXd>(xi_bar.data(), xi_bar.size());

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(stacked);
  const Eigen::VectorXd alpha = cod.solve(rhs);
  check.residual_inf = (stacked * alpha - rhs).lpNorm<Eigen::Infinity>();
  check.is_trajectory = (check.residual_inf <= tol);
  if (check.is_trajectory) check.alpha = alpha;
  return check;
}

}  // namespace ddfl
