#include <Eigen/Dense>

#include "ddfl/brunovsky.hpp"
#include "ddfl/rng.hpp"
#include "doctest.h"

using namespace ddfl;

TEST_CASE("smallest Brunovsky triple") {
  const BrunovskyTriple t = build_block_brunovsky(SystemStructure{1, 1, {1}});
  CHECK(t.A == Eigen::MatrixXd::Zero(1, 1));
  CHECK(t.B == Eigen::MatrixXd::Ones(1, 1));
  CHECK(t.C == Eigen::MatrixXd::Ones(1, 1));
}

TEST_CASE("d=[2,2] block structure") {
  const BrunovskyTriple t = build_block_brunovsky(SystemStructure{2, 4, {2, 2}});
  Eigen::MatrixXd A(4, 4), B(4, 2), C(2, 4);
  A << 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0;
  B << 0, 0, 1, 0, 0, 0, 0, 1;
  C << 1, 0, 0, 0, 0, 0, 1, 0;
  CHECK(t.A == A);
  CHECK(t.B == B);
  CHECK(t.C == C);
  CHECK(t.A.sum() == doctest::Approx(2));  // n - m ones
}

TEST_CASE("d=[3,1] state update matches hand-unrolled shift equations") {
  const SystemStructure s{2, 4, {3, 1}};
  const BrunovskyTriple t = build_block_brunovsky(s);
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Vector4d xi;
    Eigen::Vector2d v;
    for (int i = 0; i < 4; ++i) xi(i) = rng.uniform(-1, 1);
    for (int i = 0; i < 2; ++i) v(i) = rng.uniform(-1, 1);
    const Eigen::Vector4d next = t.A * xi + t.B * v;
    CHECK(next(0) == xi(1));
    CHECK(next(1) == xi(2));
    CHECK(next(2) == v(0));
    CHECK(next(3) == v(1));
  }
}

TEST_CASE("blocks are nilpotent unit-delay chains") {
  const SystemStructure s{2, 5, {3, 2}};
  const BrunovskyTriple t = build_block_brunovsky(s);
  int offset = 0;
  for (int i = 0; i < s.m; ++i) {
    const int di = s.d[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd Ai = t.A.block(offset, offset, di, di);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(di, di);
    for (int j = 0; j < di; ++j) power = Ai * power;
    CHECK(power.cwiseAbs().maxCoeff() == 0.0);
    offset += di;
  }
  // C A^j B is the identity-selecting delay: block (i,i) equals 1 iff j = d_i - 1
  for (int j = 0; j < s.n; ++j) {
    Eigen::MatrixXd Aj = Eigen::MatrixXd::Identity(s.n, s.n);
    for (int p = 0; p < j; ++p) Aj = t.A * Aj;
    const Eigen::MatrixXd markov = t.C * Aj * t.B;
    for (int i = 0; i < s.m; ++i)
      CHECK(markov(i, i) == ((j == s.d[static_cast<std::size_t>(i)] - 1) ? 1.0 : 0.0));
  }
}

TEST_CASE("structure errors propagate") {
  CHECK_THROWS_AS(build_block_brunovsky(SystemStructure{2, 5, {2, 2}}), StructureError);
}

TEST_CASE("canonical pair is controllable; BG with a zero row is not") {
  const SystemStructure s{2, 4, {2, 2}};
  const BrunovskyTriple t = build_block_brunovsky(s);
  CHECK(is_controllable_pair(t.A, t.B).controllable);

  Rng rng(77);
  Eigen::MatrixXd G(2, 5);
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j) G(i, j) = rng.normal();
  CHECK(is_controllable_pair(t.A, t.B * G).controllable);

  G.row(1).setZero();
  const auto dec = is_controllable_pair(t.A, t.B * G);
  CHECK_FALSE(dec.controllable);
  CHECK(dec.rank < 4);
}

TEST_CASE("full-row-rank coefficient matrices give controllable pairs (sampled)") {
  Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 1 + static_cast<int>(rng.next_u64() % 4);
    const int r = m + static_cast<int>(rng.next_u64() % (9 - m));
    SystemStructure s;
    s.m = m;
    s.d.resize(static_cast<std::size_t>(m));
    s.n = 0;
    for (int i = 0; i < m; ++i) {
      s.d[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.next_u64() % 3);
      s.n += s.d[static_cast<std::size_t>(i)];
    }
    const BrunovskyTriple t = build_block_brunovsky(s);
    Eigen::MatrixXd G(m, r);
    do {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < r; ++j) G(i, j) = rng.normal();
    } while (numeric_rank(G) < m);
    CHECK(is_controllable_pair(t.A, t.B * G).controllable);
  }
}

namespace {

// linear Brunovsky test system with exact dictionary Psi(u, xi) = u
struct LinearRun {
  Eigen::MatrixXd psi;  // m x N (inputs)
  Eigen::MatrixXd xi;   // n x (N+1)
};

LinearRun roll_linear(const BrunovskyTriple& t, const Eigen::VectorXd& xi0, const Eigen::MatrixXd& u) {
  LinearRun run;
  const int N = static_cast<int>(u.cols());
  run.psi = u;
  run.xi.resize(xi0.size(), N + 1);
  run.xi.col(0) = xi0;
  for (int k = 0; k < N; ++k) run.xi.col(k + 1) = t.A * run.xi.col(k) + t.B * u.col(k);
  return run;
}

}  // namespace

TEST_CASE("trajectory membership check on a linear Brunovsky system") {
  const SystemStructure s{2, 3, {2, 1}};
  const BrunovskyTriple t = build_block_brunovsky(s);
  Rng rng(99);
  const int N = 60, L = 5;
  Eigen::MatrixXd u(2, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < 2; ++i) u(i, j) = rng.uniform(-1, 1);
  const LinearRun data = roll_linear(t, Eigen::Vector3d(0.1, -0.2, 0.3), u);

  SUBCASE("window of the data is a trajectory with zero residual") {
    const int at = 7;
    const Eigen::MatrixXd psi_bar = data.psi.middleCols(at, L);
    const Eigen::MatrixXd xi_bar = data.xi.middleCols(at, L + 1);
    const TrajectoryCheck check = nominal_trajectory_check(data.psi, data.xi, psi_bar, xi_bar, L, 1e-8);
    CHECK(check.pe_verified);
    CHECK(check.is_trajectory);
    CHECK(check.residual_inf <= 1e-9);
    REQUIRE(check.alpha.has_value());
    // the returned combination reproduces the candidate's final state
    const HankelMatrix h_xi = hankel(data.xi, L + 1);
    CHECK(((h_xi.block_row(L) * *check.alpha) - xi_bar.col(L)).lpNorm<Eigen::Infinity>() <= 1e-8);
  }

  SUBCASE("fresh rollout is a trajectory") {
    Eigen::MatrixXd u_bar(2, L);
    for (int j = 0; j < L; ++j)
      for (int i = 0; i < 2; ++i) u_bar(i, j) = rng.uniform(-1, 1);
    const LinearRun cand = roll_linear(t, Eigen::Vector3d(0.5, 0.1, -0.4), u_bar);
    const TrajectoryCheck check = nominal_trajectory_check(data.psi, data.xi, cand.psi, cand.xi, L, 1e-8);
    CHECK(check.is_trajectory);
  }

  SUBCASE("perturbed candidate is rejected") {
    Eigen::MatrixXd u_bar(2, L);
    for (int j = 0; j < L; ++j)
      for (int i = 0; i < 2; ++i) u_bar(i, j) = rng.uniform(-1, 1);
    LinearRun cand = roll_linear(t, Eigen::Vector3d(0.5, 0.1, -0.4), u_bar);
    cand.xi(0, L) += 1.0;
    const TrajectoryCheck check = nominal_trajectory_check(data.psi, data.xi, cand.psi, cand.xi, L, 1e-8);
    CHECK_FALSE(check.is_trajectory);
    CHECK(check.residual_inf > 1e-8);
    CHECK_FALSE(check.alpha.has_value());
  }

  SUBCASE("dimension mismatches raise structure errors") {
    CHECK_THROWS_AS(nominal_trajectory_check(data.psi, data.xi, data.psi.leftCols(L), data.xi.leftCols(L), L, 1e-8),
                    StructureError);
  }
}
