#include "ddfl/basis.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace ddfl {

void BasisDictionary::validate() const {
  if (r < 1 || m < 1 || n < 1) throw StructureError("BasisDictionary: r, m, n must be positive");
  if (!eval) throw StructureError("BasisDictionary: eval function not set");
  if (static_cast<int>(names.size()) != r) throw StructureError("BasisDictionary: need one name per basis function");
}

GridSpec GridSpec::uniform(int dims, int points) {
  GridSpec g;
  g.points_per_dim.assign(static_cast<std::size_t>(dims), points);
  return g;
}

long GridSpec::total_points() const {
  long total = 1;
  for (int p : points_per_dim) total *= p;
  return total;
}

void GridSpec::validate() const {
  if (points_per_dim.empty()) throw StructureError("GridSpec: no dimensions");
  for (int p : points_per_dim)
    if (p < 2) throw StructureError("GridSpec: need at least 2 points per dimension");
}

void for_each_grid_point(const OmegaBox& box, const GridSpec& grid,
                         const std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&)>& fn) {
  grid.validate();
  box.validate();
  const int mu = static_cast<int>(box.tau_lb.size());
  const int nx = static_cast<int>(box.xi_lb.size());
  const int dims = mu + nx;
  if (static_cast<int>(grid.points_per_dim.size()) != dims)
    throw DimensionError("grid dimension count " + std::to_string(grid.points_per_dim.size()) +
                         " does not match box dimension " + std::to_string(dims));

  Eigen::VectorXd lb(dims), ub(dims);
  lb << box.tau_lb, box.xi_lb;
  ub << box.tau_ub, box.xi_ub;

  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  Eigen::VectorXd point(dims);
  while (true) {
    for (int d = 0; d < dims; ++d) {
      const int count = grid.points_per_dim[static_cast<std::size_t>(d)];
      point(d) = lb(d) + (ub(d) - lb(d)) * static_cast<double>(idx[static_cast<std::size_t>(d)]) / (count - 1);
    }
    fn(point.head(mu), point.tail(nx));
    int d = dims - 1;
    while (d >= 0) {
      if (++idx[static_cast<std::size_t>(d)] < grid.points_per_dim[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }
}

BasisDictionary make_pendulum_dictionary(const PendulumParams& p_est, DictionaryForm form) {
  p_est.validate();
  const bool synthetic = (form == DictionaryForm::SyntheticInput);
  BasisDictionary dict;
  dict.m = 2;
  dict.n = 4;
  dict.r = 2;
  dict.input_complete = false;
  dict.input_injective = true;
  if (synthetic)
    dict.names = {"2*xi2 - xi1 + Ts^2*ztilde_1", "2*xi4 - xi3 + Ts^2*ztilde_2"};
  else
    dict.names = {"ztilde_1", "ztilde_2"};

  const double Ts = p_est.Ts;

  dict.eval = [p_est, Ts, synthetic](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const Eigen::Vector2d q(xi(0), xi(2));
    const Eigen::Vector2d qd((xi(1) - xi(0)) / Ts, (xi(3) - xi(2)) / Ts);
    const ManipulatorTerms t = manipulator_terms(q, qd, p_est);
    const Eigen::Vector2d z = t.M.inverse() * (u.head<2>() - t.C * qd - t.Gv);
    Eigen::VectorXd out(2);
    if (synthetic) {
      out(0) = 2.0 * xi(1) - xi(0) + Ts * Ts * z(0);
      out(1) = 2.0 * xi(3) - xi(2) + Ts * Ts * z(1);
    } else {
      out = z;
    }
    return out;
  };

  dict.jac_u = [p_est, Ts, synthetic](const Eigen::VectorXd& /*u*/, const Eigen::VectorXd& xi) {
    const Eigen::Vector2d q(xi(0), xi(2));
    const ManipulatorTerms t = manipulator_terms(q, Eigen::Vector2d::Zero(), p_est);
    Eigen::MatrixXd jac = t.M.inverse();
    if (synthetic) jac *= Ts * Ts;
    return jac;
  };

  dict.jac_xi = [p_est, Ts, synthetic](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const double a = p_est.m2 * p_est.l1 * p_est.l2;
    const double q1 = xi(0), q2 = xi(2);
    const double qd1 = (xi(1) - xi(0)) / Ts;
    const double qd2 = (xi(3) - xi(2)) / Ts;
    const double delta = q1 - q2;
    const double sd = std::sin(delta), cd = std::cos(delta);

    Eigen::Matrix2d M;
    M << (p_est.m1 + p_est.m2) * p_est.l1 * p_est.l1, a * cd, a * cd, p_est.m2 * p_est.l2 * p_est.l2;
    const Eigen::Matrix2d Minv = M.inverse();
    const Eigen::Vector2d cqd(a * sd * qd2 * qd2, -a * sd * qd1 * qd1);
    const Eigen::Vector2d grav(p_est.g * (p_est.m1 + p_est.m2) * p_est.l1 * std::sin(q1),
                               p_est.g * p_est.m2 * p_est.l2 * std::sin(q2));
    const Eigen::Vector2d z = Minv * (u.head<2>() - cqd - grav);

    Eigen::Matrix2d dM_ddelta;
    dM_ddelta << 0.0, -a * sd, -a * sd, 0.0;
    const Eigen::Vector2d dcqd_ddelta(a * cd * qd2 * qd2, -a * cd * qd1 * qd1);
    const Eigen::Vector2d dcqd_dqd1(0.0, -2.0 * a * sd * qd1);
    const Eigen::Vector2d dcqd_dqd2(2.0 * a * sd * qd2, 0.0);
    const Eigen::Vector2d dgrav_dq1(p_est.g * (p_est.m1 + p_est.m2) * p_est.l1 * std::cos(q1), 0.0);
    const Eigen::Vector2d dgrav_dq2(0.0, p_est.g * p_est.m2 * p_est.l2 * std::cos(q2));

    // d z / d xi_j = Minv (d w / d xi_j - (d M / d xi_j) z), w = u - C qd - G
    const Eigen::Vector2d dw_dxi0 = -dcqd_ddelta + dcqd_dqd1 / Ts - dgrav_dq1;
    const Eigen::Vector2d dw_dxi1 = -dcqd_dqd1 / Ts;
    const Eigen::Vector2d dw_dxi2 = dcqd_ddelta + dcqd_dqd2 / Ts - dgrav_dq2;
    const Eigen::Vector2d dw_dxi3 = -dcqd_dqd2 / Ts;
    Eigen::MatrixXd jac(2, 4);
    jac.col(0) = Minv * (dw_dxi0 - dM_ddelta * z);
    jac.col(1) = Minv * dw_dxi1;
    jac.col(2) = Minv * (dw_dxi2 + dM_ddelta * z);
    jac.col(3) = Minv * dw_dxi3;
    if (synthetic) {
      jac *= Ts * Ts;
      jac.row(0) += Eigen::RowVector4d(-1.0, 2.0, 0.0, 0.0);
      jac.row(1) += Eigen::RowVector4d(0.0, 0.0, -1.0, 2.0);
    }
    return jac;
  };

  return dict;
}

PendulumParams perturb_params(const PendulumParams& p, double max_rel, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "dictionary/perturbation"));
  PendulumParams out = p;
  out.m1 *= 1.0 + max_rel * rng.uniform(-1.0, 1.0);
  out.m2 *= 1.0 + max_rel * rng.uniform(-1.0, 1.0);
  out.l1 *= 1.0 + max_rel * rng.uniform(-1.0, 1.0);
  out.l2 *= 1.0 + max_rel * rng.uniform(-1.0, 1.0);
  return out;
}

CoefficientFit fit_coefficients(const BasisDictionary& dict, const VectorFn& oracle_phi, const OmegaBox& box,
                                const GridSpec& grid) {
  dict.validate();
  const int r = dict.r;
  const int m = dict.m;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(r, r);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(m, r);
  for_each_grid_point(box, grid, [&](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const Eigen::VectorXd psi = dict.eval(u, xi);
    const Eigen::VectorXd phi = oracle_phi(u, xi);
    if (!psi.allFinite()) throw EvaluationError("basis dictionary produced non-finite values on the grid");
    gram.noalias() += psi * psi.transpose();
    cross.noalias() += phi * psi.transpose();
  });

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0 || sv(r - 1) <= 1e-12 * sv(0)) {
    // name the basis function dominating the null direction
    const Eigen::VectorXd null_dir = svd.matrixV().col(r - 1);
    int worst = 0;
    null_dir.cwiseAbs().maxCoeff(&worst);
    throw LinearDependenceError("basis functions are linearly dependent over the grid; offending entry: " +
                                    dict.names[static_cast<std::size_t>(worst)],
                                worst);
  }

  CoefficientFit fit;
  fit.grid = grid;
  fit.Ghat = gram.ldlt().solve(cross.transpose()).transpose();

  double max_res = 0.0, sum_res = 0.0;
  long count = 0;
  for_each_grid_point(box, grid, [&](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const Eigen::VectorXd res = oracle_phi(u, xi) - fit.Ghat * dict.eval(u, xi);
    const double rn = res.lpNorm<Eigen::Infinity>();
    max_res = std::max(max_res, rn);
    sum_res += rn;
    ++count;
  });
  fit.eps_star = max_res;
  fit.mean_residual = sum_res / static_cast<double>(count);
  fit.full_row_rank = (numeric_rank(fit.Ghat) == m);
  return fit;
}

EpsValidation validate_eps_star(const CoefficientFit& fit, const BasisDictionary& dict, const VectorFn& oracle_phi,
                                const OmegaBox& box, const GridSpec& validation_grid) {
  EpsValidation v;
  for_each_grid_point(box, validation_grid, [&](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const double rn = (oracle_phi(u, xi) - fit.Ghat * dict.eval(u, xi)).lpNorm<Eigen::Infinity>();
    v.max_residual = std::max(v.max_residual, rn);
    if (rn > fit.eps_star) ++v.exceedances;
    ++v.total_points;
  });
  return v;
}

LipschitzEstimate estimate_lipschitz(const VectorFn& oracle_phi, const OmegaBox& box, const GridSpec& grid,
                                     double w_star) {
  grid.validate();
  const int mu = static_cast<int>(box.tau_lb.size());
  const int nx = static_cast<int>(box.xi_lb.size());
  for (int d = mu; d < mu + nx; ++d)
    if (grid.points_per_dim[static_cast<std::size_t>(d)] < 3)
      throw EstimationError("estimate_lipschitz: need at least 3 grid points per state dimension");

  Eigen::VectorXd steps(nx);
  for (int d = 0; d < nx; ++d) {
    const int count = grid.points_per_dim[static_cast<std::size_t>(mu + d)];
    steps(d) = (box.xi_ub(d) - box.xi_lb(d)) / (count - 1);
  }

  LipschitzEstimate est;
  for_each_grid_point(box, grid, [&](const Eigen::VectorXd& u, const Eigen::VectorXd& xi) {
    const Eigen::VectorXd phi = oracle_phi(u, xi);
    // neighbors one grid step away in every +/- sign pattern; the diagonal
    // steps are what recover the infinity-norm Lipschitz constant
    for (unsigned mask = 0; mask < (1u << nx); ++mask) {
      Eigen::VectorXd xi2 = xi;
      for (int d = 0; d < nx; ++d) xi2(d) += (mask & (1u << d)) ? steps(d) : -steps(d);
      if ((xi2.array() > box.xi_ub.array() + 1e-12).any() || (xi2.array() < box.xi_lb.array() - 1e-12).any()) continue;
      const double dist = (xi2 - xi).lpNorm<Eigen::Infinity>();
      if (dist == 0.0) continue;
      const double slope = (oracle_phi(u, xi2) - phi).lpNorm<Eigen::Infinity>() / dist;
      est.K_Xi = std::max(est.K_Xi, slope);
    }
    // noise extremes: all sign patterns of +/- w*
    if (w_star > 0.0) {
      for (unsigned mask = 0; mask < (1u << nx); ++mask) {
        Eigen::VectorXd omega(nx);
        for (int d = 0; d < nx; ++d) omega(d) = (mask & (1u << d)) ? w_star : -w_star;
        const double delta = (phi - oracle_phi(u, xi + omega)).lpNorm<Eigen::Infinity>();
        est.K_w = std::max(est.K_w, delta / w_star);
      }
    }
  });
  est.K_Xi *= 1.1;
  est.K_w *= 1.1;
  return est;
}

double g_inf_norm(const CoefficientFit& fit) {
  if (fit.Ghat.size() == 0) return 0.0;
  return fit.Ghat.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace ddfl
