#include "ddfl/solver.hpp"

#include <Eigen/QR>
#include <cmath>

#include "ddfl/rng.hpp"

namespace ddfl {

namespace {

// residual with the ridge rows folded in: [rho(alpha); sqrt(reg) * alpha]
Eigen::VectorXd augmented_residual(const ConstrainedNllsProblem& p, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd rho = p.residual(alpha);
  if (p.reg_weight <= 0.0) return rho;
  Eigen::VectorXd out(rho.size() + alpha.size());
  out.head(rho.size()) = rho;
  out.tail(alpha.size()) = std::sqrt(p.reg_weight) * alpha;
  return out;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + step;
    const Eigen::VectorXd fp = f(xp);
    xp(j) = x(j) - step;
    const Eigen::VectorXd fm = f(xp);
    xp(j) = x(j);
    jac.col(j) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

void check_jacobian_directional(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                const Eigen::MatrixXd& jac, const Eigen::VectorXd& x, double h, double tol) {
  Rng rng(0x9d1cbeefULL);
  const int ndir = std::min<int>(5, static_cast<int>(x.size()));
  for (int t = 0; t < ndir; ++t) {
    Eigen::VectorXd dir(x.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
    dir.normalize();
    const Eigen::VectorXd fd = (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
    const Eigen::VectorXd an = jac * dir;
    const double err = (fd - an).norm() / std::max(1.0, an.norm());
    if (err > tol)
      throw NumericalError("analytic Jacobian disagrees with finite differences at the start point (directional error " +
                           std::to_string(err) + "); refusing to solve");
  }
}

}  // namespace

FeasibleParameterization feasible_parameterization(const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                                                   double feasibility_tol) {
  FeasibleParameterization fp;
  const int dim = static_cast<int>(A_eq.cols());
  if (A_eq.rows() == 0) {
    fp.alpha_p = Eigen::VectorXd::Zero(dim);
    fp.Z = Eigen::MatrixXd::Identity(dim, dim);
    fp.rank = 0;
    return fp;
  }
  if (A_eq.rows() != b_eq.size()) throw DimensionError("feasible_parameterization: A_eq rows must match b_eq length");

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A_eq);
  fp.alpha_p = cod.solve(b_eq);
  const double res = (A_eq * fp.alpha_p - b_eq).norm();
  if (res > feasibility_tol * (1.0 + b_eq.norm()))
    throw InfeasibleError("equality constraint is inconsistent (least-squares residual " + std::to_string(res) + ")",
                          res);
  fp.rank = static_cast<int>(cod.rank());

  // null(A_eq) = orthogonal complement of range(A_eq^T)
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A_eq.transpose());
  const int rank = static_cast<int>(qr.rank());
  Eigen::MatrixXd Q = qr.householderQ();
  fp.Z = Q.rightCols(dim - rank);
  return fp;
}

SolveResult solve(const ConstrainedNllsProblem& problem, const SolverConfig& config) {
  if (!problem.residual) throw StructureError("solve: residual function not set");
  const int dim = problem.dim > 0 ? problem.dim : static_cast<int>(problem.A_eq.cols());
  if (dim < 1) throw StructureError("solve: cannot infer alpha dimension");

  const FeasibleParameterization fp = feasible_parameterization(problem.A_eq, problem.b_eq, config.feasibility_tol);
  const Eigen::VectorXd& alpha_p = fp.alpha_p;
  const Eigen::MatrixXd& Z = fp.Z;
  const int red = static_cast<int>(Z.cols());

  auto reduced_residual = [&](const Eigen::VectorXd& beta) -> Eigen::VectorXd {
    return augmented_residual(problem, alpha_p + Z * beta);
  };

  auto reduced_jacobian = [&](const Eigen::VectorXd& beta) -> Eigen::MatrixXd {
    const Eigen::VectorXd alpha = alpha_p + Z * beta;
    if (problem.residual_jacobian) {
      const Eigen::MatrixXd jac_alpha = problem.residual_jacobian(alpha);
      if (problem.reg_weight <= 0.0) return jac_alpha * Z;
      Eigen::MatrixXd jac(jac_alpha.rows() + dim, red);
      jac.topRows(jac_alpha.rows()) = jac_alpha * Z;
      jac.bottomRows(dim) = std::sqrt(problem.reg_weight) * Z;
      return jac;
    }
    return fd_jacobian(reduced_residual, beta, config.fd_step);
  };

  SolveResult result;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(red);
  Eigen::VectorXd rho = reduced_residual(beta);
  double f = rho.squaredNorm();

  if (red == 0) {
    result.alpha_star = alpha_p;
    result.converged = true;
    result.message = "constraint determines the solution uniquely";
  } else {
    if (problem.residual_jacobian && config.check_jacobian) {
      const Eigen::MatrixXd jac0 = problem.residual_jacobian(alpha_p);
      auto plain = [&](const Eigen::VectorXd& a) { return problem.residual(a); };
      check_jacobian_directional(plain, jac0, alpha_p, config.fd_step, config.jacobian_check_tol);
    }

    Eigen::MatrixXd jac = reduced_jacobian(beta);
    Eigen::VectorXd grad = jac.transpose() * rho;
    double mu = 1e-3 * (jac.transpose() * jac).diagonal().maxCoeff();
    if (!(mu > 0.0)) mu = 1e-3;
    double nu = 2.0;
    bool done = false;
    std::string message = "max iterations reached";
    bool converged = false;
    int iter = 0;

    const auto grad_scale = [&]() { return std::max(1.0, std::sqrt(f)); };

    if (grad.lpNorm<Eigen::Infinity>() <= config.grad_tol * grad_scale()) {
      converged = true;
      message = "stationary at start";
      done = true;
    }

    while (!done && iter < config.max_iter) {
      ++iter;
      Eigen::MatrixXd H = jac.transpose() * jac;
      H.diagonal().array() += mu;
      const Eigen::VectorXd delta = H.ldlt().solve(-grad);

      if (delta.norm() <= config.step_tol * (beta.norm() + config.step_tol)) {
        converged = true;
        message = "step tolerance reached";
        break;
      }

      const Eigen::VectorXd beta_new = beta + delta;
      const Eigen::VectorXd rho_new = reduced_residual(beta_new);
      const double f_new = rho_new.squaredNorm();
      const double predicted = delta.dot(mu * delta - grad);  // > 0 by construction
      const double gain = predicted > 0.0 ? (f - f_new) / predicted : -1.0;

      if (gain > 0.0 && f_new < f) {
        beta = beta_new;
        rho = rho_new;
        f = f_new;
        jac = reduced_jacobian(beta);
        grad = jac.transpose() * rho;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
        nu = 2.0;
        if (grad.lpNorm<Eigen::Infinity>() <= config.grad_tol * grad_scale()) {
          converged = true;
          message = "gradient tolerance reached";
          break;
        }
        if (f <= 1e-30) {
          converged = true;
          message = "residual vanished";
          break;
        }
      } else {
        mu *= nu;
        nu *= 2.0;
        if (!std::isfinite(mu) || mu > 1e40) {
          message = "damping overflow: no descent direction found";
          break;
        }
      }
    }

    result.alpha_star = alpha_p + Z * beta;
    result.iterations = iter;
    result.converged = converged;
    result.message = message;
    result.projected_gradient_norm = grad.lpNorm<Eigen::Infinity>();
  }

  const Eigen::VectorXd rho_final = problem.residual(result.alpha_star);
  const double reg_term = problem.reg_weight * result.alpha_star.squaredNorm();
  result.objective = rho_final.squaredNorm() + reg_term;
  result.raw_residual_mass = result.objective - reg_term;
  result.residual_mass = std::max(0.0, rho_final.squaredNorm());
  if (problem.A_eq.rows() > 0)
    result.constraint_violation = (problem.A_eq * result.alpha_star - problem.b_eq).lpNorm<Eigen::Infinity>();
  return result;
}

}  // namespace ddfl
