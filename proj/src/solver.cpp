#include "conesolve/solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "conesolve/errors.hpp"

namespace conesolve {

void SolverConfig::validate() const {
  auto fail = [](const char* field) { throw ConfigError(std::string("solver.") + field + " must be positive"); };
  if (!(newton_tol > 0.0)) fail("newton_tol");
  if (!(newton_tol < 1.0)) throw ConfigError("solver.newton_tol must be below 1");
  if (max_newton_iters <= 0) fail("max_newton_iters");
  if (continuation_steps <= 0) fail("continuation_steps");
  if (max_step_halvings <= 0) fail("max_step_halvings");
  if (damping <= 0) fail("damping");
  if (!(linear_tol > 0.0)) fail("linear_tol");
}

namespace {

void free_numbering(const SphereMesh& mesh, std::vector<int>& free, std::vector<int>& index,
                   bool keep_cones = false) {
  free.clear();
  index.assign(mesh.num_vertices(), -1);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (!keep_cones && mesh.is_cone_vertex(int(v))) continue;
    index[v] = int(free.size());
    free.push_back(int(v));
  }
}

// Rows/columns of S restricted to the free vertices, with each row scaled by row_scale
// and diag added to the diagonal.
Eigen::SparseMatrix<double> restrict_stiffness(const SphereMesh& mesh, const std::vector<int>& index,
                                               std::size_t dim, const Eigen::VectorXd& row_scale,
                                               const Eigen::VectorXd& diag) {
  const auto& S = mesh.stiffness();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(std::size_t(S.nonZeros()) + dim);
  for (int col = 0; col < S.outerSize(); ++col) {
    const int c = index[std::size_t(col)];
    if (c < 0) continue;
    for (Eigen::SparseMatrix<double>::InnerIterator it(S, col); it; ++it) {
      const int r = index[std::size_t(it.row())];
      if (r < 0) continue;
      trip.emplace_back(r, c, row_scale[r] * it.value());
    }
  }
  for (std::size_t i = 0; i < dim; ++i) trip.emplace_back(int(i), int(i), diag[Eigen::Index(i)]);
  Eigen::SparseMatrix<double> out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

double sup_abs(const GridFunction& f) { return f.values().size() ? f.values().cwiseAbs().maxCoeff() : 0.0; }

void require_positive_target(const ConicalBackground& bg, const GridFunction& k, Normalization norm) {
  k.require_mesh(bg.mesh());
  for (std::size_t v = 0; v < k.size(); ++v) {
    if (norm == Normalization::Pinned && bg.is_cone_vertex(int(v))) continue;
    if (!(k[v] > 0.0) || !std::isfinite(k[v])) {
      std::ostringstream os;
      os << "target curvature " << k[v] << " at vertex " << v << " is not positive";
      throw NonPositiveTarget(os.str());
    }
  }
}

// Right-hand side rho^{2 beta} K per node. On the path, Q_t = m^{1-t} (rho^{2 beta} K)^t,
// so t = 0 is solved by u = 0.
GridFunction path_rhs(const ConicalBackground& bg, const GridFunction& k_target, double t, Normalization norm) {
  GridFunction q(bg.mesh(), 0.0);
  for (std::size_t v = 0; v < q.size(); ++v) {
    if (bg.is_cone_vertex(int(v))) continue;
    const double full = bg.mass_weight()[v] * k_target[v];
    q[v] = t == 1.0 ? full : std::exp((1.0 - t) * std::log(bg.m_beta()[v]) + t * std::log(full));
  }
  if (norm == Normalization::Natural) {
    for (std::size_t i = 0; i < bg.divisor().size(); ++i) {
      const std::size_t v = std::size_t(bg.mesh().cone_vertex_ids()[i]);
      q[v] = std::pow(bg.m_beta()[v], 1.0 - t) * std::pow(k_target[v], t) * cone_cell_weight(bg, i, t);
    }
  }
  return q;
}

GridFunction residual_of(const ConicalBackground& bg, const GridFunction& u, const GridFunction& q,
                         Normalization norm) {
  const GridFunction lap = laplace_apply(bg.mesh(), u);
  GridFunction F(bg.mesh(), 0.0);
  for (std::size_t v = 0; v < F.size(); ++v) {
    if (norm == Normalization::Pinned && bg.is_cone_vertex(int(v))) continue;
    F[v] = std::exp(-2.0 * u[v]) * (bg.m_beta()[v] - lap[v]) - q[v];
  }
  return F;
}

// Size of the rounding error in F(u): the cell fluxes are divided by the node
// areas, which are tiny near graded cones, and rho^{2 beta} K may be large there.
double roundoff_floor(const ConicalBackground& bg, const GridFunction& u, const GridFunction& q, Normalization norm) {
  const SphereMesh& mesh = bg.mesh();
  const auto& S = mesh.stiffness();
  Eigen::VectorXd flux = Eigen::VectorXd::Zero(S.rows());
  for (int col = 0; col < S.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(S, col); it; ++it)
      if (it.row() != col) flux[it.row()] += std::abs(it.value()) * (std::abs(u[std::size_t(col)]) + std::abs(u[std::size_t(it.row())]));
  double worst = 0.0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (norm == Normalization::Pinned && bg.is_cone_vertex(int(v))) continue;
    const double a = mesh.node_areas()[Eigen::Index(v)];
    worst = std::max(worst, std::exp(-2.0 * u[v]) * (std::abs(bg.m_beta()[v]) + flux[Eigen::Index(v)] / a) + std::abs(q[v]));
  }
  return 2.0 * std::numeric_limits<double>::epsilon() * worst;
}

struct NewtonOutcome {
  GridFunction u;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Core iteration; errors propagate as exceptions.
NewtonOutcome newton_core(const ConicalBackground& bg, const GridFunction& q, GridFunction u,
                          const SolverConfig& cfg, std::vector<std::string>* warnings) {
  const SphereMesh& mesh = bg.mesh();
  const Normalization norm = cfg.normalization;
  std::vector<int> free, index;
  free_numbering(mesh, free, index, norm == Normalization::Natural);
  const std::size_t dim = free.size();
  const auto& area = mesh.node_areas();

  NewtonOutcome out;
  GridFunction F = residual_of(bg, u, q, norm);
  double res = sup_abs(F);
  double floor = roundoff_floor(bg, u, q, norm);
  double tol = std::max(cfg.newton_tol, floor);
  while (res > tol && out.iterations < cfg.max_newton_iters) {
    // A e^{2u} dF = -S - 2 diag(A (m - Delta u)), symmetric.
    const GridFunction lap = laplace_apply(mesh, u);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd diag(static_cast<Eigen::Index>(dim)), rhs(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      const std::size_t v = std::size_t(free[i]);
      const double a = area[Eigen::Index(v)];
      diag[Eigen::Index(i)] = -2.0 * a * (bg.m_beta()[v] - lap[v]);
      rhs[Eigen::Index(i)] = -a * std::exp(2.0 * u[v]) * F[v];
    }
    scale *= -1.0;
    const Eigen::SparseMatrix<double> J = restrict_stiffness(mesh, index, dim, scale, diag);

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SingularLinearization("factorization of the linearized operator failed");
    // normwise backward error of the inner solve
    const double j_norm = J.norm();
    auto backward_error = [&](const Eigen::VectorXd& x) {
      return (J * x - rhs).norm() / std::max(j_norm * x.norm() + rhs.norm(), 1e-300);
    };
    Eigen::VectorXd step = lu.solve(rhs);
    double lin_res = backward_error(step);
    for (int refine = 0; refine < 3 && step.allFinite() && lin_res > cfg.linear_tol; ++refine) {
      step += lu.solve(rhs - J * step);
      lin_res = backward_error(step);
    }
    if (lu.info() != Eigen::Success || !step.allFinite() || lin_res > cfg.linear_tol) {
      std::ostringstream os;
      os << "inner solve reached backward error " << lin_res << " (tolerance " << cfg.linear_tol << ")";
      throw SingularLinearization(os.str());
    }

    double lambda = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= cfg.damping; ++halving, lambda *= 0.5) {
      GridFunction trial = u;
      for (std::size_t i = 0; i < dim; ++i) trial[std::size_t(free[i])] += lambda * step[Eigen::Index(i)];
      GridFunction trial_F = residual_of(bg, trial, q, norm);
      const double trial_res = sup_abs(trial_F);
      if (std::isfinite(trial_res) && trial_res < res) {
        u = std::move(trial);
        F = std::move(trial_F);
        res = trial_res;
        floor = roundoff_floor(bg, u, q, norm);
        tol = std::max(cfg.newton_tol, floor);
        accepted = true;
        break;
      }
    }
    ++out.iterations;
    if (!accepted) {
      std::ostringstream os;
      os << "no decrease of the residual " << res << " after " << cfg.damping << " step halvings";
      throw NewtonDivergence(os.str());
    }
  }
  out.converged = res <= tol;
  if (out.converged && res > cfg.newton_tol && warnings) {
    std::ostringstream os;
    os << "residual " << res << " is at the round-off floor " << floor << " of the target scale";
    warnings->push_back(os.str());
  }
  if (!out.converged && warnings) {
    std::ostringstream os;
    os << "Newton stopped after " << out.iterations << " iterations at residual " << res;
    warnings->push_back(os.str());
  }
  out.u = std::move(u);
  out.residual = res;
  return out;
}

}  // namespace

GridFunction LinearizedOperator::apply(const ConicalBackground& bg, const GridFunction& h) const {
  require_pinned(bg, h);
  const GridFunction lap = laplace_apply(bg.mesh(), h);
  GridFunction out(bg.mesh(), 0.0);
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (bg.is_cone_vertex(int(v))) continue;
    out[v] = diagonal_[v] * h[v] - multiplier_[v] * lap[v];
  }
  return out;
}

LinearizedOperator linearize(const ConicalBackground& bg, const GridFunction& u) {
  const GridFunction k = curvature_map(bg, u);
  const SphereMesh& mesh = bg.mesh();
  LinearizedOperator op;
  free_numbering(mesh, op.free_, op.index_);
  op.diagonal_ = GridFunction(mesh, 0.0);
  op.multiplier_ = GridFunction(mesh, 0.0);
  const std::size_t dim = op.free_.size();
  Eigen::VectorXd scale(static_cast<Eigen::Index>(dim)), diag(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t v = std::size_t(op.free_[i]);
    op.diagonal_[v] = -2.0 * k[v];
    op.multiplier_[v] = std::exp(-2.0 * u[v]) * bg.inverse_weight()[v];
    scale[Eigen::Index(i)] = -op.multiplier_[v] / mesh.node_areas()[Eigen::Index(v)];
    diag[Eigen::Index(i)] = op.diagonal_[v];
  }
  // S has zero row sums, so the diagonal of S carries -sum_j w_ij.
  op.matrix_ = restrict_stiffness(mesh, op.index_, dim, scale, diag);
  return op;
}

double self_adjointness_defect(const ConicalBackground& bg, const GridFunction& u, const GridFunction& f,
                               const GridFunction& g) {
  u.require_mesh(bg.mesh());
  if (u.values().size() && u.values().cwiseAbs().maxCoeff() != 0.0)
    throw ScopeError("self-adjointness is checked at the base point u = 0");
  const LinearizedOperator op = linearize(bg, u);
  GridFunction lf = op.apply(bg, f), lg = op.apply(bg, g);
  lf.values() *= -1.0;
  lg.values() *= -1.0;
  return std::abs(weighted_inner(bg, f, lg) - weighted_inner(bg, lf, g));
}

GridFunction scaled_residual(const ConicalBackground& bg, const GridFunction& u, const GridFunction& k_target,
                             Normalization norm) {
  u.require_mesh(bg.mesh());
  k_target.require_mesh(bg.mesh());
  return residual_of(bg, u, path_rhs(bg, k_target, 1.0, norm), norm);
}

namespace {

double report_gauss_bonnet(const ConicalBackground& bg, const GridFunction& u, Normalization norm) {
  return norm == Normalization::Pinned ? gauss_bonnet(bg, u).residual : metric_gauss_bonnet(bg, u).residual;
}

}  // namespace

std::pair<GridFunction, SolverReport> newton_solve(const ConicalBackground& bg, const GridFunction& k_target,
                                                   const GridFunction& u0, const SolverConfig& cfg) {
  cfg.validate();
  require_positive_target(bg, k_target, cfg.normalization);
  if (cfg.normalization == Normalization::Pinned)
    require_pinned(bg, u0);
  else
    u0.require_mesh(bg.mesh());
  SolverReport report;
  NewtonOutcome r = newton_core(bg, path_rhs(bg, k_target, 1.0, cfg.normalization), u0, cfg, &report.warnings);
  report.converged = r.converged;
  report.final_residual_sup = r.residual;
  report.newton_iterations_total = r.iterations;
  report.continuation_path.push_back({1.0, r.iterations, r.residual});
  report.gauss_bonnet_residual = report_gauss_bonnet(bg, r.u, cfg.normalization);
  return {std::move(r.u), std::move(report)};
}

std::pair<GridFunction, SolverReport> continuation_solve(const ConicalBackground& bg, const GridFunction& k_target,
                                                         const SolverConfig& cfg) {
  cfg.validate();
  const ScopeReport scope = solver_scope_check(bg.divisor());
  if (!scope.pass) {
    std::ostringstream os;
    os << "divisor outside the solver's hypotheses:";
    for (const auto& item : scope.items)
      if (!item.pass) os << " " << item.name;
    throw ScopeError(os.str());
  }
  require_positive_target(bg, k_target, cfg.normalization);

  SolverReport report;
  GridFunction u(bg.mesh(), 0.0);
  const double base_dt = 1.0 / cfg.continuation_steps;
  double t = 0.0, dt = base_dt;
  int halvings = 0;
  while (t < 1.0) {
    const double next = std::min(1.0, t + dt);
    bool ok = false;
    NewtonOutcome r;
    try {
      r = newton_core(bg, path_rhs(bg, k_target, next, cfg.normalization), u, cfg, nullptr);
      ok = r.converged;
    } catch (const SingularLinearization&) {
    } catch (const NewtonDivergence&) {
    }
    report.newton_iterations_total += r.iterations;
    if (!ok) {
      if (++halvings > cfg.max_step_halvings) {
        std::ostringstream os;
        os << "continuation stalled at t = " << t << " after " << cfg.max_step_halvings << " step halvings";
        throw ContinuationStall(os.str());
      }
      dt *= 0.5;
      std::ostringstream os;
      os << "step to t = " << next << " failed; increment halved to " << dt;
      report.warnings.push_back(os.str());
      continue;
    }
    u = std::move(r.u);
    t = next;
    report.continuation_path.push_back({t, r.iterations, r.residual});
    halvings = 0;
    dt = std::min(base_dt, 2.0 * dt);
  }

  NewtonOutcome polish = newton_core(bg, path_rhs(bg, k_target, 1.0, cfg.normalization), u, cfg, &report.warnings);
  report.newton_iterations_total += polish.iterations;
  report.converged = polish.converged;
  report.final_residual_sup = polish.residual;
  if (polish.iterations > 0) report.continuation_path.push_back({1.0, polish.iterations, polish.residual});
  report.gauss_bonnet_residual = report_gauss_bonnet(bg, polish.u, cfg.normalization);
  return {std::move(polish.u), std::move(report)};
}

}  // namespace conesolve
