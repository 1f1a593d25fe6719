#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <utility>
#include <vector>

#include "conesolve/background.hpp"

namespace conesolve {

/// How the conformal factor is normalized at the cone vertices.
enum class Normalization {
  /// u = 0 at every cone vertex; the cone rows are dropped.
  Pinned,
  /// Cone values are unknowns. The cone row balances the cell flux against
  /// K(p_i) times the cell mean of rho^{2 beta} (see cone_cell_weight).
  Natural,
};

struct SolverConfig {
  double newton_tol = 1e-10;     ///< sup-norm of rho^{2 beta} (pi(u) - K); raised to the round-off floor if that is larger
  int max_newton_iters = 25;
  int continuation_steps = 8;
  int max_step_halvings = 10;
  int damping = 8;               ///< line-search halvings per Newton step
  double linear_tol = 1e-12;     ///< backward error |J x - b| / (|J| |x| + |b|) of the inner solve
  Normalization normalization = Normalization::Pinned;

  /// Throws ConfigError if a field is out of range.
  void validate() const;
};

struct PathPoint {
  double t = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct SolverReport {
  bool converged = false;
  double final_residual_sup = 0.0;
  int newton_iterations_total = 0;
  std::vector<PathPoint> continuation_path;
  double gauss_bonnet_residual = 0.0;
  std::vector<std::string> warnings;
};

/// D_u pi restricted to pinned functions: the cone vertices are eliminated,
/// leaving a square operator on the V - n free vertices.
class LinearizedOperator {
 public:
  /// Free vertex index -> mesh vertex.
  const std::vector<int>& free_vertices() const { return free_; }
  /// Mesh vertex -> free index, or -1 at cone vertices.
  const std::vector<int>& free_index() const { return index_; }
  std::size_t dimension() const { return free_.size(); }

  /// -2 K_g with K_g = pi(u).
  const GridFunction& diagonal() const { return diagonal_; }
  /// e^{-2u} rho^{-2 beta}.
  const GridFunction& multiplier() const { return multiplier_; }
  /// Assembled matrix on the free vertices.
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }

  /// Matrix-free -2 h K_g - e^{-2u} Delta_beta h; zero at cone vertices.
  GridFunction apply(const ConicalBackground& bg, const GridFunction& h) const;

  friend LinearizedOperator linearize(const ConicalBackground&, const GridFunction&);

 private:
  std::vector<int> free_, index_;
  GridFunction diagonal_, multiplier_;
  Eigen::SparseMatrix<double> matrix_;
};

/// Throws NormalizationError unless u is pinned.
LinearizedOperator linearize(const ConicalBackground& bg, const GridFunction& u);

/// |<f, L g>_w - <L f, g>_w| with L h = -D_0 pi(h) = rho^{-2 beta}(a h + Delta h),
/// a = 2 (1 - beta Delta log rho). ScopeError unless u vanishes identically.
double self_adjointness_defect(const ConicalBackground& bg, const GridFunction& u, const GridFunction& f,
                               const GridFunction& g);

/// F(u) = e^{-2u} (m_beta - Delta u) - rho^{2 beta} K at non-cone nodes. Cone
/// entries are 0 when pinned; with Natural they use the cell mean of rho^{2 beta}.
GridFunction scaled_residual(const ConicalBackground& bg, const GridFunction& u, const GridFunction& k_target,
                             Normalization norm = Normalization::Pinned);

/// Damped Newton for pi(u) = K from u0 (pinned unless cfg asks for Natural,
/// which also needs K > 0 at the cone vertices). Throws NonPositiveTarget,
/// SingularLinearization or NewtonDivergence; hitting the iteration cap
/// returns converged = false.
std::pair<GridFunction, SolverReport> newton_solve(const ConicalBackground& bg, const GridFunction& k_target,
                                                   const GridFunction& u0, const SolverConfig& cfg = {});

/// Newton along log K_t = (1 - t) log K_beta + t log K, starting at u = 0.
/// Requires solver_scope_check to pass (ScopeError otherwise).
std::pair<GridFunction, SolverReport> continuation_solve(const ConicalBackground& bg, const GridFunction& k_target,
                                                         const SolverConfig& cfg = {});

}  // namespace conesolve
