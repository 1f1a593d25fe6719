#pragma once

#include <memory>
#include <vector>

#include "conesolve/divisor.hpp"
#include "conesolve/sphere_mesh.hpp"

namespace conesolve {

/// How the radius function rho is built from the divisor.
enum class RadiusModel {
  /// rho = prod_i |x - p_i| / 2 = prod_i sin(d_i / 2). Each factor has
  /// Delta log rho_i = -1/2 away from p_i, so K_beta = rho^{-2 beta} (1 + sum beta_i / 2),
  /// positive everywhere exactly when chi(S^2, beta) > 0.
  Global,
  /// rho_i = tan(d_i/2) / tan(R/2) on d_i <= R/2, rho_i = 1 on d_i >= R, quintic
  /// blend of log rho_i in between. Compactly supported, but K_beta becomes
  /// negative in the blend annulus unless |beta_i| is small (below about 0.03
  /// for R = 0.6, 0.085 for R = 1).
  LocalBlend,
};

/// Conical background metric g_beta = rho^{2 beta} g_{+1} sampled on a mesh.
/// Immutable after construction. Fields that carry a factor rho^{-2 beta}
/// vanish at cone vertices (limit value, beta < 0); the mass weight
/// rho^{2 beta} is stored as 0 there so cone cells drop out of quadrature.
class ConicalBackground {
 public:
  const Divisor& divisor() const { return divisor_; }
  const SphereMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const SphereMesh> mesh_ptr() const { return mesh_; }
  RadiusModel model() const { return model_; }
  double cutoff_radius() const { return cutoff_radius_; }

  const GridFunction& rho() const { return rho_; }
  const GridFunction& log_rho() const { return log_rho_; }
  /// sum_i Delta_{+1} log rho_i (regular part).
  const GridFunction& log_rho_laplacian() const { return log_rho_laplacian_; }
  /// m_beta = 1 - sum_i beta_i Delta_{+1} log rho_i, so K_beta = rho^{-2 beta} m_beta.
  /// Cone vertices hold the regular part (the point mass at p_i left out).
  const GridFunction& m_beta() const { return m_beta_; }
  const GridFunction& k_beta() const { return k_beta_; }
  /// rho^{2 beta} = prod_i rho_i^{2 beta_i}; 0 at cone vertices.
  const GridFunction& mass_weight() const { return mass_weight_; }
  /// rho^{-2 beta}; 0 at cone vertices.
  const GridFunction& inverse_weight() const { return inverse_weight_; }
  /// Index of the cone point whose cutoff ball contains the vertex, or -1.
  int owner(int v) const { return owner_[std::size_t(v)]; }

  bool is_cone_vertex(int v) const { return mesh_->is_cone_vertex(v); }

  friend ConicalBackground build_background(const Divisor&, std::shared_ptr<const SphereMesh>,
                                            double, RadiusModel);

 private:
  ConicalBackground() = default;

  Divisor divisor_;
  std::shared_ptr<const SphereMesh> mesh_;
  RadiusModel model_ = RadiusModel::Global;
  double cutoff_radius_ = 0.0;
  GridFunction rho_, log_rho_, log_rho_laplacian_, m_beta_, k_beta_, mass_weight_, inverse_weight_;
  std::vector<int> owner_;
};

/// Throws GeometryError if cutoff balls overlap or the mesh does not carry
/// the divisor's cone points, BackgroundError if K_beta <= 0 at a non-cone node.
ConicalBackground build_background(const Divisor& divisor, std::shared_ptr<const SphereMesh> mesh,
                                   double cutoff_radius, RadiusModel model = RadiusModel::Global);

/// Radial profile used by RadiusModel::LocalBlend: log rho_i and its round
/// Laplacian as functions of the distance d to the cone point.
struct RadialProfile {
  double log_rho;
  double laplacian;
};
RadialProfile local_blend_profile(double d, double cutoff_radius);

/// Mean of rho^{2 s beta} over the node cell of cone point `cone`, taking the
/// cell as a geodesic disk of the same area. Finite for s in [0, 1].
double cone_cell_weight(const ConicalBackground& bg, std::size_t cone, double s);

/// Delta_beta f = rho^{-2 beta} Delta_{+1} f, set to 0 at cone vertices.
GridFunction delta_beta_apply(const ConicalBackground& bg, const GridFunction& f);

/// Throws NormalizationError unless u vanishes at every cone vertex.
void require_pinned(const ConicalBackground& bg, const GridFunction& u);

/// Curvature map u -> e^{-2u} (K_beta - Delta_beta u); 0 at cone vertices.
GridFunction curvature_map(const ConicalBackground& bg, const GridFunction& u);

struct GaussBonnetReport {
  double integral = 0.0;
  double target = 0.0;
  double residual = 0.0;
};

/// Quadrature of K e^{2u} rho^{2 beta} dA_{+1} with K = curvature_map(bg, u),
/// against 2 pi chi(S^2, beta).
GaussBonnetReport gauss_bonnet(const ConicalBackground& bg, const GridFunction& u);

/// curvature_map and gauss_bonnet without the pinning check, for diagnostic
/// factors that stay finite but do not vanish at the cone points.
GridFunction metric_curvature(const ConicalBackground& bg, const GridFunction& u);
GaussBonnetReport metric_gauss_bonnet(const ConicalBackground& bg, const GridFunction& u);

/// The weight field rho^gamma: rho^{gamma_i} on the cutoff ball of p_i, 1 elsewhere.
/// `shift` is added to every gamma_i. Cone vertices get 0 (gamma > 0) or inf.
GridFunction rho_power(const ConicalBackground& bg, const std::vector<double>& gamma, double shift = 0.0);

struct WeightedNorm {
  double c0 = 0.0;         ///< sup rho^{-gamma} |f|
  double c1 = 0.0;         ///< sup rho^{-gamma+1} |grad f| (order_k = 1 only)
  double seminorm = 0.0;   ///< [grad^k f]_{alpha, gamma - k} over adjacent pairs
  double total = 0.0;
};

/// Discrete weighted Hoelder norm ||f||_{k, alpha; gamma} for k in {0, 1}.
WeightedNorm weighted_norm(const ConicalBackground& bg, const GridFunction& f, const WeightSpec& spec);

/// Sum_v (Delta_beta f)(v) rho^{2 beta}(v) A_v, the weights cancelling to 1
/// at every vertex including the cone vertices.
double mean_laplacian_zero(const ConicalBackground& bg, const GridFunction& f);

/// Weighted inner product sum f g rho^{2 beta} A over all vertices.
double weighted_inner(const ConicalBackground& bg, const GridFunction& f, const GridFunction& g);

}  // namespace conesolve
