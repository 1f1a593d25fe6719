#pragma once

#include <vector>

#include "conesolve/background.hpp"

namespace conesolve {

struct SpectralResult {
  std::vector<double> eigenvalues;          ///< ascending
  std::vector<GridFunction> eigenfunctions; ///< orthonormal in the weighted product
  bool weighted = false;
};

/// Smallest `count` eigenvalues of -Delta h = lambda e^{2u} rho^{2 beta} h on
/// the unpinned space, i.e. -Delta_g h = lambda h for g = e^{2u} g_beta
/// (u = 0 when omitted). Throws DomainError for count < 1, SpectralError if
/// the iteration does not converge.
SpectralResult spectrum(const ConicalBackground& bg, int count, const GridFunction* u = nullptr);

/// Smallest singular value of D_u pi on pinned functions, measured in the
/// L^2 norm of e^{2u} g_beta (in which the operator is self-adjoint).
double kernel_gap(const ConicalBackground& bg, const GridFunction& u);

/// ||Hess h + h g|| / ||h|| in L^2 of g = e^{2u} g_beta, with the Hessian
/// taken from quadratic fits over vertex 2-rings in normal coordinates.
/// 2-rings touching a cone vertex are skipped. Zero for h = 0.
double conformal_killing_residual(const ConicalBackground& bg, const GridFunction& h,
                                  const GridFunction* u = nullptr);

/// Divisor of the k-football: beta = 1/k - 1 at both poles (empty for k = 1).
Divisor football_divisor(int k);

/// Conformal factor u with e^{2u} g_beta the constant curvature football
/// S^2 / Z_k, relative to the background of football_divisor(k). With
/// t = |z|^2 in a polar chart,
///   u = -log k + (1/k) log(1 + t) - log(1 + t^{1/k}).
/// ShapeError unless the mesh carries exactly the football cone points.
GridFunction exact_football(int k, const SphereMesh& mesh);

/// Cone points at the vertices of the spherical triangle with angles
/// (alpha, beta2, gamma3), exponents theta / pi - 1: the double of the
/// triangle has cone angles 2 alpha, 2 beta2, 2 gamma3. First vertex at the
/// north pole, second on the prime meridian.
Divisor triangle_double_divisor(double alpha, double beta2, double gamma3);

}  // namespace conesolve
