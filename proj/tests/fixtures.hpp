#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "conesolve/background.hpp"
#include "conesolve/divisor.hpp"
#include "conesolve/sphere_mesh.hpp"

namespace fixtures {

using namespace conesolve;

inline Divisor distinct() {
  return Divisor({ConePoint(Vec3(1, 0, 0), -0.3), ConePoint(Vec3(0, 1, 0), -0.4), ConePoint(Vec3(0, 0, 1), -0.5)});
}

inline Divisor equilateral(double beta = -0.3) {
  std::vector<ConePoint> pts;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0;
    pts.emplace_back(Vec3(std::cos(a), std::sin(a), 0.0), beta);
  }
  return Divisor(pts);
}

inline Divisor with_betas(double a, double b, double c) {
  return Divisor({ConePoint(Vec3(1, 0, 0), a), ConePoint(Vec3(0, 1, 0), b), ConePoint(Vec3(0, 0, 1), c)});
}

/// Smooth pinned factor s (c0 + c.x) prod_i (1 - x.p_i) / 2.
inline GridFunction pinned_smooth(const Divisor& d, const SphereMesh& mesh, const std::array<double, 4>& c,
                                  double s = 0.3) {
  GridFunction u = GridFunction::sample(mesh, [&](const Vec3& x) {
    double f = s * (c[0] + c[1] * x.x() + c[2] * x.y() + c[3] * x.z());
    for (const auto& p : d.points()) f *= 0.5 * (1.0 - x.dot(p.position()));
    return f;
  });
  for (int id : mesh.cone_vertex_ids()) u[std::size_t(id)] = 0.0;
  return u;
}

/// Random trigonometric field of unit sup-norm, zeroed at the cone vertices.
inline GridFunction random_pinned(const SphereMesh& mesh, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a = U(rng), b = U(rng), c = U(rng), ph = 3.0 * U(rng);
  GridFunction f = GridFunction::sample(mesh, [&](const Vec3& x) {
    return std::sin(2.0 * x.x() + a) * std::cos(1.5 * x.y() + b) + c * x.z() + 0.3 * std::sin(ph * x.z());
  });
  for (int id : mesh.cone_vertex_ids()) f[std::size_t(id)] = 0.0;
  const double m = f.values().cwiseAbs().maxCoeff();
  if (m > 0.0) f.values() /= m;
  return f;
}

}  // namespace fixtures
