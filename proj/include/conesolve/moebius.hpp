#pragma once

#include <array>
#include <vector>

#include "conesolve/divisor.hpp"
#include "conesolve/sphere_mesh.hpp"

namespace conesolve {

/// z -> (a z + b) / (c z + d) with ad - bc = 1, acting in the stereographic
/// chart of `pole` (see stereo_project). The action on the sphere does not
/// depend on the chart.
struct MoebiusMap {
  Complex a{1.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{1.0, 0.0};
  Vec3 pole{0.0, 0.0, 1.0};

  static MoebiusMap identity() { return {}; }

  Vec3 apply(const Vec3& p) const;
  /// (*this) o inner
  MoebiusMap compose(const MoebiusMap& inner) const;
  MoebiusMap inverse() const;
  /// The same point map written in the chart of another pole.
  MoebiusMap in_chart(const Vec3& new_pole) const;
  Complex determinant() const { return a * d - b * c; }
};

/// Orientation-preserving Moebius map with src[i] -> dst[i]. DomainError if
/// either triple has coincident points.
MoebiusMap moebius_from_triples(const std::array<Vec3, 3>& src, const std::array<Vec3, 3>& dst);

/// eta = |phi'(z)| (1 + |z|^2) / (1 + |phi(z)|^2), the round-metric stretch
/// factor of the map at p; phi^* g_{+1} = eta^2 g_{+1}.
double conformal_distortion(const MoebiusMap& map, const Vec3& p);

struct Symmetry {
  MoebiusMap map;
  /// permutation[i] = j when the map sends cone point i to cone point j.
  std::vector<int> permutation;
};

/// All orientation-preserving Moebius maps permuting the cone points with
/// matching exponents, sorted by permutation (identity first). Requires
/// n >= 3 (ScopeError). Throws ClosureViolation if the maps found do not
/// form a group at tolerance `tol`.
std::vector<Symmetry> enumerate_conformal_symmetries(const Divisor& divisor, double tol = 1e-9,
                                                     std::array<int, 3> base = {0, 1, 2});

}  // namespace conesolve
