#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <string>
#include <vector>

namespace conesolve {

using Vec3 = Eigen::Vector3d;

/// Great-circle distance between two unit vectors.
double geodesic_distance(const Vec3& a, const Vec3& b);

/// A marked point on the unit sphere with cone exponent beta; the cone
/// angle is 2*pi*(beta + 1).
class ConePoint {
 public:
  /// Throws DomainError unless |position| = 1 (1e-12) and -1 < beta <= 0.
  ConePoint(const Vec3& position, double beta);

  const Vec3& position() const { return position_; }
  double beta() const { return beta_; }
  double angle() const;

 private:
  Vec3 position_;
  double beta_;
};

/// Ordered list of cone points with pairwise distinct positions. May be
/// empty (smooth round sphere).
class Divisor {
 public:
  Divisor() = default;
  explicit Divisor(std::vector<ConePoint> points);

  const std::vector<ConePoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const ConePoint& operator[](std::size_t i) const { return points_[i]; }

  std::vector<double> betas() const;
  double min_pairwise_distance() const;

 private:
  std::vector<ConePoint> points_;
};

/// Weights gamma_i (one per cone point), Hoelder exponent and derivative order.
struct WeightSpec {
  std::vector<double> gamma;
  double holder_alpha = 0.5;
  int order_k = 0;
};

double cone_angle(double beta);

/// chi(S^2, beta) = 2 + sum beta_i.
double euler_characteristic(const Divisor& divisor);

struct TroyanovReport {
  bool pass = false;
  /// margin_j = beta_j - sum_{i != j} beta_i
  std::vector<double> margins;
};

/// Requires n >= 3 (ScopeError otherwise).
TroyanovReport troyanov_check(const Divisor& divisor);

struct WeightReport {
  bool pass = false;
  std::vector<bool> positive;
  /// Closest value m / beta_j to each gamma_i.
  std::vector<double> nearest_forbidden;
  std::vector<double> distance;
};

inline constexpr double kIndicialTolerance = 1e-9;
inline constexpr long kIndicialScanLimit = 1000000;

WeightReport weight_admissible(const WeightSpec& spec, const Divisor& divisor);

struct CheckItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScopeReport {
  bool pass = false;
  double euler_characteristic = 0.0;
  std::vector<CheckItem> items;

  const CheckItem* find(const std::string& name) const;
};

/// Itemized check of the solver's hypotheses: n >= 3, beta_i in (-1, 0),
/// Troyanov condition, chi > 0, three pairwise-distinct exponents.
ScopeReport solver_scope_check(const Divisor& divisor);

}  // namespace conesolve
