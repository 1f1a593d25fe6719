#include "conesolve/divisor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "conesolve/errors.hpp"

namespace conesolve {

double geodesic_distance(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

ConePoint::ConePoint(const Vec3& position, double beta) : position_(position), beta_(beta) {
  if (!position.allFinite() || std::abs(position.norm() - 1.0) > 1e-12) {
    throw DomainError("cone point position must be a unit vector");
  }
  if (!(beta > -1.0) || !(beta <= 0.0)) {
    std::ostringstream os;
    os << "cone exponent " << beta << " outside (-1, 0]";
    throw DomainError(os.str());
  }
}

double ConePoint::angle() const { return cone_angle(beta_); }

Divisor::Divisor(std::vector<ConePoint> points) : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      if (geodesic_distance(points_[i].position(), points_[j].position()) <= 1e-12) {
        std::ostringstream os;
        os << "cone points " << i << " and " << j << " coincide";
        throw DomainError(os.str());
      }
    }
  }
}

std::vector<double> Divisor::betas() const {
  std::vector<double> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.beta());
  return out;
}

double Divisor::min_pairwise_distance() const {
  double best = std::numbers::pi;
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t j = i + 1; j < points_.size(); ++j)
      best = std::min(best, geodesic_distance(points_[i].position(), points_[j].position()));
  return best;
}

double cone_angle(double beta) {
  if (!(beta > -1.0)) throw DomainError("cone exponent must exceed -1");
  return 2.0 * std::numbers::pi * (beta + 1.0);
}

double euler_characteristic(const Divisor& divisor) {
  double chi = 2.0;
  for (const auto& p : divisor.points()) chi += p.beta();
  return chi;
}

TroyanovReport troyanov_check(const Divisor& divisor) {
  const std::size_t n = divisor.size();
  if (n < 3) throw ScopeError("Troyanov condition is evaluated for n >= 3 cone points");
  TroyanovReport report;
  report.pass = true;
  report.margins.reserve(n);
  for (const auto& p : divisor.points()) {
    double others = 0.0;
    for (const auto& q : divisor.points())
      if (&q != &p) others += q.beta();
    const double margin = p.beta() - others;
    report.margins.push_back(margin);
    if (!(margin > 0.0)) report.pass = false;
  }
  return report;
}

WeightReport weight_admissible(const WeightSpec& spec, const Divisor& divisor) {
  if (spec.gamma.size() != divisor.size()) {
    std::ostringstream os;
    os << "weight list has " << spec.gamma.size() << " entries, divisor has " << divisor.size();
    throw ShapeError(os.str());
  }
  WeightReport report;
  report.pass = true;
  for (double g : spec.gamma) {
    const bool positive = g > 0.0;
    double nearest = 0.0;
    double dist = std::abs(g);  // m = 0 is always in the set
    for (const auto& p : divisor.points()) {
      const double b = p.beta();
      if (b == 0.0) continue;
      // m / b closest to g: m near g * b; check both neighbours of the rounding.
      const double center = std::clamp(std::round(g * b), double(-kIndicialScanLimit),
                                       double(kIndicialScanLimit));
      for (double m : {center - 1.0, center, center + 1.0}) {
        if (std::abs(m) > kIndicialScanLimit) continue;
        const double value = m / b;
        const double d = std::abs(g - value);
        if (d < dist) {
          dist = d;
          nearest = value;
        }
      }
    }
    report.positive.push_back(positive);
    report.nearest_forbidden.push_back(nearest);
    report.distance.push_back(dist);
    if (!positive || !(dist > kIndicialTolerance)) report.pass = false;
  }
  return report;
}

const CheckItem* ScopeReport::find(const std::string& name) const {
  for (const auto& item : items)
    if (item.name == name) return &item;
  return nullptr;
}

ScopeReport solver_scope_check(const Divisor& divisor) {
  ScopeReport report;
  const std::size_t n = divisor.size();
  report.euler_characteristic = euler_characteristic(divisor);

  auto add = [&](std::string name, bool pass, std::string detail) {
    report.items.push_back({std::move(name), pass, std::move(detail)});
  };

  {
    std::ostringstream os;
    os << "n = " << n;
    add("min_points", n >= 3, os.str());
  }
  {
    bool ok = true;
    std::ostringstream os;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = divisor[i].beta();
      if (!(b > -1.0 && b < 0.0)) {
        ok = false;
        os << "beta[" << i << "] = " << b << " not in (-1, 0); ";
      }
    }
    add("beta_range", ok, os.str());
  }
  if (n >= 3) {
    const auto t = troyanov_check(divisor);
    std::ostringstream os;
    for (std::size_t j = 0; j < t.margins.size(); ++j)
      if (!(t.margins[j] > 0.0)) os << "margin[" << j << "] = " << t.margins[j] << "; ";
    add("troyanov", t.pass, os.str());
  } else {
    add("troyanov", false, "requires n >= 3");
  }
  {
    std::ostringstream os;
    os << "chi = " << report.euler_characteristic;
    add("positive_euler_characteristic", report.euler_characteristic > 0.0, os.str());
  }
  {
    const auto b = divisor.betas();
    bool found = false;
    for (std::size_t i = 0; i < n && !found; ++i)
      for (std::size_t j = i + 1; j < n && !found; ++j)
        for (std::size_t k = j + 1; k < n && !found; ++k)
          found = b[i] != b[j] && b[j] != b[k] && b[i] != b[k];
    add("distinct_triple", found, found ? "" : "no three pairwise-distinct exponents");
  }
  report.pass = std::all_of(report.items.begin(), report.items.end(),
                            [](const CheckItem& c) { return c.pass; });
  return report;
}

}  // namespace conesolve
