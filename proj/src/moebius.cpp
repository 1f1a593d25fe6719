#include "conesolve/moebius.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "conesolve/errors.hpp"

namespace conesolve {

namespace {

using Mat2 = Eigen::Matrix2cd;
using Hom = Eigen::Vector2cd;

constexpr double kBetaMatch = 1e-12;

Mat2 matrix_of(const MoebiusMap& m) {
  Mat2 M;
  M << m.a, m.b, m.c, m.d;
  return M;
}

MoebiusMap map_of(Mat2 M, const Vec3& pole) {
  M /= std::sqrt(M.determinant());
  // fix the global sign: largest coefficient in the right half plane
  Eigen::Index r = 0, c = 0;
  M.cwiseAbs().maxCoeff(&r, &c);
  const Complex lead = M(r, c);
  if (lead.real() < 0.0 || (std::abs(lead.real()) < 1e-14 * std::abs(lead) && lead.imag() < 0.0)) M = -M;
  MoebiusMap out;
  out.a = M(0, 0);
  out.b = M(0, 1);
  out.c = M(1, 0);
  out.d = M(1, 1);
  out.pole = pole;
  return out;
}

// Homogeneous coordinates [w1 : w2] of p with z = w1 / w2 in the chart of `pole`.
Hom homogeneous(const Vec3& p, const Vec3& pole) {
  const auto [e1, e2] = chart_frame(pole);
  const double X = p.dot(e1), Y = p.dot(e2), Z = p.dot(pole);
  Hom h;
  if (Z < 0.0)
    h << Complex(X, Y), Complex(1.0 - Z, 0.0);
  else
    h << Complex(1.0 + Z, 0.0), Complex(X, -Y);
  return h / h.norm();
}

Vec3 from_homogeneous(const Hom& w, const Vec3& pole) {
  const auto [e1, e2] = chart_frame(pole);
  const Complex cross = w[0] * std::conj(w[1]);
  const double n1 = std::norm(w[0]), n2 = std::norm(w[1]);
  const double s = n1 + n2;
  const Vec3 p = (2.0 * cross.real() * e1 + 2.0 * cross.imag() * e2 + (n1 - n2) * pole) / s;
  return p.normalized();
}

// Sends P1, P2, P3 to 0, 1, infinity.
Mat2 normalizer(const Hom& P1, const Hom& P2, const Hom& P3) {
  const Complex u1 = P1[0], v1 = P1[1], u2 = P2[0], v2 = P2[1], u3 = P3[0], v3 = P3[1];
  const Complex s0 = u2 * v3 - u3 * v2, s1 = u2 * v1 - u1 * v2;
  Mat2 N;
  N << s0 * v1, -s0 * u1, s1 * v3, -s1 * u3;
  return N;
}

// T with T hom(q, from) ~ hom(q, to) for every point q.
Mat2 chart_transition(const Vec3& from, const Vec3& to) {
  const std::array<Vec3, 3> q = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  const Mat2 a = normalizer(homogeneous(q[0], from), homogeneous(q[1], from), homogeneous(q[2], from));
  const Mat2 b = normalizer(homogeneous(q[0], to), homogeneous(q[1], to), homogeneous(q[2], to));
  return b.inverse() * a;
}

double chordal(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

}  // namespace

Vec3 MoebiusMap::apply(const Vec3& p) const { return from_homogeneous(matrix_of(*this) * homogeneous(p, pole), pole); }

MoebiusMap MoebiusMap::compose(const MoebiusMap& inner) const {
  return map_of(matrix_of(*this) * matrix_of(inner.in_chart(pole)), pole);
}

MoebiusMap MoebiusMap::inverse() const {
  Mat2 M;
  M << d, -b, -c, a;
  return map_of(M, pole);
}

MoebiusMap MoebiusMap::in_chart(const Vec3& new_pole) const {
  if ((new_pole - pole).norm() == 0.0) return *this;
  const Mat2 T = chart_transition(pole, new_pole);
  return map_of(T * matrix_of(*this) * T.inverse(), new_pole);
}

MoebiusMap moebius_from_triples(const std::array<Vec3, 3>& src, const std::array<Vec3, 3>& dst) {
  for (const auto* tri : {&src, &dst})
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (chordal((*tri)[i], (*tri)[j]) <= 1e-12) throw DomainError("triple has coincident points");
  const Vec3 pole(0, 0, 1);
  const Mat2 ns = normalizer(homogeneous(src[0], pole), homogeneous(src[1], pole), homogeneous(src[2], pole));
  const Mat2 nd = normalizer(homogeneous(dst[0], pole), homogeneous(dst[1], pole), homogeneous(dst[2], pole));
  return map_of(nd.inverse() * ns, pole);
}

double conformal_distortion(const MoebiusMap& map, const Vec3& p) {
  const Hom w = homogeneous(p, map.pole);
  const Mat2 M = matrix_of(map) / std::sqrt(map.determinant());
  return 1.0 / (M * w).squaredNorm();
}

std::vector<Symmetry> enumerate_conformal_symmetries(const Divisor& divisor, double tol, std::array<int, 3> base) {
  const int n = int(divisor.size());
  if (n < 3) throw ScopeError("conformal symmetries are enumerated for n >= 3 cone points");
  for (int i = 0; i < 3; ++i) {
    if (base[i] < 0 || base[i] >= n) throw DomainError("base triple index out of range");
    for (int j = i + 1; j < 3; ++j)
      if (base[i] == base[j]) throw DomainError("base triple indices must be distinct");
  }
  auto same_beta = [&](int i, int j) { return std::abs(divisor[i].beta() - divisor[j].beta()) <= kBetaMatch; };
  const std::array<Vec3, 3> src = {divisor[base[0]].position(), divisor[base[1]].position(),
                                   divisor[base[2]].position()};

  // Image permutation of the marked set, empty if the map does not preserve it.
  auto induced = [&](const MoebiusMap& m) {
    std::vector<int> perm(std::size_t(n), -1);
    std::vector<bool> hit(std::size_t(n), false);
    for (int i = 0; i < n; ++i) {
      const Vec3 img = m.apply(divisor[i].position());
      for (int j = 0; j < n; ++j) {
        if (hit[std::size_t(j)] || !same_beta(i, j)) continue;
        if (chordal(img, divisor[j].position()) <= tol) {
          perm[std::size_t(i)] = j;
          hit[std::size_t(j)] = true;
          break;
        }
      }
      if (perm[std::size_t(i)] < 0) return std::vector<int>();
    }
    return perm;
  };

  std::vector<Symmetry> found;
  for (int qa = 0; qa < n; ++qa) {
    if (!same_beta(qa, base[0])) continue;
    for (int qb = 0; qb < n; ++qb) {
      if (qb == qa || !same_beta(qb, base[1])) continue;
      for (int qc = 0; qc < n; ++qc) {
        if (qc == qa || qc == qb || !same_beta(qc, base[2])) continue;
        const MoebiusMap m = moebius_from_triples(
            src, {divisor[qa].position(), divisor[qb].position(), divisor[qc].position()});
        auto perm = induced(m);
        if (perm.empty()) continue;
        const bool seen = std::any_of(found.begin(), found.end(),
                                      [&](const Symmetry& s) { return s.permutation == perm; });
        if (!seen) found.push_back({m, std::move(perm)});
      }
    }
  }
  std::sort(found.begin(), found.end(),
            [](const Symmetry& x, const Symmetry& y) { return x.permutation < y.permutation; });

  // group axioms on the point action
  auto lookup = [&](const std::vector<int>& perm) -> const Symmetry* {
    for (const auto& s : found)
      if (s.permutation == perm) return &s;
    return nullptr;
  };
  const std::array<Vec3, 6> probes = {Vec3(1, 0, 0),  Vec3(0, 1, 0),  Vec3(0, 0, 1),
                                      Vec3(-1, 0, 0), Vec3(0, -1, 0), Vec3(0, 0, -1)};
  auto agree = [&](const MoebiusMap& x, const MoebiusMap& y) {
    for (const auto& p : probes)
      if (chordal(x.apply(p), y.apply(p)) > std::max(tol, 1e-8)) return false;
    return true;
  };
  std::vector<int> identity(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) identity[std::size_t(i)] = i;
  if (found.empty() || found.front().permutation != identity) throw ClosureViolation("identity not recovered");
  for (const auto& x : found) {
    std::vector<int> inv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) inv[std::size_t(x.permutation[std::size_t(i)])] = i;
    const Symmetry* xi = lookup(inv);
    if (!xi || !agree(x.map.inverse(), xi->map)) throw ClosureViolation("set is not closed under inversion");
    for (const auto& y : found) {
      std::vector<int> comp(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) comp[std::size_t(i)] = x.permutation[std::size_t(y.permutation[std::size_t(i)])];
      const Symmetry* xy = lookup(comp);
      if (!xy || !agree(x.map.compose(y.map), xy->map)) {
        std::ostringstream os;
        os << "set of " << found.size() << " maps is not closed under composition";
        throw ClosureViolation(os.str());
      }
    }
  }
  return found;
}

}  // namespace conesolve
