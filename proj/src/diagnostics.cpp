#include "conesolve/diagnostics.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "conesolve/errors.hpp"
#include "conesolve/solver.hpp"

namespace conesolve {

namespace {

constexpr unsigned kSeed = 20240611u;
constexpr int kMaxSweeps = 600;

Eigen::MatrixXd random_block(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937 gen(kSeed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) X(i, j) = dist(gen);
  return X;
}

// Columns of Y made orthonormal in the (diagonal) inner product w; drops nothing,
// so Y must have full rank.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& Y, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd G = Y.transpose() * w.asDiagonal() * Y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-14 * ev.maxCoeff())) throw SpectralError("iteration subspace lost rank");
  return Y * es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal();
}

}  // namespace

SpectralResult spectrum(const ConicalBackground& bg, int count, const GridFunction* u) {
  if (count < 1) throw DomainError("eigenvalue count must be at least 1");
  const SphereMesh& mesh = bg.mesh();
  const Eigen::Index nv = Eigen::Index(mesh.num_vertices());
  if (count > nv) throw DomainError("more eigenvalues requested than vertices");
  if (u) u->require_mesh(mesh);

  Eigen::VectorXd mass(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const double conformal = u ? std::exp(2.0 * (*u)[std::size_t(v)]) : 1.0;
    mass[v] = mesh.node_areas()[v] * bg.mass_weight()[std::size_t(v)] * conformal;
  }

  // (-S + sigma M) is positive definite: -S is semidefinite with the constants as kernel.
  const double sigma = 0.1;
  const Eigen::SparseMatrix<double> K = -mesh.stiffness();
  Eigen::SparseMatrix<double> B = K;
  for (Eigen::Index v = 0; v < nv; ++v) B.coeffRef(v, v) += sigma * mass[v];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(B);
  if (ldlt.info() != Eigen::Success) throw SpectralError("shifted stiffness is not factorizable");

  const Eigen::Index block = std::min<Eigen::Index>(nv, count + 8);
  Eigen::MatrixXd X = orthonormalize(random_block(nv, block), mass);
  Eigen::VectorXd previous = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::infinity());
  Eigen::VectorXd ritz;
  Eigen::MatrixXd vectors;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    const Eigen::MatrixXd Y = orthonormalize(ldlt.solve(mass.asDiagonal() * X), mass);
    const Eigen::MatrixXd Kp = Y.transpose() * (K * Y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Kp + Kp.transpose()));
    ritz = es.eigenvalues();
    X = Y * es.eigenvectors();
    const Eigen::VectorXd head = ritz.head(count);
    const double change = (head - previous).cwiseAbs().maxCoeff();
    converged = change <= 1e-11 * std::max(1.0, head.cwiseAbs().maxCoeff());
    previous = head;
  }
  if (!converged) throw SpectralError("subspace iteration did not converge");

  SpectralResult out;
  out.weighted = !bg.divisor().empty() || u != nullptr;
  for (int i = 0; i < count; ++i) {
    out.eigenvalues.push_back(ritz[i]);
    Eigen::VectorXd col = X.col(i);
    Eigen::Index arg;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0) col = -col;
    out.eigenfunctions.emplace_back(mesh, col);
  }
  return out;
}

double kernel_gap(const ConicalBackground& bg, const GridFunction& u) {
  const LinearizedOperator op = linearize(bg, u);
  const SphereMesh& mesh = bg.mesh();
  const auto& free = op.free_vertices();
  const Eigen::Index dim = Eigen::Index(free.size());

  // W D_u pi is symmetric for W = A rho^{2 beta} e^{2u}.
  Eigen::VectorXd w(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const std::size_t v = std::size_t(free[std::size_t(i)]);
    w[i] = mesh.node_areas()[Eigen::Index(v)] * bg.mass_weight()[v] * std::exp(2.0 * u[v]);
  }
  Eigen::SparseMatrix<double> J(dim, dim);
  {
    std::vector<Eigen::Triplet<double>> trip;
    const auto& S = mesh.stiffness();
    const auto& index = op.free_index();
    for (int col = 0; col < S.outerSize(); ++col) {
      const int c = index[std::size_t(col)];
      if (c < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(S, col); it; ++it) {
        const int r = index[std::size_t(it.row())];
        if (r >= 0) trip.emplace_back(r, c, -it.value());
      }
    }
    for (Eigen::Index i = 0; i < dim; ++i)
      trip.emplace_back(int(i), int(i), w[i] * op.diagonal()[std::size_t(free[std::size_t(i)])]);
    J.setFromTriplets(trip.begin(), trip.end());
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) return 0.0;

  // Block inverse iteration; the singular values of a self-adjoint operator are |mu|.
  const Eigen::Index block = std::min<Eigen::Index>(dim, 6);
  Eigen::MatrixXd X = orthonormalize(random_block(dim, block), w);
  double previous = std::numeric_limits<double>::infinity(), gap = previous;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const Eigen::MatrixXd Y = orthonormalize(lu.solve(w.asDiagonal() * X), w);
    if (!Y.allFinite()) return 0.0;
    const Eigen::MatrixXd Jp = Y.transpose() * (J * Y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Jp + Jp.transpose()));
    X = Y * es.eigenvectors();
    gap = es.eigenvalues().cwiseAbs().minCoeff();
    if (std::abs(gap - previous) <= 1e-11 * std::max(gap, 1e-300)) return gap;
    previous = gap;
  }
  throw SpectralError("inverse iteration for the smallest singular value did not converge");
}

double conformal_killing_residual(const ConicalBackground& bg, const GridFunction& h, const GridFunction* u) {
  const SphereMesh& mesh = bg.mesh();
  h.require_mesh(mesh);
  if (u) u->require_mesh(mesh);
  const std::size_t nv = mesh.num_vertices();
  if (h.values().cwiseAbs().maxCoeff() == 0.0) return 0.0;

  // phi with g = e^{2 phi} g_{+1}
  std::vector<double> phi(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (bg.is_cone_vertex(int(v))) continue;
    phi[v] = 0.5 * std::log(bg.mass_weight()[v]) + (u ? (*u)[v] : 0.0);
  }

  std::vector<int> mark(nv, -1), ring;
  double num = 0.0, den = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    ring.clear();
    mark[v] = int(v);
    bool touches_cone = bg.is_cone_vertex(int(v));
    for (int a : mesh.neighbors(int(v))) {
      if (mark[std::size_t(a)] != int(v)) {
        mark[std::size_t(a)] = int(v);
        ring.push_back(a);
      }
      for (int b : mesh.neighbors(a)) {
        if (mark[std::size_t(b)] == int(v)) continue;
        mark[std::size_t(b)] = int(v);
        ring.push_back(b);
      }
    }
    for (int r : ring) touches_cone = touches_cone || bg.is_cone_vertex(r);
    if (touches_cone) continue;

    const Vec3& x = mesh.vertex(int(v));
    const auto [e1, e2] = chart_frame(x);
    const Eigen::Index rows = Eigen::Index(ring.size()) + 1;
    Eigen::MatrixXd D(rows, 6);
    Eigen::MatrixXd rhs(rows, 2);
    D.row(0) << 1, 0, 0, 0, 0, 0;
    rhs.row(0) << h[v], phi[v];
    for (std::size_t r = 0; r < ring.size(); ++r) {
      const Vec3& y = mesh.vertex(ring[r]);
      const Vec3 tangent = y - y.dot(x) * x;
      const double d = geodesic_distance(x, y);
      const double s = d * tangent.dot(e1) / tangent.norm();
      const double t = d * tangent.dot(e2) / tangent.norm();
      D.row(Eigen::Index(r) + 1) << 1, s, t, s * s, s * t, t * t;
      rhs.row(Eigen::Index(r) + 1) << h[std::size_t(ring[r])], phi[std::size_t(ring[r])];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    if (qr.rank() < 6) {
      std::ostringstream os;
      os << "quadratic fit over the 2-ring of vertex " << v << " is rank deficient";
      throw GeometryError(os.str());
    }
    const Eigen::MatrixXd c = qr.solve(rhs);
    Eigen::Matrix2d hess;
    hess << 2 * c(3, 0), c(4, 0), c(4, 0), 2 * c(5, 0);
    const Eigen::Vector2d dh(c(1, 0), c(2, 0)), dphi(c(1, 1), c(2, 1));
    // Hessian of the conformal metric e^{2 phi} g_{+1}, plus h times that metric
    const double e2phi = std::exp(2.0 * phi[v]);
    const Eigen::Matrix2d T = hess - dphi * dh.transpose() - dh * dphi.transpose() +
                              (dphi.dot(dh) + h[v] * e2phi) * Eigen::Matrix2d::Identity();
    const double a = mesh.node_areas()[Eigen::Index(v)];
    num += a * T.squaredNorm() / e2phi;
    den += a * e2phi * h[v] * h[v];
  }
  if (den == 0.0) return 0.0;
  return std::sqrt(num / den);
}

Divisor football_divisor(int k) {
  if (k < 1) throw DomainError("football order k must be at least 1");
  if (k == 1) return Divisor();
  const double beta = 1.0 / k - 1.0;
  return Divisor({ConePoint(Vec3(0, 0, 1), beta), ConePoint(Vec3(0, 0, -1), beta)});
}

GridFunction exact_football(int k, const SphereMesh& mesh) {
  const Divisor d = football_divisor(k);
  if (mesh.cone_positions().size() != d.size()) throw ShapeError("mesh was not built from the football divisor");
  for (std::size_t i = 0; i < d.size(); ++i)
    if ((mesh.cone_positions()[i] - d[i].position()).norm() > 1e-15)
      throw ShapeError("mesh was not built from the football divisor");
  if (k == 1) return GridFunction(mesh, 0.0);
  const double inv_k = 1.0 / k;
  return GridFunction::sample(mesh, [&](const Vec3& x) {
    const double z = std::min(1.0, std::abs(x.z()));
    const double t = (1.0 - z) / (1.0 + z);  // |w|^2 in the chart centred at the nearer pole
    return -std::log(double(k)) + inv_k * std::log1p(t) - std::log1p(std::pow(t, inv_k));
  });
}

Divisor triangle_double_divisor(double alpha, double beta2, double gamma3) {
  const double pi = std::numbers::pi;
  for (double a : {alpha, beta2, gamma3})
    if (!(a > 0.0 && a < pi)) throw DomainError("triangle angles must lie in (0, pi)");
  if (!(alpha + beta2 + gamma3 > pi)) throw DomainError("angles of a spherical triangle sum to more than pi");
  if (!(beta2 + gamma3 - alpha < pi && alpha + gamma3 - beta2 < pi && alpha + beta2 - gamma3 < pi))
    throw DomainError("no spherical triangle has these angles");

  auto side = [](double A, double B, double C) {
    return std::acos(std::clamp((std::cos(A) + std::cos(B) * std::cos(C)) / (std::sin(B) * std::sin(C)), -1.0, 1.0));
  };
  const double b = side(beta2, alpha, gamma3);
  const double c = side(gamma3, alpha, beta2);
  const Vec3 p1(0, 0, 1);
  const Vec3 p2 = Vec3(std::sin(c), 0, std::cos(c)).normalized();
  const Vec3 p3 = Vec3(std::sin(b) * std::cos(alpha), std::sin(b) * std::sin(alpha), std::cos(b)).normalized();
  return Divisor({ConePoint(p1, alpha / pi - 1.0), ConePoint(p2, beta2 / pi - 1.0), ConePoint(p3, gamma3 / pi - 1.0)});
}

}  // namespace conesolve
