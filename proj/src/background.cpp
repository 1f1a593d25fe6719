#include "conesolve/background.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "conesolve/errors.hpp"

namespace conesolve {

namespace {

constexpr double kPinTolerance = 1e-12;

// Quintic smoothstep and its first two derivatives on [0, 1].
struct Smoothstep {
  double s, ds, dds;
};
Smoothstep smoothstep(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {t3 * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - 2.0 * t + t2),
          60.0 * t * (1.0 - 3.0 * t + 2.0 * t2)};
}

}  // namespace

RadialProfile local_blend_profile(double d, double cutoff_radius) {
  const double R = cutoff_radius;
  if (d >= R) return {0.0, 0.0};
  const double ell = std::log(std::tan(0.5 * d) / std::tan(0.5 * R));
  if (d <= 0.5 * R) return {ell, 0.0};  // log tan(d/2) is harmonic off the poles
  const double dell = 1.0 / std::sin(d);
  const double ddell = -std::cos(d) / (std::sin(d) * std::sin(d));
  const double scale = 2.0 / R;
  const auto [s, st, stt] = smoothstep((d - 0.5 * R) * scale);
  const double ds = st * scale, dds = stt * scale * scale;
  const double f = (1.0 - s) * ell;
  const double df = -ds * ell + (1.0 - s) * dell;
  const double ddf = -dds * ell - 2.0 * ds * dell + (1.0 - s) * ddell;
  return {f, ddf + df / std::tan(d)};
}

ConicalBackground build_background(const Divisor& divisor, std::shared_ptr<const SphereMesh> mesh,
                                   double cutoff_radius, RadiusModel model) {
  const SphereMesh& m = *mesh;
  const std::size_t n = divisor.size();
  if (m.cone_positions().size() != n) throw GeometryError("mesh was built from a different divisor");
  for (std::size_t i = 0; i < n; ++i)
    if ((m.cone_positions()[i] - divisor[i].position()).norm() > 1e-15 ||
        (m.vertex(m.cone_vertex_ids()[i]) - divisor[i].position()).norm() > 1e-15)
      throw GeometryError("mesh cone vertices do not match the divisor");
  if (n >= 2 && !(cutoff_radius < 0.5 * divisor.min_pairwise_distance()))
    throw GeometryError("cutoff balls around cone points overlap");
  if (n >= 1 && !(cutoff_radius > 0.0)) throw GeometryError("cutoff radius must be positive");

  ConicalBackground bg;
  bg.divisor_ = divisor;
  bg.mesh_ = mesh;
  bg.model_ = model;
  bg.cutoff_radius_ = cutoff_radius;

  const std::size_t nv = m.num_vertices();
  bg.rho_ = GridFunction(m, 1.0);
  bg.log_rho_ = GridFunction(m, 0.0);
  bg.log_rho_laplacian_ = GridFunction(m, 0.0);
  bg.m_beta_ = GridFunction(m, 1.0);
  bg.k_beta_ = GridFunction(m, 1.0);
  bg.mass_weight_ = GridFunction(m, 1.0);
  bg.inverse_weight_ = GridFunction(m, 1.0);
  bg.owner_.assign(nv, -1);

  for (std::size_t v = 0; v < nv; ++v) {
    const Vec3& x = m.vertex(int(v));
    for (std::size_t i = 0; i < n; ++i)
      if (geodesic_distance(x, divisor[i].position()) < cutoff_radius) bg.owner_[v] = int(i);

    if (m.is_cone_vertex(int(v))) {
      bg.rho_[v] = 0.0;
      bg.log_rho_[v] = -std::numeric_limits<double>::infinity();
      // regular part of m_beta, used by cone-cell equations
      double beta_lap = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double di = 0.0;
        if (model == RadiusModel::Global)
          di = -0.5;
        else if ((x - divisor[i].position()).norm() > 0.0)
          di = local_blend_profile(geodesic_distance(x, divisor[i].position()), cutoff_radius).laplacian;
        beta_lap += divisor[i].beta() * di;
      }
      bg.log_rho_laplacian_[v] = 0.0;
      bg.m_beta_[v] = 1.0 - beta_lap;
      bg.k_beta_[v] = 0.0;
      bg.mass_weight_[v] = 0.0;
      bg.inverse_weight_[v] = 0.0;
      continue;
    }
    double log_rho = 0.0, lap = 0.0, beta_log_rho = 0.0, beta_lap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double b = divisor[i].beta();
      double li = 0.0, di = 0.0;
      if (model == RadiusModel::Global) {
        li = std::log(0.5 * (x - divisor[i].position()).norm());
        di = -0.5;
      } else {
        const auto prof = local_blend_profile(geodesic_distance(x, divisor[i].position()), cutoff_radius);
        li = prof.log_rho;
        di = prof.laplacian;
      }
      log_rho += li;
      lap += di;
      beta_log_rho += b * li;
      beta_lap += b * di;
    }
    const double mb = 1.0 - beta_lap;
    const double pw = std::exp(2.0 * beta_log_rho);
    const double inv = 1.0 / pw;
    bg.rho_[v] = std::exp(log_rho);
    bg.log_rho_[v] = log_rho;
    bg.log_rho_laplacian_[v] = lap;
    bg.m_beta_[v] = mb;
    bg.mass_weight_[v] = pw;
    bg.inverse_weight_[v] = inv;
    bg.k_beta_[v] = inv * mb;
    if (!(bg.k_beta_[v] > 0.0)) {
      std::ostringstream os;
      os << "background curvature " << bg.k_beta_[v] << " at vertex " << v
         << " is not positive (1 - beta Delta log rho = " << mb << ")";
      throw BackgroundError(os.str());
    }
  }
  return bg;
}

double cone_cell_weight(const ConicalBackground& bg, std::size_t cone, double s) {
  const auto& div = bg.divisor();
  if (cone >= div.size()) throw DomainError("cone index out of range");
  const Vec3& p = div[cone].position();
  // rho ~ a d near p; the other factors are frozen at p
  double log_a = std::log(0.5), log_rest = 0.0;
  if (bg.model() == RadiusModel::LocalBlend) log_a -= std::log(std::tan(0.5 * bg.cutoff_radius()));
  for (std::size_t j = 0; j < div.size(); ++j) {
    if (j == cone) continue;
    const double lj = bg.model() == RadiusModel::Global
                          ? std::log(0.5 * (p - div[j].position()).norm())
                          : local_blend_profile(geodesic_distance(p, div[j].position()), bg.cutoff_radius()).log_rho;
    log_rest += 2.0 * s * div[j].beta() * lj;
  }
  const int v = bg.mesh().cone_vertex_ids()[cone];
  const double r = std::sqrt(bg.mesh().node_areas()[v] / std::numbers::pi);
  const double e = 2.0 * s * div[cone].beta();
  return std::exp(log_rest + e * (log_a + std::log(r))) * 2.0 / (e + 2.0);
}

GridFunction delta_beta_apply(const ConicalBackground& bg, const GridFunction& f) {
  GridFunction out = laplace_apply(bg.mesh(), f);
  out.values().array() *= bg.inverse_weight().values().array();
  return out;
}

void require_pinned(const ConicalBackground& bg, const GridFunction& u) {
  u.require_mesh(bg.mesh());
  for (std::size_t i = 0; i < bg.divisor().size(); ++i) {
    const int v = bg.mesh().cone_vertex_ids()[i];
    if (!(std::abs(u[std::size_t(v)]) <= kPinTolerance)) {
      std::ostringstream os;
      os << "conformal factor is " << u[std::size_t(v)] << " at cone vertex of point " << i
         << "; it must vanish there";
      throw NormalizationError(os.str());
    }
  }
}

GridFunction curvature_map(const ConicalBackground& bg, const GridFunction& u) {
  require_pinned(bg, u);
  return metric_curvature(bg, u);
}

GridFunction metric_curvature(const ConicalBackground& bg, const GridFunction& u) {
  u.require_mesh(bg.mesh());
  const GridFunction lap = delta_beta_apply(bg, u);
  GridFunction out(bg.mesh());
  for (std::size_t v = 0; v < out.size(); ++v)
    out[v] = std::exp(-2.0 * u[v]) * (bg.k_beta()[v] - lap[v]);
  return out;
}

GaussBonnetReport gauss_bonnet(const ConicalBackground& bg, const GridFunction& u) {
  require_pinned(bg, u);
  return metric_gauss_bonnet(bg, u);
}

GaussBonnetReport metric_gauss_bonnet(const ConicalBackground& bg, const GridFunction& u) {
  const GridFunction k = metric_curvature(bg, u);
  const auto& area = bg.mesh().node_areas();
  GaussBonnetReport r;
  for (std::size_t v = 0; v < k.size(); ++v) {
    if (bg.is_cone_vertex(int(v))) continue;
    r.integral += k[v] * std::exp(2.0 * u[v]) * bg.mass_weight()[v] * area[Eigen::Index(v)];
  }
  r.target = 2.0 * std::numbers::pi * euler_characteristic(bg.divisor());
  r.residual = std::abs(r.integral - r.target) / std::abs(r.target);
  return r;
}

GridFunction rho_power(const ConicalBackground& bg, const std::vector<double>& gamma, double shift) {
  if (gamma.size() != bg.divisor().size()) throw ShapeError("one weight per cone point is required");
  GridFunction out(bg.mesh(), 1.0);
  for (std::size_t v = 0; v < out.size(); ++v) {
    const int owner = bg.owner(int(v));
    if (owner < 0) continue;
    const double e = gamma[std::size_t(owner)] + shift;
    out[v] = bg.is_cone_vertex(int(v)) ? (e > 0 ? 0.0 : (e < 0 ? std::numeric_limits<double>::infinity() : 1.0))
                                       : std::exp(e * bg.log_rho()[v]);
  }
  return out;
}

namespace {

// Gradient of the linear interpolant on each flat triangle.
std::vector<Vec3> triangle_gradients(const SphereMesh& mesh, const GridFunction& f) {
  std::vector<Vec3> out;
  out.reserve(mesh.triangles().size());
  for (const auto& t : mesh.triangles()) {
    const Vec3& a = mesh.vertex(t[0]);
    const Vec3& b = mesh.vertex(t[1]);
    const Vec3& c = mesh.vertex(t[2]);
    const Vec3 n2 = (b - a).cross(c - a);  // normal scaled by twice the area
    const double twice_area = n2.norm();
    const Vec3 n = n2 / twice_area;
    const Vec3 g = f[std::size_t(t[0])] * n.cross(c - b) + f[std::size_t(t[1])] * n.cross(a - c) +
                   f[std::size_t(t[2])] * n.cross(b - a);
    out.push_back(g / twice_area);
  }
  return out;
}

}  // namespace

WeightedNorm weighted_norm(const ConicalBackground& bg, const GridFunction& f, const WeightSpec& spec) {
  f.require_mesh(bg.mesh());
  if (spec.order_k < 0 || spec.order_k > 1) throw ScopeError("weighted norms are assembled for k in {0, 1}");
  if (!(spec.holder_alpha > 0.0 && spec.holder_alpha < 1.0)) throw DomainError("Hoelder exponent must lie in (0, 1)");
  const auto adm = weight_admissible(spec, bg.divisor());
  if (!adm.pass) throw ScopeError("weights are not admissible for this divisor");

  const SphereMesh& mesh = bg.mesh();
  const std::size_t nv = mesh.num_vertices();
  const int k = spec.order_k;
  const GridFunction w0 = rho_power(bg, spec.gamma, 0.0);

  WeightedNorm out;
  for (std::size_t v = 0; v < nv; ++v) {
    if (bg.is_cone_vertex(int(v))) continue;
    out.c0 = std::max(out.c0, std::abs(f[v]) / w0[v]);
  }

  // Vertex gradients: max magnitude over incident triangles, plus the area-weighted mean vector.
  std::vector<Vec3> grad_mean(nv, Vec3::Zero());
  std::vector<double> grad_max(nv, 0.0);
  if (k == 1) {
    const auto tg = triangle_gradients(mesh, f);
    for (std::size_t v = 0; v < nv; ++v) {
      double area = 0.0;
      for (int t : mesh.vertex_triangles()[v]) {
        const double a = mesh.triangle_areas()[std::size_t(t)];
        grad_mean[v] += a * tg[std::size_t(t)];
        area += a;
        grad_max[v] = std::max(grad_max[v], tg[std::size_t(t)].norm());
      }
      grad_mean[v] /= area;
    }
    const GridFunction w1 = rho_power(bg, spec.gamma, -1.0);
    for (std::size_t v = 0; v < nv; ++v) {
      if (bg.is_cone_vertex(int(v))) continue;
      out.c1 = std::max(out.c1, grad_max[v] / w1[v]);
    }
  }

  // [grad^k f]_{alpha, gamma - k}: min(rho(x)^{-(gamma-k)}, rho(y)^{-(gamma-k)}) |D^k f(x) - D^k f(y)| / d^alpha.
  const GridFunction wk = rho_power(bg, spec.gamma, -double(k));
  for (const auto& e : mesh.edges()) {
    if (bg.is_cone_vertex(e.a) || bg.is_cone_vertex(e.b)) continue;
    const double d = geodesic_distance(mesh.vertex(e.a), mesh.vertex(e.b));
    const double diff = k == 0 ? std::abs(f[std::size_t(e.a)] - f[std::size_t(e.b)])
                               : (grad_mean[std::size_t(e.a)] - grad_mean[std::size_t(e.b)]).norm();
    const double weight = std::min(1.0 / wk[std::size_t(e.a)], 1.0 / wk[std::size_t(e.b)]);
    out.seminorm = std::max(out.seminorm, weight * diff / std::pow(d, spec.holder_alpha));
  }
  out.total = out.c0 + out.c1 + out.seminorm;
  return out;
}

double mean_laplacian_zero(const ConicalBackground& bg, const GridFunction& f) {
  const GridFunction lap_beta = delta_beta_apply(bg, f);
  const GridFunction lap = laplace_apply(bg.mesh(), f);
  const auto& area = bg.mesh().node_areas();
  double sum = 0.0;
  for (std::size_t v = 0; v < f.size(); ++v) {
    const double a = area[Eigen::Index(v)];
    // rho^{-2 beta} rho^{2 beta} = 1 in the limit at a cone vertex
    sum += bg.is_cone_vertex(int(v)) ? lap[v] * a : lap_beta[v] * bg.mass_weight()[v] * a;
  }
  return sum;
}

double weighted_inner(const ConicalBackground& bg, const GridFunction& f, const GridFunction& g) {
  f.require_mesh(bg.mesh());
  g.require_mesh(bg.mesh());
  return (f.values().array() * g.values().array() * bg.mass_weight().values().array() *
          bg.mesh().node_areas().array())
      .sum();
}

}  // namespace conesolve
