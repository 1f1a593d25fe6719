#include "conesolve/sphere_mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "conesolve/errors.hpp"

namespace conesolve {

namespace {

std::atomic<std::uint64_t> next_mesh_id{1};

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

// Area of the spherical triangle with unit-vector corners.
// Mixed Voronoi split of the flat triangle, as fractions of its area.
std::array<double, 3> voronoi_shares(const Vec3& a, const Vec3& b, const Vec3& c) {
  const std::array<Vec3, 3> p = {a, b, c};
  std::array<double, 3> cot{}, share{};
  for (int k = 0; k < 3; ++k) {
    const Vec3 u = p[(k + 1) % 3] - p[k], v = p[(k + 2) % 3] - p[k];
    cot[k] = u.dot(v) / u.cross(v).norm();
  }
  for (int k = 0; k < 3; ++k) {
    if (cot[k] < 0.0) {
      share = {0.25, 0.25, 0.25};
      share[k] = 0.5;
      return share;
    }
  }
  const double twice = (b - a).cross(c - a).norm();
  for (int k = 0; k < 3; ++k) {
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    // edges k-i (opposite j) and k-j (opposite i)
    share[k] = ((p[i] - p[k]).squaredNorm() * cot[j] + (p[j] - p[k]).squaredNorm() * cot[i]) / (4.0 * twice);
  }
  return share;
}

double spherical_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = std::abs(a.dot(b.cross(c)));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

struct Icosahedron {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

Icosahedron make_icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (auto& t : f) {
    if (v[t[0]].dot(v[t[1]].cross(v[t[2]])) < 0) std::swap(t[1], t[2]);
  }
  return {std::move(v), std::move(f)};
}

void subdivide(std::vector<Vec3>& verts, std::vector<Triangle>& tris) {
  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back((verts[a] + verts[b]).normalized());
    midpoint.emplace(key, id);
    return id;
  };
  std::vector<Triangle> out;
  out.reserve(tris.size() * 4);
  for (const auto& t : tris) {
    const int a = mid(t[0], t[1]);
    const int b = mid(t[1], t[2]);
    const int c = mid(t[2], t[0]);
    out.push_back({t[0], a, c});
    out.push_back({t[1], b, a});
    out.push_back({t[2], c, b});
    out.push_back({a, b, c});
  }
  tris = std::move(out);
}

bool positively_oriented(const std::vector<Vec3>& v, const Triangle& t) {
  return v[t[0]].dot(v[t[1]].cross(v[t[2]])) > 0.0;
}

// Conforming longest-edge (Rivara LEPP) bisection on a closed triangulation.
class Bisector {
 public:
  Bisector(std::vector<Vec3>& verts, std::vector<Triangle>& tris) : verts_(verts), tris_(tris) {
    alive_.assign(tris_.size(), 1);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) attach(t);
  }

  std::size_t size() const { return tris_.size(); }
  bool alive(int t) const { return alive_[t] != 0; }

  double longest_length(int t) const {
    const int e = longest_edge(t);
    const auto& tri = tris_[t];
    return (verts_[tri[e]] - verts_[tri[(e + 1) % 3]]).norm();
  }

  void refine(int t) {
    while (alive_[t]) {
      int cur = t;
      for (;;) {
        const int e = longest_edge(cur);
        const auto& tri = tris_[cur];
        const int a = tri[e], b = tri[(e + 1) % 3];
        const int nb = neighbor(cur, a, b);
        if (nb < 0) throw MeshError("open edge encountered during bisection");
        const auto& ntri = tris_[nb];
        const int ne = longest_edge(nb);
        if (edge_key(ntri[ne], ntri[(ne + 1) % 3]) == edge_key(a, b)) {
          bisect(cur, nb, a, b);
          break;
        }
        cur = nb;
      }
    }
  }

  std::vector<Triangle> live_triangles() const {
    std::vector<Triangle> out;
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (alive_[t]) out.push_back(tris_[t]);
    return out;
  }

 private:
  // Strict total order on edges: chord length, then key.
  bool longer(int a0, int b0, int a1, int b1) const {
    const double l0 = (verts_[a0] - verts_[b0]).squaredNorm();
    const double l1 = (verts_[a1] - verts_[b1]).squaredNorm();
    if (l0 != l1) return l0 > l1;
    return edge_key(a0, b0) > edge_key(a1, b1);
  }

  int longest_edge(int t) const {
    const auto& tri = tris_[t];
    int best = 0;
    for (int e = 1; e < 3; ++e)
      if (longer(tri[e], tri[(e + 1) % 3], tri[best], tri[(best + 1) % 3])) best = e;
    return best;
  }

  int neighbor(int t, int a, int b) const {
    const auto& slot = edges_.at(edge_key(a, b));
    return slot[0] == t ? slot[1] : slot[0];
  }

  void attach(int t) {
    const auto& tri = tris_[t];
    for (int e = 0; e < 3; ++e) {
      auto& slot = edges_.try_emplace(edge_key(tri[e], tri[(e + 1) % 3]), std::array<int, 2>{-1, -1})
                       .first->second;
      (slot[0] < 0 ? slot[0] : slot[1]) = t;
    }
  }

  void detach(int t) {
    const auto& tri = tris_[t];
    for (int e = 0; e < 3; ++e) {
      auto& slot = edges_.at(edge_key(tri[e], tri[(e + 1) % 3]));
      if (slot[0] == t) {
        slot[0] = slot[1];
        slot[1] = -1;
      } else if (slot[1] == t) {
        slot[1] = -1;
      }
    }
  }

  void split(int t, int a, int b, int m) {
    const auto tri = tris_[t];
    int e = 0;
    while (!((tri[e] == a && tri[(e + 1) % 3] == b) || (tri[e] == b && tri[(e + 1) % 3] == a))) ++e;
    const int p = tri[e], q = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
    detach(t);
    alive_[t] = 0;
    tris_.push_back({p, m, c});
    alive_.push_back(1);
    attach(static_cast<int>(tris_.size()) - 1);
    tris_.push_back({m, q, c});
    alive_.push_back(1);
    attach(static_cast<int>(tris_.size()) - 1);
  }

  void bisect(int t0, int t1, int a, int b) {
    const int m = static_cast<int>(verts_.size());
    verts_.push_back((verts_[a] + verts_[b]).normalized());
    split(t0, a, b, m);
    split(t1, a, b, m);
    edges_.erase(edge_key(a, b));
  }

  std::vector<Vec3>& verts_;
  std::vector<Triangle>& tris_;
  std::vector<char> alive_;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edges_;
};

double mean_edge_length(const std::vector<Vec3>& v, const std::vector<Triangle>& tris) {
  double sum = 0.0;
  for (const auto& t : tris)
    for (int e = 0; e < 3; ++e) sum += (v[t[e]] - v[t[(e + 1) % 3]]).norm();
  return sum / (3.0 * static_cast<double>(tris.size()));
}

std::vector<std::vector<int>> vertex_neighbors(std::size_t nv, const std::vector<Triangle>& tris) {
  std::vector<std::vector<int>> nb(nv);
  for (const auto& t : tris)
    for (int e = 0; e < 3; ++e) {
      nb[t[e]].push_back(t[(e + 1) % 3]);
      nb[t[e]].push_back(t[(e + 2) % 3]);
    }
  for (auto& list : nb) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nb;
}

// Moves the nearest vertex onto each cone point and relaxes its 2-ring.
std::vector<int> snap_cones(const Divisor& divisor, std::vector<Vec3>& verts,
                            const std::vector<Triangle>& tris) {
  const auto nb = vertex_neighbors(verts.size(), tris);
  std::vector<int> ids;
  std::vector<char> fixed(verts.size(), 0);
  for (const auto& cp : divisor.points()) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v = 0; v < static_cast<int>(verts.size()); ++v) {
      const double d = (verts[v] - cp.position()).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    if (fixed[best]) throw MeshError("two cone points snap to the same vertex; refine the base mesh");
    fixed[best] = 1;
    ids.push_back(best);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) verts[ids[i]] = divisor[i].position();

  std::vector<int> ring;
  std::vector<char> in_ring(verts.size(), 0);
  for (int c : ids) {
    for (int a : nb[c]) {
      if (!fixed[a] && !in_ring[a]) {
        in_ring[a] = 1;
        ring.push_back(a);
      }
      for (int b : nb[a])
        if (!fixed[b] && !in_ring[b]) {
          in_ring[b] = 1;
          ring.push_back(b);
        }
    }
  }
  std::sort(ring.begin(), ring.end());
  for (int iter = 0; iter < 10; ++iter) {
    std::vector<Vec3> next(ring.size());
    for (std::size_t k = 0; k < ring.size(); ++k) {
      Vec3 acc = Vec3::Zero();
      for (int a : nb[ring[k]]) acc += verts[a];
      next[k] = acc.normalized();
    }
    for (std::size_t k = 0; k < ring.size(); ++k) verts[ring[k]] = next[k];
  }
  for (const auto& t : tris)
    if (!positively_oriented(verts, t)) throw MeshError("cone snapping inverted a triangle");
  return ids;
}

}  // namespace

SphereMesh::SphereMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                       std::vector<int> cone_vertex_ids, std::vector<Vec3> cone_positions,
                       int refinement_level, int grading_levels, double grading_radius)
    : id_(next_mesh_id.fetch_add(1)),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      cone_vertex_ids_(std::move(cone_vertex_ids)),
      cone_positions_(std::move(cone_positions)),
      refinement_level_(refinement_level),
      grading_levels_(grading_levels),
      grading_radius_(grading_radius) {
  const auto nv = vertices_.size();
  cone_slot_.assign(nv, -1);
  for (std::size_t i = 0; i < cone_vertex_ids_.size(); ++i) cone_slot_[cone_vertex_ids_[i]] = int(i);

  // Edges in first-seen order; every edge must border exactly two triangles.
  std::unordered_map<std::uint64_t, int> edge_index;
  std::vector<int> edge_uses;
  std::vector<double> weights;
  vertex_tris_.assign(nv, {});
  triangle_areas_.resize(triangles_.size());
  node_areas_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    const Vec3& p0 = vertices_[tri[0]];
    const Vec3& p1 = vertices_[tri[1]];
    const Vec3& p2 = vertices_[tri[2]];
    if (!positively_oriented(vertices_, tri)) throw MeshError("inverted or degenerate triangle");
    const double area = spherical_area(p0, p1, p2);
    triangle_areas_[t] = area;
    const auto share = voronoi_shares(p0, p1, p2);
    for (int k = 0; k < 3; ++k) {
      node_areas_[tri[k]] += area * share[k];
      vertex_tris_[tri[k]].push_back(static_cast<int>(t));
    }
    for (int k = 0; k < 3; ++k) {
      const int i = tri[k], j = tri[(k + 1) % 3], o = tri[(k + 2) % 3];
      const Vec3 u = vertices_[i] - vertices_[o];
      const Vec3 v = vertices_[j] - vertices_[o];
      const double cot = u.dot(v) / u.cross(v).norm();
      const auto key = edge_key(i, j);
      auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(edges_.size()));
      if (inserted) {
        edges_.push_back({std::min(i, j), std::max(i, j), 0.0});
        edge_uses.push_back(0);
      }
      edges_[it->second].weight += 0.5 * cot;
      ++edge_uses[it->second];
    }
  }
  for (int uses : edge_uses)
    if (uses != 2) throw MeshError("triangulation is not closed");
  const long euler = long(nv) - long(edges_.size()) + long(triangles_.size());
  if (euler != 2) throw MeshError("Euler characteristic of the triangulation is not 2");
  for (Eigen::Index v = 0; v < node_areas_.size(); ++v)
    if (!(node_areas_[v] > 0.0)) throw MeshError("vertex without positive area");

  std::vector<std::vector<int>> nb(nv);
  max_edge_ = 0.0;
  min_edge_ = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * edges_.size());
  for (const auto& e : edges_) {
    nb[e.a].push_back(e.b);
    nb[e.b].push_back(e.a);
    const double len = (vertices_[e.a] - vertices_[e.b]).norm();
    max_edge_ = std::max(max_edge_, len);
    min_edge_ = std::min(min_edge_, len);
    trip.emplace_back(e.a, e.b, e.weight);
    trip.emplace_back(e.b, e.a, e.weight);
    trip.emplace_back(e.a, e.a, -e.weight);
    trip.emplace_back(e.b, e.b, -e.weight);
  }
  stiffness_.resize(long(nv), long(nv));
  stiffness_.setFromTriplets(trip.begin(), trip.end());
  stiffness_.makeCompressed();

  adj_offsets_.assign(nv + 1, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    std::sort(nb[v].begin(), nb[v].end());
    adj_offsets_[v + 1] = adj_offsets_[v] + static_cast<int>(nb[v].size());
  }
  adj_.reserve(adj_offsets_.back());
  for (const auto& list : nb) adj_.insert(adj_.end(), list.begin(), list.end());
}

std::vector<int> SphereMesh::neighbors(int v) const {
  return {adj_.begin() + adj_offsets_[v], adj_.begin() + adj_offsets_[v + 1]};
}

std::shared_ptr<const SphereMesh> build_mesh(const Divisor& divisor, int base_level,
                                             int grading_levels, double grading_radius) {
  if (base_level < 2) throw MeshError("base_level must be at least 2");
  if (grading_levels < 0) throw MeshError("grading_levels must be nonnegative");
  if (divisor.size() >= 2 && !(grading_radius < 0.5 * divisor.min_pairwise_distance()))
    throw MeshError("grading radius exceeds half the minimum cone separation");
  if (grading_levels > 0 && !divisor.empty() && !(grading_radius > 0.0))
    throw MeshError("grading radius must be positive");

  auto ico = make_icosahedron();
  std::vector<Vec3> verts = std::move(ico.vertices);
  std::vector<Triangle> tris = std::move(ico.triangles);
  for (int l = 0; l < base_level; ++l) subdivide(verts, tris);
  const double h_base = mean_edge_length(verts, tris);

  std::vector<int> cone_ids = snap_cones(divisor, verts, tris);

  if (!divisor.empty() && grading_levels > 0) {
    std::vector<Vec3> cones;
    for (const auto& cp : divisor.points()) cones.push_back(cp.position());
    Bisector bisector(verts, tris);
    for (int level = 0; level < grading_levels; ++level) {
      const double radius = grading_radius * std::ldexp(1.0, -level);
      const double target = h_base * std::ldexp(1.0, -(level + 1));
      auto near = [&](const Triangle& t) {
        const Vec3 centroid = (verts[t[0]] + verts[t[1]] + verts[t[2]]).normalized();
        for (const auto& c : cones) {
          double d = geodesic_distance(centroid, c);
          for (int k = 0; k < 3; ++k) d = std::min(d, geodesic_distance(verts[t[k]], c));
          if (d < radius) return true;
        }
        return false;
      };
      bool changed = true;
      while (changed) {
        changed = false;
        const int count = static_cast<int>(bisector.size());
        for (int t = 0; t < count; ++t) {
          if (!bisector.alive(t)) continue;
          if (bisector.longest_length(t) <= target) continue;
          if (!near(tris[t])) continue;
          bisector.refine(t);
          changed = true;
        }
      }
    }
    tris = bisector.live_triangles();
  }

  std::vector<Vec3> cone_positions;
  for (const auto& cp : divisor.points()) cone_positions.push_back(cp.position());
  return std::make_shared<const SphereMesh>(std::move(verts), std::move(tris), std::move(cone_ids),
                                            std::move(cone_positions), base_level, grading_levels,
                                            grading_radius);
}

GridFunction::GridFunction(const SphereMesh& mesh, double fill)
    : mesh_id_(mesh.id()),
      values_(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.num_vertices()), fill)) {}

GridFunction::GridFunction(const SphereMesh& mesh, Eigen::VectorXd values)
    : mesh_id_(mesh.id()), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(mesh.num_vertices()))
    throw ShapeError("value count does not match the mesh vertex count");
}

GridFunction GridFunction::sample(const SphereMesh& mesh,
                                  const std::function<double(const Vec3&)>& f) {
  GridFunction out(mesh);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) out[v] = f(mesh.vertex(int(v)));
  return out;
}

void GridFunction::require_mesh(const SphereMesh& mesh) const {
  if (mesh_id_ != mesh.id() || size() != mesh.num_vertices())
    throw ShapeError("grid function belongs to a different mesh");
}

GridFunction laplace_apply(const SphereMesh& mesh, const GridFunction& f) {
  f.require_mesh(mesh);
  // difference form sum_j w_ij (f_j - f_i): roundoff scales with the local variation of f
  const auto& S = mesh.stiffness();
  const Eigen::VectorXd& x = f.values();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(x.size());
  for (int col = 0; col < S.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(S, col); it; ++it)
      if (it.row() != col) s[it.row()] += it.value() * (x[col] - x[it.row()]);
  return GridFunction(mesh, s.cwiseQuotient(mesh.node_areas()));
}

double integrate(const SphereMesh& mesh, const GridFunction& f) {
  f.require_mesh(mesh);
  return f.values().dot(mesh.node_areas());
}

std::pair<Vec3, Vec3> chart_frame(const Vec3& pole) {
  const Vec3 n = pole.normalized();
  // Helper axis least aligned with the pole; for the north pole this gives (x, y).
  Vec3 helper = Vec3::UnitX();
  if (std::abs(n.x()) > 0.9) helper = Vec3::UnitY();
  Vec3 e1 = (helper - helper.dot(n) * n).normalized();
  Vec3 e2 = n.cross(e1);
  return {e1, e2};
}

Complex stereo_project(const Vec3& p, const Vec3& pole) {
  const double h = p.dot(pole);
  if ((p - pole).norm() <= 1e-15 || 1.0 - h <= 0.0) throw DomainError("point is the projection pole");
  const auto [e1, e2] = chart_frame(pole);
  return Complex(p.dot(e1), p.dot(e2)) / (1.0 - h);
}

Vec3 stereo_unproject(Complex z, const Vec3& pole) {
  const auto [e1, e2] = chart_frame(pole);
  const double r2 = std::norm(z);
  const double s = 1.0 / (1.0 + r2);
  return (2.0 * z.real() * s) * e1 + (2.0 * z.imag() * s) * e2 + ((r2 - 1.0) * s) * pole.normalized();
}

NearestVertexLocator::NearestVertexLocator(const SphereMesh& mesh) : mesh_(&mesh) {
  const double spacing = std::sqrt(4.0 * std::numbers::pi / double(mesh.num_vertices()));
  cells_ = std::clamp(static_cast<int>(std::ceil(2.0 / (2.0 * spacing))), 1, 256);
  cell_size_ = 2.0 / cells_;
  buckets_.assign(std::size_t(cells_) * cells_ * cells_, {});
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Vec3& p = mesh.vertex(int(v));
    const std::size_t idx = (std::size_t(cell_of(p.x())) * cells_ + cell_of(p.y())) * cells_ + cell_of(p.z());
    buckets_[idx].push_back(int(v));
  }
}

int NearestVertexLocator::cell_of(double x) const {
  return std::clamp(static_cast<int>(std::floor((x + 1.0) / cell_size_)), 0, cells_ - 1);
}

int NearestVertexLocator::nearest(const Vec3& p) const {
  const int cx = cell_of(p.x()), cy = cell_of(p.y()), cz = cell_of(p.z());
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int shell = 0; shell <= cells_; ++shell) {
    // Every point outside the searched cube is at least this far away.
    if (best >= 0 && double(shell - 1) * cell_size_ > std::sqrt(best_d)) break;
    for (int i = cx - shell; i <= cx + shell; ++i) {
      if (i < 0 || i >= cells_) continue;
      for (int j = cy - shell; j <= cy + shell; ++j) {
        if (j < 0 || j >= cells_) continue;
        for (int k = cz - shell; k <= cz + shell; ++k) {
          if (k < 0 || k >= cells_) continue;
          if (std::max({std::abs(i - cx), std::abs(j - cy), std::abs(k - cz)}) != shell) continue;
          for (int v : buckets_[(std::size_t(i) * cells_ + j) * cells_ + k]) {
            const double d = (mesh_->vertex(v) - p).squaredNorm();
            if (d < best_d || (d == best_d && v < best)) {
              best_d = d;
              best = v;
            }
          }
        }
      }
    }
  }
  return best;
}

GridFunction sample_nearest(const SphereMesh& mesh, const GridFunction& f,
                            const std::function<Vec3(const Vec3&)>& map) {
  f.require_mesh(mesh);
  NearestVertexLocator locator(mesh);
  GridFunction out(mesh);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    out[v] = f[std::size_t(locator.nearest(map(mesh.vertex(int(v)))))];
  return out;
}

std::vector<double> grading_ring_edge_lengths(const SphereMesh& mesh, std::size_t cone) {
  const int levels = mesh.grading_levels();
  std::vector<std::vector<double>> rings(std::size_t(std::max(levels, 0)));
  const Vec3& c = mesh.cone_positions().at(cone);
  for (const auto& e : mesh.edges()) {
    const Vec3 a = mesh.vertex(e.a), b = mesh.vertex(e.b);
    const double d = geodesic_distance((a + b).normalized(), c);
    for (int l = 0; l < levels; ++l) {
      const double outer = mesh.grading_radius() * std::ldexp(1.0, -l);
      const double inner = l + 1 < levels ? outer / 2.0 : 0.0;
      if (d < outer && d >= inner) rings[std::size_t(l)].push_back((a - b).norm());
    }
  }
  std::vector<double> out;
  for (auto& r : rings) {
    if (r.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    auto mid = r.begin() + std::ptrdiff_t(r.size() / 2);
    std::nth_element(r.begin(), mid, r.end());
    out.push_back(*mid);
  }
  return out;
}

void write_off(const SphereMesh& mesh, std::ostream& os) {
  os << "OFF\n" << mesh.num_vertices() << ' ' << mesh.triangles().size() << " 0\n";
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices()) os << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_csv(const SphereMesh& mesh, const GridFunction& f, std::ostream& os) {
  f.require_mesh(mesh);
  os << "x,y,z,value\n" << std::setprecision(17);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Vec3& p = mesh.vertex(int(v));
    os << p.x() << ',' << p.y() << ',' << p.z() << ',' << f[v] << '\n';
  }
}

GridFunction read_csv(const SphereMesh& mesh, std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,y,z,value", 0) != 0)
    throw ConfigError("CSV field file must start with the header x,y,z,value");
  GridFunction out(mesh);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    if (row >= mesh.num_vertices()) throw ConfigError("CSV field file has more rows than mesh vertices");
    std::array<double, 4> vals{};
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 4; ++k) {
      if (!std::getline(ss, cell, ',')) throw ConfigError("CSV row " + std::to_string(row + 2) + " has too few columns");
      try {
        vals[std::size_t(k)] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("CSV row " + std::to_string(row + 2) + " has a non-numeric value");
      }
    }
    if ((Vec3(vals[0], vals[1], vals[2]) - mesh.vertex(int(row))).norm() > 1e-9)
      throw ConfigError("CSV row " + std::to_string(row + 2) + " does not match mesh vertex position");
    out[row++] = vals[3];
  }
  if (row != mesh.num_vertices()) throw ConfigError("CSV field file has fewer rows than mesh vertices");
  return out;
}

}  // namespace conesolve
