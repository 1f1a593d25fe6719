#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "conesolve/divisor.hpp"

namespace conesolve {

using Triangle = std::array<int, 3>;
using Complex = std::complex<double>;

/// Closed triangulation of the unit sphere carrying the discrete round-metric
/// Laplace-Beltrami operator.
///
/// Sign convention used throughout the library: Delta = div grad, so the
/// discrete -Delta is positive semidefinite with the constants as kernel.
/// The operator is (Delta f)_i = (1 / A_i) sum_j w_ij (f_j - f_i), with
/// cotangent weights w_ij taken on the flat (chordal) triangles. Node areas
/// A_i split each spherical triangle area in the proportions of the mixed
/// Voronoi cells of its flat triangle, so that sum_i A_i = 4 pi up to rounding.
class SphereMesh {
 public:
  struct Edge {
    int a, b;
    double weight;
  };

  /// Assembles all derived data from raw geometry. Throws MeshError if the
  /// triangulation is not a closed sphere or has degenerate cells.
  SphereMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
             std::vector<int> cone_vertex_ids, std::vector<Vec3> cone_positions,
             int refinement_level, int grading_levels, double grading_radius);

  std::uint64_t id() const { return id_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const Vec3& vertex(int v) const { return vertices_[v]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::VectorXd& node_areas() const { return node_areas_; }
  const std::vector<double>& triangle_areas() const { return triangle_areas_; }

  /// Maps divisor index -> vertex index.
  const std::vector<int>& cone_vertex_ids() const { return cone_vertex_ids_; }
  const std::vector<Vec3>& cone_positions() const { return cone_positions_; }
  bool is_cone_vertex(int v) const { return cone_slot_[v] >= 0; }
  /// Divisor index of a cone vertex, -1 otherwise.
  int cone_index(int v) const { return cone_slot_[v]; }

  int refinement_level() const { return refinement_level_; }
  int grading_levels() const { return grading_levels_; }
  double grading_radius() const { return grading_radius_; }

  /// Symmetric stiffness S with (S f)_i = sum_j w_ij (f_j - f_i).
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }

  /// Neighbours of v in CSR layout.
  std::vector<int> neighbors(int v) const;
  const std::vector<int>& adjacency_offsets() const { return adj_offsets_; }
  const std::vector<int>& adjacency() const { return adj_; }
  const std::vector<std::vector<int>>& vertex_triangles() const { return vertex_tris_; }

  double max_edge_length() const { return max_edge_; }
  double min_edge_length() const { return min_edge_; }
  std::size_t num_edges() const { return edges_.size(); }

 private:
  std::uint64_t id_;
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<double> triangle_areas_;
  Eigen::VectorXd node_areas_;
  std::vector<int> cone_vertex_ids_;
  std::vector<Vec3> cone_positions_;
  std::vector<int> cone_slot_;
  std::vector<int> adj_offsets_;
  std::vector<int> adj_;
  std::vector<std::vector<int>> vertex_tris_;
  Eigen::SparseMatrix<double> stiffness_;
  int refinement_level_;
  int grading_levels_;
  double grading_radius_;
  double max_edge_ = 0.0;
  double min_edge_ = 0.0;
};

/// Icosahedral subdivision at `base_level`, cone points snapped onto
/// vertices, then conforming longest-edge bisection inside the balls of
/// radius grading_radius * 2^-l (l < grading_levels) around every cone point.
/// Throws MeshError if base_level < 2 or the cone neighbourhoods overlap.
std::shared_ptr<const SphereMesh> build_mesh(const Divisor& divisor, int base_level,
                                             int grading_levels, double grading_radius);

/// Scalar field sampled at the vertices of one mesh.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(const SphereMesh& mesh, double fill = 0.0);
  GridFunction(const SphereMesh& mesh, Eigen::VectorXd values);

  static GridFunction sample(const SphereMesh& mesh, const std::function<double(const Vec3&)>& f);

  std::uint64_t mesh_id() const { return mesh_id_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  /// Throws ShapeError unless this function lives on `mesh`.
  void require_mesh(const SphereMesh& mesh) const;

 private:
  std::uint64_t mesh_id_ = 0;
  Eigen::VectorXd values_;
};

GridFunction laplace_apply(const SphereMesh& mesh, const GridFunction& f);
double integrate(const SphereMesh& mesh, const GridFunction& f);

/// Stereographic coordinate of p seen from `pole` (the antipode of the pole
/// maps to 0). Charts for different poles are related by rotations, so the
/// transition maps are holomorphic. Throws DomainError if p == pole.
Complex stereo_project(const Vec3& p, const Vec3& pole);
Vec3 stereo_unproject(Complex z, const Vec3& pole);

/// Orthonormal frame (e1, e2) with e1 x e2 = pole used by the chart.
std::pair<Vec3, Vec3> chart_frame(const Vec3& pole);

/// Nearest-vertex queries on a fixed mesh (uniform bucket grid).
class NearestVertexLocator {
 public:
  explicit NearestVertexLocator(const SphereMesh& mesh);
  int nearest(const Vec3& p) const;

 private:
  int cell_of(double x) const;
  const SphereMesh* mesh_;
  int cells_;
  double cell_size_;
  std::vector<std::vector<int>> buckets_;
};

/// Values of f at the mesh vertices nearest to map(x_v) for every vertex v.
GridFunction sample_nearest(const SphereMesh& mesh, const GridFunction& f,
                            const std::function<Vec3(const Vec3&)>& map);

/// Median length of the edges whose midpoints lie in each grading annulus
/// [r_{l+1}, r_l) around one cone point, r_l = grading_radius * 2^-l; the
/// last entry covers the innermost ball [0, r_{L-1}).
std::vector<double> grading_ring_edge_lengths(const SphereMesh& mesh, std::size_t cone);

void write_off(const SphereMesh& mesh, std::ostream& os);
/// CSV with header x,y,z,value.
void write_csv(const SphereMesh& mesh, const GridFunction& f, std::ostream& os);
/// Reads a CSV written by write_csv; rows must match the mesh vertices in order.
GridFunction read_csv(const SphereMesh& mesh, std::istream& is);

}  // namespace conesolve
