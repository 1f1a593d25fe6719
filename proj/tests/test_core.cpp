#include <doctest.h>

#include <sstream>

#include "conesolve/background.hpp"
#include "conesolve/errors.hpp"
#include "fixtures.hpp"

using namespace conesolve;
using fixtures::distinct;
using fixtures::with_betas;
using doctest::Approx;
constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------- divisor

TEST_CASE("cone angle formula and domain") {
  CHECK(cone_angle(-0.5) == Approx(kPi).epsilon(1e-15));
  CHECK(cone_angle(1.0 / 3.0 - 1.0) == Approx(2.0 * kPi / 3.0).epsilon(1e-14));
  CHECK(cone_angle(0.0) == 2.0 * kPi);
  CHECK_THROWS_AS(cone_angle(-1.0), DomainError);
  double prev = cone_angle(-0.99);
  for (double b = -0.98; b <= 0.0; b += 0.01) {
    CHECK(cone_angle(b) > prev);
    prev = cone_angle(b);
  }
}

TEST_CASE("cone points reject bad positions and exponents") {
  CHECK_THROWS_AS(ConePoint(Vec3(1, 1, 0), -0.3), DomainError);
  CHECK_THROWS_AS(ConePoint(Vec3(1, 0, 0), -1.0), DomainError);
  CHECK_THROWS_AS(ConePoint(Vec3(1, 0, 0), 0.2), DomainError);
  CHECK_NOTHROW(ConePoint(Vec3(0, 0, 1), 0.0));
  CHECK_THROWS_AS(Divisor({ConePoint(Vec3(1, 0, 0), -0.3), ConePoint(Vec3(1, 0, 0), -0.4)}), DomainError);
}

TEST_CASE("euler characteristic") {
  CHECK(euler_characteristic(Divisor()) == 2.0);
  CHECK(euler_characteristic(with_betas(-0.5, -0.5, -0.5)) == Approx(0.5).epsilon(1e-15));
  const Divisor football({ConePoint(Vec3(0, 0, 1), -0.5), ConePoint(Vec3(0, 0, -1), -0.5)});
  CHECK(euler_characteristic(football) == Approx(1.0).epsilon(1e-15));
  CHECK(euler_characteristic(distinct()) == Approx(0.8).epsilon(1e-15));

  SUBCASE("appending a point adds its exponent") {
    std::vector<ConePoint> pts = distinct().points();
    const double before = euler_characteristic(Divisor(pts));
    pts.emplace_back(Vec3(0, 0, -1), -0.25);
    CHECK(euler_characteristic(Divisor(pts)) - before == Approx(-0.25).epsilon(1e-15));
  }
}

TEST_CASE("troyanov margins") {
  const auto ok = troyanov_check(distinct());
  CHECK(ok.pass);
  REQUIRE(ok.margins.size() == 3);
  CHECK(ok.margins[0] == Approx(0.6).epsilon(1e-12));
  CHECK(ok.margins[1] == Approx(0.4).epsilon(1e-12));
  CHECK(ok.margins[2] == Approx(0.2).epsilon(1e-12));

  const auto bad = troyanov_check(with_betas(-0.9, -0.1, -0.1));
  CHECK_FALSE(bad.pass);
  CHECK(bad.margins[0] == Approx(-0.7).epsilon(1e-12));
  CHECK(bad.margins[1] > 0.0);

  const auto eq = troyanov_check(with_betas(-0.5, -0.5, -0.5));
  CHECK(eq.pass);
  for (double m : eq.margins) CHECK(m == Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(troyanov_check(Divisor({ConePoint(Vec3(1, 0, 0), -0.3), ConePoint(Vec3(0, 1, 0), -0.4)})),
                  ScopeError);

  SUBCASE("permuting the points permutes the margins") {
    const auto p = troyanov_check(with_betas(-0.5, -0.3, -0.4));
    CHECK(p.margins[0] == Approx(ok.margins[2]).epsilon(1e-14));
    CHECK(p.margins[1] == Approx(ok.margins[0]).epsilon(1e-14));
    CHECK(p.margins[2] == Approx(ok.margins[1]).epsilon(1e-14));
  }
}

TEST_CASE("weight admissibility") {
  const Divisor half = with_betas(-0.5, -0.5, -0.5);
  WeightSpec w;
  w.gamma = {0.5, 0.5, 0.5};
  CHECK(weight_admissible(w, half).pass);

  w.gamma = {2.0, 0.5, 0.5};
  const auto r = weight_admissible(w, half);
  CHECK_FALSE(r.pass);
  CHECK(r.nearest_forbidden[0] == Approx(2.0));
  CHECK(r.distance[0] <= 1e-9);

  w.gamma = {-0.5, 0.5, 0.5};
  const auto neg = weight_admissible(w, half);
  CHECK_FALSE(neg.pass);
  CHECK_FALSE(neg.positive[0]);

  w.gamma = {0.5, 0.5};
  CHECK_THROWS_AS(weight_admissible(w, half), ShapeError);

  SUBCASE("indicial values of other exponents are found too") {
    w.gamma = {0.5, 10.0 / 3.0, 0.5};  // -1 / -0.3 = 10/3
    const auto x = weight_admissible(w, distinct());
    CHECK_FALSE(x.pass);
    CHECK(x.nearest_forbidden[1] == Approx(10.0 / 3.0));
  }
}

TEST_CASE("solver scope report") {
  const auto good = solver_scope_check(distinct());
  CHECK(good.pass);
  CHECK(good.euler_characteristic == Approx(0.8));
  for (const auto& it : good.items) CHECK(it.pass);

  const auto eq = solver_scope_check(with_betas(-0.5, -0.5, -0.5));
  CHECK_FALSE(eq.pass);
  for (const auto& it : eq.items) CHECK(it.pass == (it.name != "distinct_triple"));

  const auto two = solver_scope_check(Divisor({ConePoint(Vec3(1, 0, 0), -0.3), ConePoint(Vec3(0, 1, 0), -0.4)}));
  CHECK_FALSE(two.pass);
  REQUIRE(two.find("min_points"));
  CHECK_FALSE(two.find("min_points")->pass);

  const auto smooth = solver_scope_check(with_betas(-0.3, -0.4, 0.0));
  CHECK_FALSE(smooth.find("beta_range")->pass);
}

// ---------------------------------------------------------------- mesh

TEST_CASE("icosphere counts and closure") {
  const auto m = build_mesh(Divisor(), 3, 0, 0.5);
  CHECK(m->num_vertices() == 642);
  const long V = long(m->num_vertices()), E = long(m->num_edges()), F = long(m->triangles().size());
  CHECK(V - E + F == 2);
  CHECK(m->node_areas().sum() == Approx(4.0 * kPi).epsilon(1e-6));
  CHECK(m->node_areas().minCoeff() > 0.0);
  CHECK_THROWS_AS(build_mesh(Divisor(), 1, 0, 0.5), MeshError);
}

TEST_CASE("graded mesh carries the cone points as vertices") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 4, 0.5);
  const long V = long(m->num_vertices()), E = long(m->num_edges()), F = long(m->triangles().size());
  CHECK(V - E + F == 2);
  CHECK(m->node_areas().sum() == Approx(4.0 * kPi).epsilon(1e-6));
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(m->vertex(m->cone_vertex_ids()[i]) == d[i].position());
    CHECK(m->cone_index(m->cone_vertex_ids()[i]) == int(i));
  }
  for (const auto& v : m->vertices()) CHECK(v.norm() == Approx(1.0).epsilon(1e-14));

  SUBCASE("annulus edge lengths halve from ring to ring") {
    for (std::size_t c = 0; c < d.size(); ++c) {
      const auto rings = grading_ring_edge_lengths(*m, c);
      REQUIRE(rings.size() == 4);
      for (std::size_t l = 0; l + 1 < rings.size(); ++l) {
        const double ratio = rings[l + 1] / rings[l];
        CHECK(ratio >= 0.4);
        CHECK(ratio <= 0.6);
      }
    }
  }
  CHECK_THROWS_AS(build_mesh(d, 3, 2, 1.0), MeshError);
}

TEST_CASE("discrete laplacian on the round sphere") {
  const auto m = build_mesh(Divisor(), 5, 0, 0.5);
  CHECK(laplace_apply(*m, GridFunction(*m, 3.7)).values().cwiseAbs().maxCoeff() == 0.0);

  const GridFunction z = GridFunction::sample(*m, [](const Vec3& x) { return x.z(); });
  const GridFunction lz = laplace_apply(*m, z);
  double worst = 0.0;
  for (std::size_t v = 0; v < z.size(); ++v) worst = std::max(worst, std::abs(lz[v] + 2.0 * z[v]));
  CHECK(worst <= 0.02 * 2.0);

  const GridFunction q = GridFunction::sample(*m, [](const Vec3& x) { return x.x() * x.x() - x.y() * x.y(); });
  // l = 2 is checked in the area-weighted L2 norm; the nodewise error stalls near 4% on the
  // subdivision seams of the icosahedron
  const GridFunction lq = laplace_apply(*m, q);
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) {
    const double a = m->node_areas()[Eigen::Index(v)];
    err2 += a * std::pow(lq[v] + 6.0 * q[v], 2);
    ref2 += a * std::pow(6.0 * q[v], 2);
  }
  CHECK(std::sqrt(err2 / ref2) <= 0.03);

  SUBCASE("symmetric, semidefinite, conservative") {
    std::mt19937 rng(3);
    const GridFunction f = fixtures::random_pinned(*m, rng), g = fixtures::random_pinned(*m, rng);
    const Eigen::VectorXd& A = m->node_areas();
    const double fg = laplace_apply(*m, f).values().cwiseProduct(A).dot(g.values());
    const double gf = laplace_apply(*m, g).values().cwiseProduct(A).dot(f.values());
    CHECK(std::abs(fg - gf) <= 1e-12 * std::max(1.0, std::abs(fg)));
    CHECK(laplace_apply(*m, f).values().cwiseProduct(A).dot(f.values()) <= 0.0);
    CHECK(std::abs(integrate(*m, laplace_apply(*m, f))) <= 1e-10);
  }

  SUBCASE("commutes with a symmetry of the icosahedron") {
    // rotation by 2 pi / 5 about a vertex axis maps the vertex set onto itself
    const Vec3 axis = m->vertex(0).normalized();
    const Eigen::Matrix3d R = Eigen::AngleAxisd(2.0 * kPi / 5.0, axis).toRotationMatrix();
    const NearestVertexLocator loc(*m);
    std::vector<int> image(m->num_vertices());
    bool onto = true;
    for (std::size_t v = 0; v < image.size(); ++v) {
      image[v] = loc.nearest(R * m->vertex(int(v)));
      onto = onto && (m->vertex(image[v]) - R * m->vertex(int(v))).norm() < 1e-9;
    }
    REQUIRE(onto);
    std::mt19937 rng(5);
    const GridFunction f = fixtures::random_pinned(*m, rng);
    GridFunction fr(*m);
    for (std::size_t v = 0; v < fr.size(); ++v) fr[v] = f[std::size_t(image[v])];
    const GridFunction a = laplace_apply(*m, fr), b = laplace_apply(*m, f);
    double worst_rot = 0.0;
    for (std::size_t v = 0; v < fr.size(); ++v) worst_rot = std::max(worst_rot, std::abs(a[v] - b[std::size_t(image[v])]));
    CHECK(worst_rot <= 1e-9);
  }
}

TEST_CASE("quadrature on the round sphere") {
  const auto m = build_mesh(Divisor(), 5, 0, 0.5);
  CHECK(integrate(*m, GridFunction(*m, 1.0)) == Approx(4.0 * kPi).epsilon(1e-6));
  CHECK(std::abs(integrate(*m, GridFunction::sample(*m, [](const Vec3& x) { return x.z(); }))) <= 1e-8);
  CHECK(integrate(*m, GridFunction::sample(*m, [](const Vec3& x) { return x.z() * x.z(); })) ==
        Approx(4.0 * kPi / 3.0).epsilon(0.005));
}

TEST_CASE("stereographic charts") {
  const Vec3 north(0, 0, 1);
  CHECK(std::abs(stereo_project(-north, north)) <= 1e-15);
  CHECK(std::abs(stereo_project(Vec3(1, 0, 0), north)) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(stereo_project(north, north), DomainError);
  std::mt19937 rng(11);
  std::normal_distribution<double> N;
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = Vec3(N(rng), N(rng), N(rng)).normalized();
    const Vec3 pole = Vec3(N(rng), N(rng), N(rng)).normalized();
    CHECK((stereo_unproject(stereo_project(p, pole), pole) - p).norm() <= 1e-12);
  }
}

TEST_CASE("grid functions are tied to their mesh") {
  const auto a = build_mesh(Divisor(), 2, 0, 0.5);
  const auto b = build_mesh(Divisor(), 2, 0, 0.5);
  CHECK_THROWS_AS(laplace_apply(*b, GridFunction(*a, 1.0)), ShapeError);

  SUBCASE("csv round trip") {
    const GridFunction f = GridFunction::sample(*a, [](const Vec3& x) { return x.x() - 2.0 * x.y(); });
    std::stringstream ss;
    write_csv(*a, f, ss);
    CHECK(ss.str().rfind("x,y,z,value\n", 0) == 0);
    const GridFunction g = read_csv(*a, ss);
    CHECK((g.values() - f.values()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("off export") {
    std::stringstream ss;
    write_off(*a, ss);
    std::string head;
    std::size_t nv = 0, nf = 0;
    ss >> head >> nv >> nf;
    CHECK(head == "OFF");
    CHECK(nv == a->num_vertices());
    CHECK(nf == a->triangles().size());
  }
}

// ---------------------------------------------------------------- background

TEST_CASE("background fields") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 3, 0.5);
  const ConicalBackground bg = build_background(d, m, 0.5);
  for (std::size_t v = 0; v < m->num_vertices(); ++v) {
    if (m->is_cone_vertex(int(v))) {
      CHECK(bg.rho()[v] == 0.0);
      CHECK(bg.k_beta()[v] == 0.0);
      continue;
    }
    CHECK(bg.rho()[v] > 0.0);
    CHECK(bg.rho()[v] <= 1.0);
    CHECK(bg.k_beta()[v] > 0.0);
    CHECK(bg.mass_weight()[v] * bg.inverse_weight()[v] == Approx(1.0).epsilon(1e-14));
    CHECK(bg.k_beta()[v] == Approx(bg.inverse_weight()[v] * bg.m_beta()[v]).epsilon(1e-14));
    CHECK(bg.m_beta()[v] == Approx(1.0 - (0.3 + 0.4 + 0.5) / 2.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(build_background(d, m, 1.2), GeometryError);
}

TEST_CASE("local blend radius function") {
  const double R = 0.6;
  SUBCASE("log tan(d/2) is harmonic in the inner region") {
    for (double dd : {0.05, 0.1, 0.2, 0.29}) CHECK(local_blend_profile(dd, R).laplacian == 0.0);
    // f'' + cot(d) f' with f' = 1/sin d vanishes
    const double dd = 0.2, h = 1e-4;
    auto f = [&](double s) { return local_blend_profile(s, R).log_rho; };
    const double lap = (f(dd + h) - 2 * f(dd) + f(dd - h)) / (h * h) + (f(dd + h) - f(dd - h)) / (2 * h) / std::tan(dd);
    CHECK(std::abs(lap) <= 1e-5);
  }
  SUBCASE("blend annulus matches finite differences") {
    auto f = [&](double s) { return local_blend_profile(s, R).log_rho; };
    for (double dd : {0.35, 0.45, 0.55}) {
      const double h = 1e-4;
      const double lap = (f(dd + h) - 2 * f(dd) + f(dd - h)) / (h * h) + (f(dd + h) - f(dd - h)) / (2 * h) / std::tan(dd);
      CHECK(local_blend_profile(dd, R).laplacian == Approx(lap).epsilon(1e-5));
    }
  }
  CHECK(local_blend_profile(0.7, R).log_rho == 0.0);

  SUBCASE("outside every ball the background is round") {
    const Divisor d({ConePoint(Vec3(1, 0, 0), -0.02), ConePoint(Vec3(0, 1, 0), -0.025), ConePoint(Vec3(0, 0, 1), -0.03)});
    const auto m = build_mesh(d, 3, 2, 0.5);
    const ConicalBackground bg = build_background(d, m, R, RadiusModel::LocalBlend);
    for (std::size_t v = 0; v < m->num_vertices(); ++v) {
      if (bg.owner(int(v)) >= 0) continue;
      CHECK(bg.rho()[v] == 1.0);
      CHECK(bg.k_beta()[v] == 1.0);
    }
    // inner region: K_beta = rho^{-2 beta}
    for (std::size_t v = 0; v < m->num_vertices(); ++v) {
      const int o = bg.owner(int(v));
      if (o < 0 || m->is_cone_vertex(int(v))) continue;
      if (geodesic_distance(m->vertex(int(v)), d[std::size_t(o)].position()) > 0.5 * R) continue;
      CHECK(bg.k_beta()[v] == Approx(std::pow(bg.rho()[v], -2.0 * d[std::size_t(o)].beta())).epsilon(1e-12));
    }
  }
  SUBCASE("sharp blends are rejected") {
    const auto m = build_mesh(distinct(), 3, 2, 0.3);
    CHECK_THROWS_AS(build_background(distinct(), m, 0.3, RadiusModel::LocalBlend), BackgroundError);
  }
}

TEST_CASE("curvature map identities") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 2, 0.5);
  const ConicalBackground bg = build_background(d, m, 0.5);
  const GridFunction zero(*m, 0.0);
  CHECK((curvature_map(bg, zero).values() - bg.k_beta().values()).cwiseAbs().maxCoeff() <= 1e-15);

  GridFunction bad(*m, 0.0);
  bad[std::size_t(m->cone_vertex_ids()[1])] = 0.1;
  CHECK_THROWS_AS(curvature_map(bg, bad), NormalizationError);
  CHECK_THROWS_AS(gauss_bonnet(bg, bad), NormalizationError);

  SUBCASE("weight cancellation") {
    std::mt19937 rng(2);
    const GridFunction f = fixtures::random_pinned(*m, rng);
    const GridFunction a = delta_beta_apply(bg, f), b = laplace_apply(*m, f);
    for (std::size_t v = 0; v < f.size(); ++v) {
      if (m->is_cone_vertex(int(v))) {
        CHECK(a[v] == 0.0);
        continue;
      }
      CHECK(a[v] * bg.mass_weight()[v] == Approx(b[v]).epsilon(1e-13));
    }
  }
  SUBCASE("round sphere scaling") {
    const auto r = build_mesh(Divisor(), 3, 0, 0.5);
    const ConicalBackground round = build_background(Divisor(), r, 0.5);
    const double c = 0.37;
    const GridFunction k = curvature_map(round, GridFunction(*r, c));
    for (std::size_t v = 0; v < k.size(); ++v) CHECK(k[v] == Approx(std::exp(-2.0 * c)).epsilon(1e-15));
    CHECK((delta_beta_apply(round, GridFunction(*r, 0.0)).values()).cwiseAbs().maxCoeff() == 0.0);
    std::mt19937 rng(8);
    const GridFunction f = fixtures::random_pinned(*r, rng);
    CHECK((delta_beta_apply(round, f).values() - laplace_apply(*r, f).values()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gauss-bonnet quadrature") {
  const auto r = build_mesh(Divisor(), 5, 0, 0.5);
  const ConicalBackground round = build_background(Divisor(), r, 0.5);
  const auto gb = gauss_bonnet(round, GridFunction(*r, 0.0));
  CHECK(gb.target == Approx(4.0 * kPi));
  CHECK(gb.residual <= 1e-4);

  const Divisor d = distinct();
  double prev = 1.0;
  for (int levels : {2, 3, 4}) {
    const auto m = build_mesh(d, 3, levels, 0.5);
    const ConicalBackground bg = build_background(d, m, 0.5);
    const auto g = gauss_bonnet(bg, GridFunction(*m, 0.0));
    CHECK(g.target == Approx(1.6 * kPi).epsilon(1e-14));
    CHECK(g.residual <= 1.1 * prev);
    prev = g.residual;
  }
  CHECK(prev <= 0.01);
}

TEST_CASE("cone cell weight") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 3, 0.5);
  const ConicalBackground bg = build_background(d, m, 0.5);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(cone_cell_weight(bg, i, 0.0) == Approx(1.0).epsilon(1e-15));
    // rho^{2 beta} blows up at the cone, so the cell mean exceeds every neighbour's value
    const int c = m->cone_vertex_ids()[i];
    double nb = 0.0;
    for (int n : m->neighbors(c)) nb = std::max(nb, bg.mass_weight()[std::size_t(n)]);
    CHECK(cone_cell_weight(bg, i, 1.0) > nb);
  }
  CHECK_THROWS_AS(cone_cell_weight(bg, 3, 1.0), DomainError);
}

TEST_CASE("weighted norms") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 2, 0.5);
  const ConicalBackground bg = build_background(d, m, 0.5);
  WeightSpec w;
  w.gamma = {0.5, 0.5, 0.5};
  CHECK(weighted_norm(bg, GridFunction(*m, 0.0), w).total == 0.0);

  double rho_min = 1.0;
  for (std::size_t v = 0; v < m->num_vertices(); ++v)
    if (!m->is_cone_vertex(int(v)) && bg.owner(int(v)) >= 0) rho_min = std::min(rho_min, bg.rho()[v]);
  CHECK(weighted_norm(bg, GridFunction(*m, 1.0), w).c0 == Approx(std::pow(rho_min, -0.5)).epsilon(1e-12));

  const GridFunction p = rho_power(bg, w.gamma);
  CHECK(weighted_norm(bg, p, w).c0 == Approx(1.0).epsilon(1e-14));

  SUBCASE("constants leave the weighted space under refinement") {
    const auto fine = build_mesh(d, 3, 4, 0.5);
    const ConicalBackground bf = build_background(d, fine, 0.5);
    CHECK(weighted_norm(bf, GridFunction(*fine, 1.0), w).c0 > weighted_norm(bg, GridFunction(*m, 1.0), w).c0);
  }
  SUBCASE("first order part") {
    w.order_k = 1;
    const auto r = weighted_norm(bg, fixtures::pinned_smooth(d, *m, {1, 0, 0, 0}), w);
    CHECK(r.c1 > 0.0);
    CHECK(std::isfinite(r.seminorm));
  }
  w.order_k = 2;
  CHECK_THROWS_AS(weighted_norm(bg, p, w), ScopeError);
  w.order_k = 0;
  w.gamma = {2.0, 0.5, 0.5};  // 2 = -1 / -0.5 is indicial
  CHECK_THROWS_AS(weighted_norm(bg, p, w), ScopeError);
}

TEST_CASE("integral of the conical laplacian vanishes") {
  const Divisor d = distinct();
  const auto m = build_mesh(d, 3, 3, 0.5);
  const ConicalBackground bg = build_background(d, m, 0.5);
  CHECK(mean_laplacian_zero(bg, GridFunction(*m, 0.0)) == 0.0);
  std::mt19937 rng(4);
  const double V = double(m->num_vertices());
  for (int i = 0; i < 5; ++i) {
    const GridFunction f = fixtures::random_pinned(*m, rng);
    CHECK(std::abs(mean_laplacian_zero(bg, f)) <= 1e-10 * f.values().cwiseAbs().maxCoeff() * V);
  }
  const GridFunction p = rho_power(bg, {0.5, 0.5, 0.5});
  CHECK(std::abs(mean_laplacian_zero(bg, p)) <= 1e-10 * p.values().cwiseAbs().maxCoeff() * V);
}
