#include <cmath>

#include "doctest.h"
#include "polyscal/complex.hpp"

using namespace polyscal;

namespace {

const double kPi = 3.14159265358979323846;

Eigen::VectorXd lift_to_top(const SimplicialLengthComplex& x, CellRef w,
                            const Eigen::VectorXd& bary, int top_dim) {
  const auto& pl = x.placements(w.dim, w.index);
  REQUIRE(!pl.empty());
  return lift_bary(bary, pl[0].corner_map, top_dim + 1);
}

// For a single-top-cell complex, every refined vertex has a Euclidean
// position inside the source cell; refined edge lengths must match exactly.
void check_refined_geometry(const SimplicialLengthComplex& src, int levels) {
  REQUIRE(src.top_cells().size() == 1);
  CellRef top = src.top_cells()[0];
  SubdivisionMap map;
  SimplicialLengthComplex z = subdivide(src, levels, &map);
  const Eigen::MatrixXd& pos_top = src.corner_positions(top.dim, top.index);
  std::vector<Eigen::VectorXd> pos(z.vertex_count());
  for (int v = 0; v < z.vertex_count(); ++v) {
    CellRef w = map.carrier[0][v];
    pos[v] = pos_top * lift_to_top(src, w, map.carrier_bary[0][v].col(0), top.dim);
  }
  for (int e = 0; e < z.cell_count(1); ++e) {
    const Cell& ec = z.cell(1, e);
    double d = (pos[ec.vertices[0]] - pos[ec.vertices[1]]).norm();
    CHECK(d == doctest::Approx(ec.length).epsilon(1e-12));
  }
  CHECK(z.total_measure() == doctest::Approx(src.total_measure()).epsilon(1e-12));
}

// Cell carriers must agree with their corner vertices' carriers as points of
// the source complex (valid for glued complexes too).
void check_carrier_consistency(const SimplicialLengthComplex& src, int levels) {
  SubdivisionMap map;
  SimplicialLengthComplex z = subdivide(src, levels, &map);
  for (int d = 0; d <= z.dimension(); ++d) {
    for (int i = 0; i < z.cell_count(d); ++i) {
      REQUIRE(map.carrier[d][i].dim >= 0);
      for (int k = 0; k <= d; ++k) {
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(d + 1);
        unit[k] = 1.0;
        MetricPoint via_cell = map.map_point(src, MetricPoint::on_cell(d, i, unit));
        MetricPoint via_vertex = map.vertex_point(src, z.cell(d, i).vertices[k]);
        CHECK(points_equal(src, via_cell, via_vertex));
      }
    }
  }
}

}  // namespace

TEST_SUITE_BEGIN("complex");

TEST_CASE("flat torus structure") {
  SimplicialLengthComplex t = make_flat_torus();
  CHECK(t.dimension() == 2);
  CHECK(t.vertex_count() == 1);
  CHECK(t.cell_count(1) == 3);
  CHECK(t.cell_count(2) == 2);
  CHECK(t.connected());
  CHECK(t.closed_surface());
  CHECK(t.total_measure() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(t.vertex_angle(0) == doctest::Approx(2 * kPi).epsilon(1e-12));
  // Each edge appears as a side of both triangles.
  for (int e = 0; e < 3; ++e) CHECK(t.cofacets(1, e).size() == 2);
  // Corner distances of the first triangle: two unit sides and the diagonal.
  CHECK(t.pair_distance(2, 0, 0, 1) == doctest::Approx(1.0));
  CHECK(t.pair_distance(2, 0, 1, 2) == doctest::Approx(1.0));
  CHECK(t.pair_distance(2, 0, 0, 2) == doctest::Approx(std::sqrt(2.0)));
  ValidationReport r = t.validate();
  CHECK(r.valid);
  CHECK(r.warnings.empty());
}

TEST_CASE("torus subdivision keeps the flat structure") {
  SimplicialLengthComplex t = make_flat_torus();
  for (int level : {1, 2}) {
    SimplicialLengthComplex z = subdivide(t, level);
    int f = 2 << (2 * level);  // 2 * 4^level
    CHECK(z.cell_count(2) == f);
    CHECK(z.cell_count(1) == 3 * (f / 2));
    CHECK(z.vertex_count() == f / 2);
    CHECK(z.closed_surface());
    CHECK(z.total_measure() == doctest::Approx(1.0).epsilon(1e-12));
    for (int v = 0; v < z.vertex_count(); ++v)
      CHECK(z.vertex_angle(v) == doctest::Approx(2 * kPi).epsilon(1e-12));
  }
}

TEST_CASE("torus carrier maps are consistent") { check_carrier_consistency(make_flat_torus(), 2); }

TEST_CASE("single triangle geometry and subdivision") {
  SimplicialLengthComplex x = make_single_triangle(3.0, 4.0, 5.0);
  CHECK(x.total_measure() == doctest::Approx(6.0).epsilon(1e-12));
  check_refined_geometry(x, 1);
  check_refined_geometry(x, 3);
  check_carrier_consistency(x, 2);
}

TEST_CASE("solid tetrahedron geometry and subdivision") {
  SimplicialLengthComplex x = make_tetrahedron(1.0);
  CHECK(x.dimension() == 3);
  CHECK(x.cell_count(3) == 1);
  CHECK(x.cell_count(2) == 4);
  CHECK(x.total_measure() == doctest::Approx(1.0 / (6.0 * std::sqrt(2.0))).epsilon(1e-12));
  SimplicialLengthComplex z1 = subdivide(x, 1);
  CHECK(z1.cell_count(3) == 8);
  CHECK(z1.total_measure() == doctest::Approx(x.total_measure()).epsilon(1e-12));
  SimplicialLengthComplex z2 = subdivide(x, 2);
  CHECK(z2.cell_count(3) == 64);
  CHECK(z2.total_measure() == doctest::Approx(x.total_measure()).epsilon(1e-12));
  check_refined_geometry(x, 2);
  check_carrier_consistency(x, 2);
}

TEST_CASE("octahedron surface") {
  SimplicialLengthComplex x = make_octahedron();
  CHECK(x.vertex_count() == 6);
  CHECK(x.cell_count(1) == 12);
  CHECK(x.cell_count(2) == 8);
  CHECK(x.closed_surface());
  CHECK(x.total_measure() == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
  for (int v = 0; v < 6; ++v)
    CHECK(x.vertex_angle(v) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-12));
  SimplicialLengthComplex z = subdivide(x, 1);
  CHECK(z.closed_surface());
  CHECK(z.total_measure() == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
  // Midpoint vertices are flat; original cone points keep their angle.
  for (int v = 0; v < 6; ++v)
    CHECK(z.vertex_angle(v) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-12));
  for (int v = 6; v < z.vertex_count(); ++v)
    CHECK(z.vertex_angle(v) == doctest::Approx(2.0 * kPi).epsilon(1e-12));
  // Perturbed lengths still build and stay deterministic.
  SimplicialLengthComplex p1 = make_octahedron(0.05, 7);
  SimplicialLengthComplex p2 = make_octahedron(0.05, 7);
  for (int e = 0; e < 12; ++e) {
    CHECK(p1.cell(1, e).length == p2.cell(1, e).length);
    CHECK(p1.cell(1, e).length != 1.0);
  }
}

TEST_CASE("hexagonal disk has boundary") {
  SimplicialLengthComplex x = make_disk_hexagon();
  CHECK(!x.closed_surface());
  CHECK(x.total_measure() == doctest::Approx(6.0 * std::sqrt(3.0) / 4.0).epsilon(1e-12));
  CHECK(x.vertex_angle(0) == doctest::Approx(2 * kPi).epsilon(1e-12));
  ValidationReport r = x.validate();
  CHECK(r.valid);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("6 boundary edge") != std::string::npos);
}

TEST_CASE("one dimensional fixtures") {
  SimplicialLengthComplex c = make_cycle(6, 3.0);
  CHECK(c.dimension() == 1);
  CHECK(c.vertex_count() == 6);
  CHECK(c.total_measure() == doctest::Approx(3.0));
  CHECK(c.min_edge_length() == doctest::Approx(0.5));

  SimplicialLengthComplex loop = make_cycle(1, 2.0);
  CHECK(loop.vertex_count() == 1);
  CHECK(loop.cell_count(1) == 1);
  SimplicialLengthComplex loop2 = subdivide(loop, 1);
  CHECK(loop2.vertex_count() == 2);
  CHECK(loop2.total_measure() == doctest::Approx(2.0));

  SimplicialLengthComplex w = make_wedge_of_circles();
  CHECK(w.vertex_count() == 5);
  CHECK(w.cell_count(1) == 6);
  CHECK(w.total_measure() == doctest::Approx(2.0));

  SimplicialLengthComplex i = make_interval(4, 1.0);
  CHECK(i.vertex_count() == 5);
  CHECK(i.connected());
}

TEST_CASE("builder rejects bad metric data") {
  ComplexBuilder b1;
  b1.add_vertex("u");
  b1.add_vertex("v");
  b1.add_vertex("w");
  b1.add_edge(0, 1, 1.0);
  b1.add_edge(1, 2, 1.0);
  b1.add_edge(2, 0, 3.0);
  CHECK_THROWS_AS(b1.add_triangle(0, 1, 2), std::invalid_argument);

  ComplexBuilder b2;
  b2.add_vertex("u");
  b2.add_vertex("v");
  b2.add_vertex("w");
  b2.add_edge(0, 1, 1.0);
  b2.add_edge(1, 2, 1.0);
  CHECK_THROWS_AS(b2.add_triangle(0, 1, 2), std::invalid_argument);

  ComplexBuilder b3;
  b3.add_vertex("u");
  CHECK_THROWS_AS(b3.add_edge(0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(b3.add_edge(0, 0, -1.0), std::invalid_argument);

  // A tetrahedron whose lengths cannot embed in Euclidean space: a long edge
  // between the apexes of two nearly flat triangles.
  ComplexBuilder b4;
  for (int i = 0; i < 4; ++i) b4.add_vertex("v" + std::to_string(i));
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v) b4.add_edge(u, v, (u == 2 && v == 3) ? 1.99 : 1.0);
  b4.add_tetrahedron(0, 1, 2, 3);
  CHECK_THROWS_AS(b4.build(), std::invalid_argument);
}

TEST_CASE("points canonicalize onto minimal faces") {
  SimplicialLengthComplex x = make_single_triangle(3.0, 4.0, 5.0);
  MetricPoint corner = canonical_point(x, MetricPoint::on_cell(2, 0, Eigen::Vector3d(1, 0, 0)));
  CHECK(corner.dim == 0);
  CHECK(corner.cell == 0);

  MetricPoint side = canonical_point(x, MetricPoint::on_cell(2, 0, Eigen::Vector3d(0.25, 0.75, 0)));
  CHECK(side.dim == 1);
  CHECK(side.cell == 0);
  CHECK(side.bary[1] == doctest::Approx(0.75));

  MetricPoint inner = canonical_point(x, MetricPoint::on_cell(2, 0, Eigen::Vector3d(1, 1, 2)));
  CHECK(inner.dim == 2);
  CHECK(inner.bary.sum() == doctest::Approx(1.0));
  CHECK(inner.bary[2] == doctest::Approx(0.5));

  CHECK(points_equal(x, MetricPoint::on_edge(0, 0.0), MetricPoint::vertex(0)));
  CHECK(points_equal(x, MetricPoint::on_edge(0, 1.0), MetricPoint::vertex(1)));
  CHECK(!points_equal(x, MetricPoint::on_edge(0, 0.5), MetricPoint::vertex(1)));
  CHECK(point_hash(x, MetricPoint::on_edge(0, 0.0)) == point_hash(x, MetricPoint::vertex(0)));
  CHECK_THROWS_AS(canonical_point(x, MetricPoint::on_cell(2, 5, Eigen::Vector3d(1, 0, 0))),
                  std::invalid_argument);
  CHECK_THROWS_AS(canonical_point(x, MetricPoint::on_cell(2, 0, Eigen::Vector3d(1, -1, 1))),
                  std::invalid_argument);
}

TEST_CASE("scale functions interpolate") {
  SimplicialLengthComplex x = make_single_triangle(1.0, 1.0, 1.0);
  ScaleFunction f;
  f.vertex_values = {1.0, 2.0, 4.0};
  f.lipschitz = 3.0;
  f.check_valid(x);
  CHECK(f.min_value() == 1.0);
  CHECK(f.eval(x, MetricPoint::vertex(2)) == doctest::Approx(4.0));
  CHECK(f.eval(x, MetricPoint::on_cell(2, 0, Eigen::Vector3d(0.5, 0.25, 0.25))) ==
        doctest::Approx(0.5 * 1 + 0.25 * 2 + 0.25 * 4));
  ScaleFunction bad;
  bad.vertex_values = {1.0, -2.0, 1.0};
  CHECK_THROWS_AS(bad.check_valid(x), std::invalid_argument);
  ScaleFunction c = ScaleFunction::constant(x, 2.5);
  CHECK(c.eval(x, MetricPoint::on_edge(1, 0.3)) == doctest::Approx(2.5));
}

TEST_SUITE_END();
