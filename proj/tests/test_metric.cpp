#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "polyscal/comparison.hpp"
#include "polyscal/complex.hpp"
#include "polyscal/metric.hpp"

namespace {

using namespace polyscal;

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_SUITE("metric") {
  TEST_CASE("distance on the flat torus matches the diagonal geodesic") {
    const auto x = make_flat_torus();
    const auto p = MetricPoint::vertex(0);
    const auto q = MetricPoint::on_edge(2, 0.5);  // square center, mid-diagonal
    const auto d = distance(x, p, q, 0.02);
    CHECK(d.error_bound <= 0.02);
    CHECK(d.value >= std::sqrt(0.5) - 1e-12);          // never under-estimates
    CHECK(rel_err(d.value, std::sqrt(0.5)) < 1e-9);    // corner chord is exact here
    const auto back = distance(x, q, p, 0.02);
    CHECK(std::abs(back.value - d.value) <= 1e-9);     // symmetry
    const auto same = distance(x, q, q, 0.5);
    CHECK(same.value == 0.0);
    CHECK(same.error_bound == 0.0);
  }

  TEST_CASE("distance on the wedge of circles is exact") {
    const auto w = make_wedge_of_circles();
    const auto pa = MetricPoint::on_edge(1, 0.5);  // antipode on circle a
    const auto pb = MetricPoint::on_edge(4, 0.5);  // antipode on circle b
    const auto d = distance(w, pa, pb, 1e-9);
    CHECK(d.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.error_bound == 0.0);
    const auto half = distance(w, pa, MetricPoint::vertex(0), 1e-9);
    CHECK(half.value == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("distance reports unreachable endpoints") {
    ComplexBuilder b;
    b.add_vertex("u");
    b.add_vertex("v");
    b.add_edge(0, 0, 1.0);
    b.add_edge(1, 1, 1.0);
    const auto x = b.build();
    CHECK_THROWS_AS(distance(x, MetricPoint::vertex(0), MetricPoint::vertex(1), 0.1),
                    std::runtime_error);
    try {
      distance(x, MetricPoint::vertex(0), MetricPoint::vertex(1), 0.1);
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("unreachable") != std::string::npos);
    }
  }

  TEST_CASE("mixed-dimensional complexes are rejected") {
    ComplexBuilder b;
    for (int i = 0; i < 4; ++i) b.add_vertex("v" + std::to_string(i));
    b.add_edge(0, 1, 1.0);
    b.add_edge(1, 2, 1.0);
    b.add_edge(2, 0, 1.0);
    b.add_triangle(0, 1, 2);
    b.add_edge(2, 3, 1.0);  // dangling top edge
    const auto x = b.build();
    CHECK_THROWS_AS(ball_volume(x, MetricPoint::vertex(0), 0.2), std::invalid_argument);
  }

  TEST_CASE("triangle inequality holds on sampled triples") {
    const auto w = make_wedge_of_circles();
    const std::vector<MetricPoint> wp{MetricPoint::vertex(0), MetricPoint::on_edge(0, 0.7),
                                      MetricPoint::on_edge(4, 0.2), MetricPoint::on_edge(2, 0.4)};
    for (std::size_t i = 0; i < wp.size(); ++i)
      for (std::size_t j = 0; j < wp.size(); ++j)
        for (std::size_t k = 0; k < wp.size(); ++k) {
          const double dij = distance(w, wp[i], wp[j], 1e-9).value;
          const double djk = distance(w, wp[j], wp[k], 1e-9).value;
          const double dik = distance(w, wp[i], wp[k], 1e-9).value;
          CHECK(dik <= dij + djk + 1e-12);
        }
    const auto x = make_flat_torus();
    const std::vector<MetricPoint> tp{MetricPoint::vertex(0), MetricPoint::on_edge(0, 0.3),
                                      MetricPoint::on_edge(1, 0.55), MetricPoint::on_edge(2, 0.8)};
    for (std::size_t i = 0; i < tp.size(); ++i)
      for (std::size_t k = 0; k < tp.size(); ++k) {
        const auto dik = distance(x, tp[i], tp[k], 0.05);
        for (std::size_t j = 0; j < tp.size(); ++j) {
          const double dij = distance(x, tp[i], tp[j], 0.05).value;
          const double djk = distance(x, tp[j], tp[k], 0.05).value;
          // upper bounds satisfy the inequality up to the error bound
          CHECK(dik.value <= dij + djk + dik.error_bound + 1e-12);
        }
      }
  }

  TEST_CASE("distance field refinement tightens bounds and labels") {
    const auto x = make_flat_torus();
    const auto src = MetricPoint::vertex(0);
    const auto probe = MetricPoint::on_edge(2, 0.25);
    double prev_bound = 1e300;
    double prev_eval = 1e300;
    for (int level = 2; level <= 5; ++level) {
      const auto field = build_distance_field(x, src, level);
      CHECK(field.all_reachable());
      CHECK_FALSE(field.exact());
      CHECK(field.eval(src) == doctest::Approx(0.0).epsilon(1e-12));
      const double bound = field.error_for(0.7);
      CHECK(bound <= prev_bound);
      prev_bound = bound;
      const double value = field.eval(probe);
      CHECK(value <= prev_eval + 1e-12);  // nested lattices: upper bounds shrink
      prev_eval = value;
    }
    const auto w = make_wedge_of_circles();
    const auto wf = build_distance_field(w, MetricPoint::vertex(0), 0);
    CHECK(wf.exact());
    CHECK(wf.error_bound() == 0.0);
  }

  TEST_CASE("exact 1-complex ball volumes") {
    const auto c = make_cycle(6, 6.0);
    const auto v = MetricPoint::vertex(0);
    const auto b1 = ball_volume(c, v, 1.0);
    CHECK(b1.method == "exact");
    CHECK(b1.half_width == 0.0);
    CHECK(b1.value == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ball_volume(c, v, 2.5).value == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(ball_volume(c, v, 3.0).value == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(ball_volume(c, v, 7.5).value == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(ball_volume(c, v, 0.0).value == 0.0);
    const auto mid = MetricPoint::on_edge(0, 0.5);
    CHECK(ball_volume(c, mid, 0.25).value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ball_volume(c, mid, 3.0).value == doctest::Approx(6.0).epsilon(1e-12));

    const auto w = make_wedge_of_circles();
    const auto wp = MetricPoint::vertex(0);
    CHECK(ball_volume(w, wp, 0.3).value == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(ball_volume(w, wp, 0.6).value == doctest::Approx(2.0).epsilon(1e-12));
    const auto ant = MetricPoint::on_edge(1, 0.5);
    CHECK(ball_volume(w, ant, 0.25).value == doctest::Approx(0.5).epsilon(1e-12));
    // ball around the antipode reaches the far circle through the wedge point
    CHECK(ball_volume(w, ant, 0.75).value == doctest::Approx(1.5).epsilon(1e-12));
  }

  TEST_CASE("1-complex sphere point counts") {
    const auto c = make_cycle(6, 6.0);
    const auto v = MetricPoint::vertex(0);
    CHECK(sphere_point_count(c, v, 0.0) == 1);
    CHECK(sphere_point_count(c, v, 1.0) == 2);
    CHECK(sphere_point_count(c, v, 2.5) == 2);
    CHECK(sphere_point_count(c, v, 3.0) == 1);  // antipodal point
    CHECK(sphere_point_count(c, v, 3.5) == 0);
    const auto w = make_wedge_of_circles();
    CHECK(sphere_point_count(w, MetricPoint::vertex(0), 0.25) == 4);
    const auto ant = MetricPoint::on_edge(1, 0.5);
    CHECK(sphere_point_count(w, ant, 0.25) == 2);
    CHECK(sphere_point_count(w, ant, 0.5) == 1);  // exactly the wedge point
    CHECK(sphere_point_count(w, ant, 0.75) == 2);
    CHECK_THROWS_AS(sphere_point_count(make_flat_torus(), MetricPoint::vertex(0), 0.3),
                    std::invalid_argument);
  }

  TEST_CASE("torus ball volume by quadrature") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    SampleSpec spec;
    spec.level = 5;
    const auto b = ball_volume(x, v, 0.3, BallMethod::kQuadrature, spec);
    CHECK(b.method == "quadrature");
    CHECK(std::abs(b.value - kPi * 0.09) <= 2e-3);
    CHECK(b.value <= kPi * 0.09 + 1e-9);  // upper-bound labels shrink the ball
    const auto zero = ball_volume(x, v, 0.0, BallMethod::kQuadrature, spec);
    CHECK(zero.value == 0.0);
    const auto all = ball_volume(x, v, 0.8, BallMethod::kQuadrature, spec);
    CHECK(all.value == doctest::Approx(1.0).epsilon(1e-9));  // r beyond the diameter
    // monotone in r
    double prev = -1.0;
    for (double r : {0.1, 0.2, 0.3, 0.5, 0.7, 0.9}) {
      const double val = ball_volume(x, v, r, BallMethod::kQuadrature, spec).value;
      CHECK(val >= prev - 1e-12);
      prev = val;
    }
    // off-vertex center
    const auto mid = MetricPoint::on_edge(2, 0.5);
    const auto bm = ball_volume(x, mid, 0.25, BallMethod::kQuadrature, spec);
    CHECK(std::abs(bm.value - kPi * 0.0625) <= 2e-3);
  }

  TEST_CASE("torus ball volume refinement converges") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    for (double r : {0.2, 0.3, 0.4}) {
      double prev_gap = 1e300;
      for (int level = 3; level <= 5; ++level) {
        SampleSpec spec;
        spec.level = level;
        const double val = ball_volume(x, v, r, BallMethod::kQuadrature, spec).value;
        const double gap = std::abs(val - kPi * r * r);
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
      }
    }
  }

  TEST_CASE("torus ball volume by stratified Monte Carlo") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    SampleSpec spec;
    spec.level = 5;
    spec.samples = 200000;
    spec.seed = 11;
    const auto b = ball_volume(x, v, 0.3, BallMethod::kMonteCarlo, spec);
    CHECK(b.method == "monte-carlo");
    CHECK(b.samples >= spec.samples);
    CHECK(b.half_width > 0.0);
    CHECK(std::abs(b.value - kPi * 0.09) <= b.half_width + 2e-3);
    // determinism: same spec gives bit-identical results, workers included
    const auto again = ball_volume(x, v, 0.3, BallMethod::kMonteCarlo, spec);
    CHECK(again.value == b.value);
    CHECK(again.half_width == b.half_width);
    SampleSpec par = spec;
    par.workers = 4;
    const auto wide = ball_volume(x, v, 0.3, BallMethod::kMonteCarlo, par);
    CHECK(wide.value == b.value);
    // monotone in r at fixed seed
    double prev = -1.0;
    for (double r : {0.1, 0.25, 0.3, 0.45}) {
      const double val = ball_volume(x, v, r, BallMethod::kMonteCarlo, spec).value;
      CHECK(val >= prev - 1e-15);
      prev = val;
    }
  }

  TEST_CASE("torus sphere measure approximates the embedded circle") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    SampleSpec spec;
    spec.level = 5;
    const auto s = sphere_measure(x, v, 0.3, spec);
    CHECK(s.method == "quadrature");
    CHECK(std::abs(s.value - 2.0 * kPi * 0.3) <= 0.03);
    CHECK(sphere_measure(x, v, 0.0, spec).value == 0.0);
    CHECK_THROWS_WITH_AS(sphere_measure(make_wedge_of_circles(), MetricPoint::vertex(0), 0.3),
                         "n >= 2 required", std::invalid_argument);
  }

  TEST_CASE("solid tetrahedron measures match the vertex cone") {
    const auto x = make_tetrahedron(1.0);
    const auto v = MetricPoint::vertex(0);
    const double omega = std::acos(23.0 / 27.0);  // vertex solid angle
    SampleSpec spec;
    spec.level = 4;
    const auto b = ball_volume(x, v, 0.3, BallMethod::kQuadrature, spec);
    CHECK(std::abs(b.value - omega * 0.027 / 3.0) <= 2e-4);
    const auto s = sphere_measure(x, v, 0.3, spec);
    CHECK(std::abs(s.value - omega * 0.09) <= 2e-3);
    const auto big = ball_volume(x, v, 2.0, BallMethod::kQuadrature, spec);
    CHECK(big.value == doctest::Approx(x.total_measure()).epsilon(1e-9));
    SampleSpec mc = spec;
    mc.samples = 100000;
    mc.seed = 5;
    const auto m = ball_volume(x, v, 0.3, BallMethod::kMonteCarlo, mc);
    CHECK(std::abs(m.value - b.value) <= m.half_width + b.half_width + 1e-3);
  }

  TEST_CASE("coarea check on the flat torus") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    SampleSpec spec;
    spec.level = 5;
    const auto rep = coarea_check(x, v, 0.3, 64, spec);
    CHECK(rep.eilenberg_coefficient == doctest::Approx(4.0 / kPi).epsilon(1e-12));
    CHECK(rep.ratio >= 0.98);
    CHECK(rep.ratio <= 1.02);
    CHECK(rep.eilenberg_ok);
    const auto zero = coarea_check(x, v, 0.0, 64, spec);
    CHECK(zero.ratio == 1.0);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs == 0.0);
    CHECK_THROWS_AS(coarea_check(make_wedge_of_circles(), MetricPoint::vertex(0), 0.3, 16, spec),
                    std::invalid_argument);
    CHECK_THROWS_AS(coarea_check(x, v, 0.3, 0, spec), std::invalid_argument);
  }

  TEST_CASE("coarea check on a perturbed subdivided octahedron") {
    const auto oct = subdivide(make_octahedron(0.05, 2024), 1);
    const auto v = MetricPoint::vertex(0);
    SampleSpec spec;
    spec.level = 4;
    const auto rep = coarea_check(oct, v, 0.4, 64, spec);
    CHECK(rep.ratio >= 0.95);
    CHECK(rep.ratio <= 1.05);
    CHECK(rep.eilenberg_ok);
  }

  TEST_CASE("coarea check on the solid tetrahedron") {
    const auto x = make_tetrahedron(1.0);
    SampleSpec spec;
    spec.level = 3;
    const auto rep = coarea_check(x, MetricPoint::vertex(0), 0.3, 32, spec);
    CHECK(rep.eilenberg_coefficient == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(rep.ratio >= 0.93);
    CHECK(rep.ratio <= 1.07);
    CHECK(rep.eilenberg_ok);
  }

  TEST_CASE("disk and triangle intersection area closed form") {
    // quarter disk
    CHECK(disk_triangle_area(0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0) ==
          doctest::Approx(kPi / 4.0).epsilon(1e-12));
    // half disk
    CHECK(disk_triangle_area(0.0, 0.0, 1.0, -10.0, 0.0, 10.0, 0.0, 0.0, 10.0) ==
          doctest::Approx(kPi / 2.0).epsilon(1e-12));
    // disk inside a big triangle
    CHECK(disk_triangle_area(0.1, 0.2, 0.5, -40.0, -40.0, 40.0, -40.0, 0.0, 40.0) ==
          doctest::Approx(kPi * 0.25).epsilon(1e-12));
    // triangle inside the disk
    CHECK(disk_triangle_area(0.2, 0.2, 10.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0) ==
          doctest::Approx(0.5).epsilon(1e-12));
    // orientation independence and translation invariance
    const double a1 = disk_triangle_area(0.3, -0.1, 0.7, 0.0, 0.0, 1.2, 0.1, 0.3, 1.0);
    const double a2 = disk_triangle_area(0.3, -0.1, 0.7, 0.3, 1.0, 1.2, 0.1, 0.0, 0.0);
    CHECK(a1 == doctest::Approx(a2).epsilon(1e-12));
    const double a3 = disk_triangle_area(1.3, 0.9, 0.7, 1.0, 1.0, 2.2, 1.1, 1.3, 2.0);
    CHECK(a1 == doctest::Approx(a3).epsilon(1e-12));
    CHECK(disk_triangle_area(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0) == 0.0);
    // disjoint
    CHECK(disk_triangle_area(5.0, 5.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("flat development of the hexagonal disk is exact") {
    const auto hexd = make_disk_hexagon();
    const auto dev = develop_flat_surface(hexd);
    CHECK(dev.valid);
    CHECK(dev.max_mismatch <= 1e-9);
    CHECK(developed_region_convex(dev, hexd));
    const auto c = MetricPoint::vertex(0);
    CHECK(developed_distance(dev, hexd, c, MetricPoint::vertex(1)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // disk inside the hexagon: exact pi r^2
    CHECK(developed_ball_area(dev, hexd, c, 0.5) == doctest::Approx(kPi * 0.25).epsilon(1e-12));
    CHECK(developed_sphere_length(dev, hexd, c, 0.5) ==
          doctest::Approx(kPi).epsilon(1e-12));
    // disk spilling over each side: closed-form reference
    const double apothem = std::sqrt(3.0) / 2.0;
    const double r = 0.9;
    const double beta = std::acos(apothem / r);
    const double seg = r * r * beta - apothem * std::sqrt(r * r - apothem * apothem);
    CHECK(developed_ball_area(dev, hexd, c, r) ==
          doctest::Approx(kPi * r * r - 6.0 * seg).epsilon(1e-12));
    CHECK(developed_sphere_length(dev, hexd, c, r) ==
          doctest::Approx(r * (2.0 * kPi - 12.0 * beta)).epsilon(1e-12));
    // disk covering everything: total area
    CHECK(developed_ball_area(dev, hexd, c, 3.0) ==
          doctest::Approx(hexd.total_measure()).epsilon(1e-12));
    CHECK(developed_sphere_length(dev, hexd, c, 3.0) == 0.0);
  }

  TEST_CASE("automatic method selection uses the development when sound") {
    const auto hexd = make_disk_hexagon();
    const auto at_center = ball_volume(hexd, MetricPoint::vertex(0), 0.5);
    CHECK(at_center.method == "exact");
    CHECK(at_center.half_width == 0.0);
    CHECK(at_center.value == doctest::Approx(kPi * 0.25).epsilon(1e-12));
    // quadrature agrees with the exact area
    SampleSpec spec;
    spec.level = 5;
    const auto q = ball_volume(hexd, MetricPoint::vertex(0), 0.9, BallMethod::kQuadrature, spec);
    const auto e = ball_volume(hexd, MetricPoint::vertex(0), 0.9, BallMethod::kExact);
    CHECK(std::abs(q.value - e.value) <= 5e-3);
    // glued flat torus cannot develop: falls back to quadrature
    const auto t = ball_volume(make_flat_torus(), MetricPoint::vertex(0), 0.3);
    CHECK(t.method == "quadrature");
    // curved octahedron cannot develop either
    const auto dev = develop_flat_surface(make_octahedron());
    CHECK_FALSE(dev.valid);
    CHECK_THROWS_AS(ball_volume(make_octahedron(), MetricPoint::vertex(0), 0.3,
                                BallMethod::kExact),
                    std::invalid_argument);
  }

  TEST_CASE("development of a single triangle") {
    const auto tri = make_single_triangle(3.0, 4.0, 5.0);
    const auto dev = develop_flat_surface(tri);
    CHECK(dev.valid);
    CHECK(developed_region_convex(dev, tri));
    CHECK(developed_ball_area(dev, tri, MetricPoint::vertex(0), 100.0) ==
          doctest::Approx(6.0).epsilon(1e-12));
    CHECK(developed_distance(dev, tri, MetricPoint::vertex(0), MetricPoint::vertex(1)) ==
          doctest::Approx(3.0).epsilon(1e-12));
  }

  TEST_CASE("measure estimates respect basic invariants") {
    const auto x = make_flat_torus();
    const auto v = MetricPoint::vertex(0);
    CHECK_THROWS_AS(ball_volume(x, v, -0.1), std::invalid_argument);
    SampleSpec spec;
    spec.level = 4;
    for (double r : {0.0, 0.2, 0.6}) {
      const auto q = ball_volume(x, v, r, BallMethod::kQuadrature, spec);
      CHECK(q.value >= 0.0);
      CHECK(q.value <= x.total_measure() + 1e-12);
      const auto s = sphere_measure(x, v, r, spec);
      CHECK(s.value >= 0.0);
    }
  }
}
