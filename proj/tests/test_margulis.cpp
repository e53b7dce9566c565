#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "polyscal/comparison.hpp"
#include "polyscal/complex.hpp"
#include "polyscal/margulis.hpp"
#include "polyscal/metric.hpp"

namespace {

using namespace polyscal;

constexpr double kPi = 3.14159265358979323846;
const double kInf = std::numeric_limits<double>::infinity();

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

// A point at arc-length distance d from the wedge point along the first
// petal (edge 0 runs from the wedge point and has length 1/3).
MetricPoint petal_point(double d) { return MetricPoint::on_edge(0, 3.0 * d); }

}  // namespace

TEST_SUITE("margulis") {
  TEST_CASE("based_space realizes vertex and edge basepoints") {
    const auto wedge = make_wedge_of_circles(3, 1.0);

    const auto at_vertex = based_space(wedge, MetricPoint::vertex(0), OracleKind::kFree);
    CHECK(at_vertex.basepoint == 0);
    CHECK(at_vertex.complex.vertex_count() == wedge.vertex_count());
    CHECK(at_vertex.complex.cell_count(1) == wedge.cell_count(1));
    CHECK(at_vertex.pres.generator_count() == 2);

    // Splitting an edge adds one vertex and one edge and keeps the group.
    const auto at_edge = based_space(wedge, MetricPoint::on_edge(1, 0.5), OracleKind::kFree);
    CHECK(at_edge.complex.vertex_count() == wedge.vertex_count() + 1);
    CHECK(at_edge.complex.cell_count(1) == wedge.cell_count(1) + 1);
    CHECK(at_edge.basepoint == wedge.vertex_count());
    CHECK(at_edge.pres.generator_count() == 2);
    CHECK(at_edge.original.dim == 1);
    CHECK(at_edge.complex.total_measure() == doctest::Approx(wedge.total_measure()));

    // Edge-interior basepoints are rejected when the edge bounds a 2-cell,
    // and 2-cell interiors are always rejected.
    const auto tri = make_single_triangle(1.0, 1.0, 1.0);
    CHECK_THROWS_AS((void)based_space(tri, MetricPoint::on_edge(0, 0.5), OracleKind::kFree),
                    std::invalid_argument);
    Eigen::VectorXd center(3);
    center << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    CHECK_THROWS_AS(
        (void)based_space(tri, MetricPoint::on_cell(2, 0, center), OracleKind::kFree),
        std::invalid_argument);
  }

  TEST_CASE("short_loops finds the petal classes at the right scales") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto bs = based_space(wedge, MetricPoint::vertex(0), OracleKind::kFree);

    const auto at_one = short_loops(bs, 1.0);
    REQUIRE(at_one.loops.size() == 4);  // both petals, both directions
    CHECK_FALSE(at_one.truncated);
    CHECK_FALSE(at_one.undecided);
    for (const auto& loop : at_one.loops) {
      CHECK(loop.length == doctest::Approx(1.0));
      CHECK(loop.basepoint == bs.basepoint);
      CHECK_FALSE(bs.oracle->trivial(loop.word));
    }
    // Closed under inversion: every loop's inverse class is also listed.
    for (const auto& loop : at_one.loops) {
      const std::string inv_key = bs.oracle->key(loop.word.inverse());
      const bool found = std::any_of(at_one.loops.begin(), at_one.loops.end(),
                                     [&](const LoopClass& other) {
                                       return bs.oracle->key(other.word) == inv_key;
                                     });
      CHECK(found);
    }

    CHECK(short_loops(bs, 0.5).loops.empty());

    // Off the wedge point only the nearer petal stays short: the other
    // petal's class costs an extra round trip to the wedge point.
    const auto off = based_space(wedge, petal_point(0.2), OracleKind::kFree);
    const auto near_only = short_loops(off, 1.2);
    REQUIRE(near_only.loops.size() == 2);
    CHECK(near_only.loops[0].length == doctest::Approx(1.0));
    const auto both = short_loops(off, 1.4 + 1e-6);
    CHECK(both.loops.size() == 4);

    CHECK_THROWS_AS((void)short_loops(bs, 0.0), std::invalid_argument);
  }

  TEST_CASE("growth matches free and abelian ball counts") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto bs = based_space(wedge, MetricPoint::vertex(0), OracleKind::kFree);
    const auto gens = short_loops(bs, 1.0).loops;

    SUBCASE("rank-two free growth is exact and classified exponential") {
      const GrowthOptions opts;
      const auto rep = growth(gens, 10, *bs.oracle, opts);
      REQUIRE(rep.depth == 10);
      for (int w = 0; w <= 10; ++w)
        CHECK(rep.ball_sizes[w] == 2 * static_cast<std::int64_t>(std::pow(3, w)) - 1);
      CHECK(rep.rate >= std::log(3.0) - 0.05);
      CHECK(rep.verdict == GrowthClass::kExponential);
      CHECK_FALSE(rep.truncated);
    }

    SUBCASE("rank-two abelian growth is quadratic and subexponential") {
      const auto torus = make_flat_torus();
      const auto tbs = based_space(torus, MetricPoint::vertex(0), OracleKind::kAbelianized);
      const auto tgens = short_loops(tbs, 1.0).loops;
      REQUIRE(tgens.size() == 4);
      const auto rep = growth(tgens, 8, *tbs.oracle);
      for (int w = 0; w <= 8; ++w)
        CHECK(rep.ball_sizes[w] == 2 * w * w + 2 * w + 1);
      CHECK(rep.verdict == GrowthClass::kSubexponential);
      CHECK(rep.fitted_degree == doctest::Approx(2.0).epsilon(0.15));
    }

    SUBCASE("a single abelian generator grows linearly") {
      const auto torus = make_flat_torus();
      const auto tbs = based_space(torus, MetricPoint::vertex(0), OracleKind::kAbelianized);
      const auto tgens = short_loops(tbs, 1.0).loops;
      const std::vector<LoopClass> one{tgens.front()};
      const auto rep = growth(one, 8, *tbs.oracle);
      for (int w = 0; w <= 8; ++w) CHECK(rep.ball_sizes[w] == 2 * w + 1);
      CHECK(rep.verdict == GrowthClass::kSubexponential);
      CHECK(rep.fitted_degree == doctest::Approx(1.0).epsilon(0.15));
    }

    SUBCASE("an empty generating set is trivially subexponential") {
      const auto rep = growth({}, 8, *bs.oracle);
      CHECK(rep.ball_sizes.back() == 1);
      CHECK(rep.verdict == GrowthClass::kSubexponential);
    }

    CHECK_THROWS_AS((void)growth(gens, -1, *bs.oracle), std::invalid_argument);
  }

  TEST_CASE("margulis_function brackets the exponential transition") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(0.25 * i);

    // At distance d from the wedge point the second petal class appears at
    // length 1 + 2d, where growth turns exponential.
    const double expected[3] = {1.0, 1.2, 1.4};
    const double offsets[3] = {0.0, 0.1, 0.2};
    MargulisEstimate ests[3];
    for (int k = 0; k < 3; ++k) {
      const MetricPoint p =
          offsets[k] == 0.0 ? MetricPoint::vertex(0) : petal_point(offsets[k]);
      ests[k] = margulis_function(wedge, p, OracleKind::kFree, 8, grid);
      CAPTURE(offsets[k]);
      CHECK(ests[k].determined);
      CHECK(ests[k].lower <= expected[k] + 1e-9);
      CHECK(ests[k].upper >= expected[k] - 1e-9);
      CHECK(ests[k].upper - ests[k].lower == doctest::Approx(0.25));
      REQUIRE(ests[k].verdicts.size() == grid.size());
    }
    CHECK(ests[0].upper == doctest::Approx(1.0));
    CHECK(ests[0].lower == doctest::Approx(0.75));
    CHECK(ests[1].upper == doctest::Approx(1.25));
    CHECK(ests[2].upper == doctest::Approx(1.5));

    // Two-Lipschitz modulo one grid step across the sampled points.
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        const double d = std::abs(offsets[a] - offsets[b]);
        CHECK(std::abs(ests[a].upper - ests[b].upper) <= 2.0 * d + 0.25 + 1e-9);
        CHECK(std::abs(ests[a].lower - ests[b].lower) <= 2.0 * d + 0.25 + 1e-9);
      }

    // The abelian torus never turns exponential: the bracket stays open.
    const auto torus = make_flat_torus();
    const auto est =
        margulis_function(torus, MetricPoint::vertex(0), OracleKind::kAbelianized, 8, grid);
    CHECK(est.upper == kInf);
    CHECK(est.lower == doctest::Approx(2.5));
    for (const auto v : est.verdicts) CHECK(v != GrowthClass::kExponential);

    CHECK_THROWS_AS(
        (void)margulis_function(wedge, MetricPoint::vertex(0), OracleKind::kFree, 8, {}),
        std::invalid_argument);
    CHECK_THROWS_AS((void)margulis_function(wedge, MetricPoint::vertex(0), OracleKind::kFree, 8,
                                            {0.5, 0.25}),
                    std::invalid_argument);
  }

  TEST_CASE("sys_function measures the shortest essential loop") {
    CHECK(sys_function(make_wedge_of_circles(3, 1.0), MetricPoint::vertex(0),
                       OracleKind::kFree) == doctest::Approx(1.0));
    CHECK(sys_function(make_flat_torus(), MetricPoint::vertex(0), OracleKind::kAbelianized) ==
          doctest::Approx(1.0));
    CHECK(sys_function(make_cycle(6, 3.0), MetricPoint::vertex(2), OracleKind::kFree) ==
          doctest::Approx(3.0));
    // Based at a petal midpoint the nearest class is still the own petal.
    CHECK(sys_function(make_wedge_of_circles(3, 1.0), petal_point(0.1), OracleKind::kFree) ==
          doctest::Approx(1.0));

    // Simply connected spaces have no essential loop at all.
    CHECK(sys_function(make_disk_hexagon(), MetricPoint::vertex(0), OracleKind::kAbelianized) ==
          kInf);
    CHECK(sys_function(make_interval(4, 1.0), MetricPoint::vertex(0), OracleKind::kFree) == kInf);

    // A truncated scan refuses to certify anything.
    ShortLoopOptions tiny;
    tiny.max_states = 3;
    CHECK_THROWS_AS(
        (void)sys_function(make_cycle(6, 3.0), MetricPoint::vertex(0), OracleKind::kFree, tiny),
        std::runtime_error);
  }

  TEST_CASE("find_free_pair certifies the wedge and rejects abelian candidates") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto search =
        find_free_pair(wedge, MetricPoint::vertex(0), 1.0, 1.0, OracleKind::kFree);
    const auto& cert = search.certificate;
    REQUIRE(cert.found);
    CHECK(cert.alpha1.length == doctest::Approx(1.0));
    CHECK(cert.alpha2.length == doctest::Approx(1.0));
    CHECK(cert.displacement == doctest::Approx(1.0));
    CHECK(cert.displacement_bound == doctest::Approx(2.0));
    CHECK(cert.witness_depth == 6);
    CHECK_FALSE(cert.undecided);
    CHECK_FALSE(search.based.oracle->equal(cert.alpha1.word, cert.alpha2.word));
    REQUIRE(cert.orbit_sizes.size() == 7);
    for (int w = 0; w <= 6; ++w)
      CHECK(cert.orbit_sizes[w] == 2 * static_cast<std::int64_t>(std::pow(3, w)) - 1);
    REQUIRE(search.patch.has_value());
    CHECK(search.patch->safe_radius() >= 2.0);

    // All candidate pairs on the torus collide by commutativity.
    const auto torus = make_flat_torus();
    const auto none =
        find_free_pair(torus, MetricPoint::vertex(0), 1.0, 1.0, OracleKind::kAbelianized);
    CHECK_FALSE(none.certificate.found);
    CHECK(contains(none.certificate.note, "collision"));
    CHECK(contains(none.certificate.note, "g2 g1 = g1 g2"));
    CHECK_FALSE(none.patch.has_value());

    CHECK_THROWS_AS(
        (void)find_free_pair(wedge, MetricPoint::vertex(0), 0.5, 1.0, OracleKind::kFree),
        std::invalid_argument);
    CHECK_THROWS_AS(
        (void)find_free_pair(wedge, MetricPoint::vertex(0), 1.0, 0.0, OracleKind::kFree),
        std::invalid_argument);
  }

  TEST_CASE("minimize_orbit replaces short offenders by escaping powers") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto search =
        find_free_pair(wedge, MetricPoint::vertex(0), 1.0, 1.0, OracleKind::kFree);
    REQUIRE(search.certificate.found);
    REQUIRE(search.patch.has_value());
    const auto& patch = *search.patch;

    SUBCASE("a clean certificate is a fixed point") {
      const auto out = minimize_orbit(search.certificate, patch, 0.5);
      CHECK(out.minimized);
      CHECK(out.note.empty());
      CHECK(patch.oracle()->equal(out.alpha1.word, search.certificate.alpha1.word));
      CHECK(patch.oracle()->equal(out.alpha2.word, search.certificate.alpha2.word));
    }

    SUBCASE("offending generators are squared out of the ball") {
      const auto out = minimize_orbit(search.certificate, patch, 1.5);
      CHECK(out.minimized);
      CHECK(contains(out.note, "power k=2"));
      CHECK(out.alpha1.length >= 1.5);
      CHECK(out.alpha2.length >= 1.5);
      CHECK(out.displacement == doctest::Approx(2.0));
      // The final pair is the squares of the original generators.
      CHECK(out.alpha1.word.length() == 2);
      CHECK(out.alpha2.word.length() == 2);
    }

    SUBCASE("a missing certificate is reported, not crashed on") {
      FreePairCertificate empty;
      const auto out = minimize_orbit(empty, patch, 1.0);
      CHECK_FALSE(out.minimized);
      CHECK(contains(out.note, "no certificate"));
    }

    CHECK_THROWS_AS((void)minimize_orbit(search.certificate, patch, 0.0),
                    std::invalid_argument);
  }

  TEST_CASE("orbit_disjointness separates translated balls") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto search =
        find_free_pair(wedge, MetricPoint::vertex(0), 1.0, 1.0, OracleKind::kFree);
    REQUIRE(search.certificate.found);
    REQUIRE(search.patch.has_value());

    // Every nontrivial reduced word moves the basepoint by at least one, so
    // balls of radius 1/2 translated around the orbit stay disjoint.
    const auto ok = orbit_disjointness(search.certificate, *search.patch, 1.0, 3);
    CHECK(ok.disjoint);
    CHECK(ok.complete);
    CHECK(ok.min_displacement == doctest::Approx(1.0));
    CHECK(ok.points >= 17);  // the whole radius-two orbit ball is probed

    // At a larger separation demand the bare generators are too short.
    const auto tight = orbit_disjointness(search.certificate, *search.patch, 1.2, 3);
    CHECK_FALSE(tight.disjoint);
    CHECK(tight.complete);
    CHECK(tight.min_displacement < 1.2);

    const FreePairCertificate missing;
    CHECK_FALSE(orbit_disjointness(missing, *search.patch, 1.0, 3).disjoint);
  }

  TEST_CASE("exponential_ball_bound evaluates the tree lower bound") {
    // One doubling step of the free orbit: (c_1/2) * mu0 * (3^1 - 1) = 4
    // at n = 1, mu0 = 1, kappa = 1, r = 4.5.
    CHECK(exponential_ball_bound(1, 1.0, 1.0, 4.5) == doctest::Approx(4.0));
    // At the domain edge r = mu0/2 no step has completed yet.
    CHECK(exponential_ball_bound(1, 1.0, 1.0, 0.5) == doctest::Approx(0.0));
    CHECK(exponential_ball_bound(2, 1.0, 1.0, 4.5) == doctest::Approx(kPi / 4.0));
    // Monotone in r through the step structure.
    CHECK(exponential_ball_bound(1, 1.0, 1.0, 6.5) >= exponential_ball_bound(1, 1.0, 1.0, 4.5));

    CHECK_THROWS_AS((void)exponential_ball_bound(1, 1.0, 1.0, 0.3), std::domain_error);
    CHECK_THROWS_AS((void)exponential_ball_bound(0, 1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)exponential_ball_bound(1, 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)exponential_ball_bound(1, 1.0, 0.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("theorem35_experiment runs the fat-point pipeline on the wedge") {
    const auto wedge = make_wedge_of_circles(3, 1.0);
    const auto rep = theorem35_experiment(wedge, OracleKind::kFree, 1.0);

    CHECK(rep.obstruction.empty());
    CHECK(rep.n == 1);
    CHECK(rep.sys == doctest::Approx(1.0));
    CHECK(rep.mu_hat == doctest::Approx(1.5));
    CHECK(rep.sweep_tag == OutcomeTag::kFatPoint);
    REQUIRE(rep.fat_point.has_value());
    CHECK(rep.fat_point->verified);
    CHECK(rep.fat_point->rho_at_point == doctest::Approx(0.75));

    // The deepest point of a petal sees its own class at one and the other
    // petal only at two, so the transition sits at two.
    CHECK(rep.mu0 == doctest::Approx(2.0));
    REQUIRE(rep.pair.has_value());
    CHECK(rep.pair->found);
    CHECK(rep.pair->minimized);
    REQUIRE(rep.orbit.has_value());
    CHECK(rep.orbit->disjoint);
    CHECK(rep.orbit->min_displacement >= 2.0 - 1e-9);

    REQUIRE(rep.rows.size() == 5);
    CHECK(rep.bounds_hold);
    const double expected_measure[5] = {4.0, 7.0, 25.0, 79.0, 241.0};
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      CAPTURE(rep.rows[i].r);
      CHECK(rep.rows[i].measured.value == doctest::Approx(expected_measure[i]));
      CHECK(rep.rows[i].lower_ok);
      CHECK(rep.rows[i].cap_ok);
      CHECK(rep.rows[i].measured.value >= rep.rows[i].lower_bound);
    }

    CHECK(rep.total_volume == doctest::Approx(2.0));
    CHECK(rep.mu0_bound_derived == doctest::Approx(4.0));
    CHECK(rep.mu0_within_derived);
    CHECK(rep.delta_n == doctest::Approx(0.5));
    CHECK(rep.lambda_rescale == doctest::Approx(0.25));
    CHECK(contains(rep.notes, "dimension one"));
    CHECK(contains(rep.notes, "derived form"));
  }

  TEST_CASE("theorem35_experiment records the torus collapse obstruction") {
    const auto torus = make_flat_torus();
    Theorem35Budgets budgets;
    budgets.sweep.subdivision_level = 2;
    const auto rep = theorem35_experiment(torus, OracleKind::kAbelianized, 1.0, budgets);

    CHECK(rep.n == 2);
    CHECK(rep.sys == doctest::Approx(1.0));
    CHECK(rep.mu_hat == doctest::Approx(2.5));
    CHECK(rep.sweep_tag == OutcomeTag::kCertificate);
    REQUIRE(rep.certificate.has_value());
    CHECK(rep.certificate->multiplicity >= 1);
    CHECK(contains(rep.obstruction, "collapses"));
    // The free-pair search still runs and pins the algebraic obstruction.
    REQUIRE(rep.pair.has_value());
    CHECK_FALSE(rep.pair->found);
    CHECK(contains(rep.obstruction, "collision"));
    CHECK(rep.rows.empty());
  }

  TEST_CASE("theorem35_experiment reports simply connected inputs") {
    const auto disk = make_disk_hexagon();
    const auto rep = theorem35_experiment(disk, OracleKind::kAbelianized, 1.0);
    CHECK(rep.sys == kInf);
    CHECK(contains(rep.obstruction, "no nontrivial loops"));
    CHECK(rep.sweep_tag == OutcomeTag::kInconclusive);
    CHECK(rep.rows.empty());
    CHECK_FALSE(rep.pair.has_value());
  }
}
