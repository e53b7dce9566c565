#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "polyscal/complex.hpp"
#include "polyscal/cover.hpp"
#include "polyscal/document.hpp"
#include "polyscal/metric.hpp"
#include "reference_values.hpp"

namespace {

using namespace polyscal;

constexpr double kPi = 3.14159265358979323846;

DeckWord word_of(std::initializer_list<int> letters) {
  DeckWord w;
  for (int l : letters) w = w.appended(l);
  return w;
}

double tree_ball_length(double r) {
  const double k = std::floor(r);
  const double p3 = std::pow(3.0, k);
  return 2.0 * (p3 - 1.0) + 4.0 * (r - k) * p3;
}

}  // namespace

TEST_SUITE("cover") {
  TEST_CASE("deck words reduce, invert and order deterministically") {
    const DeckWord a = DeckWord::generator(0);
    const DeckWord b = DeckWord::generator(1);
    const DeckWord ai = DeckWord::generator(0, true);
    CHECK(a.concat(ai).empty());
    CHECK(free_reduce(word_of({1, 2, -2, -1})).empty());
    const DeckWord ab = a.concat(b);
    CHECK(ab.length() == 2);
    CHECK(ab.inverse() == word_of({-2, -1}));
    CHECK(ab.inverse().concat(ab).empty());
    CHECK(shortlex_less(a, ab));                       // shorter first
    CHECK(shortlex_less(a, ai));                       // generator before inverse
    CHECK(shortlex_less(ai, b));                       // then next generator
    CHECK_FALSE(shortlex_less(ab, ab));
    CHECK(ab.to_string({"a", "b"}) == "a b");
    CHECK(ai.to_string({"a", "b"}) == "a^-1");
    CHECK(DeckWord::identity().to_string() == "1");
  }

  TEST_CASE("presentation of the wedge of circles") {
    const auto w = make_wedge_of_circles();
    const auto pres = presentation(w);
    CHECK(pres.generator_count() == 2);
    CHECK(pres.generator_count() ==
          w.cell_count(1) - w.vertex_count() + 1);  // E - V + 1
    CHECK(pres.relators.empty());
    CHECK(abelianization_rank(pres) == 2);
  }

  TEST_CASE("presentation of the flat torus") {
    const auto x = make_flat_torus();
    const auto pres = presentation(x);
    CHECK(pres.generator_count() == 3);  // one vertex, three loops
    REQUIRE(pres.relators.size() == 2);
    for (const auto& r : pres.relators) CHECK(r.length() == 3);
    // each relator abelianizes to +-(1,1,-1) in the (a,b,d) basis
    const auto m = relator_exponent_matrix(pres);
    for (int i = 0; i < m.rows(); ++i) {
      CHECK(std::abs(m(i, 0)) == 1);
      CHECK(m(i, 0) == m(i, 1));
      CHECK(m(i, 2) == -m(i, 0));
    }
    CHECK(abelianization_rank(pres) == 2);
    CHECK(pres.generator_names == std::vector<std::string>{"a", "b", "d"});
  }

  TEST_CASE("presentations of simply connected complexes") {
    const auto tri = make_single_triangle(1.0, 1.0, 1.0);
    const auto pt = presentation(tri);
    CHECK(pt.generator_count() == 1);  // E - V + 1 = 1, killed by the relator
    REQUIRE(pt.relators.size() == 1);
    CHECK(pt.relators[0].length() == 1);
    CHECK(abelianization_rank(pt) == 0);

    const auto hexd = make_disk_hexagon();
    const auto ph = presentation(hexd);
    CHECK(ph.generator_count() == 6);
    CHECK(ph.relators.size() == 6);
    CHECK(abelianization_rank(ph) == 0);
  }

  TEST_CASE("oracles decide word identity soundly") {
    const auto x = make_flat_torus();
    const auto pres = presentation(x);
    const DeckWord ab = word_of({1, 2});
    const DeckWord ba = word_of({2, 1});
    const DeckWord d = word_of({3});

    const auto free_o = make_free_oracle(pres);
    CHECK(free_o->equal(ab, ab));
    CHECK_FALSE(free_o->equal(ab, ba));
    CHECK_FALSE(free_o->trivial(word_of({1})));

    const auto abel = make_abelianized_oracle(pres);
    bool und = true;
    CHECK(abel->equal(ab, ba, &und));
    CHECK_FALSE(und);
    CHECK(abel->equal(ab, d));  // the diagonal relator identifies ab with d
    CHECK(abel->trivial(word_of({1, 2, -3})));
    CHECK_FALSE(abel->equal(ab, word_of({1})));

    const auto closure = make_relator_closure_oracle(pres, 3);
    CHECK(closure->trivial(pres.relators[0], &und));
    CHECK_FALSE(und);
    CHECK(closure->equal(ab, d));
    CHECK(closure->equal(ab, ba));  // via the two torus relators
    // a deep word exhausts the bounded search and is reported undecided
    DeckWord deep;
    for (int i = 0; i < 6; ++i) deep = deep.concat(word_of({1, 2, -1, -2}));
    const auto tiny = make_relator_closure_oracle(pres, 1);
    tiny->trivial(deep, &und);
    CHECK(und);
  }

  TEST_CASE("free cover of the wedge is the 4-regular tree") {
    const auto w = make_wedge_of_circles();
    const auto pres = presentation(w);
    const auto patch = build_cover(w, make_free_oracle(pres), 4.9);
    CHECK(patch.certified_radius() >= 4.9);
    CHECK(patch.safe_radius() >= 4.5);
    CHECK_FALSE(patch.whole_cover());
    CHECK(patch.undecided_count() == 0);
    CHECK(patch.vertex_info(patch.basepoint_vertex()).word.empty());

    for (const auto& [r, expected] : reference::kTreeBallCases) {
      const auto est = cover_ball_volume(patch, r);
      CHECK(est.method == "exact");
      CHECK(est.half_width == 0.0);
      CHECK(est.value == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(cover_ball_volume(patch, 1.7).value ==
          doctest::Approx(tree_ball_length(1.7)).epsilon(1e-12));
    CHECK(cover_ball_volume(patch, 3.0).value == doctest::Approx(52.0).epsilon(1e-12));

    // local isometry below half the systole
    const auto base_ball = ball_volume(w, MetricPoint::vertex(0), 0.4);
    CHECK(base_ball.value == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(cover_ball_volume(patch, 0.4).value == doctest::Approx(1.6).epsilon(1e-12));

    // deck invariance at a generator translate
    const auto moved = cover_ball_volume_at(patch, word_of({1}), 1.0);
    CHECK(moved.value == doctest::Approx(4.0).epsilon(1e-12));
    // shortlex representatives: the translate is labeled by the generator
    const int tv = patch.find_vertex(0, word_of({1}));
    REQUIRE(tv >= 0);
    CHECK(patch.vertex_info(tv).word == word_of({1}));

    CHECK_THROWS_WITH_AS(cover_ball_volume(patch, 200.0), "patch too small",
                         std::invalid_argument);
  }

  TEST_CASE("abelianized cover of the torus is the euclidean plane") {
    const auto x = make_flat_torus();
    const auto pres = presentation(x);
    const auto patch = build_cover(x, make_abelianized_oracle(pres), 2.0 + std::sqrt(2.0) + 0.01);
    CHECK(patch.safe_radius() >= 2.0);
    CHECK(patch.undecided_count() == 0);

    // every lifted cell is isometric to its base cell
    const auto& pc = patch.complex();
    for (int e = 0; e < pc.cell_count(1); ++e) {
      const double len = pc.cell(1, e).length;
      CHECK((std::abs(len - 1.0) < 1e-12 || std::abs(len - std::sqrt(2.0)) < 1e-12));
    }
    for (int t = 0; t < pc.cell_count(2); ++t)
      CHECK(pc.cell_measure(2, t) == doctest::Approx(0.5).epsilon(1e-12));

    const auto b2 = cover_ball_volume(patch, 2.0);
    CHECK(b2.method == "exact");  // the plane patch develops and is convex
    CHECK(b2.value == doctest::Approx(4.0 * kPi).epsilon(1e-9));
    CHECK(cover_ball_volume(patch, 1.0).value == doctest::Approx(kPi).epsilon(1e-9));

    // local isometry below half the systole
    SampleSpec spec;
    spec.level = 5;
    const auto base = ball_volume(x, MetricPoint::vertex(0), 0.4, BallMethod::kQuadrature, spec);
    const auto up = cover_ball_volume(patch, 0.4);
    CHECK(std::abs(base.value - up.value) <= 3e-3);

    // deck invariance and shortlex labels: ab and d name the same translate
    const int tv = patch.find_vertex(0, word_of({1, 2}));
    REQUIRE(tv >= 0);
    CHECK(tv == patch.find_vertex(0, word_of({3})));
    CHECK(patch.vertex_info(tv).word == word_of({3}));  // shortlex prefers length 1
    const auto moved = cover_ball_volume_at(patch, word_of({1}), 1.0);
    CHECK(moved.value == doctest::Approx(kPi).epsilon(1e-9));

    // patches are first-class mesh documents
    const auto round = complex_from_json(complex_to_json(pc));
    CHECK(round.vertex_count() == pc.vertex_count());
    CHECK(round.cell_count(1) == pc.cell_count(1));
    CHECK(round.cell_count(2) == pc.cell_count(2));
    CHECK(round.total_measure() == doctest::Approx(pc.total_measure()).epsilon(1e-12));
  }

  TEST_CASE("covers of simply connected complexes equal the base") {
    const auto hexd = make_disk_hexagon();
    const auto pres = presentation(hexd);
    for (const auto kind : {OracleKind::kAbelianized, OracleKind::kRelatorClosure}) {
      const auto patch = build_cover(hexd, make_oracle(pres, kind), 10.0);
      CHECK(patch.whole_cover());
      CHECK(std::isinf(patch.safe_radius()));
      CHECK(patch.complex().vertex_count() == hexd.vertex_count());
      CHECK(patch.complex().cell_count(2) == hexd.cell_count(2));
      const auto est = cover_ball_volume(patch, 0.5);
      CHECK(est.value == doctest::Approx(kPi / 4.0).epsilon(1e-12));
    }

    const auto oct = make_octahedron();
    const auto po = presentation(oct);
    const auto patch = build_cover(oct, make_abelianized_oracle(po), 5.0);
    CHECK(patch.whole_cover());
    CHECK(patch.complex().vertex_count() == 6);
    CHECK(patch.complex().cell_count(2) == 8);
  }

  TEST_CASE("free oracle refuses complexes with 2-cells") {
    const auto x = make_flat_torus();
    const auto pres = presentation(x);
    CHECK_THROWS_AS(build_cover(x, make_free_oracle(pres), 1.0), std::invalid_argument);
  }

  TEST_CASE("max ball profile lower-bounds the cover growth") {
    const auto x = make_flat_torus();
    const auto torus = max_ball_profile(x, OracleKind::kAbelianized, {1.0, 2.0}, {0});
    CHECK(torus.lower_bound);
    CHECK(torus.value[0].value == doctest::Approx(kPi).epsilon(1e-9));
    CHECK(torus.value[1].value == doctest::Approx(4.0 * kPi).epsilon(1e-9));
    CHECK(torus.value[0].value <= torus.value[1].value);

    const auto w = make_wedge_of_circles();
    const auto wedge = max_ball_profile(w, OracleKind::kFree, {3.0}, {0});
    CHECK(wedge.value[0].value == doctest::Approx(52.0).epsilon(1e-12));

    const auto hexd = make_disk_hexagon();
    const auto disk = max_ball_profile(hexd, OracleKind::kAbelianized, {0.5}, {0});
    CHECK(disk.value[0].value ==
          doctest::Approx(ball_volume(hexd, MetricPoint::vertex(0), 0.5).value).epsilon(1e-12));
  }
}
