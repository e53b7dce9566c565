#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "polyscal/complex.hpp"

namespace polyscal {

/// Result of a measure computation. `method` is "exact", "quadrature" or
/// "monte-carlo". `half_width` is a 99% confidence half-width for sampled
/// estimates, an a-posteriori refinement estimate for quadrature, and 0 for
/// exact values.
struct MeasureEstimate {
  double value = 0.0;
  std::string method = "exact";
  double half_width = 0.0;
  std::uint64_t samples = 0;
};

/// Tuning for discretized and sampled measures. `level` controls the lattice
/// refinement (2^level segments per edge); sampling is counter-seeded, so
/// results are deterministic for fixed (seed, level, method) regardless of
/// worker count.
struct SampleSpec {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
  int level = 5;
  int workers = 1;
};

/// One-source distance labels on a refinement graph: lattice nodes on the
/// (n-1)-skeleton, 2^level segments per edge, joined by straight in-simplex
/// chords. Every label is the length of an actual path, so labels
/// over-estimate the intrinsic distance; `error_for(d)` bounds the excess
/// for targets at distance about `d`. Exact for 1-complexes.
///
/// The field keeps a pointer to the complex; it must outlive the field.
class DistanceField {
 public:
  /// Upper-bound distance from the source to q.
  double eval(const MetricPoint& q) const;
  /// Same, for a point given by its top cell (index in dimension n) and
  /// Cartesian coordinates in that cell's corner frame.
  double eval_at(int top_cell, const Eigen::VectorXd& pos) const;
  /// Label of a complex vertex.
  double vertex_label(int v) const;

  const MetricPoint& source() const;
  int level() const;
  /// Additive error bound valid for all evaluations (uses the furthest
  /// reachable label).
  double error_bound() const;
  /// Additive error bound for targets at upper-bound distance `d`.
  double error_for(double d) const;
  /// True when labels are exact (1-complexes).
  bool exact() const;
  /// Largest finite label over graph nodes.
  double reach() const;
  bool all_reachable() const;
  std::int64_t node_count() const;
  /// Smallest label among the lattice nodes of one top cell; +inf when
  /// unreachable. Lower-bounds eval() over that cell.
  double min_label_in_top(int top_cell) const;

  struct Impl;

 private:
  friend DistanceField build_distance_field(const SimplicialLengthComplex&, const MetricPoint&,
                                            int);
  std::shared_ptr<const Impl> impl_;
};

/// Builds the refinement graph at 2^level segments per edge and runs a
/// shortest-path sweep from `source`. Requires a pure-dimensional complex
/// (every maximal cell of full dimension).
DistanceField build_distance_field(const SimplicialLengthComplex& x, const MetricPoint& source,
                                   int level);

struct DistanceResult {
  double value = 0.0;
  double error_bound = 0.0;
  int level = 0;
};

/// Upper-bound geodesic distance with guarantee d <= value <= d +
/// error_bound, refining until error_bound <= resolution (or an internal
/// node budget is hit, in which case the returned error_bound is the
/// achieved one). Symmetric up to roundoff. Throws std::runtime_error
/// ("unreachable") when p and q lie in different components.
DistanceResult distance(const SimplicialLengthComplex& x, const MetricPoint& p,
                        const MetricPoint& q, double resolution);

enum class BallMethod {
  kAuto,        // exact for n=1 and convex developable flats, else quadrature
  kExact,       // 1-complexes and developable flat surfaces only (throws otherwise)
  kQuadrature,  // piecewise-linear sublevel measure on a refined lattice
  kMonteCarlo,  // stratified sampling over refined simplices
};

/// n-measure of the metric ball B(x, r). Exact for 1-complexes (interval
/// arithmetic on edges). Monotone non-decreasing in r at fixed seed, level
/// and method.
MeasureEstimate ball_volume(const SimplicialLengthComplex& x, const MetricPoint& center, double r,
                            BallMethod method = BallMethod::kAuto, const SampleSpec& spec = {});

/// (n-1)-measure of the distance-r level set, by piecewise-linear level
/// extraction per refined simplex (lexicographic tie handling via label
/// perturbation). Requires n >= 2; throws std::invalid_argument
/// ("n >= 2 required") for 1-complexes.
MeasureEstimate sphere_measure(const SimplicialLengthComplex& x, const MetricPoint& center,
                               double r, const SampleSpec& spec = {});

/// 1-complex counterpart of sphere_measure: number of points at distance
/// exactly r from the center (finite for r > 0).
int sphere_point_count(const SimplicialLengthComplex& x, const MetricPoint& center, double r);

/// Coarea / Eilenberg diagnostic at one center and radius:
///   lhs  = trapezoid of sphere_measure over `steps` slices of [0, r],
///   rhs  = ball_volume(x, center, r) by quadrature,
///   ratio = lhs / rhs (defined as 1 when both vanish, e.g. r = 0).
/// The coarea formula predicts ratio -> 1 under refinement; the Eilenberg
/// inequality (coefficient 2 v_{n-1} / v_n for the 1-Lipschitz distance
/// function) gives lhs <= eilenberg_coefficient * rhs * (1 + 5% slack).
struct CoareaReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 1.0;
  int steps = 0;
  double eilenberg_coefficient = 0.0;
  bool eilenberg_ok = true;
};

CoareaReport coarea_check(const SimplicialLengthComplex& x, const MetricPoint& center, double r,
                          int steps, const SampleSpec& spec = {});

/// Plane development of a locally flat 2-complex: per-vertex coordinates
/// obtained by breadth-first unrolling of triangles across shared edges.
/// `valid` requires every triangle placed, every vertex assigned a single
/// coordinate pair (re-encounters agree within tolerance), which in
/// particular fails for closed surfaces and glued-corner complexes; cover
/// patches with distinct lifted vertices and flat embeddable disks succeed.
struct FlatDevelopment {
  bool valid = false;
  double max_mismatch = 0.0;
  int base_top = 0;
  std::vector<double> x;
  std::vector<double> y;
};

FlatDevelopment develop_flat_surface(const SimplicialLengthComplex& x, int base_top = 0);

/// Plane image of a point under a development.
std::pair<double, double> developed_point(const FlatDevelopment& dev,
                                          const SimplicialLengthComplex& x, const MetricPoint& p);

/// Euclidean distance between developed images. Equals the intrinsic
/// distance when the straight segment between the images is covered by the
/// developed triangles (convex developed regions; cover patches within
/// their completeness radius).
double developed_distance(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                          const MetricPoint& p, const MetricPoint& q);

/// Exact area of { y : |dev(y) - dev(center)| <= r } as a sum of closed-form
/// disk/triangle intersection areas. Equals the metric ball area under the
/// same coverage hypothesis as developed_distance.
double developed_ball_area(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                           const MetricPoint& center, double r);

/// Exact length of the radius-r circle inside the developed triangles.
double developed_sphere_length(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                               const MetricPoint& center, double r);

/// True when the developed region has a single convex boundary loop, which
/// makes developed distances and ball areas exact for all interior points.
bool developed_region_convex(const FlatDevelopment& dev, const SimplicialLengthComplex& x);

/// True when the closed disk of radius r about the developed image of
/// `center` stays clear of every boundary or non-manifold edge and of every
/// cone vertex. The covered disk is then an unbranched boundaryless flat
/// covering, so it lifts isometrically sheet by sheet and the wedge-sum
/// ball area is exact for this center and radius even when the developed
/// region is not convex (sheet count is confirmed by the caller via the
/// area total).
bool developed_disk_isometric(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                              const MetricPoint& center, double r);

/// Area of the intersection of the disk of radius r about (cx, cy) with the
/// triangle (ax, ay), (bx, by), (qx, qy). Closed form; orientation
/// independent.
double disk_triangle_area(double cx, double cy, double r, double ax, double ay, double bx,
                          double by, double qx, double qy);

}  // namespace polyscal
