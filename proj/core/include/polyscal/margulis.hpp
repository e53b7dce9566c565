#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polyscal/collapse.hpp"
#include "polyscal/comparison.hpp"
#include "polyscal/complex.hpp"
#include "polyscal/cover.hpp"
#include "polyscal/metric.hpp"

namespace polyscal {

/// A based loop class: the deck word of an edge-path loop together with the
/// realized length of its shortest known representative. Lengths are exact
/// on 1-complexes and upper bounds within one subdivision step otherwise.
struct LoopClass {
  DeckWord word;
  double length = 0.0;
  int basepoint = 0;  // vertex index in the based complex
};

/// A complex with the chosen basepoint realized as a vertex (edges are split
/// when the point lies in an edge interior), plus the group machinery based
/// there. All loop words live in the fundamental group based at this vertex.
struct BasedSpace {
  SimplicialLengthComplex complex;
  int basepoint = 0;
  MetricPoint original;  // the requested point, in the input complex
  Presentation pres;
  std::shared_ptr<const QuotientOracle> oracle;
};

/// Realizes `p` as a vertex and bases the presentation and oracle there.
/// Vertex points work on any complex; edge-interior points require the edge
/// to be free of 2-cells (1-complexes). Throws std::invalid_argument
/// otherwise.
BasedSpace based_space(const SimplicialLengthComplex& x, const MetricPoint& p, OracleKind kind,
                       int closure_depth = 3);

struct ShortLoopOptions {
  int max_states = 200000;  // Dijkstra states over (vertex, deck class)
};

struct ShortLoopReport {
  std::vector<LoopClass> loops;  // nontrivial, symmetric, sorted by length
  bool truncated = false;        // state budget hit before exhausting length L
  bool undecided = false;        // oracle failed to canonicalize some word
};

/// Shortest based edge-path loop per deck class with realized length at most
/// L (plus a 1e-9 tie slack), found by Dijkstra over the oracle quotient of
/// the cover skeleton. The result is closed under inversion and sorted by
/// length, then shortlex.
ShortLoopReport short_loops(const BasedSpace& bs, double L, const ShortLoopOptions& opts = {});

enum class GrowthClass { kSubexponential, kExponential, kUndetermined };

struct GrowthOptions {
  /// Exponential when every step rate in the trailing window reaches this
  /// (default log(3)/2, the Definition-3.3 rate at kappa_ref = 1).
  double exponential_threshold = 0.5493061443340549;
  int window = 3;              // trailing window for rate and degree fits
  double residual_tol = 0.25;  // max |log size - power-law fit| in the window
  std::int64_t state_budget = 400000;
};

struct GrowthReport {
  std::vector<std::int64_t> ball_sizes;  // |S^w| for w = 0..depth
  int depth = 0;                         // depth actually reached
  double rate = 0.0;                     // trailing-window estimate of log-growth
  double fitted_degree = 0.0;            // trailing-window power-law exponent
  GrowthClass verdict = GrowthClass::kUndetermined;
  bool truncated = false;
  bool undecided = false;
};

/// Ball sizes of the subgroup generated by S in the oracle quotient
/// (identity is implicit; S is symmetrized). Classification: exponential
/// when the trailing step rates all clear the threshold; subexponential when
/// the trailing sizes match a power law within the residual tolerance;
/// undetermined otherwise or on oracle indecision.
GrowthReport growth(const std::vector<LoopClass>& S, int depth, const QuotientOracle& oracle,
                    const GrowthOptions& opts = {});

struct MargulisEstimate {
  MetricPoint x;                   // basepoint in the input complex
  double lower = 0.0;              // largest tested scale with subexponential growth
  double upper = std::numeric_limits<double>::infinity();  // smallest exponential scale
  int depth = 0;
  bool determined = false;         // false when every grid point was undetermined
  std::vector<double> grid;
  std::vector<GrowthClass> verdicts;  // aligned with grid
};

/// Brackets the Margulis scale at x: for each grid value mu, the loops of
/// length at most mu feed a growth report; the estimate straddles the first
/// exponential transition. The grid must be finite and increasing.
MargulisEstimate margulis_function(const SimplicialLengthComplex& x, const MetricPoint& p,
                                   OracleKind kind, int depth, const std::vector<double>& mu_grid,
                                   const GrowthOptions& opts = {},
                                   const ShortLoopOptions& loop_opts = {});

/// Length of the shortest based loop that the oracle certifies nontrivial,
/// or +infinity when no such loop exists (simply connected spaces under a
/// sound oracle). Throws std::runtime_error when the search budget runs out
/// before the scan is complete.
double sys_function(const SimplicialLengthComplex& x, const MetricPoint& p, OracleKind kind,
                    const ShortLoopOptions& opts = {});

struct FreePairOptions {
  int witness_depth = 6;    // w*: reduced words checked for orbit collisions
  int max_pairs = 64;       // candidate pairs tried
  double patch_radius = 0.0;  // 0: sized from the displacement bound
  int closure_depth = 3;
};

struct FreePairCertificate {
  bool found = false;
  LoopClass alpha1, alpha2;
  double displacement = 0.0;        // max realized generator length
  double displacement_bound = 0.0;  // 2 * kappa * mu0
  int witness_depth = 0;            // collision-free depth w*
  std::vector<std::int64_t> orbit_sizes;  // distinct orbit classes per word length
  bool minimized = false;
  bool undecided = false;
  std::string note;  // failure reason or replacement trace
};

struct FreePairSearch {
  FreePairCertificate certificate;
  std::optional<CoverPatch> patch;  // patch at the basepoint (present on success)
  BasedSpace based;
};

/// Searches pairs of short loops (length <= 2*kappa*mu0) for a ping-pong
/// witness: all freely reduced words over the pair up to the witness depth
/// map to distinct deck classes. Sound for the tested depth; abelian or
/// torsion obstructions surface as explicit collisions in the note.
FreePairSearch find_free_pair(const SimplicialLengthComplex& x, const MetricPoint& p,
                              double kappa, double mu0, OracleKind kind,
                              const FreePairOptions& opts = {});

/// The orbit-minimization step: while some nontrivial word over the pair
/// moves the lifted basepoint by less than mu0, replace the farther
/// generator by the smallest escaping power (re-certified each time). On
/// success the returned certificate has a clean orbit: every nontrivial
/// reduced word up to the witness depth displaces the basepoint by at least
/// mu0. Distances are skeleton distances on the patch (exact on
/// 1-complexes). Re-certification failure returns the best certificate so
/// far with `minimized` still false.
FreePairCertificate minimize_orbit(const FreePairCertificate& cert, const CoverPatch& patch,
                                   double mu0, int power_budget = 16);

struct OrbitCheck {
  bool disjoint = false;   // translates of B(x0, mu0/2) pairwise disjoint
  bool complete = true;    // every probed orbit point was decidable on the patch
  int points = 0;          // distinct orbit points probed
  double min_displacement = std::numeric_limits<double>::infinity();
  int depth = 0;
};

/// Verifies pairwise disjointness of the balls B(w * x0, mu0/2) over
/// distinct reduced words of length <= depth, via displacements of words of
/// length <= 2*depth from the lifted basepoint.
OrbitCheck orbit_disjointness(const FreePairCertificate& cert, const CoverPatch& patch,
                              double mu0, int depth);

/// The exponential cover-ball lower bound
///   (c_n / 2^n) * mu0^n * (3^floor((r - mu0/2) / (2*kappa*mu0)) - 1),
/// valid for r >= mu0/2. Throws std::domain_error below the lemma domain.
double exponential_ball_bound(int n, double mu0, double kappa, double r);

struct Theorem35Budgets {
  int growth_depth = 8;
  std::vector<double> mu_grid;      // default: 0.25 .. 2.5 step 0.25
  int witness_depth = 4;
  int basepoint_samples = 4;        // vertices sampled for the sup estimate
  double patch_radius = 0.0;        // 0: sized to cover the default r grid
  std::vector<double> r_grid;       // default: mu0/2 and 1.5 .. 4.5 step 1
  SweepParameters sweep;
  GrowthOptions growth;
  ShortLoopOptions loops;
};

struct BallComparisonRow {
  double r = 0.0;
  MeasureEstimate measured;    // cover ball volume on the patch
  double lower_bound = 0.0;    // max(c_n * min(r, mu0/2)^n, exponential bound)
  double spaceform_cap = 0.0;  // ball volume at scalar curvature -n(n-1), radius C*r
  bool lower_ok = false;
  bool cap_ok = false;
};

struct Theorem35Report {
  int n = 0;
  double kappa = 1.0;
  std::string obstruction;  // empty when the full pipeline ran

  // Margulis stage.
  std::vector<MargulisEstimate> sampled;
  double mu_hat = 0.0;      // discretized sup estimate driving the sweep
  double sys = 0.0;         // systole at the first sample point

  // Collapse stage at rho = mu_hat / 2.
  OutcomeTag sweep_tag = OutcomeTag::kInconclusive;
  std::optional<CoveringCertificate> certificate;
  std::optional<FatPoint> fat_point;

  // Free-pair stage at the fat point.
  double mu0 = 0.0;
  std::optional<FreePairCertificate> pair;
  std::optional<OrbitCheck> orbit;

  // Ball comparison stage.
  double admissible_c = 0.0;
  bool admissible_found = false;
  std::vector<BallComparisonRow> rows;
  bool bounds_hold = false;

  // Volume normalization: the scale bound derived from the ball-growth
  // inequality at r = mu0/2, both in the derived form mu0^n <= (2^n/c_n) H_n
  // and in the printed form mu0^n <= 2^n c_n H_n (kept for reference; the
  // two differ by c_n^2), plus the rescaling reaching H_n = delta_n.
  double total_volume = 0.0;
  double mu0_bound_derived = 0.0;
  double mu0_bound_printed = 0.0;
  bool mu0_within_derived = false;
  double delta_n = 0.0;
  double lambda_rescale = 0.0;

  std::string notes;
};

/// End-to-end pipeline: Margulis estimates at sampled basepoints, a collapse
/// sweep at half the estimate, then (on a fat point) free-pair discovery,
/// orbit minimization, and cover-ball volume comparison against the
/// exponential lower bound and the negatively curved space form at the
/// admissible constant. Any stage that cannot proceed leaves a partial
/// report with `obstruction` set.
Theorem35Report theorem35_experiment(const SimplicialLengthComplex& x, OracleKind kind,
                                     double kappa, const Theorem35Budgets& budgets = {});

}  // namespace polyscal
