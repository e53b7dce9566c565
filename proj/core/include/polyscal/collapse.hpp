#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "polyscal/complex.hpp"
#include "polyscal/metric.hpp"

namespace polyscal {

/// A cell of a working subdivision, addressed by dimension and index.
struct CellId {
  int dim = 0;
  int index = 0;

  friend bool operator==(const CellId& a, const CellId& b) {
    return a.dim == b.dim && a.index == b.index;
  }
  friend bool operator<(const CellId& a, const CellId& b) {
    return a.dim != b.dim ? a.dim < b.dim : a.index < b.index;
  }
};

/// One covering set: a union of open cells of the working subdivision
/// (open in the space iff the list is upward closed under cofaces), with an
/// assigned center and ball radius. The closed set adds all faces.
struct CoverSet {
  std::vector<CellId> cells;
  MetricPoint center;
  double radius = 0.0;
  std::string name;
};

/// A covering of the space by open star-unions in subdivide(X, level),
/// every closure verified inside the ball around its center.
struct CoveringCertificate {
  int subdivision_level = 0;
  std::vector<CoverSet> sets;
  int multiplicity = 0;  // measured: max number of sets sharing a cell
};

struct CertificateVerdict {
  bool pass = false;
  std::string reason;        // empty on pass
  int multiplicity = 0;      // measured
  int witness_set = -1;      // offending set (containment/openness failures)
  CellId witness_cell;       // offending cell (covering/openness failures)
  double worst_distance = 0.0;
  double worst_allowed = 0.0;
};

/// Verifies covering (every cell of the subdivision belongs to some set),
/// openness (cell lists upward closed), multiplicity <= dim X, and closure
/// containment: certified max distance from each set's closure to its center
/// strictly below radius minus a 2e-9 margin (ties fail). Containment uses
/// exact plane development where the geometry allows it and conservative
/// graph-distance bounds otherwise, so a "pass" is always sound.
CertificateVerdict check_certificate(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                     const CoveringCertificate& cert);

/// Nerve of a covering plus a piecewise-linear partition of unity
/// subordinate to it (hop-depth bumps on subdivision vertices, normalized).
/// The nerve complex materializes simplices up to dimension 2; `dimension`
/// reports the true value (max overlap - 1) regardless.
struct NerveMap {
  SimplicialLengthComplex nerve;
  int dimension = 0;
  std::vector<std::vector<double>> weights;  // [subdivision vertex][set]
};

/// Throws std::invalid_argument("invalid certificate: ...") when the
/// certificate does not verify.
NerveMap nerve_of_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                           const CoveringCertificate& cert);

/// Simplicial map data: images of the subdivision's vertices in a target
/// complex P. Cells may degenerate (several corners sharing an image); the
/// corner image set of every cell must span a cell of P.
struct SimplicialMapData {
  std::vector<int> vertex_image;
};

/// Pulls back the open vertex stars of P through the map: set U_p consists
/// of the open cells with p among their corner images; centers are chosen
/// among the map's vertex fibers (best certified one). Requires
/// dim P <= dim X - 1. Throws std::invalid_argument on dimension or
/// simpliciality violations; a fiber with no admissible center is reported
/// in the returned verdict of check_certificate (run by the caller).
CoveringCertificate star_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                  int subdivision_level, const SimplicialLengthComplex& target,
                                  const SimplicialMapData& map_data);

/// Roundtrip pullback through the nerve map: set i shrinks to the open
/// cells where its partition-of-unity bump is positive. Centers, radii and
/// the subdivision level are inherited, so multiplicity never grows and
/// containment is preserved.
CoveringCertificate star_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                  const CoveringCertificate& cert, const NerveMap& nerve);

/// A candidate separating subcomplex: cells of dimension <= dim X - 1 in
/// the working subdivision (closed under faces; closure is taken on input).
struct Separator {
  int subdivision_level = 0;
  std::vector<CellId> cells;
};

struct SeparatorComponent {
  std::vector<CellId> cells;  // open cells of one component of X minus Y
  int center_vertex = -1;     // subdivision vertex index, -2 for a cell centroid
  MetricPoint center;         // the admissible center point itself
  double certified_radius = 0.0;
  double rho_at_center = 0.0;
};

struct SeparatorVerdict {
  bool pass = false;
  std::string reason;
  std::vector<SeparatorComponent> components;
  double measure = 0.0;  // H_{n-1}(Y)
  int witness_component = -1;
};

/// Decides whether Y rho-separates X: every connected component of X minus Y
/// must have a vertex center whose ball of radius rho(center) provably
/// contains the component's closure. Center search is restricted to the
/// component's subdivision vertices (reported when none is admissible).
SeparatorVerdict check_separator(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                 const Separator& y, int center_budget = 48);

struct ExtendResult {
  bool ok = false;
  std::string reason;
  CoveringCertificate certificate;
  CertificateVerdict verdict;
};

/// Lemma "separator + collapsing separator => collapsing space": thickens
/// each set of the separator's certificate to its open star-union in the
/// working subdivision, appends the components of X minus Y as their own
/// sets, and re-verifies everything. Fails (ok = false) when the separator
/// does not separate, when the input multiplicity exceeds dim X - 1, when a
/// thickened set escapes its ball at this subdivision level, or when the
/// assembled certificate fails verification.
ExtendResult extend_collapse(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                             const Separator& y, const CoveringCertificate& y_cert);

struct FatPoint {
  MetricPoint point;         // in the input complex (mapped back from the subdivision)
  double rho_at_point = 0.0;
  double constant = 0.0;     // the dimensional ball-growth constant c_n
  double tolerance = 0.0;
  std::vector<double> grid_r;
  std::vector<MeasureEstimate> measured;
  bool verified = false;
};

enum class OutcomeTag { kCertificate, kFatPoint, kInconclusive };

struct SweepParameters {
  double epsilon = 0.1;
  double alpha = 0.1;
  int subdivision_level = -1;  // -1: pick by dimension (1D: 1, 2D: 4, 3D: 1)
  int field_level = 3;         // refinement for conservative distance bounds
  int candidate_budget = 64;   // separator candidates evaluated
  int center_budget = 48;      // center candidates per component
  int grid_points = 8;         // fat-point verification grid
  double tolerance = 0.05;     // fat-point slack: measured >= (1-tol) c_n r^n
  SampleSpec spec;             // measurement tuning for fat-point balls
};

struct CollapseOutcome {
  OutcomeTag tag = OutcomeTag::kInconclusive;
  std::optional<CoveringCertificate> certificate;
  std::optional<CertificateVerdict> verdict;
  std::optional<FatPoint> fat_point;
  std::optional<Separator> separator;      // the separator behind a certificate
  std::optional<CoareaReport> eilenberg;   // slicing diagnostics when recorded
  std::string diagnostics;
};

/// Constructive dichotomy: returns a verified covering certificate (single
/// balls per component, or a separator found by level-set search, collapsed
/// recursively and extended), or a fat point whose measured ball volumes
/// dominate (1 - tolerance) * c_n r^n on a grid r <= rho(x0), or
/// "inconclusive" when search budgets exhaust with neither verification.
/// On 1-complexes the scan is exact and never inconclusive.
CollapseOutcome dichotomy_sweep(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                const SweepParameters& params = {});

/// Constant-scale convenience wrapper (fibers of radius at most R).
CollapseOutcome width_upper_bound(const SimplicialLengthComplex& x, double R,
                                  const SweepParameters& params = {});

nlohmann::json certificate_to_json(const CoveringCertificate& cert);
CoveringCertificate certificate_from_json(const nlohmann::json& doc);
nlohmann::json outcome_to_json(const CollapseOutcome& outcome);

}  // namespace polyscal
