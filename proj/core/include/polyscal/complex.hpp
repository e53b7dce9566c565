#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polyscal {

constexpr int kMaxDim = 3;

struct CellRef {
  int dim = -1;
  int index = -1;
  friend bool operator==(const CellRef&, const CellRef&) = default;
  friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

/// One cell of a length complex. Corners are ordered; `vertices[c]` is the
/// vertex under corner c. Distinct corners may share a vertex (gluings), so
/// cells carry explicit facet references: `facets[i]` is the (dim-1)-cell
/// opposite corner i, and `facet_corner_map[i][j]` is the corner of this cell
/// that corner j of that facet is attached to.
struct Cell {
  std::vector<int> vertices;
  std::vector<int> facets;
  std::vector<std::vector<int>> facet_corner_map;
  double length = 0.0;  // dim-1 cells only
  std::string name;
};

/// Occurrence of a cell inside a maximal cell: `corner_map[j]` is the corner
/// of the maximal cell carrying corner j of the face. A face can occur in the
/// same maximal cell several times when sides are glued.
struct FacePlacement {
  int top_index = -1;
  std::vector<int> corner_map;
};

struct ValidationReport {
  bool valid = false;
  int dimension = 0;
  bool connected = false;
  std::array<int, kMaxDim + 1> cell_counts{0, 0, 0, 0};
  std::array<double, kMaxDim + 1> total_measure{0, 0, 0, 0};
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

/// Piecewise-Euclidean length complex of dimension <= 3. Each cell's metric
/// is determined by its edge lengths; the complex is immutable once built.
class SimplicialLengthComplex {
 public:
  int dimension() const { return dim_; }
  int vertex_count() const { return static_cast<int>(cells_[0].size()); }
  int cell_count(int dim) const { return static_cast<int>(cells_[dim].size()); }
  const Cell& cell(int dim, int index) const { return cells_[dim][index]; }
  const Cell& cell(CellRef r) const { return cells_[r.dim][r.index]; }
  const std::string& vertex_name(int v) const { return vertex_names_[v]; }
  const std::vector<std::string>& vertex_names() const { return vertex_names_; }

  bool is_top(int dim, int index) const { return is_top_[dim][index] != 0; }
  const std::vector<CellRef>& top_cells() const { return tops_; }

  /// Occurrences of cell (dim, index) inside maximal cells (including itself
  /// with the identity map when maximal).
  const std::vector<FacePlacement>& placements(int dim, int index) const {
    return placements_[dim][index];
  }
  /// Cofaces one dimension up: (coface cell index, which facet slot).
  const std::vector<std::pair<int, int>>& cofacets(int dim, int index) const {
    return cofacets_[dim][index];
  }

  /// Euclidean embedding of a cell: columns are corner positions, corner 0 at
  /// the origin; matrix is dim x (dim+1).
  const Eigen::MatrixXd& corner_positions(int dim, int index) const {
    return positions_[dim][index];
  }
  /// Distance between two corners of one cell (the glued side length).
  double pair_distance(int dim, int index, int ca, int cb) const;
  /// d-measure of a cell (1 for vertices, length, area, volume).
  double cell_measure(int dim, int index) const { return measures_[dim][index]; }
  /// Sum of cell measures in a dimension.
  double total_measure(int dim) const;
  /// Total measure in the top dimension.
  double total_measure() const { return total_measure(dim_); }

  double max_edge_length() const { return max_edge_; }
  double min_edge_length() const { return min_edge_; }
  bool connected() const { return connected_; }

  /// Edge cell joining two corners of a higher cell; (edge id, edge corner
  /// glued to ca).
  std::pair<int, int> edge_between(int dim, int index, int ca, int cb) const;

  /// True when every edge bounds exactly two 2-cell sides and the complex is
  /// 2-dimensional (no boundary, no branching).
  bool closed_surface() const;
  /// Total corner angle around a vertex (2-complexes).
  double vertex_angle(int v) const;

  ValidationReport validate() const;

 private:
  friend class ComplexBuilder;
  void finalize();

  int dim_ = 0;
  std::vector<std::string> vertex_names_;
  std::array<std::vector<Cell>, kMaxDim + 1> cells_;

  std::array<std::vector<Eigen::MatrixXd>, kMaxDim + 1> positions_;
  std::array<std::vector<double>, kMaxDim + 1> measures_;
  std::array<std::vector<char>, kMaxDim + 1> is_top_;
  std::array<std::vector<std::vector<FacePlacement>>, kMaxDim + 1> placements_;
  std::array<std::vector<std::vector<std::pair<int, int>>>, kMaxDim + 1> cofacets_;
  std::vector<CellRef> tops_;
  double max_edge_ = 0.0;
  double min_edge_ = 0.0;
  bool connected_ = true;
};

/// Incremental construction; `build()` finalizes derived tables and throws
/// std::invalid_argument on structural or metric defects (with the offending
/// cell named).
class ComplexBuilder {
 public:
  int add_vertex(const std::string& name);
  /// Directed edge cell; tail and head may coincide (loop).
  int add_edge(int tail, int head, double len, const std::string& name = "");
  /// Triangle from sides in cyclic corner order (corner0->1, 1->2, 2->0);
  /// `reversed[i]` traverses side i against the edge direction.
  int add_triangle_by_edges(const std::array<int, 3>& sides, const std::array<bool, 3>& reversed,
                            const std::string& name = "");
  /// Plain triangle over distinct vertices; side edges are looked up by
  /// endpoint pair and must be unambiguous.
  int add_triangle(int v0, int v1, int v2, const std::string& name = "");
  /// Plain tetrahedron over distinct vertices; edges looked up by pair, face
  /// triangles looked up or created.
  int add_tetrahedron(int v0, int v1, int v2, int v3, const std::string& name = "");

  bool has_edge(int u, int v) const;
  int find_edge(int u, int v) const;  // -1 if absent or ambiguous
  int vertex_count() const { return static_cast<int>(x_.vertex_names_.size()); }

  SimplicialLengthComplex build();

 private:
  int find_triangle(int v0, int v1, int v2) const;
  SimplicialLengthComplex x_;
  std::map<std::pair<int, int>, std::vector<int>> edges_by_pair_;
  std::map<std::array<int, 3>, int> triangles_by_tuple_;
  bool built_ = false;
};

/// A point of the complex: a cell and barycentric coordinates over its
/// corners. Canonical form carries the point on its minimal face.
struct MetricPoint {
  int dim = 0;
  int cell = 0;
  Eigen::VectorXd bary;

  static MetricPoint vertex(int v);
  static MetricPoint on_edge(int edge, double t);
  static MetricPoint on_cell(int dim, int cell, const Eigen::VectorXd& bary);
};

/// Normalizes coordinates and descends to the minimal carrier face
/// (coordinates below `tol` are treated as zero). Throws on invalid input.
MetricPoint canonical_point(const SimplicialLengthComplex& x, const MetricPoint& p,
                            double tol = 1e-12);
bool points_equal(const SimplicialLengthComplex& x, const MetricPoint& a, const MetricPoint& b,
                  double tol = 1e-9);
std::size_t point_hash(const SimplicialLengthComplex& x, const MetricPoint& p);
std::string point_to_string(const SimplicialLengthComplex& x, const MetricPoint& p);

/// Barycentric lift of face coordinates through a corner map into a larger
/// cell (size target_corners, entries placed by `corner_map`).
Eigen::VectorXd lift_bary(const Eigen::VectorXd& face_bary, const std::vector<int>& corner_map,
                          int target_corners);

/// Positive scale function: values at vertices, extended by barycentric
/// interpolation; `lipschitz` is the declared constant.
struct ScaleFunction {
  std::vector<double> vertex_values;
  double lipschitz = 1.0;

  static ScaleFunction constant(const SimplicialLengthComplex& x, double value);
  double eval(const SimplicialLengthComplex& x, const MetricPoint& p) const;
  double min_value() const;
  void check_valid(const SimplicialLengthComplex& x) const;
};

/// Carrier data of a refined complex inside its source: for each refined
/// cell, the source cell it maps into and the source barycentrics of its
/// corners (one column per corner).
struct SubdivisionMap {
  std::array<std::vector<CellRef>, kMaxDim + 1> carrier;
  std::array<std::vector<Eigen::MatrixXd>, kMaxDim + 1> carrier_bary;

  /// Source-complex point under a refined vertex.
  MetricPoint vertex_point(const SimplicialLengthComplex& source, int refined_vertex) const;
  /// Source-complex point under any refined point.
  MetricPoint map_point(const SimplicialLengthComplex& source, const MetricPoint& refined) const;
};

/// Edge-midpoint subdivision, iterated `levels` times. Preserves the metric;
/// central octahedra of tetrahedra are split along their shortest diagonal
/// (ties broken by corner order).
SimplicialLengthComplex subdivide(const SimplicialLengthComplex& x, int levels,
                                  SubdivisionMap* map = nullptr);

// Test-fixture builders.
SimplicialLengthComplex make_flat_torus();
SimplicialLengthComplex make_cycle(int segments, double total_length);
SimplicialLengthComplex make_wedge_of_circles(int arcs_per_circle = 3, double circle_length = 1.0);
SimplicialLengthComplex make_interval(int segments, double total_length);
SimplicialLengthComplex make_octahedron(double perturbation = 0.0, std::uint64_t seed = 0);
SimplicialLengthComplex make_disk_hexagon();
SimplicialLengthComplex make_single_triangle(double a, double b, double c);
SimplicialLengthComplex make_tetrahedron(double edge = 1.0);

}  // namespace polyscal
