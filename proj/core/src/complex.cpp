#include "polyscal/complex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace polyscal {

namespace {

std::string cell_label(const std::string& name, int dim, int index) {
  if (!name.empty()) return name;
  std::ostringstream os;
  os << "cell(dim=" << dim << ",#" << index << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ComplexBuilder

int ComplexBuilder::add_vertex(const std::string& name) {
  int id = static_cast<int>(x_.vertex_names_.size());
  x_.vertex_names_.push_back(name);
  Cell c;
  c.vertices = {id};
  c.name = name;
  x_.cells_[0].push_back(std::move(c));
  return id;
}

int ComplexBuilder::add_edge(int tail, int head, double len, const std::string& name) {
  if (tail < 0 || tail >= vertex_count() || head < 0 || head >= vertex_count())
    throw std::invalid_argument("edge endpoint out of range: " + cell_label(name, 1, -1));
  if (!(len > 0.0) || !std::isfinite(len))
    throw std::invalid_argument("edge length must be positive and finite: " + cell_label(name, 1, -1));
  int id = static_cast<int>(x_.cells_[1].size());
  Cell c;
  c.vertices = {tail, head};
  c.facets = {head, tail};  // facet i is the vertex opposite corner i
  c.facet_corner_map = {{1}, {0}};
  c.length = len;
  c.name = name;
  x_.cells_[1].push_back(std::move(c));
  edges_by_pair_[{std::min(tail, head), std::max(tail, head)}].push_back(id);
  return id;
}

bool ComplexBuilder::has_edge(int u, int v) const {
  auto it = edges_by_pair_.find({std::min(u, v), std::max(u, v)});
  return it != edges_by_pair_.end() && !it->second.empty();
}

int ComplexBuilder::find_edge(int u, int v) const {
  auto it = edges_by_pair_.find({std::min(u, v), std::max(u, v)});
  if (it == edges_by_pair_.end() || it->second.size() != 1) return -1;
  return it->second.front();
}

int ComplexBuilder::add_triangle_by_edges(const std::array<int, 3>& sides,
                                          const std::array<bool, 3>& reversed,
                                          const std::string& name) {
  std::array<int, 3> start{}, end{};
  std::array<double, 3> side_len{};
  for (int i = 0; i < 3; ++i) {
    if (sides[i] < 0 || sides[i] >= static_cast<int>(x_.cells_[1].size()))
      throw std::invalid_argument("triangle references missing edge: " + cell_label(name, 2, -1));
    const Cell& e = x_.cells_[1][sides[i]];
    start[i] = reversed[i] ? e.vertices[1] : e.vertices[0];
    end[i] = reversed[i] ? e.vertices[0] : e.vertices[1];
    side_len[i] = e.length;
  }
  for (int i = 0; i < 3; ++i) {
    if (end[i] != start[(i + 1) % 3])
      throw std::invalid_argument("triangle sides do not close up: " + cell_label(name, 2, -1));
  }
  double scale = std::max({side_len[0], side_len[1], side_len[2]});
  for (int i = 0; i < 3; ++i) {
    if (!(side_len[(i + 1) % 3] + side_len[(i + 2) % 3] - side_len[i] > 1e-12 * scale))
      throw std::invalid_argument("triangle inequality violated: " + cell_label(name, 2, -1));
  }
  int id = static_cast<int>(x_.cells_[2].size());
  Cell c;
  c.vertices = {start[0], start[1], start[2]};
  // facet i is the side opposite corner i; sides come as (s01, s12, s20).
  c.facets = {sides[1], sides[2], sides[0]};
  c.facet_corner_map = {
      reversed[1] ? std::vector<int>{2, 1} : std::vector<int>{1, 2},
      reversed[2] ? std::vector<int>{0, 2} : std::vector<int>{2, 0},
      reversed[0] ? std::vector<int>{1, 0} : std::vector<int>{0, 1},
  };
  c.name = name;
  std::array<int, 3> key{start[0], start[1], start[2]};
  std::sort(key.begin(), key.end());
  if (key[0] != key[1] && key[1] != key[2]) triangles_by_tuple_.emplace(key, id);
  x_.cells_[2].push_back(std::move(c));
  return id;
}

int ComplexBuilder::add_triangle(int v0, int v1, int v2, const std::string& name) {
  if (v0 == v1 || v1 == v2 || v0 == v2)
    throw std::invalid_argument("plain triangle needs distinct vertices (use explicit edges for gluings): " +
                                cell_label(name, 2, -1));
  std::array<int, 3> v{v0, v1, v2};
  std::sort(v.begin(), v.end());
  std::array<int, 3> sides{};
  std::array<bool, 3> rev{};
  const std::array<std::pair<int, int>, 3> pairs{{{v[0], v[1]}, {v[1], v[2]}, {v[2], v[0]}}};
  for (int i = 0; i < 3; ++i) {
    auto it = edges_by_pair_.find({std::min(pairs[i].first, pairs[i].second),
                                   std::max(pairs[i].first, pairs[i].second)});
    if (it == edges_by_pair_.end() || it->second.empty())
      throw std::invalid_argument("missing edge for a triangle side: " + cell_label(name, 2, -1));
    if (it->second.size() > 1)
      throw std::invalid_argument("ambiguous side (parallel edges); use explicit edges: " +
                                  cell_label(name, 2, -1));
    sides[i] = it->second.front();
    rev[i] = x_.cells_[1][sides[i]].vertices[0] != pairs[i].first;
  }
  return add_triangle_by_edges(sides, rev, name);
}

int ComplexBuilder::find_triangle(int v0, int v1, int v2) const {
  std::array<int, 3> key{v0, v1, v2};
  std::sort(key.begin(), key.end());
  auto it = triangles_by_tuple_.find(key);
  return it == triangles_by_tuple_.end() ? -1 : it->second;
}

int ComplexBuilder::add_tetrahedron(int v0, int v1, int v2, int v3, const std::string& name) {
  std::array<int, 4> v{v0, v1, v2, v3};
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end())
    throw std::invalid_argument("tetrahedron needs distinct vertices: " + cell_label(name, 3, -1));
  Cell c;
  c.vertices = {v[0], v[1], v[2], v[3]};
  c.facets.resize(4);
  c.facet_corner_map.resize(4);
  for (int i = 0; i < 4; ++i) {
    std::array<int, 3> rest{};
    std::vector<int> map(3);
    int k = 0;
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      rest[k] = v[j];
      map[k] = j;
      ++k;
    }
    int t = find_triangle(rest[0], rest[1], rest[2]);
    if (t < 0) t = add_triangle(rest[0], rest[1], rest[2]);
    // add_triangle orders corners ascending, matching `rest` (already sorted).
    c.facets[i] = t;
    c.facet_corner_map[i] = map;
  }
  c.name = name;
  int id = static_cast<int>(x_.cells_[3].size());
  x_.cells_[3].push_back(std::move(c));
  return id;
}

SimplicialLengthComplex ComplexBuilder::build() {
  if (built_) throw std::logic_error("ComplexBuilder::build called twice");
  built_ = true;
  x_.finalize();
  return std::move(x_);
}

// ---------------------------------------------------------------------------
// SimplicialLengthComplex derived data

std::pair<int, int> SimplicialLengthComplex::edge_between(int dim, int index, int ca, int cb) const {
  if (dim == 1) return {index, ca};
  const Cell& c = cells_[dim][index];
  int drop = -1;
  for (int i = 0; i <= dim; ++i) {
    if (i != ca && i != cb) {
      drop = i;
      break;
    }
  }
  const std::vector<int>& m = c.facet_corner_map[drop];
  int ja = -1, jb = -1;
  for (int j = 0; j < static_cast<int>(m.size()); ++j) {
    if (m[j] == ca) ja = j;
    if (m[j] == cb) jb = j;
  }
  return edge_between(dim - 1, c.facets[drop], ja, jb);
}

double SimplicialLengthComplex::pair_distance(int dim, int index, int ca, int cb) const {
  if (ca == cb) return 0.0;
  return cells_[1][edge_between(dim, index, ca, cb).first].length;
}

void SimplicialLengthComplex::finalize() {
  dim_ = 0;
  for (int d = kMaxDim; d >= 0; --d) {
    if (!cells_[d].empty()) {
      dim_ = d;
      break;
    }
  }

  for (int d = 0; d <= kMaxDim; ++d) {
    cofacets_[d].assign(cells_[d].size(), {});
    is_top_[d].assign(cells_[d].size(), 1);
  }
  for (int d = 1; d <= kMaxDim; ++d) {
    for (int i = 0; i < static_cast<int>(cells_[d].size()); ++i) {
      const Cell& c = cells_[d][i];
      for (int f = 0; f < static_cast<int>(c.facets.size()); ++f) {
        cofacets_[d - 1][c.facets[f]].push_back({i, f});
        is_top_[d - 1][c.facets[f]] = 0;
      }
    }
  }
  tops_.clear();
  for (int d = 0; d <= kMaxDim; ++d)
    for (int i = 0; i < static_cast<int>(cells_[d].size()); ++i)
      if (is_top_[d][i]) tops_.push_back({d, i});

  // Euclidean corner positions from glued side lengths, via the Gram matrix
  // relative to corner 0. Cholesky succeeds exactly when the lengths embed.
  for (int d = 0; d <= kMaxDim; ++d) {
    positions_[d].assign(cells_[d].size(), Eigen::MatrixXd());
    measures_[d].assign(cells_[d].size(), 0.0);
  }
  for (int i = 0; i < static_cast<int>(cells_[0].size()); ++i) {
    positions_[0][i] = Eigen::MatrixXd::Zero(0, 1);
    measures_[0][i] = 1.0;
  }
  for (int d = 1; d <= kMaxDim; ++d) {
    for (int i = 0; i < static_cast<int>(cells_[d].size()); ++i) {
      Eigen::MatrixXd sq(d + 1, d + 1);
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= d; ++b) {
          double len = pair_distance(d, i, a, b);
          sq(a, b) = len * len;
        }
      Eigen::MatrixXd gram(d, d);
      for (int a = 1; a <= d; ++a)
        for (int b = 1; b <= d; ++b) gram(a - 1, b - 1) = 0.5 * (sq(0, a) + sq(0, b) - sq(a, b));
      Eigen::LLT<Eigen::MatrixXd> llt(gram);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument("cell is not embeddable with the given edge lengths: " +
                                    cell_label(cells_[d][i].name, d, i));
      Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(d, d + 1);
      pos.block(0, 1, d, d) = Eigen::MatrixXd(llt.matrixL()).transpose();
      positions_[d][i] = pos;
      double fact = 1.0;
      for (int k = 2; k <= d; ++k) fact *= k;
      measures_[d][i] = std::sqrt(std::max(0.0, gram.determinant())) / fact;
      if (!(measures_[d][i] > 0.0))
        throw std::invalid_argument("degenerate cell (zero measure): " +
                                    cell_label(cells_[d][i].name, d, i));
    }
  }

  // Every occurrence of every face inside maximal cells.
  for (int d = 0; d <= kMaxDim; ++d) placements_[d].assign(cells_[d].size(), {});
  for (const CellRef& top : tops_) {
    std::set<std::tuple<int, int, std::vector<int>>> seen;
    std::vector<std::pair<CellRef, std::vector<int>>> stack;
    std::vector<int> ident(top.dim + 1);
    std::iota(ident.begin(), ident.end(), 0);
    stack.push_back({top, ident});
    while (!stack.empty()) {
      auto [ref, map] = stack.back();
      stack.pop_back();
      if (!seen.insert({ref.dim, ref.index, map}).second) continue;
      placements_[ref.dim][ref.index].push_back({top.index, map});
      const Cell& c = cells_[ref.dim][ref.index];
      for (int f = 0; f < static_cast<int>(c.facets.size()); ++f) {
        std::vector<int> child(c.facet_corner_map[f].size());
        for (std::size_t j = 0; j < child.size(); ++j) child[j] = map[c.facet_corner_map[f][j]];
        stack.push_back({{ref.dim - 1, c.facets[f]}, child});
      }
    }
  }

  max_edge_ = 0.0;
  min_edge_ = cells_[1].empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const Cell& e : cells_[1]) {
    max_edge_ = std::max(max_edge_, e.length);
    min_edge_ = std::min(min_edge_, e.length);
  }

  std::vector<int> parent(cells_[0].size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Cell& e : cells_[1]) parent[find(e.vertices[0])] = find(e.vertices[1]);
  connected_ = true;
  for (std::size_t v = 1; v < parent.size(); ++v)
    if (find(static_cast<int>(v)) != find(0)) connected_ = false;
}

double SimplicialLengthComplex::total_measure(int dim) const {
  double s = 0.0;
  for (double m : measures_[dim]) s += m;
  return s;
}

bool SimplicialLengthComplex::closed_surface() const {
  if (dim_ != 2) return false;
  for (int i = 0; i < cell_count(1); ++i)
    if (cofacets_[1][i].size() != 2) return false;
  for (int i = 0; i < cell_count(0); ++i)
    if (is_top_[0][i]) return false;
  for (int i = 0; i < cell_count(1); ++i)
    if (is_top_[1][i]) return false;
  return true;
}

double SimplicialLengthComplex::vertex_angle(int v) const {
  double total = 0.0;
  for (int t = 0; t < cell_count(2); ++t) {
    const Cell& c = cells_[2][t];
    for (int corner = 0; corner < 3; ++corner) {
      if (c.vertices[corner] != v) continue;
      int p = (corner + 1) % 3, q = (corner + 2) % 3;
      double b = pair_distance(2, t, corner, p);
      double cc = pair_distance(2, t, corner, q);
      double a = pair_distance(2, t, p, q);
      double cosA = (b * b + cc * cc - a * a) / (2.0 * b * cc);
      total += std::acos(std::clamp(cosA, -1.0, 1.0));
    }
  }
  return total;
}

ValidationReport SimplicialLengthComplex::validate() const {
  ValidationReport r;
  r.valid = true;
  r.dimension = dim_;
  r.connected = connected_;
  for (int d = 0; d <= kMaxDim; ++d) {
    r.cell_counts[d] = cell_count(d);
    r.total_measure[d] = total_measure(d);
  }
  if (!connected_) r.warnings.push_back("complex is not connected");
  if (dim_ == 2) {
    int boundary = 0, branching = 0;
    for (int i = 0; i < cell_count(1); ++i) {
      auto n = cofacets_[1][i].size();
      if (n < 2) ++boundary;
      if (n > 2) ++branching;
    }
    if (boundary > 0)
      r.warnings.push_back("surface has " + std::to_string(boundary) + " boundary edge(s)");
    if (branching > 0)
      r.warnings.push_back(std::to_string(branching) + " edge(s) bound more than two sides");
  }
  for (int d = 2; d <= dim_; ++d) {
    for (int i = 0; i < cell_count(d); ++i) {
      double scale = 0.0;
      for (int a = 0; a <= d; ++a)
        for (int b = a + 1; b <= d; ++b) scale = std::max(scale, pair_distance(d, i, a, b));
      if (cell_measure(d, i) < 1e-9 * std::pow(scale, d))
        r.warnings.push_back("nearly degenerate cell: " + cell_label(cells_[d][i].name, d, i));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Points

MetricPoint MetricPoint::vertex(int v) {
  MetricPoint p;
  p.dim = 0;
  p.cell = v;
  p.bary = Eigen::VectorXd::Ones(1);
  return p;
}

MetricPoint MetricPoint::on_edge(int edge, double t) {
  MetricPoint p;
  p.dim = 1;
  p.cell = edge;
  p.bary = Eigen::VectorXd(2);
  p.bary << 1.0 - t, t;
  return p;
}

MetricPoint MetricPoint::on_cell(int dim, int cell, const Eigen::VectorXd& bary) {
  MetricPoint p;
  p.dim = dim;
  p.cell = cell;
  p.bary = bary;
  return p;
}

MetricPoint canonical_point(const SimplicialLengthComplex& x, const MetricPoint& p, double tol) {
  if (p.dim < 0 || p.dim > kMaxDim || p.cell < 0 || p.cell >= x.cell_count(p.dim))
    throw std::invalid_argument("point references a missing cell");
  if (p.bary.size() != p.dim + 1) throw std::invalid_argument("barycentric size mismatch");
  MetricPoint q = p;
  double sum = q.bary.sum();
  if (!(sum > 0.0) || !std::isfinite(sum)) throw std::invalid_argument("invalid barycentric weights");
  for (int i = 0; i < q.bary.size(); ++i) {
    if (q.bary[i] < -1e-9) throw std::invalid_argument("negative barycentric weight");
    if (q.bary[i] < 0) q.bary[i] = 0;
  }
  q.bary /= q.bary.sum();
  bool changed = true;
  while (changed && q.dim > 0) {
    changed = false;
    for (int c = 0; c <= q.dim; ++c) {
      if (q.bary[c] <= tol) {
        const Cell& cell = x.cell(q.dim, q.cell);
        const std::vector<int>& m = cell.facet_corner_map[c];
        Eigen::VectorXd nb(q.dim);
        for (int j = 0; j < q.dim; ++j) nb[j] = q.bary[m[j]];
        q.cell = cell.facets[c];
        q.dim -= 1;
        q.bary = nb / nb.sum();
        changed = true;
        break;
      }
    }
  }
  return q;
}

bool points_equal(const SimplicialLengthComplex& x, const MetricPoint& a, const MetricPoint& b,
                  double tol) {
  MetricPoint ca = canonical_point(x, a), cb = canonical_point(x, b);
  if (ca.dim != cb.dim || ca.cell != cb.cell) return false;
  return (ca.bary - cb.bary).cwiseAbs().maxCoeff() <= tol;
}

std::size_t point_hash(const SimplicialLengthComplex& x, const MetricPoint& p) {
  MetricPoint c = canonical_point(x, p);
  std::size_t h = std::hash<int>()(c.dim * 1315423911 + c.cell);
  for (int i = 0; i < c.bary.size(); ++i) {
    auto q = static_cast<std::int64_t>(std::llround(c.bary[i] * 1e10));
    h ^= std::hash<std::int64_t>()(q) + 0x9e3779b9 + (h << 6) + (h >> 2);
  }
  return h;
}

std::string point_to_string(const SimplicialLengthComplex& x, const MetricPoint& p) {
  MetricPoint c = canonical_point(x, p);
  std::ostringstream os;
  if (c.dim == 0) {
    os << x.vertex_name(c.cell);
    return os.str();
  }
  const Cell& cell = x.cell(c.dim, c.cell);
  os << (cell.name.empty() ? ("d" + std::to_string(c.dim) + "#" + std::to_string(c.cell))
                           : cell.name)
     << "[";
  for (int i = 0; i < c.bary.size(); ++i) os << (i ? "," : "") << c.bary[i];
  os << "]";
  return os.str();
}

Eigen::VectorXd lift_bary(const Eigen::VectorXd& face_bary, const std::vector<int>& corner_map,
                          int target_corners) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(target_corners);
  for (int j = 0; j < face_bary.size(); ++j) out[corner_map[j]] += face_bary[j];
  return out;
}

// ---------------------------------------------------------------------------
// Scale functions

ScaleFunction ScaleFunction::constant(const SimplicialLengthComplex& x, double value) {
  ScaleFunction f;
  f.vertex_values.assign(x.vertex_count(), value);
  f.lipschitz = 0.0;
  return f;
}

double ScaleFunction::eval(const SimplicialLengthComplex& x, const MetricPoint& p) const {
  const Cell& c = x.cell(p.dim, p.cell);
  double v = 0.0;
  for (int i = 0; i <= p.dim; ++i) v += p.bary[i] * vertex_values[c.vertices[i]];
  return v;
}

double ScaleFunction::min_value() const {
  return *std::min_element(vertex_values.begin(), vertex_values.end());
}

void ScaleFunction::check_valid(const SimplicialLengthComplex& x) const {
  if (static_cast<int>(vertex_values.size()) != x.vertex_count())
    throw std::invalid_argument("scale function has wrong vertex count");
  for (double v : vertex_values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("scale function must be positive and finite");
  if (lipschitz < 0.0) throw std::invalid_argument("negative Lipschitz constant");
}

// ---------------------------------------------------------------------------
// Subdivision

MetricPoint SubdivisionMap::vertex_point(const SimplicialLengthComplex& source,
                                         int refined_vertex) const {
  CellRef w = carrier[0][refined_vertex];
  return canonical_point(
      source, MetricPoint::on_cell(w.dim, w.index, carrier_bary[0][refined_vertex].col(0)));
}

MetricPoint SubdivisionMap::map_point(const SimplicialLengthComplex& source,
                                      const MetricPoint& refined) const {
  CellRef w = carrier[refined.dim][refined.cell];
  Eigen::VectorXd b = carrier_bary[refined.dim][refined.cell] * refined.bary;
  return canonical_point(source, MetricPoint::on_cell(w.dim, w.index, b));
}

namespace {

struct LevelResult {
  SimplicialLengthComplex complex;
  SubdivisionMap map;
};

SubdivisionMap identity_map(const SimplicialLengthComplex& x) {
  SubdivisionMap m;
  for (int d = 0; d <= kMaxDim; ++d) {
    m.carrier[d].resize(x.cell_count(d));
    m.carrier_bary[d].resize(x.cell_count(d));
    for (int i = 0; i < x.cell_count(d); ++i) {
      m.carrier[d][i] = {d, i};
      m.carrier_bary[d][i] = Eigen::MatrixXd::Identity(d + 1, d + 1);
    }
  }
  return m;
}

// outer maps Y into X, inner maps Z into Y; result maps Z into X.
SubdivisionMap compose(const SubdivisionMap& outer, const SubdivisionMap& inner) {
  SubdivisionMap out;
  for (int d = 0; d <= kMaxDim; ++d) {
    out.carrier[d].resize(inner.carrier[d].size());
    out.carrier_bary[d].resize(inner.carrier[d].size());
    for (std::size_t i = 0; i < inner.carrier[d].size(); ++i) {
      CellRef y = inner.carrier[d][i];
      out.carrier[d][i] = outer.carrier[y.dim][y.index];
      out.carrier_bary[d][i] = outer.carrier_bary[y.dim][y.index] * inner.carrier_bary[d][i];
    }
  }
  return out;
}

LevelResult subdivide_once(const SimplicialLengthComplex& y) {
  ComplexBuilder b;
  SubdivisionMap m;
  auto record = [&](int dim, int id, CellRef carrier, const Eigen::MatrixXd& bary) {
    if (static_cast<int>(m.carrier[dim].size()) <= id) {
      m.carrier[dim].resize(id + 1, CellRef{});
      m.carrier_bary[dim].resize(id + 1);
    }
    if (m.carrier[dim][id].dim >= 0) return;  // first assignment wins; repeats agree
    m.carrier[dim][id] = carrier;
    m.carrier_bary[dim][id] = bary;
  };

  // Old vertices keep their ids.
  for (int v = 0; v < y.vertex_count(); ++v) {
    b.add_vertex(y.vertex_name(v));
    record(0, v, {0, v}, Eigen::MatrixXd::Ones(1, 1));
  }
  // One midpoint and two halves per edge.
  std::vector<int> mid(y.cell_count(1));
  std::vector<std::array<int, 2>> half(y.cell_count(1));
  for (int e = 0; e < y.cell_count(1); ++e) {
    const Cell& ec = y.cell(1, e);
    mid[e] = b.add_vertex("m" + std::to_string(e));
    record(0, mid[e], {1, e}, (Eigen::MatrixXd(2, 1) << 0.5, 0.5).finished());
    half[e][0] = b.add_edge(ec.vertices[0], mid[e], ec.length / 2.0);
    half[e][1] = b.add_edge(mid[e], ec.vertices[1], ec.length / 2.0);
    record(1, half[e][0], {1, e}, (Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.0, 0.5).finished());
    record(1, half[e][1], {1, e}, (Eigen::MatrixXd(2, 2) << 0.5, 0.0, 0.5, 1.0).finished());
  }

  // Maximal 2-cells, glued or plain: four sub-triangles over explicit edges.
  Eigen::MatrixXd tri_nodes(3, 6);  // columns: v0 v1 v2 m01 m12 m20, source barycentrics
  tri_nodes << 1, 0, 0, 0.5, 0, 0.5,
               0, 1, 0, 0.5, 0.5, 0,
               0, 0, 1, 0, 0.5, 0.5;
  auto tri_cols = [&](int a, int c, int d) {
    Eigen::MatrixXd out(3, 3);
    out.col(0) = tri_nodes.col(a);
    out.col(1) = tri_nodes.col(c);
    out.col(2) = tri_nodes.col(d);
    return out;
  };
  for (int t = 0; t < y.cell_count(2); ++t) {
    if (!y.is_top(2, t)) continue;
    const Cell& tc = y.cell(2, t);
    // Side i runs corner i -> corner i+1; reversed when corner i sits at the
    // edge's head.
    std::array<std::pair<int, bool>, 3> sides{};
    for (int i = 0; i < 3; ++i) {
      auto [e, corner_at_start] = y.edge_between(2, t, i, (i + 1) % 3);
      sides[i] = {e, corner_at_start != 0};
    }
    auto half_near_start = [&](int i) {
      auto [e, rev] = sides[i];
      return rev ? std::pair<int, bool>{half[e][1], true} : std::pair<int, bool>{half[e][0], false};
    };
    auto half_near_end = [&](int i) {
      auto [e, rev] = sides[i];
      return rev ? std::pair<int, bool>{half[e][0], true} : std::pair<int, bool>{half[e][1], false};
    };
    int m01 = mid[sides[0].first], m12 = mid[sides[1].first], m20 = mid[sides[2].first];
    double l01 = y.pair_distance(2, t, 0, 1), l12 = y.pair_distance(2, t, 1, 2),
           l20 = y.pair_distance(2, t, 2, 0);
    // Midsegments are parallel to the opposite side at half length.
    int d01_12 = b.add_edge(m01, m12, l20 / 2.0);
    int d12_20 = b.add_edge(m12, m20, l01 / 2.0);
    int d20_01 = b.add_edge(m20, m01, l12 / 2.0);
    record(1, d01_12, {2, t}, (Eigen::MatrixXd(3, 2) << 0.5, 0, 0.5, 0.5, 0, 0.5).finished());
    record(1, d12_20, {2, t}, (Eigen::MatrixXd(3, 2) << 0, 0.5, 0.5, 0, 0.5, 0.5).finished());
    record(1, d20_01, {2, t}, (Eigen::MatrixXd(3, 2) << 0.5, 0.5, 0, 0.5, 0.5, 0).finished());
    auto [e0s, r0s] = half_near_start(0);
    auto [e0e, r0e] = half_near_end(0);
    auto [e1s, r1s] = half_near_start(1);
    auto [e1e, r1e] = half_near_end(1);
    auto [e2s, r2s] = half_near_start(2);
    auto [e2e, r2e] = half_near_end(2);
    std::string base = tc.name;
    record(2,
           b.add_triangle_by_edges({e0s, d20_01, e2e}, {r0s, true, r2e},
                                   base.empty() ? "" : base + ".0"),
           {2, t}, tri_cols(0, 3, 5));
    record(2,
           b.add_triangle_by_edges({e1s, d01_12, e0e}, {r1s, true, r0e},
                                   base.empty() ? "" : base + ".1"),
           {2, t}, tri_cols(1, 4, 3));
    record(2,
           b.add_triangle_by_edges({e2s, d12_20, e1e}, {r2s, true, r1e},
                                   base.empty() ? "" : base + ".2"),
           {2, t}, tri_cols(2, 5, 4));
    record(2,
           b.add_triangle_by_edges({d01_12, d12_20, d20_01}, {false, false, false},
                                   base.empty() ? "" : base + ".c"),
           {2, t}, tri_cols(3, 4, 5));
  }

  // Deferred carrier records for cells created implicitly under tetrahedra.
  struct PendingTri {
    std::array<int, 3> verts;  // ascending, matching bary column order
    CellRef carrier;
    Eigen::MatrixXd bary;
  };
  struct PendingEdge {
    std::array<int, 2> verts;
    CellRef carrier;
    Eigen::MatrixXd bary;
  };
  std::vector<PendingTri> pending_tris;
  std::vector<PendingEdge> pending_edges;

  for (int s = 0; s < y.cell_count(3); ++s) {
    const Cell& sc = y.cell(3, s);
    const Eigen::MatrixXd& pos = y.corner_positions(3, s);
    std::array<std::array<int, 4>, 4> emid{};
    std::array<std::array<Eigen::Vector3d, 4>, 4> mpos{};
    for (int a = 0; a < 4; ++a)
      for (int c = a + 1; c < 4; ++c) {
        emid[a][c] = emid[c][a] = mid[y.edge_between(3, s, a, c).first];
        mpos[a][c] = mpos[c][a] = 0.5 * (pos.col(a) + pos.col(c));
      }
    // A node is a corner (a == a) or an edge midpoint {a, c}.
    using Node = std::pair<int, int>;
    auto node_bary = [&](Node p) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(4);
      if (p.first == p.second)
        col[p.first] = 1.0;
      else
        col[p.first] = col[p.second] = 0.5;
      return col;
    };
    auto npos = [&](Node p) -> Eigen::Vector3d {
      return p.first == p.second ? Eigen::Vector3d(pos.col(p.first)) : mpos[p.first][p.second];
    };
    auto nid = [&](Node p) {
      return p.first == p.second ? sc.vertices[p.first] : emid[p.first][p.second];
    };
    auto ensure_edge = [&](Node pa, Node pb) {
      if (!b.has_edge(nid(pa), nid(pb))) b.add_edge(nid(pa), nid(pb), (npos(pa) - npos(pb)).norm());
    };
    auto add_subtet = [&](std::array<Node, 4> corners) {
      for (int a = 0; a < 4; ++a)
        for (int c = a + 1; c < 4; ++c) ensure_edge(corners[a], corners[c]);
      int id = b.add_tetrahedron(nid(corners[0]), nid(corners[1]), nid(corners[2]),
                                 nid(corners[3]));
      // The builder orders tetrahedron corners by ascending vertex id.
      std::sort(corners.begin(), corners.end(),
                [&](const Node& p, const Node& q) { return nid(p) < nid(q); });
      Eigen::MatrixXd bary(4, 4);
      for (int k = 0; k < 4; ++k) bary.col(k) = node_bary(corners[k]);
      record(3, id, {3, s}, bary);
    };
    for (int a = 0; a < 4; ++a) {
      std::array<Node, 4> corners{};
      corners[0] = {a, a};
      int k = 1;
      for (int c = 0; c < 4; ++c)
        if (c != a) corners[k++] = {std::min(a, c), std::max(a, c)};
      add_subtet(corners);
    }
    // Central octahedron, split along its shortest diagonal.
    const std::array<std::array<Node, 2>, 3> diag{{
        {{{0, 1}, {2, 3}}},
        {{{0, 2}, {1, 3}}},
        {{{0, 3}, {1, 2}}},
    }};
    int best = 0;
    double best_len = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      double len = (npos(diag[k][0]) - npos(diag[k][1])).norm();
      if (len < best_len - 1e-12 * y.max_edge_length()) {
        best_len = len;
        best = k;
      }
    }
    Node d0 = diag[best][0], d1 = diag[best][1];
    std::vector<Node> eq;
    for (int a = 0; a < 4; ++a)
      for (int c = a + 1; c < 4; ++c) {
        Node p{a, c};
        if (p != d0 && p != d1) eq.push_back(p);
      }
    auto shares = [](Node p, Node q) {
      return p.first == q.first || p.first == q.second || p.second == q.first ||
             p.second == q.second;
    };
    if (!shares(eq[0], eq[1])) std::swap(eq[1], eq[2]);
    if (!shares(eq[1], eq[2])) std::swap(eq[2], eq[3]);
    for (int k = 0; k < 4; ++k) add_subtet({d0, d1, eq[k], eq[(k + 1) % 4]});

    // Boundary sub-triangles and face midsegments carry the original facets.
    for (int f = 0; f < 4; ++f) {
      CellRef tri{2, sc.facets[f]};
      const std::vector<int>& fm = sc.facet_corner_map[f];
      auto face_bary = [&](Node p) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(3);
        for (int j = 0; j < 3; ++j) {
          if (fm[j] == p.first) col[j] += p.first == p.second ? 1.0 : 0.5;
          if (fm[j] == p.second && p.first != p.second) col[j] += 0.5;
        }
        return col;
      };
      std::array<int, 3> fc{fm[0], fm[1], fm[2]};
      auto mk = [&](int u, int v) { return Node{std::min(u, v), std::max(u, v)}; };
      std::array<Node, 3> fmid{mk(fc[1], fc[2]), mk(fc[0], fc[2]), mk(fc[0], fc[1])};
      auto pend_tri = [&](std::array<Node, 3> corners) {
        std::sort(corners.begin(), corners.end(),
                  [&](const Node& p, const Node& q) { return nid(p) < nid(q); });
        Eigen::MatrixXd bar(3, 3);
        for (int k = 0; k < 3; ++k) bar.col(k) = face_bary(corners[k]);
        pending_tris.push_back({{nid(corners[0]), nid(corners[1]), nid(corners[2])}, tri, bar});
      };
      for (int k = 0; k < 3; ++k)
        pend_tri({Node{fc[k], fc[k]}, fmid[(k + 2) % 3], fmid[(k + 1) % 3]});
      pend_tri(fmid);
      for (int k = 0; k < 3; ++k) {
        Node pa = fmid[k], pb = fmid[(k + 1) % 3];
        Eigen::MatrixXd bar(3, 2);
        bar.col(0) = face_bary(pa);
        bar.col(1) = face_bary(pb);
        pending_edges.push_back({{nid(pa), nid(pb)}, tri, bar});
      }
    }
  }

  SimplicialLengthComplex z = b.build();

  for (int d = 0; d <= kMaxDim; ++d) {
    m.carrier[d].resize(z.cell_count(d), CellRef{});
    m.carrier_bary[d].resize(z.cell_count(d));
  }

  // Resolve pendings by vertex tuple (all implicit cells are plain).
  std::map<std::array<int, 3>, int> tri_by_tuple;
  for (int t = 0; t < z.cell_count(2); ++t) {
    std::array<int, 3> key{z.cell(2, t).vertices[0], z.cell(2, t).vertices[1],
                           z.cell(2, t).vertices[2]};
    std::sort(key.begin(), key.end());
    if (key[0] != key[1] && key[1] != key[2]) tri_by_tuple.emplace(key, t);
  }
  std::map<std::pair<int, int>, std::vector<int>> edge_by_pair;
  for (int e = 0; e < z.cell_count(1); ++e) {
    const Cell& ec = z.cell(1, e);
    edge_by_pair[{std::min(ec.vertices[0], ec.vertices[1]),
                  std::max(ec.vertices[0], ec.vertices[1])}]
        .push_back(e);
  }
  for (const PendingTri& pt : pending_tris) {
    auto it = tri_by_tuple.find(pt.verts);
    if (it == tri_by_tuple.end()) continue;
    // Plain-triangle corners are ascending, matching pt.verts.
    record(2, it->second, pt.carrier, pt.bary);
  }
  for (const PendingEdge& pe : pending_edges) {
    auto it = edge_by_pair.find(
        {std::min(pe.verts[0], pe.verts[1]), std::max(pe.verts[0], pe.verts[1])});
    if (it == edge_by_pair.end()) continue;
    for (int e : it->second) {
      if (m.carrier[1][e].dim >= 0) continue;
      Eigen::MatrixXd bar = pe.bary;
      if (z.cell(1, e).vertices[0] != pe.verts[0]) bar.col(0).swap(bar.col(1));
      record(1, e, pe.carrier, bar);
    }
  }

  // Remaining cells are interior to subdivided tetrahedra: inherit the
  // carrier through the enclosing cell's facet maps.
  for (int d = kMaxDim; d >= 2; --d) {
    for (int i = 0; i < z.cell_count(d); ++i) {
      if (m.carrier[d][i].dim < 0) continue;
      const Cell& c = z.cell(d, i);
      for (int f = 0; f < static_cast<int>(c.facets.size()); ++f) {
        int fi = c.facets[f];
        if (m.carrier[d - 1][fi].dim >= 0) continue;
        const std::vector<int>& fm = c.facet_corner_map[f];
        Eigen::MatrixXd bar(m.carrier_bary[d][i].rows(), d);
        for (int j = 0; j < d; ++j) bar.col(j) = m.carrier_bary[d][i].col(fm[j]);
        record(d - 1, fi, m.carrier[d][i], bar);
      }
    }
  }

  return {std::move(z), std::move(m)};
}

}  // namespace

SimplicialLengthComplex subdivide(const SimplicialLengthComplex& x, int levels,
                                  SubdivisionMap* map) {
  if (levels < 0) throw std::invalid_argument("negative subdivision level");
  SubdivisionMap acc = identity_map(x);
  SimplicialLengthComplex cur = x;
  for (int l = 0; l < levels; ++l) {
    LevelResult r = subdivide_once(cur);
    acc = compose(acc, r.map);
    cur = std::move(r.complex);
  }
  if (map) *map = std::move(acc);
  return cur;
}

}  // namespace polyscal
