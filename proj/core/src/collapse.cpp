#include "polyscal/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "polyscal/comparison.hpp"
#include "polyscal/cover.hpp"

namespace polyscal {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Containment margin: twice the distance resolution of the exact routes;
// ties count as failures.
constexpr double kMargin = 2e-9;

int space_dimension(const SimplicialLengthComplex& x) {
  const auto& tops = x.top_cells();
  if (tops.empty()) throw std::invalid_argument("collapse operations require a nonempty complex");
  const int n = tops.front().dim;
  for (const auto& t : tops)
    if (t.dim != n)
      throw std::invalid_argument("collapse operations require a pure-dimensional complex");
  return n;
}

/// A shared development of one large cover patch around a fixed basepoint.
/// Distances from any candidate center are then read off the plane without
/// rebuilding covers: a candidate's nearest lift sits at distance d0 from
/// the basepoint, so plane distances from it are certified up to
/// safe_radius - d0 (everything absent from the patch is farther).
struct DevContext {
  bool valid = false;
  CoverPatch patch;
  FlatDevelopment dev;
  double safe = 0.0;
  double base_x = 0.0, base_y = 0.0;
  std::vector<std::vector<int>> vertex_lifts;                      // base vertex -> patch vertices
  std::array<std::map<int, std::vector<int>>, kMaxDim + 1> lifts;  // dim -> base -> patch cells
};

/// The working subdivision: the complex the certificate cells refer to,
/// the scale function carried onto its vertices, and the carrier map back
/// to the input complex (absent at level 0, where the input is used as is).
struct Working {
  SimplicialLengthComplex s;
  ScaleFunction rho;
  int level = 0;
  std::optional<SubdivisionMap> map;
  const SimplicialLengthComplex* base = nullptr;
  std::optional<DevContext> devctx;

  MetricPoint to_base(const MetricPoint& p) const {
    return map ? map->map_point(*base, p) : p;
  }
};

Working build_working(const SimplicialLengthComplex& x, const ScaleFunction& rho, int level) {
  rho.check_valid(x);
  Working w;
  w.base = &x;
  w.level = std::max(0, level);
  if (w.level == 0) {
    w.s = x;
    w.rho = rho;
    return w;
  }
  SubdivisionMap map;
  w.s = subdivide(x, w.level, &map);
  w.rho.lipschitz = rho.lipschitz;
  w.rho.vertex_values.resize(w.s.vertex_count());
  for (int v = 0; v < w.s.vertex_count(); ++v)
    w.rho.vertex_values[v] = rho.eval(x, map.vertex_point(x, v));
  w.map = std::move(map);
  return w;
}

bool cell_in_range(const SimplicialLengthComplex& s, CellId c) {
  return c.dim >= 0 && c.dim <= kMaxDim && c.index >= 0 && c.index < s.cell_count(c.dim);
}

void add_faces(const SimplicialLengthComplex& s, CellId c, std::set<CellId>& out) {
  if (!out.insert(c).second) return;
  if (c.dim == 0) return;
  const Cell& cell = s.cell(c.dim, c.index);
  if (c.dim == 1) {
    out.insert({0, cell.vertices[0]});
    out.insert({0, cell.vertices[1]});
    return;
  }
  for (int f : cell.facets) add_faces(s, {c.dim - 1, f}, out);
}

std::set<CellId> face_closure(const SimplicialLengthComplex& s, const std::vector<CellId>& cells) {
  std::set<CellId> out;
  for (CellId c : cells) add_faces(s, c, out);
  return out;
}

std::vector<CellId> upward_closure(const SimplicialLengthComplex& s,
                                   const std::vector<CellId>& cells) {
  std::set<CellId> out(cells.begin(), cells.end());
  std::deque<CellId> queue(cells.begin(), cells.end());
  while (!queue.empty()) {
    const CellId c = queue.front();
    queue.pop_front();
    for (const auto& [cof, slot] : s.cofacets(c.dim, c.index)) {
      (void)slot;
      if (out.insert({c.dim + 1, cof}).second) queue.push_back({c.dim + 1, cof});
    }
  }
  return {out.begin(), out.end()};
}

double cell_longest_edge(const SimplicialLengthComplex& s, CellId c) {
  if (c.dim == 0) return 0.0;
  if (c.dim == 1) return s.cell(1, c.index).length;
  std::set<CellId> faces;
  add_faces(s, c, faces);
  double longest = 0.0;
  for (CellId f : faces)
    if (f.dim == 1) longest = std::max(longest, s.cell(1, f.index).length);
  return longest;
}

std::vector<int> cell_vertices(const SimplicialLengthComplex& s, CellId c) {
  if (c.dim == 0) return {c.index};
  const auto& vs = s.cell(c.dim, c.index).vertices;
  return {vs.begin(), vs.end()};
}

/// Certified bounds on sup over a closed cell set of d(center, .).
struct RadiusBound {
  double upper = kInf;    // sound upper bound (+inf when not certified)
  double lower = 0.0;     // sound lower bound on the sup
  bool exact = false;
  int witness_vertex = -1;  // far vertex realizing `lower`
  CellId worst_cell{0, -1};
};

// ---------------------------------------------------------------------------
// 1-complexes: exact eccentricity over a cell set from exact edge labels.

double edge_max_distance(const DistanceField& f, const SimplicialLengthComplex& s, int e) {
  const Cell& c = s.cell(1, e);
  const double len = c.length;
  const double dl = f.vertex_label(c.vertices[0]);
  const double dr = f.vertex_label(c.vertices[1]);
  if (!std::isfinite(dl) || !std::isfinite(dr)) return kInf;
  const MetricPoint& src = f.source();
  const bool source_edge = src.dim == 1 && src.cell == e;
  const double s0 = source_edge ? src.bary[1] * len : 0.0;
  const auto value = [&](double t) {
    double d = std::min(dl + t, dr + (len - t));
    if (source_edge) d = std::min(d, std::abs(t - s0));
    return d;
  };
  std::vector<double> knots = {0.0, len, (dr + len - dl) / 2.0};
  if (source_edge) {
    knots.push_back(s0);
    knots.push_back((s0 - dl) / 2.0);
    knots.push_back((dr + len + s0) / 2.0);
  }
  double best = 0.0;
  for (double t : knots) best = std::max(best, value(std::clamp(t, 0.0, len)));
  return best;
}

RadiusBound radius_1d(const SimplicialLengthComplex& s, const std::set<CellId>& closure,
                      const MetricPoint& center) {
  const DistanceField f = build_distance_field(s, center, 0);
  RadiusBound rb;
  rb.upper = 0.0;
  rb.exact = true;
  for (CellId c : closure) {
    double d = 0.0;
    if (c.dim == 0) {
      d = f.vertex_label(c.index);
      if (d > rb.lower || rb.witness_vertex < 0) rb.witness_vertex = c.index;
    } else {
      d = edge_max_distance(f, s, c.index);
    }
    if (d > rb.upper) {
      rb.upper = d;
      rb.worst_cell = c;
    }
  }
  rb.lower = rb.upper;
  // Witness: the farthest closure vertex (for center pruning).
  for (CellId c : closure)
    if (c.dim == 0 &&
        (rb.witness_vertex < 0 || f.vertex_label(c.index) > f.vertex_label(rb.witness_vertex)))
      rb.witness_vertex = c.index;
  return rb;
}

// ---------------------------------------------------------------------------
// Conservative route: graph-distance labels plus in-cell diameter slack.

RadiusBound radius_crude(const SimplicialLengthComplex& s, const std::set<CellId>& closure,
                         const MetricPoint& center, int field_level) {
  const DistanceField f = build_distance_field(s, center, field_level);
  RadiusBound rb;
  rb.upper = 0.0;
  for (CellId c : closure) {
    double ub = kInf;
    for (int v : cell_vertices(s, c)) {
      const double lbl = f.vertex_label(v);
      if (std::isfinite(lbl)) ub = std::min(ub, lbl + f.error_for(lbl));
    }
    if (std::isfinite(ub)) ub += cell_longest_edge(s, c);
    if (ub > rb.upper) {
      rb.upper = ub;
      rb.worst_cell = c;
    }
    if (c.dim == 0) {
      const double lbl = f.vertex_label(c.index);
      const double lo = std::isfinite(lbl) ? std::max(0.0, lbl - f.error_for(lbl)) : kInf;
      if (lo > rb.lower || rb.witness_vertex < 0) {
        rb.lower = lo;
        rb.witness_vertex = c.index;
      }
    }
  }
  return rb;
}

// ---------------------------------------------------------------------------
// Exact route for locally flat surfaces: one large cover patch around a
// fixed basepoint is developed once; distances from any candidate center
// are then read off the plane. Upper bounds use per-cell corner maxima over
// the best lift (a convex function on a flat cell peaks at a corner; the
// straight segment realizes the distance once the disk-isometry certificate
// holds). Lower bounds use min-over-lifts corner distances, valid
// regardless (development shortens paths), with absent lifts provably
// farther than the remaining certified radius.

void ensure_dev(Working& w) {
  if (w.devctx) return;
  w.devctx.emplace();
  DevContext& ctx = *w.devctx;
  double rho_max = 0.0;
  for (double v : w.rho.vertex_values) rho_max = std::max(rho_max, v);
  rho_max += w.rho.lipschitz * w.s.max_edge_length();
  const DistanceField probe = build_distance_field(w.s, MetricPoint::vertex(0), 1);
  double ecc_graph = 0.0;
  for (int v = 0; v < w.s.vertex_count(); ++v) {
    const double lbl = probe.vertex_label(v);  // graph labels upper-bound distances
    if (std::isfinite(lbl)) ecc_graph = std::max(ecc_graph, lbl);
  }
  const double target = ecc_graph + rho_max + w.s.max_edge_length() + 0.1;
  try {
    const Presentation pres = presentation(w.s, 0);
    const auto oracle = make_abelianized_oracle(pres);
    ctx.patch = build_cover(w.s, oracle, target);
  } catch (const std::exception&) {
    return;
  }
  const SimplicialLengthComplex& p = ctx.patch.complex();
  ctx.dev = develop_flat_surface(p);
  if (!ctx.dev.valid) return;
  ctx.safe = ctx.patch.safe_radius();
  const int base_pt = ctx.patch.basepoint_vertex();
  ctx.base_x = ctx.dev.x[base_pt];
  ctx.base_y = ctx.dev.y[base_pt];
  ctx.vertex_lifts.resize(w.s.vertex_count());
  for (int v = 0; v < p.vertex_count(); ++v)
    ctx.vertex_lifts[ctx.patch.vertex_info(v).base_vertex].push_back(v);
  for (int d = 1; d <= kMaxDim; ++d)
    for (int i = 0; i < p.cell_count(d); ++i) {
      const int b = ctx.patch.base_cell_of(d, i);
      if (b >= 0) ctx.lifts[d][b].push_back(i);
    }
  ctx.valid = true;
}

std::optional<RadiusBound> dev_certify(Working& w, const std::set<CellId>& closure,
                                       const MetricPoint& center, double needed) {
  ensure_dev(w);
  const DevContext& ctx = *w.devctx;
  if (!ctx.valid) return std::nullopt;
  const SimplicialLengthComplex& p = ctx.patch.complex();
  const auto lift_xy = [&](int dim, int patch_cell, const Eigen::VectorXd& bary) {
    if (dim == 0) return std::make_pair(ctx.dev.x[patch_cell], ctx.dev.y[patch_cell]);
    const auto& vs = p.cell(dim, patch_cell).vertices;
    double x = 0.0, y = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      x += bary[static_cast<Eigen::Index>(i)] * ctx.dev.x[vs[i]];
      y += bary[static_cast<Eigen::Index>(i)] * ctx.dev.y[vs[i]];
    }
    return std::make_pair(x, y);
  };
  // Nearest lift of the center to the basepoint.
  double cx = 0.0, cy = 0.0, d0 = kInf;
  MetricPoint center_lift;
  const auto consider = [&](int dim, int patch_cell) {
    const auto [x, y] = lift_xy(dim, patch_cell, center.bary);
    const double d = std::hypot(x - ctx.base_x, y - ctx.base_y);
    if (d < d0) {
      d0 = d;
      cx = x;
      cy = y;
      center_lift = dim == 0 ? MetricPoint::vertex(patch_cell)
                             : MetricPoint::on_cell(dim, patch_cell, center.bary);
    }
  };
  if (center.dim == 0) {
    for (int pv : ctx.vertex_lifts[center.cell]) consider(0, pv);
  } else {
    auto it = ctx.lifts[center.dim].find(center.cell);
    if (it != ctx.lifts[center.dim].end())
      for (int pc : it->second) consider(center.dim, pc);
  }
  if (!std::isfinite(d0)) return std::nullopt;
  const double allowed = ctx.safe - d0;
  if (!(allowed > 0.0)) return std::nullopt;

  RadiusBound rb;
  rb.upper = 0.0;
  bool missing = false;
  for (const CellId& c : closure) {
    double ub = kInf;
    if (c.dim == 0) {
      for (int pv : ctx.vertex_lifts[c.index])
        ub = std::min(ub, std::hypot(ctx.dev.x[pv] - cx, ctx.dev.y[pv] - cy));
      const double lo = std::min(ub, allowed);
      if (lo > rb.lower || rb.witness_vertex < 0) {
        rb.lower = lo;
        rb.witness_vertex = c.index;
      }
    } else {
      auto it = ctx.lifts[c.dim].find(c.index);
      if (it != ctx.lifts[c.dim].end()) {
        for (int pc : it->second) {
          double corner_max = 0.0;
          for (int v : p.cell(c.dim, pc).vertices)
            corner_max =
                std::max(corner_max, std::hypot(ctx.dev.x[v] - cx, ctx.dev.y[v] - cy));
          ub = std::min(ub, corner_max);
        }
      }
    }
    if (!std::isfinite(ub)) missing = true;
    if (!(ub <= rb.upper)) {
      rb.upper = ub;
      rb.worst_cell = c;
    }
  }
  if (!missing && rb.upper <= allowed &&
      developed_disk_isometric(ctx.dev, p, center_lift, rb.upper)) {
    rb.exact = true;
    return rb;
  }
  if (rb.lower >= needed - kMargin) {
    rb.upper = kInf;  // not certified, but the failure is
    return rb;
  }
  return std::nullopt;
}

RadiusBound certify_set_radius(Working& w, int n, const std::set<CellId>& closure,
                               const MetricPoint& center, double needed, int field_level) {
  if (closure.empty()) return {0.0, 0.0, true, -1, {0, -1}};
  if (n == 1) return radius_1d(w.s, closure, center);
  if (n == 2) {
    if (auto exact = dev_certify(w, closure, center, needed)) return *exact;
  }
  return radius_crude(w.s, closure, center, field_level);
}

int effective_field_level(int field_level, int working_level) {
  return std::max(1, field_level - working_level);
}

// ---------------------------------------------------------------------------
// Components of the complement of a closed subcomplex.

struct Components {
  std::vector<std::vector<CellId>> cells;  // per component, sorted
};

Components complement_components(const SimplicialLengthComplex& s, const std::set<CellId>& y) {
  std::map<CellId, int> index;
  std::vector<CellId> all;
  for (int d = 0; d <= kMaxDim; ++d)
    for (int i = 0; i < s.cell_count(d); ++i) {
      const CellId c{d, i};
      if (!y.count(c)) {
        index[c] = static_cast<int>(all.size());
        all.push_back(c);
      }
    }
  std::vector<int> parent(all.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  const auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  const auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
  for (const CellId& c : all) {
    if (c.dim == 0) continue;
    for (int v : cell_vertices(s, c)) {
      auto it = index.find({0, v});
      if (it != index.end()) unite(index[c], it->second);
    }
    if (c.dim >= 2)
      for (int f : s.cell(c.dim, c.index).facets) {
        auto it = index.find({c.dim - 1, f});
        if (it != index.end()) unite(index[c], it->second);
      }
  }
  std::map<int, int> roots;
  Components out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int r = find(static_cast<int>(i));
    auto [it, fresh] = roots.try_emplace(r, static_cast<int>(out.cells.size()));
    if (fresh) out.cells.emplace_back();
    out.cells[it->second].push_back(all[i]);
  }
  return out;
}

// Candidate centers for a component, ordered by a double-sweep hop
// eccentricity heuristic (central vertices first). Deterministic.
std::vector<int> ordered_center_candidates(const SimplicialLengthComplex& s,
                                           const std::vector<CellId>& component, int cap) {
  std::vector<int> verts;
  std::set<int> vset;
  for (const CellId& c : component)
    if (c.dim == 0) {
      verts.push_back(c.index);
      vset.insert(c.index);
    }
  if (verts.empty()) return {};
  std::map<int, std::vector<int>> adj;
  for (const CellId& c : component)
    if (c.dim == 1) {
      const Cell& e = s.cell(1, c.index);
      if (vset.count(e.vertices[0]) && vset.count(e.vertices[1])) {
        adj[e.vertices[0]].push_back(e.vertices[1]);
        adj[e.vertices[1]].push_back(e.vertices[0]);
      }
    }
  const auto bfs = [&](int start) {
    std::map<int, int> depth;
    depth[start] = 0;
    std::deque<int> q{start};
    int far = start;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      if (depth[u] > depth[far] || (depth[u] == depth[far] && u < far)) far = u;
      for (int v : adj[u])
        if (!depth.count(v) && v != start) {
          depth[v] = depth[u] + 1;
          q.push_back(v);
        }
    }
    return std::make_pair(depth, far);
  };
  auto [d1, u1] = bfs(verts.front());
  auto [d2, u2] = bfs(u1);
  auto [d3, u3] = bfs(u2);
  (void)u3;
  std::vector<std::pair<int, int>> ranked;
  ranked.reserve(verts.size());
  for (int v : verts) {
    const int a = d2.count(v) ? d2[v] : static_cast<int>(verts.size());
    const int b = d3.count(v) ? d3[v] : static_cast<int>(verts.size());
    ranked.emplace_back(std::max(a, b), v);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  for (const auto& [r, v] : ranked) {
    (void)r;
    out.push_back(v);
    if (static_cast<int>(out.size()) >= cap) break;
  }
  return out;
}

struct ComponentCenter {
  int vertex = -1;
  MetricPoint point;
  double certified = kInf;
  double rho = 0.0;
  bool definitive_fail = true;  // every candidate provably fails
  double best_lower = kInf;     // smallest certified sup among candidates
};

// Finds an admissible center for one component, or establishes failure
// (definitive when every candidate carries a certified lower bound at or
// beyond its own scale value).
ComponentCenter find_component_center(Working& w, int n, const std::vector<CellId>& component,
                                      int center_budget, int field_level) {
  ComponentCenter out;
  const std::set<CellId> closure = face_closure(w.s, component);
  std::vector<int> candidates = ordered_center_candidates(w.s, component, center_budget);
  if (candidates.empty()) {
    // No vertex in the component (isolated open cells): centroid fallback.
    out.definitive_fail = false;  // the candidate list, not the geometry, ran out
    for (const CellId& c : component)
      if (c.dim >= 1) {
        const MetricPoint mid = MetricPoint::on_cell(
            c.dim, c.index, Eigen::VectorXd::Constant(c.dim + 1, 1.0 / (c.dim + 1)));
        const double rho = w.rho.eval(w.s, mid);
        const RadiusBound rb = certify_set_radius(w, n, closure, mid, rho, field_level);
        out.best_lower = std::min(out.best_lower, rb.lower);
        if (rb.upper < rho - kMargin) {
          out.vertex = -2;  // non-vertex center marker
          out.point = mid;
          out.certified = rb.upper;
          out.rho = rho;
        } else if (rb.lower >= rho - kMargin) {
          out.definitive_fail = true;  // this center fails provably; others unexplored
        }
        break;
      }
    return out;
  }
  for (int v : candidates) {
    const double rho = w.rho.eval(w.s, MetricPoint::vertex(v));
    const RadiusBound rb =
        certify_set_radius(w, n, closure, MetricPoint::vertex(v), rho, field_level);
    out.best_lower = std::min(out.best_lower, rb.lower);
    if (rb.upper < rho - kMargin) {
      out.vertex = v;
      out.point = MetricPoint::vertex(v);
      out.certified = rb.upper;
      out.rho = rho;
      out.definitive_fail = false;
      return out;
    }
    if (rb.lower < rho - kMargin) out.definitive_fail = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certificate checking.

std::map<CellId, std::vector<int>> set_memberships(const CoveringCertificate& cert) {
  std::map<CellId, std::vector<int>> m;
  for (std::size_t i = 0; i < cert.sets.size(); ++i)
    for (const CellId& c : cert.sets[i].cells) m[c].push_back(static_cast<int>(i));
  return m;
}

CertificateVerdict check_certificate_impl(Working& w, const CoveringCertificate& cert,
                                          int field_level) {
  const int n = space_dimension(w.s);
  CertificateVerdict v;
  if (cert.sets.empty()) {
    v.reason = "certificate has no sets";
    return v;
  }
  for (std::size_t i = 0; i < cert.sets.size(); ++i) {
    std::set<CellId> listed(cert.sets[i].cells.begin(), cert.sets[i].cells.end());
    if (listed.empty()) {
      v.reason = "set " + std::to_string(i) + " is empty";
      v.witness_set = static_cast<int>(i);
      return v;
    }
    for (const CellId& c : listed) {
      if (!cell_in_range(w.s, c)) {
        v.reason = "set " + std::to_string(i) + " lists a cell outside the subdivision";
        v.witness_set = static_cast<int>(i);
        v.witness_cell = c;
        return v;
      }
      for (const auto& [cof, slot] : w.s.cofacets(c.dim, c.index)) {
        (void)slot;
        if (!listed.count({c.dim + 1, cof})) {
          v.reason = "set " + std::to_string(i) +
                     " is not an open star-union (a listed cell has an unlisted coface)";
          v.witness_set = static_cast<int>(i);
          v.witness_cell = c;
          return v;
        }
      }
    }
  }
  const auto members = set_memberships(cert);
  int mult = 0;
  for (int d = 0; d <= kMaxDim; ++d)
    for (int i = 0; i < w.s.cell_count(d); ++i) {
      const CellId c{d, i};
      auto it = members.find(c);
      const int count = it == members.end() ? 0 : static_cast<int>(it->second.size());
      if (count == 0) {
        v.reason = "covering fails: a cell belongs to no set";
        v.witness_cell = c;
        return v;
      }
      mult = std::max(mult, count);
    }
  v.multiplicity = mult;
  if (mult > n) {
    v.reason = "multiplicity " + std::to_string(mult) + " exceeds the dimension " +
               std::to_string(n);
    return v;
  }
  for (std::size_t i = 0; i < cert.sets.size(); ++i) {
    const CoverSet& set = cert.sets[i];
    const double rho = w.rho.eval(w.s, set.center);
    if (std::abs(set.radius - rho) > 1e-9 * (1.0 + std::abs(rho))) {
      v.reason = "set " + std::to_string(i) + " radius does not match the scale function";
      v.witness_set = static_cast<int>(i);
      return v;
    }
    const std::set<CellId> closure = face_closure(w.s, set.cells);
    const RadiusBound rb = certify_set_radius(w, n, closure, set.center, set.radius, field_level);
    if (!(rb.upper < set.radius - kMargin)) {
      v.reason = rb.lower >= set.radius - kMargin
                     ? "containment fails for set " + std::to_string(i)
                     : "containment not certified for set " + std::to_string(i);
      v.witness_set = static_cast<int>(i);
      v.witness_cell = rb.worst_cell;
      v.worst_distance = std::isfinite(rb.upper) ? rb.upper : rb.lower;
      v.worst_allowed = set.radius - kMargin;
      return v;
    }
    v.worst_distance = std::max(v.worst_distance, rb.upper);
  }
  v.pass = true;
  return v;
}

// ---------------------------------------------------------------------------
// Separator checking (internal core shared with the sweep).

double separator_measure(const SimplicialLengthComplex& s, int n, const std::set<CellId>& y) {
  double total = 0.0;
  for (const CellId& c : y)
    if (c.dim == n - 1) total += s.cell_measure(c.dim, c.index);
  return total;
}

SeparatorVerdict check_separator_impl(Working& w, const std::vector<CellId>& cells,
                                      int center_budget, int field_level) {
  const int n = space_dimension(w.s);
  SeparatorVerdict out;
  for (const CellId& c : cells) {
    if (!cell_in_range(w.s, c))
      throw std::invalid_argument("separator lists a cell outside the subdivision");
    if (c.dim > n - 1)
      throw std::invalid_argument("separator cells must have dimension at most dim X - 1");
  }
  const std::set<CellId> y = face_closure(w.s, cells);
  out.measure = separator_measure(w.s, n, y);
  const Components comps = complement_components(w.s, y);
  if (comps.cells.empty()) {
    out.reason = "separator consumes the whole space";
    return out;
  }
  for (std::size_t k = 0; k < comps.cells.size(); ++k) {
    SeparatorComponent sc;
    sc.cells = comps.cells[k];
    const ComponentCenter cc =
        find_component_center(w, n, comps.cells[k], center_budget, field_level);
    if (cc.vertex == -1) {
      out.witness_component = static_cast<int>(k);
      out.reason = cc.definitive_fail
                       ? "component " + std::to_string(k) +
                             " fits in no admissible ball (certified lower bound " +
                             std::to_string(cc.best_lower) + ")"
                       : "no admissible center certified for component " + std::to_string(k);
      out.components.push_back(std::move(sc));
      return out;  // one failing component settles the verdict
    }
    sc.center_vertex = cc.vertex;
    sc.center = cc.point;
    sc.certified_radius = cc.certified;
    sc.rho_at_center = cc.rho;
    out.components.push_back(std::move(sc));
  }
  out.pass = true;
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers.

nlohmann::json point_to_json(const MetricPoint& p) {
  nlohmann::json j;
  j["dim"] = p.dim;
  j["cell"] = p.cell;
  j["bary"] = std::vector<double>(p.bary.data(), p.bary.data() + p.bary.size());
  return j;
}

MetricPoint point_from_json(const nlohmann::json& j) {
  MetricPoint p;
  p.dim = j.at("dim").get<int>();
  p.cell = j.at("cell").get<int>();
  const auto b = j.at("bary").get<std::vector<double>>();
  p.bary = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  return p;
}

nlohmann::json cells_to_json(const std::vector<CellId>& cells) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CellId& c : cells) arr.push_back({c.dim, c.index});
  return arr;
}

std::vector<CellId> cells_from_json(const nlohmann::json& arr) {
  std::vector<CellId> out;
  for (const auto& e : arr) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

CertificateVerdict check_certificate(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                     const CoveringCertificate& cert) {
  Working w = build_working(x, rho, cert.subdivision_level);
  return check_certificate_impl(w, cert, effective_field_level(3, w.level));
}

NerveMap nerve_of_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                           const CoveringCertificate& cert) {
  const CertificateVerdict v = check_certificate(x, rho, cert);
  if (!v.pass) throw std::invalid_argument("invalid certificate: " + v.reason);
  Working w = build_working(x, rho, cert.subdivision_level);
  const auto members = set_memberships(cert);
  const int m = static_cast<int>(cert.sets.size());

  NerveMap out;
  out.dimension = v.multiplicity - 1;
  std::set<std::array<int, 2>> edges;
  std::set<std::array<int, 3>> triangles;
  for (const auto& [cell, sets] : members) {
    (void)cell;
    for (std::size_t a = 0; a < sets.size(); ++a)
      for (std::size_t b = a + 1; b < sets.size(); ++b) {
        edges.insert({sets[a], sets[b]});
        for (std::size_t c = b + 1; c < sets.size(); ++c)
          triangles.insert({sets[a], sets[b], sets[c]});
      }
  }
  ComplexBuilder builder;
  for (int i = 0; i < m; ++i)
    builder.add_vertex(cert.sets[i].name.empty() ? "U" + std::to_string(i) : cert.sets[i].name);
  for (const auto& e : edges) builder.add_edge(e[0], e[1], 1.0);
  for (const auto& t : triangles) builder.add_triangle(t[0], t[1], t[2]);
  out.nerve = builder.build();

  // Partition of unity: hop depth into each set, zero outside, normalized.
  std::vector<std::vector<int>> adjacency(w.s.vertex_count());
  for (int e = 0; e < w.s.cell_count(1); ++e) {
    const Cell& c = w.s.cell(1, e);
    adjacency[c.vertices[0]].push_back(c.vertices[1]);
    adjacency[c.vertices[1]].push_back(c.vertices[0]);
  }
  out.weights.assign(w.s.vertex_count(), std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    std::set<int> listed;
    for (const CellId& c : cert.sets[i].cells)
      if (c.dim == 0) listed.insert(c.index);
    std::vector<int> depth(w.s.vertex_count(), -1);
    std::deque<int> queue;
    for (int vtx = 0; vtx < w.s.vertex_count(); ++vtx)
      if (!listed.count(vtx)) {
        depth[vtx] = 0;
        queue.push_back(vtx);
      }
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int nb : adjacency[u])
        if (depth[nb] < 0) {
          depth[nb] = depth[u] + 1;
          queue.push_back(nb);
        }
    }
    for (int vtx : listed)
      out.weights[vtx][i] = depth[vtx] < 0 ? static_cast<double>(w.s.vertex_count()) : depth[vtx];
  }
  for (int vtx = 0; vtx < w.s.vertex_count(); ++vtx) {
    double sum = 0.0;
    for (double wgt : out.weights[vtx]) sum += wgt;
    if (sum <= 0.0) throw std::logic_error("partition of unity vanished at a covered vertex");
    for (double& wgt : out.weights[vtx]) wgt /= sum;
  }
  return out;
}

CoveringCertificate star_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                  int subdivision_level, const SimplicialLengthComplex& target,
                                  const SimplicialMapData& map_data) {
  Working w = build_working(x, rho, subdivision_level);
  const int n = space_dimension(w.s);
  int target_dim = 0;
  for (int d = kMaxDim; d >= 1; --d)
    if (target.cell_count(d) > 0) {
      target_dim = d;
      break;
    }
  if (target_dim > n - 1)
    throw std::invalid_argument("star covering requires dim target <= dim X - 1");
  if (static_cast<int>(map_data.vertex_image.size()) != w.s.vertex_count())
    throw std::invalid_argument("vertex image list does not match the subdivision");
  for (int img : map_data.vertex_image)
    if (img < 0 || img >= target.vertex_count())
      throw std::invalid_argument("vertex image out of range");

  std::set<std::vector<int>> target_cells;
  for (int d = 1; d <= target_dim; ++d)
    for (int i = 0; i < target.cell_count(d); ++i) {
      std::vector<int> vs = cell_vertices(target, {d, i});
      std::sort(vs.begin(), vs.end());
      vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
      if (static_cast<int>(vs.size()) == d + 1) target_cells.insert(vs);
    }
  for (int d = 1; d <= kMaxDim; ++d)
    for (int i = 0; i < w.s.cell_count(d); ++i) {
      std::vector<int> img;
      for (int v : cell_vertices(w.s, {d, i})) img.push_back(map_data.vertex_image[v]);
      std::sort(img.begin(), img.end());
      img.erase(std::unique(img.begin(), img.end()), img.end());
      if (img.size() >= 2 && !target_cells.count(img))
        throw std::invalid_argument("map is not simplicial: corner images of a cell span no "
                                    "target cell");
    }

  CoveringCertificate cert;
  cert.subdivision_level = subdivision_level;
  const int field_level = effective_field_level(3, w.level);
  for (int p = 0; p < target.vertex_count(); ++p) {
    CoverSet set;
    set.name = target.vertex_name(p);
    for (int d = 0; d <= kMaxDim; ++d)
      for (int i = 0; i < w.s.cell_count(d); ++i) {
        bool touches = false;
        for (int v : cell_vertices(w.s, {d, i}))
          if (map_data.vertex_image[v] == p) {
            touches = true;
            break;
          }
        if (touches) set.cells.push_back({d, i});
      }
    if (set.cells.empty()) continue;
    const std::set<CellId> closure = face_closure(w.s, set.cells);
    bool found = false;
    for (int v = 0; v < w.s.vertex_count() && !found; ++v) {
      if (map_data.vertex_image[v] != p) continue;
      const double rho_v = w.rho.eval(w.s, MetricPoint::vertex(v));
      const RadiusBound rb =
          certify_set_radius(w, n, closure, MetricPoint::vertex(v), rho_v, field_level);
      if (rb.upper < rho_v - kMargin) {
        set.center = MetricPoint::vertex(v);
        set.radius = rho_v;
        found = true;
      }
    }
    if (!found)
      throw std::runtime_error("star covering: fiber of target vertex '" +
                               target.vertex_name(p) + "' is not contained in any center ball");
    cert.sets.push_back(std::move(set));
  }
  int mult = 0;
  for (const auto& [cell, sets] : set_memberships(cert)) {
    (void)cell;
    mult = std::max(mult, static_cast<int>(sets.size()));
  }
  cert.multiplicity = mult;
  return cert;
}

CoveringCertificate star_covering(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                  const CoveringCertificate& cert, const NerveMap& nerve) {
  Working w = build_working(x, rho, cert.subdivision_level);
  if (nerve.weights.size() != static_cast<std::size_t>(w.s.vertex_count()))
    throw std::invalid_argument("nerve weights do not match the subdivision");
  CoveringCertificate out;
  out.subdivision_level = cert.subdivision_level;
  for (std::size_t i = 0; i < cert.sets.size(); ++i) {
    CoverSet set;
    set.name = cert.sets[i].name;
    set.center = cert.sets[i].center;
    set.radius = cert.sets[i].radius;
    for (const CellId& c : cert.sets[i].cells) {
      bool positive = false;
      for (int v : cell_vertices(w.s, c))
        if (nerve.weights[v][i] > 0.0) {
          positive = true;
          break;
        }
      if (positive) set.cells.push_back(c);
    }
    if (!set.cells.empty()) out.sets.push_back(std::move(set));
  }
  int mult = 0;
  for (const auto& [cell, sets] : set_memberships(out)) {
    (void)cell;
    mult = std::max(mult, static_cast<int>(sets.size()));
  }
  out.multiplicity = mult;
  return out;
}

SeparatorVerdict check_separator(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                 const Separator& y, int center_budget) {
  Working w = build_working(x, rho, y.subdivision_level);
  return check_separator_impl(w, y.cells, center_budget, effective_field_level(3, w.level));
}

ExtendResult extend_collapse(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                             const Separator& y, const CoveringCertificate& y_cert) {
  ExtendResult out;
  Working w = build_working(x, rho, y.subdivision_level);
  const int n = space_dimension(w.s);
  const int field_level = effective_field_level(3, w.level);
  if (y_cert.subdivision_level != y.subdivision_level) {
    out.reason = "separator certificate declared at a different subdivision level";
    return out;
  }
  const std::set<CellId> yset = face_closure(w.s, y.cells);
  for (const auto& set : y_cert.sets)
    for (const CellId& c : set.cells)
      if (!yset.count(c)) {
        out.reason = "separator certificate lists cells outside the separator";
        return out;
      }
  int ymult = 0;
  for (const auto& [cell, sets] : set_memberships(y_cert)) {
    (void)cell;
    ymult = std::max(ymult, static_cast<int>(sets.size()));
  }
  if (ymult > n - 1) {
    out.reason = "separator certificate multiplicity " + std::to_string(ymult) +
                 " exceeds dim X - 1 = " + std::to_string(n - 1);
    return out;
  }
  const SeparatorVerdict sv = check_separator_impl(w, y.cells, 48, field_level);
  if (!sv.pass) {
    out.reason = "separator does not separate: " + sv.reason;
    return out;
  }

  CoveringCertificate cert;
  cert.subdivision_level = y.subdivision_level;
  for (std::size_t i = 0; i < y_cert.sets.size(); ++i) {
    CoverSet set;
    set.name = y_cert.sets[i].name.empty() ? "thickened-" + std::to_string(i)
                                           : y_cert.sets[i].name;
    set.cells = upward_closure(w.s, y_cert.sets[i].cells);
    set.center = y_cert.sets[i].center;
    set.radius = w.rho.eval(w.s, set.center);
    const std::set<CellId> closure = face_closure(w.s, set.cells);
    const RadiusBound rb = certify_set_radius(w, n, closure, set.center, set.radius, field_level);
    if (!(rb.upper < set.radius - kMargin)) {
      out.reason = "thickening of set " + std::to_string(i) +
                   " escapes its ball at this subdivision level";
      return out;
    }
    cert.sets.push_back(std::move(set));
  }
  for (std::size_t k = 0; k < sv.components.size(); ++k) {
    const SeparatorComponent& sc = sv.components[k];
    CoverSet set;
    set.name = "component-" + std::to_string(k);
    set.cells = sc.cells;
    set.center = sc.center;
    set.radius = sc.rho_at_center;
    cert.sets.push_back(std::move(set));
  }
  int mult = 0;
  for (const auto& [cell, sets] : set_memberships(cert)) {
    (void)cell;
    mult = std::max(mult, static_cast<int>(sets.size()));
  }
  cert.multiplicity = mult;
  out.certificate = cert;
  out.verdict = check_certificate_impl(w, cert, field_level);
  out.ok = out.verdict.pass;
  if (!out.ok) out.reason = "assembled certificate failed verification: " + out.verdict.reason;
  return out;
}

// ---------------------------------------------------------------------------
// Dichotomy sweep.

namespace {

struct SeparatorCandidate {
  std::vector<CellId> cells;
  double measure = 0.0;
  std::string name;
};

// Level-set separator candidates: distance labels to a core (a vertex or a
// subdivided loop edge), binned at spacing s; the (n-1)-cells between
// different bins form the candidate.
std::vector<SeparatorCandidate> level_set_candidates(const Working& w, int n, int field_level,
                                                     int budget) {
  struct Core {
    std::string name;
    std::vector<int> verts;
  };
  std::vector<Core> cores;
  if (w.map && w.base) {
    std::vector<int> base_image(w.base->vertex_count(), -1);
    std::vector<std::vector<int>> edge_verts(w.base->cell_count(1));
    for (int v = 0; v < w.s.vertex_count(); ++v) {
      const MetricPoint p = w.map->vertex_point(*w.base, v);
      if (p.dim == 0) {
        base_image[p.cell] = v;
      } else if (p.dim == 1) {
        edge_verts[p.cell].push_back(v);
      }
    }
    for (int b = 0; b < w.base->vertex_count(); ++b)
      if (base_image[b] >= 0) cores.push_back({"vertex-" + std::to_string(b), {base_image[b]}});
    for (int e = 0; e < w.base->cell_count(1); ++e) {
      const Cell& c = w.base->cell(1, e);
      if (c.vertices[0] != c.vertices[1]) continue;  // loops subdivide into circles
      Core core{"loop-" + std::to_string(e), edge_verts[e]};
      if (base_image[c.vertices[0]] >= 0) core.verts.push_back(base_image[c.vertices[0]]);
      if (!core.verts.empty()) cores.push_back(std::move(core));
    }
  } else {
    const int stride = std::max(1, w.s.vertex_count() / 6);
    for (int v = 0; v < w.s.vertex_count(); v += stride)
      cores.push_back({"vertex-" + std::to_string(v), {v}});
  }

  std::vector<SeparatorCandidate> out;
  std::set<std::vector<CellId>> seen;
  for (const Core& core : cores) {
    std::vector<int> sources = core.verts;
    if (sources.size() > 24) {
      std::vector<int> sub;
      const double step = static_cast<double>(sources.size()) / 24.0;
      for (int i = 0; i < 24; ++i) sub.push_back(sources[static_cast<int>(i * step)]);
      sources = std::move(sub);
    }
    std::vector<double> label(w.s.vertex_count(), kInf);
    for (int src : sources) {
      const DistanceField f = build_distance_field(w.s, MetricPoint::vertex(src), field_level);
      for (int v = 0; v < w.s.vertex_count(); ++v)
        label[v] = std::min(label[v], f.vertex_label(v));
    }
    double reach = 0.0;
    for (double l : label)
      if (std::isfinite(l)) reach = std::max(reach, l);
    if (reach <= 0.0) continue;
    for (int k = 1; k <= 4; ++k) {
      const double s = reach / std::pow(2.0, k);
      for (int phase = 0; phase < 2; ++phase) {
        const double t0 = phase == 0 ? 0.0 : s / 2.0;
        const auto bin = [&](int top) {
          double m = 0.0;
          for (int v : cell_vertices(w.s, {n, top})) m = std::max(m, label[v]);
          if (!std::isfinite(m)) return std::numeric_limits<int>::max();
          return static_cast<int>(std::floor((m - t0) / s));
        };
        std::vector<CellId> cells;
        for (int f = 0; f < w.s.cell_count(n - 1); ++f) {
          const auto& cof = w.s.cofacets(n - 1, f);
          if (cof.size() != 2) continue;
          if (bin(cof[0].first) != bin(cof[1].first)) cells.push_back({n - 1, f});
        }
        if (cells.empty()) continue;
        if (!seen.insert(cells).second) continue;
        SeparatorCandidate cand;
        cand.measure = 0.0;
        for (const CellId& c : cells) cand.measure += w.s.cell_measure(c.dim, c.index);
        cand.name = core.name + "/spacing-" + std::to_string(k) + (phase ? "b" : "a");
        cand.cells = std::move(cells);
        out.push_back(std::move(cand));
      }
      if (static_cast<int>(out.size()) >= 4 * budget) break;
    }
  }
  std::sort(out.begin(), out.end(), [](const SeparatorCandidate& a, const SeparatorCandidate& b) {
    return a.measure != b.measure ? a.measure < b.measure : a.name < b.name;
  });
  if (static_cast<int>(out.size()) > budget) out.resize(budget);
  return out;
}

struct Extracted {
  SimplicialLengthComplex complex;
  ScaleFunction rho;
  std::vector<int> vertex_to_s;  // new vertex -> subdivision vertex
  std::vector<int> edge_to_s;    // new edge -> subdivision edge
};

// Extracts a 1-dimensional separator as a standalone complex (intrinsic
// metric; a certificate for it is stronger than one using ambient balls).
std::optional<Extracted> extract_1d(const Working& w, const std::set<CellId>& yset) {
  Extracted out;
  std::map<int, int> vmap;
  ComplexBuilder builder;
  for (const CellId& c : yset)
    if (c.dim == 0) {
      vmap[c.index] = builder.add_vertex(w.s.vertex_name(c.index));
      out.vertex_to_s.push_back(c.index);
    }
  bool any_edge = false;
  for (const CellId& c : yset)
    if (c.dim == 1) {
      const Cell& e = w.s.cell(1, c.index);
      builder.add_edge(vmap.at(e.vertices[0]), vmap.at(e.vertices[1]), e.length, e.name);
      out.edge_to_s.push_back(c.index);
      any_edge = true;
    } else if (c.dim > 1) {
      return std::nullopt;
    }
  if (!any_edge) return std::nullopt;
  try {
    out.complex = builder.build();
  } catch (const std::exception&) {
    return std::nullopt;
  }
  out.rho.lipschitz = w.rho.lipschitz;
  for (int v : out.vertex_to_s) out.rho.vertex_values.push_back(w.rho.vertex_values[v]);
  return out;
}

// Maps a certificate produced on an extracted separator back into the
// subdivision's cell indexing.
CoveringCertificate map_back(const Extracted& ex, const CoveringCertificate& cert, int level) {
  CoveringCertificate out;
  out.subdivision_level = level;
  out.multiplicity = cert.multiplicity;
  for (const auto& set : cert.sets) {
    CoverSet mapped;
    mapped.name = set.name;
    mapped.radius = set.radius;
    if (set.center.dim == 0) {
      mapped.center = MetricPoint::vertex(ex.vertex_to_s[set.center.cell]);
    } else {
      mapped.center = MetricPoint::on_cell(1, ex.edge_to_s[set.center.cell], set.center.bary);
    }
    for (const CellId& c : set.cells)
      mapped.cells.push_back(c.dim == 0 ? CellId{0, ex.vertex_to_s[c.index]}
                                        : CellId{1, ex.edge_to_s[c.index]});
    out.sets.push_back(std::move(mapped));
  }
  return out;
}

}  // namespace

CollapseOutcome dichotomy_sweep(const SimplicialLengthComplex& x, const ScaleFunction& rho,
                                const SweepParameters& params) {
  const int n = space_dimension(x);
  const int level = params.subdivision_level >= 0 ? params.subdivision_level
                                                  : (n == 1 ? 1 : n == 2 ? 4 : 1);
  Working w = build_working(x, rho, level);
  const int field_level = effective_field_level(params.field_level, w.level);
  const ConstantsTable ct = constants(n);
  std::ostringstream diag;
  const double epsp = params.epsilon / 4.0;
  const double alphap = std::pow(params.epsilon / 2.0, 1.0 / n) * params.alpha;
  const double rho_min = w.rho.min_value();
  const double delta =
      epsp * n * ct.c * std::pow(alphap, n - 1) * std::pow(rho_min, n - 1);
  diag << "schedule: eps'=" << epsp << " alpha'=" << alphap << " delta=" << delta << "\n";

  CollapseOutcome outcome;

  // Phase A: one ball per connected component.
  const Components comps = complement_components(w.s, {});
  std::vector<ComponentCenter> phase_a;
  bool all_ok = true;
  int failed_component = -1;
  for (std::size_t k = 0; k < comps.cells.size(); ++k) {
    phase_a.push_back(
        find_component_center(w, n, comps.cells[k], params.center_budget, field_level));
    if (phase_a.back().vertex == -1) {
      all_ok = false;
      if (failed_component < 0) failed_component = static_cast<int>(k);
    }
  }
  if (all_ok) {
    CoveringCertificate cert;
    cert.subdivision_level = level;
    for (std::size_t k = 0; k < comps.cells.size(); ++k) {
      CoverSet set;
      set.name = "component-" + std::to_string(k);
      set.cells = comps.cells[k];
      set.center = phase_a[k].point;
      set.radius = phase_a[k].rho;
      cert.sets.push_back(std::move(set));
    }
    cert.multiplicity = 1;
    outcome.verdict = check_certificate_impl(w, cert, field_level);
    if (outcome.verdict->pass) {
      diag << "single-ball certificate per component\n";
      outcome.tag = OutcomeTag::kCertificate;
      outcome.certificate = std::move(cert);
      outcome.diagnostics = diag.str();
      return outcome;
    }
    diag << "single-ball assembly failed verification: " << outcome.verdict->reason << "\n";
  }

  const auto verify_fat = [&](int vertex_in_s) -> std::optional<FatPoint> {
    FatPoint fat;
    const MetricPoint p_s = MetricPoint::vertex(vertex_in_s);
    fat.point = w.to_base(p_s);
    fat.rho_at_point = w.rho.eval(w.s, p_s);
    fat.constant = ct.c;
    fat.tolerance = params.tolerance;
    fat.verified = true;
    for (int k = 1; k <= params.grid_points; ++k) {
      const double r = fat.rho_at_point * k / params.grid_points;
      const MeasureEstimate est = ball_volume(x, fat.point, r, BallMethod::kAuto, params.spec);
      const double need = (1.0 - params.tolerance) * ct.c * std::pow(r, n);
      if (est.value - est.half_width < need) fat.verified = false;
      fat.grid_r.push_back(r);
      fat.measured.push_back(est);
    }
    if (!fat.verified) return std::nullopt;
    return fat;
  };

  if (n == 1) {
    // Exact in 1D: a component with no admissible center has eccentricity
    // at least rho at every candidate, so every candidate is a fat point.
    const std::vector<int> cands =
        ordered_center_candidates(w.s, comps.cells[failed_component], params.center_budget);
    int best = cands.front();
    double best_gap = -kInf;
    const std::set<CellId> closure = face_closure(w.s, comps.cells[failed_component]);
    for (int v : cands) {
      const RadiusBound rb =
          radius_1d(w.s, closure, MetricPoint::vertex(v));
      const double gap = rb.lower - w.rho.eval(w.s, MetricPoint::vertex(v));
      if (gap > best_gap) {
        best_gap = gap;
        best = v;
      }
    }
    diag << "fat point on a 1-complex (eccentricity exceeds rho by " << best_gap << ")\n";
    if (auto fat = verify_fat(best)) {
      outcome.tag = OutcomeTag::kFatPoint;
      outcome.fat_point = std::move(*fat);
      outcome.diagnostics = diag.str();
      return outcome;
    }
    outcome.tag = OutcomeTag::kInconclusive;
    diag << "fat-point grid verification failed unexpectedly\n";
    outcome.diagnostics = diag.str();
    return outcome;
  }

  // Phase B: separator search, ordered by (n-1)-measure per the
  // minimal-volume selection rule (delta records the allowed slack).
  const std::vector<SeparatorCandidate> candidates =
      level_set_candidates(w, n, field_level, params.candidate_budget);
  diag << "separator candidates: " << candidates.size() << "\n";
  for (const SeparatorCandidate& cand : candidates) {
    const SeparatorVerdict sv =
        check_separator_impl(w, cand.cells, params.center_budget, field_level);
    if (!sv.pass) {
      diag << "candidate " << cand.name << " (measure " << cand.measure
           << ") rejected: " << sv.reason << "\n";
      continue;
    }
    diag << "candidate " << cand.name << " separates (measure " << cand.measure << ", "
         << sv.components.size() << " components)\n";
    const std::set<CellId> yset = face_closure(w.s, cand.cells);
    const auto extracted = extract_1d(w, yset);
    if (!extracted) {
      diag << "separator extraction unsupported for this candidate\n";
      continue;
    }
    SweepParameters sub = params;
    sub.subdivision_level = 0;
    const CollapseOutcome inner = dichotomy_sweep(extracted->complex, extracted->rho, sub);
    if (inner.tag == OutcomeTag::kCertificate) {
      Separator sep{level, cand.cells};
      const CoveringCertificate y_cert = map_back(*extracted, *inner.certificate, level);
      ExtendResult ext = extend_collapse(x, rho, sep, y_cert);
      if (ext.ok) {
        diag << "separator collapses with multiplicity " << y_cert.multiplicity
             << "; thickened certificate verified\n";
        outcome.tag = OutcomeTag::kCertificate;
        outcome.certificate = std::move(ext.certificate);
        outcome.verdict = ext.verdict;
        outcome.separator = std::move(sep);
        outcome.diagnostics = diag.str();
        return outcome;
      }
      diag << "extension failed: " << ext.reason << "\n";
    } else if (inner.tag == OutcomeTag::kFatPoint) {
      diag << "separator contains a fat point; sphere surgery recorded as slicing "
              "diagnostics only, direct fat-point certification follows\n";
      if (!outcome.eilenberg) {
        const MetricPoint y0_s =
            inner.fat_point->point.dim == 0
                ? MetricPoint::vertex(extracted->vertex_to_s[inner.fat_point->point.cell])
                : MetricPoint::on_cell(1, extracted->edge_to_s[inner.fat_point->point.cell],
                                       inner.fat_point->point.bary);
        const MetricPoint y0 = w.to_base(y0_s);
        outcome.eilenberg =
            coarea_check(x, y0, inner.fat_point->rho_at_point, 8, params.spec);
      }
    } else {
      diag << "separator recursion inconclusive\n";
    }
  }

  // Phase C: direct fat-point certification.
  std::vector<int> fat_candidates;
  {
    std::set<int> seen;
    if (w.map && w.base) {
      for (int v = 0; v < w.s.vertex_count() && static_cast<int>(seen.size()) < 12; ++v)
        if (w.map->vertex_point(*w.base, v).dim == 0) seen.insert(v);
    }
    const int stride = std::max(1, w.s.vertex_count() / 8);
    for (int v = 0; v < w.s.vertex_count(); v += stride) seen.insert(v);
    fat_candidates.assign(seen.begin(), seen.end());
  }
  std::vector<std::pair<double, int>> scored;
  for (int v : fat_candidates) {
    const MetricPoint p = w.to_base(MetricPoint::vertex(v));
    const double rv = w.rho.eval(w.s, MetricPoint::vertex(v));
    SampleSpec quick = params.spec;
    quick.level = 3;
    const double r0 = 0.5 * rv;
    const MeasureEstimate est = ball_volume(x, p, r0, BallMethod::kQuadrature, quick);
    scored.emplace_back(-est.value / (ct.c * std::pow(r0, n)), v);
  }
  std::sort(scored.begin(), scored.end());
  for (std::size_t i = 0; i < scored.size() && i < 3; ++i) {
    if (auto fat = verify_fat(scored[i].second)) {
      diag << "fat point verified on the measurement grid\n";
      outcome.tag = OutcomeTag::kFatPoint;
      outcome.fat_point = std::move(*fat);
      outcome.diagnostics = diag.str();
      return outcome;
    }
  }

  diag << "budgets exhausted with neither verification\n";
  outcome.tag = OutcomeTag::kInconclusive;
  outcome.diagnostics = diag.str();
  return outcome;
}

CollapseOutcome width_upper_bound(const SimplicialLengthComplex& x, double R,
                                  const SweepParameters& params) {
  if (!(R > 0.0)) throw std::invalid_argument("R > 0 required");
  return dichotomy_sweep(x, ScaleFunction::constant(x, R), params);
}

// ---------------------------------------------------------------------------
// Serialization.

nlohmann::json certificate_to_json(const CoveringCertificate& cert) {
  nlohmann::json j;
  j["type"] = "covering-certificate";
  j["subdivision_level"] = cert.subdivision_level;
  j["multiplicity"] = cert.multiplicity;
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& set : cert.sets) {
    nlohmann::json js;
    js["name"] = set.name;
    js["radius"] = set.radius;
    js["center"] = point_to_json(set.center);
    js["cells"] = cells_to_json(set.cells);
    sets.push_back(std::move(js));
  }
  j["sets"] = std::move(sets);
  return j;
}

CoveringCertificate certificate_from_json(const nlohmann::json& doc) {
  try {
    CoveringCertificate cert;
    if (doc.at("type").get<std::string>() != "covering-certificate")
      throw std::invalid_argument("not a covering-certificate document");
    cert.subdivision_level = doc.at("subdivision_level").get<int>();
    cert.multiplicity = doc.value("multiplicity", 0);
    for (const auto& js : doc.at("sets")) {
      CoverSet set;
      set.name = js.value("name", "");
      set.radius = js.at("radius").get<double>();
      set.center = point_from_json(js.at("center"));
      set.cells = cells_from_json(js.at("cells"));
      cert.sets.push_back(std::move(set));
    }
    return cert;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed certificate document: ") + e.what());
  }
}

nlohmann::json outcome_to_json(const CollapseOutcome& outcome) {
  nlohmann::json j;
  j["type"] = "collapse-outcome";
  j["tag"] = outcome.tag == OutcomeTag::kCertificate ? "certificate"
             : outcome.tag == OutcomeTag::kFatPoint  ? "fat-point"
                                                     : "inconclusive";
  if (outcome.certificate) j["certificate"] = certificate_to_json(*outcome.certificate);
  if (outcome.verdict) {
    j["verdict"] = {{"pass", outcome.verdict->pass},
                    {"multiplicity", outcome.verdict->multiplicity},
                    {"reason", outcome.verdict->reason}};
  }
  if (outcome.fat_point) {
    const FatPoint& f = *outcome.fat_point;
    nlohmann::json measured = nlohmann::json::array();
    for (const auto& m : f.measured)
      measured.push_back(
          {{"value", m.value}, {"method", m.method}, {"half_width", m.half_width}});
    j["fat_point"] = {{"point", point_to_json(f.point)},
                      {"rho", f.rho_at_point},
                      {"constant", f.constant},
                      {"tolerance", f.tolerance},
                      {"grid", f.grid_r},
                      {"measured", std::move(measured)},
                      {"verified", f.verified}};
  }
  if (outcome.separator) {
    j["separator"] = {{"subdivision_level", outcome.separator->subdivision_level},
                      {"cells", cells_to_json(outcome.separator->cells)}};
  }
  if (outcome.eilenberg) {
    j["eilenberg"] = {{"lhs", outcome.eilenberg->lhs},
                      {"rhs", outcome.eilenberg->rhs},
                      {"ratio", outcome.eilenberg->ratio},
                      {"coefficient", outcome.eilenberg->eilenberg_coefficient},
                      {"ok", outcome.eilenberg->eilenberg_ok}};
  }
  j["diagnostics"] = outcome.diagnostics;
  return j;
}

}  // namespace polyscal
