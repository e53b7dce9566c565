#include "polyscal/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "polyscal/comparison.hpp"
#include "polyscal/rng.hpp"

namespace polyscal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Two-sided 99% normal quantile, for Monte Carlo confidence half-widths.
constexpr double kZ99 = 2.5758293035489004;

int pure_dimension(const SimplicialLengthComplex& x) {
  const int n = x.dimension();
  for (const CellRef& t : x.top_cells())
    if (t.dim != n)
      throw std::invalid_argument("metric operations require a pure-dimensional complex");
  return n;
}

// Index of a face-interior lattice node with barycentric weights
// (a, b, m-a-b)/m over the face's own corners, a >= 1, b >= 1, a+b <= m-1.
int face_lattice_index(int m, int a, int b) {
  return (a - 1) * (m - 1) - (a - 1) * a / 2 + (b - 1);
}

int face_lattice_count(int m) { return m >= 3 ? (m - 1) * (m - 2) / 2 : 0; }

}  // namespace

// ---------------------------------------------------------------------------
// Distance field

struct DistanceField::Impl {
  const SimplicialLengthComplex* x = nullptr;
  MetricPoint source;
  int n = 0;
  int level = 0;
  int m = 1;
  bool exact = false;

  std::vector<double> label;
  // Lattice entries per top cell (indexed by cell index in dimension n):
  // global node id and position in the cell's corner frame. The same node
  // may occur several times with different positions when sides are glued.
  std::vector<std::vector<int>> top_ids;
  std::vector<Eigen::MatrixXd> top_pos;
  std::vector<std::pair<int, Eigen::VectorXd>> source_spots;

  double delta = 0.0;   // lattice spacing bound
  double h_min = kInf;  // smallest top-cell altitude
  double reach = 0.0;
  bool all_reach = true;

  double eval_at(int top_cell, const Eigen::VectorXd& pos) const {
    double best = kInf;
    const std::vector<int>& ids = top_ids[top_cell];
    const Eigen::MatrixXd& np = top_pos[top_cell];
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double lab = label[ids[k]];
      if (lab >= best) continue;
      best = std::min(best, lab + (np.col(static_cast<int>(k)) - pos).norm());
    }
    for (const auto& spot : source_spots)
      if (spot.first == top_cell) best = std::min(best, (spot.second - pos).norm());
    return best;
  }

  double eval_1d(const MetricPoint& p) const {
    if (p.dim == 0) return label[p.cell];
    const Cell& c = x->cell(1, p.cell);
    const double len = c.length;
    const double t = p.bary[1];
    double best = std::min(label[c.vertices[0]] + t * len, label[c.vertices[1]] + (1.0 - t) * len);
    if (source.dim == 1 && source.cell == p.cell)
      best = std::min(best, std::abs(t - source.bary[1]) * len);
    return best;
  }
};

double DistanceField::eval(const MetricPoint& q) const {
  const Impl& im = *impl_;
  const MetricPoint p = canonical_point(*im.x, q);
  if (im.n == 1) return im.eval_1d(p);
  double best = kInf;
  for (const FacePlacement& pl : im.x->placements(p.dim, p.cell)) {
    const Eigen::VectorXd lifted = lift_bary(p.bary, pl.corner_map, im.n + 1);
    const Eigen::VectorXd pos = im.x->corner_positions(im.n, pl.top_index) * lifted;
    best = std::min(best, im.eval_at(pl.top_index, pos));
  }
  return best;
}

double DistanceField::eval_at(int top_cell, const Eigen::VectorXd& pos) const {
  return impl_->eval_at(top_cell, pos);
}

double DistanceField::vertex_label(int v) const { return impl_->label[v]; }
const MetricPoint& DistanceField::source() const { return impl_->source; }
int DistanceField::level() const { return impl_->level; }
bool DistanceField::exact() const { return impl_->exact; }
double DistanceField::reach() const { return impl_->reach; }
bool DistanceField::all_reachable() const { return impl_->all_reach; }
std::int64_t DistanceField::node_count() const {
  return static_cast<std::int64_t>(impl_->label.size());
}

double DistanceField::error_for(double d) const {
  const Impl& im = *impl_;
  if (im.exact) return 0.0;
  const double hops = std::max(d, 0.0) / im.h_min + 2.0;
  return im.delta * hops;
}

double DistanceField::error_bound() const { return error_for(impl_->reach); }

double DistanceField::min_label_in_top(int top_cell) const {
  const Impl& im = *impl_;
  double best = kInf;
  for (int id : im.top_ids[top_cell]) best = std::min(best, im.label[id]);
  return best;
}

namespace {

void run_dijkstra(const std::vector<std::int64_t>& off, const std::vector<int>& adj,
                  const std::vector<double>& w, std::vector<double>& dist) {
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  for (int v = 0; v < static_cast<int>(dist.size()); ++v)
    if (dist[v] < kInf) heap.push({dist[v], v});
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (std::int64_t e = off[v]; e < off[v + 1]; ++e) {
      const int u = adj[e];
      const double nd = d + w[e];
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.push({nd, u});
      }
    }
  }
}

// Two-pass CSR assembly driven by a pair enumerator, to avoid an
// intermediate edge list: `emit(fn)` must call fn(a, b, w) for every
// undirected edge, identically on both passes.
template <class Emit>
void build_csr_from(int nodes, const Emit& emit, std::vector<std::int64_t>& off,
                    std::vector<int>& adj, std::vector<double>& w) {
  off.assign(nodes + 1, 0);
  emit([&](int a, int b, double) {
    ++off[a + 1];
    ++off[b + 1];
  });
  for (int v = 0; v < nodes; ++v) off[v + 1] += off[v];
  adj.resize(off[nodes]);
  w.resize(off[nodes]);
  std::vector<std::int64_t> cur(off.begin(), off.end() - 1);
  emit([&](int a, int b, double len) {
    adj[cur[a]] = b;
    w[cur[a]++] = len;
    adj[cur[b]] = a;
    w[cur[b]++] = len;
  });
}

}  // namespace

DistanceField build_distance_field(const SimplicialLengthComplex& x, const MetricPoint& source,
                                   int level) {
  if (level < 0) throw std::invalid_argument("refinement level must be >= 0");
  auto impl = std::make_shared<DistanceField::Impl>();
  DistanceField::Impl& im = *impl;
  im.x = &x;
  im.n = pure_dimension(x);
  im.level = level;
  im.source = canonical_point(x, source);

  const int nv = x.vertex_count();
  const int ne = x.cell_count(1);

  if (im.n == 1) {
    im.exact = true;
    im.m = 1;
    im.label.assign(nv, kInf);
    const auto emit = [&](const auto& fn) {
      for (int e = 0; e < ne; ++e) {
        const Cell& c = x.cell(1, e);
        if (c.vertices[0] != c.vertices[1]) fn(c.vertices[0], c.vertices[1], c.length);
      }
    };
    if (im.source.dim == 0) {
      im.label[im.source.cell] = 0.0;
    } else {
      const Cell& c = x.cell(1, im.source.cell);
      const double t = im.source.bary[1];
      im.label[c.vertices[0]] = std::min(im.label[c.vertices[0]], t * c.length);
      im.label[c.vertices[1]] = std::min(im.label[c.vertices[1]], (1.0 - t) * c.length);
    }
    std::vector<std::int64_t> off;
    std::vector<int> adj;
    std::vector<double> w;
    build_csr_from(nv, emit, off, adj, w);
    run_dijkstra(off, adj, w, im.label);
  } else {
    const int m = 1 << level;
    im.m = m;
    const int nf = im.n == 3 ? x.cell_count(2) : 0;
    const std::int64_t edge_nodes = static_cast<std::int64_t>(ne) * (m - 1);
    const std::int64_t face_nodes = static_cast<std::int64_t>(nf) * face_lattice_count(m);
    const std::int64_t total = nv + edge_nodes + face_nodes;
    const auto edge_base = [&](int e) { return nv + static_cast<std::int64_t>(e) * (m - 1); };
    const auto face_base = [&](int f) {
      return nv + edge_nodes + static_cast<std::int64_t>(f) * face_lattice_count(m);
    };

    im.label.assign(total, kInf);
    const int tops = x.cell_count(im.n);
    im.top_ids.resize(tops);
    im.top_pos.resize(tops);

    double delta = 0.0;
    for (int e = 0; e < ne; ++e) delta = std::max(delta, x.cell(1, e).length / m);
    im.delta = delta;

    for (int t = 0; t < tops; ++t) {
      const Cell& c = x.cell(im.n, t);
      const Eigen::MatrixXd& P = x.corner_positions(im.n, t);
      std::vector<int>& ids = im.top_ids[t];
      std::vector<Eigen::VectorXd> pos;
      for (int j = 0; j <= im.n; ++j) {
        ids.push_back(c.vertices[j]);
        pos.push_back(P.col(j));
      }
      if (im.n == 2) {
        for (int f = 0; f < 3; ++f) {
          const int e = c.facets[f];
          const auto& fm = c.facet_corner_map[f];
          const Eigen::VectorXd a = P.col(fm[0]), b = P.col(fm[1]);
          for (int k = 1; k < m; ++k) {
            ids.push_back(static_cast<int>(edge_base(e)) + k - 1);
            pos.push_back(a + (b - a) * (static_cast<double>(k) / m));
          }
        }
        double longest = 0.0;
        for (int ca = 0; ca < 3; ++ca)
          for (int cb = ca + 1; cb < 3; ++cb)
            longest = std::max(longest, x.pair_distance(2, t, ca, cb));
        im.h_min = std::min(im.h_min, 2.0 * x.cell_measure(2, t) / longest);
      } else {
        for (int ca = 0; ca < 4; ++ca)
          for (int cb = ca + 1; cb < 4; ++cb) {
            const auto [e, glued] = x.edge_between(3, t, ca, cb);
            const int tail = glued == 0 ? ca : cb;
            const int head = tail == ca ? cb : ca;
            const Eigen::VectorXd a = P.col(tail), b = P.col(head);
            for (int k = 1; k < m; ++k) {
              ids.push_back(static_cast<int>(edge_base(e)) + k - 1);
              pos.push_back(a + (b - a) * (static_cast<double>(k) / m));
            }
          }
        double facet_max = 0.0;
        for (int f = 0; f < 4; ++f) {
          const int tri = c.facets[f];
          facet_max = std::max(facet_max, x.cell_measure(2, tri));
          const auto& fm = c.facet_corner_map[f];
          for (int a = 1; a <= m - 2; ++a)
            for (int b = 1; b <= m - 1 - a; ++b) {
              const int cc = m - a - b;
              ids.push_back(static_cast<int>(face_base(tri)) + face_lattice_index(m, a, b));
              pos.push_back((a * P.col(fm[0]) + b * P.col(fm[1]) + cc * P.col(fm[2])) /
                            static_cast<double>(m));
            }
        }
        im.h_min = std::min(im.h_min, 3.0 * x.cell_measure(3, t) / facet_max);
      }
      Eigen::MatrixXd mat(im.n, static_cast<int>(pos.size()));
      for (int k = 0; k < static_cast<int>(pos.size()); ++k) mat.col(k) = pos[k];
      im.top_pos[t] = std::move(mat);
    }

    const auto emit = [&](const auto& fn) {
      for (int t = 0; t < tops; ++t) {
        const std::vector<int>& ids = im.top_ids[t];
        const Eigen::MatrixXd& np = im.top_pos[t];
        for (std::size_t a = 0; a < ids.size(); ++a)
          for (std::size_t b = a + 1; b < ids.size(); ++b) {
            if (ids[a] == ids[b]) continue;
            fn(ids[a], ids[b],
               (np.col(static_cast<int>(a)) - np.col(static_cast<int>(b))).norm());
          }
      }
    };

    for (const FacePlacement& pl : x.placements(im.source.dim, im.source.cell)) {
      const Eigen::VectorXd lifted = lift_bary(im.source.bary, pl.corner_map, im.n + 1);
      const Eigen::VectorXd spos = x.corner_positions(im.n, pl.top_index) * lifted;
      im.source_spots.emplace_back(pl.top_index, spos);
      const std::vector<int>& ids = im.top_ids[pl.top_index];
      const Eigen::MatrixXd& np = im.top_pos[pl.top_index];
      for (std::size_t k = 0; k < ids.size(); ++k)
        im.label[ids[k]] =
            std::min(im.label[ids[k]], (np.col(static_cast<int>(k)) - spos).norm());
    }

    std::vector<std::int64_t> off;
    std::vector<int> adj;
    std::vector<double> w;
    build_csr_from(static_cast<int>(total), emit, off, adj, w);
    run_dijkstra(off, adj, w, im.label);
  }

  for (double d : im.label) {
    if (d == kInf)
      im.all_reach = false;
    else
      im.reach = std::max(im.reach, d);
  }

  DistanceField field;
  field.impl_ = std::move(impl);
  return field;
}

// ---------------------------------------------------------------------------
// Distance query

namespace {

std::int64_t graph_cost_estimate(const SimplicialLengthComplex& x, int level) {
  const int m = 1 << level;
  std::int64_t cost = 0;
  const int n = x.dimension();
  for (int t = 0; t < x.cell_count(n); ++t) {
    std::int64_t k = 0;
    if (n == 2)
      k = 3LL * m;
    else
      k = 4 + 6LL * (m - 1) + 4LL * face_lattice_count(m);
    cost += k * k / 2;
  }
  return cost;
}

}  // namespace

DistanceResult distance(const SimplicialLengthComplex& x, const MetricPoint& p,
                        const MetricPoint& q, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be positive");
  const int n = pure_dimension(x);
  const MetricPoint cp = canonical_point(x, p);
  const MetricPoint cq = canonical_point(x, q);
  if (points_equal(x, cp, cq)) return {0.0, 0.0, 0};
  if (n == 1) {
    const DistanceField field = build_distance_field(x, cp, 0);
    const double d = field.eval(cq);
    if (d == kInf)
      throw std::runtime_error("unreachable: endpoints lie in different components");
    return {d, 0.0, 0};
  }
  constexpr std::int64_t kCostCap = 10000000;
  DistanceResult best{kInf, kInf, 0};
  for (int level = 1; level <= 12; ++level) {
    const DistanceField field = build_distance_field(x, cp, level);
    const double d = field.eval(cq);
    if (d == kInf)
      throw std::runtime_error("unreachable: endpoints lie in different components");
    best = {d, field.error_for(d), level};
    if (best.error_bound <= resolution) break;
    if (level < 12 && graph_cost_estimate(x, level + 1) > kCostCap) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Piecewise-linear sublevel geometry on a refined complex

namespace {

// Measure fraction of { PL <= r } on a simplex with sorted corner labels d.
// Case analysis over the band containing r; every denominator is bounded
// below by the active band width, so ties need no perturbation.
double simplex_cdf(const double* d, int k, double r) {
  if (!(r > d[0])) return 0.0;
  if (r >= d[k - 1]) return 1.0;
  if (k == 2) return (r - d[0]) / (d[1] - d[0]);
  if (k == 3) {
    if (r <= d[1]) return (r - d[0]) * (r - d[0]) / ((d[1] - d[0]) * (d[2] - d[0]));
    const double u = d[2] - r;
    return 1.0 - u * u / ((d[2] - d[0]) * (d[2] - d[1]));
  }
  // k == 4
  if (r <= d[1]) {
    const double u = r - d[0];
    return u * u * u / ((d[1] - d[0]) * (d[2] - d[0]) * (d[3] - d[0]));
  }
  if (r >= d[2]) {
    const double u = d[3] - r;
    return 1.0 - u * u * u / ((d[3] - d[0]) * (d[3] - d[1]) * (d[3] - d[2]));
  }
  // Middle band d[1] < r < d[2]: the two-term truncated-power sum with the
  // 1/(d1-d0) pole cancelled analytically (u = r - d1, h = d1 - d0,
  // s = (d2-d1) + (d3-d1), alpha = (d2-d1)(d3-d1)).
  const double u = r - d[1];
  const double h = d[1] - d[0];
  const double s = (d[2] - d[1]) + (d[3] - d[1]);
  const double alpha = (d[2] - d[1]) * (d[3] - d[1]);
  const double num = (3.0 * u * u + 3.0 * u * h + h * h) * alpha - u * u * u * (s + h);
  const double den = (d[2] - d[0]) * (d[3] - d[0]) * alpha;
  double v = (den > 0.0) ? num / den : 1.0;
  // The band value interpolates between the band-edge values; clamp to them.
  const double lo = simplex_cdf(d, k, d[1]);
  return std::clamp(v, lo, 1.0);
}

// d/dr of simplex_cdf: level-set density (times measure and gradient norm it
// gives the (k-2)-measure of the PL level set inside the simplex).
double simplex_band_density(const double* d, int k, double r) {
  if (!(r > d[0]) || r >= d[k - 1]) return 0.0;
  if (k == 2) return 1.0 / (d[1] - d[0]);
  if (k == 3) {
    if (r <= d[1]) return 2.0 * (r - d[0]) / ((d[1] - d[0]) * (d[2] - d[0]));
    return 2.0 * (d[2] - r) / ((d[2] - d[0]) * (d[2] - d[1]));
  }
  if (r <= d[1]) {
    const double u = r - d[0];
    return 3.0 * u * u / ((d[1] - d[0]) * (d[2] - d[0]) * (d[3] - d[0]));
  }
  if (r >= d[2]) {
    const double u = d[3] - r;
    return 3.0 * u * u / ((d[3] - d[0]) * (d[3] - d[1]) * (d[3] - d[2]));
  }
  const double u = r - d[1];
  const double h = d[1] - d[0];
  const double s = (d[2] - d[1]) + (d[3] - d[1]);
  const double alpha = (d[2] - d[1]) * (d[3] - d[1]);
  const double num = (6.0 * u + 3.0 * h) * alpha - 3.0 * u * u * (s + h);
  const double den = (d[2] - d[0]) * (d[3] - d[0]) * alpha;
  return den > 0.0 ? std::max(num / den, 0.0) : 0.0;
}

struct RefinedCell {
  int x_top = 0;
  double measure = 0.0;
  double grad_norm = 0.0;
  double diam = 0.0;
  Eigen::MatrixXd pos;  // n x (n+1), coordinates in the carrier cell's frame
  std::array<double, 4> lab{};
  std::array<double, 4> sorted{};
  bool finite = true;
};

struct Refined {
  DistanceField field;
  std::vector<RefinedCell> cells;
  int n = 0;
  double total = 0.0;
};

Refined build_refined(const SimplicialLengthComplex& x, const MetricPoint& center, int level) {
  Refined r;
  r.n = x.dimension();
  r.field = build_distance_field(x, center, level);
  SubdivisionMap map;
  const SimplicialLengthComplex y = subdivide(x, level, &map);
  std::vector<double> ylab(y.vertex_count());
  for (int v = 0; v < y.vertex_count(); ++v) ylab[v] = r.field.eval(map.vertex_point(x, v));

  const int n = r.n;
  const int cnt = y.cell_count(n);
  r.cells.resize(cnt);
  for (int j = 0; j < cnt; ++j) {
    RefinedCell& c = r.cells[j];
    const CellRef carrier = map.carrier[n][j];
    c.x_top = carrier.index;
    c.pos = x.corner_positions(n, carrier.index) * map.carrier_bary[n][j];
    c.measure = y.cell_measure(n, j);
    r.total += c.measure;
    const Cell& yc = y.cell(n, j);
    for (int k = 0; k <= n; ++k) {
      c.lab[k] = ylab[yc.vertices[k]];
      if (!std::isfinite(c.lab[k])) c.finite = false;
    }
    for (int a = 0; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b)
        c.diam = std::max(c.diam, (c.pos.col(a) - c.pos.col(b)).norm());
    if (c.finite) {
      Eigen::MatrixXd A(n, n);
      Eigen::VectorXd bb(n);
      for (int k = 1; k <= n; ++k) {
        A.col(k - 1) = c.pos.col(k) - c.pos.col(0);
        bb[k - 1] = c.lab[k] - c.lab[0];
      }
      c.grad_norm = A.transpose().partialPivLu().solve(bb).norm();
      std::copy(c.lab.begin(), c.lab.begin() + n + 1, c.sorted.begin());
      std::sort(c.sorted.begin(), c.sorted.begin() + n + 1);
    }
  }
  return r;
}

double refined_ball(const Refined& r, double radius) {
  double total = 0.0;
  for (const RefinedCell& c : r.cells) {
    if (!c.finite) continue;
    total += c.measure * simplex_cdf(c.sorted.data(), r.n + 1, radius);
  }
  return total;
}

double refined_sphere(const Refined& r, double radius) {
  double total = 0.0;
  for (const RefinedCell& c : r.cells) {
    if (!c.finite) continue;
    total += c.measure * c.grad_norm * simplex_band_density(c.sorted.data(), r.n + 1, radius);
  }
  return total;
}

MeasureEstimate exact_ball_1d(const SimplicialLengthComplex& x, const MetricPoint& center,
                              double r) {
  const DistanceField field = build_distance_field(x, center, 0);
  const MetricPoint src = field.source();
  double total = 0.0;
  std::vector<std::pair<double, double>> iv;
  for (int e = 0; e < x.cell_count(1); ++e) {
    const Cell& c = x.cell(1, e);
    const double len = c.length;
    iv.clear();
    const double a = r - field.vertex_label(c.vertices[0]);
    if (a > 0.0) iv.emplace_back(0.0, std::min(len, a));
    const double b = r - field.vertex_label(c.vertices[1]);
    if (b > 0.0) iv.emplace_back(std::max(0.0, len - b), len);
    if (src.dim == 1 && src.cell == e) {
      const double s = src.bary[1] * len;
      iv.emplace_back(std::max(0.0, s - r), std::min(len, s + r));
    }
    std::sort(iv.begin(), iv.end());
    double cur_lo = 0.0, cur_hi = -1.0;
    for (const auto& [lo, hi] : iv) {
      if (hi <= lo) continue;
      if (cur_hi < lo) {
        total += std::max(0.0, cur_hi - cur_lo);
        cur_lo = lo;
        cur_hi = hi;
      } else {
        cur_hi = std::max(cur_hi, hi);
      }
    }
    total += std::max(0.0, cur_hi - cur_lo);
  }
  return {total, "exact", 0.0, 0};
}

MeasureEstimate monte_carlo_ball(const SimplicialLengthComplex& x, const MetricPoint& center,
                                 double r, const SampleSpec& spec) {
  const Refined ref = build_refined(x, center, spec.level);
  const int n = ref.n;
  double inside = 0.0;
  std::vector<int> partial;
  double partial_measure = 0.0;
  for (int j = 0; j < static_cast<int>(ref.cells.size()); ++j) {
    const RefinedCell& c = ref.cells[j];
    if (!c.finite) continue;  // unreachable component: outside every ball
    double lo = kInf, hi = -kInf;
    for (int k = 0; k <= n; ++k) {
      lo = std::min(lo, c.lab[k]);
      hi = std::max(hi, c.lab[k]);
    }
    if (lo + c.diam <= r) {
      inside += c.measure;
    } else if (hi - c.diam > r) {
      // every point of the cell is farther than r
    } else {
      partial.push_back(j);
      partial_measure += c.measure;
    }
  }
  MeasureEstimate out;
  out.method = "monte-carlo";
  if (partial.empty() || partial_measure <= 0.0 || spec.samples == 0) {
    out.value = inside;
    return out;
  }

  std::vector<std::uint64_t> counts(partial.size());
  std::vector<std::uint64_t> bases(partial.size());
  std::uint64_t taken = 0;
  for (std::size_t i = 0; i < partial.size(); ++i) {
    const double share = ref.cells[partial[i]].measure / partial_measure;
    counts[i] = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(share * static_cast<double>(spec.samples))));
    bases[i] = taken;
    taken += counts[i];
  }

  const CounterRng rng(spec.seed);
  std::vector<double> cell_value(partial.size(), 0.0);
  std::vector<double> cell_var(partial.size(), 0.0);
  const unsigned workers = spec.workers <= 0 ? 1u : static_cast<unsigned>(spec.workers);
  parallel_for_ranges(partial.size(), workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Eigen::VectorXd bary(n + 1), pos(n);
    for (std::size_t i = lo; i < hi; ++i) {
      const RefinedCell& c = ref.cells[partial[i]];
      std::uint64_t hits = 0;
      for (std::uint64_t s = 0; s < counts[i]; ++s) {
        const std::uint64_t counter = bases[i] + s;
        double sum = 0.0;
        for (int k = 0; k <= n; ++k) {
          const double u = rng.uniform(counter, static_cast<std::uint64_t>(k));
          bary[k] = -std::log1p(-u);
          sum += bary[k];
        }
        bary /= sum;
        pos = c.pos * bary;
        if (ref.field.eval_at(c.x_top, pos) <= r) ++hits;
      }
      const double nn = static_cast<double>(counts[i]);
      const double p = static_cast<double>(hits) / nn;
      // Agresti-Coull smoothed variance so p in {0,1} keeps a sane width.
      const double ps = (static_cast<double>(hits) + 2.0) / (nn + 4.0);
      cell_value[i] = c.measure * p;
      cell_var[i] = c.measure * c.measure * ps * (1.0 - ps) / nn;
    }
  });

  double value = inside, var = 0.0;
  for (std::size_t i = 0; i < partial.size(); ++i) {
    value += cell_value[i];
    var += cell_var[i];
  }
  out.value = value;
  out.half_width = kZ99 * std::sqrt(var);
  out.samples = taken;
  return out;
}

MeasureEstimate quadrature_ball(const SimplicialLengthComplex& x, const MetricPoint& center,
                                double r, const SampleSpec& spec) {
  const Refined fine = build_refined(x, center, spec.level);
  MeasureEstimate out;
  out.method = "quadrature";
  out.value = refined_ball(fine, r);
  if (spec.level >= 1) {
    const Refined coarse = build_refined(x, center, spec.level - 1);
    out.half_width = std::abs(out.value - refined_ball(coarse, r));
  } else {
    out.half_width = out.value;
  }
  return out;
}

}  // namespace

MeasureEstimate ball_volume(const SimplicialLengthComplex& x, const MetricPoint& center, double r,
                            BallMethod method, const SampleSpec& spec) {
  if (!(r >= 0.0)) throw std::invalid_argument("r >= 0 required");
  const int n = pure_dimension(x);
  if (n == 1) return exact_ball_1d(x, center, r);

  // A valid development gives exact areas when either the whole region is
  // convex (intrinsic distances are euclidean everywhere) or the requested
  // disk stays clear of the region boundary and of cone points; in the
  // latter case the wedge-sum equals (sheet count) * pi r^2, so a total
  // under 1.5 pi r^2 confirms a single sheet.
  const auto development_exact = [&](const FlatDevelopment& dev) -> std::optional<double> {
    if (!dev.valid) return std::nullopt;
    if (developed_region_convex(dev, x)) return developed_ball_area(dev, x, center, r);
    if (developed_disk_isometric(dev, x, center, r)) {
      const double area = developed_ball_area(dev, x, center, r);
      if (area <= 1.5 * std::numbers::pi * r * r + 1e-9) return area;
    }
    return std::nullopt;
  };
  if (method == BallMethod::kAuto && n == 2) {
    if (const auto area = development_exact(develop_flat_surface(x)))
      return {*area, "exact", 0.0, 0};
  }
  if (method == BallMethod::kExact) {
    if (n != 2)
      throw std::invalid_argument("exact method requires a 1-complex or a developable flat surface");
    if (const auto area = development_exact(develop_flat_surface(x))) return {*area, "exact", 0.0, 0};
    throw std::invalid_argument("exact method requires a 1-complex or a developable flat surface");
  }
  if (method == BallMethod::kMonteCarlo) return monte_carlo_ball(x, center, r, spec);
  return quadrature_ball(x, center, r, spec);
}

MeasureEstimate sphere_measure(const SimplicialLengthComplex& x, const MetricPoint& center,
                               double r, const SampleSpec& spec) {
  if (!(r >= 0.0)) throw std::invalid_argument("r >= 0 required");
  const int n = pure_dimension(x);
  if (n < 2) throw std::invalid_argument("n >= 2 required");
  const Refined fine = build_refined(x, center, spec.level);
  MeasureEstimate out;
  out.method = "quadrature";
  out.value = refined_sphere(fine, r);
  if (spec.level >= 1) {
    const Refined coarse = build_refined(x, center, spec.level - 1);
    out.half_width = std::abs(out.value - refined_sphere(coarse, r));
  } else {
    out.half_width = out.value;
  }
  return out;
}

int sphere_point_count(const SimplicialLengthComplex& x, const MetricPoint& center, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("r >= 0 required");
  if (pure_dimension(x) != 1) throw std::invalid_argument("1-complex required");
  const DistanceField field = build_distance_field(x, center, 0);
  const MetricPoint src = field.source();
  const double tol = 1e-9 * (1.0 + r);
  int count = 0;
  for (int v = 0; v < x.vertex_count(); ++v)
    if (std::abs(field.vertex_label(v) - r) <= tol) ++count;
  for (int e = 0; e < x.cell_count(1); ++e) {
    const Cell& c = x.cell(1, e);
    const double len = c.length;
    const double dl = field.vertex_label(c.vertices[0]);
    const double dr = field.vertex_label(c.vertices[1]);
    if (!std::isfinite(dl) || !std::isfinite(dr)) continue;
    const bool source_edge = src.dim == 1 && src.cell == e;
    const double s0 = source_edge ? src.bary[1] * len : 0.0;
    const auto f = [&](double s) {
      double d = std::min(dl + s, dr + (len - s));
      if (source_edge) d = std::min(d, std::abs(s - s0));
      return d;
    };
    // Breakpoints: pairwise intersections of the active linear pieces.
    std::vector<double> bp{0.0, len};
    const auto add = [&](double s) {
      if (s > tol && s < len - tol) bp.push_back(s);
    };
    add((dr - dl + len) / 2.0);  // dl + s meets dr + (len - s)
    if (source_edge) {
      add(s0);                         // kink of |s - s0|
      add((s0 - dl) / 2.0);            // s0 - s meets dl + s
      add((s0 + dr + len) / 2.0);      // s - s0 meets dr + (len - s)
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [&](double a, double b) { return std::abs(a - b) <= tol; }),
             bp.end());
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
      const double fa = f(bp[i]) - r;
      const double fb = f(bp[i + 1]) - r;
      if ((fa > tol && fb < -tol) || (fa < -tol && fb > tol)) ++count;
    }
    for (std::size_t i = 1; i + 1 < bp.size(); ++i)
      if (std::abs(f(bp[i]) - r) <= tol) ++count;
  }
  return count;
}

CoareaReport coarea_check(const SimplicialLengthComplex& x, const MetricPoint& center, double r,
                          int steps, const SampleSpec& spec) {
  if (!(r >= 0.0)) throw std::invalid_argument("r >= 0 required");
  if (steps < 1) throw std::invalid_argument("steps >= 1 required");
  const int n = pure_dimension(x);
  if (n < 2) throw std::invalid_argument("n >= 2 required");

  CoareaReport rep;
  rep.steps = steps;
  rep.eilenberg_coefficient = 2.0 * unit_ball_volume(n - 1) / unit_ball_volume(n);
  if (r == 0.0) return rep;

  const Refined ref = build_refined(x, center, spec.level);
  const double dt = r / steps;
  double lhs = 0.0;
  double prev = refined_sphere(ref, 0.0);
  for (int k = 1; k <= steps; ++k) {
    const double cur = refined_sphere(ref, dt * k);
    lhs += 0.5 * (prev + cur) * dt;
    prev = cur;
  }
  rep.lhs = lhs;
  rep.rhs = refined_ball(ref, r);
  if (rep.rhs > 0.0)
    rep.ratio = rep.lhs / rep.rhs;
  else
    rep.ratio = rep.lhs > 0.0 ? kInf : 1.0;
  rep.eilenberg_ok = rep.lhs <= rep.eilenberg_coefficient * rep.rhs * 1.05 + 1e-12;
  return rep;
}

}  // namespace polyscal
