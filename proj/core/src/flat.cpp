#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "polyscal/metric.hpp"

namespace polyscal {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Signed area of disk(0, r) intersected with the triangle (0, u, v); the sign
// is that of cross(u, v). Circular parts enter as sector areas.
double wedge_disk_area(double r, const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
  const double r2 = r * r;
  const auto sector = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return 0.5 * r2 * std::atan2(cross2(a, b), a.dot(b));
  };
  const bool uin = u.squaredNorm() <= r2;
  const bool vin = v.squaredNorm() <= r2;
  if (uin && vin) return 0.5 * cross2(u, v);
  const Eigen::Vector2d d = v - u;
  const double a = d.squaredNorm();
  if (a == 0.0) return 0.0;
  const double b = u.dot(d);
  const double c = u.squaredNorm() - r2;
  const double disc = b * b - a * c;
  if (uin) {
    const double t = (-b + std::sqrt(std::max(0.0, disc))) / a;
    const Eigen::Vector2d q = u + t * d;
    return 0.5 * cross2(u, q) + sector(q, v);
  }
  if (vin) {
    const double t = (-b - std::sqrt(std::max(0.0, disc))) / a;
    const Eigen::Vector2d q = u + t * d;
    return sector(u, q) + 0.5 * cross2(q, v);
  }
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    const double t1 = (-b - sq) / a;
    const double t2 = (-b + sq) / a;
    if (t1 > 0.0 && t2 < 1.0 && t1 < t2) {
      const Eigen::Vector2d q1 = u + t1 * d;
      const Eigen::Vector2d q2 = u + t2 * d;
      return sector(u, q1) + 0.5 * cross2(q1, q2) + sector(q2, v);
    }
  }
  return sector(u, v);
}

Eigen::Vector2d vertex_xy(const FlatDevelopment& dev, int v) {
  return Eigen::Vector2d(dev.x[v], dev.y[v]);
}

// Intersection of a sorted arc list on the circle with one arc [lo, hi]
// (angles normalized into [0, 2pi); hi < lo means the arc wraps).
std::vector<std::pair<double, double>> clip_arcs(
    const std::vector<std::pair<double, double>>& arcs, double lo, double hi) {
  constexpr double kTau = 6.283185307179586476925286766559;
  const auto norm = [&](double a) {
    a = std::fmod(a, kTau);
    return a < 0.0 ? a + kTau : a;
  };
  lo = norm(lo);
  hi = norm(hi);
  std::vector<std::pair<double, double>> window;
  if (hi >= lo)
    window.push_back({lo, hi});
  else {
    window.push_back({0.0, hi});
    window.push_back({lo, kTau});
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [alo, ahi] : arcs)
    for (const auto& [wlo, whi] : window) {
      const double l = std::max(alo, wlo);
      const double h = std::min(ahi, whi);
      if (h > l) out.push_back({l, h});
    }
  return out;
}

}  // namespace

double disk_triangle_area(double cx, double cy, double r, double ax, double ay, double bx,
                          double by, double qx, double qy) {
  if (r <= 0.0) return 0.0;
  const Eigen::Vector2d c(cx, cy);
  const Eigen::Vector2d u0 = Eigen::Vector2d(ax, ay) - c;
  const Eigen::Vector2d u1 = Eigen::Vector2d(bx, by) - c;
  const Eigen::Vector2d u2 = Eigen::Vector2d(qx, qy) - c;
  return std::abs(wedge_disk_area(r, u0, u1) + wedge_disk_area(r, u1, u2) +
                  wedge_disk_area(r, u2, u0));
}

FlatDevelopment develop_flat_surface(const SimplicialLengthComplex& x, int base_top) {
  if (x.dimension() != 2)
    throw std::invalid_argument("develop_flat_surface requires a 2-complex");
  const int nt = x.cell_count(2);
  FlatDevelopment dev;
  if (nt == 0 || base_top < 0 || base_top >= nt) return dev;
  for (const CellRef& t : x.top_cells())
    if (t.dim != 2) return dev;  // stray lower-dimensional pieces: not developable
  for (int e = 0; e < x.cell_count(1); ++e)
    if (x.cofacets(1, e).empty()) return dev;

  const int nv = x.vertex_count();
  dev.base_top = base_top;
  dev.x.assign(nv, 0.0);
  dev.y.assign(nv, 0.0);
  std::vector<char> vertex_set(nv, 0);
  std::vector<char> placed(nt, 0);
  std::vector<Eigen::Matrix<double, 2, 3>> corner(nt);

  const double scale = 1.0 + x.max_edge_length();
  double mismatch = 0.0;
  const auto assign = [&](int t) {
    const Cell& c = x.cell(2, t);
    for (int j = 0; j < 3; ++j) {
      const int v = c.vertices[j];
      const Eigen::Vector2d p = corner[t].col(j);
      if (!vertex_set[v]) {
        vertex_set[v] = 1;
        dev.x[v] = p.x();
        dev.y[v] = p.y();
      } else {
        mismatch = std::max(mismatch, (p - vertex_xy(dev, v)).norm());
      }
    }
  };

  corner[base_top] = x.corner_positions(2, base_top);
  placed[base_top] = 1;
  assign(base_top);
  std::deque<int> queue{base_top};
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    const Cell& c = x.cell(2, t);
    for (int f = 0; f < 3; ++f) {
      const int e = c.facets[f];
      const Eigen::Vector2d ea = corner[t].col(c.facet_corner_map[f][0]);
      const Eigen::Vector2d eb = corner[t].col(c.facet_corner_map[f][1]);
      const int third_t = 3 - c.facet_corner_map[f][0] - c.facet_corner_map[f][1];
      for (const auto& [t2, f2] : x.cofacets(1, e)) {
        if (placed[t2]) continue;
        const Cell& c2 = x.cell(2, t2);
        const auto& fm2 = c2.facet_corner_map[f2];
        const int c0 = fm2[0], c1 = fm2[1];
        const int third = 3 - c0 - c1;
        const Eigen::MatrixXd& local = x.corner_positions(2, t2);
        const double blen = (local.col(third) - local.col(c0)).norm();
        const double alen = (local.col(third) - local.col(c1)).norm();
        const Eigen::Vector2d dvec = eb - ea;
        const double dd = dvec.norm();
        if (dd <= 0.0) return dev;
        const double xx = (dd * dd + blen * blen - alen * alen) / (2.0 * dd);
        const double yy = std::sqrt(std::max(0.0, blen * blen - xx * xx));
        const Eigen::Vector2d dir = dvec / dd;
        const Eigen::Vector2d perp(-dir.y(), dir.x());
        const double side = cross2(dvec, corner[t].col(third_t) - ea);
        const double sgn = side > 0.0 ? -1.0 : 1.0;
        Eigen::Matrix<double, 2, 3> q;
        q.col(c0) = ea;
        q.col(c1) = eb;
        q.col(third) = ea + xx * dir + sgn * yy * perp;
        corner[t2] = q;
        placed[t2] = 1;
        assign(t2);
        queue.push_back(t2);
      }
    }
  }

  dev.max_mismatch = mismatch;
  bool all_placed = true;
  for (int t = 0; t < nt; ++t) all_placed = all_placed && placed[t];
  bool all_vertices = true;
  for (int v = 0; v < nv; ++v) all_vertices = all_vertices && vertex_set[v];
  dev.valid = all_placed && all_vertices && mismatch <= 1e-7 * scale;
  return dev;
}

std::pair<double, double> developed_point(const FlatDevelopment& dev,
                                          const SimplicialLengthComplex& x, const MetricPoint& p) {
  if (!dev.valid) throw std::invalid_argument("development is not valid");
  const MetricPoint cp = canonical_point(x, p);
  const Cell& c = x.cell(cp.dim, cp.cell);
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int j = 0; j <= cp.dim; ++j) out += cp.bary[j] * vertex_xy(dev, c.vertices[j]);
  return {out.x(), out.y()};
}

double developed_distance(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                          const MetricPoint& p, const MetricPoint& q) {
  const auto [px, py] = developed_point(dev, x, p);
  const auto [qx, qy] = developed_point(dev, x, q);
  return std::hypot(px - qx, py - qy);
}

double developed_ball_area(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                           const MetricPoint& center, double r) {
  const auto [cx, cy] = developed_point(dev, x, center);
  if (r <= 0.0) return 0.0;
  double total = 0.0;
  for (int t = 0; t < x.cell_count(2); ++t) {
    const Cell& c = x.cell(2, t);
    const Eigen::Vector2d a = vertex_xy(dev, c.vertices[0]);
    const Eigen::Vector2d b = vertex_xy(dev, c.vertices[1]);
    const Eigen::Vector2d q = vertex_xy(dev, c.vertices[2]);
    total += disk_triangle_area(cx, cy, r, a.x(), a.y(), b.x(), b.y(), q.x(), q.y());
  }
  return total;
}

double developed_sphere_length(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                               const MetricPoint& center, double r) {
  const auto [cx, cy] = developed_point(dev, x, center);
  if (r <= 0.0) return 0.0;
  const Eigen::Vector2d c(cx, cy);
  constexpr double kTau = 6.283185307179586476925286766559;
  double total = 0.0;
  for (int t = 0; t < x.cell_count(2); ++t) {
    const Cell& cell = x.cell(2, t);
    Eigen::Vector2d p[3];
    for (int j = 0; j < 3; ++j) p[j] = vertex_xy(dev, cell.vertices[j]);
    if (cross2(p[1] - p[0], p[2] - p[0]) < 0.0) std::swap(p[1], p[2]);
    std::vector<std::pair<double, double>> arcs{{0.0, kTau}};
    bool empty = false;
    for (int j = 0; j < 3 && !empty; ++j) {
      const Eigen::Vector2d a = p[j];
      const Eigen::Vector2d b = p[(j + 1) % 3];
      const Eigen::Vector2d d = b - a;
      const double dn = d.norm();
      if (dn <= 0.0) continue;
      // Interior condition for circle points: sin(theta - phi) >= s0.
      const double s0 = -cross2(d, c - a) / (r * dn);
      if (s0 <= -1.0) continue;
      if (s0 > 1.0) {
        empty = true;
        break;
      }
      const double phi = std::atan2(d.y(), d.x());
      const double base = std::asin(std::clamp(s0, -1.0, 1.0));
      arcs = clip_arcs(arcs, phi + base, phi + M_PI - base);
    }
    if (empty) continue;
    double ang = 0.0;
    for (const auto& [lo, hi] : arcs) ang += hi - lo;
    total += r * ang;
  }
  return total;
}

bool developed_region_convex(const FlatDevelopment& dev, const SimplicialLengthComplex& x) {
  if (!dev.valid) return false;
  // Directed boundary edges, oriented with the developed region on the left.
  std::map<int, int> next;
  int boundary_edges = 0;
  for (int e = 0; e < x.cell_count(1); ++e) {
    const auto& cof = x.cofacets(1, e);
    if (cof.size() != 1) continue;
    ++boundary_edges;
    const auto [t, f] = cof.front();
    const Cell& c = x.cell(2, t);
    const int c0 = c.facet_corner_map[f][0];
    const int c1 = c.facet_corner_map[f][1];
    Eigen::Vector2d p[3];
    for (int j = 0; j < 3; ++j) p[j] = vertex_xy(dev, c.vertices[j]);
    const bool ccw = cross2(p[1] - p[0], p[2] - p[0]) > 0.0;
    // In a CCW triangle the cycle 0->1->2->0 keeps the interior on the left.
    const bool forward = (c1 - c0 + 3) % 3 == 1;
    int u = c.vertices[c0], v = c.vertices[c1];
    if (ccw != forward) std::swap(u, v);
    if (next.count(u)) return false;  // branching boundary
    next[u] = v;
  }
  if (boundary_edges == 0) return false;

  const double tol = 1e-9 * (1.0 + x.max_edge_length() * x.max_edge_length());
  const int start = next.begin()->first;
  int cur = start;
  int walked = 0;
  do {
    auto it = next.find(cur);
    if (it == next.end()) return false;
    const int mid = it->second;
    auto it2 = next.find(mid);
    if (it2 == next.end()) return false;
    const Eigen::Vector2d a = vertex_xy(dev, cur);
    const Eigen::Vector2d b = vertex_xy(dev, mid);
    const Eigen::Vector2d q = vertex_xy(dev, it2->second);
    if (cross2(b - a, q - b) < -tol) return false;
    cur = mid;
    ++walked;
    if (walked > boundary_edges) return false;
  } while (cur != start);
  return walked == boundary_edges;  // a single convex loop
}

bool developed_disk_isometric(const FlatDevelopment& dev, const SimplicialLengthComplex& x,
                              const MetricPoint& center, double r) {
  if (!dev.valid || !(r >= 0.0)) return false;
  const auto [cx, cy] = developed_point(dev, x, center);
  const Eigen::Vector2d c(cx, cy);
  const double tol = 1e-9 * (1.0 + r);
  // Edges with other than two incident triangles (region boundary, stray or
  // non-manifold edges) must stay outside the open disk.
  for (int e = 0; e < x.cell_count(1); ++e) {
    if (x.cofacets(1, e).size() == 2) continue;
    const Cell& cell = x.cell(1, e);
    const Eigen::Vector2d a = vertex_xy(dev, cell.vertices[0]);
    const Eigen::Vector2d b = vertex_xy(dev, cell.vertices[1]);
    const Eigen::Vector2d d = b - a;
    const double dn2 = d.squaredNorm();
    const double t = dn2 > 0.0 ? std::clamp((c - a).dot(d) / dn2, 0.0, 1.0) : 0.0;
    if ((a + t * d - c).norm() < r - tol) return false;
  }
  // Vertices strictly inside the disk must be flat so the covered disk
  // carries no cone point.
  for (int v = 0; v < x.vertex_count(); ++v) {
    if ((vertex_xy(dev, v) - c).norm() >= r - tol) continue;
    if (std::abs(x.vertex_angle(v) - 2.0 * M_PI) > 1e-7) return false;
  }
  return true;
}

}  // namespace polyscal
