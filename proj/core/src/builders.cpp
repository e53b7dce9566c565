#include <cmath>
#include <string>

#include "polyscal/complex.hpp"
#include "polyscal/rng.hpp"

namespace polyscal {

// Unit-square torus: one vertex, three loop edges (two sides and a diagonal),
// two right isoceles triangles. Total angle at the vertex is 2*pi.
SimplicialLengthComplex make_flat_torus() {
  ComplexBuilder b;
  int p = b.add_vertex("p");
  int a = b.add_edge(p, p, 1.0, "a");
  int bb = b.add_edge(p, p, 1.0, "b");
  int d = b.add_edge(p, p, std::sqrt(2.0), "d");
  b.add_triangle_by_edges({a, bb, d}, {false, false, true}, "T0");
  b.add_triangle_by_edges({d, a, bb}, {false, true, true}, "T1");
  return b.build();
}

SimplicialLengthComplex make_cycle(int segments, double total_length) {
  if (segments < 1) throw std::invalid_argument("cycle needs at least one segment");
  ComplexBuilder b;
  for (int i = 0; i < segments; ++i) b.add_vertex("v" + std::to_string(i));
  for (int i = 0; i < segments; ++i)
    b.add_edge(i, (i + 1) % segments, total_length / segments, "e" + std::to_string(i));
  return b.build();
}

SimplicialLengthComplex make_wedge_of_circles(int arcs_per_circle, double circle_length) {
  if (arcs_per_circle < 1) throw std::invalid_argument("wedge needs at least one arc per circle");
  ComplexBuilder b;
  int w = b.add_vertex("w");
  double arc = circle_length / arcs_per_circle;
  for (char circle : {'a', 'b'}) {
    int prev = w;
    for (int i = 1; i < arcs_per_circle; ++i) {
      int v = b.add_vertex(std::string(1, circle) + std::to_string(i));
      b.add_edge(prev, v, arc, std::string(1, circle) + "e" + std::to_string(i - 1));
      prev = v;
    }
    b.add_edge(prev, w, arc, std::string(1, circle) + "e" + std::to_string(arcs_per_circle - 1));
  }
  return b.build();
}

SimplicialLengthComplex make_interval(int segments, double total_length) {
  if (segments < 1) throw std::invalid_argument("interval needs at least one segment");
  ComplexBuilder b;
  for (int i = 0; i <= segments; ++i) b.add_vertex("v" + std::to_string(i));
  for (int i = 0; i < segments; ++i)
    b.add_edge(i, i + 1, total_length / segments, "e" + std::to_string(i));
  return b.build();
}

// Boundary surface of the regular octahedron with unit edges; every vertex
// has total angle 4*pi/3, so each vertex is a cone point. Optional symmetric
// edge-length jitter of relative size `perturbation`.
SimplicialLengthComplex make_octahedron(double perturbation, std::uint64_t seed) {
  ComplexBuilder b;
  const char* names[6] = {"px", "nx", "py", "ny", "pz", "nz"};
  for (const char* n : names) b.add_vertex(n);
  CounterRng rng(seed);
  int edge_counter = 0;
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v) {
      if (v == u + 1 && u % 2 == 0) continue;  // antipodal pairs (0,1), (2,3), (4,5)
      double len = 1.0 + perturbation * (2.0 * rng.uniform(edge_counter) - 1.0);
      b.add_edge(u, v, len);
      ++edge_counter;
    }
  for (int x = 0; x < 2; ++x)
    for (int y = 2; y < 4; ++y)
      for (int z = 4; z < 6; ++z) b.add_triangle(x, y, z);
  return b.build();
}

// Flat hexagonal disk: unit circumradius, six equilateral triangles around a
// center vertex. The interior is flat; the boundary is a closed hexagon.
SimplicialLengthComplex make_disk_hexagon() {
  ComplexBuilder b;
  int c = b.add_vertex("c");
  for (int i = 0; i < 6; ++i) b.add_vertex("h" + std::to_string(i));
  for (int i = 0; i < 6; ++i) b.add_edge(c, 1 + i, 1.0);
  for (int i = 0; i < 6; ++i) b.add_edge(1 + i, 1 + (i + 1) % 6, 1.0);
  for (int i = 0; i < 6; ++i) b.add_triangle(c, 1 + i, 1 + (i + 1) % 6);
  return b.build();
}

SimplicialLengthComplex make_single_triangle(double a, double b, double c) {
  ComplexBuilder bld;
  bld.add_vertex("v0");
  bld.add_vertex("v1");
  bld.add_vertex("v2");
  bld.add_edge(0, 1, a);
  bld.add_edge(1, 2, b);
  bld.add_edge(2, 0, c);
  bld.add_triangle(0, 1, 2, "T");
  return bld.build();
}

SimplicialLengthComplex make_tetrahedron(double edge) {
  ComplexBuilder b;
  for (int i = 0; i < 4; ++i) b.add_vertex("v" + std::to_string(i));
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v) b.add_edge(u, v, edge);
  b.add_tetrahedron(0, 1, 2, 3, "S");
  return b.build();
}

}  // namespace polyscal
