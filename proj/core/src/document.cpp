#include "polyscal/document.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

namespace polyscal {

namespace {

using nlohmann::json;

int resolve_vertex(const json& ref, const std::map<std::string, int>& by_name, int count,
                   const char* what) {
  if (ref.is_number_integer()) {
    int v = ref.get<int>();
    if (v < 0 || v >= count) throw std::invalid_argument(std::string(what) + ": vertex index out of range");
    return v;
  }
  if (ref.is_string()) {
    auto it = by_name.find(ref.get<std::string>());
    if (it == by_name.end())
      throw std::invalid_argument(std::string(what) + ": unknown vertex name \"" + ref.get<std::string>() + "\"");
    if (it->second < 0)
      throw std::invalid_argument(std::string(what) + ": vertex name \"" + ref.get<std::string>() +
                                  "\" is not unique; use indices");
    return it->second;
  }
  throw std::invalid_argument(std::string(what) + ": vertex reference must be an index or a name");
}

}  // namespace

nlohmann::json complex_to_json(const SimplicialLengthComplex& x) {
  json j;
  j["vertices"] = x.vertex_names();
  json edges = json::array();
  for (int e = 0; e < x.cell_count(1); ++e) {
    const Cell& c = x.cell(1, e);
    json je{{"tail", c.vertices[0]}, {"head", c.vertices[1]}, {"length", c.length}};
    if (!c.name.empty()) je["name"] = c.name;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  json tris = json::array();
  for (int t = 0; t < x.cell_count(2); ++t) {
    const Cell& c = x.cell(2, t);
    // facets are (s12, s20, s01); emit in side order (s01, s12, s20).
    json jt{{"sides", {c.facets[2], c.facets[0], c.facets[1]}},
            {"reversed",
             {c.facet_corner_map[2][0] != 0, c.facet_corner_map[0][0] != 1,
              c.facet_corner_map[1][0] != 2}}};
    if (!c.name.empty()) jt["name"] = c.name;
    tris.push_back(std::move(jt));
  }
  j["triangles"] = std::move(tris);
  json tets = json::array();
  for (int s = 0; s < x.cell_count(3); ++s) {
    const Cell& c = x.cell(3, s);
    json js{{"vertices", c.vertices}};
    if (!c.name.empty()) js["name"] = c.name;
    tets.push_back(std::move(js));
  }
  j["tetrahedra"] = std::move(tets);
  return j;
}

SimplicialLengthComplex complex_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("mesh document must be a JSON object");
  ComplexBuilder b;
  std::map<std::string, int> by_name;
  if (!j.contains("vertices") || !j["vertices"].is_array())
    throw std::invalid_argument("mesh document needs a \"vertices\" array");
  for (const json& v : j["vertices"]) {
    std::string name = v.is_string() ? v.get<std::string>() : v.value("name", "");
    int id = b.add_vertex(name);
    if (!name.empty()) {
      auto [it, fresh] = by_name.emplace(name, id);
      if (!fresh) it->second = -1;  // duplicate names cannot be referenced
    }
  }
  int nv = b.vertex_count();
  for (const json& e : j.value("edges", json::array())) {
    if (!e.is_object() || !e.contains("tail") || !e.contains("head") || !e.contains("length"))
      throw std::invalid_argument("edge entries need tail, head and length");
    b.add_edge(resolve_vertex(e["tail"], by_name, nv, "edge"),
               resolve_vertex(e["head"], by_name, nv, "edge"), e["length"].get<double>(),
               e.value("name", ""));
  }
  int ne = static_cast<int>(j.value("edges", json::array()).size());
  for (const json& t : j.value("triangles", json::array())) {
    std::string name = t.value("name", "");
    if (t.contains("sides")) {
      auto sides = t["sides"];
      if (!sides.is_array() || sides.size() != 3)
        throw std::invalid_argument("triangle \"sides\" must list three edges: " + name);
      std::array<int, 3> s{};
      for (int i = 0; i < 3; ++i) {
        s[i] = sides[i].get<int>();
        if (s[i] < 0 || s[i] >= ne)
          throw std::invalid_argument("triangle side index out of range: " + name);
      }
      std::array<bool, 3> rev{false, false, false};
      if (t.contains("reversed")) {
        auto r = t["reversed"];
        if (!r.is_array() || r.size() != 3)
          throw std::invalid_argument("triangle \"reversed\" must list three flags: " + name);
        for (int i = 0; i < 3; ++i) rev[i] = r[i].get<bool>();
      }
      b.add_triangle_by_edges(s, rev, name);
    } else if (t.contains("vertices")) {
      auto verts = t["vertices"];
      if (!verts.is_array() || verts.size() != 3)
        throw std::invalid_argument("triangle \"vertices\" must list three vertices: " + name);
      b.add_triangle(resolve_vertex(verts[0], by_name, nv, "triangle"),
                     resolve_vertex(verts[1], by_name, nv, "triangle"),
                     resolve_vertex(verts[2], by_name, nv, "triangle"), name);
    } else {
      throw std::invalid_argument("triangle entries need \"sides\" or \"vertices\": " + name);
    }
  }
  for (const json& s : j.value("tetrahedra", json::array())) {
    std::string name = s.value("name", "");
    if (!s.is_object() || !s.contains("vertices") || !s["vertices"].is_array() ||
        s["vertices"].size() != 4)
      throw std::invalid_argument("tetrahedron entries need four \"vertices\": " + name);
    auto verts = s["vertices"];
    b.add_tetrahedron(resolve_vertex(verts[0], by_name, nv, "tetrahedron"),
                      resolve_vertex(verts[1], by_name, nv, "tetrahedron"),
                      resolve_vertex(verts[2], by_name, nv, "tetrahedron"),
                      resolve_vertex(verts[3], by_name, nv, "tetrahedron"), name);
  }
  return b.build();
}

SimplicialLengthComplex load_complex(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh document: " + path);
  json j;
  in >> j;
  return complex_from_json(j);
}

void save_complex(const SimplicialLengthComplex& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh document: " + path);
  out << complex_to_json(x).dump(2) << "\n";
}

ValidationReport validate_document(const nlohmann::json& j) {
  try {
    SimplicialLengthComplex x = complex_from_json(j);
    return x.validate();
  } catch (const std::exception& ex) {
    ValidationReport r;
    r.valid = false;
    r.errors.push_back(ex.what());
    return r;
  }
}

ScaleFunction scale_from_json(const SimplicialLengthComplex& x, const nlohmann::json& j) {
  ScaleFunction f;
  if (j.is_number()) {
    f = ScaleFunction::constant(x, j.get<double>());
  } else if (j.is_object() && j.contains("values")) {
    f.vertex_values = j["values"].get<std::vector<double>>();
    f.lipschitz = j.value("lipschitz", 1.0);
  } else {
    throw std::invalid_argument("scale must be a number or {\"values\": [...], \"lipschitz\": L}");
  }
  f.check_valid(x);
  return f;
}

}  // namespace polyscal
