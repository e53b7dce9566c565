#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "polyscal/complex.hpp"

namespace polyscal {

/// Serializes a complex to the mesh document schema:
///   {
///     "vertices": ["p", ...],
///     "edges": [{"tail": 0, "head": 0, "length": 1.0, "name": "a"}, ...],
///     "triangles": [{"sides": [0, 1, 2], "reversed": [false, false, true]}
///                   or {"vertices": [0, 1, 2]}, ...],
///     "tetrahedra": [{"vertices": [0, 1, 2, 3]}, ...]
///   }
/// Vertex references may be indices or (unique) vertex names.
nlohmann::json complex_to_json(const SimplicialLengthComplex& x);
SimplicialLengthComplex complex_from_json(const nlohmann::json& j);

SimplicialLengthComplex load_complex(const std::string& path);
void save_complex(const SimplicialLengthComplex& x, const std::string& path);

/// Non-throwing schema and metric validation; collects every error found.
ValidationReport validate_document(const nlohmann::json& j);

/// Optional per-vertex scale data: {"values": [...], "lipschitz": 1.0} or a
/// single number for a constant function.
ScaleFunction scale_from_json(const SimplicialLengthComplex& x, const nlohmann::json& j);

}  // namespace polyscal
