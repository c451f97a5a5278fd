#pragma once

// JSON and CSV documents exchanged with the command line tool.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "thb/hier_mesh.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// {"degree": r, "base_cells": N0, "cells": [[level,i,j], ...]} with cells
/// sorted lexicographically.
nlohmann::json mesh_to_json(const HierPartition& mesh);

/// Cells listed in a mesh document; throws std::invalid_argument on a
/// malformed document (not on structural mesh problems).
struct MeshDocument {
    int degree = 0;
    int base_cells = 0;
    std::vector<LevelCell> cells;
};
MeshDocument parse_mesh_document(const nlohmann::json& doc);

/// Parses and validates; throws std::invalid_argument on structural errors.
HierPartition mesh_from_json(const nlohmann::json& doc, int max_levels = kDefaultMaxLevels);

/// {"degree", "base_cells", "functions": [[level,i,j],...], "coefficients": [...]}
nlohmann::json field_to_json(const SplineField& field);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);

}  // namespace thb
