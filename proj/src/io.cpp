#include "thb/io.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace thb {

nlohmann::json mesh_to_json(const HierPartition& mesh) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : mesh.cells()) cells.push_back({c.level, c.i, c.j});
    return {{"degree", mesh.degree()}, {"base_cells", mesh.base_cells()}, {"cells", cells}};
}

MeshDocument parse_mesh_document(const nlohmann::json& doc) {
    MeshDocument out;
    try {
        out.degree = doc.at("degree").get<int>();
        out.base_cells = doc.at("base_cells").get<int>();
        for (const auto& c : doc.at("cells")) {
            if (!c.is_array() || c.size() != 3)
                throw std::invalid_argument("mesh document: cells must be [level,i,j] triples");
            out.cells.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("mesh document: ") + e.what());
    }
    return out;
}

HierPartition mesh_from_json(const nlohmann::json& doc, int max_levels) {
    const auto parsed = parse_mesh_document(doc);
    return HierPartition::from_cells(parsed.degree, parsed.base_cells, parsed.cells, max_levels);
}

nlohmann::json field_to_json(const SplineField& field) {
    const auto& basis = field.basis();
    nlohmann::json functions = nlohmann::json::array();
    for (const auto& f : basis.functions()) functions.push_back({f.level, f.index.i, f.index.j});
    std::vector<double> coeffs(field.coefficients().data(),
                               field.coefficients().data() + field.coefficients().size());
    return {{"degree", basis.degree()},
            {"base_cells", basis.mesh().base_cells()},
            {"functions", functions},
            {"coefficients", coeffs}};
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(1) << "\n";
}

}  // namespace thb
