#include "thb/hier_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "thb/errors.hpp"

namespace thb {

std::string to_string(const LevelCell& c) {
    std::ostringstream os;
    os << "(" << c.level << "," << c.i << "," << c.j << ")";
    return os.str();
}

HierPartition::HierPartition(int degree, int base_cells, int max_levels)
    : degree_(degree), base_cells_(base_cells), max_levels_(max_levels) {
    if (base_cells < 1) throw ConfigError("base_cells must be positive");
    if (max_levels < 1) throw ConfigError("max_levels must be positive");
    ensure_level(0);
    for (int i = 0; i < base_cells; ++i)
        for (int j = 0; j < base_cells; ++j) active_[0].insert(key(i, j));
    count_ = static_cast<std::size_t>(base_cells) * base_cells;
}

void HierPartition::ensure_level(int level) {
    if (static_cast<int>(active_.size()) <= level) {
        active_.resize(level + 1);
        refined_.resize(level + 1);
    }
}

int HierPartition::num_levels() const noexcept {
    for (int l = static_cast<int>(active_.size()) - 1; l >= 0; --l)
        if (!active_[l].empty()) return l + 1;
    return 0;
}

double HierPartition::diameter(const LevelCell& c) const noexcept {
    return std::sqrt(2.0) * cell_width(c.level);
}

Box HierPartition::box(const LevelCell& c) const noexcept {
    const double h = cell_width(c.level);
    return {c.i * h, (c.i + 1) * h, c.j * h, (c.j + 1) * h};
}

bool HierPartition::in_range(const LevelCell& c) const noexcept {
    if (c.level < 0 || c.level >= max_levels_) return false;
    const int n = cells_per_side(c.level);
    return c.i >= 0 && c.j >= 0 && c.i < n && c.j < n;
}

bool HierPartition::is_active(const LevelCell& c) const noexcept {
    if (c.level < 0 || c.level >= static_cast<int>(active_.size())) return false;
    return active_[c.level].contains(key(c.i, c.j));
}

bool HierPartition::in_subdomain(const LevelCell& c) const noexcept {
    if (c.level < 0 || c.level >= static_cast<int>(active_.size())) return false;
    const auto k = key(c.i, c.j);
    return active_[c.level].contains(k) || refined_[c.level].contains(k);
}

std::optional<LevelCell> HierPartition::active_ancestor(const LevelCell& c) const noexcept {
    const int top = std::min(c.level, static_cast<int>(active_.size()) - 1);
    for (int k = top; k >= 0; --k) {
        const LevelCell a = c.ancestor(k);
        if (active_[k].contains(key(a.i, a.j))) return a;
    }
    return std::nullopt;
}

LevelCell HierPartition::locate(Point p) const {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
        throw std::invalid_argument("locate: point outside the unit square");
    for (int l = 0; l < static_cast<int>(active_.size()); ++l) {
        const int n = cells_per_side(l);
        const int i = std::min(static_cast<int>(p.x * n), n - 1);
        const int j = std::min(static_cast<int>(p.y * n), n - 1);
        if (active_[l].contains(key(i, j))) return {l, i, j};
    }
    throw std::logic_error("locate: partition does not cover the point");
}

std::vector<LevelCell> HierPartition::cells() const {
    std::vector<LevelCell> out;
    out.reserve(count_);
    for (int l = 0; l < static_cast<int>(active_.size()); ++l) {
        auto level_cells = cells_at(l);
        out.insert(out.end(), level_cells.begin(), level_cells.end());
    }
    return out;
}

std::vector<LevelCell> HierPartition::cells_at(int level) const {
    std::vector<LevelCell> out;
    if (level < 0 || level >= static_cast<int>(active_.size())) return out;
    out.reserve(active_[level].size());
    for (auto k : active_[level])
        out.push_back({level, static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)});
    std::sort(out.begin(), out.end());
    return out;
}

void HierPartition::split(const LevelCell& c) {
    if (!is_active(c)) throw std::invalid_argument("split: cell " + to_string(c) + " is not active");
    if (c.level + 1 >= max_levels_)
        throw ResourceError("refinement of " + to_string(c) + " exceeds the level cap of " +
                            std::to_string(max_levels_));
    ensure_level(c.level + 1);
    active_[c.level].erase(key(c.i, c.j));
    refined_[c.level].insert(key(c.i, c.j));
    for (const auto& child : c.children()) active_[child.level].insert(key(child.i, child.j));
    count_ += 3;
}

bool operator==(const HierPartition& a, const HierPartition& b) {
    return a.degree_ == b.degree_ && a.base_cells_ == b.base_cells_ && a.count_ == b.count_ &&
           a.cells() == b.cells();
}

std::vector<std::string> structural_violations(int degree, int base_cells,
                                               const std::vector<LevelCell>& cells,
                                               int max_levels) {
    std::vector<std::string> out;
    if (degree < 0 || degree > kMaxDegree) out.push_back("degree out of range");
    if (base_cells < 1) {
        out.push_back("base_cells must be positive");
        return out;
    }
    std::vector<LevelCell> sorted = cells;
    std::sort(sorted.begin(), sorted.end());
    int deepest = 0;
    bool range_ok = true;
    for (const auto& c : sorted) {
        const int n = c.level >= 0 && c.level < 30 ? (base_cells << c.level) : 0;
        if (c.level < 0 || c.level >= max_levels || c.i < 0 || c.j < 0 || c.i >= n || c.j >= n) {
            out.push_back("cell " + to_string(c) + " out of range");
            range_ok = false;
            continue;
        }
        deepest = std::max(deepest, c.level);
    }
    if (!range_ok) return out;
    for (std::size_t k = 1; k < sorted.size(); ++k)
        if (sorted[k] == sorted[k - 1]) out.push_back("duplicate cell " + to_string(sorted[k]));
    std::unordered_set<std::uint64_t> present;
    for (const auto& c : sorted) present.insert(cell_key(c));
    for (const auto& c : sorted)
        for (int k = 0; k < c.level; ++k)
            if (present.contains(cell_key(c.ancestor(k)))) {
                out.push_back("cell " + to_string(c) + " overlaps cell " + to_string(c.ancestor(k)));
                break;
            }
    // Coverage: total area in units of the deepest level.
    unsigned long long area = 0;
    for (const auto& c : sorted) area += 1ull << (2 * (deepest - c.level));
    const unsigned long long expected =
        static_cast<unsigned long long>(base_cells) * base_cells << (2 * deepest);
    if (out.empty() && area != expected) out.push_back("cells do not cover the unit square");
    return out;
}

HierPartition HierPartition::from_cells(int degree, int base_cells,
                                        const std::vector<LevelCell>& cells, int max_levels) {
    const auto problems = structural_violations(degree, base_cells, cells, max_levels);
    if (!problems.empty()) {
        std::string msg = "invalid partition:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw std::invalid_argument(msg);
    }
    HierPartition mesh(degree, base_cells, max_levels);
    mesh.active_.clear();
    mesh.refined_.clear();
    mesh.count_ = 0;
    mesh.ensure_level(0);
    for (const auto& c : cells) {
        mesh.ensure_level(c.level);
        mesh.active_[c.level].insert(key(c.i, c.j));
        ++mesh.count_;
        for (int k = 0; k < c.level; ++k) {
            const auto a = c.ancestor(k);
            mesh.refined_[k].insert(key(a.i, a.j));
        }
    }
    return mesh;
}

HierPartition initial_partition(int base_cells, int degree, int max_levels) {
    if (degree < 2 || degree > kMaxDegree)
        throw ConfigError("degree must lie in [2, " + std::to_string(kMaxDegree) + "]");
    if (base_cells < std::max(2, degree) || base_cells + degree < 5)
        throw ConfigError("base_cells = " + std::to_string(base_cells) +
                          " too small for degree " + std::to_string(degree));
    if (max_levels < 1 || max_levels > 16) throw ConfigError("max_levels must lie in [1, 16]");
    return HierPartition(degree, base_cells, max_levels);
}

std::vector<LevelCell> support_extension(const HierPartition& mesh, const LevelCell& cell, int k) {
    if (k < 0 || k > cell.level)
        throw std::invalid_argument("support_extension: level must satisfy 0 <= k <= level(cell)");
    const LevelCell a = cell.ancestor(k);
    const int r = mesh.degree();
    const int n = mesh.cells_per_side(k);
    std::vector<LevelCell> out;
    for (int i = std::max(a.i - r, 0); i <= std::min(a.i + r, n - 1); ++i)
        for (int j = std::max(a.j - r, 0); j <= std::min(a.j + r, n - 1); ++j)
            out.push_back({k, i, j});
    return out;
}

std::vector<LevelCell> cell_neighborhood(const HierPartition& mesh, const LevelCell& cell) {
    if (!mesh.is_active(cell))
        throw std::invalid_argument("cell_neighborhood: cell " + to_string(cell) + " is not active");
    std::vector<LevelCell> out;
    if (cell.level == 0) return out;
    for (const auto& c : support_extension(mesh, cell, cell.level)) {
        const LevelCell p = c.parent();
        if (mesh.is_active(p)) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

void refine_recursive(HierPartition& mesh, const LevelCell& cell, std::size_t& splits) {
    if (mesh.is_active(cell)) {
        for (const auto& n : cell_neighborhood(mesh, cell)) refine_recursive(mesh, n, splits);
    }
    if (mesh.is_active(cell)) {
        mesh.split(cell);
        ++splits;
    }
}

}  // namespace

HierPartition recursive_refine(const HierPartition& mesh, const LevelCell& cell) {
    if (!mesh.is_active(cell))
        throw std::invalid_argument("recursive_refine: cell " + to_string(cell) + " is not active");
    HierPartition out = mesh;
    std::size_t splits = 0;
    refine_recursive(out, cell, splits);
    return out;
}

HierPartition mesh_refine(const HierPartition& mesh, const std::vector<LevelCell>& marked,
                          RefineStats* stats) {
    for (const auto& c : marked)
        if (!mesh.is_active(c))
            throw std::invalid_argument("mesh_refine: marked cell " + to_string(c) +
                                        " is not active");
    HierPartition out = mesh;
    std::size_t splits = 0;
    for (const auto& c : marked)
        if (out.is_active(c)) refine_recursive(out, c, splits);
    if (stats) {
        stats->marked = marked.size();
        stats->split = splits;
    }
    return out;
}

std::vector<LevelCell> auxiliary_domain(const HierPartition& mesh, int level) {
    std::vector<LevelCell> out;
    if (level < 0 || level >= mesh.num_levels()) return out;
    const int n = mesh.cells_per_side(level);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const LevelCell c{level, i, j};
            if (!mesh.in_subdomain(c)) continue;
            const auto ext = support_extension(mesh, c, level);
            if (std::all_of(ext.begin(), ext.end(),
                            [&](const LevelCell& e) { return mesh.in_subdomain(e); }))
                out.push_back(c);
        }
    return out;
}

EdgeSet edges(const HierPartition& mesh) {
    EdgeSet out;
    // Sides: 0 left, 1 right, 2 bottom, 3 top.
    constexpr int di[4] = {-1, 1, 0, 0};
    constexpr int dj[4] = {0, 0, -1, 1};
    for (const auto& c : mesh.cells()) {
        const int n = mesh.cells_per_side(c.level);
        for (int side = 0; side < 4; ++side) {
            Edge e;
            e.level = c.level;
            e.axis = side < 2 ? 0 : 1;
            e.line = side < 2 ? c.i + (side == 1 ? 1 : 0) : c.j + (side == 3 ? 1 : 0);
            e.start = side < 2 ? c.j : c.i;
            const LevelCell nb{c.level, c.i + di[side], c.j + dj[side]};
            if (nb.i < 0 || nb.j < 0 || nb.i >= n || nb.j >= n) {
                e.cells[0] = c;
                e.num_cells = 1;
                out.boundary.push_back(e);
                continue;
            }
            const bool positive_side = side == 1 || side == 3;
            if (mesh.is_active(nb)) {
                if (!positive_side) continue;
                e.cells = {c, nb};
            } else if (!mesh.in_subdomain(nb)) {
                const LevelCell coarse = *mesh.active_ancestor(nb);
                e.cells = positive_side ? std::array<LevelCell, 2>{c, coarse}
                                        : std::array<LevelCell, 2>{coarse, c};
            } else {
                continue;  // the finer side emits it
            }
            e.num_cells = 2;
            out.interior.push_back(e);
        }
    }
    auto order = [](const Edge& a, const Edge& b) {
        return std::tie(a.level, a.axis, a.line, a.start) < std::tie(b.level, b.axis, b.line, b.start);
    };
    std::sort(out.interior.begin(), out.interior.end(), order);
    std::sort(out.boundary.begin(), out.boundary.end(), order);
    return out;
}

}  // namespace thb
