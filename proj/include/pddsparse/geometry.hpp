#pragma once

// Tessellation of the square domain [-L/2, L/2]^2 into m x m subdomains,
// knots on the interior grid lines, per-knot patches and per-side stencils.
//
// All construction happens on an integer lattice of spacing dz = 1/n, so
// knot positions, patch corners and stencil arc coordinates are exact
// multiples of dz. Floating-point positions are derived from the lattice.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pddsparse/types.hpp"

namespace pddsparse {

struct DiscretizationConfig {
    double domain_half_side = 10.0;  ///< L/2
    int grid_count = 4;              ///< m, subdomains per side
    double knot_density = 4.0;       ///< n, knots per unit length
    int elongation = 3;              ///< e, knots appended past each stencil corner

    double side_length() const { return 2.0 * domain_half_side; }
    double subdomain_size() const { return side_length() / grid_count; }
    double knot_spacing() const { return 1.0 / knot_density; }
};

enum class KnotKind : std::uint8_t { mid, crossing, boundary_dirichlet };

inline constexpr std::string_view to_string(KnotKind k) {
    switch (k) {
        case KnotKind::mid: return "mid";
        case KnotKind::crossing: return "crossing";
        case KnotKind::boundary_dirichlet: return "boundary-dirichlet";
    }
    return "?";
}

struct LatticePoint {
    int ix = 0;
    int iy = 0;
    friend constexpr bool operator==(LatticePoint, LatticePoint) = default;
};

struct Knot {
    std::size_t index = 0;  ///< system index (after ordering)
    LatticePoint lattice;
    Vec2 position;
    KnotKind kind = KnotKind::mid;
    std::vector<int> interfaces;  ///< ids of the interface segments the knot lies on
};

struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(Vec2 p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
};

/// One side of a patch boundary. Vertical sides (E, W) are parameterised
/// by y, horizontal ones (N, S) by x; the origin is the lower end.
struct PatchSide {
    Side side = Side::E;
    bool is_interface = false;  ///< false: the side lies on the Dirichlet boundary
    Vec2 origin;
    Vec2 end;
    std::optional<std::size_t> stencil;  ///< index into Discretization::stencils
};

struct Patch {
    std::size_t owner = 0;
    Rect bounds;
    std::array<PatchSide, 4> sides;  ///< indexed by index_of(Side)
    std::vector<Side> dirichlet_sides;

    const PatchSide& side(Side s) const { return sides[index_of(s)]; }
    bool is_floating() const { return dirichlet_sides.empty(); }
};

struct Stencil {
    std::size_t patch = 0;
    Side side = Side::E;
    std::vector<std::size_t> members;  ///< system indices, monotone in arc length
    std::vector<double> arc;           ///< z_j relative to the patch-side origin
};

struct KnotOrdering {
    std::vector<std::size_t> system_of_geometric;  ///< geometric (row-major lattice) order -> system index
    std::size_t dirichlet_count = 0;
};

struct Discretization {
    DiscretizationConfig config;
    int lattice_extent = 0;     ///< n*L, lattice points per side minus one
    int lattice_per_cell = 0;   ///< n*H
    std::vector<Knot> knots;    ///< in system order
    std::vector<Patch> patches; ///< patches[i] belongs to knot i, for i < interior_count()
    std::vector<Stencil> stencils;
    KnotOrdering ordering;

    std::size_t size() const { return knots.size(); }
    std::size_t dirichlet_count() const { return ordering.dirichlet_count; }
    std::size_t interior_count() const { return knots.size() - ordering.dirichlet_count; }
    double knot_spacing() const { return config.knot_spacing(); }
    double subdomain_size() const { return config.subdomain_size(); }

    Vec2 to_position(LatticePoint p) const {
        const double dz = knot_spacing();
        return {-config.domain_half_side + p.ix * dz, -config.domain_half_side + p.iy * dz};
    }

    /// System index of the knot at a lattice point, if there is one.
    std::optional<std::size_t> knot_at(LatticePoint p) const {
        if (p.ix < 0 || p.iy < 0 || p.ix > lattice_extent || p.iy > lattice_extent) return std::nullopt;
        const int v = lookup_[static_cast<std::size_t>(p.iy) * (lattice_extent + 1) + p.ix];
        if (v < 0) return std::nullopt;
        return static_cast<std::size_t>(v);
    }

    std::vector<int> lookup_;  // lattice -> system index or -1
};

namespace detail {

inline int checked_lattice_count(double value, const char* what) {
    const double rounded = std::round(value);
    if (rounded < 1.0 || std::abs(value - rounded) > 1e-9 * std::max(1.0, std::abs(value))) {
        throw ConfigError(std::string(what) + " must be a positive integer, got " + std::to_string(value));
    }
    return static_cast<int>(rounded);
}

// Interface ids: vertical line k (1..m-1), cell row r -> (k-1)*m + r;
// horizontal lines follow after all vertical ones.
inline std::vector<int> interfaces_of(LatticePoint p, int per_cell, int extent) {
    const int m = extent / per_cell;
    std::vector<int> ids;
    const auto add_vertical = [&](int line, int coord) {
        if (coord > 0 && coord % per_cell == 0 && coord < extent) {
            // Crossing: the knot terminates two segments on this line.
            ids.push_back((line - 1) * m + coord / per_cell - 1);
            ids.push_back((line - 1) * m + coord / per_cell);
        } else {
            ids.push_back((line - 1) * m + std::min(coord / per_cell, m - 1));
        }
    };
    const int offset = (m - 1) * m;
    if (p.ix > 0 && p.ix < extent && p.ix % per_cell == 0) add_vertical(p.ix / per_cell, p.iy);
    if (p.iy > 0 && p.iy < extent && p.iy % per_cell == 0) {
        const std::size_t before = ids.size();
        add_vertical(p.iy / per_cell, p.ix);
        for (std::size_t k = before; k < ids.size(); ++k) ids[k] += offset;
    }
    return ids;
}

}  // namespace detail

/// Validity of the tessellation: at least 9 subdomains, a 3x3 block of
/// floating subdomains, and every subdomain sharing a side with another.
struct TessellationCheck {
    bool valid = false;
    std::string reason;
};

inline TessellationCheck is_valid_tessellation(const DiscretizationConfig& cfg) {
    const int m = cfg.grid_count;
    std::vector<std::string> failures;
    if (m * m < 9) failures.emplace_back("fewer than 9 subdomains");
    // Floating subdomains are the (m-2)^2 squares not touching the boundary.
    if (m - 2 < 3) failures.emplace_back("no 3x3 floating subtessellation");
    if (m < 2) failures.emplace_back("a subdomain shares no side with another");
    TessellationCheck out;
    out.valid = failures.empty();
    for (std::size_t k = 0; k < failures.size(); ++k) {
        if (k > 0) out.reason += "; ";
        out.reason += failures[k];
    }
    return out;
}

inline Discretization build_discretization(const DiscretizationConfig& cfg) {
    if (!(cfg.domain_half_side > 0.0)) throw ConfigError("domain half side must be positive");
    if (cfg.grid_count < 2) throw ConfigError("grid count m must be at least 2 (no interior interfaces otherwise)");
    if (!(cfg.knot_density > 0.0)) throw ConfigError("knot density must be positive");
    if (cfg.elongation < 0) throw ConfigError("elongation must be non-negative");

    Discretization d;
    d.config = cfg;
    d.lattice_per_cell = detail::checked_lattice_count(cfg.knot_density * cfg.subdomain_size(), "n*H");
    d.lattice_extent = d.lattice_per_cell * cfg.grid_count;
    const int K = d.lattice_extent;
    const int c = d.lattice_per_cell;

    const auto on_vertical = [&](int ix) { return ix > 0 && ix < K && ix % c == 0; };
    const auto on_boundary = [&](LatticePoint p) { return p.ix == 0 || p.iy == 0 || p.ix == K || p.iy == K; };

    // Geometric order: row-major over the lattice.
    std::vector<LatticePoint> geometric;
    for (int iy = 0; iy <= K; ++iy) {
        for (int ix = 0; ix <= K; ++ix) {
            if (on_vertical(ix) || on_vertical(iy)) geometric.push_back({ix, iy});
        }
    }

    // Stable partition: interior knots first, Dirichlet knots last.
    std::vector<std::size_t> interior, boundary;
    for (std::size_t g = 0; g < geometric.size(); ++g) {
        (on_boundary(geometric[g]) ? boundary : interior).push_back(g);
    }
    d.ordering.system_of_geometric.assign(geometric.size(), 0);
    d.ordering.dirichlet_count = boundary.size();
    d.knots.resize(geometric.size());
    d.lookup_.assign(static_cast<std::size_t>(K + 1) * (K + 1), -1);
    std::size_t next = 0;
    for (const auto* group : {&interior, &boundary}) {
        for (std::size_t g : *group) {
            const LatticePoint p = geometric[g];
            Knot& k = d.knots[next];
            k.index = next;
            k.lattice = p;
            k.position = d.to_position(p);
            if (on_boundary(p)) {
                k.kind = KnotKind::boundary_dirichlet;
                // Exact boundary coordinate, independent of rounding in to_position.
                if (p.ix == 0) k.position.x = -cfg.domain_half_side;
                if (p.ix == K) k.position.x = cfg.domain_half_side;
                if (p.iy == 0) k.position.y = -cfg.domain_half_side;
                if (p.iy == K) k.position.y = cfg.domain_half_side;
            } else if (on_vertical(p.ix) && on_vertical(p.iy)) {
                k.kind = KnotKind::crossing;
            } else {
                k.kind = KnotKind::mid;
            }
            k.interfaces = detail::interfaces_of(p, c, K);
            d.ordering.system_of_geometric[g] = next;
            d.lookup_[static_cast<std::size_t>(p.iy) * (K + 1) + p.ix] = static_cast<int>(next);
            ++next;
        }
    }

    const int e = cfg.elongation;
    d.patches.resize(d.interior_count());
    for (std::size_t i = 0; i < d.interior_count(); ++i) {
        const Knot& k = d.knots[i];
        const LatticePoint p = k.lattice;
        int lx0, lx1, ly0, ly1;
        if (on_vertical(p.ix)) {
            lx0 = p.ix - c;
            lx1 = p.ix + c;
        } else {
            lx0 = (p.ix / c) * c;
            lx1 = lx0 + c;
        }
        if (on_vertical(p.iy)) {
            ly0 = p.iy - c;
            ly1 = p.iy + c;
        } else {
            ly0 = (p.iy / c) * c;
            ly1 = ly0 + c;
        }

        Patch& patch = d.patches[i];
        patch.owner = i;
        const Vec2 lo = d.to_position({lx0, ly0});
        const Vec2 hi = d.to_position({lx1, ly1});
        patch.bounds = {lo.x, hi.x, lo.y, hi.y};

        for (Side s : all_sides) {
            PatchSide& ps = patch.sides[index_of(s)];
            ps.side = s;
            const bool vertical = (s == Side::E || s == Side::W);
            const int line = (s == Side::E) ? lx1 : (s == Side::W) ? lx0 : (s == Side::N) ? ly1 : ly0;
            const int from = vertical ? ly0 : lx0;
            const int to = vertical ? ly1 : lx1;
            ps.origin = vertical ? d.to_position({line, from}) : d.to_position({from, line});
            ps.end = vertical ? d.to_position({line, to}) : d.to_position({to, line});
            ps.is_interface = line > 0 && line < K;
            if (!ps.is_interface) {
                patch.dirichlet_sides.push_back(s);
                continue;
            }
            Stencil st;
            st.patch = i;
            st.side = s;
            const int first = std::max(0, from - e);
            const int last = std::min(K, to + e);
            const double dz = cfg.knot_spacing();
            for (int t = first; t <= last; ++t) {
                const LatticePoint q = vertical ? LatticePoint{line, t} : LatticePoint{t, line};
                const auto idx = d.knot_at(q);
                if (!idx) throw GeometryError("stencil point is not a knot");
                st.members.push_back(*idx);
                st.arc.push_back((t - from) * dz);
            }
            ps.stencil = d.stencils.size();
            d.stencils.push_back(std::move(st));
        }
    }
    return d;
}

/// Arc-length coordinate of a point on a patch side, relative to the side origin.
inline double arc_coordinate(const Patch& patch, Side s, Vec2 point) {
    const PatchSide& ps = patch.side(s);
    const double tol = 1e-12 * 2.0 * std::max({std::abs(patch.bounds.x0), std::abs(patch.bounds.x1),
                                               std::abs(patch.bounds.y0), std::abs(patch.bounds.y1), 1.0});
    const bool vertical = (s == Side::E || s == Side::W);
    const double across = vertical ? point.x - ps.origin.x : point.y - ps.origin.y;
    const double along = vertical ? point.y - ps.origin.y : point.x - ps.origin.x;
    const double length = vertical ? ps.end.y - ps.origin.y : ps.end.x - ps.origin.x;
    if (std::abs(across) > tol || along < -tol || along > length + tol) {
        throw GeometryError("point (" + std::to_string(point.x) + ", " + std::to_string(point.y) +
                            ") is not on side " + std::string(to_string(s)));
    }
    return along;
}

/// Lattice-based tolerance check used by arc_coordinate, exposed for tests.
inline double geometric_tolerance(const DiscretizationConfig& cfg) { return 1e-12 * cfg.side_length(); }

inline nlohmann::json to_json(const Discretization& d) {
    using nlohmann::json;
    json knots = json::array();
    for (const Knot& k : d.knots) {
        knots.push_back({{"index", k.index},
                         {"x", k.position.x},
                         {"y", k.position.y},
                         {"kind", std::string(to_string(k.kind))},
                         {"interfaces", k.interfaces}});
    }
    json patches = json::array();
    for (const Patch& p : d.patches) {
        json sides = json::array();
        for (const PatchSide& s : p.sides) {
            json js = {{"side", std::string(to_string(s.side))},
                       {"interface", s.is_interface},
                       {"origin", {s.origin.x, s.origin.y}},
                       {"end", {s.end.x, s.end.y}}};
            if (s.stencil) js["stencil"] = *s.stencil;
            sides.push_back(std::move(js));
        }
        patches.push_back({{"owner", p.owner},
                           {"bounds", {p.bounds.x0, p.bounds.x1, p.bounds.y0, p.bounds.y1}},
                           {"sides", std::move(sides)}});
    }
    json stencils = json::array();
    for (const Stencil& s : d.stencils) {
        stencils.push_back({{"patch", s.patch},
                            {"side", std::string(to_string(s.side))},
                            {"members", s.members},
                            {"arc", s.arc}});
    }
    return {{"schema_version", 1},
            {"config",
             {{"L", d.config.side_length()},
              {"m", d.config.grid_count},
              {"n", d.config.knot_density},
              {"elongation", d.config.elongation}}},
            {"knot_count", d.size()},
            {"dirichlet_count", d.dirichlet_count()},
            {"knots", std::move(knots)},
            {"patches", std::move(patches)},
            {"stencils", std::move(stencils)},
            {"ordering", d.ordering.system_of_geometric}};
}

}  // namespace pddsparse
