#pragma once

// Marching tetrahedra over a displaced tet grid, plus the vector-Jacobian
// product back onto the grid's signed distances and displacements.

#include "dtet/mesh.hpp"
#include "dtet/tetgrid.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace dtet {

struct GridGradients {
    std::vector<double> sdf;
    std::vector<Vec3> displacement;

    explicit GridGradients(std::size_t n = 0) : sdf(n, 0.0), displacement(n, Vec3::Zero()) {}
};

namespace detail {

inline constexpr double kMinDenominator = 1e-12;

/// Zero values are nudged positive so every edge has a well-defined sign.
inline double signed_value(double s)
{
    return s == 0.0 ? 1e-8 : s;
}

inline double clamped_denominator(double sa, double sb)
{
    const double d = sb - sa;
    if (std::abs(d) >= kMinDenominator) return d;
    return d < 0.0 ? -kMinDenominator : kMinDenominator;
}

/// Triangles of one sign configuration, each corner given as a local tet edge (p, q).
struct CaseTriangles {
    int count = 0;
    std::array<std::array<std::array<int, 2>, 3>, 2> tris{};
};

/// Case table indexed by [negative-vertex mask][diagonal option]. Orientation
/// is resolved once on a reference positive tet: normals point from the
/// negative corners toward the positive ones. The orientation of a triangle
/// cut from a positively oriented tet never depends on where along the edges
/// the crossings sit, so the table applies to every tet of the grid.
struct CaseTable {
    std::array<std::array<CaseTriangles, 2>, 16> entries{};

    CaseTable()
    {
        const std::array<Vec3, 4> ref = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
        for (int mask = 0; mask < 16; ++mask) {
            std::vector<int> neg, pos;
            for (int v = 0; v < 4; ++v) ((mask >> v) & 1 ? neg : pos).push_back(v);
            for (int option = 0; option < 2; ++option) {
                CaseTriangles& out = entries[mask][option];
                std::vector<std::array<std::array<int, 2>, 3>> tris;
                if (neg.size() == 1 || neg.size() == 3) {
                    const bool lone_negative = neg.size() == 1;
                    const int i = lone_negative ? neg[0] : pos[0];
                    const auto& others = lone_negative ? pos : neg;
                    tris.push_back({{{i, others[0]}, {i, others[1]}, {i, others[2]}}});
                } else if (neg.size() == 2) {
                    const int i = neg[0], j = neg[1], k = pos[0], l = pos[1];
                    const std::array<int, 2> ik{i, k}, il{i, l}, jl{j, l}, jk{j, k};
                    if (option == 0) {
                        tris.push_back({ik, il, jl});
                        tris.push_back({ik, jl, jk});
                    } else {
                        tris.push_back({ik, il, jk});
                        tris.push_back({il, jl, jk});
                    }
                }
                Vec3 neg_c = Vec3::Zero(), pos_c = Vec3::Zero();
                for (int v : neg) neg_c += ref[v] / static_cast<double>(neg.size());
                for (int v : pos) pos_c += ref[v] / static_cast<double>(pos.size());
                for (auto& t : tris) {
                    auto mid = [&](const std::array<int, 2>& e) { return Vec3(0.5 * (ref[e[0]] + ref[e[1]])); };
                    const Vec3 n = (mid(t[1]) - mid(t[0])).cross(mid(t[2]) - mid(t[0]));
                    if (n.dot(pos_c - neg_c) < 0.0) std::swap(t[1], t[2]);
                }
                out.count = static_cast<int>(tris.size());
                for (int t = 0; t < out.count; ++t) out.tris[t] = tris[t];
            }
        }
    }
};

inline const CaseTable& case_table()
{
    static const CaseTable table;
    return table;
}

/// Quad diagonal: take the lowest global vertex index m, pair it with the
/// lowest-index vertex of opposite sign, and keep the diagonal through that
/// edge's crossing. Option 0 holds crossings (i,k) and (j,l).
inline int diagonal_option(const Tet& t, int mask)
{
    int neg[2], pos[2], nn = 0, np = 0;
    for (int v = 0; v < 4; ++v) ((mask >> v) & 1 ? neg[nn++] : pos[np++]) = v;
    int m = 0;
    for (int v = 1; v < 4; ++v)
        if (t[v] < t[m]) m = v;
    const bool m_negative = (mask >> m) & 1;
    int n_local, p_local;
    if (m_negative) {
        n_local = m;
        p_local = t[pos[0]] < t[pos[1]] ? pos[0] : pos[1];
    } else {
        p_local = m;
        n_local = t[neg[0]] < t[neg[1]] ? neg[0] : neg[1];
    }
    const bool in_option0 = (n_local == neg[0] && p_local == pos[0]) || (n_local == neg[1] && p_local == pos[1]);
    return in_option0 ? 0 : 1;
}

}  // namespace detail

/// Zero crossing of Eq. (a + da) s_b - (b + db) s_a over s_b - s_a.
inline Vec3 edge_crossing(const Vec3& pa, double sa, const Vec3& pb, double sb)
{
    return (pa * sb - pb * sa) / detail::clamped_denominator(sa, sb);
}

/// Marching tetrahedra with displaced vertices. Shared grid edges map to a
/// single mesh vertex; vertices are numbered in first-encounter order over
/// tets so the output is deterministic.
inline TriMesh extract_surface(const TetGrid& grid)
{
    for (double s : grid.sdf)
        if (!std::isfinite(s)) throw std::invalid_argument("extract_surface: non-finite signed distance");

    const auto& table = detail::case_table();
    TriMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_to_vertex;
    edge_to_vertex.reserve(1024);

    auto vertex_for = [&](int ga, int gb) {
        if (ga > gb) std::swap(ga, gb);
        const std::uint64_t key = (static_cast<std::uint64_t>(ga) << 32) | static_cast<std::uint32_t>(gb);
        auto [it, inserted] = edge_to_vertex.try_emplace(key, static_cast<int>(mesh.vertices.size()));
        if (inserted) {
            const double sa = detail::signed_value(grid.sdf[ga]);
            const double sb = detail::signed_value(grid.sdf[gb]);
            mesh.vertices.push_back(edge_crossing(grid.displaced(ga), sa, grid.displaced(gb), sb));
            mesh.provenance.push_back({ga, gb});
        }
        return it->second;
    };

    for (const Tet& t : grid.tets) {
        int mask = 0;
        for (int v = 0; v < 4; ++v)
            if (detail::signed_value(grid.sdf[t[v]]) < 0.0) mask |= 1 << v;
        if (mask == 0 || mask == 15) continue;
        const int option = (mask == 3 || mask == 5 || mask == 6 || mask == 9 || mask == 10 || mask == 12)
                               ? detail::diagonal_option(t, mask)
                               : 0;
        const auto& entry = table.entries[mask][option];
        for (int k = 0; k < entry.count; ++k) {
            Face f;
            for (int c = 0; c < 3; ++c) f[c] = vertex_for(t[entry.tris[k][c][0]], t[entry.tris[k][c][1]]);
            const Vec3& a = mesh.vertices[f[0]];
            if ((mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).isZero(0.0)) continue;
            mesh.faces.push_back(f);
        }
    }
    update_normals(mesh);
    return mesh;
}

/// Chain rule of the edge crossing onto (sdf, displacement), topology held fixed.
inline GridGradients surface_gradients(const TetGrid& grid, const TriMesh& mesh, std::span<const Vec3> vertex_grads)
{
    if (vertex_grads.size() != mesh.vertices.size())
        throw std::invalid_argument("surface_gradients: gradient count does not match mesh vertices");
    GridGradients out(grid.num_vertices());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& g = vertex_grads[i];
        if (g.isZero(0.0)) continue;
        const auto [a, b] = mesh.provenance[i];
        const double sa = detail::signed_value(grid.sdf[a]);
        const double sb = detail::signed_value(grid.sdf[b]);
        const double denom = detail::clamped_denominator(sa, sb);
        const Vec3 pa = grid.displaced(a);
        const Vec3 pb = grid.displaced(b);
        const Vec3 v = (pa * sb - pb * sa) / denom;
        out.displacement[a] += g * (sb / denom);
        out.displacement[b] += g * (-sa / denom);
        out.sdf[a] += g.dot((v - pb) / denom);
        out.sdf[b] += g.dot((pa - v) / denom);
    }
    return out;
}

}  // namespace dtet
