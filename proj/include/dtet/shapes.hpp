#pragma once

#include "dtet/mesh.hpp"

#include <map>
#include <utility>

namespace dtet {

/// Closed icosphere, outward-oriented. Level 0 is the icosahedron (12 vertices).
inline TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero())
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (Vec3& p : v) p.normalize();
    std::vector<Face> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const int idx = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& tri : f) {
            const int a = mid(tri[0], tri[1]);
            const int b = mid(tri[1], tri[2]);
            const int c = mid(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    TriMesh mesh;
    mesh.vertices.reserve(v.size());
    for (const Vec3& p : v) mesh.vertices.push_back(center + radius * p);
    mesh.faces = std::move(f);
    update_normals(mesh);
    return mesh;
}

/// Closed cylinder along x from x0 to x1: `rings` rings of `segments` vertices
/// plus a fan-capped center vertex at each end.
inline TriMesh make_capped_cylinder(double x0, double x1, double radius, int rings, int segments)
{
    TriMesh mesh;
    for (int r = 0; r < rings; ++r) {
        const double x = x0 + (x1 - x0) * r / (rings - 1);
        for (int s = 0; s < segments; ++s) {
            const double a = 2.0 * kPi * s / segments;
            mesh.vertices.emplace_back(x, radius * std::cos(a), radius * std::sin(a));
        }
    }
    const int cap0 = static_cast<int>(mesh.vertices.size());
    mesh.vertices.emplace_back(x0, 0.0, 0.0);
    const int cap1 = cap0 + 1;
    mesh.vertices.emplace_back(x1, 0.0, 0.0);
    auto at = [segments](int r, int s) { return r * segments + (s % segments); };
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            // Outward normal: ring angle increases counterclockwise around +x.
            mesh.faces.push_back({at(r, s), at(r, s + 1), at(r + 1, s + 1)});
            mesh.faces.push_back({at(r, s), at(r + 1, s + 1), at(r + 1, s)});
        }
    }
    for (int s = 0; s < segments; ++s) {
        mesh.faces.push_back({cap0, at(0, s + 1), at(0, s)});
        mesh.faces.push_back({cap1, at(rings - 1, s), at(rings - 1, s + 1)});
    }
    update_normals(mesh);
    return mesh;
}

}  // namespace dtet
