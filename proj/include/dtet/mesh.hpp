#pragma once

#include "dtet/math.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dtet {

/// Grid edge a mesh vertex was interpolated on. Empty (-1) for meshes that
/// did not come out of surface extraction.
struct EdgeCrossing {
    int a = -1;
    int b = -1;
};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec3> normals;
    std::vector<EdgeCrossing> provenance;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_faces() const { return faces.size(); }
    bool empty() const { return faces.empty(); }
};

/// Area-weighted vertex normals: normalize(sum of incident face cross products).
/// Isolated or fully degenerate vertices get +z.
inline std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices, std::span<const Face> faces)
{
    std::vector<Vec3> acc(vertices.size(), Vec3::Zero());
    for (const Face& f : faces) {
        const Vec3 c = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
        for (int k = 0; k < 3; ++k) acc[f[k]] += c;
    }
    for (Vec3& n : acc) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
    }
    return acc;
}

inline void update_normals(TriMesh& mesh)
{
    mesh.normals = compute_vertex_normals(mesh.vertices, mesh.faces);
}

/// Vector-Jacobian product of compute_vertex_normals: given dL/dn per vertex,
/// accumulates dL/dx into vertex_grads.
inline void vertex_normals_backward(std::span<const Vec3> vertices, std::span<const Face> faces,
                                    std::span<const Vec3> normal_grads, std::span<Vec3> vertex_grads)
{
    std::vector<Vec3> acc(vertices.size(), Vec3::Zero());
    for (const Face& f : faces) {
        const Vec3 c = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
        for (int k = 0; k < 3; ++k) acc[f[k]] += c;
    }
    // dL/d(acc) through the normalization.
    std::vector<Vec3> acc_grad(vertices.size(), Vec3::Zero());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const double len = acc[i].norm();
        if (len == 0.0) continue;
        const Vec3 n = acc[i] / len;
        acc_grad[i] = (normal_grads[i] - n * n.dot(normal_grads[i])) / len;
    }
    // c = (x1 - x0) x (x2 - x0); dc = dx1 x e2 + e1 x dx2 - dx0 x e2 - e1 x dx0.
    for (const Face& f : faces) {
        const Vec3 g = acc_grad[f[0]] + acc_grad[f[1]] + acc_grad[f[2]];
        if (g.isZero(0.0)) continue;
        const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
        const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
        // g . (dx1 x e2) = dx1 . (e2 x g); g . (e1 x dx2) = dx2 . (g x e1)
        const Vec3 g1 = e2.cross(g);
        const Vec3 g2 = g.cross(e1);
        vertex_grads[f[1]] += g1;
        vertex_grads[f[2]] += g2;
        vertex_grads[f[0]] -= g1 + g2;
    }
}

/// Undirected edge -> number of incident faces.
inline std::map<std::pair<int, int>, int> edge_face_counts(std::span<const Face> faces)
{
    std::map<std::pair<int, int>, int> counts;
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k];
            int b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++counts[{a, b}];
        }
    }
    return counts;
}

/// Every edge shared by exactly two faces.
inline bool is_closed(std::span<const Face> faces)
{
    if (faces.empty()) return false;
    for (const auto& [edge, count] : edge_face_counts(faces)) {
        if (count != 2) return false;
    }
    return true;
}

/// Every directed edge appears once and its reverse once (consistent orientation).
inline bool is_consistently_oriented(std::span<const Face> faces)
{
    std::map<std::pair<int, int>, int> directed;
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
    }
    for (const auto& [edge, count] : directed) {
        if (count != 1) return false;
        auto it = directed.find({edge.second, edge.first});
        if (it == directed.end() || it->second != 1) return false;
    }
    return true;
}

inline int count_components(std::size_t num_vertices, std::span<const Face> faces)
{
    std::vector<int> parent(num_vertices);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<char> used(num_vertices, 0);
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            used[f[k]] = 1;
            const int ra = find(f[k]);
            const int rb = find(f[(k + 1) % 3]);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    int components = 0;
    for (std::size_t i = 0; i < num_vertices; ++i) {
        if (used[i] && find(static_cast<int>(i)) == static_cast<int>(i)) ++components;
    }
    return components;
}

/// V - E + F over referenced vertices.
inline long euler_characteristic(std::size_t num_vertices, std::span<const Face> faces)
{
    std::vector<char> used(num_vertices, 0);
    for (const Face& f : faces)
        for (int v : f) used[v] = 1;
    const long v = std::count(used.begin(), used.end(), 1);
    const long e = static_cast<long>(edge_face_counts(faces).size());
    return v - e + static_cast<long>(faces.size());
}

/// Vertex adjacency lists (sorted, unique).
inline std::vector<std::vector<int>> vertex_neighbors(std::size_t num_vertices, std::span<const Face> faces)
{
    std::vector<std::vector<int>> adj(num_vertices);
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            adj[f[k]].push_back(f[(k + 1) % 3]);
            adj[f[k]].push_back(f[(k + 2) % 3]);
        }
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
}

inline double surface_area(const TriMesh& mesh)
{
    double a = 0.0;
    for (const Face& f : mesh.faces) a += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    return a;
}

}  // namespace dtet
