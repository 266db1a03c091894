#pragma once

// Tetrahedral lattice carrying the optimizable geometry: one signed distance
// and one clamped displacement per lattice vertex.

#include "dtet/bvh.hpp"
#include "dtet/math.hpp"
#include "dtet/mesh.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dtet {

using Tet = std::array<int, 4>;

struct TetGrid {
    std::vector<Vec3> vertices;
    std::vector<Tet> tets;
    std::vector<double> sdf;
    std::vector<Vec3> displacement;
    int resolution = 0;
    double half_extent = 1.0;

    std::size_t num_vertices() const { return vertices.size(); }
    double spacing() const { return 2.0 * half_extent / resolution; }
    double max_displacement() const { return 0.5 * spacing(); }

    Vec3 displaced(int i) const { return vertices[i] + displacement[i]; }

    void clamp_displacement()
    {
        const double limit = max_displacement();
        for (Vec3& d : displacement) d = d.cwiseMax(Vec3::Constant(-limit)).cwiseMin(Vec3::Constant(limit));
    }
};

inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

/// Lattice over [-h, h]^3 with (n+1)^3 vertices, each cube split into six
/// tets around its main diagonal (Freudenthal split, conforming across cubes).
/// Every tet is stored with positive signed volume.
inline TetGrid build_tet_grid(int resolution, double half_extent = 1.0)
{
    if (resolution < 1) throw std::invalid_argument("build_tet_grid: resolution must be >= 1");
    if (!(half_extent > 0.0)) throw std::invalid_argument("build_tet_grid: half extent must be positive");

    TetGrid grid;
    grid.resolution = resolution;
    grid.half_extent = half_extent;
    const int n1 = resolution + 1;
    const double step = 2.0 * half_extent / resolution;
    grid.vertices.reserve(static_cast<std::size_t>(n1) * n1 * n1);
    for (int k = 0; k < n1; ++k)
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < n1; ++i)
                grid.vertices.emplace_back(-half_extent + step * i, -half_extent + step * j, -half_extent + step * k);

    auto index = [n1](int i, int j, int k) { return i + n1 * (j + n1 * k); };
    static constexpr std::array<std::array<int, 3>, 6> kAxisOrders = {{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
    }};

    grid.tets.reserve(static_cast<std::size_t>(6) * resolution * resolution * resolution);
    for (int k = 0; k < resolution; ++k) {
        for (int j = 0; j < resolution; ++j) {
            for (int i = 0; i < resolution; ++i) {
                for (const auto& order : kAxisOrders) {
                    std::array<int, 3> c = {i, j, k};
                    Tet t;
                    t[0] = index(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[order[s]];
                        t[s + 1] = index(c[0], c[1], c[2]);
                    }
                    const double vol = tet_signed_volume(grid.vertices[t[0]], grid.vertices[t[1]],
                                                         grid.vertices[t[2]], grid.vertices[t[3]]);
                    if (vol < 0.0) std::swap(t[2], t[3]);
                    grid.tets.push_back(t);
                }
            }
        }
    }
    grid.sdf.assign(grid.vertices.size(), 0.0);
    grid.displacement.assign(grid.vertices.size(), Vec3::Zero());
    return grid;
}

// ---------------------------------------------------------------------------
// Analytic shapes

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 0.5;
};

struct Capsule {
    Vec3 a = Vec3::Zero();
    Vec3 b = Vec3::Zero();
    double radius = 0.1;
};

using Primitive = std::variant<Sphere, Capsule>;

/// Union of spheres and capsules.
struct AnalyticShape {
    std::vector<Primitive> parts;

    AnalyticShape() = default;
    AnalyticShape(std::initializer_list<Primitive> p) : parts(p) {}

    double operator()(const Vec3& p) const
    {
        double d = std::numeric_limits<double>::infinity();
        for (const Primitive& part : parts) d = std::min(d, std::visit([&](const auto& s) { return eval(s, p); }, part));
        return d;
    }

private:
    static double eval(const Sphere& s, const Vec3& p) { return (p - s.center).norm() - s.radius; }
    static double eval(const Capsule& c, const Vec3& p)
    {
        const Vec3 ab = c.b - c.a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        return (p - (c.a + t * ab)).norm() - c.radius;
    }
};

inline void analytic_sdf(TetGrid& grid, const AnalyticShape& shape)
{
    for (std::size_t i = 0; i < grid.vertices.size(); ++i) grid.sdf[i] = shape(grid.vertices[i]);
}

// ---------------------------------------------------------------------------
// Signed distance to a closed triangle mesh

namespace detail {

/// Fixed jittered +x direction so parity rays avoid passing exactly through edges.
inline Vec3 parity_ray_direction()
{
    std::mt19937_64 rng(0x5eedu);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    const double jy = jitter(rng) * 1e-7;
    const double jz = jitter(rng) * 1e-7;
    return Vec3(1.0, jy, jz).normalized();
}

}  // namespace detail

/// Crossing parity of a jittered +x ray against the given faces.
inline bool ray_parity_inside(const Vec3& p, std::span<const Vec3> vertices, std::span<const Face> faces,
                              std::span<const int> candidates)
{
    static const Vec3 dir = detail::parity_ray_direction();
    int crossings = 0;
    for (int fi : candidates) {
        const Face& f = faces[fi];
        const Vec3& a = vertices[f[0]];
        const Vec3& b = vertices[f[1]];
        const Vec3& c = vertices[f[2]];
        if (std::max({a.x(), b.x(), c.x()}) < p.x()) continue;
        if (ray_triangle(p, dir, a, b, c) > 0.0) ++crossings;
    }
    return (crossings & 1) != 0;
}

inline bool point_inside_mesh(const Vec3& p, std::span<const Vec3> vertices, std::span<const Face> faces)
{
    std::vector<int> all(faces.size());
    std::iota(all.begin(), all.end(), 0);
    return ray_parity_inside(p, vertices, faces, all);
}

/// Signed distance (negative inside) from every grid vertex to a closed mesh.
inline void init_sdf_from_mesh(TetGrid& grid, std::span<const Vec3> vertices, std::span<const Face> faces)
{
    if (!is_closed(faces)) throw std::invalid_argument("init_sdf_from_mesh: template mesh is not watertight");
    const TriangleBvh bvh(vertices, faces);
    const int n1 = grid.resolution + 1;
    // Faces whose yz extent (with a jitter margin) covers a lattice row.
    constexpr double margin = 1e-6;
    std::vector<int> row_faces;
    for (int k = 0; k < n1; ++k) {
        for (int j = 0; j < n1; ++j) {
            const Vec3& first = grid.vertices[n1 * (j + n1 * k)];
            row_faces.clear();
            for (std::size_t fi = 0; fi < faces.size(); ++fi) {
                const Face& f = faces[fi];
                const Vec3& a = vertices[f[0]];
                const Vec3& b = vertices[f[1]];
                const Vec3& c = vertices[f[2]];
                if (std::min({a.y(), b.y(), c.y()}) > first.y() + margin) continue;
                if (std::max({a.y(), b.y(), c.y()}) < first.y() - margin) continue;
                if (std::min({a.z(), b.z(), c.z()}) > first.z() + margin) continue;
                if (std::max({a.z(), b.z(), c.z()}) < first.z() - margin) continue;
                row_faces.push_back(static_cast<int>(fi));
            }
            for (int i = 0; i < n1; ++i) {
                const std::size_t vi = static_cast<std::size_t>(i) + n1 * (j + static_cast<std::size_t>(n1) * k);
                const Vec3& p = grid.vertices[vi];
                const double d = std::sqrt(bvh.nearest(p).distance_sq);
                grid.sdf[vi] = ray_parity_inside(p, vertices, faces, row_faces) ? -d : d;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Binary checkpoint: "TGRD", u32 version, u32 resolution, f64 half extent,
// f32 sdf[V], f32 displacement[3V]; all little-endian.

inline constexpr std::uint32_t kGridFormatVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value)
{
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in)
{
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("unexpected end of binary stream");
    return value;
}

}  // namespace detail

inline void write_grid(std::ostream& out, const TetGrid& grid)
{
    out.write("TGRD", 4);
    detail::write_le<std::uint32_t>(out, kGridFormatVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.resolution));
    detail::write_le<double>(out, grid.half_extent);
    for (double s : grid.sdf) detail::write_le<float>(out, static_cast<float>(s));
    for (const Vec3& d : grid.displacement)
        for (int c = 0; c < 3; ++c) detail::write_le<float>(out, static_cast<float>(d[c]));
}

inline TetGrid read_grid(std::istream& in)
{
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TGRD", 4) != 0) throw std::runtime_error("read_grid: bad magic");
    const auto version = detail::read_le<std::uint32_t>(in);
    if (version != kGridFormatVersion) throw std::runtime_error("read_grid: unsupported version " + std::to_string(version));
    const auto resolution = detail::read_le<std::uint32_t>(in);
    const auto half_extent = detail::read_le<double>(in);
    TetGrid grid = build_tet_grid(static_cast<int>(resolution), half_extent);
    for (double& s : grid.sdf) s = detail::read_le<float>(in);
    for (Vec3& d : grid.displacement)
        for (int c = 0; c < 3; ++c) d[c] = detail::read_le<float>(in);
    return grid;
}

}  // namespace dtet
