#pragma once

// Z-buffered software rasterizer producing per-pixel geometry buffers, a
// soft silhouette for mask gradients, and the frozen-coverage backward pass.

#include "dtet/camera.hpp"
#include "dtet/image.hpp"
#include "dtet/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace dtet {

inline constexpr double kBackgroundDepth = 1e6;
inline constexpr double kNearPlane = 1e-3;

/// Soft coverage: 1 on covered pixels; elsewhere D(d) with d the screen
/// distance to the nearest triangle (the distance to the covered region).
/// D is the Gaussian exp(-d^2 / tau) shifted and rescaled to run from 1 to 0
/// across `radius`, then squared so coverage and its gradient stay continuous
/// at the radius.
struct SilhouetteOptions {
    double radius = 2.0;
    double tau = 1.5 * 1.5;
    bool enabled = true;

    double falloff(double d) const
    {
        const double u = ramp(d);
        return u * u;
    }
    /// d falloff / d d
    double falloff_derivative(double d) const
    {
        const double floor = std::exp(-radius * radius / tau);
        return 2.0 * ramp(d) * (-2.0 * d / tau * std::exp(-d * d / tau) / (1.0 - floor));
    }

private:
    double ramp(double d) const
    {
        const double floor = std::exp(-radius * radius / tau);
        return (std::exp(-d * d / tau) - floor) / (1.0 - floor);
    }
};

struct RenderBuffers {
    int width = 0;
    int height = 0;
    Image mask;            // hard coverage in {0, 1}
    Image soft_mask;       // soft silhouette in [0, 1]
    Image depth;           // camera-space z, kBackgroundDepth where uncovered
    Image normal;          // camera-space unit normals, zero where uncovered
    Image surface_points;  // canonical-space surface points, zero where uncovered
    Image bary;            // perspective-correct barycentrics of the visible face
    std::vector<int> face_id;  // -1 where uncovered
    Image silhouette_distance;        // uncovered pixels: screen distance to the nearest triangle
    std::vector<int> silhouette_face;  // that triangle, -1 beyond the radius

    bool covered(std::size_t pixel) const { return face_id[pixel] >= 0; }
};

/// Upstream gradients on the geometry buffers. Empty images are skipped.
struct BufferGrads {
    Image depth;
    Image normal;
    Image surface_points;
    Image soft_mask;
};

struct RasterGrads {
    std::vector<Vec3> posed;      // dL/d posed vertex positions (world)
    std::vector<Vec3> canonical;  // dL/d canonical vertex positions
};

namespace detail {

inline double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p)
{
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

struct ScreenTri {
    std::array<Vec3, 3> cam;
    std::array<Vec2, 3> screen;
    double area = 0.0;
    bool valid = false;
};

inline ScreenTri screen_triangle(std::span<const Vec3> cam_vertices, const Camera& camera, const Face& f)
{
    ScreenTri t;
    for (int k = 0; k < 3; ++k) {
        t.cam[k] = cam_vertices[f[k]];
        if (t.cam[k].z() <= kNearPlane) return t;
        t.screen[k] = camera.project(t.cam[k]);
    }
    t.area = edge_fn(t.screen[0], t.screen[1], t.screen[2]);
    t.valid = true;
    return t;
}

/// Perspective-correct barycentrics and depth if the pixel-plane point lies in the triangle.
inline std::optional<std::pair<Vec3, double>> hit(const ScreenTri& t, const Vec2& p)
{
    if (!t.valid || t.area == 0.0) return std::nullopt;
    const double l0 = edge_fn(t.screen[1], t.screen[2], p) / t.area;
    const double l1 = edge_fn(t.screen[2], t.screen[0], p) / t.area;
    const double l2 = edge_fn(t.screen[0], t.screen[1], p) / t.area;
    if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) return std::nullopt;
    const Vec3 w(l0 / t.cam[0].z(), l1 / t.cam[1].z(), l2 / t.cam[2].z());
    const double z = 1.0 / w.sum();
    return std::make_pair(Vec3(w * z), z);
}

struct SegmentDistance {
    double d;
    Vec2 grad_a;
    Vec2 grad_b;
};

inline SegmentDistance segment_distance_2d(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + s * ab;
    const double d = (p - q).norm();
    SegmentDistance out{d, Vec2::Zero(), Vec2::Zero()};
    if (d > 0.0) {
        const Vec2 n = (p - q) / d;
        out.grad_a = -(1.0 - s) * n;
        out.grad_b = -s * n;
    }
    return out;
}

struct TriangleDistance {
    double d;
    int edge;  // edge k runs from corner k to corner k+1
    SegmentDistance seg;
};

inline TriangleDistance triangle_distance_2d(const ScreenTri& t, const Vec2& p)
{
    TriangleDistance best{std::numeric_limits<double>::infinity(), -1, {}};
    for (int k = 0; k < 3; ++k) {
        const SegmentDistance s = segment_distance_2d(p, t.screen[k], t.screen[(k + 1) % 3]);
        if (s.d < best.d) best = {s.d, k, s};
    }
    return best;
}

/// d(screen)/d(camera-space point) as a 2x3 matrix.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& p)
{
    const double f = cam.focal();
    const double iz = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> j;
    j << f * iz, 0.0, -f * p.x() * iz * iz,
         0.0, f * iz, -f * p.y() * iz * iz;
    return j;
}

inline std::vector<Vec3> to_camera_space(std::span<const Vec3> vertices, const Camera& camera)
{
    std::vector<Vec3> out(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) out[i] = camera.to_camera(vertices[i]);
    return out;
}

template <typename F>
void for_each_pixel_in_box(const ScreenTri& t, double pad, int width, int height, F&& f)
{
    const double xmin = std::min({t.screen[0].x(), t.screen[1].x(), t.screen[2].x()}) - pad;
    const double xmax = std::max({t.screen[0].x(), t.screen[1].x(), t.screen[2].x()}) + pad;
    const double ymin = std::min({t.screen[0].y(), t.screen[1].y(), t.screen[2].y()}) - pad;
    const double ymax = std::max({t.screen[0].y(), t.screen[1].y(), t.screen[2].y()}) + pad;
    const int x0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(xmax - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(ymax - 0.5)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) f(x, y, Vec2(x + 0.5, y + 0.5));
}

}  // namespace detail

namespace detail {

inline RenderBuffers empty_buffers(int W, int H)
{
    RenderBuffers rb;
    rb.width = W;
    rb.height = H;
    rb.mask = Image(W, H, 1, 0.0);
    rb.soft_mask = Image(W, H, 1, 0.0);
    rb.depth = Image(W, H, 1, kBackgroundDepth);
    rb.normal = Image(W, H, 3, 0.0);
    rb.surface_points = Image(W, H, 3, 0.0);
    rb.bary = Image(W, H, 3, 0.0);
    rb.face_id.assign(static_cast<std::size_t>(W) * H, -1);
    rb.silhouette_distance = Image(W, H, 1, std::numeric_limits<double>::infinity());
    rb.silhouette_face.assign(static_cast<std::size_t>(W) * H, -1);
    return rb;
}

inline void check_topology(const TriMesh& posed, const TriMesh& canonical)
{
    if (posed.vertices.size() != canonical.vertices.size() || posed.faces.size() != canonical.faces.size())
        throw std::invalid_argument("rasterize: posed and canonical meshes differ in topology");
    if (posed.normals.size() != posed.vertices.size())
        throw std::invalid_argument("rasterize: posed mesh is missing vertex normals");
}

/// Fills every buffer except the silhouette from rb.face_id, re-deriving
/// barycentrics and depth by intersecting each pixel ray with its face's plane.
inline void shade_covered(RenderBuffers& rb, std::span<const Vec3> cam_vertices, const TriMesh& posed,
                          const TriMesh& canonical, const Camera& camera)
{
    for (std::size_t pix = 0; pix < rb.face_id.size(); ++pix) {
        const int fi = rb.face_id[pix];
        if (fi < 0) continue;
        const Face& f = posed.faces[fi];
        const ScreenTri t = screen_triangle(cam_vertices, camera, f);
        const Vec2 p(static_cast<double>(pix % rb.width) + 0.5, static_cast<double>(pix / rb.width) + 0.5);
        const double l0 = edge_fn(t.screen[1], t.screen[2], p) / t.area;
        const double l1 = edge_fn(t.screen[2], t.screen[0], p) / t.area;
        const double l2 = edge_fn(t.screen[0], t.screen[1], p) / t.area;
        const Vec3 w(l0 / t.cam[0].z(), l1 / t.cam[1].z(), l2 / t.cam[2].z());
        const double z = 1.0 / w.sum();
        const Vec3 b = w * z;
        const Vec3 n = camera.rotation * (b[0] * posed.normals[f[0]] + b[1] * posed.normals[f[1]] + b[2] * posed.normals[f[2]]);
        const double len = n.norm();
        const Vec3 nu = len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, -1.0);
        const Vec3 ps = b[0] * canonical.vertices[f[0]] + b[1] * canonical.vertices[f[1]] + b[2] * canonical.vertices[f[2]];
        for (int c = 0; c < 3; ++c) {
            rb.bary[pix * 3 + c] = b[c];
            rb.normal[pix * 3 + c] = nu[c];
            rb.surface_points[pix * 3 + c] = ps[c];
        }
        rb.depth[pix] = z;
        rb.mask[pix] = 1.0;
        rb.soft_mask[pix] = 1.0;
    }
}

inline void silhouette_pass(RenderBuffers& rb, std::span<const Vec3> cam_vertices, std::span<const Face> faces,
                            const Camera& camera, const SilhouetteOptions& silhouette)
{
    if (!silhouette.enabled) return;
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const ScreenTri t = screen_triangle(cam_vertices, camera, faces[fi]);
        if (!t.valid) continue;
        for_each_pixel_in_box(t, silhouette.radius, rb.width, rb.height, [&](int x, int y, const Vec2& p) {
            const std::size_t pix = static_cast<std::size_t>(y) * rb.width + x;
            if (rb.face_id[pix] >= 0) return;
            const double d = triangle_distance_2d(t, p).d;
            if (d >= silhouette.radius || !(d < rb.silhouette_distance[pix])) return;
            rb.silhouette_distance[pix] = d;
            rb.silhouette_face[pix] = static_cast<int>(fi);
        });
    }
    for (std::size_t pix = 0; pix < rb.face_id.size(); ++pix)
        if (rb.silhouette_face[pix] >= 0) rb.soft_mask[pix] = silhouette.falloff(rb.silhouette_distance[pix]);
}

}  // namespace detail

/// Rasterizes `posed` (world space) seen by `camera`. Surface points are the
/// same barycentric combination taken on `canonical`, which must share faces.
/// Triangles with a corner behind the near plane are dropped; back faces are kept.
/// Depth ties go to the lower face index.
inline RenderBuffers rasterize(const TriMesh& posed, const TriMesh& canonical, const Camera& camera,
                               const SilhouetteOptions& silhouette = {})
{
    detail::check_topology(posed, canonical);
    const int W = camera.width, H = camera.height;
    RenderBuffers rb = detail::empty_buffers(W, H);
    const std::vector<Vec3> cam_vertices = detail::to_camera_space(posed.vertices, camera);
    for (std::size_t fi = 0; fi < posed.faces.size(); ++fi) {
        const detail::ScreenTri t = detail::screen_triangle(cam_vertices, camera, posed.faces[fi]);
        if (!t.valid || t.area == 0.0) continue;
        detail::for_each_pixel_in_box(t, 0.0, W, H, [&](int x, int y, const Vec2& p) {
            const auto h = detail::hit(t, p);
            if (!h) return;
            const std::size_t pix = static_cast<std::size_t>(y) * W + x;
            const double z = h->second;
            const int current = rb.face_id[pix];
            if (current < 0 || z < rb.depth[pix]) {
                rb.face_id[pix] = static_cast<int>(fi);
                rb.depth[pix] = z;
            }
        });
    }
    detail::shade_covered(rb, cam_vertices, posed, canonical, camera);
    detail::silhouette_pass(rb, cam_vertices, posed.faces, camera, silhouette);
    return rb;
}

/// Re-evaluates the buffers with the visible face per pixel held fixed. The
/// backward pass differentiates exactly this function.
inline RenderBuffers rasterize_frozen(const TriMesh& posed, const TriMesh& canonical, const Camera& camera,
                                      std::span<const int> face_id, const SilhouetteOptions& silhouette = {})
{
    detail::check_topology(posed, canonical);
    RenderBuffers rb = detail::empty_buffers(camera.width, camera.height);
    if (face_id.size() != rb.face_id.size()) throw std::invalid_argument("rasterize_frozen: coverage size mismatch");
    rb.face_id.assign(face_id.begin(), face_id.end());
    const std::vector<Vec3> cam_vertices = detail::to_camera_space(posed.vertices, camera);
    detail::shade_covered(rb, cam_vertices, posed, canonical, camera);
    detail::silhouette_pass(rb, cam_vertices, posed.faces, camera, silhouette);
    return rb;
}

/// Vector-Jacobian product of the buffers with coverage frozen: gradients flow
/// through perspective-correct barycentrics, depth, interpolated normals, and
/// the soft silhouette distances.
inline RasterGrads rasterize_backward(const TriMesh& posed, const TriMesh& canonical, const Camera& camera,
                                      const RenderBuffers& rb, const BufferGrads& grads,
                                      const SilhouetteOptions& silhouette = {})
{
    const int W = rb.width;
    RasterGrads out;
    out.posed.assign(posed.vertices.size(), Vec3::Zero());
    out.canonical.assign(canonical.vertices.size(), Vec3::Zero());
    std::vector<Vec3> normal_grads(posed.vertices.size(), Vec3::Zero());
    std::vector<Vec3> cam_grads(posed.vertices.size(), Vec3::Zero());
    const std::vector<Vec3> cam_vertices = detail::to_camera_space(posed.vertices, camera);
    const bool has_depth = grads.depth.width > 0;
    const bool has_normal = grads.normal.width > 0;
    const bool has_points = grads.surface_points.width > 0;
    const bool has_soft = grads.soft_mask.width > 0 && silhouette.enabled;

    for (std::size_t pix = 0; pix < rb.face_id.size(); ++pix) {
        const int fi = rb.face_id[pix];
        if (fi < 0) continue;
        const Face& f = posed.faces[fi];
        const Vec3 b(rb.bary[pix * 3], rb.bary[pix * 3 + 1], rb.bary[pix * 3 + 2]);
        Vec3 gb = Vec3::Zero();
        double gz = has_depth ? grads.depth[pix] : 0.0;

        if (has_points) {
            const Vec3 gp(grads.surface_points[pix * 3], grads.surface_points[pix * 3 + 1], grads.surface_points[pix * 3 + 2]);
            for (int k = 0; k < 3; ++k) {
                out.canonical[f[k]] += b[k] * gp;
                gb[k] += canonical.vertices[f[k]].dot(gp);
            }
        }
        if (has_normal) {
            const Vec3 gn(grads.normal[pix * 3], grads.normal[pix * 3 + 1], grads.normal[pix * 3 + 2]);
            const Vec3 raw = camera.rotation * (b[0] * posed.normals[f[0]] + b[1] * posed.normals[f[1]] + b[2] * posed.normals[f[2]]);
            const double len = raw.norm();
            if (len > 0.0) {
                const Vec3 nu = raw / len;
                const Vec3 graw = (gn - nu * nu.dot(gn)) / len;
                const Vec3 gworld = camera.rotation.transpose() * graw;
                for (int k = 0; k < 3; ++k) {
                    gb[k] += posed.normals[f[k]].dot(gworld);
                    normal_grads[f[k]] += b[k] * gworld;
                }
            }
        }
        if (gb.isZero(0.0) && gz == 0.0) continue;

        // Unknowns (b0, b1, t) solve b0 (V0 - V2) + b1 (V1 - V2) - t d = -V2 with d the pixel ray.
        const int x = static_cast<int>(pix % W);
        const int y = static_cast<int>(pix / W);
        const Vec3 d = camera.ray(x + 0.5, y + 0.5);
        const Vec3& V0 = cam_vertices[f[0]];
        const Vec3& V1 = cam_vertices[f[1]];
        const Vec3& V2 = cam_vertices[f[2]];
        Mat3 M;
        M.col(0) = V0 - V2;
        M.col(1) = V1 - V2;
        M.col(2) = -d;
        const Vec3 g(gb[0] - gb[2], gb[1] - gb[2], gz);
        const Vec3 lambda = M.transpose().partialPivLu().solve(g);
        for (int k = 0; k < 3; ++k) cam_grads[f[k]] -= b[k] * lambda;
    }

    if (has_soft) {
        // Nearest triangle held fixed, as coverage is for the shading terms.
        for (std::size_t pix = 0; pix < rb.face_id.size(); ++pix) {
            const int fi = rb.silhouette_face[pix];
            const double gs = grads.soft_mask[pix];
            if (fi < 0 || gs == 0.0) continue;
            const Face& f = posed.faces[fi];
            const detail::ScreenTri t = detail::screen_triangle(cam_vertices, camera, f);
            const Vec2 p(static_cast<double>(pix % W) + 0.5, static_cast<double>(pix / W) + 0.5);
            const detail::TriangleDistance td = detail::triangle_distance_2d(t, p);
            const double scale = gs * silhouette.falloff_derivative(td.d);
            const int ka = td.edge;
            const int kb = (td.edge + 1) % 3;
            cam_grads[f[ka]] += detail::projection_jacobian(camera, t.cam[ka]).transpose() * (scale * td.seg.grad_a);
            cam_grads[f[kb]] += detail::projection_jacobian(camera, t.cam[kb]).transpose() * (scale * td.seg.grad_b);
        }
    }

    for (std::size_t i = 0; i < posed.vertices.size(); ++i) out.posed[i] += camera.rotation.transpose() * cam_grads[i];
    if (has_normal) vertex_normals_backward(posed.vertices, posed.faces, normal_grads, out.posed);
    return out;
}

}  // namespace dtet
