#pragma once

// The drivable representation and its render path: extract -> bind -> deform
// -> rasterize -> texture, plus the reverse sweep back to grid and texture
// parameters.

#include "dtet/raster.hpp"
#include "dtet/rig.hpp"
#include "dtet/surface.hpp"
#include "dtet/tetgrid.hpp"
#include "dtet/texture.hpp"

#include <functional>
#include <string>

namespace dtet {

struct Representation {
    TetGrid grid;
    TextureField texture;
    RiggedTemplate rig;
};

/// Canonical surface and its skinning binding; valid while the grid topology is fixed.
struct PreparedSurface {
    TriMesh canonical;
    SkinningBinding binding;
};

inline PreparedSurface prepare_surface(const TetGrid& grid, const RiggedTemplate& rig)
{
    PreparedSurface s;
    s.canonical = extract_surface(grid);
    s.binding = dtet::bind(s.canonical, rig);
    return s;
}

inline PreparedSurface prepare_surface(const Representation& rep) { return prepare_surface(rep.grid, rep.rig); }

struct RenderOptions {
    Vec3 background = Vec3::Ones();
    SilhouetteOptions silhouette;
    std::span<const int> frozen_coverage;  // if set, reuse this per-pixel face assignment
};

/// Everything one view's forward pass produces, kept for the backward pass.
struct ViewRender {
    Camera camera;
    TriMesh posed;
    RenderBuffers buffers;
    Image color;                               // composited over the background by the hard mask
    std::vector<std::size_t> covered;          // covered pixel indices, in order
    TextureField::Cache texture_cache;         // texture batch over `covered`
    std::vector<Mat3> jacobians;               // d posed / d canonical per vertex
};

using ColorFunction = std::function<Vec3(const Vec3& canonical_point)>;

namespace detail {

inline ViewRender render_geometry(const TriMesh& canonical, const SkinningBinding& binding, const RiggedTemplate& rig,
                                  const PoseParams& pose, const Camera& camera, const RenderOptions& opt)
{
    camera.validate();
    ViewRender v;
    v.camera = camera;
    v.posed = deform(canonical, binding, rig, pose);
    v.buffers = opt.frozen_coverage.empty() ? rasterize(v.posed, canonical, camera, opt.silhouette)
                                            : rasterize_frozen(v.posed, canonical, camera, opt.frozen_coverage, opt.silhouette);
    for (std::size_t p = 0; p < v.buffers.face_id.size(); ++p)
        if (v.buffers.covered(p)) v.covered.push_back(p);
    v.color = Image(camera.width, camera.height, 3);
    for (std::size_t p = 0; p < v.buffers.face_id.size(); ++p)
        for (int c = 0; c < 3; ++c) v.color[p * 3 + c] = opt.background[c];
    return v;
}

inline Eigen::Matrix3Xd covered_points(const ViewRender& v)
{
    Eigen::Matrix3Xd pts(3, static_cast<Eigen::Index>(v.covered.size()));
    for (std::size_t i = 0; i < v.covered.size(); ++i)
        for (int c = 0; c < 3; ++c) pts(c, static_cast<Eigen::Index>(i)) = v.buffers.surface_points[v.covered[i] * 3 + c];
    return pts;
}

}  // namespace detail

/// Full forward pass of one view with the neural texture.
inline ViewRender render_view(const Representation& rep, const PreparedSurface& surf, const PoseParams& pose,
                              const Camera& camera, const RenderOptions& opt = {})
{
    ViewRender v = detail::render_geometry(surf.canonical, surf.binding, rep.rig, pose, camera, opt);
    v.jacobians = deform_gradients(surf.binding, rep.rig, pose);
    if (v.covered.empty()) return v;
    const Eigen::Matrix3Xd rgb = rep.texture.evaluate(detail::covered_points(v), &v.texture_cache);
    for (std::size_t i = 0; i < v.covered.size(); ++i)
        for (int c = 0; c < 3; ++c) v.color[v.covered[i] * 3 + c] = rgb(c, static_cast<Eigen::Index>(i));
    return v;
}

/// Forward pass of an arbitrary canonical mesh colored by a function of the
/// canonical surface point (used for ground truth).
inline ViewRender render_mesh(const TriMesh& canonical, const SkinningBinding& binding, const RiggedTemplate& rig,
                              const PoseParams& pose, const Camera& camera, const ColorFunction& color,
                              const RenderOptions& opt = {})
{
    ViewRender v = detail::render_geometry(canonical, binding, rig, pose, camera, opt);
    for (std::size_t p : v.covered) {
        const Vec3 ps(v.buffers.surface_points[p * 3], v.buffers.surface_points[p * 3 + 1], v.buffers.surface_points[p * 3 + 2]);
        const Vec3 rgb = color(ps);
        for (int c = 0; c < 3; ++c) v.color[p * 3 + c] = rgb[c];
    }
    return v;
}

/// Color image of the representation.
inline Image render(const Representation& rep, const Camera& camera, const PoseParams& pose, const RenderOptions& opt = {})
{
    return render_view(rep, prepare_surface(rep), pose, camera, opt).color;
}

/// Upstream gradients on one view's outputs; empty images are skipped.
struct ViewGradients {
    Image color;
    Image depth;
    Image normal;
    Image soft_mask;
};

struct BackwardOptions {
    bool texture_to_geometry = false;  // let color gradients move the surface through P_s
    bool geometry = true;
    bool texture = true;
};

/// Reverse sweep of render_view: accumulates into grid and texture gradients.
inline void render_backward(const Representation& rep, const PreparedSurface& surf, const ViewRender& v,
                            const ViewGradients& g, GridGradients& grid_grads, std::span<double> texture_grads,
                            const BackwardOptions& opt = {}, const RenderOptions& ropt = {})
{
    BufferGrads bg;
    bg.depth = g.depth;
    bg.normal = g.normal;
    bg.soft_mask = g.soft_mask;
    if (g.color.width > 0 && !v.covered.empty() && (opt.texture || opt.texture_to_geometry)) {
        Eigen::Matrix3Xd gc(3, static_cast<Eigen::Index>(v.covered.size()));
        for (std::size_t i = 0; i < v.covered.size(); ++i)
            for (int c = 0; c < 3; ++c) gc(c, static_cast<Eigen::Index>(i)) = g.color[v.covered[i] * 3 + c];
        std::vector<double> scratch;
        std::span<double> tg = texture_grads;
        if (!opt.texture) {
            scratch.assign(texture_grads.size(), 0.0);
            tg = scratch;
        }
        Eigen::Matrix3Xd point_grads;
        rep.texture.backward(v.texture_cache, gc, tg, opt.texture_to_geometry ? &point_grads : nullptr);
        if (opt.texture_to_geometry) {
            bg.surface_points = Image(v.camera.width, v.camera.height, 3);
            for (std::size_t i = 0; i < v.covered.size(); ++i)
                for (int c = 0; c < 3; ++c) bg.surface_points[v.covered[i] * 3 + c] = point_grads(c, static_cast<Eigen::Index>(i));
        }
    }
    if (!opt.geometry) return;
    const RasterGrads rg = rasterize_backward(v.posed, surf.canonical, v.camera, v.buffers, bg, ropt.silhouette);
    std::vector<Vec3> canonical_grads = deform_backward(v.jacobians, rg.posed);
    for (std::size_t i = 0; i < canonical_grads.size(); ++i) canonical_grads[i] += rg.canonical[i];
    const GridGradients gg = surface_gradients(rep.grid, surf.canonical, canonical_grads);
    for (std::size_t i = 0; i < gg.sdf.size(); ++i) {
        grid_grads.sdf[i] += gg.sdf[i];
        grid_grads.displacement[i] += gg.displacement[i];
    }
}

// ---------------------------------------------------------------------------
// Region crops

/// Zoomed camera sharing `camera`'s pose whose 256x256 (by default) frame
/// holds the posed template vertices dominated by `joint`. The zoom factor is
/// an integer and the crop offset a whole number of zoomed pixels, so the
/// crop is exactly a window of the full view rendered at zoom x resolution.
inline Camera region_camera(const RiggedTemplate& rig, const PoseParams& pose, const Camera& camera,
                            const std::string& joint, int size = 256, double margin = 1.25)
{
    const int b = rig.joint_index(joint);
    SkinningBinding identity;
    identity.weights = rig.weights;
    identity.blendshapes = rig.blendshapes;
    identity.faces.assign(rig.vertices.size(), 0);
    identity.bary.assign(rig.vertices.size(), Vec3(1, 0, 0));
    const std::vector<Vec3> posed = deform_points(rig.vertices, identity, rig, pose);
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (Eigen::Index i = 0; i < rig.weights.rows(); ++i) {
        Eigen::Index best = 0;
        rig.weights.row(i).maxCoeff(&best);
        if (best != b) continue;
        const Vec3 pc = camera.to_camera(posed[static_cast<std::size_t>(i)]);
        if (pc.z() <= kNearPlane) continue;
        const Vec2 s = camera.project(pc);
        lo = lo.cwiseMin(s);
        hi = hi.cwiseMax(s);
    }
    if (!(lo.x() <= hi.x())) throw std::invalid_argument("region_camera: joint '" + joint + "' is not in view");
    const Vec2 centre = 0.5 * (lo + hi);
    const double extent = std::max({(hi - lo).maxCoeff() * margin, 1.0});
    const double zoom = std::max(1.0, std::floor(size / extent));
    Camera out = camera;
    out.width = size;
    out.height = size;
    out.fov_y = 2.0 * std::atan(0.5 * size / (zoom * camera.focal()));
    out.cx = zoom * camera.cx - std::round(zoom * centre.x() - 0.5 * size);
    out.cy = zoom * camera.cy - std::round(zoom * centre.y() - 0.5 * size);
    return out;
}

inline Image render_region(const Representation& rep, const Camera& camera, const PoseParams& pose, const std::string& joint,
                           int size = 256, const RenderOptions& opt = {})
{
    return render(rep, region_camera(rep.rig, pose, camera, joint, size), pose, opt);
}

}  // namespace dtet
