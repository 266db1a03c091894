#pragma once

// Deterministic procedural rigs standing in for body/hand parametric models.

#include "dtet/rig.hpp"
#include "dtet/shapes.hpp"
#include "dtet/surface.hpp"

#include <string>
#include <string_view>

namespace dtet {

enum class TemplateKind { Sphere1, Cylinder2, Biped5, Hand6 };

inline std::string to_string(TemplateKind k)
{
    switch (k) {
    case TemplateKind::Sphere1: return "sphere-1-bone";
    case TemplateKind::Cylinder2: return "cylinder-2-bone";
    case TemplateKind::Biped5: return "biped-5-bone";
    case TemplateKind::Hand6: return "hand-6-bone";
    }
    return "unknown";
}

inline TemplateKind template_kind_from_string(std::string_view s)
{
    for (TemplateKind k : {TemplateKind::Sphere1, TemplateKind::Cylinder2, TemplateKind::Biped5, TemplateKind::Hand6})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown template kind '" + std::string(s) + "'");
}

struct TemplateOptions {
    double sphere_radius = 0.3;
    int mesh_resolution = 48;  // lattice used to mesh capsule-union templates
};

/// Skeleton layout and capsule geometry of the articulated templates.
struct ProceduralSkeleton {
    std::vector<Vec3> joints;
    std::vector<int> parents;
    std::vector<std::string> names;
    std::vector<Capsule> bones;  // influence segment per joint
    AnalyticShape shape;
};

namespace detail {

inline double smoothstep(double e0, double e1, double x)
{
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

inline double segment_distance(const Vec3& p, const Capsule& c)
{
    const Vec3 ab = c.b - c.a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (c.a + t * ab)).norm();
}

/// Inverse-distance weights to bone segments, sharpened so each bone owns its
/// limb and blends smoothly near joints.
inline Eigen::MatrixXd segment_weights(std::span<const Vec3> vertices, std::span<const Capsule> bones)
{
    Eigen::MatrixXd w(static_cast<Eigen::Index>(vertices.size()), static_cast<Eigen::Index>(bones.size()));
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        double sum = 0.0;
        for (std::size_t b = 0; b < bones.size(); ++b) {
            const double d = std::max(0.0, segment_distance(vertices[i], bones[b]) - bones[b].radius);
            const double v = 1.0 / std::pow(d + 0.03, 6);
            w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = v;
            sum += v;
        }
        w.row(static_cast<Eigen::Index>(i)) /= sum;
    }
    return w;
}

/// Localized outward bulge around `center`.
inline Eigen::MatrixX3d bulge(std::span<const Vec3> vertices, std::span<const Vec3> normals, const Vec3& center,
                               double amplitude, double width)
{
    Eigen::MatrixX3d e(static_cast<Eigen::Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const double g = amplitude * std::exp(-(vertices[i] - center).squaredNorm() / (width * width));
        e.row(static_cast<Eigen::Index>(i)) = (g * normals[i]).transpose();
    }
    return e;
}

inline TriMesh mesh_shape(const AnalyticShape& shape, int resolution)
{
    TetGrid g = build_tet_grid(resolution, 1.0);
    analytic_sdf(g, shape);
    TriMesh m = extract_surface(g);
    m.provenance.clear();
    return m;
}

}  // namespace detail

inline ProceduralSkeleton biped_skeleton()
{
    ProceduralSkeleton s;
    s.joints = {{0, -0.15, 0}, {0, 0.05, 0}, {0, 0.45, 0}, {0.13, -0.2, 0}, {-0.13, -0.2, 0}};
    s.parents = {-1, 0, 1, 0, 0};
    s.names = {"pelvis", "spine", "head", "left_leg", "right_leg"};
    s.bones = {
        Capsule{{0, -0.18, 0}, {0, 0.05, 0}, 0.17},
        Capsule{{0, 0.05, 0}, {0, 0.4, 0}, 0.17},
        Capsule{{0, 0.5, 0}, {0, 0.66, 0}, 0.14},
        Capsule{{0.13, -0.25, 0}, {0.15, -0.8, 0}, 0.085},
        Capsule{{-0.13, -0.25, 0}, {-0.15, -0.8, 0}, 0.085},
    };
    s.shape = AnalyticShape{
        Capsule{{0, -0.15, 0}, {0, 0.3, 0}, 0.17},
        Sphere{{0, 0.6, 0}, 0.14},
        Capsule{{0, 0.3, 0}, {0, 0.5, 0}, 0.07},
        Capsule{{0.12, -0.22, 0}, {0.15, -0.8, 0}, 0.085},
        Capsule{{-0.12, -0.22, 0}, {-0.15, -0.8, 0}, 0.085},
    };
    return s;
}

inline ProceduralSkeleton hand_skeleton()
{
    ProceduralSkeleton s;
    s.joints = {{0, -0.6, 0}, {-0.27, 0.08, 0}, {-0.09, 0.1, 0}, {0.09, 0.1, 0}, {0.27, 0.08, 0}, {0.3, -0.3, 0}};
    s.parents = {-1, 0, 0, 0, 0, 0};
    s.names = {"palm", "little", "ring", "middle", "index", "thumb"};
    const std::array<double, 4> tips = {0.55, 0.72, 0.8, 0.7};
    s.bones.push_back(Capsule{{0, -0.55, 0}, {0, 0.0, 0}, 0.2});
    for (int f = 0; f < 4; ++f) {
        const double x = -0.27 + 0.18 * f;
        s.bones.push_back(Capsule{{x, 0.1, 0}, {x, tips[f], 0}, 0.065});
    }
    s.bones.push_back(Capsule{{0.32, -0.28, 0}, {0.6, 0.0, 0}, 0.075});
    s.shape.parts = {
        Capsule{{-0.16, -0.55, 0}, {-0.16, 0.02, 0}, 0.11},
        Capsule{{0.0, -0.58, 0}, {0.0, 0.04, 0}, 0.11},
        Capsule{{0.16, -0.55, 0}, {0.16, 0.02, 0}, 0.11},
    };
    for (int f = 0; f < 4; ++f) {
        const double x = -0.27 + 0.18 * f;
        s.shape.parts.push_back(Capsule{{x, 0.0, 0}, {x, tips[f], 0}, 0.065});
    }
    s.shape.parts.push_back(Capsule{{0.18, -0.35, 0}, {0.6, 0.0, 0}, 0.075});
    return s;
}

inline RiggedTemplate make_procedural_template(TemplateKind kind, const TemplateOptions& opt = {})
{
    RiggedTemplate t;
    switch (kind) {
    case TemplateKind::Sphere1: {
        const TriMesh m = make_icosphere(opt.sphere_radius, 3);
        t.vertices = m.vertices;
        t.faces = m.faces;
        t.weights = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(m.vertices.size()), 1);
        t.joints = {Vec3::Zero()};
        t.parents = {-1};
        t.names = {"root"};
        t.blendshapes.push_back(detail::bulge(m.vertices, m.normals, Vec3(0, opt.sphere_radius, 0), 0.1 * opt.sphere_radius, opt.sphere_radius));
        break;
    }
    case TemplateKind::Cylinder2: {
        const double x0 = -0.6, x1 = 0.6, r = 0.2;
        const TriMesh m = make_capped_cylinder(x0, x1, r, 25, 24);
        t.vertices = m.vertices;
        t.faces = m.faces;
        t.joints = {Vec3(x0, 0, 0), Vec3(0, 0, 0)};
        t.parents = {-1, 0};
        t.names = {"root", "bend"};
        t.weights.resize(static_cast<Eigen::Index>(m.vertices.size()), 2);
        for (std::size_t i = 0; i < m.vertices.size(); ++i) {
            const double w1 = detail::smoothstep(-0.2, 0.2, m.vertices[i].x());
            t.weights(static_cast<Eigen::Index>(i), 0) = 1.0 - w1;
            t.weights(static_cast<Eigen::Index>(i), 1) = w1;
        }
        // Radial bulge around the joint.
        Eigen::MatrixX3d e(static_cast<Eigen::Index>(m.vertices.size()), 3);
        for (std::size_t i = 0; i < m.vertices.size(); ++i) {
            const Vec3& p = m.vertices[i];
            const Vec3 radial(0.0, p.y(), p.z());
            const double amp = 0.05 * std::exp(-p.x() * p.x() / 0.02);
            e.row(static_cast<Eigen::Index>(i)) = (radial.norm() > 0 ? Vec3(amp * radial / r) : Vec3::Zero()).transpose();
        }
        t.blendshapes.push_back(e);
        break;
    }
    case TemplateKind::Biped5:
    case TemplateKind::Hand6: {
        const ProceduralSkeleton s = kind == TemplateKind::Biped5 ? biped_skeleton() : hand_skeleton();
        const TriMesh m = detail::mesh_shape(s.shape, opt.mesh_resolution);
        t.vertices = m.vertices;
        t.faces = m.faces;
        t.joints = s.joints;
        t.parents = s.parents;
        t.names = s.names;
        t.weights = detail::segment_weights(m.vertices, s.bones);
        const Vec3 center = kind == TemplateKind::Biped5 ? Vec3(0, 0.05, 0.17) : Vec3(0, -0.3, 0.11);
        t.blendshapes.push_back(detail::bulge(m.vertices, m.normals, center, 0.05, 0.15));
        break;
    }
    }
    t.validate();
    return t;
}

/// Grid SDF initialization from the template's canonical mesh.
inline void init_sdf_from_template(TetGrid& grid, const RiggedTemplate& t)
{
    init_sdf_from_mesh(grid, t.vertices, t.faces);
}

}  // namespace dtet
