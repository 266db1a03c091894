#pragma once

// Rigged template, barycentric skinning transfer onto extracted meshes,
// forward kinematics, and linear blend skinning with expression offsets.

#include "dtet/bvh.hpp"
#include "dtet/mesh.hpp"

#include <Eigen/Dense>

#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtet {

/// Parametric template: mesh, per-vertex skinning weights and expression
/// blendshapes, joints, and a kinematic tree rooted at joint 0.
struct RiggedTemplate {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    Eigen::MatrixXd weights;                 // V x B, rows convex
    std::vector<Eigen::MatrixX3d> blendshapes;  // K entries, each V x 3
    std::vector<Vec3> joints;                // B
    std::vector<int> parents;                // B, parents[0] == -1
    std::vector<std::string> names;          // B

    int num_bones() const { return static_cast<int>(joints.size()); }
    int num_expressions() const { return static_cast<int>(blendshapes.size()); }

    int joint_index(const std::string& name) const
    {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown joint '" + name + "'");
    }

    /// Children lists in index order.
    std::vector<std::vector<int>> children() const
    {
        std::vector<std::vector<int>> c(joints.size());
        for (std::size_t b = 1; b < parents.size(); ++b) c[parents[b]].push_back(static_cast<int>(b));
        return c;
    }

    /// Joints ordered so that every parent precedes its children.
    std::vector<int> topological_order() const
    {
        std::vector<int> order;
        if (joints.empty()) return order;
        const auto kids = children();
        std::queue<int> q;
        q.push(0);
        while (!q.empty()) {
            const int b = q.front();
            q.pop();
            order.push_back(b);
            for (int c : kids[b]) q.push(c);
        }
        return order;
    }

    /// Number of joints along the longest root-to-leaf path.
    int tree_depth() const
    {
        std::vector<int> depth(joints.size(), 0);
        int best = 0;
        for (int b : topological_order()) {
            depth[b] = b == 0 ? 1 : depth[parents[b]] + 1;
            best = std::max(best, depth[b]);
        }
        return best;
    }

    /// Throws std::invalid_argument naming the first field that breaks an invariant.
    void validate() const
    {
        auto fail = [](const std::string& field, const std::string& why) {
            throw std::invalid_argument("rig field '" + field + "': " + why);
        };
        const auto nv = static_cast<Eigen::Index>(vertices.size());
        if (vertices.empty()) fail("vertices", "empty");
        for (const Vec3& v : vertices)
            if (!v.allFinite()) fail("vertices", "non-finite coordinate");
        if (faces.empty()) fail("faces", "empty");
        for (const Face& f : faces)
            for (int v : f)
                if (v < 0 || v >= nv) fail("faces", "index out of range");
        const auto nb = static_cast<Eigen::Index>(joints.size());
        if (nb == 0) fail("joints", "empty");
        if (weights.rows() != nv || weights.cols() != nb) fail("weights", "shape must be vertices x joints");
        for (Eigen::Index i = 0; i < nv; ++i) {
            if ((weights.row(i).array() < 0.0).any()) fail("weights", "negative entry in row " + std::to_string(i));
            if (std::abs(weights.row(i).sum() - 1.0) > 1e-6) fail("weights", "row " + std::to_string(i) + " does not sum to 1");
        }
        for (const auto& e : blendshapes)
            if (e.rows() != nv) fail("blendshapes", "every blendshape needs one offset per vertex");
        if (static_cast<Eigen::Index>(parents.size()) != nb) fail("parents", "length must match joints");
        if (static_cast<Eigen::Index>(names.size()) != nb) fail("names", "length must match joints");
        if (parents[0] != -1) fail("parents", "joint 0 must be the root (parent -1)");
        for (Eigen::Index b = 1; b < nb; ++b)
            if (parents[b] < 0 || parents[b] >= nb || parents[b] == b) fail("parents", "invalid parent for joint " + std::to_string(b));
        if (static_cast<Eigen::Index>(topological_order().size()) != nb) fail("parents", "not a tree rooted at joint 0");
    }
};

/// Uniformly scales about the origin so every coordinate lies within
/// [-limit, limit]. Templates that already fit are left untouched.
inline void fit_template_to_cube(RiggedTemplate& t, double limit = 0.9)
{
    double extent = 0.0;
    for (const Vec3& v : t.vertices) extent = std::max(extent, v.cwiseAbs().maxCoeff());
    if (extent <= limit) return;
    const double s = limit / extent;
    for (Vec3& v : t.vertices) v *= s;
    for (Vec3& j : t.joints) j *= s;
    for (auto& e : t.blendshapes) e *= s;
}

struct PoseParams {
    std::vector<Vec3> rotations;  // per-joint axis-angle, radians
    Eigen::VectorXd expression;   // K coefficients
    Vec3 translation = Vec3::Zero();

    static PoseParams rest(int bones, int expressions)
    {
        PoseParams p;
        p.rotations.assign(bones, Vec3::Zero());
        p.expression = Eigen::VectorXd::Zero(expressions);
        return p;
    }
};

// ---------------------------------------------------------------------------
// Barycentric binding

struct TemplateProjection {
    int face = -1;
    Vec3 bary = Vec3::Zero();  // (u, v, gamma) for the face's three corners
    double distance = 0.0;
};

/// Nearest template face and clamped barycentrics of the closest point.
class TemplateProjector {
public:
    explicit TemplateProjector(const RiggedTemplate& t) : bvh_(t.vertices, t.faces) {}

    TemplateProjection project(const Vec3& p) const
    {
        const NearestFace n = bvh_.nearest(p);
        return {n.face, n.bary, std::sqrt(n.distance_sq)};
    }

private:
    TriangleBvh bvh_;
};

inline TemplateProjection project_to_template(const Vec3& point, const RiggedTemplate& t)
{
    if (t.faces.empty()) throw std::invalid_argument("project_to_template: empty template");
    return TemplateProjector(t).project(point);
}

struct SkinningBinding {
    std::vector<int> faces;
    std::vector<Vec3> bary;
    Eigen::MatrixXd weights;                    // N x B
    std::vector<Eigen::MatrixX3d> blendshapes;  // K entries of N x 3

    std::size_t size() const { return faces.size(); }
};

inline SkinningBinding bind(std::span<const Vec3> points, const RiggedTemplate& t, const TemplateProjector& projector)
{
    const auto n = static_cast<Eigen::Index>(points.size());
    SkinningBinding b;
    b.faces.resize(points.size());
    b.bary.resize(points.size());
    b.weights.setZero(n, t.num_bones());
    b.blendshapes.assign(t.num_expressions(), Eigen::MatrixX3d::Zero(n, 3));
    for (Eigen::Index i = 0; i < n; ++i) {
        const TemplateProjection proj = projector.project(points[i]);
        b.faces[i] = proj.face;
        b.bary[i] = proj.bary;
        const Face& f = t.faces[proj.face];
        for (int c = 0; c < 3; ++c) {
            b.weights.row(i) += proj.bary[c] * t.weights.row(f[c]);
            for (int k = 0; k < t.num_expressions(); ++k) b.blendshapes[k].row(i) += proj.bary[c] * t.blendshapes[k].row(f[c]);
        }
    }
    return b;
}

inline SkinningBinding bind(const TriMesh& mesh, const RiggedTemplate& t)
{
    return dtet::bind(std::span<const Vec3>(mesh.vertices), t, TemplateProjector(t));
}

// ---------------------------------------------------------------------------
// Kinematics

/// Affine map x -> rotation * x + translation, i.e. G_b(theta, J) G(0, J)^-1.
struct BoneTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

    Mat4 matrix() const
    {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = rotation;
        m.topRightCorner<3, 1>() = translation;
        return m;
    }
};

/// Each bone rotates about its rest joint then inherits its parent's map:
/// A_b(x) = A_parent(J_b + R_b (x - J_b)). At zero pose every map is the exact identity.
inline std::vector<BoneTransform> forward_kinematics(const RiggedTemplate& t, std::span<const Vec3> rotations)
{
    if (static_cast<int>(rotations.size()) != t.num_bones())
        throw std::invalid_argument("forward_kinematics: expected " + std::to_string(t.num_bones()) + " joint rotations");
    std::vector<BoneTransform> out(t.joints.size());
    for (int b : t.topological_order()) {
        const Mat3 local = rodrigues(rotations[b]);
        const Vec3 local_t = t.joints[b] - local * t.joints[b];
        if (t.parents[b] < 0) {
            out[b].rotation = local;
            out[b].translation = local_t;
        } else {
            const BoneTransform& p = out[t.parents[b]];
            out[b].rotation = p.rotation * local;
            out[b].translation = p.rotation * local_t + p.translation;
        }
    }
    return out;
}

inline void check_pose(const RiggedTemplate& t, const PoseParams& pose)
{
    if (static_cast<int>(pose.rotations.size()) != t.num_bones())
        throw std::invalid_argument("pose: rotation count does not match template joints");
    if (pose.expression.size() != t.num_expressions())
        throw std::invalid_argument("pose: expression count does not match template blendshapes");
}

/// Posed positions: v' = v + E psi, then v' + sum_b W_b ((R_b - I) v' + t_b) + T.
/// Algebraically the weighted blend of bone maps for convex weights; written
/// as an offset so the rest pose reproduces v bit for bit.
inline std::vector<Vec3> deform_points(std::span<const Vec3> points, const SkinningBinding& binding,
                                       const RiggedTemplate& t, const PoseParams& pose)
{
    check_pose(t, pose);
    if (binding.size() != points.size()) throw std::invalid_argument("deform: binding does not match mesh");
    const auto bones = forward_kinematics(t, pose.rotations);
    std::vector<Mat3> delta(bones.size());
    for (std::size_t b = 0; b < bones.size(); ++b) delta[b] = bones[b].rotation - Mat3::Identity();
    std::vector<Vec3> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec3 v = points[i];
        for (int k = 0; k < t.num_expressions(); ++k) v += pose.expression[k] * binding.blendshapes[k].row(static_cast<Eigen::Index>(i)).transpose();
        Vec3 offset = Vec3::Zero();
        for (std::size_t b = 0; b < bones.size(); ++b) {
            const double w = binding.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
            if (w == 0.0) continue;
            offset += w * (delta[b] * v + bones[b].translation);
        }
        out[i] = v + offset + pose.translation;
    }
    return out;
}

inline TriMesh deform(const TriMesh& mesh, const SkinningBinding& binding, const RiggedTemplate& t, const PoseParams& pose)
{
    TriMesh posed;
    posed.vertices = deform_points(mesh.vertices, binding, t, pose);
    posed.faces = mesh.faces;
    posed.provenance = mesh.provenance;
    update_normals(posed);
    return posed;
}

/// Per-vertex Jacobian d(posed)/d(canonical) = I + sum_b W_b (R_b - I).
inline std::vector<Mat3> deform_gradients(const SkinningBinding& binding, const RiggedTemplate& t, const PoseParams& pose)
{
    check_pose(t, pose);
    const auto bones = forward_kinematics(t, pose.rotations);
    std::vector<Mat3> out(binding.size(), Mat3::Identity());
    for (std::size_t i = 0; i < binding.size(); ++i) {
        for (std::size_t b = 0; b < bones.size(); ++b) {
            const double w = binding.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
            if (w != 0.0) out[i] += w * (bones[b].rotation - Mat3::Identity());
        }
    }
    return out;
}

/// Pulls posed-vertex gradients back to canonical vertices.
inline std::vector<Vec3> deform_backward(std::span<const Mat3> jacobians, std::span<const Vec3> posed_grads)
{
    std::vector<Vec3> out(posed_grads.size());
    for (std::size_t i = 0; i < posed_grads.size(); ++i) out[i] = jacobians[i].transpose() * posed_grads[i];
    return out;
}

// ---------------------------------------------------------------------------
// Bone segments (used for self-occlusion filtering and region framing)

struct BoneSegment {
    Vec3 start;
    Vec3 end;
    double radius = 0.0;
};

/// Segment from each joint to the mean of its children; leaves extend to the
/// farthest template vertex they dominate. Radius is the mean distance of the
/// dominated vertices to the segment.
inline std::vector<BoneSegment> bone_segments(const RiggedTemplate& t)
{
    const auto kids = t.children();
    const int nb = t.num_bones();
    std::vector<std::vector<int>> owned(nb);
    for (Eigen::Index i = 0; i < t.weights.rows(); ++i) {
        Eigen::Index best = 0;
        t.weights.row(i).maxCoeff(&best);
        owned[best].push_back(static_cast<int>(i));
    }
    std::vector<BoneSegment> segs(nb);
    for (int b = 0; b < nb; ++b) {
        segs[b].start = t.joints[b];
        if (!kids[b].empty()) {
            Vec3 m = Vec3::Zero();
            for (int c : kids[b]) m += t.joints[c];
            segs[b].end = m / static_cast<double>(kids[b].size());
        } else {
            Vec3 far = t.joints[b];
            double best = 0.0;
            for (int v : owned[b]) {
                const double d = (t.vertices[v] - t.joints[b]).norm();
                if (d > best) {
                    best = d;
                    far = t.vertices[v];
                }
            }
            segs[b].end = far;
        }
        double r = 0.0;
        for (int v : owned[b]) {
            const Vec3 ab = segs[b].end - segs[b].start;
            const double len2 = ab.squaredNorm();
            const double s = len2 > 0 ? std::clamp((t.vertices[v] - segs[b].start).dot(ab) / len2, 0.0, 1.0) : 0.0;
            r += (t.vertices[v] - (segs[b].start + s * ab)).norm();
        }
        segs[b].radius = owned[b].empty() ? 0.0 : r / static_cast<double>(owned[b].size());
    }
    return segs;
}

}  // namespace dtet
