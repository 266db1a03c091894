#pragma once

// Small geometric kernels shared by every stage: Rodrigues rotation,
// point-triangle closest point, and ray-triangle intersection.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>

namespace dtet {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Face = std::array<int, 3>;

inline constexpr double kPi = 3.14159265358979323846;

inline Mat3 skew(const Vec3& w)
{
    Mat3 s;
    s << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return s;
}

/// Rotation matrix for an axis-angle vector. A zero vector yields the exact identity.
inline Mat3 rodrigues(const Vec3& axis_angle)
{
    const double angle = axis_angle.norm();
    if (angle == 0.0) {
        return Mat3::Identity();
    }
    const Vec3 k = axis_angle / angle;
    const Mat3 K = skew(k);
    return Mat3::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
}

/// Closest point on a triangle together with its barycentric coordinates
/// (weights of a, b, c respectively).
struct ClosestPoint {
    Vec3 point;
    Vec3 bary;
    double distance_sq = 0.0;
};

// Ericson, Real-Time Collision Detection 5.1.5, with explicit barycentrics.
inline ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    auto finish = [&](double u, double v, double w) {
        ClosestPoint r;
        r.bary = Vec3(u, v, w);
        r.point = u * a + v * b + w * c;
        r.distance_sq = (p - r.point).squaredNorm();
        return r;
    };
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double t = d1 / (d1 - d3);
        return finish(1.0 - t, t, 0.0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double t = d2 / (d2 - d6);
        return finish(1.0 - t, 0.0, t);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0.0, 1.0 - t, t);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return finish(1.0 - v - w, v, w);
}

/// Möller-Trumbore. Returns the ray parameter of the hit (t > 0) or a negative value.
inline double ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (det == 0.0) return -1.0;
    const double inv = 1.0 / det;
    const Vec3 tv = origin - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return -1.0;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return -1.0;
    const double t = e2.dot(qv) * inv;
    return t > 0.0 ? t : -1.0;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c)
{
    return 0.5 * (b - a).cross(c - a).norm();
}

inline double round_to_float(double x)
{
    return static_cast<double>(static_cast<float>(x));
}

}  // namespace dtet
