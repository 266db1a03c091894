#pragma once

#include "dtet/math.hpp"

#include <stdexcept>

namespace dtet {

/// Pinhole camera. `rotation` maps world to camera axes (x right, y down,
/// z forward); a world point p sits at rotation * (p - position) in camera space.
struct Camera {
    Mat3 rotation = Mat3::Identity();
    Vec3 position = Vec3::Zero();
    double fov_y = 0.7;  // vertical field of view, radians
    int width = 64;
    int height = 64;
    double cx = 32.0;  // principal point, pixels
    double cy = 32.0;

    double focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }
    Vec3 to_camera(const Vec3& p) const { return rotation * (p - position); }
    Vec3 forward() const { return rotation.row(2).transpose(); }

    /// Camera-space direction through a pixel-plane point, with unit z.
    Vec3 ray(double px, double py) const
    {
        const double f = focal();
        return Vec3((px - cx) / f, (py - cy) / f, 1.0);
    }

    Vec2 project(const Vec3& cam) const
    {
        const double f = focal();
        return Vec2(f * cam.x() / cam.z() + cx, f * cam.y() / cam.z() + cy);
    }

    void validate() const
    {
        if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be positive");
        if (!(fov_y > 0.0 && fov_y < kPi)) throw std::invalid_argument("camera: field of view out of range");
        if ((rotation.transpose() * rotation - Mat3::Identity()).norm() > 1e-6)
            throw std::invalid_argument("camera: rotation is not orthonormal");
    }
};

/// Camera at `eye` looking at `target`, image rows running against `up`.
inline Camera look_at(const Vec3& eye, const Vec3& target, double fov_y, int width, int height, Vec3 up = Vec3::UnitY())
{
    const Vec3 fwd = (target - eye).normalized();
    if (std::abs(fwd.dot(up.normalized())) > 0.999) up = std::abs(fwd.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 right = fwd.cross(up).normalized();
    const Vec3 down = fwd.cross(right);
    Camera c;
    c.rotation.row(0) = right.transpose();
    c.rotation.row(1) = down.transpose();
    c.rotation.row(2) = fwd.transpose();
    c.position = eye;
    c.fov_y = fov_y;
    c.width = width;
    c.height = height;
    c.cx = 0.5 * width;
    c.cy = 0.5 * height;
    return c;
}

/// Camera on a sphere around `target` at the given azimuth (about +y, zero
/// toward +z) and elevation.
inline Camera orbit_camera(double azimuth, double elevation, double radius, const Vec3& target, double fov_y,
                           int width, int height)
{
    const Vec3 dir(std::cos(elevation) * std::sin(azimuth), std::sin(elevation), std::cos(elevation) * std::cos(azimuth));
    return look_at(target + radius * dir, target, fov_y, width, height);
}

/// Relative rotation taking the reference camera's frame to the novel one.
inline Mat3 relative_rotation(const Camera& reference, const Camera& novel)
{
    return novel.rotation * reference.rotation.transpose();
}

}  // namespace dtet
