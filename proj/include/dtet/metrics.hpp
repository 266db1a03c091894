#pragma once

// Image and geometry metrics.

#include "dtet/bvh.hpp"
#include "dtet/image.hpp"
#include "dtet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dtet {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for images in [0, 1], capped for identical inputs.
inline double psnr(const Image& a, const Image& b)
{
    require_same_shape(a, b, "psnr");
    if (a.data.empty()) throw std::invalid_argument("psnr: empty image");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

/// Gaussian-window SSIM (11x11, sigma 1.5, k1 0.01, k2 0.03, dynamic range 1),
/// averaged over valid window positions and then over channels.
inline double ssim(const Image& a, const Image& b)
{
    require_same_shape(a, b, "ssim");
    constexpr int R = 5;
    if (a.width < 2 * R + 1 || a.height < 2 * R + 1) throw std::invalid_argument("ssim: image smaller than the window");
    std::array<double, 2 * R + 1> w{};
    double wsum = 0.0;
    for (int i = -R; i <= R; ++i) wsum += w[i + R] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
    for (double& x : w) x /= wsum;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int W = a.width, H = a.height, C = a.channels;

    // Separable blur over valid positions of the five moment images.
    auto blur = [&](const std::vector<double>& src) {
        std::vector<double> tmp(static_cast<std::size_t>(W - 2 * R) * H);
        for (int y = 0; y < H; ++y)
            for (int x = R; x < W - R; ++x) {
                double s = 0.0;
                for (int k = -R; k <= R; ++k) s += w[k + R] * src[static_cast<std::size_t>(y) * W + x + k];
                tmp[static_cast<std::size_t>(y) * (W - 2 * R) + (x - R)] = s;
            }
        std::vector<double> out(static_cast<std::size_t>(W - 2 * R) * (H - 2 * R));
        for (int y = R; y < H - R; ++y)
            for (int x = 0; x < W - 2 * R; ++x) {
                double s = 0.0;
                for (int k = -R; k <= R; ++k) s += w[k + R] * tmp[static_cast<std::size_t>(y + k) * (W - 2 * R) + x];
                out[static_cast<std::size_t>(y - R) * (W - 2 * R) + x] = s;
            }
        return out;
    };

    double total = 0.0;
    const std::size_t n = static_cast<std::size_t>(W) * H;
    for (int c = 0; c < C; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = a[p * C + c];
            y[p] = b[p * C + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = blur(x), my = blur(y), sxx = blur(xx), syy = blur(yy), sxy = blur(xy);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / C;
}

/// Intersection over union of two binary masks (> 0.5); two empty masks give 1.
inline double mask_iou(const Image& a, const Image& b)
{
    require_same_shape(a, b, "mask_iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool x = a[i] > 0.5, y = b[i] > 0.5;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Uniform-area surface samples.
inline std::vector<Vec3> sample_surface(const TriMesh& m, int count, std::uint64_t seed)
{
    if (m.faces.empty()) throw std::invalid_argument("sample_surface: empty mesh");
    std::vector<double> cdf(m.faces.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        acc += triangle_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        cdf[f] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("sample_surface: mesh has zero area");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> out(static_cast<std::size_t>(count));
    for (Vec3& p : out) {
        const double r = u(rng) * acc;
        const std::size_t f = std::min<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), cdf.size() - 1);
        const double s = std::sqrt(u(rng)), t = u(rng);
        const Face& tri = m.faces[f];
        p = (1 - s) * m.vertices[tri[0]] + s * (1 - t) * m.vertices[tri[1]] + s * t * m.vertices[tri[2]];
    }
    return out;
}

/// Symmetric Chamfer: mean of the two directed mean point-to-surface distances.
inline double chamfer(const TriMesh& a, const TriMesh& b, int samples = 10000, std::uint64_t seed = 0)
{
    auto directed = [samples](const TriMesh& from, const TriMesh& to, std::uint64_t s) {
        const TriangleBvh bvh(to.vertices, to.faces);
        double sum = 0.0;
        for (const Vec3& p : sample_surface(from, samples, s)) sum += std::sqrt(bvh.nearest(p).distance_sq);
        return sum / samples;
    };
    return 0.5 * (directed(a, b, seed) + directed(b, a, seed + 1));
}

}  // namespace dtet
