#pragma once

#include "dtet/math.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

namespace dtet {

/// Result of a nearest-triangle query. Ties on distance resolve to the lowest face index.
struct NearestFace {
    int face = -1;
    Vec3 bary = Vec3::Zero();
    Vec3 point = Vec3::Zero();
    double distance_sq = std::numeric_limits<double>::infinity();
};

/// Bounding volume hierarchy over a static triangle soup, answering exact
/// nearest-triangle queries.
class TriangleBvh {
public:
    TriangleBvh() = default;

    TriangleBvh(std::span<const Vec3> vertices, std::span<const Face> faces)
        : vertices_(vertices.begin(), vertices.end()), faces_(faces.begin(), faces.end())
    {
        order_.resize(faces_.size());
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.resize(faces_.size());
        for (std::size_t i = 0; i < faces_.size(); ++i) {
            const Face& f = faces_[i];
            centroids_[i] = (vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0;
        }
        if (!faces_.empty()) {
            nodes_.reserve(2 * faces_.size());
            build(0, static_cast<int>(faces_.size()));
        }
    }

    bool empty() const { return faces_.empty(); }

    NearestFace nearest(const Vec3& p) const
    {
        NearestFace best;
        if (nodes_.empty()) return best;
        int stack[128];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& node = nodes_[stack[--top]];
            if (box_distance_sq(node, p) > best.distance_sq) continue;
            if (node.count > 0) {
                for (int i = node.start; i < node.start + node.count; ++i) {
                    const int fi = order_[i];
                    const Face& f = faces_[fi];
                    const ClosestPoint cp = closest_point_on_triangle(p, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
                    if (cp.distance_sq < best.distance_sq || (cp.distance_sq == best.distance_sq && fi < best.face)) {
                        best.face = fi;
                        best.bary = cp.bary;
                        best.point = cp.point;
                        best.distance_sq = cp.distance_sq;
                    }
                }
            } else {
                const Node& l = nodes_[node.left];
                const Node& r = nodes_[node.right];
                const double dl = box_distance_sq(l, p);
                const double dr = box_distance_sq(r, p);
                // Push the farther child first.
                if (dl < dr) {
                    stack[top++] = node.right;
                    stack[top++] = node.left;
                } else {
                    stack[top++] = node.left;
                    stack[top++] = node.right;
                }
            }
        }
        return best;
    }

private:
    struct Node {
        Vec3 lo;
        Vec3 hi;
        int left = -1;
        int right = -1;
        int start = 0;
        int count = 0;
    };

    static double box_distance_sq(const Node& n, const Vec3& p)
    {
        const Vec3 d = (n.lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - n.hi);
        return d.squaredNorm();
    }

    int build(int start, int end)
    {
        const int index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        Vec3 clo = lo;
        Vec3 chi = hi;
        for (int i = start; i < end; ++i) {
            const Face& f = faces_[order_[i]];
            for (int k = 0; k < 3; ++k) {
                lo = lo.cwiseMin(vertices_[f[k]]);
                hi = hi.cwiseMax(vertices_[f[k]]);
            }
            clo = clo.cwiseMin(centroids_[order_[i]]);
            chi = chi.cwiseMax(centroids_[order_[i]]);
        }
        nodes_[index].lo = lo;
        nodes_[index].hi = hi;
        if (end - start <= 4) {
            nodes_[index].start = start;
            nodes_[index].count = end - start;
            return index;
        }
        int axis = 0;
        const Vec3 ext = chi - clo;
        if (ext.y() > ext[axis]) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        const int mid = (start + end) / 2;
        std::nth_element(order_.begin() + start, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
            if (centroids_[a][axis] != centroids_[b][axis]) return centroids_[a][axis] < centroids_[b][axis];
            return a < b;
        });
        const int left = build(start, mid);
        const int right = build(mid, end);
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

}  // namespace dtet
