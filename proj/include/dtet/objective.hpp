#pragma once

// Reconstruction losses with image-space gradients, the Laplacian normal
// regularizer, and the novel-view guidance interface.

#include "dtet/pipeline.hpp"

#include <functional>
#include <optional>

namespace dtet {

struct ImageLoss {
    double value = 0.0;
    Image grad;
};

namespace detail {

inline void require_mask(const Image& img, const Image& mask, const char* what)
{
    if (mask.width != img.width || mask.height != img.height || mask.channels != 1)
        throw std::invalid_argument(std::string(what) + ": mask does not match image");
}

}  // namespace detail

/// Mean squared error over the masked pixel-channels.
inline ImageLoss loss_texture_l2(const Image& rendered, const Image& reference, const Image& mask)
{
    require_same_shape(rendered, reference, "loss_texture_l2");
    detail::require_mask(rendered, mask, "loss_texture_l2");
    ImageLoss out{0.0, Image(rendered.width, rendered.height, rendered.channels)};
    const int ch = rendered.channels;
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.pixels(); ++p)
        if (mask[p] > 0.5) count += ch;
    if (count == 0) return out;
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
        if (mask[p] <= 0.5) continue;
        for (int c = 0; c < ch; ++c) {
            const double r = rendered[p * ch + c] - reference[p * ch + c];
            out.value += r * r;
            out.grad[p * ch + c] = 2.0 * r / static_cast<double>(count);
        }
    }
    out.value /= static_cast<double>(count);
    return out;
}

/// Mean over masked pixels of 1 - cos(rendered, reference).
inline ImageLoss loss_normal(const Image& rendered, const Image& reference, const Image& mask)
{
    require_same_shape(rendered, reference, "loss_normal");
    detail::require_mask(rendered, mask, "loss_normal");
    if (rendered.channels != 3) throw std::invalid_argument("loss_normal: expected 3-channel normals");
    ImageLoss out{0.0, Image(rendered.width, rendered.height, 3)};
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.pixels(); ++p)
        if (mask[p] > 0.5) ++count;
    if (count == 0) return out;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
        if (mask[p] <= 0.5) continue;
        const Vec3 a(rendered[p * 3], rendered[p * 3 + 1], rendered[p * 3 + 2]);
        const Vec3 b(reference[p * 3], reference[p * 3 + 1], reference[p * 3 + 2]);
        const double la = a.norm(), lb = b.norm();
        if (la == 0.0 || lb == 0.0) {
            out.value += inv;
            continue;
        }
        const Vec3 au = a / la, bu = b / lb;
        const double cosv = au.dot(bu);
        out.value += (1.0 - cosv) * inv;
        const Vec3 g = -(bu - au * cosv) / la * inv;
        for (int c = 0; c < 3; ++c) out.grad[p * 3 + c] = g[c];
    }
    return out;
}

/// 1 - Pearson correlation over masked pixels; zero variance gives 1 with no gradient.
inline ImageLoss loss_depth_pearson(const Image& rendered, const Image& reference, const Image& mask)
{
    require_same_shape(rendered, reference, "loss_depth_pearson");
    detail::require_mask(rendered, mask, "loss_depth_pearson");
    ImageLoss out{1.0, Image(rendered.width, rendered.height, 1)};
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < mask.pixels(); ++p)
        if (mask[p] > 0.5) idx.push_back(p);
    if (idx.size() < 2) return out;
    double mx = 0.0, my = 0.0;
    for (std::size_t p : idx) {
        mx += rendered[p];
        my += reference[p];
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t p : idx) {
        const double x = rendered[p] - mx, y = reference[p] - my;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return out;
    const double denom = std::sqrt(sxx * syy);
    const double r = sxy / denom;
    out.value = 1.0 - r;
    // dr/dx_i = y_c / sqrt(Sxx Syy) - r x_c / Sxx (centering terms cancel).
    for (std::size_t p : idx) {
        const double x = rendered[p] - mx, y = reference[p] - my;
        out.grad[p] = -(y / denom - r * x / sxx);
    }
    return out;
}

/// Mean squared error over all pixels.
inline ImageLoss loss_mask(const Image& soft_mask, const Image& reference)
{
    require_same_shape(soft_mask, reference, "loss_mask");
    ImageLoss out{0.0, Image(soft_mask.width, soft_mask.height, soft_mask.channels)};
    const std::size_t n = soft_mask.data.size();
    if (n == 0) return out;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = soft_mask[i] - reference[i];
        out.value += r * r;
        out.grad[i] = 2.0 * r / static_cast<double>(n);
    }
    out.value /= static_cast<double>(n);
    return out;
}

/// Soft target for a binary mask, matching the rasterizer's halo. The true
/// edge lies somewhere between the last covered pixel centre and the next one,
/// so uncovered pixels use the distance to the nearest covered centre minus
/// half a pixel. Against the raw binary mask the halo biases silhouettes inward.
inline Image soften_mask(const Image& mask, const SilhouetteOptions& opt = {})
{
    if (mask.channels != 1) throw std::invalid_argument("soften_mask: expected a 1-channel mask");
    Image out(mask.width, mask.height, 1);
    const int reach = static_cast<int>(std::ceil(opt.radius + 0.5));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y) > 0.5) {
                out.at(x, y) = 1.0;
                continue;
            }
            double best = std::numeric_limits<double>::infinity();
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dx = -reach; dx <= reach; ++dx) {
                    const int u = x + dx, v = y + dy;
                    if (u < 0 || v < 0 || u >= mask.width || v >= mask.height || !(mask.at(u, v) > 0.5)) continue;
                    best = std::min(best, std::sqrt(static_cast<double>(dx * dx + dy * dy)));
                }
            const double d = best - 0.5;
            out.at(x, y) = opt.enabled && d < opt.radius ? opt.falloff(d) : 0.0;
        }
    }
    return out;
}

struct MeshLoss {
    double value = 0.0;
    std::vector<Vec3> grad;
};

/// ||L n||_F / V with the uniform Laplacian (L n)_i = mean of neighbor normals - n_i.
inline MeshLoss loss_laplacian_normal(const TriMesh& mesh)
{
    const std::size_t nv = mesh.vertices.size();
    MeshLoss out{0.0, std::vector<Vec3>(nv, Vec3::Zero())};
    if (nv == 0) return out;
    const std::vector<Vec3> normals = compute_vertex_normals(mesh.vertices, mesh.faces);
    const auto nbrs = vertex_neighbors(nv, mesh.faces);
    std::vector<Vec3> ln(nv, Vec3::Zero());
    double s = 0.0;
    for (std::size_t i = 0; i < nv; ++i) {
        if (nbrs[i].empty()) continue;
        Vec3 m = Vec3::Zero();
        for (int j : nbrs[i]) m += normals[j];
        ln[i] = m / static_cast<double>(nbrs[i].size()) - normals[i];
        s += ln[i].squaredNorm();
    }
    const double root = std::sqrt(s);
    out.value = root / static_cast<double>(nv);
    if (root == 0.0) return out;
    const double scale = 1.0 / (static_cast<double>(nv) * root);
    std::vector<Vec3> gn(nv, Vec3::Zero());
    for (std::size_t i = 0; i < nv; ++i) {
        if (nbrs[i].empty()) continue;
        const Vec3 g = ln[i] * scale;
        gn[i] -= g;
        const double w = 1.0 / static_cast<double>(nbrs[i].size());
        for (int j : nbrs[i]) gn[j] += w * g;
    }
    vertex_normals_backward(mesh.vertices, mesh.faces, gn, out.grad);
    return out;
}

// ---------------------------------------------------------------------------
// Novel-view guidance

struct GuidanceRequest {
    const Image* rendered = nullptr;       // novel-view color
    const Image* rendered_mask = nullptr;  // hard coverage of the novel view
    Camera novel;
    int reference = 0;                     // index of the shot whose pose is rendered
    Mat3 delta_rotation = Mat3::Identity();  // reference camera frame -> novel camera frame
    const PoseParams* pose = nullptr;
};

/// Produces an image-space gradient for a novel view; zero where it has no preference.
class GuidanceModel {
public:
    virtual ~GuidanceModel() = default;

    Image gradient(const GuidanceRequest& req)
    {
        ++calls_;
        return compute(req);
    }
    std::size_t calls() const { return calls_; }

protected:
    virtual Image compute(const GuidanceRequest& req) = 0;

private:
    std::size_t calls_ = 0;
};

/// (rendered - truth) on masked pixels, scaled by lambda.
inline Image oracle_guidance(const Image& rendered, const Image& truth, const Image& mask, double lambda = 1.0)
{
    require_same_shape(rendered, truth, "oracle_guidance");
    detail::require_mask(rendered, mask, "oracle_guidance");
    Image g(rendered.width, rendered.height, rendered.channels);
    const int ch = rendered.channels;
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
        if (mask[p] <= 0.5) continue;
        for (int c = 0; c < ch; ++c) g[p * ch + c] = lambda * (rendered[p * ch + c] - truth[p * ch + c]);
    }
    return g;
}

/// Guidance from a ground-truth renderer of any (camera, pose).
class OracleGuidance : public GuidanceModel {
public:
    using TruthRenderer = std::function<Image(const Camera&, const PoseParams&)>;

    explicit OracleGuidance(TruthRenderer truth) : truth_(std::move(truth)) {}

protected:
    Image compute(const GuidanceRequest& req) override
    {
        if (!req.rendered || !req.rendered_mask || !req.pose) throw std::invalid_argument("guidance: incomplete request");
        return oracle_guidance(*req.rendered, truth_(req.novel, *req.pose), *req.rendered_mask);
    }

private:
    TruthRenderer truth_;
};

// ---------------------------------------------------------------------------
// Recipes

enum class TaskKind { Body, Hand };

inline std::string to_string(TaskKind k) { return k == TaskKind::Body ? "body" : "hand"; }

inline TaskKind task_kind_from_string(const std::string& s)
{
    if (s == "body") return TaskKind::Body;
    if (s == "hand") return TaskKind::Hand;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

struct LossWeights {
    double lambda_sds = 0.0;
    double lambda_lap = 0.0;
    bool texture = true;
    bool normal = true;
    bool depth = true;
    bool mask = true;

    void validate() const
    {
        if (!(lambda_sds >= 0.0) || !(lambda_lap >= 0.0)) throw std::invalid_argument("loss weights must be nonnegative");
    }
};

/// Observed data for one view. Normal and depth are optional (empty images).
struct Reference {
    Image color;
    Image mask;
    Image normal;
    Image depth;
    Image soft_mask;  // optional target for the mask term; `mask` when empty
};

struct LossTerms {
    double texture = 0.0;
    double normal = 0.0;
    double depth = 0.0;
    double mask = 0.0;
    double laplacian = 0.0;  // unweighted
    double region = 0.0;
    double lambda_lap = 0.0;

    double total() const { return texture + normal + depth + mask + region + lambda_lap * laplacian; }
};

struct ReconLoss {
    LossTerms terms;
    ViewGradients view;
    std::vector<ViewGradients> regions;
    std::vector<Vec3> canonical_grads;  // from the Laplacian term, on the canonical mesh
};

/// One region crop: its render and its reference.
struct RegionView {
    const ViewRender* render = nullptr;
    const Reference* reference = nullptr;
};

inline Image intersect_masks(const Image& a, const Image& b)
{
    require_same_shape(a, b, "intersect_masks");
    Image m(a.width, a.height, 1);
    for (std::size_t p = 0; p < m.pixels(); ++p) m[p] = (a[p] > 0.5 && b[p] > 0.5) ? 1.0 : 0.0;
    return m;
}

/// Body: texture + normal + depth + mask (+ region texture terms).
/// Hand: texture + mask + lambda_lap * Laplacian. Toggles in `w` switch terms off.
inline ReconLoss assemble_recon_loss(TaskKind kind, const ViewRender& view, const Reference& ref, const LossWeights& w,
                                     const TriMesh* canonical = nullptr, std::span<const RegionView> regions = {})
{
    w.validate();
    ReconLoss out;
    const RenderBuffers& rb = view.buffers;
    const bool body = kind == TaskKind::Body;
    if (w.texture) {
        ImageLoss l = loss_texture_l2(view.color, ref.color, ref.mask);
        out.terms.texture = l.value;
        out.view.color = std::move(l.grad);
    }
    if (w.mask) {
        ImageLoss l = loss_mask(rb.soft_mask, ref.soft_mask.width > 0 ? ref.soft_mask : ref.mask);
        out.terms.mask = l.value;
        out.view.soft_mask = std::move(l.grad);
    }
    if (body && w.normal && ref.normal.width > 0) {
        ImageLoss l = loss_normal(rb.normal, ref.normal, intersect_masks(rb.mask, ref.mask));
        out.terms.normal = l.value;
        out.view.normal = std::move(l.grad);
    }
    if (body && w.depth && ref.depth.width > 0) {
        ImageLoss l = loss_depth_pearson(rb.depth, ref.depth, intersect_masks(rb.mask, ref.mask));
        out.terms.depth = l.value;
        out.view.depth = std::move(l.grad);
    }
    if (body && w.texture) {
        for (const RegionView& r : regions) {
            ImageLoss l = loss_texture_l2(r.render->color, r.reference->color, r.reference->mask);
            out.terms.region += l.value;
            ViewGradients g;
            g.color = std::move(l.grad);
            out.regions.push_back(std::move(g));
        }
    }
    if (!body && w.lambda_lap > 0.0 && canonical) {
        MeshLoss l = loss_laplacian_normal(*canonical);
        out.terms.laplacian = l.value;
        out.terms.lambda_lap = w.lambda_lap;
        for (Vec3& g : l.grad) g *= w.lambda_lap;
        out.canonical_grads = std::move(l.grad);
    }
    return out;
}

}  // namespace dtet
