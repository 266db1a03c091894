#include "dtet/objective.hpp"
#include "dtet/shapes.hpp"
#include "dtet/templates.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace dtet;

Image random_image(int w, int h, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Image im(w, h, c);
    for (double& x : im.data) x = u(rng);
    return im;
}

Image random_mask(int w, int h, std::mt19937_64& rng)
{
    std::bernoulli_distribution b(0.6);
    Image m(w, h, 1);
    for (double& x : m.data) x = b(rng) ? 1.0 : 0.0;
    return m;
}

// Directional FD of an image loss along a random perturbation of `x`.
template <typename F>
void check_image_gradient(F loss, Image x, const Image& grad, std::mt19937_64& rng, int seed)
{
    std::normal_distribution<double> n01;
    Image dir(x.width, x.height, x.channels);
    for (double& d : dir.data) d = n01(rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) analytic += grad[i] * dir[i];
    auto at = [&](double h) {
        Image y = x;
        for (std::size_t i = 0; i < y.data.size(); ++i) y[i] += h * dir[i];
        return loss(y);
    };
    const double h = 1e-6;
    const double fd = (at(h) - at(-h)) / (2.0 * h);
    EXPECT_NEAR(fd, analytic, 1e-4 * std::max(1e-3, std::abs(analytic))) << "seed " << seed;
}

TEST(TextureLoss, ClosedForms)
{
    std::mt19937_64 rng(1);
    const Image ref = random_image(8, 8, 3, rng, 0.2, 0.8);
    const Image mask = random_mask(8, 8, rng);
    const ImageLoss same = loss_texture_l2(ref, ref, mask);
    EXPECT_EQ(same.value, 0.0);
    for (double g : same.grad.data) EXPECT_EQ(g, 0.0);
    Image off = ref;
    for (double& x : off.data) x += 0.1;
    EXPECT_NEAR(loss_texture_l2(off, ref, mask).value, 0.01, 1e-12);
}

TEST(TextureLoss, FiniteDifferences)
{
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const Image a = random_image(6, 5, 3, rng), b = random_image(6, 5, 3, rng);
        const Image m = random_mask(6, 5, rng);
        check_image_gradient([&](const Image& x) { return loss_texture_l2(x, b, m).value; }, a,
                             loss_texture_l2(a, b, m).grad, rng, seed);
    }
}

TEST(NormalLoss, ClosedForms)
{
    Image a(4, 4, 3), b(4, 4, 3);
    const Image mask(4, 4, 1, 1.0);
    for (std::size_t p = 0; p < 16; ++p) {
        a[p * 3 + 2] = 1.0;
        b[p * 3 + 0] = 1.0;
    }
    EXPECT_NEAR(loss_normal(a, a, mask).value, 0.0, 1e-15);
    EXPECT_NEAR(loss_normal(a, b, mask).value, 1.0, 1e-15);
}

TEST(NormalLoss, FiniteDifferences)
{
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const Image a = random_image(5, 5, 3, rng, -1, 1), b = random_image(5, 5, 3, rng, -1, 1);
        const Image m = random_mask(5, 5, rng);
        check_image_gradient([&](const Image& x) { return loss_normal(x, b, m).value; }, a, loss_normal(a, b, m).grad, rng,
                             seed);
    }
}

TEST(DepthLoss, AffineInvarianceAndSign)
{
    std::mt19937_64 rng(5);
    const Image ref = random_image(7, 7, 1, rng, 2.0, 3.0);
    const Image mask = random_mask(7, 7, rng);
    Image affine = ref, neg = ref;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        affine[i] = 2.5 * ref[i] + 0.7;
        neg[i] = -ref[i];
    }
    EXPECT_NEAR(loss_depth_pearson(affine, ref, mask).value, 0.0, 1e-10);
    EXPECT_NEAR(loss_depth_pearson(ref, ref, mask).value, 0.0, 1e-10);
    EXPECT_NEAR(loss_depth_pearson(neg, ref, mask).value, 2.0, 1e-10);
}

TEST(DepthLoss, DegenerateVariance)
{
    const Image flat(4, 4, 1, 2.0);
    std::mt19937_64 rng(2);
    const Image ref = random_image(4, 4, 1, rng);
    const ImageLoss l = loss_depth_pearson(flat, ref, Image(4, 4, 1, 1.0));
    EXPECT_EQ(l.value, 1.0);
    for (double g : l.grad.data) EXPECT_EQ(g, 0.0);
}

TEST(DepthLoss, FiniteDifferences)
{
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(200 + seed);
        const Image a = random_image(6, 6, 1, rng, 1, 3), b = random_image(6, 6, 1, rng, 1, 3);
        const Image m = random_mask(6, 6, rng);
        check_image_gradient([&](const Image& x) { return loss_depth_pearson(x, b, m).value; }, a,
                             loss_depth_pearson(a, b, m).grad, rng, seed);
    }
}

TEST(MaskLoss, ClosedForms)
{
    std::mt19937_64 rng(3);
    const Image m = random_mask(8, 8, rng);
    Image inv = m;
    for (double& x : inv.data) x = 1.0 - x;
    EXPECT_EQ(loss_mask(m, m).value, 0.0);
    EXPECT_EQ(loss_mask(inv, m).value, 1.0);
}

TEST(MaskLoss, FiniteDifferencesThroughSoftSilhouette)
{
    const TriMesh base = make_icosphere(0.5, 1);
    const Camera cam = look_at(Vec3(0.2, 0.1, 2.4), Vec3::Zero(), 0.7, 16, 16);
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(300 + seed);
        std::normal_distribution<double> n01;
        TriMesh mesh = base;
        for (Vec3& v : mesh.vertices) v += 0.04 * Vec3(n01(rng), n01(rng), n01(rng));
        update_normals(mesh);
        const RenderBuffers rb = rasterize(mesh, mesh, cam);
        const Image ref = random_mask(16, 16, rng);
        const ImageLoss l = loss_mask(rb.soft_mask, ref);
        BufferGrads bg;
        bg.soft_mask = l.grad;
        const RasterGrads g = rasterize_backward(mesh, mesh, cam, rb, bg);
        std::vector<Vec3> dir(mesh.vertices.size());
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            dir[i] = Vec3(n01(rng), n01(rng), n01(rng));
            analytic += g.posed[i].dot(dir[i]);
        }
        auto at = [&](double h) {
            TriMesh m = mesh;
            for (std::size_t i = 0; i < dir.size(); ++i) m.vertices[i] += h * dir[i];
            update_normals(m);
            return loss_mask(rasterize_frozen(m, m, cam, rb.face_id).soft_mask, ref).value;
        };
        const double h = 1e-6;
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        EXPECT_NEAR(fd, analytic, 1e-4 * std::max(1e-3, std::abs(analytic))) << "seed " << seed;
    }
}

TriMesh planar_grid(int n)
{
    TriMesh m;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) m.vertices.emplace_back(i * 0.1, j * 0.1, 0.0);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int a = j * (n + 1) + i;
            m.faces.push_back({a, a + 1, a + n + 2});
            m.faces.push_back({a, a + n + 2, a + n + 1});
        }
    }
    update_normals(m);
    return m;
}

TEST(LaplacianLoss, FlatGridIsZero)
{
    EXPECT_EQ(loss_laplacian_normal(planar_grid(5)).value, 0.0);
}

TEST(LaplacianLoss, DecreasesWithSubdivision)
{
    double prev = std::numeric_limits<double>::infinity();
    for (int level = 1; level <= 3; ++level) {
        const double v = loss_laplacian_normal(make_icosphere(0.5, level)).value;
        EXPECT_LT(v, prev) << "level " << level;
        prev = v;
    }
}

TEST(LaplacianLoss, FiniteDifferences)
{
    const TriMesh base = make_capped_cylinder(-0.5, 0.5, 0.3, 3, 6);
    ASSERT_EQ(base.vertices.size(), 20u);
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(400 + seed);
        std::normal_distribution<double> n01;
        TriMesh m = base;
        for (Vec3& v : m.vertices) v += 0.05 * Vec3(n01(rng), n01(rng), n01(rng));
        const MeshLoss l = loss_laplacian_normal(m);
        std::vector<Vec3> dir(m.vertices.size());
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            dir[i] = Vec3(n01(rng), n01(rng), n01(rng));
            analytic += l.grad[i].dot(dir[i]);
        }
        auto at = [&](double h) {
            TriMesh q = m;
            for (std::size_t i = 0; i < dir.size(); ++i) q.vertices[i] += h * dir[i];
            return loss_laplacian_normal(q).value;
        };
        const double h = 1e-6;
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        EXPECT_NEAR(fd, analytic, 1e-4 * std::max(1e-3, std::abs(analytic))) << "seed " << seed;
    }
}

TEST(OracleGuidance, ZeroAtTruthAndLinearInLambda)
{
    std::mt19937_64 rng(9);
    const Image a = random_image(5, 5, 3, rng), b = random_image(5, 5, 3, rng);
    const Image m = random_mask(5, 5, rng);
    for (double g : oracle_guidance(a, a, m, 0.3).data) EXPECT_EQ(g, 0.0);
    const Image g1 = oracle_guidance(a, b, m, 0.01), g2 = oracle_guidance(a, b, m, 0.02);
    for (std::size_t i = 0; i < g1.data.size(); ++i) EXPECT_NEAR(g2[i], 2.0 * g1[i], 1e-15);
}

TEST(OracleGuidance, CountsCalls)
{
    OracleGuidance oracle([](const Camera& c, const PoseParams&) { return Image(c.width, c.height, 3, 0.5); });
    const Image r(4, 4, 3, 0.25), m(4, 4, 1, 1.0);
    const PoseParams pose = PoseParams::rest(1, 0);
    GuidanceRequest req;
    req.rendered = &r;
    req.rendered_mask = &m;
    req.novel.width = req.novel.height = 4;
    req.pose = &pose;
    const Image g = oracle.gradient(req);
    EXPECT_EQ(oracle.calls(), 1u);
    EXPECT_DOUBLE_EQ(g[0], -0.25);
}

struct Scene {
    Representation rep;
    PreparedSurface surf;
    PoseParams pose;
    Camera cam;
};

Scene sphere_scene(int seed)
{
    Scene s;
    s.rep.grid = build_tet_grid(10, 1.0);
    analytic_sdf(s.rep.grid, AnalyticShape{Sphere{Vec3::Zero(), 0.55}});
    s.rep.rig = make_procedural_template(TemplateKind::Sphere1);
    TextureConfig tc;
    tc.seed = static_cast<std::uint64_t>(seed);
    s.rep.texture = TextureField(tc);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    for (double& w : s.rep.texture.parameters()) w += 0.1 * n01(rng);
    s.surf = prepare_surface(s.rep);
    s.pose = PoseParams::rest(1, 1);
    s.cam = look_at(Vec3(0.3, 0.4, 2.5), Vec3::Zero(), 0.7, 20, 20);
    return s;
}

// A reference that agrees with every rendered channel, soft silhouette included.
Reference reference_from(const ViewRender& v)
{
    return {v.color, v.buffers.soft_mask, v.buffers.normal, v.buffers.depth};
}

TEST(AssembleRecon, PerfectRenderIsZero)
{
    const Scene s = sphere_scene(1);
    const ViewRender v = render_view(s.rep, s.surf, s.pose, s.cam);
    const LossWeights w;
    const ReconLoss l = assemble_recon_loss(TaskKind::Body, v, reference_from(v), w);
    EXPECT_NEAR(l.terms.total(), 0.0, 1e-12);
}

TEST(AssembleRecon, HandRecipeIsTexturePlusMask)
{
    const Scene s = sphere_scene(2);
    const ViewRender v = render_view(s.rep, s.surf, s.pose, s.cam);
    std::mt19937_64 rng(2);
    Reference ref{random_image(20, 20, 3, rng), random_mask(20, 20, rng), random_image(20, 20, 3, rng),
                  random_image(20, 20, 1, rng)};
    LossWeights w;
    const ReconLoss l = assemble_recon_loss(TaskKind::Hand, v, ref, w, &s.surf.canonical);
    EXPECT_DOUBLE_EQ(l.terms.total(),
                     loss_texture_l2(v.color, ref.color, ref.mask).value + loss_mask(v.buffers.soft_mask, ref.mask).value);
    EXPECT_EQ(l.terms.normal, 0.0);
    EXPECT_EQ(l.terms.depth, 0.0);
    w.lambda_lap = 1.0;
    const ReconLoss with_lap = assemble_recon_loss(TaskKind::Hand, v, ref, w, &s.surf.canonical);
    EXPECT_NEAR(with_lap.terms.total() - l.terms.total(), loss_laplacian_normal(s.surf.canonical).value, 1e-15);
}

TEST(AssembleRecon, TotalGradientIsSumOfTerms)
{
    const Scene s = sphere_scene(3);
    const ViewRender v = render_view(s.rep, s.surf, s.pose, s.cam);
    std::mt19937_64 rng(3);
    Reference ref{random_image(20, 20, 3, rng), random_mask(20, 20, rng), random_image(20, 20, 3, rng, -1, 1),
                  random_image(20, 20, 1, rng, 2, 3)};
    const ReconLoss l = assemble_recon_loss(TaskKind::Body, v, ref, LossWeights{});
    const Image both = intersect_masks(v.buffers.mask, ref.mask);
    const ImageLoss t = loss_texture_l2(v.color, ref.color, ref.mask);
    const ImageLoss n = loss_normal(v.buffers.normal, ref.normal, both);
    const ImageLoss d = loss_depth_pearson(v.buffers.depth, ref.depth, both);
    const ImageLoss m = loss_mask(v.buffers.soft_mask, ref.mask);
    EXPECT_NEAR(l.terms.total(), t.value + n.value + d.value + m.value, 1e-14);
    EXPECT_EQ(l.view.color.data, t.grad.data);
    EXPECT_EQ(l.view.normal.data, n.grad.data);
    EXPECT_EQ(l.view.depth.data, d.grad.data);
    EXPECT_EQ(l.view.soft_mask.data, m.grad.data);
}

TEST(LossWeights, RejectNegative)
{
    LossWeights w;
    w.lambda_sds = -1.0;
    EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(SoftenMask, HalfPlaneFollowsFalloff)
{
    Image m(12, 3, 1);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x) m.at(x, y) = 1.0;
    const SilhouetteOptions opt;
    const Image s = soften_mask(m, opt);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 5; ++x) EXPECT_EQ(s.at(x, y), 1.0);
        EXPECT_DOUBLE_EQ(s.at(5, y), opt.falloff(0.5));
        EXPECT_DOUBLE_EQ(s.at(6, y), opt.falloff(1.5));
        for (int x = 7; x < 12; ++x) EXPECT_EQ(s.at(x, y), 0.0);
    }
    EXPECT_GT(s.at(5, 0), s.at(6, 0));
    EXPECT_GT(s.at(6, 0), 0.0);
    EXPECT_THROW(soften_mask(Image(2, 2, 3)), std::invalid_argument);
}

}  // namespace
