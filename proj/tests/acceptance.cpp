// Acceptance run: one PASS/FAIL line per criterion. Pass criterion ids
// (A1 ... A7) as arguments to run a subset. Exit status is nonzero if any
// selected criterion fails.

#include "dtet/cli.hpp"

#include <chrono>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace {

using namespace dtet;
using Clock = std::chrono::steady_clock;

constexpr int kSeeds = 24;
constexpr double kGradTolerance = 1e-4;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int digits = 4)
{
    std::ostringstream o;
    o << std::setprecision(digits) << x;
    return o.str();
}

void info(const std::string& line) { std::cout << "   " << line << std::endl; }

bool report(const std::string& id, bool pass, const std::string& detail)
{
    std::cout << id << ' ' << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
    return pass;
}

double relative_error(double fd, double analytic)
{
    const double scale = std::max(std::abs(fd), std::abs(analytic));
    return scale == 0.0 ? 0.0 : std::abs(fd - analytic) / scale;
}

template <typename F>
double central_difference(F f, double h = 1e-6)
{
    return (f(h) - f(-h)) / (2.0 * h);
}

Image random_image(int w, int h, int c, std::mt19937_64& rng, double lo, double hi)
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

std::vector<Vec3> random_vectors(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> n01;
    std::vector<Vec3> v(n);
    for (Vec3& x : v) x = scale * Vec3(n01(rng), n01(rng), n01(rng));
    return v;
}

// ---------------------------------------------------------------------------
// A1: gradient paths against central differences

double check_surface(int seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TetGrid g = build_tet_grid(3, 1.0);
    for (std::size_t i = 0; i < g.num_vertices(); ++i) {
        double s = u(rng);
        if (std::abs(s) < 0.05) s = s < 0 ? -0.05 : 0.05;
        g.sdf[i] = s;
        g.displacement[i] = Vec3(u(rng), u(rng), u(rng)) * 0.3 * g.max_displacement();
    }
    const TriMesh m = extract_surface(g);
    if (m.empty()) return 1.0;
    const std::vector<Vec3> w = random_vectors(m.vertices.size(), rng);
    const GridGradients an = surface_gradients(g, m, w);
    std::vector<double> ds(g.num_vertices());
    std::vector<Vec3> dd = random_vectors(g.num_vertices(), rng);
    std::normal_distribution<double> n01;
    double analytic = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ds[i] = n01(rng);
        analytic += an.sdf[i] * ds[i] + an.displacement[i].dot(dd[i]);
    }
    const double fd = central_difference([&](double h) {
        TetGrid p = g;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            p.sdf[i] += h * ds[i];
            p.displacement[i] += h * dd[i];
        }
        const TriMesh mm = extract_surface(p);
        if (mm.faces != m.faces) throw std::logic_error("topology changed inside the stencil");
        double l = 0.0;
        for (std::size_t i = 0; i < mm.vertices.size(); ++i) l += w[i].dot(mm.vertices[i]);
        return l;
    });
    return relative_error(fd, analytic);
}

double check_deform(int seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    const RiggedTemplate t = make_procedural_template(TemplateKind::Biped5);
    TriMesh m;
    for (int i = 0; i < 12; ++i) m.vertices.emplace_back(0.4 * u(rng), u(rng), 0.3 * u(rng));
    const SkinningBinding b = dtet::bind(m, t);
    PoseParams pose = PoseParams::rest(t.num_bones(), t.num_expressions());
    for (Vec3& r : pose.rotations) r = Vec3(u(rng), u(rng), u(rng));
    for (Eigen::Index k = 0; k < pose.expression.size(); ++k) pose.expression[k] = u(rng);
    pose.translation = Vec3(u(rng), u(rng), u(rng));
    const auto J = deform_gradients(b, t, pose);
    const std::vector<Vec3> dir = random_vectors(m.vertices.size(), rng);
    const std::vector<Vec3> w = random_vectors(m.vertices.size(), rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) analytic += w[i].dot(J[i] * dir[i]);
    const double fd = central_difference([&](double h) {
        std::vector<Vec3> p = m.vertices;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += h * dir[i];
        const std::vector<Vec3> q = deform_points(p, b, t, pose);
        double l = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) l += w[i].dot(q[i]);
        return l;
    });
    return relative_error(fd, analytic);
}

double check_texture_field(int seed)
{
    TextureConfig cfg;
    cfg.seed = seed;
    TextureField tex(cfg);
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> n01;
    for (double& w : tex.parameters()) w += 0.2 * n01(rng);
    Eigen::Matrix3Xd pts(3, 9), g(3, 9), xdir(3, 9);
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
        pts.data()[i] = 0.6 * n01(rng);
        g.data()[i] = n01(rng);
        xdir.data()[i] = n01(rng);
    }
    TextureField::Cache cache;
    tex.evaluate(pts, &cache);
    std::vector<double> pg(tex.num_parameters(), 0.0);
    Eigen::Matrix3Xd xg;
    tex.backward(cache, g, pg, &xg);
    std::vector<double> dir(pg.size());
    for (double& d : dir) d = 0.1 * n01(rng);
    double analytic = (xg.array() * xdir.array()).sum();
    for (std::size_t i = 0; i < pg.size(); ++i) analytic += pg[i] * dir[i];
    const std::vector<double> w0 = tex.parameters();
    const double fd = central_difference([&](double h) {
        for (std::size_t i = 0; i < w0.size(); ++i) tex.parameters()[i] = w0[i] + h * dir[i];
        return (tex.evaluate(Eigen::Matrix3Xd(pts + h * xdir)).array() * g.array()).sum();
    });
    return relative_error(fd, analytic);
}

template <typename Loss>
double check_image_loss(Loss loss, const Image& x, std::mt19937_64& rng)
{
    const ImageLoss l = loss(x);
    std::normal_distribution<double> n01;
    Image dir(x.width, x.height, x.channels);
    for (double& d : dir.data) d = n01(rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) analytic += l.grad[i] * dir[i];
    const double fd = central_difference([&](double h) {
        Image y = x;
        for (std::size_t i = 0; i < y.data.size(); ++i) y[i] += h * dir[i];
        return loss(y).value;
    });
    return relative_error(fd, analytic);
}

double check_texture_loss(int seed)
{
    std::mt19937_64 rng(seed);
    const Image a = random_image(6, 5, 3, rng, 0, 1), b = random_image(6, 5, 3, rng, 0, 1);
    const Image m = random_mask(6, 5, rng);
    return check_image_loss([&](const Image& x) { return loss_texture_l2(x, b, m); }, a, rng);
}

double check_normal_loss(int seed)
{
    std::mt19937_64 rng(100 + seed);
    const Image a = random_image(5, 5, 3, rng, -1, 1), b = random_image(5, 5, 3, rng, -1, 1);
    const Image m = random_mask(5, 5, rng);
    return check_image_loss([&](const Image& x) { return loss_normal(x, b, m); }, a, rng);
}

double check_depth_loss(int seed)
{
    std::mt19937_64 rng(200 + seed);
    const Image a = random_image(6, 6, 1, rng, 1, 3), b = random_image(6, 6, 1, rng, 1, 3);
    const Image m = random_mask(6, 6, rng);
    return check_image_loss([&](const Image& x) { return loss_depth_pearson(x, b, m); }, a, rng);
}

double check_mask_loss(int seed)
{
    std::mt19937_64 rng(300 + seed);
    const Image a = random_image(6, 6, 1, rng, 0, 1), b = random_image(6, 6, 1, rng, 0, 1);
    return check_image_loss([&](const Image& x) { return loss_mask(x, b); }, a, rng);
}

double check_laplacian(int seed)
{
    std::mt19937_64 rng(400 + seed);
    TriMesh m = make_capped_cylinder(-0.5, 0.5, 0.3, 3, 6);
    for (Vec3& v : m.vertices) v += random_vectors(1, rng, 0.05)[0];
    const MeshLoss l = loss_laplacian_normal(m);
    const std::vector<Vec3> dir = random_vectors(m.vertices.size(), rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) analytic += l.grad[i].dot(dir[i]);
    const double fd = central_difference([&](double h) {
        TriMesh q = m;
        for (std::size_t i = 0; i < dir.size(); ++i) q.vertices[i] += h * dir[i];
        return loss_laplacian_normal(q).value;
    });
    return relative_error(fd, analytic);
}

double check_soft_silhouette(int seed)
{
    std::mt19937_64 rng(500 + seed);
    TriMesh mesh = make_icosphere(0.5, 1);
    for (Vec3& v : mesh.vertices) v += random_vectors(1, rng, 0.04)[0];
    update_normals(mesh);
    const Camera cam = look_at(Vec3(0.2, 0.1, 2.4), Vec3::Zero(), 0.7, 16, 16);
    const RenderBuffers rb = rasterize(mesh, mesh, cam);
    const Image ref = soften_mask(random_mask(16, 16, rng));
    BufferGrads bg;
    bg.soft_mask = loss_mask(rb.soft_mask, ref).grad;
    const RasterGrads g = rasterize_backward(mesh, mesh, cam, rb, bg);
    const std::vector<Vec3> dir = random_vectors(mesh.vertices.size(), rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) analytic += g.posed[i].dot(dir[i]);
    const double fd = central_difference([&](double h) {
        TriMesh m = mesh;
        for (std::size_t i = 0; i < dir.size(); ++i) m.vertices[i] += h * dir[i];
        update_normals(m);
        return loss_mask(rasterize_frozen(m, m, cam, rb.face_id).soft_mask, ref).value;
    });
    return relative_error(fd, analytic);
}

double check_raster_buffers(int seed)
{
    std::mt19937_64 rng(600 + seed);
    std::normal_distribution<double> n01;
    TriMesh posed = make_icosphere(0.5, 1), canonical = posed;
    for (Vec3& v : posed.vertices) v += random_vectors(1, rng, 0.05)[0];
    for (Vec3& v : canonical.vertices) v += random_vectors(1, rng, 0.05)[0];
    update_normals(posed);
    const Camera cam = look_at(Vec3(0.4, 0.3, 2.5), Vec3::Zero(), 0.6, 24, 24);
    const RenderBuffers rb = rasterize(posed, canonical, cam);
    auto fill = [&](int c) {
        Image im(cam.width, cam.height, c);
        for (double& x : im.data) x = n01(rng);
        return im;
    };
    BufferGrads g;
    g.depth = fill(1);
    g.normal = fill(3);
    g.surface_points = fill(3);
    g.soft_mask = fill(1);
    auto functional = [&](const RenderBuffers& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < b.depth.data.size(); ++i)
            if (b.face_id[i] >= 0) s += g.depth[i] * b.depth[i];
        for (std::size_t i = 0; i < b.normal.data.size(); ++i) s += g.normal[i] * b.normal[i] + g.surface_points[i] * b.surface_points[i];
        for (std::size_t i = 0; i < b.soft_mask.data.size(); ++i) s += g.soft_mask[i] * b.soft_mask[i];
        return s;
    };
    const RasterGrads grads = rasterize_backward(posed, canonical, cam, rb, g);
    const std::vector<Vec3> dp = random_vectors(posed.vertices.size(), rng), dc = random_vectors(posed.vertices.size(), rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < dp.size(); ++i) analytic += grads.posed[i].dot(dp[i]) + grads.canonical[i].dot(dc[i]);
    const double fd = central_difference([&](double h) {
        TriMesh p = posed, c = canonical;
        for (std::size_t i = 0; i < dp.size(); ++i) {
            p.vertices[i] += h * dp[i];
            c.vertices[i] += h * dc[i];
        }
        update_normals(p);
        return functional(rasterize_frozen(p, c, cam, rb.face_id));
    });
    return relative_error(fd, analytic);
}

// Grid and texture parameters through extraction, skinning, rasterization and every loss term.
double check_chain(int seed)
{
    std::mt19937_64 rng(700 + seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u;
    Representation rep;
    rep.grid = build_tet_grid(11, 1.0);
    rep.rig = make_procedural_template(TemplateKind::Cylinder2);
    init_sdf_from_template(rep.grid, rep.rig);
    for (double& w : rep.texture.parameters()) w += 0.1 * n01(rng);
    PoseParams pose = PoseParams::rest(2, rep.rig.num_expressions());
    pose.rotations[1] = Vec3(0.2 * n01(rng), 0.2 * n01(rng), 0.4 + 0.3 * u(rng));
    pose.expression[0] = u(rng);
    pose.translation = Vec3(0.05, 0, 0);
    const Camera cam = orbit_camera(0.25 * seed, 0.3, 3.0, Vec3::Zero(), 0.7, 20, 20);
    const PreparedSurface surf = prepare_surface(rep);
    const ViewRender v = render_view(rep, surf, pose, cam);
    Reference ref;
    ref.color = random_image(20, 20, 3, rng, 0, 1);
    ref.normal = random_image(20, 20, 3, rng, -1, 1);
    ref.depth = random_image(20, 20, 1, rng, 2, 3);
    ref.mask = random_mask(20, 20, rng);
    ref.soft_mask = soften_mask(ref.mask);
    LossWeights weights;
    weights.lambda_lap = 0.5;
    const ReconLoss loss = assemble_recon_loss(TaskKind::Hand, v, ref, weights, &surf.canonical);
    const ReconLoss body = assemble_recon_loss(TaskKind::Body, v, ref, weights);
    GridGradients gg(rep.grid.vertices.size());
    std::vector<double> tg(rep.texture.num_parameters(), 0.0);
    BackwardOptions bo;
    bo.texture_to_geometry = true;
    render_backward(rep, surf, v, loss.view, gg, tg, bo);
    render_backward(rep, surf, v, body.view, gg, tg, bo);
    const GridGradients lap = surface_gradients(rep.grid, surf.canonical, loss.canonical_grads);

    std::vector<double> ds(rep.grid.sdf.size()), dt(tg.size());
    const std::vector<Vec3> dd = random_vectors(ds.size(), rng, 0.01);
    double analytic = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ds[i] = 0.01 * n01(rng);
        analytic += (gg.sdf[i] + lap.sdf[i]) * ds[i] + (gg.displacement[i] + lap.displacement[i]).dot(dd[i]);
    }
    for (std::size_t i = 0; i < dt.size(); ++i) {
        dt[i] = 0.01 * n01(rng);
        analytic += tg[i] * dt[i];
    }
    RenderOptions frozen;
    frozen.frozen_coverage = v.buffers.face_id;
    const double fd = central_difference([&](double h) {
        Representation r = rep;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            r.grid.sdf[i] += h * ds[i];
            r.grid.displacement[i] += h * dd[i];
        }
        for (std::size_t i = 0; i < dt.size(); ++i) r.texture.parameters()[i] += h * dt[i];
        PreparedSurface s;
        s.canonical = extract_surface(r.grid);
        s.binding = surf.binding;
        if (s.canonical.faces != surf.canonical.faces) throw std::logic_error("topology changed inside the stencil");
        const ViewRender w = render_view(r, s, pose, cam, frozen);
        return assemble_recon_loss(TaskKind::Hand, w, ref, weights, &s.canonical).terms.total() +
               assemble_recon_loss(TaskKind::Body, w, ref, weights).terms.total();
    });
    return relative_error(fd, analytic);
}

bool criterion_a1()
{
    const auto t0 = Clock::now();
    const std::vector<std::pair<std::string, std::function<double(int)>>> paths = {
        {"surface extraction", check_surface},   {"skinning deformation", check_deform}, {"texture field", check_texture_field},
        {"texture loss", check_texture_loss},    {"normal loss", check_normal_loss},     {"depth loss", check_depth_loss},
        {"mask loss", check_mask_loss},          {"laplacian loss", check_laplacian},    {"soft silhouette", check_soft_silhouette},
        {"raster buffers", check_raster_buffers}, {"end-to-end chain", check_chain},
    };
    bool ok = true;
    double worst_all = 0.0;
    for (const auto& [name, check] : paths) {
        double worst = 0.0;
        for (int s = 0; s < kSeeds; ++s) worst = std::max(worst, check(s));
        info(name + ": worst relative error " + fmt(worst, 3) + " over " + std::to_string(kSeeds) + " seeds");
        ok &= worst < kGradTolerance;
        worst_all = std::max(worst_all, worst);
    }
    const double t = seconds_since(t0);
    ok &= t < 300.0;
    return report("A1", ok, std::to_string(paths.size()) + " gradient paths x " + std::to_string(kSeeds) + " seeds, worst relative error " +
                                fmt(worst_all, 3) + " (< 1e-4), " + fmt(t, 3) + " s (< 300 s)");
}

// ---------------------------------------------------------------------------
// Fitting helpers

FitConfig acceptance_config(TaskKind task, double lambda_sds)
{
    FitConfig c;
    c.task = task;
    c.iterations = 1000;
    c.lr.steps = {441, 882};  // the default 17k-iteration schedule, scaled to 1k
    c.lambda_sds = lambda_sds;
    c.seed = 1;
    return c;
}

struct FitResult {
    Representation rep;
    double seconds = 0.0;
};

FitResult run_fit(const Benchmark& b, const FitConfig& c, GuidanceModel* guidance)
{
    const auto t0 = Clock::now();
    FitSession f(c, b.shots, b.truth.rig, guidance);
    f.run();
    return {f.representation(), seconds_since(t0)};
}

BenchmarkSpec spec_for(TemplateKind kind, int shots)
{
    BenchmarkSpec s;
    s.kind = kind;
    s.shots = shots;
    s.seed = 1;
    return s;
}

bool criterion_a2()
{
    const auto t0 = Clock::now();
    const Benchmark b = generate_benchmark(spec_for(TemplateKind::Sphere1, 8));
    double init_radius = 0.0;
    for (const Vec3& v : b.truth.rig.vertices) init_radius = std::max(init_radius, v.norm());
    const FitConfig c = acceptance_config(TaskKind::Body, 0.0);
    const FitResult fit = run_fit(b, c, nullptr);
    const EvalReport r = evaluate(fit.rep, b.eval, b.truth.mesh);
    const double total = seconds_since(t0);
    const double spacing = 2.0 / c.grid_resolution;
    double worst_iou = 1.0;
    for (const ViewMetrics& m : r.views) worst_iou = std::min(worst_iou, m.iou);
    info("init radius " + fmt(init_radius) + ", fit " + fmt(fit.seconds) + " s, held-out IoU worst view " + fmt(worst_iou) + ", PSNR " +
         fmt(r.mean_psnr));
    const bool ok = std::abs(init_radius - 0.3) < 1e-9 && r.chamfer < 1.5 * spacing && r.mean_iou > 0.97 && total < 900.0;
    return report("A2", ok, "Chamfer " + fmt(r.chamfer) + " (< " + fmt(1.5 * spacing) + "), held-out IoU " + fmt(r.mean_iou) +
                                " (> 0.97), runtime " + fmt(total) + " s (< 900 s)");
}

bool criterion_a3()
{
    const Benchmark b = generate_benchmark(spec_for(TemplateKind::Cylinder2, 4));
    bool distinct = true;
    for (std::size_t i = 0; i < b.shots.size(); ++i)
        for (std::size_t j = i + 1; j < b.shots.size(); ++j) distinct &= b.shots[i].pose.rotations != b.shots[j].pose.rotations;
    OracleGuidance oracle = make_oracle(b.truth);
    const FitResult fit = run_fit(b, acceptance_config(TaskKind::Body, 0.01), &oracle);
    const EvalReport r = evaluate(fit.rep, b.eval, b.truth.mesh);

    // Rest pose against the raw canonical extraction, vertex for vertex and pixel for pixel.
    const PreparedSurface surf = prepare_surface(fit.rep);
    const PoseParams rest = PoseParams::rest(fit.rep.rig.num_bones(), fit.rep.rig.num_expressions());
    double max_vertex = 0.0, max_pixel = 0.0;
    for (const EvalView& ev : b.eval) {
        const ViewRender v = render_view(fit.rep, surf, rest, ev.camera);
        for (std::size_t i = 0; i < v.posed.vertices.size(); ++i)
            max_vertex = std::max(max_vertex, (v.posed.vertices[i] - surf.canonical.vertices[i]).cwiseAbs().maxCoeff());
        const RenderBuffers direct = rasterize(surf.canonical, surf.canonical, ev.camera);
        for (std::size_t p = 0; p < direct.depth.data.size(); ++p) max_pixel = std::max(max_pixel, std::abs(direct.depth[p] - v.buffers.depth[p]));
        for (std::size_t p = 0; p < direct.normal.data.size(); ++p)
            max_pixel = std::max(max_pixel, std::abs(direct.normal[p] - v.buffers.normal[p]));
    }
    info("fit " + fmt(fit.seconds) + " s, oracle calls " + std::to_string(oracle.calls()) + ", IoU " + fmt(r.mean_iou) + ", Chamfer " +
         fmt(r.chamfer) + ", distinct poses " + (distinct ? "yes" : "no"));
    const bool ok = distinct && r.mean_psnr > 22.0 && r.mean_ssim > 0.90 && max_vertex == 0.0 && max_pixel == 0.0;
    return report("A3", ok, "PSNR " + fmt(r.mean_psnr) + " dB (> 22), SSIM " + fmt(r.mean_ssim) + " (> 0.90), rest-pose difference " +
                                fmt(max_vertex) + " vertex / " + fmt(max_pixel) + " buffer (== 0)");
}

bool criterion_a4()
{
    BenchmarkSpec s = spec_for(TemplateKind::Sphere1, 2);
    s.variant = BenchmarkVariant::PaintedBack;
    s.layout = CameraLayout::Front;
    const Benchmark b = generate_benchmark(s);
    const std::vector<Camera> cams = evaluation_cameras();
    OracleGuidance oracle = make_oracle(b.truth);
    const FitResult guided = run_fit(b, acceptance_config(TaskKind::Body, 0.05), &oracle);
    const FitResult plain = run_fit(b, acceptance_config(TaskKind::Body, 0.0), nullptr);
    const double lg = back_hemisphere_l2(guided.rep, b.truth, cams);
    const double lp = back_hemisphere_l2(plain.rep, b.truth, cams);
    info("fits " + fmt(guided.seconds) + " s / " + fmt(plain.seconds) + " s");
    return report("A4", lg < lp, "back-hemisphere L2 with guidance " + fmt(lg) + " < without " + fmt(lp));
}

bool criterion_a5()
{
    const Benchmark b = generate_benchmark(spec_for(TemplateKind::Hand6, 4));
    // Guidance only reaches texture weights, so it cannot affect this geometric comparison.
    FitConfig on = acceptance_config(TaskKind::Hand, 0.0), off = on;
    on.lambda_lap = 1.0;
    off.lambda_lap = 0.0;
    const FitResult a = run_fit(b, on, nullptr), z = run_fit(b, off, nullptr);
    const TriMesh ma = prepare_surface(a.rep).canonical, mz = prepare_surface(z.rep).canonical;
    const double ea = loss_laplacian_normal(ma).value, ez = loss_laplacian_normal(mz).value;
    const double ca = chamfer(ma, b.truth.mesh), cz = chamfer(mz, b.truth.mesh);
    info("fits " + fmt(a.seconds) + " s / " + fmt(z.seconds) + " s, vertices " + std::to_string(ma.vertices.size()) + " / " +
         std::to_string(mz.vertices.size()));
    return report("A5", ea < ez && ca <= 1.1 * cz,
                  "Laplacian energy " + fmt(ea) + " (lambda 1) < " + fmt(ez) + " (lambda 0); Chamfer " + fmt(ca) + " <= 1.1 x " + fmt(cz));
}

bool criterion_a6()
{
    int grids = 0, spheres = 0;
    bool ok = true;
    for (int n = 1; n <= 16; ++n) {
        const TetGrid g = build_tet_grid(n, 1.0);
        const std::size_t v = static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)), t = static_cast<std::size_t>(6 * n * n * n);
        bool positive = true;
        for (const Tet& tet : g.tets)
            positive &= tet_signed_volume(g.vertices[tet[0]], g.vertices[tet[1]], g.vertices[tet[2]], g.vertices[tet[3]]) > 0.0;
        const bool good = g.vertices.size() == v && g.tets.size() == t && positive;
        if (!good) info("grid resolution " + std::to_string(n) + ": " + std::to_string(g.vertices.size()) + " vertices, " +
                        std::to_string(g.tets.size()) + " tets");
        grids += good;
        ok &= good;
    }
    for (int res : {16, 32, 48}) {
        TetGrid g = build_tet_grid(res, 1.0);
        analytic_sdf(g, AnalyticShape{Sphere{Vec3::Zero(), 0.5}});
        const TriMesh m = extract_surface(g);
        bool outward = true;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) outward &= m.normals[i].dot(m.vertices[i]) > 0.0;
        const bool good = is_closed(m.faces) && is_consistently_oriented(m.faces) && count_components(m.vertices.size(), m.faces) == 1 &&
                          euler_characteristic(m.vertices.size(), m.faces) == 2 && outward;
        info("sphere at resolution " + std::to_string(res) + ": " + std::to_string(m.vertices.size()) + " vertices, " +
             (good ? "watertight, oriented, Euler 2" : "FAILED topology checks"));
        spheres += good;
        ok &= good;
    }
    return report("A6", ok, std::to_string(grids) + "/16 grid resolutions match (n+1)^3 vertices and 6n^3 positive tets; " +
                                std::to_string(spheres) + "/3 sphere meshes watertight, oriented, genus 0");
}

std::map<std::string, std::string> file_tree(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return out;
}

bool criterion_a7()
{
    const fs::path root = fs::temp_directory_path() / ("dtet_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
    {
        std::ofstream(root / "fit.json") << R"({"iterations": 60, "grid_resolution": 24, "checkpoint_every": 20, "seed": 5})";
    }
    std::ostringstream quiet;
    bool ran = true;
    for (const char* run : {"run1", "run2"}) {
        const fs::path d = root / run;
        const std::string bench = (d / "bench").string();
        ran &= run_cli({"generate", "--template", "cylinder-2-bone", "--shots", "2", "--seed", "7", "--resolution", "64", "--eval-resolution",
                        "128", "--out", bench},
                       quiet, std::cerr) == 0;
        ran &= run_cli({"fit", "--config", (root / "fit.json").string(), "--shots", bench + "/shots", "--template", bench + "/template.json",
                        "--out", (d / "fit").string()},
                       quiet, std::cerr) == 0;
        ran &= run_cli({"eval", "--checkpoint", (d / "fit/checkpoint.bin").string(), "--template", bench + "/template.json", "--benchmark",
                        bench, "--config", (root / "fit.json").string(), "--out", (d / "eval").string()},
                       quiet, std::cerr) == 0;
    }
    const auto a = file_tree(root / "run1"), b = file_tree(root / "run2");
    int differing = 0, checkpoints = 0;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != bytes) {
            ++differing;
            info("differs: " + name);
        }
        checkpoints += name.find("checkpoint") != std::string::npos;
    }
    fs::remove_all(root);
    const bool ok = ran && a.size() == b.size() && differing == 0 && checkpoints >= 3 && a.count("eval/report.json") == 1;
    return report("A7", ok, std::to_string(a.size()) + " files from generate + fit + eval compared across two runs (" + std::to_string(checkpoints) +
                                " checkpoints, eval report included), " + std::to_string(differing) + " differ");
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<bool()>>> criteria = {
        {"A1", criterion_a1}, {"A2", criterion_a2}, {"A3", criterion_a3}, {"A4", criterion_a4},
        {"A5", criterion_a5}, {"A6", criterion_a6}, {"A7", criterion_a7},
    };
    std::set<std::string> selected(argv + 1, argv + argc);
    for (const std::string& s : selected)
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == s; })) {
            std::cerr << "unknown criterion '" << s << "'\n";
            return 2;
        }
    bool all = true;
    for (const auto& [id, run] : criteria) {
        if (!selected.empty() && !selected.count(id)) continue;
        try {
            all &= run();
        } catch (const std::exception& e) {
            all &= report(id, false, std::string("error: ") + e.what());
        }
    }
    return all ? 0 : 1;
}
