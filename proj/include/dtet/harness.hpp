#pragma once

// Synthetic few-shot benchmarks: analytic ground-truth shapes skinned to the
// procedural templates, posed training shots, canonical-pose evaluation views,
// metrics, and animation.

#include "dtet/io.hpp"
#include "dtet/metrics.hpp"
#include "dtet/optimize.hpp"

#include <charconv>

namespace dtet {

inline constexpr double kShotCameraDistance = 3.0;
inline constexpr double kShotFov = 0.62;
inline constexpr double kShotElevation = 0.15;
inline constexpr int kBenchmarkFormatVersion = 1;

enum class BenchmarkVariant { Standard, PaintedBack };
enum class CameraLayout { Auto, Front };

inline std::string to_string(BenchmarkVariant v) { return v == BenchmarkVariant::Standard ? "standard" : "painted-back"; }
inline std::string to_string(CameraLayout l) { return l == CameraLayout::Auto ? "auto" : "front"; }

inline BenchmarkVariant benchmark_variant_from_string(const std::string& s)
{
    if (s == "standard") return BenchmarkVariant::Standard;
    if (s == "painted-back") return BenchmarkVariant::PaintedBack;
    throw std::invalid_argument("unknown variant '" + s + "' (expected standard or painted-back)");
}

inline CameraLayout camera_layout_from_string(const std::string& s)
{
    if (s == "auto") return CameraLayout::Auto;
    if (s == "front") return CameraLayout::Front;
    throw std::invalid_argument("unknown layout '" + s + "' (expected auto or front)");
}

// ---------------------------------------------------------------------------
// Ground truth

/// Analytic shape per template: a perturbed, thicker version of the template
/// so that fitting has real work to do.
inline AnalyticShape ground_truth_shape(TemplateKind kind)
{
    switch (kind) {
    case TemplateKind::Sphere1:
        return AnalyticShape{Sphere{Vec3::Zero(), 0.5}};
    case TemplateKind::Cylinder2:
        return AnalyticShape{Capsule{{-0.6, 0, 0}, {0.6, 0, 0}, 0.23}, Sphere{{0.35, 0.08, 0.05}, 0.2}};
    case TemplateKind::Biped5:
    case TemplateKind::Hand6: {
        const ProceduralSkeleton s = kind == TemplateKind::Biped5 ? biped_skeleton() : hand_skeleton();
        AnalyticShape shape = s.shape;
        for (Primitive& p : shape.parts) std::visit([](auto& x) { x.radius *= 1.1; }, p);
        return shape;
    }
    }
    throw std::invalid_argument("unknown template kind");
}

/// Smooth procedural albedo; the painted-back variant turns z < 0 red.
inline ColorFunction ground_truth_texture(BenchmarkVariant variant)
{
    return [variant](const Vec3& p) {
        Vec3 c(0.55 + 0.25 * std::sin(2.1 * p.x() + 0.4) * std::cos(1.3 * p.y()),
               0.5 + 0.25 * std::sin(1.7 * p.y() + 0.8 * p.z() + 1.1),
               0.45 + 0.25 * std::cos(1.9 * p.z() - 0.6 * p.x()));
        if (variant == BenchmarkVariant::PaintedBack) {
            const double w = detail::smoothstep(0.1, -0.1, p.z());
            c = (1.0 - w) * c + w * Vec3(0.85, 0.2, 0.15);
        }
        return c;
    };
}

struct GroundTruth {
    TemplateKind kind = TemplateKind::Sphere1;
    BenchmarkVariant variant = BenchmarkVariant::Standard;
    RiggedTemplate rig;
    TriMesh mesh;  // canonical
    SkinningBinding binding;
    ColorFunction color;

    ViewRender render(const Camera& camera, const PoseParams& pose) const { return render_mesh(mesh, binding, rig, pose, camera, color); }
};

inline GroundTruth make_ground_truth(TemplateKind kind, BenchmarkVariant variant, int mesh_resolution = 80)
{
    GroundTruth gt;
    gt.kind = kind;
    gt.variant = variant;
    gt.rig = make_procedural_template(kind);
    gt.mesh = detail::mesh_shape(ground_truth_shape(kind), mesh_resolution);
    gt.binding = bind(gt.mesh, gt.rig);
    gt.color = ground_truth_texture(variant);
    return gt;
}

// ---------------------------------------------------------------------------
// Poses

struct JointLimits {
    std::vector<Vec3> lo;  // per joint, per axis-angle component
    std::vector<Vec3> hi;
    double expression_lo = 0.0;
    double expression_hi = 0.0;
};

/// The sphere has a single root joint and is only ever shown at rest.
inline JointLimits joint_limits(TemplateKind kind)
{
    JointLimits l;
    auto add = [&](Vec3 lo, Vec3 hi) {
        l.lo.push_back(lo);
        l.hi.push_back(hi);
    };
    switch (kind) {
    case TemplateKind::Sphere1:
        add(Vec3::Zero(), Vec3::Zero());
        break;
    case TemplateKind::Cylinder2:
        add(Vec3::Zero(), Vec3::Zero());
        add(Vec3(-0.3, -0.4, -1.2), Vec3(0.3, 0.4, 1.2));
        l.expression_hi = 1.0;
        break;
    case TemplateKind::Biped5:
        add(Vec3(0, -0.5, 0), Vec3(0, 0.5, 0));
        add(Vec3(-0.3, -0.3, -0.3), Vec3(0.3, 0.3, 0.3));
        add(Vec3(-0.4, -0.4, -0.4), Vec3(0.4, 0.4, 0.4));
        add(Vec3(-0.8, 0, -0.3), Vec3(0.8, 0, 0.3));
        add(Vec3(-0.8, 0, -0.3), Vec3(0.8, 0, 0.3));
        l.expression_hi = 1.0;
        break;
    case TemplateKind::Hand6:
        add(Vec3::Zero(), Vec3::Zero());
        for (int f = 0; f < 4; ++f) add(Vec3(-1.0, 0, -0.2), Vec3(0.2, 0, 0.2));
        add(Vec3(-0.4, -0.4, -0.4), Vec3(0.4, 0.4, 0.4));
        l.expression_hi = 1.0;
        break;
    }
    return l;
}

/// Closest distance between segments [p1, q1] and [p2, q2].
inline double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2)
{
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    constexpr double eps = 1e-18;
    double s = 0.0, t = 0.0;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2), denom = a * e - b * b;
            s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

/// Bone capsules that are apart at rest must stay apart in the pose.
/// Parent-child pairs and pairs already touching at rest are not tested.
inline bool self_occlusion_free(const RiggedTemplate& rig, const PoseParams& pose)
{
    const std::vector<BoneSegment> segs = bone_segments(rig);
    const std::vector<BoneTransform> fk = forward_kinematics(rig, pose.rotations);
    const int nb = rig.num_bones();
    for (int i = 0; i < nb; ++i) {
        for (int j = i + 1; j < nb; ++j) {
            if (rig.parents[i] == j || rig.parents[j] == i) continue;
            const double r = segs[i].radius + segs[j].radius;
            if (segment_segment_distance(segs[i].start, segs[i].end, segs[j].start, segs[j].end) <= r) continue;
            const double d = segment_segment_distance(fk[i].apply(segs[i].start), fk[i].apply(segs[i].end), fk[j].apply(segs[j].start),
                                                      fk[j].apply(segs[j].end));
            if (d <= r) return false;
        }
    }
    return true;
}

inline constexpr int kMaxPoseRejections = 100;

/// Uniform within the joint limits, redrawn until self-occlusion free.
template <typename Rng>
PoseParams sample_pose(const RiggedTemplate& rig, const JointLimits& limits, Rng& rng)
{
    if (static_cast<int>(limits.lo.size()) != rig.num_bones()) throw std::invalid_argument("joint limits do not match the template");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 0; attempt < kMaxPoseRejections; ++attempt) {
        PoseParams p = PoseParams::rest(rig.num_bones(), rig.num_expressions());
        for (int b = 0; b < rig.num_bones(); ++b)
            for (int c = 0; c < 3; ++c) p.rotations[b][c] = limits.lo[b][c] + (limits.hi[b][c] - limits.lo[b][c]) * u(rng);
        for (Eigen::Index k = 0; k < p.expression.size(); ++k)
            p.expression[k] = limits.expression_lo + (limits.expression_hi - limits.expression_lo) * u(rng);
        if (self_occlusion_free(rig, p)) return p;
    }
    throw std::runtime_error("pose sampling: self-occlusion filter rejected " + std::to_string(kMaxPoseRejections) +
                             " consecutive samples");
}

// ---------------------------------------------------------------------------
// Cameras

/// Azimuths of the training cameras. Auto: front/back for 2, plus left/right
/// for 4, a 45-degree ring for 8, an even ring otherwise. Front: spread over
/// +-30 degrees around the front.
inline std::vector<double> layout_azimuths(int n, CameraLayout layout)
{
    if (n < 1) throw std::invalid_argument("layout: need at least one camera");
    std::vector<double> az;
    if (layout == CameraLayout::Front) {
        for (int i = 0; i < n; ++i) az.push_back(n == 1 ? 0.0 : -kPi / 6.0 + (kPi / 3.0) * i / (n - 1));
    } else if (n == 4) {
        az = {0.0, kPi, 0.5 * kPi, 1.5 * kPi};
    } else {
        for (int i = 0; i < n; ++i) az.push_back(2.0 * kPi * i / n);
    }
    return az;
}

inline std::vector<Camera> training_cameras(int n, CameraLayout layout, int resolution)
{
    std::vector<Camera> cams;
    for (double a : layout_azimuths(n, layout))
        cams.push_back(orbit_camera(a, kShotElevation, kShotCameraDistance, Vec3::Zero(), kShotFov, resolution, resolution));
    return cams;
}

/// Fibonacci-sphere viewpoints looking at the origin.
inline std::vector<Camera> evaluation_cameras(int count = 24, int resolution = 256)
{
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(1.0 - y * y);
        const Vec3 dir(r * std::cos(golden * i), y, r * std::sin(golden * i));
        cams.push_back(look_at(kShotCameraDistance * dir, Vec3::Zero(), kShotFov, resolution, resolution));
    }
    return cams;
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkSpec {
    TemplateKind kind = TemplateKind::Sphere1;
    BenchmarkVariant variant = BenchmarkVariant::Standard;
    CameraLayout layout = CameraLayout::Auto;
    int shots = 4;
    std::uint64_t seed = 0;
    int resolution = 128;
    int eval_views = 24;
    int eval_resolution = 256;
    int gt_mesh_resolution = 80;
    std::optional<std::vector<std::string>> regions;  // unset: "head" for the biped, none otherwise

    std::vector<std::string> resolved_regions() const
    {
        if (regions) return *regions;
        if (kind == TemplateKind::Biped5) return {"head"};
        return {};
    }

    void validate() const
    {
        if (shots < 1) throw std::invalid_argument("benchmark: shots must be at least 1");
        if (resolution < 8 || eval_resolution < 16) throw std::invalid_argument("benchmark: resolution too small");
        if (eval_views < 1) throw std::invalid_argument("benchmark: eval_views must be at least 1");
        if (gt_mesh_resolution < 8) throw std::invalid_argument("benchmark: gt_mesh_resolution too small");
    }
};

inline nlohmann::json to_json(const BenchmarkSpec& s)
{
    return {{"format", "dtet-benchmark"},
            {"version", kBenchmarkFormatVersion},
            {"template", to_string(s.kind)},
            {"variant", to_string(s.variant)},
            {"layout", to_string(s.layout)},
            {"shots", s.shots},
            {"seed", s.seed},
            {"resolution", s.resolution},
            {"eval_views", s.eval_views},
            {"eval_resolution", s.eval_resolution},
            {"gt_mesh_resolution", s.gt_mesh_resolution},
            {"regions", s.resolved_regions()}};
}

inline BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j)
{
    BenchmarkSpec s;
    try {
        if (j.at("format").get<std::string>() != "dtet-benchmark") throw std::invalid_argument("not a benchmark description");
        if (j.at("version").get<int>() != kBenchmarkFormatVersion) throw std::invalid_argument("unsupported benchmark version");
        s.kind = template_kind_from_string(j.at("template").get<std::string>());
        s.variant = benchmark_variant_from_string(j.at("variant").get<std::string>());
        s.layout = camera_layout_from_string(j.at("layout").get<std::string>());
        s.shots = j.at("shots").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.resolution = j.at("resolution").get<int>();
        s.eval_views = j.at("eval_views").get<int>();
        s.eval_resolution = j.at("eval_resolution").get<int>();
        s.gt_mesh_resolution = j.at("gt_mesh_resolution").get<int>();
        s.regions = j.at("regions").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("benchmark.json: ") + e.what());
    }
    s.validate();
    return s;
}

struct EvalView {
    Camera camera;
    Image color;
    Image mask;
};

struct Benchmark {
    BenchmarkSpec spec;
    GroundTruth truth;
    ShotSet shots;
    std::vector<EvalView> eval;
};

namespace detail {

// Quantise to what the on-disk formats store, so in-memory and reloaded
// benchmarks are identical.
inline Image quantize_8bit(Image img)
{
    for (double& x : img.data) x = static_cast<double>(to_byte(x)) / 255.0;
    return img;
}

inline Image quantize_float(Image img)
{
    for (double& x : img.data) x = static_cast<double>(static_cast<float>(x));
    return img;
}

inline Reference reference_from(const ViewRender& v)
{
    // The soft mask is derived from the binary mask at fit time, as for loaded shots.
    return {quantize_8bit(v.color), quantize_8bit(v.buffers.mask), quantize_float(v.buffers.normal), quantize_float(v.buffers.depth), Image{}};
}

}  // namespace detail

inline Benchmark generate_benchmark(const BenchmarkSpec& spec)
{
    spec.validate();
    Benchmark b;
    b.spec = spec;
    b.truth = make_ground_truth(spec.kind, spec.variant, spec.gt_mesh_resolution);
    const RiggedTemplate& rig = b.truth.rig;
    for (const std::string& r : spec.resolved_regions()) rig.joint_index(r);

    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x62656e63u};
    std::mt19937_64 rng(seq);
    const JointLimits limits = joint_limits(spec.kind);
    const std::vector<Camera> cams = training_cameras(spec.shots, spec.layout, spec.resolution);
    for (int i = 0; i < spec.shots; ++i) {
        Shot s;
        s.camera = cams[i];
        s.pose = sample_pose(rig, limits, rng);
        s.reference = detail::reference_from(b.truth.render(s.camera, s.pose));
        for (const std::string& joint : spec.resolved_regions()) {
            RegionShot r;
            r.joint = joint;
            r.camera = region_camera(rig, s.pose, s.camera, joint, spec.resolution);
            r.reference = detail::reference_from(b.truth.render(r.camera, s.pose));
            s.regions.push_back(std::move(r));
        }
        b.shots.push_back(std::move(s));
    }
    const PoseParams rest = PoseParams::rest(rig.num_bones(), rig.num_expressions());
    for (const Camera& c : evaluation_cameras(spec.eval_views, spec.eval_resolution)) {
        const ViewRender v = b.truth.render(c, rest);
        b.eval.push_back({c, detail::quantize_8bit(v.color), detail::quantize_8bit(v.buffers.mask)});
    }
    return b;
}

/// Rebuilds the oracle from a benchmark's ground truth; novel views are
/// rendered with the requested shot's pose.
inline OracleGuidance make_oracle(const GroundTruth& truth)
{
    return OracleGuidance([&truth](const Camera& c, const PoseParams& p) { return truth.render(c, p).color; });
}

// ---------------------------------------------------------------------------
// Disk layout
//
//   benchmark.json, template.json, gt_mesh.obj
//   shots/<i>/{color.png, mask.png, normal.pfm, depth.pfm, camera.txt, pose.txt}
//   shots/<i>/region_<joint>/{color.png, mask.png, normal.pfm, depth.pfm, camera.txt}
//   eval/<k>/{color.png, mask.png, camera.txt}

inline void write_pose_line(std::ostream& out, const PoseParams& p)
{
    out << std::setprecision(17);
    bool first = true;
    auto put = [&](double x) {
        out << (first ? "" : " ") << x;
        first = false;
    };
    for (const Vec3& r : p.rotations)
        for (int c = 0; c < 3; ++c) put(r[c]);
    for (Eigen::Index k = 0; k < p.expression.size(); ++k) put(p.expression[k]);
    for (int c = 0; c < 3; ++c) put(p.translation[c]);
    out << '\n';
}

inline void write_pose_sequence(const fs::path& path, std::span<const PoseParams> poses)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "'");
    for (const PoseParams& p : poses) write_pose_line(out, p);
}

namespace detail {

inline void write_reference(const fs::path& dir, const Reference& r, const Camera& c)
{
    fs::create_directories(dir);
    write_png(dir / "color.png", r.color);
    write_png(dir / "mask.png", r.mask);
    if (r.normal.width > 0) write_pfm(dir / "normal.pfm", r.normal);
    if (r.depth.width > 0) write_pfm(dir / "depth.pfm", r.depth);
    write_camera(dir / "camera.txt", c);
}

inline Reference read_reference(const fs::path& dir)
{
    Reference r;
    r.color = read_png(dir / "color.png", 3);
    r.mask = read_png(dir / "mask.png", 1);
    if (fs::exists(dir / "normal.pfm")) r.normal = read_pfm(dir / "normal.pfm");
    if (fs::exists(dir / "depth.pfm")) r.depth = read_pfm(dir / "depth.pfm");
    return r;
}

/// Subdirectories named 0..n-1, in numeric order.
inline std::vector<fs::path> numbered_dirs(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw std::invalid_argument("'" + dir.string() + "' is not a directory");
    std::vector<int> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_directory()) continue;
        const std::string name = e.path().filename().string();
        int v = 0;
        const auto [p, ec] = std::from_chars(name.data(), name.data() + name.size(), v);
        if (ec == std::errc() && p == name.data() + name.size() && v >= 0) ids.push_back(v);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != static_cast<int>(i)) throw std::invalid_argument("'" + dir.string() + "': numbered directories are not 0..n-1");
    std::vector<fs::path> out;
    for (int id : ids) out.push_back(dir / std::to_string(id));
    return out;
}

}  // namespace detail

inline void write_benchmark(const Benchmark& b, const fs::path& dir)
{
    fs::create_directories(dir);
    detail::write_json(dir / "benchmark.json", to_json(b.spec));
    write_rig(dir / "template.json", b.truth.rig);
    write_obj(dir / "gt_mesh.obj", b.truth.mesh);
    for (std::size_t i = 0; i < b.shots.size(); ++i) {
        const Shot& s = b.shots[i];
        const fs::path sd = dir / "shots" / std::to_string(i);
        detail::write_reference(sd, s.reference, s.camera);
        write_pose_sequence(sd / "pose.txt", std::span<const PoseParams>(&s.pose, 1));
        for (const RegionShot& r : s.regions) detail::write_reference(sd / ("region_" + r.joint), r.reference, r.camera);
    }
    for (std::size_t k = 0; k < b.eval.size(); ++k) {
        const fs::path ed = dir / "eval" / std::to_string(k);
        fs::create_directories(ed);
        write_png(ed / "color.png", b.eval[k].color);
        write_png(ed / "mask.png", b.eval[k].mask);
        write_camera(ed / "camera.txt", b.eval[k].camera);
    }
}

inline BenchmarkSpec read_benchmark_spec(const fs::path& dir) { return benchmark_spec_from_json(detail::read_json(dir / "benchmark.json")); }

/// Loads numbered shot directories and validates them against the template.
inline ShotSet load_shots(const fs::path& dir, const RiggedTemplate& rig)
{
    ShotSet shots;
    for (const fs::path& sd : detail::numbered_dirs(dir)) {
        Shot s;
        s.reference = detail::read_reference(sd);
        s.camera = read_camera(sd / "camera.txt");
        const auto poses = read_pose_sequence(sd / "pose.txt", rig.num_bones(), rig.num_expressions());
        if (poses.size() != 1) throw std::invalid_argument("'" + (sd / "pose.txt").string() + "' must hold exactly one pose");
        s.pose = poses[0];
        std::vector<fs::path> regions;
        for (const auto& e : fs::directory_iterator(sd))
            if (e.is_directory() && e.path().filename().string().rfind("region_", 0) == 0) regions.push_back(e.path());
        std::sort(regions.begin(), regions.end());
        for (const fs::path& rd : regions) {
            RegionShot r;
            r.joint = rd.filename().string().substr(7);
            r.reference = detail::read_reference(rd);
            r.camera = read_camera(rd / "camera.txt");
            s.regions.push_back(std::move(r));
        }
        shots.push_back(std::move(s));
    }
    validate_shots(shots, rig);
    return shots;
}

inline std::vector<EvalView> load_eval_views(const fs::path& dir)
{
    std::vector<EvalView> views;
    for (const fs::path& ed : detail::numbered_dirs(dir))
        views.push_back({read_camera(ed / "camera.txt"), read_png(ed / "color.png", 3), read_png(ed / "mask.png", 1)});
    if (views.empty()) throw std::invalid_argument("'" + dir.string() + "' holds no evaluation views");
    return views;
}

// ---------------------------------------------------------------------------
// Fitted representations on disk

inline Representation load_representation(const fs::path& checkpoint, const RiggedTemplate& rig)
{
    std::ifstream in(checkpoint, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + checkpoint.string() + "'");
    ParameterStore s;
    s.rep.rig = rig;
    s.rep.texture = TextureField(TextureConfig{});
    read_checkpoint(in, s);
    return std::move(s.rep);
}

// ---------------------------------------------------------------------------
// Evaluation

struct ViewMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
    double iou = 0.0;
};

struct EvalReport {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_iou = 0.0;
    double chamfer = 0.0;
    nlohmann::json config;
    double runtime_seconds = 0.0;  // wall clock; kept out of the JSON so reports are reproducible

    nlohmann::json to_json() const
    {
        nlohmann::json v = nlohmann::json::array();
        for (const ViewMetrics& m : views) v.push_back({{"psnr", m.psnr}, {"ssim", m.ssim}, {"iou", m.iou}});
        return {{"views", v},       {"mean_psnr", mean_psnr}, {"mean_ssim", mean_ssim},
                {"mean_iou", mean_iou}, {"chamfer", chamfer},     {"config", config}};
    }
};

/// Canonical-pose renders against the evaluation views, plus Chamfer.
inline EvalReport evaluate(const Representation& rep, std::span<const EvalView> views, const TriMesh& truth_mesh,
                           nlohmann::json config = nlohmann::json::object(), int chamfer_samples = 10000)
{
    const PreparedSurface surf = prepare_surface(rep);
    if (surf.canonical.faces.empty()) throw std::runtime_error("evaluate: the representation has no surface");
    const PoseParams rest = PoseParams::rest(rep.rig.num_bones(), rep.rig.num_expressions());
    EvalReport r;
    for (const EvalView& ev : views) {
        const ViewRender v = render_view(rep, surf, rest, ev.camera);
        const Image color = detail::quantize_8bit(v.color);
        ViewMetrics m{psnr(color, ev.color), ssim(color, ev.color), mask_iou(v.buffers.mask, ev.mask)};
        r.mean_psnr += m.psnr;
        r.mean_ssim += m.ssim;
        r.mean_iou += m.iou;
        r.views.push_back(m);
    }
    const double n = static_cast<double>(views.size());
    r.mean_psnr /= n;
    r.mean_ssim /= n;
    r.mean_iou /= n;
    r.chamfer = chamfer(surf.canonical, truth_mesh, chamfer_samples);
    r.config = std::move(config);
    return r;
}

/// Mean squared colour error over pixels showing the back (canonical z < 0)
/// of the ground truth in both renders, from evaluation cameras behind the object.
inline double back_hemisphere_l2(const Representation& rep, const GroundTruth& truth, std::span<const Camera> cameras)
{
    const PreparedSurface surf = prepare_surface(rep);
    const PoseParams rest = PoseParams::rest(rep.rig.num_bones(), rep.rig.num_expressions());
    double sum = 0.0;
    std::size_t count = 0;
    for (const Camera& c : cameras) {
        if (c.position.z() >= 0.0) continue;
        const ViewRender fit = render_view(rep, surf, rest, c);
        const ViewRender gt = truth.render(c, rest);
        for (std::size_t p = 0; p < gt.buffers.mask.data.size(); ++p) {
            if (!(gt.buffers.mask[p] > 0.5 && fit.buffers.mask[p] > 0.5 && gt.buffers.surface_points[3 * p + 2] < 0.0)) continue;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = fit.color[3 * p + ch] - gt.color[3 * p + ch];
                sum += d * d;
            }
            ++count;
        }
    }
    if (count == 0) throw std::runtime_error("back_hemisphere_l2: no back-facing pixels visible");
    return sum / (3.0 * static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Animation

struct AnimationFrame {
    Image color;
    TriMesh posed;
};

inline std::vector<AnimationFrame> animate(const Representation& rep, std::span<const PoseParams> poses, const Camera& camera)
{
    const PreparedSurface surf = prepare_surface(rep);
    std::vector<AnimationFrame> frames;
    for (const PoseParams& p : poses) {
        check_pose(rep.rig, p);
        ViewRender v = render_view(rep, surf, p, camera);
        frames.push_back({std::move(v.color), std::move(v.posed)});
    }
    return frames;
}

}  // namespace dtet
