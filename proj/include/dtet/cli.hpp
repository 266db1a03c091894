#pragma once

// Command-line front end: generate, fit, render, animate, eval.

#include "dtet/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace dtet {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string numbered(const char* prefix, int i, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%04d%s", prefix, i, ext);
    return buf;
}

inline void write_binary(const fs::path& path, const std::function<void(std::ostream&)>& body)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    body(out);
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline PoseParams read_single_pose(const fs::path& path, const RiggedTemplate& rig)
{
    const auto poses = read_pose_sequence(path, rig.num_bones(), rig.num_expressions());
    if (poses.size() != 1) throw std::invalid_argument("'" + path.string() + "' must hold exactly one pose");
    return poses[0];
}

struct GenerateArgs {
    std::string kind;
    int shots = 4;
    std::uint64_t seed = 0;
    fs::path out;
    int resolution = 128;
    std::string layout = "auto";
    std::string variant = "standard";
    int eval_views = 24;
    int eval_resolution = 256;
    int gt_resolution = 80;
    std::vector<std::string> regions;
    bool no_regions = false;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& log)
{
    BenchmarkSpec spec;
    spec.kind = template_kind_from_string(a.kind);
    spec.shots = a.shots;
    spec.seed = a.seed;
    spec.resolution = a.resolution;
    spec.layout = camera_layout_from_string(a.layout);
    spec.variant = benchmark_variant_from_string(a.variant);
    spec.eval_views = a.eval_views;
    spec.eval_resolution = a.eval_resolution;
    spec.gt_mesh_resolution = a.gt_resolution;
    if (a.no_regions) spec.regions = std::vector<std::string>{};
    else if (!a.regions.empty()) spec.regions = a.regions;
    spec.validate();
    if (fs::exists(a.out) && !(fs::is_directory(a.out) && fs::is_empty(a.out)))
        throw std::invalid_argument("output '" + a.out.string() + "' exists and is not an empty directory");
    write_benchmark(generate_benchmark(spec), a.out);
    log << "wrote " << spec.shots << "-shot " << to_string(spec.kind) << " benchmark to " << a.out.string() << '\n';
    return 0;
}

struct FitArgs {
    fs::path config;
    fs::path shots;
    fs::path rig;
    fs::path out;
    fs::path resume;
    fs::path benchmark;  // empty: parent of the shot directory
    int log_every = 100;
};

inline int cmd_fit(const FitArgs& a, std::ostream& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    const FitConfig config = fit_config_from_json(read_json(a.config));
    const RiggedTemplate rig = read_rig(a.rig);
    ShotSet shots = load_shots(a.shots, rig);
    if (a.log_every < 1) throw std::invalid_argument("--log-every must be positive");

    std::optional<GroundTruth> truth;
    std::optional<OracleGuidance> oracle;
    if (config.resolved_lambda_sds(static_cast<int>(shots.size())) > 0.0) {
        const fs::path bench = a.benchmark.empty() ? fs::absolute(a.shots).lexically_normal().parent_path() : a.benchmark;
        if (!fs::exists(bench / "benchmark.json"))
            throw std::invalid_argument("guidance needs the benchmark description; '" + (bench / "benchmark.json").string() +
                                        "' not found (set lambda_sds to 0 or pass --benchmark)");
        const BenchmarkSpec spec = read_benchmark_spec(bench);
        truth = make_ground_truth(spec.kind, spec.variant, spec.gt_mesh_resolution);
        if (truth->rig.num_bones() != rig.num_bones() || truth->rig.num_expressions() != rig.num_expressions())
            throw std::invalid_argument("the template does not match the benchmark's ground-truth rig");
        oracle.emplace(make_oracle(*truth));
    }

    FitSession session(config, std::move(shots), rig, oracle ? &*oracle : nullptr);
    if (!a.resume.empty()) {
        std::ifstream in(a.resume, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open '" + a.resume.string() + "'");
        session.load_checkpoint(in);
        log << "resumed at iteration " << session.iteration() << '\n';
    }

    fs::create_directories(a.out);
    write_json(a.out / "config.json", nlohmann::json(config));
    const bool append = !a.resume.empty() && fs::exists(a.out / "loss_log.csv");
    std::ofstream csv(a.out / "loss_log.csv", append ? std::ios::app : std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write '" + (a.out / "loss_log.csv").string() + "'");
    if (!append) csv << loss_log_header() << '\n';

    session.run([&](const StepLog& s) {
        csv << loss_log_row(s) << '\n';
        const int done = s.iteration + 1;
        if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < config.iterations)
            write_binary(a.out / numbered("checkpoint_", done, ".bin"), [&](std::ostream& o) { session.save_checkpoint(o); });
        if (done % a.log_every == 0 || done == config.iterations)
            log << "iteration " << done << '/' << config.iterations << " loss " << s.terms.total() << " vertices " << s.surface_vertices
                << '\n';
    });
    csv.close();

    write_binary(a.out / "checkpoint.bin", [&](std::ostream& o) { session.save_checkpoint(o); });
    write_obj(a.out / "mesh.obj", extract_surface(session.representation().grid));
    write_json(a.out / "timing.json", {{"seconds", seconds_since(t0)}, {"iterations", session.iteration()}});
    log << "wrote fit to " << a.out.string() << '\n';
    return 0;
}

struct RenderArgs {
    fs::path checkpoint;
    fs::path rig;
    fs::path camera;
    fs::path pose;
    fs::path out;
    fs::path mask_out;
};

inline int cmd_render(const RenderArgs& a, std::ostream& log)
{
    const RiggedTemplate rig = read_rig(a.rig);
    const Representation rep = load_representation(a.checkpoint, rig);
    const Camera cam = read_camera(a.camera);
    const PoseParams pose = a.pose.empty() ? PoseParams::rest(rig.num_bones(), rig.num_expressions()) : read_single_pose(a.pose, rig);
    check_pose(rig, pose);
    const PreparedSurface surf = prepare_surface(rep);
    if (surf.canonical.faces.empty()) throw std::runtime_error("the checkpoint holds no surface");
    const ViewRender v = render_view(rep, surf, pose, cam);
    write_png(a.out, v.color);
    if (!a.mask_out.empty()) write_png(a.mask_out, v.buffers.mask);
    log << "wrote " << a.out.string() << '\n';
    return 0;
}

struct AnimateArgs {
    fs::path checkpoint;
    fs::path rig;
    fs::path poses;
    fs::path camera;
    fs::path out;
    bool meshes = false;
};

inline int cmd_animate(const AnimateArgs& a, std::ostream& log)
{
    const RiggedTemplate rig = read_rig(a.rig);
    const Representation rep = load_representation(a.checkpoint, rig);
    const Camera cam = read_camera(a.camera);
    const std::vector<PoseParams> poses = read_pose_sequence(a.poses, rig.num_bones(), rig.num_expressions());
    if (poses.empty()) throw std::invalid_argument("'" + a.poses.string() + "' holds no poses");
    const auto frames = animate(rep, poses, cam);
    fs::create_directories(a.out);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_png(a.out / numbered("frame_", static_cast<int>(i), ".png"), frames[i].color);
        if (a.meshes) write_obj(a.out / numbered("frame_", static_cast<int>(i), ".obj"), frames[i].posed);
    }
    log << "wrote " << frames.size() << " frames to " << a.out.string() << '\n';
    return 0;
}

struct EvalArgs {
    fs::path checkpoint;
    fs::path rig;
    fs::path benchmark;
    fs::path out;
    fs::path config;
    int samples = 10000;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    if (a.samples < 1) throw std::invalid_argument("--samples must be positive");
    const RiggedTemplate rig = read_rig(a.rig);
    const Representation rep = load_representation(a.checkpoint, rig);
    read_benchmark_spec(a.benchmark);
    const auto views = load_eval_views(a.benchmark / "eval");
    const TriMesh truth = read_obj(a.benchmark / "gt_mesh.obj");
    nlohmann::json echo = a.config.empty() ? nlohmann::json::object() : read_json(a.config);
    EvalReport r = evaluate(rep, views, truth, std::move(echo), a.samples);
    r.runtime_seconds = seconds_since(t0);
    fs::create_directories(a.out);
    write_json(a.out / "report.json", r.to_json());
    write_json(a.out / "timing.json", {{"seconds", r.runtime_seconds}});
    log << "psnr " << r.mean_psnr << " ssim " << r.mean_ssim << " iou " << r.mean_iou << " chamfer " << r.chamfer << '\n';
    return 0;
}

}  // namespace detail

/// Returns the process exit status; errors are reported on `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Few-shot animatable shape reconstruction on a deformable tet grid"};
    app.require_subcommand(1);

    detail::GenerateArgs g;
    auto* gen = app.add_subcommand("generate", "Write a synthetic few-shot benchmark");
    gen->add_option("--template", g.kind, "sphere-1-bone | cylinder-2-bone | biped-5-bone | hand-6-bone")->required();
    gen->add_option("--shots", g.shots, "Number of training shots")->required();
    gen->add_option("--seed", g.seed, "Pose sampling seed");
    gen->add_option("--out", g.out, "Output directory (new or empty)")->required();
    gen->add_option("--resolution", g.resolution, "Training image size");
    gen->add_option("--layout", g.layout, "auto | front");
    gen->add_option("--variant", g.variant, "standard | painted-back");
    gen->add_option("--eval-views", g.eval_views, "Evaluation view count");
    gen->add_option("--eval-resolution", g.eval_resolution, "Evaluation image size");
    gen->add_option("--gt-resolution", g.gt_resolution, "Ground-truth mesh grid resolution");
    gen->add_option("--regions", g.regions, "Joints to add zoomed region shots for");
    gen->add_flag("--no-regions", g.no_regions, "Write no region shots");

    detail::FitArgs f;
    auto* fit = app.add_subcommand("fit", "Fit a representation to a shot set");
    fit->add_option("--config", f.config, "Fit configuration (JSON)")->required()->check(CLI::ExistingFile);
    fit->add_option("--shots", f.shots, "Directory of numbered shot directories")->required()->check(CLI::ExistingDirectory);
    fit->add_option("--template", f.rig, "Rig file")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", f.out, "Output directory")->required();
    fit->add_option("--resume", f.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
    fit->add_option("--benchmark", f.benchmark, "Benchmark directory for oracle guidance")->check(CLI::ExistingDirectory);
    fit->add_option("--log-every", f.log_every, "Progress line interval");

    detail::RenderArgs r;
    auto* ren = app.add_subcommand("render", "Render a fitted representation");
    ren->add_option("--checkpoint", r.checkpoint, "Fitted checkpoint")->required()->check(CLI::ExistingFile);
    ren->add_option("--template", r.rig, "Rig file")->required()->check(CLI::ExistingFile);
    ren->add_option("--camera", r.camera, "Camera file")->required()->check(CLI::ExistingFile);
    ren->add_option("--pose", r.pose, "Pose file (one line); rest pose if omitted")->check(CLI::ExistingFile);
    ren->add_option("--out", r.out, "Output PNG")->required();
    ren->add_option("--mask-out", r.mask_out, "Optional mask PNG");

    detail::AnimateArgs an;
    auto* ani = app.add_subcommand("animate", "Render a fitted representation over a pose sequence");
    ani->add_option("--checkpoint", an.checkpoint, "Fitted checkpoint")->required()->check(CLI::ExistingFile);
    ani->add_option("--template", an.rig, "Rig file")->required()->check(CLI::ExistingFile);
    ani->add_option("--poses", an.poses, "Pose sequence file")->required()->check(CLI::ExistingFile);
    ani->add_option("--camera", an.camera, "Camera file")->required()->check(CLI::ExistingFile);
    ani->add_option("--out", an.out, "Output directory")->required();
    ani->add_flag("--meshes", an.meshes, "Also write posed meshes");

    detail::EvalArgs e;
    auto* ev = app.add_subcommand("eval", "Score a fitted representation against a benchmark");
    ev->add_option("--checkpoint", e.checkpoint, "Fitted checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--template", e.rig, "Rig file")->required()->check(CLI::ExistingFile);
    ev->add_option("--benchmark", e.benchmark, "Benchmark directory")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--out", e.out, "Output directory")->required();
    ev->add_option("--config", e.config, "Configuration to echo into the report")->check(CLI::ExistingFile);
    ev->add_option("--samples", e.samples, "Chamfer samples per side");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex, log, err);
    }
    try {
        if (*gen) return detail::cmd_generate(g, log);
        if (*fit) return detail::cmd_fit(f, log);
        if (*ren) return detail::cmd_render(r, log);
        if (*ani) return detail::cmd_animate(an, log);
        if (*ev) return detail::cmd_eval(e, log);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 1;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    std::vector<const char*> argv = {"dtet"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), log, err);
}

}  // namespace dtet
