#pragma once

// Fit loop: per iteration one reference shot (round robin) plus one guided
// novel view, Adam on sdf / displacement / texture, checkpoints that resume
// bit for bit.

#include "dtet/camera.hpp"
#include "dtet/objective.hpp"
#include "dtet/templates.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace dtet {

struct LrSchedule {
    double initial = 0.05;
    double factor = 0.1;
    std::vector<int> steps = {7500, 15000};
};

/// Piecewise-constant decay: multiplied by `factor` at each listed step.
inline double lr_at(const LrSchedule& s, int step)
{
    double lr = s.initial;
    for (int d : s.steps)
        if (step >= d) lr *= s.factor;
    return lr;
}

struct NovelViewSpec {
    double azimuth_min = 0.0;
    double azimuth_max = 2.0 * kPi;
    double elevation_min = -kPi / 6.0;
    double elevation_max = kPi / 3.0;
    double radius = 3.0;
    double fov_y = 0.62;
};

/// Uniform azimuth and elevation in the band, looking at `target`.
template <typename Rng>
Camera sample_novel_view(const NovelViewSpec& spec, Rng& rng, const Vec3& target, int width, int height)
{
    std::uniform_real_distribution<double> az(spec.azimuth_min, spec.azimuth_max);
    std::uniform_real_distribution<double> el(spec.elevation_min, spec.elevation_max);
    const double a = az(rng);
    const double e = el(rng);
    return orbit_camera(a, e, spec.radius, target, spec.fov_y, width, height);
}

struct FitConfig {
    TaskKind task = TaskKind::Body;
    int shots = 0;  // 0: take the count from the shot set
    int iterations = 1000;
    LrSchedule lr;
    double lr_scale_sdf = 0.3;
    double lr_scale_displacement = 0.1;
    double lr_scale_texture = 0.2;
    std::optional<double> lambda_sds;  // unset: 0.05 for N <= 2, else 0.01
    std::optional<double> lambda_lap;  // unset: 1 for hand, 0 for body
    NovelViewSpec novel_view;
    int grid_resolution = 48;
    std::uint64_t seed = 0;
    bool texture = true;
    bool normal = true;
    bool depth = true;
    bool mask = true;
    bool texture_to_geometry = false;
    int checkpoint_every = 0;  // 0: only the final checkpoint

    double resolved_lambda_sds(int n) const { return lambda_sds ? *lambda_sds : (n <= 2 ? 0.05 : 0.01); }
    double resolved_lambda_lap() const { return lambda_lap ? *lambda_lap : (task == TaskKind::Hand ? 1.0 : 0.0); }

    void validate() const
    {
        if (iterations <= 0) throw std::invalid_argument("config: iterations must be positive");
        if (!(lr.initial > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
        if (!(lr.factor > 0.0)) throw std::invalid_argument("config: decay factor must be positive");
        if (grid_resolution < 1) throw std::invalid_argument("config: grid_resolution must be at least 1");
        if (shots < 0) throw std::invalid_argument("config: shots must be nonnegative");
        if ((lambda_sds && !(*lambda_sds >= 0.0)) || (lambda_lap && !(*lambda_lap >= 0.0)))
            throw std::invalid_argument("config: loss weights must be nonnegative");
        if (!(lr_scale_sdf >= 0.0 && lr_scale_displacement >= 0.0 && lr_scale_texture >= 0.0))
            throw std::invalid_argument("config: learning-rate scales must be nonnegative");
        if (!(novel_view.elevation_min <= novel_view.elevation_max) || !(novel_view.radius > 0.0))
            throw std::invalid_argument("config: invalid novel-view band");
    }
};

inline void to_json(nlohmann::json& j, const FitConfig& c)
{
    j = nlohmann::json{
        {"task", to_string(c.task)},
        {"shots", c.shots},
        {"iterations", c.iterations},
        {"lr", {{"initial", c.lr.initial}, {"factor", c.lr.factor}, {"steps", c.lr.steps}}},
        {"lr_scale", {{"sdf", c.lr_scale_sdf}, {"displacement", c.lr_scale_displacement}, {"texture", c.lr_scale_texture}}},
        {"lambda_sds", c.lambda_sds ? nlohmann::json(*c.lambda_sds) : nlohmann::json(nullptr)},
        {"lambda_lap", c.lambda_lap ? nlohmann::json(*c.lambda_lap) : nlohmann::json(nullptr)},
        {"novel_view",
         {{"azimuth_deg", {c.novel_view.azimuth_min * 180.0 / kPi, c.novel_view.azimuth_max * 180.0 / kPi}},
          {"elevation_deg", {c.novel_view.elevation_min * 180.0 / kPi, c.novel_view.elevation_max * 180.0 / kPi}},
          {"radius", c.novel_view.radius},
          {"fov_deg", c.novel_view.fov_y * 180.0 / kPi}}},
        {"grid_resolution", c.grid_resolution},
        {"seed", c.seed},
        {"terms", {{"texture", c.texture}, {"normal", c.normal}, {"depth", c.depth}, {"mask", c.mask}}},
        {"texture_to_geometry", c.texture_to_geometry},
        {"checkpoint_every", c.checkpoint_every},
    };
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline FitConfig fit_config_from_json(const nlohmann::json& j)
{
    static const std::vector<std::string> known = {"task", "shots", "iterations", "lr", "lr_scale", "lambda_sds",
                                                   "lambda_lap", "novel_view", "grid_resolution", "seed", "terms",
                                                   "texture_to_geometry", "checkpoint_every"};
    if (!j.is_object()) throw std::invalid_argument("config: expected an object");
    for (const auto& [k, _] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw std::invalid_argument("config: unknown field '" + k + "'");
    FitConfig c;
    try {
        if (j.contains("task")) c.task = task_kind_from_string(j.at("task").get<std::string>());
        if (j.contains("shots")) c.shots = j.at("shots").get<int>();
        if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
        if (j.contains("lr")) {
            const auto& l = j.at("lr");
            if (l.contains("initial")) c.lr.initial = l.at("initial").get<double>();
            if (l.contains("factor")) c.lr.factor = l.at("factor").get<double>();
            if (l.contains("steps")) c.lr.steps = l.at("steps").get<std::vector<int>>();
        }
        if (j.contains("lr_scale")) {
            const auto& l = j.at("lr_scale");
            if (l.contains("sdf")) c.lr_scale_sdf = l.at("sdf").get<double>();
            if (l.contains("displacement")) c.lr_scale_displacement = l.at("displacement").get<double>();
            if (l.contains("texture")) c.lr_scale_texture = l.at("texture").get<double>();
        }
        if (j.contains("lambda_sds") && !j.at("lambda_sds").is_null()) c.lambda_sds = j.at("lambda_sds").get<double>();
        if (j.contains("lambda_lap") && !j.at("lambda_lap").is_null()) c.lambda_lap = j.at("lambda_lap").get<double>();
        if (j.contains("novel_view")) {
            const auto& n = j.at("novel_view");
            const double deg = kPi / 180.0;
            if (n.contains("azimuth_deg")) {
                c.novel_view.azimuth_min = n.at("azimuth_deg").at(0).get<double>() * deg;
                c.novel_view.azimuth_max = n.at("azimuth_deg").at(1).get<double>() * deg;
            }
            if (n.contains("elevation_deg")) {
                c.novel_view.elevation_min = n.at("elevation_deg").at(0).get<double>() * deg;
                c.novel_view.elevation_max = n.at("elevation_deg").at(1).get<double>() * deg;
            }
            if (n.contains("radius")) c.novel_view.radius = n.at("radius").get<double>();
            if (n.contains("fov_deg")) c.novel_view.fov_y = n.at("fov_deg").get<double>() * deg;
        }
        if (j.contains("grid_resolution")) c.grid_resolution = j.at("grid_resolution").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("terms")) {
            const auto& t = j.at("terms");
            if (t.contains("texture")) c.texture = t.at("texture").get<bool>();
            if (t.contains("normal")) c.normal = t.at("normal").get<bool>();
            if (t.contains("depth")) c.depth = t.at("depth").get<bool>();
            if (t.contains("mask")) c.mask = t.at("mask").get<bool>();
        }
        if (j.contains("texture_to_geometry")) c.texture_to_geometry = j.at("texture_to_geometry").get<bool>();
        if (j.contains("checkpoint_every")) c.checkpoint_every = j.at("checkpoint_every").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Shots

struct RegionShot {
    std::string joint;
    Camera camera;
    Reference reference;
};

struct Shot {
    Reference reference;
    Camera camera;
    PoseParams pose;
    std::vector<RegionShot> regions;
};

using ShotSet = std::vector<Shot>;

inline void validate_shots(const ShotSet& shots, const RiggedTemplate& rig)
{
    if (shots.empty()) throw std::invalid_argument("shots: the shot set is empty");
    const int w = shots[0].reference.color.width, h = shots[0].reference.color.height;
    for (std::size_t i = 0; i < shots.size(); ++i) {
        const Shot& s = shots[i];
        const std::string tag = "shot " + std::to_string(i) + ": ";
        const Reference& r = s.reference;
        if (r.color.width != w || r.color.height != h || r.color.channels != 3) throw std::invalid_argument(tag + "color size differs");
        if (r.mask.width != w || r.mask.height != h || r.mask.channels != 1) throw std::invalid_argument(tag + "mask size differs");
        if (r.normal.width > 0 && (r.normal.width != w || r.normal.height != h || r.normal.channels != 3))
            throw std::invalid_argument(tag + "normal size differs");
        if (r.depth.width > 0 && (r.depth.width != w || r.depth.height != h || r.depth.channels != 1))
            throw std::invalid_argument(tag + "depth size differs");
        if (r.soft_mask.width > 0 && !r.soft_mask.same_shape(r.mask)) throw std::invalid_argument(tag + "soft mask size differs");
        if (s.camera.width != w || s.camera.height != h) throw std::invalid_argument(tag + "camera size differs from images");
        s.camera.validate();
        check_pose(rig, s.pose);
        for (const Vec3& th : s.pose.rotations)
            if (!th.allFinite() || th.norm() >= kPi) throw std::invalid_argument(tag + "joint rotation outside (-pi, pi)");
        for (const RegionShot& rs : s.regions) {
            rig.joint_index(rs.joint);
            rs.camera.validate();
            if (rs.reference.color.width != rs.camera.width || rs.reference.mask.width != rs.camera.width)
                throw std::invalid_argument(tag + "region reference size differs from its camera");
        }
    }
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    void resize(std::size_t n)
    {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(std::span<double> x, std::span<const double> g, AdamState& s, double lr) const
    {
        if (x.size() != g.size() || s.m.size() != x.size()) throw std::invalid_argument("adam: size mismatch");
        ++s.step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(s.step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(s.step));
        for (std::size_t i = 0; i < x.size(); ++i) {
            s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
            s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps);
        }
    }
};

/// Optimizable parameters plus their Adam moments.
struct ParameterStore {
    Representation rep;
    AdamState sdf;
    AdamState displacement;
    AdamState texture;

    void reset_moments()
    {
        sdf.resize(rep.grid.sdf.size());
        displacement.resize(rep.grid.displacement.size() * 3);
        texture.resize(rep.texture.num_parameters());
    }
};

inline std::span<double> displacement_span(TetGrid& g)
{
    return {g.displacement.empty() ? nullptr : g.displacement.front().data(), g.displacement.size() * 3};
}

inline std::span<const double> displacement_span(const std::vector<Vec3>& d)
{
    return {d.empty() ? nullptr : d.front().data(), d.size() * 3};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

inline void write_block(std::ostream& out, const char tag[4], std::span<const double> values)
{
    out.write(tag, 4);
    write_le<std::uint64_t>(out, values.size());
    for (double x : values) write_le<double>(out, x);
}

inline std::vector<double> read_block(std::istream& in, const char tag[4])
{
    char t[4];
    in.read(t, 4);
    if (!in || std::string(t, 4) != std::string(tag, 4)) throw std::runtime_error(std::string("checkpoint: missing block ") + std::string(tag, 4));
    const auto n = read_le<std::uint64_t>(in);
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible block size");
    std::vector<double> v(n);
    for (double& x : v) x = read_le<double>(in);
    if (!in) throw std::runtime_error("checkpoint: truncated block");
    return v;
}

}  // namespace detail

/// Grid block, texture weights, then Adam state.
inline void write_checkpoint(std::ostream& out, const ParameterStore& s, int iteration)
{
    write_grid(out, s.rep.grid);
    detail::write_block(out, "TXFD", s.rep.texture.parameters());
    out.write("ADAM", 4);
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(iteration));
    for (const AdamState* a : {&s.sdf, &s.displacement, &s.texture}) {
        detail::write_le<std::uint64_t>(out, a->step);
        detail::write_block(out, "MOM1", a->m);
        detail::write_block(out, "MOM2", a->v);
    }
}

/// Restores into `s`, whose texture shape and rig must already be set. Returns the iteration.
inline int read_checkpoint(std::istream& in, ParameterStore& s)
{
    s.rep.grid = read_grid(in);
    std::vector<double> tex = detail::read_block(in, "TXFD");
    if (tex.size() != s.rep.texture.num_parameters()) throw std::runtime_error("checkpoint: texture size mismatch");
    s.rep.texture.parameters() = std::move(tex);
    char tag[4];
    in.read(tag, 4);
    if (!in || std::string(tag, 4) != "ADAM") {
        // Weights-only checkpoint.
        in.clear();
        s.reset_moments();
        return 0;
    }
    const int iteration = static_cast<int>(detail::read_le<std::uint64_t>(in));
    for (AdamState* a : {&s.sdf, &s.displacement, &s.texture}) {
        a->step = detail::read_le<std::uint64_t>(in);
        a->m = detail::read_block(in, "MOM1");
        a->v = detail::read_block(in, "MOM2");
    }
    if (s.sdf.m.size() != s.rep.grid.sdf.size() || s.displacement.m.size() != s.rep.grid.sdf.size() * 3 ||
        s.texture.m.size() != s.rep.texture.num_parameters())
        throw std::runtime_error("checkpoint: optimizer state does not match parameters");
    return iteration;
}

// ---------------------------------------------------------------------------
// Fit session

struct StepLog {
    int iteration = 0;
    int shot = 0;
    LossTerms terms;
    double guidance_norm = 0.0;  // L2 norm of the guidance image gradient
    double lr = 0.0;
    std::size_t surface_vertices = 0;
};

inline std::string loss_log_header() { return "iteration,shot,texture,normal,depth,mask,laplacian,region,total,guidance,lr,vertices"; }

inline std::string loss_log_row(const StepLog& s)
{
    std::ostringstream o;
    o << std::setprecision(9) << s.iteration << ',' << s.shot << ',' << s.terms.texture << ',' << s.terms.normal << ','
      << s.terms.depth << ',' << s.terms.mask << ',' << s.terms.laplacian << ',' << s.terms.region << ',' << s.terms.total()
      << ',' << s.guidance_norm << ',' << s.lr << ',' << s.surface_vertices;
    return o.str();
}

/// Gradients of one iteration, before the optimizer step.
struct IterationGradients {
    GridGradients grid;
    std::vector<double> texture;
    StepLog log;
};

class FitSession {
public:
    FitSession(FitConfig config, ShotSet shots, RiggedTemplate rig, GuidanceModel* guidance = nullptr)
        : config_(std::move(config)), shots_(std::move(shots)), guidance_(guidance)
    {
        config_.validate();
        validate_shots(shots_, rig);
        for (Shot& s : shots_)
            if (s.reference.soft_mask.width == 0) s.reference.soft_mask = soften_mask(s.reference.mask);
        if (config_.shots != 0 && config_.shots != static_cast<int>(shots_.size()))
            throw std::invalid_argument("config: shots = " + std::to_string(config_.shots) + " but the shot set has " +
                                        std::to_string(shots_.size()));
        weights_.lambda_sds = config_.resolved_lambda_sds(static_cast<int>(shots_.size()));
        weights_.lambda_lap = config_.resolved_lambda_lap();
        weights_.texture = config_.texture;
        weights_.normal = config_.normal;
        weights_.depth = config_.depth;
        weights_.mask = config_.mask;
        weights_.validate();
        if (weights_.lambda_sds > 0.0 && !guidance_) throw std::invalid_argument("fit: lambda_sds > 0 needs a guidance model");

        store_.rep.rig = std::move(rig);
        store_.rep.grid = build_tet_grid(config_.grid_resolution, 1.0);
        init_sdf_from_template(store_.rep.grid, store_.rep.rig);
        for (double& s : store_.rep.grid.sdf) s = round_to_float(s);
        TextureConfig tc;
        tc.seed = config_.seed;
        store_.rep.texture = TextureField(tc);
        store_.reset_moments();
    }

    const FitConfig& config() const { return config_; }
    const LossWeights& weights() const { return weights_; }
    const Representation& representation() const { return store_.rep; }
    const ParameterStore& store() const { return store_; }
    int iteration() const { return iteration_; }

    /// Reference-view and guidance gradients for the current iteration.
    IterationGradients gradients() const
    {
        const Representation& rep = store_.rep;
        const PreparedSurface surf = prepare_surface(rep);
        if (surf.canonical.vertices.empty()) throw std::runtime_error("fit: the surface vanished at iteration " + std::to_string(iteration_));
        const int si = iteration_ % static_cast<int>(shots_.size());
        const Shot& shot = shots_[si];

        IterationGradients out{GridGradients(rep.grid.vertices.size()), std::vector<double>(rep.texture.num_parameters(), 0.0), {}};
        BackwardOptions bo;
        bo.texture_to_geometry = config_.texture_to_geometry;

        const ViewRender view = render_view(rep, surf, shot.pose, shot.camera);
        std::vector<ViewRender> region_views;
        std::vector<RegionView> regions;
        if (config_.task == TaskKind::Body && config_.texture) {
            region_views.reserve(shot.regions.size());
            for (const RegionShot& r : shot.regions) region_views.push_back(render_view(rep, surf, shot.pose, r.camera));
            for (std::size_t k = 0; k < shot.regions.size(); ++k) regions.push_back({&region_views[k], &shot.regions[k].reference});
        }
        const ReconLoss loss = assemble_recon_loss(config_.task, view, shot.reference, weights_, &surf.canonical, regions);
        render_backward(rep, surf, view, loss.view, out.grid, out.texture, bo);
        for (std::size_t k = 0; k < region_views.size(); ++k) render_backward(rep, surf, region_views[k], loss.regions[k], out.grid, out.texture, bo);
        if (!loss.canonical_grads.empty()) {
            const GridGradients lap = surface_gradients(rep.grid, surf.canonical, loss.canonical_grads);
            for (std::size_t i = 0; i < lap.sdf.size(); ++i) {
                out.grid.sdf[i] += lap.sdf[i];
                out.grid.displacement[i] += lap.displacement[i];
            }
        }

        out.log.iteration = iteration_;
        out.log.shot = si;
        out.log.terms = loss.terms;
        out.log.lr = lr_at(config_.lr, iteration_);
        out.log.surface_vertices = surf.canonical.vertices.size();

        if (weights_.lambda_sds > 0.0) {
            std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                              static_cast<std::uint32_t>(iteration_), 0x6e6f76u};
            std::mt19937_64 rng(seq);
            Vec3 lo = view.posed.vertices.front(), hi = lo;
            for (const Vec3& p : view.posed.vertices) {
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
            const Camera novel = sample_novel_view(config_.novel_view, rng, 0.5 * (lo + hi), shot.camera.width, shot.camera.height);
            const ViewRender nv = render_view(rep, surf, shot.pose, novel);
            GuidanceRequest req;
            req.rendered = &nv.color;
            req.rendered_mask = &nv.buffers.mask;
            req.novel = novel;
            req.reference = si;
            req.delta_rotation = relative_rotation(shot.camera, novel);
            req.pose = &shot.pose;
            ViewGradients g;
            g.color = guidance_->gradient(req);
            if (!g.color.same_shape(nv.color)) throw std::runtime_error("guidance: gradient image has the wrong shape");
            double n2 = 0.0;
            for (double& x : g.color.data) {
                x *= weights_.lambda_sds;
                n2 += x * x;
            }
            out.log.guidance_norm = std::sqrt(n2);
            render_backward(rep, surf, nv, g, out.grid, out.texture, bo);
        }
        return out;
    }

    /// One full iteration. Throws on non-finite losses or gradients.
    StepLog step()
    {
        IterationGradients g = gradients();
        if (!std::isfinite(g.log.terms.total())) throw std::runtime_error("fit: non-finite loss at iteration " + std::to_string(iteration_));
        auto finite = [](std::span<const double> v) {
            for (double x : v)
                if (!std::isfinite(x)) return false;
            return true;
        };
        if (!finite(g.grid.sdf) || !finite(displacement_span(g.grid.displacement)) || !finite(g.texture))
            throw std::runtime_error("fit: non-finite gradient at iteration " + std::to_string(iteration_));

        const double lr = lr_at(config_.lr, iteration_);
        Adam adam;
        TetGrid& grid = store_.rep.grid;
        adam.step(grid.sdf, g.grid.sdf, store_.sdf, lr * config_.lr_scale_sdf);
        adam.step(displacement_span(grid), displacement_span(g.grid.displacement), store_.displacement, lr * config_.lr_scale_displacement);
        adam.step(store_.rep.texture.parameters(), g.texture, store_.texture, lr * config_.lr_scale_texture);
        grid.clamp_displacement();
        for (double& s : grid.sdf) s = round_to_float(s);
        for (Vec3& d : grid.displacement)
            for (int c = 0; c < 3; ++c) d[c] = round_to_float(d[c]);
        ++iteration_;
        return g.log;
    }

    /// Runs to the configured iteration count, calling `on_step` after each step.
    void run(const std::function<void(const StepLog&)>& on_step = {})
    {
        while (iteration_ < config_.iterations) {
            const StepLog l = step();
            if (on_step) on_step(l);
        }
    }

    void save_checkpoint(std::ostream& out) const { write_checkpoint(out, store_, iteration_); }
    void load_checkpoint(std::istream& in)
    {
        ParameterStore s;
        s.rep.rig = store_.rep.rig;
        s.rep.texture = store_.rep.texture;
        const int it = read_checkpoint(in, s);
        if (s.rep.grid.resolution != config_.grid_resolution) throw std::runtime_error("checkpoint: grid resolution differs from config");
        store_ = std::move(s);
        iteration_ = it;
    }

private:
    FitConfig config_;
    ShotSet shots_;
    GuidanceModel* guidance_ = nullptr;
    LossWeights weights_;
    ParameterStore store_;
    int iteration_ = 0;
};

}  // namespace dtet
