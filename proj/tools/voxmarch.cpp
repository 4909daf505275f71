// voxmarch: occupancy-grid accelerated volumetric rendering CLI.
// Subcommands: render, bench, train, render-dynamic. Images are binary PPM,
// reports are JSON on stdout, checkpoints are the library's binary formats.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "voxmarch/fields.hpp"
#include "voxmarch/image.hpp"
#include "voxmarch/occupancy_grid.hpp"
#include "voxmarch/parallel.hpp"
#include "voxmarch/ray_marching.hpp"
#include "voxmarch/rendering.hpp"
#include "voxmarch/rng.hpp"
#include "voxmarch/scene_camera.hpp"

using namespace voxmarch;
using nlohmann::json;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

struct CommonOptions {
    // scene
    std::string scene = "sphere";
    std::vector<double> aabb{0, 0, 0, 1, 1, 1};
    std::vector<double> scene_center;  // defaults to the domain center
    double scene_radius = 0.2;
    double scene_sigma = 200.0;
    std::vector<double> scene_rgb{0.8, 0.25, 0.25};
    std::vector<double> scene_rgb_b{0.25, 0.25, 0.8};
    double scene_period = 0.125;
    std::vector<double> scene_box;  // UniformBox extent, defaults to the domain
    std::string checkpoint;

    // occupancy grid
    uint32_t grid_resolution = 128;
    std::string contraction = "aabb";
    double contraction_radius = 0.0;  // 0: half the domain's largest extent
    int grid_updates = 16;
    double ema_decay = 0.95;
    double grid_alpha_threshold = 1e-2;
    std::string grid_file;
    std::string save_grid;

    // marching
    double near_plane = 0.2;
    double far_plane = 1.0;
    double early_stop_eps = 1e-4;
    double alpha_thre = 1e-2;
    double step_size = 0.0;  // 0: domain diagonal / 1024
    uint32_t max_samples_per_ray = 2048;
    double step_growth = 1.0;

    uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
    bool no_timing = false;
};

void add_common_options(CLI::App* cmd, CommonOptions& opt, double default_alpha_thre = 1e-2) {
    opt.alpha_thre = default_alpha_thre;
    cmd->add_option("--scene", opt.scene, "Scene: sphere|box|checker|voxel")
        ->check(CLI::IsMember({"sphere", "box", "checker", "voxel"}))
        ->capture_default_str();
    cmd->add_option("--aabb", opt.aabb, "Scene domain box: x0,y0,z0,x1,y1,z1")
        ->delimiter(',')
        ->expected(6);
    cmd->add_option("--scene-center", opt.scene_center, "Sphere center (default: domain center)")
        ->delimiter(',')
        ->expected(3);
    cmd->add_option("--scene-radius", opt.scene_radius, "Sphere radius")->capture_default_str();
    cmd->add_option("--scene-sigma", opt.scene_sigma, "Field density")->capture_default_str();
    cmd->add_option("--scene-rgb", opt.scene_rgb, "Field color")->delimiter(',')->expected(3);
    cmd->add_option("--scene-rgb-b", opt.scene_rgb_b, "Checker second color")
        ->delimiter(',')
        ->expected(3);
    cmd->add_option("--scene-period", opt.scene_period, "Checker period")->capture_default_str();
    cmd->add_option("--scene-box", opt.scene_box, "UniformBox extent (default: domain)")
        ->delimiter(',')
        ->expected(6);
    cmd->add_option("--checkpoint", opt.checkpoint, "Voxel field checkpoint (scene=voxel)");

    cmd->add_option("--grid-resolution", opt.grid_resolution, "Occupancy grid cells per axis")
        ->capture_default_str();
    cmd->add_option("--contraction", opt.contraction, "Grid coordinate mapping: aabb|sphere")
        ->check(CLI::IsMember({"aabb", "sphere"}))
        ->capture_default_str();
    cmd->add_option("--contraction-radius", opt.contraction_radius,
                    "Sphere contraction radius (0: half the largest domain extent)");
    cmd->add_option("--grid-updates", opt.grid_updates, "Warm-up update count")
        ->capture_default_str();
    cmd->add_option("--ema-decay", opt.ema_decay, "Density cache decay per update")
        ->capture_default_str();
    cmd->add_option("--grid-alpha-threshold", opt.grid_alpha_threshold,
                    "Grid emptiness opacity threshold")
        ->capture_default_str();
    cmd->add_option("--grid-file", opt.grid_file, "Load a serialized grid instead of warming up");
    cmd->add_option("--save-grid", opt.save_grid, "Write the grid after warm-up/training");

    cmd->add_option("--near-plane", opt.near_plane, "Marching start distance")
        ->capture_default_str();
    cmd->add_option("--far-plane", opt.far_plane, "Marching end distance")->capture_default_str();
    cmd->add_option("--early-stop-eps", opt.early_stop_eps, "Transmittance termination threshold")
        ->capture_default_str();
    cmd->add_option("--alpha-thre", opt.alpha_thre, "Per-sample opacity floor")
        ->capture_default_str();
    cmd->add_option("--step-size", opt.step_size, "Marching step (0: domain diagonal / 1024)");
    cmd->add_option("--max-samples-per-ray", opt.max_samples_per_ray, "Per-ray sample cap")
        ->capture_default_str();
    cmd->add_option("--step-growth", opt.step_growth,
                    "Step multiplier outside the unit ball (sphere contraction)")
        ->capture_default_str();

    cmd->add_option("--seed", opt.seed, "Root seed for all randomness")->capture_default_str();
    cmd->add_option("--threads", opt.threads, "Worker threads (0: auto)")->capture_default_str();
    cmd->add_flag("--no-timing", opt.no_timing, "Report wall times as 0 for reproducible output");
}

Vec3 to_vec3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

Aabb to_aabb(const std::vector<double>& v) {
    return Aabb({v[0], v[1], v[2]}, {v[3], v[4], v[5]});
}

// World-space density / appearance closures; the marching and rendering
// layers only ever see these two signatures.
struct FieldFns {
    std::function<double(const Vec3&)> density;
    std::function<std::pair<Vec3, double>(const Vec3&, const Vec3&)> rgb_sigma;
};

FieldFns fns_from_analytic(const AnalyticField& field) {
    return {[field](const Vec3& p) { return density_at(field, p); },
            [field](const Vec3& p, const Vec3& d) { return rgb_sigma_at(field, p, d); }};
}

FieldFns fns_from_voxel(const std::shared_ptr<TrilinearVoxelField>& field) {
    return {[field](const Vec3& p) { return field->density_at(p); },
            [field](const Vec3& p, const Vec3& d) { return field->rgb_sigma_at(p, d); }};
}

FieldFns fns_from_dynamic(const TimeConditionedField& field, double t) {
    return {[field, t](const Vec3& p) { return field.density_at(p, t); },
            [field, t](const Vec3& p, const Vec3& d) { return field.rgb_sigma_at(p, d, t); }};
}

AnalyticField analytic_from_options(const CommonOptions& opt) {
    Aabb domain = to_aabb(opt.aabb);
    Vec3 center = opt.scene_center.size() == 3 ? to_vec3(opt.scene_center) : domain.center();
    if (opt.scene == "sphere")
        return SolidSphere{center, opt.scene_radius, opt.scene_sigma, to_vec3(opt.scene_rgb)};
    if (opt.scene == "box") {
        Aabb box = opt.scene_box.size() == 6 ? to_aabb(opt.scene_box) : domain;
        return UniformBox{box, opt.scene_sigma, to_vec3(opt.scene_rgb)};
    }
    if (opt.scene == "checker")
        return Checker{opt.scene_period, opt.scene_sigma, to_vec3(opt.scene_rgb),
                       to_vec3(opt.scene_rgb_b)};
    throw std::runtime_error("scene '" + opt.scene + "' is not an analytic field");
}

FieldFns field_from_options(const CommonOptions& opt) {
    if (opt.scene == "voxel") {
        if (opt.checkpoint.empty())
            throw std::runtime_error("scene=voxel requires --checkpoint");
        auto field =
            std::make_shared<TrilinearVoxelField>(TrilinearVoxelField::load_file(opt.checkpoint));
        return fns_from_voxel(field);
    }
    return fns_from_analytic(analytic_from_options(opt));
}

Contraction contraction_from_options(const CommonOptions& opt) {
    Aabb domain = to_aabb(opt.aabb);
    if (opt.contraction == "aabb") return Contraction::aabb_normalize(domain);
    double radius = opt.contraction_radius;
    if (radius <= 0.0) {
        Vec3 extent = domain.size();
        radius = 0.5 * std::max(extent.x, std::max(extent.y, extent.z));
    }
    return Contraction::sphere(domain.center(), radius);
}

MarchingConfig marching_from_options(const CommonOptions& opt) {
    MarchingConfig config;
    config.step_size =
        opt.step_size > 0.0 ? opt.step_size : default_step_size(to_aabb(opt.aabb));
    config.early_stop_eps = opt.early_stop_eps;
    config.alpha_thre = opt.alpha_thre;
    config.max_samples_per_ray = opt.max_samples_per_ray;
    config.unbounded_step_growth = opt.step_growth;
    return config;
}

DensityBatchFn density_batch(const FieldFns& fns, int threads) {
    return [fns, threads](std::span<const Vec3> points) {
        std::vector<double> out(points.size());
        parallel_for(points.size(), threads, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) out[i] = fns.density(points[i]);
        });
        return out;
    };
}

SigmaFn sigma_fn_for(const RayBatch& rays, const FieldFns& fns) {
    return [&rays, fns](std::span<const double> ts, std::span<const double> te,
                        std::span<const uint32_t> idx) {
        std::vector<double> out(ts.size());
        for (size_t s = 0; s < ts.size(); ++s) {
            uint32_t r = idx[s];
            Vec3 p = rays.origins[r] + rays.directions[r] * (0.5 * (ts[s] + te[s]));
            out[s] = fns.density(p);
        }
        return out;
    };
}

// Sample positions via the midpoint convention, then the field's appearance.
void shade_samples(const RayBatch& rays, const PackedSamples& packed, const FieldFns& fns,
                   int threads, SampleAttributes& attrs, std::vector<Vec3>* positions) {
    attrs.rgbs.resize(packed.n_samples());
    attrs.sigmas.resize(packed.n_samples());
    if (positions) positions->resize(packed.n_samples());
    parallel_for(packed.n_samples(), threads, [&](size_t begin, size_t end) {
        for (size_t s = begin; s < end; ++s) {
            uint32_t r = packed.ray_indices[s];
            Vec3 p = rays.origins[r] +
                     rays.directions[r] * (0.5 * (packed.t_starts[s] + packed.t_ends[s]));
            auto [rgb, sigma] = fns.rgb_sigma(p, rays.directions[r]);
            attrs.rgbs[s] = rgb;
            attrs.sigmas[s] = sigma;
            if (positions) (*positions)[s] = p;
        }
    });
}

Image composite_to_image(const RenderOutputs& outputs, int width, int height) {
    Image image(width, height);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        double bg = 1.0 - outputs.opacity[i];  // constant white background
        image.pixels[i] = outputs.color[i] + Vec3{bg, bg, bg};
    }
    return image;
}

void check_finite_outputs(const RenderOutputs& outputs) {
    for (size_t r = 0; r < outputs.color.size(); ++r)
        if (!is_finite(outputs.color[r]) || !std::isfinite(outputs.opacity[r]) ||
            !std::isfinite(outputs.depth[r]))
            throw std::runtime_error("non-finite render output at ray " + std::to_string(r));
}

OccupancyGrid build_grid(const CommonOptions& opt, const FieldFns& fns, Rng& rng) {
    if (!opt.grid_file.empty()) return OccupancyGrid::load_file(opt.grid_file);
    OccupancyGrid grid(opt.grid_resolution, contraction_from_options(opt),
                       opt.grid_alpha_threshold);
    DensityBatchFn probe = density_batch(fns, opt.threads);
    for (int i = 0; i < opt.grid_updates; ++i) grid.update(probe, opt.ema_decay, rng.next_u64());
    return grid;
}

PinholeCamera orbit_camera(const Aabb& domain, double angle, double elevation, int width,
                           int height) {
    Vec3 center = domain.center();
    double radius = 0.6 * domain.diagonal() / std::sqrt(3.0);
    Vec3 eye = center + Vec3{radius * std::cos(angle) * std::cos(elevation),
                             radius * std::sin(angle) * std::cos(elevation),
                             radius * std::sin(elevation)};
    return look_at(eye, center, {0, 0, 1}, 1.1 * width, width, height);
}

json base_report(const std::string& command, const CommonOptions& opt) {
    return json{{"schema", 1}, {"command", command}, {"seed", opt.seed}};
}

// ---------------------------------------------------------------- render --

int cmd_render(const CommonOptions& opt, const std::string& camera_path,
               const std::string& out_path, bool no_grid) {
    Timer timer;
    Rng rng(opt.seed);
    FieldFns fns = field_from_options(opt);
    PinholeCamera camera = load_camera_json(camera_path);
    RayBatch rays = generate_rays(camera, opt.near_plane, opt.far_plane);
    MarchingConfig config = marching_from_options(opt);

    MarchStats stats;
    PackedSamples packed;
    if (no_grid) {
        packed = march_uniform(rays, config);
        stats.samples_emitted = packed.n_samples();
        stats.samples_kept = packed.n_samples();
    } else {
        OccupancyGrid grid = build_grid(opt, fns, rng);
        if (!opt.save_grid.empty()) grid.save_file(opt.save_grid);
        packed = march(rays, grid, sigma_fn_for(rays, fns), config, opt.threads, &stats);
    }

    SampleAttributes attrs;
    shade_samples(rays, packed, fns, opt.threads, attrs, nullptr);
    RenderOutputs outputs = render_forward(packed, attrs, opt.threads);
    check_finite_outputs(outputs);
    write_ppm(composite_to_image(outputs, camera.width, camera.height), out_path);

    size_t baseline =
        rays.n_rays() * uniform_step_count(rays.near, rays.far, config.step_size);
    json report = base_report("render", opt);
    report["n_rays"] = rays.n_rays();
    report["samples_emitted"] = stats.samples_emitted;
    report["samples_after_filter"] = stats.samples_kept;
    report["uniform_baseline_samples"] = baseline;
    report["pruning_fraction"] =
        baseline == 0 ? 0.0 : 1.0 - double(stats.samples_kept) / double(baseline);
    report["wall_time_ms"] = opt.no_timing ? 0.0 : timer.elapsed_ms();
    report["out"] = out_path;
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ----------------------------------------------------------------- bench --

int cmd_bench(const CommonOptions& opt, const std::string& camera_path, int width, int height) {
    Rng rng(opt.seed);
    FieldFns fns = field_from_options(opt);
    PinholeCamera camera = camera_path.empty()
                               ? orbit_camera(to_aabb(opt.aabb), 0.0, 0.4, width, height)
                               : load_camera_json(camera_path);
    RayBatch rays = generate_rays(camera, opt.near_plane, opt.far_plane);
    MarchingConfig config = marching_from_options(opt);

    OccupancyGrid grid = build_grid(opt, fns, rng);
    if (!opt.save_grid.empty()) grid.save_file(opt.save_grid);

    Timer uniform_timer;
    PackedSamples uniform = march_uniform(rays, config);
    SampleAttributes attrs;
    shade_samples(rays, uniform, fns, opt.threads, attrs, nullptr);
    RenderOutputs uniform_outputs = render_forward(uniform, attrs, opt.threads);
    double uniform_ms = uniform_timer.elapsed_ms();
    size_t baseline = uniform.n_samples();

    Timer pruned_timer;
    MarchStats stats;
    PackedSamples packed = march(rays, grid, sigma_fn_for(rays, fns), config, opt.threads, &stats);
    shade_samples(rays, packed, fns, opt.threads, attrs, nullptr);
    RenderOutputs pruned_outputs = render_forward(packed, attrs, opt.threads);
    double pruned_ms = pruned_timer.elapsed_ms();
    check_finite_outputs(uniform_outputs);
    check_finite_outputs(pruned_outputs);

    json report = base_report("bench", opt);
    report["width"] = width;
    report["height"] = height;
    report["n_rays"] = rays.n_rays();
    report["uniform_baseline_samples"] = baseline;
    report["samples_emitted"] = stats.samples_emitted;
    report["samples_after_filter"] = stats.samples_kept;
    report["pruning_fraction"] =
        baseline == 0 ? 0.0 : 1.0 - double(stats.samples_kept) / double(baseline);
    report["occupied_fraction"] = grid.occupied_fraction();
    report["wall_time_ms_uniform"] = opt.no_timing ? 0.0 : uniform_ms;
    report["wall_time_ms_pruned"] = opt.no_timing ? 0.0 : pruned_ms;
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ----------------------------------------------------------------- train --

struct TrainOptions {
    int n_views = 20;
    int eval_views = 4;
    int iterations = 2000;
    int width = 64;
    int height = 64;
    uint32_t field_resolution = 32;
    int batch_size = 1024;
    double lr = 0.1;
    double lr_density = 8.0;         // raw densities travel tens of units; colors only ~2
    double lr_final_fraction = 0.1;  // exponential decay target over the run
    int grid_update_every = 16;
    std::string out_checkpoint = "voxmarch_field.vxfd";
};

int cmd_train(const CommonOptions& opt, const TrainOptions& train) {
    Timer timer;
    Rng rng(opt.seed);
    Aabb domain = to_aabb(opt.aabb);
    AnalyticField target = analytic_from_options(opt);
    FieldFns target_fns = fns_from_analytic(target);
    MarchingConfig config = marching_from_options(opt);

    // Ground truth: n_views training cameras on a circle plus held-out eval
    // cameras at interleaved angles on the same orbit.
    std::vector<PinholeCamera> train_cams, eval_cams;
    for (int v = 0; v < train.n_views; ++v)
        train_cams.push_back(orbit_camera(domain, 2.0 * M_PI * v / train.n_views, 0.4,
                                          train.width, train.height));
    for (int v = 0; v < train.eval_views; ++v)
        eval_cams.push_back(orbit_camera(
            domain, 2.0 * M_PI * (v + 0.5) / std::max(1, train.eval_views), 0.4, train.width,
            train.height));

    auto render_reference = [&](const PinholeCamera& camera) {
        RayBatch rays = generate_rays(camera, opt.near_plane, opt.far_plane);
        PackedSamples packed = march_uniform(rays, config);
        SampleAttributes attrs;
        shade_samples(rays, packed, target_fns, opt.threads, attrs, nullptr);
        RenderOutputs outputs = render_forward(packed, attrs, opt.threads);
        return composite_to_image(outputs, camera.width, camera.height);
    };
    std::vector<Image> gt_train, gt_eval;
    for (const auto& cam : train_cams) gt_train.push_back(render_reference(cam));
    for (const auto& cam : eval_cams) gt_eval.push_back(render_reference(cam));

    // Flat pool of (ray, target color) pairs for minibatch sampling.
    std::vector<Vec3> pool_origins, pool_dirs, pool_colors;
    for (int v = 0; v < train.n_views; ++v) {
        RayBatch rays = generate_rays(train_cams[v], opt.near_plane, opt.far_plane);
        pool_origins.insert(pool_origins.end(), rays.origins.begin(), rays.origins.end());
        pool_dirs.insert(pool_dirs.end(), rays.directions.begin(), rays.directions.end());
        pool_colors.insert(pool_colors.end(), gt_train[v].pixels.begin(),
                           gt_train[v].pixels.end());
    }

    // Model: trainable voxel field over the domain, near-zero random init.
    auto field = std::make_shared<TrilinearVoxelField>(train.field_resolution, domain);
    for (auto& d : field->raw_density()) d = rng.uniform(-1e-4, 1e-4);
    for (auto& c : field->raw_color()) c = rng.uniform(-1e-4, 1e-4);
    FieldFns field_fns = fns_from_voxel(field);
    AdamOptimizer opt_density(field->raw_density().size(), train.lr);
    AdamOptimizer opt_color(field->raw_color().size(), train.lr);

    // Occupancy grid starts fully occupied (cache at 4x the threshold, so
    // early refreshes decay it gradually while the field learns) and is
    // probed from the field as it trains.
    OccupancyGrid grid(opt.grid_resolution, contraction_from_options(opt),
                       opt.grid_alpha_threshold);
    grid = OccupancyGrid(opt.grid_resolution, contraction_from_options(opt),
                         opt.grid_alpha_threshold, 0.0, 4.0 * grid.threshold_density());
    DensityBatchFn grid_probe = density_batch(field_fns, opt.threads);
    uint64_t jitter_root = rng.next_u64();

    std::vector<double> loss_curve;
    loss_curve.reserve(train.iterations);
    MarchStats last_stats;
    size_t pool = pool_origins.size();

    double lr_density = train.lr_density > 0.0 ? train.lr_density : train.lr;
    for (int iter = 1; iter <= train.iterations; ++iter) {
        double decay = std::pow(train.lr_final_fraction,
                                double(iter - 1) / std::max(1, train.iterations - 1));
        opt_density.set_learning_rate(lr_density * decay);
        opt_color.set_learning_rate(train.lr * decay);

        std::vector<Vec3> origins(train.batch_size), dirs(train.batch_size),
            targets(train.batch_size);
        for (int b = 0; b < train.batch_size; ++b) {
            size_t pick = rng.uniform_below(pool);
            origins[b] = pool_origins[pick];
            dirs[b] = pool_dirs[pick];
            targets[b] = pool_colors[pick];
        }
        RayBatch rays = RayBatch::create(std::move(origins), std::move(dirs), opt.near_plane,
                                         opt.far_plane);

        PackedSamples packed =
            march(rays, grid, sigma_fn_for(rays, field_fns), config, opt.threads, &last_stats);
        SampleAttributes attrs;
        std::vector<Vec3> positions;
        shade_samples(rays, packed, field_fns, opt.threads, attrs, &positions);
        RenderOutputs outputs = render_forward(packed, attrs, opt.threads);

        size_t n = rays.n_rays();
        std::vector<Vec3> d_color(n);
        std::vector<double> d_opacity(n), d_depth(n, 0.0);
        double loss = 0.0;
        double inv = 1.0 / (3.0 * double(n));
        for (size_t r = 0; r < n; ++r) {
            double bg = 1.0 - outputs.opacity[r];
            Vec3 err = outputs.color[r] + Vec3{bg, bg, bg} - targets[r];
            loss += dot(err, err) * inv;
            d_color[r] = err * (2.0 * inv);
            d_opacity[r] = -2.0 * inv * (err.x + err.y + err.z);
        }
        loss_curve.push_back(loss);
        if (!std::isfinite(loss)) {
            std::cerr << "train: loss diverged at iteration " << iter << "\n";
            return 3;
        }

        RenderGradients grads =
            render_backward(packed, attrs, d_color, d_opacity, d_depth, opt.threads);
        auto param_grads = field->zero_gradients();
        field->backward(positions, grads.d_rgbs, grads.d_sigmas, param_grads);
        opt_density.step(field->raw_density(), param_grads.d_raw_density);
        opt_color.step(field->raw_color(), param_grads.d_raw_color);

        if (iter % train.grid_update_every == 0)
            grid.update(grid_probe, opt.ema_decay, mix_seed(jitter_root, uint64_t(iter)));
    }

    // Final renders through the trained field and grid.
    auto render_model = [&](const PinholeCamera& camera, bool use_grid) {
        RayBatch rays = generate_rays(camera, opt.near_plane, opt.far_plane);
        PackedSamples packed =
            use_grid ? march(rays, grid, sigma_fn_for(rays, field_fns), config, opt.threads,
                             nullptr)
                     : march_uniform(rays, config);
        SampleAttributes attrs;
        shade_samples(rays, packed, field_fns, opt.threads, attrs, nullptr);
        RenderOutputs outputs = render_forward(packed, attrs, opt.threads);
        check_finite_outputs(outputs);
        return composite_to_image(outputs, camera.width, camera.height);
    };
    double psnr_train = 0.0, psnr_eval = 0.0, psnr_eval_nogrid = 0.0;
    for (int v = 0; v < train.n_views; ++v)
        psnr_train += psnr(render_model(train_cams[v], true), gt_train[v]) / train.n_views;
    for (int v = 0; v < train.eval_views; ++v) {
        psnr_eval += psnr(render_model(eval_cams[v], true), gt_eval[v]) / train.eval_views;
        psnr_eval_nogrid +=
            psnr(render_model(eval_cams[v], false), gt_eval[v]) / train.eval_views;
    }

    field->save_file(train.out_checkpoint);
    if (!opt.save_grid.empty()) grid.save_file(opt.save_grid);

    json report = base_report("train", opt);
    report["iterations"] = train.iterations;
    report["n_views"] = train.n_views;
    report["eval_views"] = train.eval_views;
    report["field_resolution"] = train.field_resolution;
    report["batch_size"] = train.batch_size;
    report["lr"] = train.lr;
    report["loss_curve"] = loss_curve;
    report["final_loss"] = loss_curve.empty() ? 0.0 : loss_curve.back();
    report["psnr_train"] = psnr_train;
    report["psnr_eval"] = psnr_eval;
    report["psnr_eval_nogrid"] = psnr_eval_nogrid;
    report["occupied_fraction"] = grid.occupied_fraction();
    report["samples_emitted"] = last_stats.samples_emitted;
    report["samples_after_filter"] = last_stats.samples_kept;
    report["checkpoint"] = train.out_checkpoint;
    report["wall_time_ms"] = opt.no_timing ? 0.0 : timer.elapsed_ms();
    std::cout << report.dump(2) << "\n";
    return 0;
}

// -------------------------------------------------------- render-dynamic --

int cmd_render_dynamic(const CommonOptions& opt, const std::string& camera_path,
                       const std::string& out_prefix, const std::vector<double>& timestamps,
                       const Vec3& velocity) {
    Timer timer;
    Rng rng(opt.seed);
    TimeConditionedField field{analytic_from_options(opt), velocity};
    PinholeCamera camera = load_camera_json(camera_path);
    RayBatch rays = generate_rays(camera, opt.near_plane, opt.far_plane);
    MarchingConfig config = marching_from_options(opt);

    // One grid shared across all frames: per-cell maximum density over the
    // rendered timestamps.
    OccupancyGrid grid = [&] {
        if (!opt.grid_file.empty()) return OccupancyGrid::load_file(opt.grid_file);
        OccupancyGrid fresh(opt.grid_resolution, contraction_from_options(opt),
                            opt.grid_alpha_threshold);
        TimeDensityBatchFn probe = [&](std::span<const Vec3> points, double t) {
            std::vector<double> out(points.size());
            parallel_for(points.size(), opt.threads, [&](size_t begin, size_t end) {
                for (size_t i = begin; i < end; ++i) out[i] = field.density_at(points[i], t);
            });
            return out;
        };
        for (int i = 0; i < opt.grid_updates; ++i)
            fresh.update_over_time(probe, timestamps, opt.ema_decay, rng.next_u64());
        return fresh;
    }();
    if (!opt.save_grid.empty()) grid.save_file(opt.save_grid);

    json frames = json::array();
    for (size_t f = 0; f < timestamps.size(); ++f) {
        FieldFns fns = fns_from_dynamic(field, timestamps[f]);
        MarchStats stats;
        PackedSamples packed =
            march(rays, grid, sigma_fn_for(rays, fns), config, opt.threads, &stats);
        SampleAttributes attrs;
        shade_samples(rays, packed, fns, opt.threads, attrs, nullptr);
        RenderOutputs outputs = render_forward(packed, attrs, opt.threads);
        check_finite_outputs(outputs);

        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_%03zu.ppm", f);
        std::string out_path = out_prefix + suffix;
        write_ppm(composite_to_image(outputs, camera.width, camera.height), out_path);
        frames.push_back(json{{"t", timestamps[f]},
                              {"out", out_path},
                              {"samples_emitted", stats.samples_emitted},
                              {"samples_after_filter", stats.samples_kept}});
    }

    json report = base_report("render-dynamic", opt);
    report["timestamps"] = timestamps;
    report["occupied_fraction"] = grid.occupied_fraction();
    report["frames"] = frames;
    report["wall_time_ms"] = opt.no_timing ? 0.0 : timer.elapsed_ms();
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxmarch: occupancy-grid accelerated volumetric rendering"};
    app.require_subcommand(1);

    CommonOptions render_opt, bench_opt, train_opt_common, dynamic_opt;
    std::string render_camera, render_out;
    bool render_no_grid = false;
    std::string bench_camera;
    int bench_width = 128, bench_height = 128;
    TrainOptions train_opt;
    std::string dynamic_camera, dynamic_prefix;
    std::vector<double> dynamic_timestamps{0.0, 0.5, 1.0};
    std::vector<double> dynamic_velocity{0.2, 0.0, 0.0};

    CLI::App* render = app.add_subcommand("render", "Render a scene to a PPM image");
    add_common_options(render, render_opt);
    render->add_option("--camera", render_camera, "Camera JSON file")->required();
    render->add_option("--out", render_out, "Output PPM path")->required();
    render->add_flag("--no-grid", render_no_grid, "Uniform marching, no occupancy grid");

    CLI::App* bench = app.add_subcommand("bench", "Compare pruned marching to the uniform baseline");
    add_common_options(bench, bench_opt);
    bench->add_option("--camera", bench_camera, "Camera JSON (default: orbit view)");
    bench->add_option("--width", bench_width, "Image width")->capture_default_str();
    bench->add_option("--height", bench_height, "Image height")->capture_default_str();

    CLI::App* train = app.add_subcommand("train", "Fit a voxel field to an analytic scene");
    train_opt_common.grid_resolution = 64;  // desk-scale default for the training loop
    add_common_options(train, train_opt_common, 0.0);
    train->add_option("--n-views", train_opt.n_views, "Training cameras on a circle")
        ->capture_default_str();
    train->add_option("--eval-views", train_opt.eval_views, "Held-out cameras")
        ->capture_default_str();
    train->add_option("--iterations", train_opt.iterations, "Optimization steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train->add_option("--width", train_opt.width, "Image width")->capture_default_str();
    train->add_option("--height", train_opt.height, "Image height")->capture_default_str();
    train->add_option("--field-resolution", train_opt.field_resolution,
                      "Voxel field vertices per axis")
        ->capture_default_str();
    train->add_option("--batch-size", train_opt.batch_size, "Rays per step")
        ->capture_default_str();
    train->add_option("--lr", train_opt.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--lr-density", train_opt.lr_density,
                      "Learning rate for raw densities (0: same as --lr)");
    train->add_option("--lr-final-fraction", train_opt.lr_final_fraction,
                      "Exponential decay: final lr as a fraction of --lr")
        ->capture_default_str();
    train->add_option("--out-checkpoint", train_opt.out_checkpoint, "Voxel checkpoint path")
        ->capture_default_str();

    CLI::App* dynamic = app.add_subcommand(
        "render-dynamic", "Render a moving scene with one occupancy grid shared over time");
    add_common_options(dynamic, dynamic_opt);
    dynamic->add_option("--camera", dynamic_camera, "Camera JSON file")->required();
    dynamic->add_option("--out-prefix", dynamic_prefix, "Output prefix for frame PPMs")
        ->required();
    dynamic->add_option("--timestamps", dynamic_timestamps, "Frame times in [0,1]")
        ->delimiter(',');
    dynamic->add_option("--velocity", dynamic_velocity, "Scene translation per unit time")
        ->delimiter(',')
        ->expected(3);

    CLI11_PARSE(app, argc, argv);

    try {
        if (render->parsed())
            return cmd_render(render_opt, render_camera, render_out, render_no_grid);
        if (bench->parsed()) return cmd_bench(bench_opt, bench_camera, bench_width, bench_height);
        if (train->parsed()) {
            if (train_opt.n_views < 2) throw std::runtime_error("train: requires --n-views >= 2");
            return cmd_train(train_opt_common, train_opt);
        }
        if (dynamic->parsed()) {
            if (dynamic_timestamps.empty())
                throw std::runtime_error("render-dynamic: requires at least one timestamp");
            return cmd_render_dynamic(dynamic_opt, dynamic_camera, dynamic_prefix,
                                      dynamic_timestamps, to_vec3(dynamic_velocity));
        }
    } catch (const std::exception& e) {
        std::cerr << "voxmarch: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
