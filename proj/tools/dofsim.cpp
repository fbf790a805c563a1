// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: single-image simulation, shard generation,
// renderer validation, benchmarking, and PSF grid utilities.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 validation failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dofsim/dofsim.hpp"

namespace fs = std::filesystem;
using namespace dofsim;

namespace {

// --------------------------------------------------------------------------
// Shared helpers.
// --------------------------------------------------------------------------

std::string self_exe_path() {
    char buf[4096];
    const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    require(n > 0, ErrorCode::IoError, "cannot resolve own executable path");
    buf[n] = '\0';
    return std::string(buf);
}

PlanarImage random_image(int w, int h, uint64_t seed) {
    RngStream rng(seed, 0);
    PlanarImage img(w, h, 3);
    for (float& v : img.data)
        v = static_cast<float>(rng.uniform());
    return img;
}

/// Depth ramp linear in diopters from the nearest stop (top row) to
/// infinity (bottom row).
DepthMap ramp_depth(int w, int h, float d_max) {
    DepthMap depth(w, h);
    for (int y = 0; y < h; ++y) {
        const float t = h > 1 ? static_cast<float>(y) / static_cast<float>(h - 1) : 0.0f;
        const float d = d_max * (1.0f - t);
        const float z = d <= 0.0f ? std::numeric_limits<float>::infinity() : 1.0f / d;
        for (int x = 0; x < w; ++x)
            depth.values[static_cast<size_t>(y) * w + x] = z;
    }
    return depth;
}

PlanarImage bayer_to_plane(const BayerImage& b) {
    return PlanarImage(b.width, b.height, 1, b.data);
}

double max_abs_diff(const PlanarImage& a, const PlanarImage& b) {
    require(a.data.size() == b.data.size(), ErrorCode::DimensionMismatch,
            "image sizes differ");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    return m;
}

SimConfig load_config_or_default(const std::string& path, bool seed_given, uint64_t seed) {
    SimConfig cfg;
    if (!path.empty())
        cfg = load_sim_config(path);
    else
        apply_env_overrides(cfg);
    if (seed_given)
        cfg.rng_seed = seed;
    cfg.validate();
    return cfg;
}

PsfGrid load_grid_or_synthetic(const std::string& path) {
    if (!path.empty())
        return load_psf_grid(path);
    return make_synthetic_grid(SyntheticGridParams{});
}

// --------------------------------------------------------------------------
// simulate: run the full pipeline on one RGB + relative-depth pair and dump
// every intermediate as an image.
// --------------------------------------------------------------------------

struct SimulateArgs {
    std::string rgb, depth, psf, config, out;
    uint64_t seed = 0;
    bool seed_given = false;
    float iso = 800.0f;
    float field = 0.0f;
};

int cmd_simulate(const SimulateArgs& a) {
    const SimConfig cfg = load_config_or_default(a.config, a.seed_given, a.seed);
    const PsfGrid grid = load_grid_or_synthetic(a.psf);

    PlanarImage rgb = load_png(a.rgb);
    require(rgb.channels == 3, ErrorCode::DimensionMismatch, "simulate expects an RGB image");
    PlanarImage rel_img = load_pfm(a.depth);
    require(rel_img.channels == 1, ErrorCode::DimensionMismatch,
            "depth map must be single-channel");
    require(rel_img.width == rgb.width && rel_img.height == rgb.height,
            ErrorCode::DimensionMismatch, "rgb and depth dims must match");

    // The mosaic stage needs even dims; trim one row/column if necessary.
    const int w = rgb.width & ~1;
    const int h = rgb.height & ~1;
    if (w != rgb.width || h != rgb.height) {
        std::fprintf(stderr, "note: trimming %dx%d to %dx%d for the RGGB mosaic\n", rgb.width,
                     rgb.height, w, h);
        AugmentDraw crop;
        crop.crop_w = w;
        crop.crop_h = h;
        RelativeDepthMap rel_full =
            RelativeDepthMap::clamped(rel_img.width, rel_img.height, rel_img.data);
        auto [rgb_c, rel_c] = augment_with_draw(rgb, rel_full, crop);
        rgb = std::move(rgb_c);
        rel_img = PlanarImage(w, h, 1, rel_c.values);
    }
    const RelativeDepthMap rel = RelativeDepthMap::clamped(w, h, rel_img.data);

    RngStream rng(cfg.rng_seed, 0);
    const PlanarImage raw = unprocess(rgb, cfg.isp, &rng);

    DepthScaling scaling;
    scaling.near_m = cfg.z_min;
    scaling.far_m = cfg.z_max;
    const DepthMap depth = scale_depth(rel, scaling);

    const PsfStack stack = radial_slice(grid, a.field);
    const DepthWeights weights = depth_weights(depth, grid.depth_stops);
    RenderOptions ropts;
    ropts.strip_rows = cfg.strip_rows;
    PlanarImage blurred = render_fast(raw, depth, stack, weights, ropts);
    for (float& v : blurred.data)
        v = clamp01(v);

    const BayerImage clean_m = mosaic(raw);
    const BayerImage blur_m = mosaic(blurred);
    RngStream noise_rng = rng.child(0x6E6F6973u);
    const BayerImage noisy = add_noise(blur_m, noise_params(a.iso, cfg.effective_noise()),
                                       noise_rng);
    const BayerImage dq = dequantize(quantize(noisy, cfg.bit_depth), cfg.bit_depth);
    const PlanarImage preview = process(demosaic(dq), cfg.isp);

    PlanarImage wviz(w, h, 1);
    const float denom = static_cast<float>(weights.depth_stops.size() - 1);
    for (size_t i = 0; i < wviz.data.size(); ++i)
        wviz.data[i] = (static_cast<float>(weights.low[i]) + (1.0f - weights.alpha[i])) / denom;

    fs::create_directories(a.out);
    const auto path = [&](const char* name) { return (fs::path(a.out) / name).string(); };
    save_png(bayer_to_plane(clean_m), path("clean_raw.png"), 16);
    save_png(bayer_to_plane(blur_m), path("blurred_raw.png"), 16);
    save_png(bayer_to_plane(dq), path("noisy_raw.png"), 16);
    save_png(preview, path("preview_rgb.png"), 8);
    save_png(wviz, path("depth_weights.png"), 8);

    std::printf("simulate: %dx%d iso=%g field=%g config=%016llx\n", w, h,
                static_cast<double>(a.iso), static_cast<double>(a.field),
                static_cast<unsigned long long>(config_hash(cfg)));
    std::printf("wrote clean_raw.png blurred_raw.png noisy_raw.png preview_rgb.png "
                "depth_weights.png in %s\n",
                a.out.c_str());
    return 0;
}

// --------------------------------------------------------------------------
// gen-shards: deterministic parallel dataset synthesis.
// --------------------------------------------------------------------------

struct GenShardsArgs {
    std::string data, psf, config, out;
    uint64_t seed = 0;
    bool seed_given = false;
    int count = 8;
    int workers = 1;
    int shard_size = 64;
};

int cmd_gen_shards(const GenShardsArgs& a) {
    const SimConfig cfg = load_config_or_default(a.config, a.seed_given, a.seed);
    const PsfGrid grid = load_grid_or_synthetic(a.psf);
    const std::vector<DatasetEntry> entries = scan_dataset(a.data);
    const GenShardsReport rep =
        gen_shards(entries, grid, cfg, a.out, a.count, a.workers, a.shard_size);
    for (const std::string& p : rep.shard_paths)
        std::printf("%s %016llx\n", p.c_str(), static_cast<unsigned long long>(rep.config_hash));
    std::printf("wrote %d of %d samples (%d skipped) across %zu shards\n", rep.produced,
                rep.requested, rep.skipped, rep.shard_paths.size());
    return 0;
}

// --------------------------------------------------------------------------
// validate: compare the layered renderer against the per-pixel reference on
// a scene suite.
// --------------------------------------------------------------------------

struct ValidateArgs {
    std::string psf;
    int size = 96;
    uint64_t seed = 7;
};

int cmd_validate(const ValidateArgs& a) {
    const PsfGrid grid = load_grid_or_synthetic(a.psf);
    const int w = a.size & ~1, h = a.size & ~1;
    require(w >= 16, ErrorCode::InvalidArgument, "size too small");
    const double tol = 1e-5;
    const float field = 0.35f;
    int failures = 0;
    uint64_t scene_seed = a.seed;

    const auto check = [&](const std::string& name, const PlanarImage& img,
                           const DepthMap& depth) {
        const PsfStack stack = radial_slice(grid, field);
        const DepthWeights wts = depth_weights(depth, grid.depth_stops);
        const PlanarImage fast = render_fast(img, depth, stack, wts);
        const PlanarImage oracle = render_oracle(img, depth, grid, field);
        const double err = max_abs_diff(fast, oracle);
        const bool ok = err < tol;
        if (!ok)
            ++failures;
        std::printf("%-28s max|err|=%.3e psnr=%.2f %s\n", name.c_str(), err, psnr(fast, oracle),
                    ok ? "PASS" : "FAIL");
    };

    for (size_t i = 0; i < grid.depth_stops.size(); ++i) {
        const float d = grid.depth_stops[i];
        const float z = d <= 0.0f ? std::numeric_limits<float>::infinity() : 1.0f / d;
        check("constant-depth-stop-" + std::to_string(i), random_image(w, h, scene_seed++),
              DepthMap(w, h, z));
    }
    for (int i = 0; i < 3; ++i)
        check("smooth-ramp-" + std::to_string(i), random_image(w, h, scene_seed++),
              ramp_depth(w, h, grid.depth_stops.front() * (1.0f - 0.25f * i)));
    for (int i = 0; i < 2; ++i) {
        RngStream rng(a.seed, 100 + i);
        const float d_hi = grid.depth_stops.front();
        const float za = 1.0f / (static_cast<float>(rng.uniform()) * d_hi * 0.9f + 0.05f * d_hi);
        const float zb = 1.0f / (static_cast<float>(rng.uniform()) * d_hi * 0.9f + 0.05f * d_hi);
        DepthMap depth(w, h, za);
        for (int y = 0; y < h; ++y)
            for (int x = w / 2; x < w; ++x)
                depth.values[static_cast<size_t>(y) * w + x] = zb;
        check("step-edge-" + std::to_string(i), random_image(w, h, scene_seed++), depth);
    }

    // Spatially varying field: the layered path uses one radial slice, the
    // reference interpolates per pixel. Reported for information only.
    {
        const PlanarImage img = random_image(w, h, scene_seed++);
        const DepthMap depth = ramp_depth(w, h, grid.depth_stops.front());
        PlanarImage fmap(w, h, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                fmap.at(0, y, x) = field_radius_at(static_cast<float>(x), static_cast<float>(y),
                                                   w, h);
        const float center = field_radius_at(0.5f * w, 0.5f * h, w, h);
        const PsfStack stack = radial_slice(grid, center);
        const DepthWeights wts = depth_weights(depth, grid.depth_stops);
        const PlanarImage fast = render_fast(img, depth, stack, wts);
        const PlanarImage oracle = render_oracle(img, depth, grid, fmap);
        std::printf("%-28s max|err|=%.3e psnr=%.2f INFO (per-pixel field)\n", "varying-field",
                    max_abs_diff(fast, oracle), psnr(fast, oracle));
    }

    if (failures == 0)
        std::printf("validate: all %zu checked scenes passed\n", grid.depth_stops.size() + 5);
    else
        std::printf("validate: %d scene(s) failed\n", failures);
    return failures == 0 ? 0 : 3;
}

// --------------------------------------------------------------------------
// bench: wall-clock and peak-memory comparison of the two renderers.
// --------------------------------------------------------------------------

struct BenchArgs {
    std::vector<int> sizes{256, 512};
    int reps = 10;
    int stops = 20;
    int radial = 8;
    int k = 31;
};

struct BenchScene {
    PsfGrid grid;
    PlanarImage img;
    DepthMap depth;
    PsfStack stack;
    DepthWeights weights;
    BenchScene(int size, int stops, int radial, int k)
        : grid([&] {
              SyntheticGridParams p;
              p.depth_count = stops;
              p.radial_count = radial;
              p.kernel_size = k;
              return make_synthetic_grid(p);
          }()),
          img(random_image(size, size, 42)),
          depth(ramp_depth(size, size, grid.depth_stops.front())),
          stack(radial_slice(grid, 0.35f)),
          weights(depth_weights(depth, grid.depth_stops)) {}
};

int cmd_bench_child(const std::string& mode, int size, int stops, int radial, int k, int reps) {
    const BenchScene s(size, stops, radial, k);
    double sum = 0.0;
    for (int r = 0; r < reps; ++r) {
        const PlanarImage out = mode == "fast"
                                    ? render_fast(s.img, s.depth, s.stack, s.weights)
                                    : render_oracle(s.img, s.depth, s.grid, 0.35f);
        sum += out.data[static_cast<size_t>(r) % out.data.size()];
    }
    std::printf("bench-child %s %d %.9g\n", mode.c_str(), size, sum);
    return 0;
}

int cmd_bench(const BenchArgs& a) {
    const std::string self = self_exe_path();
    std::printf("%-6s %12s %12s %8s %10s %12s\n", "size", "fast ms", "oracle ms", "ratio",
                "fast MB", "oracle MB");
    for (int size : a.sizes) {
        const BenchScene s(size, a.stops, a.radial, a.k);
        const BenchResult tf = bench_median(
            [&] { render_fast(s.img, s.depth, s.stack, s.weights); }, a.reps, 2);
        const BenchResult to = bench_median(
            [&] { render_oracle(s.img, s.depth, s.grid, 0.35f); }, a.reps, 1);

        const auto child = [&](const char* mode) {
            const ChildRun r = run_child_measured(
                {self, "bench-child", "--mode", mode, "--size", std::to_string(size), "--stops",
                 std::to_string(a.stops), "--radial", std::to_string(a.radial), "--k",
                 std::to_string(a.k)});
            require(r.exit_code == 0, ErrorCode::IoError, "bench child failed");
            return static_cast<double>(r.peak_rss_kb) / 1024.0;
        };
        const double mem_fast = child("fast");
        const double mem_oracle = child("oracle");
        std::printf("%-6d %12.2f %12.2f %8.2f %10.1f %12.1f\n", size, tf.median_ms, to.median_ms,
                    to.median_ms / tf.median_ms, mem_fast, mem_oracle);
    }
    return 0;
}

// --------------------------------------------------------------------------
// psf-tool: grid inspection and manipulation.
// --------------------------------------------------------------------------

int cmd_psf_inspect(const std::string& in) {
    const PsfGrid g = load_psf_grid(in);
    std::printf("kernel grid: %zu depth stops x %zu radial stops, %dx%d taps, 3 channels\n",
                g.depth_stops.size(), g.radial_stops.size(), g.k, g.k);
    std::printf("depth stops (diopters):");
    for (float d : g.depth_stops)
        std::printf(" %g", static_cast<double>(d));
    std::printf("\nradial stops:");
    for (float r : g.radial_stops)
        std::printf(" %g", static_cast<double>(r));
    double min_sum = 1e9, max_sum = -1e9;
    for (size_t d = 0; d < g.depth_stops.size(); ++d)
        for (size_t r = 0; r < g.radial_stops.size(); ++r)
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                const float* ker = g.kernel(d, r, c);
                for (int i = 0; i < g.k * g.k; ++i)
                    s += ker[i];
                min_sum = std::min(min_sum, s);
                max_sum = std::max(max_sum, s);
            }
    std::printf("\nkernel sums: [%.9f, %.9f]\n", min_sum, max_sum);
    return 0;
}

int cmd_psf_make(const std::string& out, const SyntheticGridParams& p) {
    const PsfGrid g = make_synthetic_grid(p);
    save_psf_grid(g, out);
    std::printf("wrote synthetic grid %zux%zux3x%dx%d to %s\n", g.depth_stops.size(),
                g.radial_stops.size(), g.k, g.k, out.c_str());
    return 0;
}

int cmd_psf_augment(const std::string& in, const std::string& out, float sigma, float sigma_max) {
    const PsfGrid g = load_psf_grid(in);
    const PsfGrid aug = augment_psf_grid(g, sigma, 0.0f, sigma_max);
    save_psf_grid(aug, out);
    std::printf("blurred grid with sigma=%g, wrote %s\n", static_cast<double>(sigma),
                out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"camera defocus, aberration, and sensor-noise simulation toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "run the pipeline on one RGB+depth pair");
    c_sim->add_option("--rgb", sim.rgb, "input RGB PNG")->required();
    c_sim->add_option("--depth", sim.depth, "relative depth PFM in [0,1]")->required();
    c_sim->add_option("--psf", sim.psf, "kernel grid file (default: synthetic)");
    c_sim->add_option("--config", sim.config, "JSON config file");
    c_sim->add_option("--out", sim.out, "output directory")->required();
    CLI::Option* sim_seed = c_sim->add_option("--seed", sim.seed, "override the config RNG seed");
    c_sim->add_option("--iso", sim.iso, "ISO for the noise stage");
    c_sim->add_option("--field", sim.field, "normalized field radius for the kernel slice")
        ->check(CLI::Range(0.0f, 1.0f));

    GenShardsArgs gen;
    CLI::App* c_gen = app.add_subcommand("gen-shards", "synthesize training shards");
    c_gen->add_option("--data", gen.data, "directory of RGB PNGs with sibling depth PFMs")
        ->required();
    c_gen->add_option("--psf", gen.psf, "kernel grid file (default: synthetic)");
    c_gen->add_option("--config", gen.config, "JSON config file");
    c_gen->add_option("--out", gen.out, "output directory")->required();
    CLI::Option* gen_seed = c_gen->add_option("--seed", gen.seed, "override the config RNG seed");
    c_gen->add_option("--count", gen.count, "total samples")->check(CLI::NonNegativeNumber);
    c_gen->add_option("--workers", gen.workers, "worker threads")->check(CLI::PositiveNumber);
    c_gen->add_option("--shard-size", gen.shard_size, "samples per shard")
        ->check(CLI::PositiveNumber);

    ValidateArgs val;
    CLI::App* c_val = app.add_subcommand("validate", "compare fast renderer against reference");
    c_val->add_option("--psf", val.psf, "kernel grid file (default: synthetic)");
    c_val->add_option("--size", val.size, "scene edge length")->check(CLI::PositiveNumber);
    c_val->add_option("--seed", val.seed, "scene RNG seed");

    BenchArgs ben;
    CLI::App* c_ben = app.add_subcommand("bench", "time and memory of both renderers");
    c_ben->add_option("--sizes", ben.sizes, "image edge lengths");
    c_ben->add_option("--reps", ben.reps, "timed repetitions")->check(CLI::Range(1, 1000));
    c_ben->add_option("--stops", ben.stops, "depth stops in the synthetic grid");
    c_ben->add_option("--radial", ben.radial, "radial stops in the synthetic grid");
    c_ben->add_option("--k", ben.k, "kernel size in the synthetic grid");

    std::string bc_mode = "fast";
    int bc_size = 512, bc_stops = 20, bc_radial = 8, bc_k = 31, bc_reps = 1;
    CLI::App* c_bc = app.add_subcommand("bench-child", "");
    c_bc->group("");  // internal helper, hidden from help
    c_bc->add_option("--mode", bc_mode)->check(CLI::IsMember({"fast", "oracle"}));
    c_bc->add_option("--size", bc_size);
    c_bc->add_option("--stops", bc_stops);
    c_bc->add_option("--radial", bc_radial);
    c_bc->add_option("--k", bc_k);
    c_bc->add_option("--reps", bc_reps);

    CLI::App* c_psf = app.add_subcommand("psf-tool", "kernel grid utilities");
    c_psf->require_subcommand(1);
    std::string pi_in;
    CLI::App* c_pi = c_psf->add_subcommand("inspect", "print grid geometry and stops");
    c_pi->add_option("--in", pi_in, "grid file")->required();
    std::string pm_out;
    SyntheticGridParams pm;
    CLI::App* c_pm = c_psf->add_subcommand("make-synthetic", "write a synthetic defocus grid");
    c_pm->add_option("--out", pm_out, "output file")->required();
    c_pm->add_option("--stops", pm.depth_count, "depth stop count");
    c_pm->add_option("--radial", pm.radial_count, "radial stop count");
    c_pm->add_option("--k", pm.kernel_size, "kernel size (odd)");
    c_pm->add_option("--z-min", pm.z_min, "nearest depth in meters");
    c_pm->add_option("--px-per-diopter", pm.px_per_diopter, "blur radius per diopter");
    c_pm->add_option("--curvature", pm.field_curvature, "radial blur growth");
    c_pm->add_option("--chroma", pm.chroma, "per-channel blur spread");
    std::string pa_in, pa_out;
    float pa_sigma = 0.5f, pa_sigma_max = 3.0f;
    CLI::App* c_pa = c_psf->add_subcommand("augment", "Gaussian-blur every kernel");
    c_pa->add_option("--in", pa_in, "grid file")->required();
    c_pa->add_option("--out", pa_out, "output file")->required();
    c_pa->add_option("--sigma", pa_sigma, "blur sigma in kernel pixels")->required();
    c_pa->add_option("--sigma-max", pa_sigma_max, "allowed sigma upper bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_sim->parsed()) {
            sim.seed_given = sim_seed->count() > 0;
            return cmd_simulate(sim);
        }
        if (c_gen->parsed()) {
            gen.seed_given = gen_seed->count() > 0;
            return cmd_gen_shards(gen);
        }
        if (c_val->parsed())
            return cmd_validate(val);
        if (c_ben->parsed())
            return cmd_bench(ben);
        if (c_bc->parsed())
            return cmd_bench_child(bc_mode, bc_size, bc_stops, bc_radial, bc_k, bc_reps);
        if (c_psf->parsed()) {
            if (c_pi->parsed())
                return cmd_psf_inspect(pi_in);
            if (c_pm->parsed())
                return cmd_psf_make(pm_out, pm);
            if (c_pa->parsed())
                return cmd_psf_augment(pa_in, pa_out, pa_sigma, pa_sigma_max);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", error_code_name(e.code()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
