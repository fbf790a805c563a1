// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command line tool: exit codes, file outputs, and
// determinism across worker counts.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dofsim/config.hpp"
#include "dofsim/dataprep.hpp"
#include "dofsim/image_io.hpp"
#include "dofsim/psf.hpp"
#include "dofsim/rng.hpp"

namespace fs = std::filesystem;
using namespace dofsim;

namespace {

fs::path fresh_dir(const char* name) {
    fs::path d = fs::temp_directory_path() / "dofsim_test_cli" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Runs the tool with `args`, returns the exit code; stdout+stderr land in
// *out when given.
int run_cli(const std::string& args, std::string* out = nullptr) {
    static int counter = 0;
    const fs::path log =
        fs::temp_directory_path() / ("dofsim_cli_log_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(DOFSIM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) {
        std::ifstream f(log);
        out->assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    }
    fs::remove(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// A small grid that renders quickly: 6 depth stops, 3 radial stops, 7x7 taps.
std::string write_small_grid(const fs::path& dir) {
    SyntheticGridParams p;
    p.depth_count = 6;
    p.radial_count = 3;
    p.kernel_size = 7;
    p.z_min = 0.25f;
    p.px_per_diopter = 0.6f;
    p.field_curvature = 0.2f;
    p.chroma = 0.02f;
    const std::string path = (dir / "grid.psf").string();
    save_psf_grid(make_synthetic_grid(p), path);
    return path;
}

void write_source_pair(const fs::path& dir, const std::string& stem, int w, int h,
                       uint64_t seed) {
    RngStream rng(seed, 0);
    PlanarImage rgb(w, h, 3);
    for (float& v : rgb.data)
        v = static_cast<float>(rng.uniform());
    save_png(rgb, (dir / (stem + ".png")).string(), 16);
    PlanarImage rel(w, h, 1);
    for (float& v : rel.data)
        v = static_cast<float>(rng.uniform());
    save_pfm(rel, (dir / (stem + ".pfm")).string());
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("simulate"), 1);  // missing required options
    EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, PsfToolMakeInspectAugment) {
    const fs::path dir = fresh_dir("psftool");
    const std::string grid_path = (dir / "g.psf").string();
    EXPECT_EQ(run_cli("psf-tool make-synthetic --out " + grid_path +
                      " --stops 4 --radial 3 --k 9 --z-min 0.5"),
              0);
    const PsfGrid g = load_psf_grid(grid_path);
    EXPECT_NO_THROW(g.validate());
    EXPECT_EQ(g.depth_count(), 4);
    EXPECT_EQ(g.k, 9);

    std::string out;
    EXPECT_EQ(run_cli("psf-tool inspect --in " + grid_path, &out), 0);
    EXPECT_NE(out.find("4 depth stops x 3 radial stops"), std::string::npos) << out;

    const std::string aug_path = (dir / "ga.psf").string();
    EXPECT_EQ(run_cli("psf-tool augment --in " + grid_path + " --out " + aug_path +
                      " --sigma 0.8"),
              0);
    const PsfGrid ga = load_psf_grid(aug_path);
    EXPECT_NO_THROW(ga.validate());
    EXPECT_NE(ga.kernels, g.kernels);

    EXPECT_EQ(run_cli("psf-tool inspect --in " + (dir / "absent.psf").string()), 2);
}

TEST(Cli, SimulateMissingInputsFailCleanly) {
    const fs::path dir = fresh_dir("simmiss");
    std::string out;
    EXPECT_EQ(run_cli("simulate --rgb " + (dir / "no.png").string() + " --depth " +
                          (dir / "no.pfm").string() + " --out " + (dir / "o").string(),
                      &out),
              2);
    EXPECT_NE(out.find("error ["), std::string::npos) << out;
}

TEST(Cli, SimulateWritesEveryStage) {
    const fs::path dir = fresh_dir("sim");
    const std::string grid_path = write_small_grid(dir);
    // Odd dims on purpose: the tool trims to even for the mosaic stage.
    write_source_pair(dir, "scene", 34, 33, 5);
    const fs::path out_dir = dir / "out";
    std::string out;
    EXPECT_EQ(run_cli("simulate --rgb " + (dir / "scene.png").string() + " --depth " +
                          (dir / "scene.pfm").string() + " --psf " + grid_path + " --out " +
                          out_dir.string() + " --seed 3 --iso 800 --field 0.35",
                      &out),
              0);
    EXPECT_NE(out.find("trimming 34x33 to 34x32"), std::string::npos) << out;

    for (const char* name : {"clean_raw.png", "blurred_raw.png", "noisy_raw.png",
                             "preview_rgb.png", "depth_weights.png"}) {
        const fs::path p = out_dir / name;
        ASSERT_TRUE(fs::exists(p)) << name;
        const PlanarImage img = load_png(p.string());
        EXPECT_EQ(img.width, 34) << name;
        EXPECT_EQ(img.height, 32) << name;
    }
    EXPECT_EQ(load_png((out_dir / "preview_rgb.png").string()).channels, 3);
    EXPECT_EQ(load_png((out_dir / "clean_raw.png").string()).channels, 1);
}

TEST(Cli, ValidateAgreesOnSmallScenes) {
    const fs::path dir = fresh_dir("validate");
    const std::string grid_path = write_small_grid(dir);
    std::string out;
    EXPECT_EQ(run_cli("validate --psf " + grid_path + " --size 48 --seed 3", &out), 0);
    EXPECT_NE(out.find("validate: all"), std::string::npos) << out;
    EXPECT_EQ(out.find("FAIL"), std::string::npos) << out;
}

TEST(Cli, GenShardsIsWorkerCountInvariant) {
    const fs::path dir = fresh_dir("gen");
    const std::string grid_path = write_small_grid(dir);
    const fs::path data = dir / "data";
    fs::create_directories(data);
    write_source_pair(data, "a", 48, 40, 11);
    write_source_pair(data, "b", 48, 40, 12);

    const fs::path cfg_path = dir / "cfg.json";
    std::ofstream(cfg_path) << "{\"rng_seed\": 9, \"patch_size\": 32}";
    const SimConfig cfg = load_sim_config(cfg_path.string());

    const fs::path o1 = dir / "o1";
    const fs::path o4 = dir / "o4";
    std::string out;
    EXPECT_EQ(run_cli("gen-shards --data " + data.string() + " --psf " + grid_path +
                          " --config " + cfg_path.string() + " --out " + o1.string() +
                          " --count 4 --workers 1 --shard-size 2",
                      &out),
              0);
    EXPECT_NE(out.find("wrote 4 of 4 samples"), std::string::npos) << out;
    EXPECT_EQ(run_cli("gen-shards --data " + data.string() + " --psf " + grid_path +
                      " --config " + cfg_path.string() + " --out " + o4.string() +
                      " --count 4 --workers 4 --shard-size 2"),
              0);

    for (const char* name : {"shard-00000.bin", "shard-00001.bin"}) {
        std::ifstream f1(o1 / name, std::ios::binary);
        std::ifstream f4(o4 / name, std::ios::binary);
        ASSERT_TRUE(f1.good() && f4.good()) << name;
        const std::string b1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
        const std::string b4((std::istreambuf_iterator<char>(f4)),
                             std::istreambuf_iterator<char>());
        ASSERT_FALSE(b1.empty());
        EXPECT_EQ(b1, b4) << name;
    }
    const Shard s = read_shard((o1 / "shard-00000.bin").string());
    EXPECT_EQ(s.config_hash, config_hash(cfg));
    EXPECT_EQ(s.patch_size, 32u);

    const fs::path empty = dir / "nothing";
    fs::create_directories(empty);
    EXPECT_EQ(run_cli("gen-shards --data " + empty.string() + " --out " +
                      (dir / "oe").string()),
              2);
}

TEST(Cli, BenchChildRendersBothModes) {
    std::string out;
    EXPECT_EQ(run_cli("bench-child --mode fast --size 32 --stops 3 --radial 2 --k 31 --reps 2",
                      &out),
              0);
    EXPECT_NE(out.find("bench-child fast 32"), std::string::npos) << out;
    EXPECT_EQ(run_cli("bench-child --mode oracle --size 32 --stops 3 --radial 2 --k 31 --reps 1",
                      &out),
              0);
    EXPECT_NE(out.find("bench-child oracle 32"), std::string::npos) << out;
}
