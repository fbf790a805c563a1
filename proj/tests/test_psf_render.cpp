// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Kernel grids (construction, interpolation, augmentation, file format) and
// the two blur renderers, including fast-vs-oracle equivalence.

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"
#include "dofsim/psf.hpp"
#include "dofsim/render.hpp"
#include "dofsim/rng.hpp"

namespace fs = std::filesystem;
using namespace dofsim;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "dofsim_test_psf";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

template <typename F>
ErrorCode thrown_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error to be thrown";
    return ErrorCode::InvalidArgument;
}

PlanarImage random_rgb(int w, int h, uint64_t seed) {
    RngStream rng(seed, 0);
    PlanarImage img(w, h, 3);
    for (float& v : img.data)
        v = static_cast<float>(rng.uniform());
    return img;
}

// Depth ramp linear in diopters across columns, from d_max at x = 0 down to
// infinity at the right edge.
DepthMap diopter_ramp(int w, int h, float d_max) {
    DepthMap depth(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float d = d_max * (1.0f - static_cast<float>(x) / static_cast<float>(w - 1));
            depth.at(y, x) = d > 0.0f ? 1.0f / d : std::numeric_limits<float>::infinity();
        }
    }
    return depth;
}

PlanarImage stack_kernel_image(const PsfStack& stack, int d) {
    PlanarImage ker(stack.k, stack.k, 3);
    for (int c = 0; c < 3; ++c)
        std::memcpy(ker.plane(c), stack.kernel(d, c), stack.kernel_area() * sizeof(float));
    return ker;
}

SyntheticGridParams small_grid_params() {
    SyntheticGridParams p;
    p.depth_count = 6;
    p.radial_count = 3;
    p.kernel_size = 7;
    p.z_min = 0.25f;
    p.px_per_diopter = 0.6f;
    p.field_curvature = 0.2f;
    p.chroma = 0.02f;
    return p;
}

float max_abs_diff(const PlanarImage& a, const PlanarImage& b) {
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

bool bit_equal(const PlanarImage& a, const PlanarImage& b) {
    return a.width == b.width && a.height == b.height && a.channels == b.channels &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic grid construction.
// ---------------------------------------------------------------------------

TEST(SyntheticGrid, DefaultParametersValidate) {
    const PsfGrid grid = make_synthetic_grid(SyntheticGridParams{});
    EXPECT_NO_THROW(grid.validate());
    EXPECT_EQ(grid.depth_count(), 20);
    EXPECT_EQ(grid.radial_count(), 20);
    EXPECT_EQ(grid.k, 31);
    EXPECT_FLOAT_EQ(grid.depth_stops.front(), 10.0f);
    EXPECT_EQ(grid.depth_stops.back(), 0.0f);
    EXPECT_EQ(grid.radial_stops.front(), 0.0f);
    EXPECT_EQ(grid.radial_stops.back(), 1.0f);
}

TEST(SyntheticGrid, InfinityStopIsDelta) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const int c0 = (grid.k - 1) / 2;
    const int last = grid.depth_count() - 1;
    for (int r = 0; r < grid.radial_count(); ++r) {
        for (int c = 0; c < 3; ++c) {
            const float* ker = grid.kernel(last, r, c);
            for (int y = 0; y < grid.k; ++y)
                for (int x = 0; x < grid.k; ++x) {
                    const float expect = (y == c0 && x == c0) ? 1.0f : 0.0f;
                    EXPECT_EQ(ker[y * grid.k + x], expect);
                }
        }
    }
}

TEST(SyntheticGrid, ZeroDefocusGrowthGivesDeltaEverywhere) {
    SyntheticGridParams p = small_grid_params();
    p.px_per_diopter = 0.0f;
    p.field_curvature = 0.0f;
    p.chroma = 0.0f;
    p.kernel_size = 5;
    const PsfGrid grid = make_synthetic_grid(p);
    const int c0 = (grid.k - 1) / 2;
    for (int d = 0; d < grid.depth_count(); ++d)
        for (int r = 0; r < grid.radial_count(); ++r)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(grid.kernel(d, r, c)[c0 * grid.k + c0], 1.0f);
}

TEST(SyntheticGrid, RejectsDisksThatDoNotFit) {
    SyntheticGridParams p;  // defaults: z_min 0.1, k 31
    p.px_per_diopter = 1.2f;
    EXPECT_EQ(thrown_code([&] { make_synthetic_grid(p); }), ErrorCode::InvalidArgument);
}

TEST(PsfGrid, ValidateRejectsCorruption) {
    const PsfGrid base = make_synthetic_grid(small_grid_params());

    PsfGrid bad_sum = base;
    for (size_t i = 0; i < bad_sum.kernel_area(); ++i)
        bad_sum.kernel(1, 1, 0)[i] *= 0.9f;
    EXPECT_EQ(thrown_code([&] { bad_sum.validate(); }), ErrorCode::NormalizationOutOfRange);

    PsfGrid bad_k = base;
    bad_k.k = 4;
    EXPECT_EQ(thrown_code([&] { bad_k.validate(); }), ErrorCode::NonOddKernel);

    PsfGrid bad_stops = base;
    std::swap(bad_stops.depth_stops[0], bad_stops.depth_stops[1]);
    EXPECT_EQ(thrown_code([&] { bad_stops.validate(); }), ErrorCode::InvalidArgument);

    PsfGrid neg_stop = base;
    neg_stop.depth_stops.back() = -0.5f;
    EXPECT_EQ(thrown_code([&] { neg_stop.validate(); }), ErrorCode::InvalidArgument);

    PsfGrid bad_radial = base;  // R = 3, stops must span [0, 1]
    bad_radial.radial_stops.back() = 0.9f;
    EXPECT_EQ(thrown_code([&] { bad_radial.validate(); }), ErrorCode::InvalidArgument);

    PsfGrid neg_tap = base;
    neg_tap.kernel(0, 0, 0)[0] = -0.01f;
    EXPECT_EQ(thrown_code([&] { neg_tap.validate(); }), ErrorCode::NormalizationOutOfRange);

    PsfGrid one_stop = base;
    one_stop.depth_stops.resize(1);
    EXPECT_EQ(thrown_code([&] { one_stop.validate(); }), ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Depth weights.
// ---------------------------------------------------------------------------

TEST(DepthWeights, ExactValuesAndClamping) {
    const std::vector<float> stops = {10.0f, 5.0f, 0.0f};
    const float inf = std::numeric_limits<float>::infinity();
    // Depths: exactly at a stop, between stops, at infinity, nearer than the
    // nearest stop (clamps).
    const DepthMap depth(4, 1, {0.2f, 0.125f, inf, 0.05f});
    const DepthWeights w = depth_weights(depth, stops);
    ASSERT_EQ(w.size(), 4u);

    EXPECT_EQ(w.index_low(0), 1);  // 1/0.2 = 5 diopters: exactly stop 1
    EXPECT_FLOAT_EQ(w.weight_low(0), 1.0f);

    EXPECT_EQ(w.index_low(1), 0);  // 8 diopters: between 10 and 5
    EXPECT_FLOAT_EQ(w.weight_low(1), 0.6f);
    EXPECT_FLOAT_EQ(w.weight_high(1), 0.4f);

    EXPECT_EQ(w.index_low(2), 1);  // infinity: full weight on the last stop
    EXPECT_FLOAT_EQ(w.weight_low(2), 0.0f);
    EXPECT_FLOAT_EQ(w.weight_high(2), 1.0f);

    EXPECT_EQ(w.index_low(3), 0);  // 20 diopters clamps to the nearest stop
    EXPECT_FLOAT_EQ(w.weight_low(3), 1.0f);
}

TEST(DepthWeights, PositionIsMonotoneInDiopter) {
    std::vector<float> stops;
    for (int i = 0; i < 8; ++i)
        stops.push_back(9.0f - 1.25f * static_cast<float>(i));  // 9 .. 0.25
    RngStream rng(55, 0);
    std::vector<std::pair<float, float>> samples;  // (diopter, interpolation position)
    for (int i = 0; i < 300; ++i) {
        const float d = static_cast<float>(rng.uniform(0.01, 11.0));
        const DepthMap depth(1, 1, {1.0f / d});
        const DepthWeights w = depth_weights(depth, stops);
        samples.emplace_back(d, static_cast<float>(w.index_low(0)) + w.weight_high(0));
    }
    std::sort(samples.begin(), samples.end());
    for (size_t i = 1; i < samples.size(); ++i)
        EXPECT_LE(samples[i].second, samples[i - 1].second + 1e-5f);
}

TEST(DepthWeights, RejectsBadStopLists) {
    const DepthMap depth(1, 1, {1.0f});
    EXPECT_EQ(thrown_code([&] { depth_weights(depth, {5.0f}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(thrown_code([&] { depth_weights(depth, {0.0f, 5.0f}); }),
              ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Radial slicing.
// ---------------------------------------------------------------------------

TEST(RadialSlice, ExactStopsCopyVerbatim) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());  // stops {0, 0.5, 1}
    const size_t bytes = grid.kernel_area() * sizeof(float);
    const PsfStack at0 = radial_slice(grid, 0.0f);
    const PsfStack at_mid = radial_slice(grid, 0.5f);
    const PsfStack at1 = radial_slice(grid, 1.0f);
    EXPECT_EQ(at0.depth_stops, grid.depth_stops);
    for (int d = 0; d < grid.depth_count(); ++d) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(0, std::memcmp(at0.kernel(d, c), grid.kernel(d, 0, c), bytes));
            EXPECT_EQ(0, std::memcmp(at_mid.kernel(d, c), grid.kernel(d, 1, c), bytes));
            EXPECT_EQ(0, std::memcmp(at1.kernel(d, c), grid.kernel(d, 2, c), bytes));
        }
    }
}

TEST(RadialSlice, InteriorBlendMatchesDirectComputation) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const float r = 0.25f;  // halfway between stops 0 and 0.5
    const PsfStack s = radial_slice(grid, r);
    const size_t area = grid.kernel_area();
    for (int d = 0; d < grid.depth_count(); ++d) {
        for (int c = 0; c < 3; ++c) {
            const float* a = grid.kernel(d, 0, c);
            const float* b = grid.kernel(d, 1, c);
            std::vector<double> blend(area);
            double sum = 0.0;
            for (size_t i = 0; i < area; ++i) {
                blend[i] = 0.5 * static_cast<double>(a[i]) + 0.5 * static_cast<double>(b[i]);
                sum += blend[i];
            }
            const float* got = s.kernel(d, c);
            for (size_t i = 0; i < area; ++i)
                EXPECT_NEAR(got[i], blend[i] / sum, 1e-6);
        }
    }
}

TEST(RadialSlice, SingleRadialColumnCopies) {
    SyntheticGridParams p = small_grid_params();
    p.radial_count = 1;
    const PsfGrid grid = make_synthetic_grid(p);
    const PsfStack s = radial_slice(grid, 0.9f);
    for (int d = 0; d < grid.depth_count(); ++d)
        for (int c = 0; c < 3; ++c)
            EXPECT_EQ(0, std::memcmp(s.kernel(d, c), grid.kernel(d, 0, c),
                                     grid.kernel_area() * sizeof(float)));
}

TEST(RadialSlice, RejectsOutOfRangeRadius) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    EXPECT_EQ(thrown_code([&] { radial_slice(grid, -0.1f); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(thrown_code([&] { radial_slice(grid, 1.1f); }), ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Kernel augmentation.
// ---------------------------------------------------------------------------

TEST(AugmentPsf, SigmaZeroIsBitExact) {
    const PsfStack s = radial_slice(make_synthetic_grid(small_grid_params()), 0.4f);
    const PsfStack out = augment_psf(s, 0.0f);
    EXPECT_EQ(out.kernels, s.kernels);
}

TEST(AugmentPsf, SigmaRangeEnforced) {
    const PsfStack s = radial_slice(make_synthetic_grid(small_grid_params()), 0.0f);
    EXPECT_EQ(thrown_code([&] { augment_psf(s, -0.1f); }), ErrorCode::SigmaOutOfRange);
    EXPECT_EQ(thrown_code([&] { augment_psf(s, 0.6f, 0.0f, 0.5f); }),
              ErrorCode::SigmaOutOfRange);
}

TEST(AugmentPsf, DeltaBecomesTruncatedGaussian) {
    SyntheticGridParams p = small_grid_params();
    p.px_per_diopter = 0.0f;
    p.field_curvature = 0.0f;
    p.chroma = 0.0f;
    p.kernel_size = 9;
    const PsfStack s = radial_slice(make_synthetic_grid(p), 0.0f);
    const float sigma = 1.0f;
    const PsfStack blurred = augment_psf(s, sigma);

    // Expected: normalized outer product of the truncated 1-D taps.
    const int radius = 3;
    std::vector<double> taps(7);
    double tsum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i);
        tsum += taps[static_cast<size_t>(i + radius)];
    }
    for (double& t : taps)
        t /= tsum;
    const int k = s.k, c0 = (k - 1) / 2;
    const float* got = blurred.kernel(2, 1);
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            double expect = 0.0;
            if (std::abs(y - c0) <= radius && std::abs(x - c0) <= radius)
                expect = taps[static_cast<size_t>(y - c0 + radius)] *
                         taps[static_cast<size_t>(x - c0 + radius)];
            EXPECT_NEAR(got[static_cast<size_t>(y) * k + x], expect, 1e-6);
        }
    }
}

TEST(AugmentPsf, OutputKernelsSumToOne) {
    const PsfStack s = radial_slice(make_synthetic_grid(small_grid_params()), 0.7f);
    const PsfStack out = augment_psf(s, 0.8f);
    for (int d = 0; d < out.depth_count(); ++d) {
        for (int c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (size_t i = 0; i < out.kernel_area(); ++i)
                sum += out.kernel(d, c)[i];
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(AugmentPsf, SubTruncationSigmaKeepsDeltasExact) {
    SyntheticGridParams p = small_grid_params();
    p.px_per_diopter = 0.0f;
    p.field_curvature = 0.0f;
    p.chroma = 0.0f;
    p.kernel_size = 5;
    const PsfStack s = radial_slice(make_synthetic_grid(p), 0.0f);
    // sigma below 1/3 truncates to a zero-radius blur: an exact no-op.
    const PsfStack out = augment_psf(s, 0.2f);
    EXPECT_EQ(out.kernels, s.kernels);
}

// ---------------------------------------------------------------------------
// Grid file format.
// ---------------------------------------------------------------------------

TEST(GridIo, SaveLoadRoundTrip) {
    SyntheticGridParams p;
    p.depth_count = 4;
    p.radial_count = 3;
    p.kernel_size = 9;
    p.z_min = 0.5f;
    const PsfGrid grid = make_synthetic_grid(p);
    const fs::path path = temp_dir() / "rt.psf";
    save_psf_grid(grid, path.string());
    const PsfGrid back = load_psf_grid(path.string());
    EXPECT_EQ(back.depth_stops, grid.depth_stops);
    EXPECT_EQ(back.radial_stops, grid.radial_stops);
    EXPECT_EQ(back.k, grid.k);
    ASSERT_EQ(back.kernels.size(), grid.kernels.size());
    for (size_t i = 0; i < grid.kernels.size(); ++i)
        EXPECT_NEAR(back.kernels[i], grid.kernels[i], 2e-5f);
}

TEST(GridIo, LoaderRenormalizesSmallDrift) {
    const fs::path path = temp_dir() / "drift.psf";
    {
        std::ofstream f(path, std::ios::binary);
        f << "PSFGRID1\n2 1 1 3\n1 0\n0\n";
        const float v = 1.0005f;  // within the 1e-3 renormalization band
        for (int i = 0; i < 6; ++i)
            f.write(reinterpret_cast<const char*>(&v), 4);
    }
    const PsfGrid grid = load_psf_grid(path.string());
    for (float v : grid.kernels)
        EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(GridIo, RejectsGrossMisnormalization) {
    const fs::path path = temp_dir() / "bad_sum.psf";
    {
        std::ofstream f(path, std::ios::binary);
        f << "PSFGRID1\n2 1 1 3\n1 0\n0\n";
        const float v = 0.9f;
        for (int i = 0; i < 6; ++i)
            f.write(reinterpret_cast<const char*>(&v), 4);
    }
    EXPECT_EQ(thrown_code([&] { load_psf_grid(path.string()); }),
              ErrorCode::NormalizationOutOfRange);
}

TEST(GridIo, RejectsBadMagicTruncationAndEvenK) {
    const fs::path bad_magic = temp_dir() / "magic.psf";
    std::ofstream(bad_magic, std::ios::binary) << "PSFGRIDX\n2 1 1 3\n1 0\n0\n";
    EXPECT_EQ(thrown_code([&] { load_psf_grid(bad_magic.string()); }),
              ErrorCode::MalformedHeader);

    const fs::path trunc = temp_dir() / "trunc.psf";
    {
        std::ofstream f(trunc, std::ios::binary);
        f << "PSFGRID1\n2 1 1 3\n1 0\n0\n";
        const float v = 1.0f;
        for (int i = 0; i < 3; ++i)  // needs 6 floats
            f.write(reinterpret_cast<const char*>(&v), 4);
    }
    EXPECT_EQ(thrown_code([&] { load_psf_grid(trunc.string()); }), ErrorCode::MalformedHeader);

    const fs::path even_k = temp_dir() / "evenk.psf";
    std::ofstream(even_k, std::ios::binary) << "PSFGRID1\n2 1 4 3\n";
    EXPECT_EQ(thrown_code([&] { load_psf_grid(even_k.string()); }), ErrorCode::NonOddKernel);

    const fs::path bad_stops = temp_dir() / "badstops.psf";
    {
        std::ofstream f(bad_stops, std::ios::binary);
        f << "PSFGRID1\n2 1 1 3\n0 1\n0\n";
        const float v = 1.0f;
        for (int i = 0; i < 6; ++i)
            f.write(reinterpret_cast<const char*>(&v), 4);
    }
    EXPECT_EQ(thrown_code([&] { load_psf_grid(bad_stops.string()); }),
              ErrorCode::MalformedHeader);

    EXPECT_EQ(thrown_code([&] { load_psf_grid((temp_dir() / "absent.psf").string()); }),
              ErrorCode::IoError);
}

// ---------------------------------------------------------------------------
// Convolution engine.
// ---------------------------------------------------------------------------

TEST(Convolve, DeltaKernelIsIdentityOnDirectPath) {
    const PlanarImage img = random_rgb(20, 14, 1);
    PlanarImage ker(5, 5, 3);
    for (int c = 0; c < 3; ++c)
        ker.at(c, 2, 2) = 1.0f;
    const PlanarImage out = convolve(img, ker);  // k = 5: direct
    EXPECT_TRUE(bit_equal(out, img));
}

TEST(Convolve, DeltaKernelIsNearIdentityOnFftPath) {
    const PlanarImage img = random_rgb(40, 36, 2);
    PlanarImage ker(31, 31, 3);
    for (int c = 0; c < 3; ++c)
        ker.at(c, 15, 15) = 1.0f;
    const PlanarImage out = convolve(img, ker);  // k = 31: frequency domain
    EXPECT_LT(max_abs_diff(out, img), 1e-6f);
}

TEST(Convolve, CornerTapPinsTrueConvolutionOrientation) {
    // A single tap at kernel position (0,0) must shift content toward the
    // origin: out(y, x) = in(min(y+1, h-1), min(x+1, w-1)) for k = 3.
    const int w = 8, h = 7;
    PlanarImage img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(0, y, x) = static_cast<float>(y * 16 + x);
    PlanarImage ker(3, 3, 1);
    ker.at(0, 0, 0) = 1.0f;
    const PlanarImage out = convolve(img, ker);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            EXPECT_EQ(out.at(0, y, x), img.at(0, std::min(y + 1, h - 1), std::min(x + 1, w - 1)))
                << "y=" << y << " x=" << x;
}

TEST(Convolve, ConstantImageIsPreserved) {
    PlanarImage img(26, 22, 3);
    std::fill(img.data.begin(), img.data.end(), 0.7f);
    RngStream rng(3, 0);
    PlanarImage ker(17, 17, 3);
    for (float& v : ker.data)
        v = static_cast<float>(rng.uniform());
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (size_t i = 0; i < ker.plane_size(); ++i)
            sum += ker.plane(c)[i];
        for (size_t i = 0; i < ker.plane_size(); ++i)
            ker.plane(c)[i] = static_cast<float>(ker.plane(c)[i] / sum);
    }
    RenderOptions direct;
    direct.method = ConvMethod::Direct;
    RenderOptions fft;
    fft.method = ConvMethod::Fft;
    EXPECT_LT(max_abs_diff(convolve(img, ker, direct), img), 1e-6f);
    EXPECT_LT(max_abs_diff(convolve(img, ker, fft), img), 1e-6f);
}

TEST(Convolve, DirectAndFftAgree) {
    const PlanarImage img = random_rgb(52, 44, 4);
    RngStream rng(5, 0);
    PlanarImage ker(17, 17, 3);
    for (float& v : ker.data)
        v = static_cast<float>(rng.uniform());
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (size_t i = 0; i < ker.plane_size(); ++i)
            sum += ker.plane(c)[i];
        for (size_t i = 0; i < ker.plane_size(); ++i)
            ker.plane(c)[i] = static_cast<float>(ker.plane(c)[i] / sum);
    }
    RenderOptions direct;
    direct.method = ConvMethod::Direct;
    RenderOptions fft;
    fft.method = ConvMethod::Fft;
    EXPECT_LT(max_abs_diff(convolve(img, ker, direct), convolve(img, ker, fft)), 1e-5f);
}

TEST(Convolve, StripHeightDoesNotChangeResults) {
    const PlanarImage img = random_rgb(30, 70, 6);
    RngStream rng(7, 0);
    PlanarImage ker(21, 21, 3);
    for (float& v : ker.data)
        v = static_cast<float>(rng.uniform());
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (size_t i = 0; i < ker.plane_size(); ++i)
            sum += ker.plane(c)[i];
        for (size_t i = 0; i < ker.plane_size(); ++i)
            ker.plane(c)[i] = static_cast<float>(ker.plane(c)[i] / sum);
    }
    RenderOptions base;
    base.method = ConvMethod::Fft;
    base.strip_rows = 64;
    const PlanarImage ref = convolve(img, ker, base);
    for (int rows : {4, 16, 128}) {
        RenderOptions o;
        o.method = ConvMethod::Fft;
        o.strip_rows = rows;
        EXPECT_LT(max_abs_diff(convolve(img, ker, o), ref), 1e-6f) << "strip_rows=" << rows;
    }
}

TEST(Convolve, ImpulseResponseIsLocal) {
    PlanarImage img(33, 33, 1);
    img.at(0, 16, 16) = 1.0f;
    RngStream rng(8, 0);
    PlanarImage ker(7, 7, 1);
    double sum = 0.0;
    for (float& v : ker.data) {
        v = static_cast<float>(rng.uniform());
        sum += v;
    }
    for (float& v : ker.data)
        v = static_cast<float>(v / sum);
    const PlanarImage out = convolve(img, ker);  // direct
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x)
            if (std::max(std::abs(y - 16), std::abs(x - 16)) > 3)
                EXPECT_EQ(out.at(0, y, x), 0.0f) << "y=" << y << " x=" << x;

    PlanarImage big(48, 48, 1);
    big.at(0, 24, 24) = 1.0f;
    PlanarImage kbig(17, 17, 1);
    double s2 = 0.0;
    for (float& v : kbig.data) {
        v = static_cast<float>(rng.uniform());
        s2 += v;
    }
    for (float& v : kbig.data)
        v = static_cast<float>(v / s2);
    const PlanarImage out2 = convolve(big, kbig);  // fft
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (std::max(std::abs(y - 24), std::abs(x - 24)) > 8)
                EXPECT_LE(std::abs(out2.at(0, y, x)), 1e-6f) << "y=" << y << " x=" << x;
}

TEST(Convolve, RejectsBadKernels) {
    const PlanarImage img = random_rgb(8, 8, 9);
    EXPECT_EQ(thrown_code([&] { convolve(img, PlanarImage(4, 4, 3)); }), ErrorCode::EvenKernel);
    EXPECT_EQ(thrown_code([&] { convolve(img, PlanarImage(3, 5, 3)); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(thrown_code([&] { convolve(img, PlanarImage(3, 3, 1)); }),
              ErrorCode::DimensionMismatch);
}

// ---------------------------------------------------------------------------
// Layered renderer vs single convolution and vs the oracle.
// ---------------------------------------------------------------------------

TEST(RenderFast, ConstantDepthAtStopEqualsSingleConvolution) {
    SyntheticGridParams p;
    p.depth_count = 5;
    p.radial_count = 3;
    p.kernel_size = 31;
    p.z_min = 0.5f;  // stops: 2, 1.5, 1, 0.5, 0 diopters
    p.px_per_diopter = 4.0f;
    const PsfGrid grid = make_synthetic_grid(p);
    const PlanarImage img = random_rgb(64, 64, 11);
    const DepthMap depth(64, 64, 1.0f);  // exactly stop index 2
    const PsfStack stack = radial_slice(grid, 0.35f);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    for (size_t i = 0; i < w.size(); ++i) {
        ASSERT_EQ(w.index_low(i), 2);
        ASSERT_EQ(w.weight_low(i), 1.0f);
    }
    const PlanarImage fast = render_fast(img, depth, stack, w);
    const PlanarImage single = convolve(img, stack_kernel_image(stack, 2));
    EXPECT_TRUE(bit_equal(fast, single));
}

TEST(RenderFast, InfinityDepthLeavesImageNearIdentical) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(40, 32, 12);
    const DepthMap depth(40, 32);  // +inf fill: the delta stop
    const PsfStack stack = radial_slice(grid, 0.2f);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    const PlanarImage out = render_fast(img, depth, stack, w);
    EXPECT_TRUE(bit_equal(out, img));  // k = 7: direct path, delta kernel
}

TEST(RenderFast, MatchesOracleOnDepthRamp) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(48, 40, 13);
    const DepthMap depth = diopter_ramp(48, 40, grid.depth_stops.front());
    const float field = 0.6f;
    const PsfStack stack = radial_slice(grid, field);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    const PlanarImage fast = render_fast(img, depth, stack, w);
    const PlanarImage oracle = render_oracle(img, depth, grid, field);
    EXPECT_LT(max_abs_diff(fast, oracle), 1e-5f);
}

TEST(RenderFast, MatchesOracleOnFftPath) {
    SyntheticGridParams p = small_grid_params();
    p.kernel_size = 21;
    p.px_per_diopter = 1.5f;
    const PsfGrid grid = make_synthetic_grid(p);
    const PlanarImage img = random_rgb(56, 48, 14);
    const DepthMap depth = diopter_ramp(56, 48, grid.depth_stops.front());
    const float field = 0.3f;
    const PsfStack stack = radial_slice(grid, field);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    const PlanarImage fast = render_fast(img, depth, stack, w);  // k = 21: fft
    const PlanarImage oracle = render_oracle(img, depth, grid, field);
    EXPECT_LT(max_abs_diff(fast, oracle), 1e-5f);
}

TEST(RenderFast, MaterializeAllIsBitIdentical) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(48, 40, 15);
    const DepthMap depth = diopter_ramp(48, 40, grid.depth_stops.front());
    const PsfStack stack = radial_slice(grid, 0.5f);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    RenderOptions all;
    all.materialize_all = true;
    EXPECT_TRUE(bit_equal(render_fast(img, depth, stack, w),
                          render_fast(img, depth, stack, w, all)));
}

TEST(RenderFast, StripHeightIsBitInvariantOnDirectPath) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(36, 50, 16);
    const DepthMap depth = diopter_ramp(36, 50, grid.depth_stops.front());
    const PsfStack stack = radial_slice(grid, 0.5f);
    const DepthWeights w = depth_weights(depth, grid.depth_stops);
    RenderOptions small;
    small.strip_rows = 8;
    EXPECT_TRUE(bit_equal(render_fast(img, depth, stack, w),
                          render_fast(img, depth, stack, w, small)));
}

TEST(RenderFast, RejectsMismatchedWeightStops) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(16, 16, 17);
    const DepthMap depth(16, 16, 0.5f);
    const PsfStack stack = radial_slice(grid, 0.0f);
    std::vector<float> other_stops = grid.depth_stops;
    other_stops[1] += 0.01f;
    const DepthWeights w = depth_weights(depth, other_stops);
    EXPECT_EQ(thrown_code([&] { render_fast(img, depth, stack, w); }),
              ErrorCode::WeightStackMismatch);
}

TEST(RenderFast, RejectsCorruptWeights) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(16, 16, 18);
    const DepthMap depth(16, 16, 0.5f);
    const PsfStack stack = radial_slice(grid, 0.0f);
    DepthWeights w = depth_weights(depth, grid.depth_stops);
    DepthWeights bad_alpha = w;
    bad_alpha.alpha[0] = 1.5f;
    EXPECT_EQ(thrown_code([&] { render_fast(img, depth, stack, bad_alpha); }),
              ErrorCode::InvalidArgument);
    DepthWeights bad_low = w;
    bad_low.low[0] = static_cast<uint16_t>(grid.depth_count() - 1);
    EXPECT_EQ(thrown_code([&] { render_fast(img, depth, stack, bad_low); }),
              ErrorCode::InvalidArgument);
    DepthWeights bad_dims = depth_weights(DepthMap(8, 8, 0.5f), grid.depth_stops);
    EXPECT_EQ(thrown_code([&] { render_fast(img, depth, stack, bad_dims); }),
              ErrorCode::DimensionMismatch);
}

// ---------------------------------------------------------------------------
// Oracle renderer specifics.
// ---------------------------------------------------------------------------

TEST(RenderOracle, SizeGuardAndValidation) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(48, 40, 19);
    const DepthMap depth(48, 40, 0.5f);
    RenderOptions tiny;
    tiny.oracle_max_pixels = 100;
    EXPECT_EQ(thrown_code([&] { render_oracle(img, depth, grid, 0.5f, tiny); }),
              ErrorCode::ImageTooLarge);
    EXPECT_EQ(thrown_code([&] { render_oracle(img, depth, grid, 1.5f); }),
              ErrorCode::InvalidArgument);
    PlanarImage bad_field(48, 40, 1);
    bad_field.data[0] = 1.5f;
    EXPECT_EQ(thrown_code([&] { render_oracle(img, depth, grid, bad_field); }),
              ErrorCode::InvalidArgument);
    PlanarImage wrong_dims(8, 8, 1);
    EXPECT_EQ(thrown_code([&] { render_oracle(img, depth, grid, wrong_dims); }),
              ErrorCode::DimensionMismatch);
}

TEST(RenderOracle, ConstantFieldMapMatchesScalarRadius) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(32, 28, 20);
    const DepthMap depth = diopter_ramp(32, 28, grid.depth_stops.front());
    PlanarImage field(32, 28, 1);
    std::fill(field.data.begin(), field.data.end(), 0.35f);
    const PlanarImage via_map = render_oracle(img, depth, grid, field);
    const PlanarImage via_scalar = render_oracle(img, depth, grid, 0.35f);
    EXPECT_LT(max_abs_diff(via_map, via_scalar), 1e-5f);
}

TEST(RenderOracle, BlockHeightIsBitInvariant) {
    const PsfGrid grid = make_synthetic_grid(small_grid_params());
    const PlanarImage img = random_rgb(30, 26, 21);
    const DepthMap depth = diopter_ramp(30, 26, grid.depth_stops.front());
    RenderOptions small;
    small.oracle_block_rows = 5;
    EXPECT_TRUE(bit_equal(render_oracle(img, depth, grid, 0.4f),
                          render_oracle(img, depth, grid, 0.4f, small)));
}
