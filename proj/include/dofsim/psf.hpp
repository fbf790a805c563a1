// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// PSF grid storage and interpolation. A grid tabulates k x k blur kernels
// over a set of object depths (in diopters, strictly decreasing to 0 =
// infinity) and normalized field radii (strictly increasing, 0 = on-axis,
// 1 = sensor corner). All depth interpolation happens in diopter space:
// defocus blur scales approximately linearly with diopter defocus, and the
// range "near focus limit to infinity" is finite only in inverse depth.

#ifndef DOFSIM_PSF_HPP
#define DOFSIM_PSF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"

namespace dofsim {

/// Tabulated PSFs: depth_count x radial_count x 3 kernels, each k x k.
/// Kernel storage order is (depth, radial, channel, row, col).
/// camera_id / f_number are in-memory provenance only; the wire format
/// does not carry them.
struct PsfGrid {
    std::vector<float> depth_stops;   // diopters, strictly decreasing, >= 0
    std::vector<float> radial_stops;  // [0,1], strictly increasing
    int k = 0;
    std::vector<float> kernels;
    std::string camera_id = "unknown";
    float f_number = 0.0f;

    int depth_count() const { return static_cast<int>(depth_stops.size()); }
    int radial_count() const { return static_cast<int>(radial_stops.size()); }
    size_t kernel_area() const { return static_cast<size_t>(k) * k; }

    const float* kernel(int d, int r, int c) const {
        return kernels.data() +
               ((static_cast<size_t>(d) * radial_stops.size() + r) * 3 + c) * kernel_area();
    }
    float* kernel(int d, int r, int c) {
        return kernels.data() +
               ((static_cast<size_t>(d) * radial_stops.size() + r) * 3 + c) * kernel_area();
    }

    void validate() const {
        require(depth_count() >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 depth stops");
        require(radial_count() >= 1, ErrorCode::InvalidArgument, "grid needs at least 1 radial stop");
        require(k >= 1, ErrorCode::InvalidArgument, "kernel size must be positive");
        require(k % 2 == 1, ErrorCode::NonOddKernel, "kernel size must be odd");
        for (int i = 0; i < depth_count(); ++i) {
            require(std::isfinite(depth_stops[i]) && depth_stops[i] >= 0.0f,
                    ErrorCode::InvalidArgument, "depth stops must be finite non-negative diopters");
            require(i == 0 || depth_stops[i] < depth_stops[i - 1], ErrorCode::InvalidArgument,
                    "depth stops must be strictly decreasing in diopters");
        }
        for (int i = 0; i < radial_count(); ++i) {
            require(radial_stops[i] >= 0.0f && radial_stops[i] <= 1.0f, ErrorCode::InvalidArgument,
                    "radial stops must lie in [0,1]");
            require(i == 0 || radial_stops[i] > radial_stops[i - 1], ErrorCode::InvalidArgument,
                    "radial stops must be strictly increasing");
        }
        if (radial_count() >= 2) {
            require(radial_stops.front() == 0.0f && radial_stops.back() == 1.0f,
                    ErrorCode::InvalidArgument, "radial stops must span [0,1]");
        }
        require(kernels.size() == static_cast<size_t>(depth_count()) * radial_count() * 3 * kernel_area(),
                ErrorCode::DimensionMismatch, "kernel blob size mismatch");
        for (int d = 0; d < depth_count(); ++d) {
            for (int r = 0; r < radial_count(); ++r) {
                for (int c = 0; c < 3; ++c) {
                    const float* ker = kernel(d, r, c);
                    double sum = 0.0;
                    for (size_t i = 0; i < kernel_area(); ++i) {
                        require(ker[i] >= 0.0f, ErrorCode::NormalizationOutOfRange,
                                "kernel values must be non-negative");
                        sum += ker[i];
                    }
                    require(std::abs(sum - 1.0) <= 1e-5, ErrorCode::NormalizationOutOfRange,
                            "kernel channel must sum to 1 within 1e-5");
                }
            }
        }
    }
};

/// A grid reduced to one field radius: depth_count x 3 kernels in
/// (depth, channel, row, col) order. Carries the depth stops so downstream
/// consumers can verify weight compatibility.
struct PsfStack {
    std::vector<float> depth_stops;
    int k = 0;
    std::vector<float> kernels;

    int depth_count() const { return static_cast<int>(depth_stops.size()); }
    size_t kernel_area() const { return static_cast<size_t>(k) * k; }

    const float* kernel(int d, int c) const {
        return kernels.data() + (static_cast<size_t>(d) * 3 + c) * kernel_area();
    }
    float* kernel(int d, int c) {
        return kernels.data() + (static_cast<size_t>(d) * 3 + c) * kernel_area();
    }
};

/// Per-pixel interpolation weights over adjacent depth-stop pairs.
/// Pixel p blends stop low[p] with weight alpha[p] and stop low[p] + 1 with
/// weight 1 - alpha[p]; the two always sum to exactly 1.
struct DepthWeights {
    int width = 0;
    int height = 0;
    std::vector<float> depth_stops;
    std::vector<uint16_t> low;
    std::vector<float> alpha;

    size_t size() const { return low.size(); }
    int index_low(size_t p) const { return low[p]; }
    int index_high(size_t p) const { return low[p] + 1; }
    float weight_low(size_t p) const { return alpha[p]; }
    float weight_high(size_t p) const { return 1.0f - alpha[p]; }
};

namespace detail {

/// Renormalizes one kernel channel to sum 1. Exact-sum kernels are left
/// bit-identical.
inline void renormalize_kernel(float* ker, size_t area) {
    double sum = 0.0;
    for (size_t i = 0; i < area; ++i)
        sum += ker[i];
    require(sum > 0.0, ErrorCode::NormalizationOutOfRange, "kernel has zero mass");
    if (sum != 1.0) {
        const float inv = static_cast<float>(1.0 / sum);
        for (size_t i = 0; i < area; ++i)
            ker[i] *= inv;
    }
}

}  // namespace detail

/// Converts a metric depth map to per-pixel adjacent-stop weights, linear in
/// diopter space. Depths outside the tabulated range clamp to the nearest
/// stop with full weight.
inline DepthWeights depth_weights(const DepthMap& depth, const std::vector<float>& stops) {
    const int d_count = static_cast<int>(stops.size());
    require(d_count >= 2, ErrorCode::InvalidArgument, "need at least 2 depth stops");
    for (int i = 1; i < d_count; ++i)
        require(stops[i] < stops[i - 1], ErrorCode::InvalidArgument,
                "depth stops must be strictly decreasing in diopters");
    depth.validate();

    DepthWeights out;
    out.width = depth.width;
    out.height = depth.height;
    out.depth_stops = stops;
    const size_t n = depth.values.size();
    out.low.resize(n);
    out.alpha.resize(n);
    const float d_max = stops.front();
    const float d_min = stops.back();
    for (size_t p = 0; p < n; ++p) {
        const float z = depth.values[p];
        float d = std::isinf(z) ? 0.0f : 1.0f / z;
        d = std::min(d_max, std::max(d_min, d));
        // Last index with stops[i] >= d; stops sorted descending.
        const auto it = std::upper_bound(stops.begin(), stops.end(), d, std::greater<float>());
        int i = static_cast<int>(it - stops.begin()) - 1;
        i = std::min(i, d_count - 2);
        const float span = stops[i] - stops[i + 1];
        float a = (d - stops[i + 1]) / span;
        a = std::min(1.0f, std::max(0.0f, a));
        out.low[p] = static_cast<uint16_t>(i);
        out.alpha[p] = a;
    }
    return out;
}

/// Reduces a grid to a single field radius by linear interpolation between
/// the bracketing radial stops. Exact hits copy the stop's kernels verbatim;
/// blends are renormalized to sum 1.
inline PsfStack radial_slice(const PsfGrid& grid, float r) {
    require(r >= 0.0f && r <= 1.0f, ErrorCode::InvalidArgument,
            "field radius must lie in [0,1]");
    const int depth_count = grid.depth_count();
    const int radial_count = grid.radial_count();
    const size_t area = grid.kernel_area();

    PsfStack out;
    out.depth_stops = grid.depth_stops;
    out.k = grid.k;
    out.kernels.resize(static_cast<size_t>(depth_count) * 3 * area);

    int j = 0;
    float t = 0.0f;
    if (radial_count >= 2) {
        const float rc = std::min(grid.radial_stops.back(), std::max(grid.radial_stops.front(), r));
        const auto it =
            std::upper_bound(grid.radial_stops.begin(), grid.radial_stops.end(), rc);
        j = static_cast<int>(it - grid.radial_stops.begin()) - 1;
        j = std::min(std::max(j, 0), radial_count - 2);
        t = (rc - grid.radial_stops[j]) / (grid.radial_stops[j + 1] - grid.radial_stops[j]);
    }

    for (int d = 0; d < depth_count; ++d) {
        for (int c = 0; c < 3; ++c) {
            float* dst = out.kernel(d, c);
            if (radial_count == 1 || t == 0.0f) {
                std::memcpy(dst, grid.kernel(d, j, c), area * sizeof(float));
            } else if (t == 1.0f) {
                std::memcpy(dst, grid.kernel(d, j + 1, c), area * sizeof(float));
            } else {
                const float* a = grid.kernel(d, j, c);
                const float* b = grid.kernel(d, j + 1, c);
                for (size_t i = 0; i < area; ++i)
                    dst[i] = (1.0f - t) * a[i] + t * b[i];
                detail::renormalize_kernel(dst, area);
            }
        }
    }
    return out;
}

/// Blurs every kernel in the stack with a Gaussian of standard deviation
/// `sigma` (kernel pixels), truncated at 3 sigma, then renormalizes each
/// channel to sum 1. sigma = 0 returns the input unchanged. Deterministic:
/// callers sample sigma themselves.
inline PsfStack augment_psf(const PsfStack& stack, float sigma, float sigma_min = 0.0f,
                            float sigma_max = 3.0f) {
    require(sigma >= sigma_min && sigma <= sigma_max, ErrorCode::SigmaOutOfRange,
            "sigma outside configured range");
    PsfStack out = stack;
    if (sigma == 0.0f)
        return out;

    const int radius = static_cast<int>(std::floor(3.0f * sigma + 1e-6f));
    std::vector<float> taps(2 * radius + 1);
    double tap_sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-0.5f * (static_cast<float>(i) * i) / (sigma * sigma));
        tap_sum += taps[i + radius];
    }
    for (float& t : taps)
        t = static_cast<float>(t / tap_sum);

    const int k = stack.k;
    std::vector<float> tmp(static_cast<size_t>(k) * k);
    for (int d = 0; d < stack.depth_count(); ++d) {
        for (int c = 0; c < 3; ++c) {
            float* ker = out.kernel(d, c);
            // Separable blur with zero padding; off-kernel mass is dropped
            // and restored by the final renormalization.
            for (int y = 0; y < k; ++y) {
                for (int x = 0; x < k; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int xx = x - i;
                        if (xx >= 0 && xx < k)
                            acc += static_cast<double>(taps[i + radius]) * ker[y * k + xx];
                    }
                    tmp[static_cast<size_t>(y) * k + x] = static_cast<float>(acc);
                }
            }
            for (int y = 0; y < k; ++y) {
                for (int x = 0; x < k; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int yy = y - i;
                        if (yy >= 0 && yy < k)
                            acc += static_cast<double>(taps[i + radius]) * tmp[static_cast<size_t>(yy) * k + x];
                    }
                    ker[static_cast<size_t>(y) * k + x] = static_cast<float>(acc);
                }
            }
            detail::renormalize_kernel(ker, stack.kernel_area());
        }
    }
    return out;
}

/// Grid-wide variant of augment_psf used by the PSF tooling: blurs every
/// (depth, radial, channel) kernel with the same sigma.
inline PsfGrid augment_psf_grid(const PsfGrid& grid, float sigma, float sigma_min = 0.0f,
                                float sigma_max = 3.0f) {
    require(sigma >= sigma_min && sigma <= sigma_max, ErrorCode::SigmaOutOfRange,
            "sigma outside configured range");
    PsfGrid out = grid;
    if (sigma == 0.0f)
        return out;
    // Reuse the stack path: view each radial column as a stack.
    for (int r = 0; r < grid.radial_count(); ++r) {
        PsfStack col;
        col.depth_stops = grid.depth_stops;
        col.k = grid.k;
        col.kernels.resize(static_cast<size_t>(grid.depth_count()) * 3 * grid.kernel_area());
        for (int d = 0; d < grid.depth_count(); ++d)
            for (int c = 0; c < 3; ++c)
                std::memcpy(col.kernel(d, c), grid.kernel(d, r, c),
                            grid.kernel_area() * sizeof(float));
        const PsfStack blurred = augment_psf(col, sigma, sigma_min, sigma_max);
        for (int d = 0; d < grid.depth_count(); ++d)
            for (int c = 0; c < 3; ++c)
                std::memcpy(out.kernel(d, r, c), blurred.kernel(d, c),
                            grid.kernel_area() * sizeof(float));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid file I/O.
//
// Wire format: an ASCII header
//   PSFGRID1
//   D R k C
//   <D diopter values>
//   <R radial values>
// followed by exactly one whitespace byte, then D*R*C*k*k little-endian
// 32-bit floats in (depth, radial, channel, row, col) order.
// ---------------------------------------------------------------------------

inline void save_psf_grid(const PsfGrid& grid, const std::string& path) {
    grid.validate();
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open for writing: " + path);
    f << "PSFGRID1\n" << grid.depth_count() << " " << grid.radial_count() << " " << grid.k
      << " 3\n";
    f.precision(9);
    for (int i = 0; i < grid.depth_count(); ++i)
        f << (i ? " " : "") << grid.depth_stops[i];
    f << "\n";
    for (int i = 0; i < grid.radial_count(); ++i)
        f << (i ? " " : "") << grid.radial_stops[i];
    f << "\n";
    f.write(reinterpret_cast<const char*>(grid.kernels.data()),
            static_cast<std::streamsize>(grid.kernels.size() * sizeof(float)));
    require(f.good(), ErrorCode::IoError, "write failed: " + path);
}

inline PsfGrid load_psf_grid(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open: " + path);

    std::string magic;
    f >> magic;
    require(f.good() && magic == "PSFGRID1", ErrorCode::MalformedHeader,
            "bad magic in " + path);
    long long d_count = 0, r_count = 0, k = 0, channels = 0;
    f >> d_count >> r_count >> k >> channels;
    require(f.good(), ErrorCode::MalformedHeader, "truncated header in " + path);
    require(d_count >= 2 && d_count <= 65535, ErrorCode::MalformedHeader,
            "depth stop count out of range");
    require(r_count >= 1 && r_count <= 65535, ErrorCode::MalformedHeader,
            "radial stop count out of range");
    require(channels == 3, ErrorCode::MalformedHeader, "channel count must be 3");
    require(k >= 1 && k <= 511, ErrorCode::MalformedHeader, "kernel size out of range");
    require(k % 2 == 1, ErrorCode::NonOddKernel, "kernel size must be odd");

    PsfGrid grid;
    grid.k = static_cast<int>(k);
    grid.depth_stops.resize(static_cast<size_t>(d_count));
    grid.radial_stops.resize(static_cast<size_t>(r_count));
    for (auto& v : grid.depth_stops)
        f >> v;
    for (auto& v : grid.radial_stops)
        f >> v;
    require(f.good(), ErrorCode::MalformedHeader, "truncated stop lists in " + path);
    for (size_t i = 0; i < grid.depth_stops.size(); ++i) {
        require(std::isfinite(grid.depth_stops[i]) && grid.depth_stops[i] >= 0.0f,
                ErrorCode::MalformedHeader, "depth stops must be finite non-negative diopters");
        require(i == 0 || grid.depth_stops[i] < grid.depth_stops[i - 1],
                ErrorCode::MalformedHeader, "depth stops must be strictly decreasing");
    }
    for (size_t i = 0; i < grid.radial_stops.size(); ++i) {
        require(grid.radial_stops[i] >= 0.0f && grid.radial_stops[i] <= 1.0f,
                ErrorCode::MalformedHeader, "radial stops must lie in [0,1]");
        require(i == 0 || grid.radial_stops[i] > grid.radial_stops[i - 1],
                ErrorCode::MalformedHeader, "radial stops must be strictly increasing");
    }
    if (r_count >= 2)
        require(grid.radial_stops.front() == 0.0f && grid.radial_stops.back() == 1.0f,
                ErrorCode::MalformedHeader, "radial stops must span [0,1]");

    const int sep = f.get();
    require(sep == '\n' || sep == ' ' || sep == '\t' || sep == '\r', ErrorCode::MalformedHeader,
            "missing header/blob separator");

    grid.kernels.resize(static_cast<size_t>(d_count) * r_count * 3 * grid.kernel_area());
    f.read(reinterpret_cast<char*>(grid.kernels.data()),
           static_cast<std::streamsize>(grid.kernels.size() * sizeof(float)));
    require(f.gcount() == static_cast<std::streamsize>(grid.kernels.size() * sizeof(float)),
            ErrorCode::MalformedHeader, "kernel blob truncated in " + path);

    // Channel sums within 1e-3 of 1 are renormalized; anything worse is a
    // corrupt or mis-scaled grid and rejected.
    for (int d = 0; d < grid.depth_count(); ++d) {
        for (int r = 0; r < grid.radial_count(); ++r) {
            for (int c = 0; c < 3; ++c) {
                float* ker = grid.kernel(d, r, c);
                double sum = 0.0;
                for (size_t i = 0; i < grid.kernel_area(); ++i) {
                    require(ker[i] >= 0.0f, ErrorCode::NormalizationOutOfRange,
                            "kernel values must be non-negative");
                    sum += ker[i];
                }
                require(std::abs(sum - 1.0) < 1e-3, ErrorCode::NormalizationOutOfRange,
                        "kernel channel sum outside renormalization tolerance");
                detail::renormalize_kernel(ker, grid.kernel_area());
            }
        }
    }
    grid.validate();
    return grid;
}

// ---------------------------------------------------------------------------
// Synthetic defocus grid.
// ---------------------------------------------------------------------------

/// Analytic stand-in for a measured lens grid: an antialiased disk whose
/// radius grows linearly with diopter defocus, widened toward the field edge
/// by a quadratic curvature term, with a small per-channel scale to mimic
/// longitudinal chromatic aberration. Zero defocus (infinity stop) yields an
/// exact delta kernel.
struct SyntheticGridParams {
    int depth_count = 20;
    int radial_count = 20;
    int kernel_size = 31;
    float z_min = 0.1f;          // meters; nearest depth stop
    float px_per_diopter = 1.1f; // disk radius growth per diopter of defocus
    float field_curvature = 0.3f;
    float chroma = 0.03f;
    std::string camera_id = "synthetic";
    float f_number = 2.0f;
};

inline PsfGrid make_synthetic_grid(const SyntheticGridParams& p) {
    require(p.depth_count >= 2, ErrorCode::InvalidArgument, "need at least 2 depth stops");
    require(p.radial_count >= 1, ErrorCode::InvalidArgument, "need at least 1 radial stop");
    require(p.kernel_size >= 1 && p.kernel_size % 2 == 1, ErrorCode::NonOddKernel,
            "kernel size must be odd");
    require(p.z_min > 0.0f, ErrorCode::InvalidArgument, "z_min must be positive");
    require(p.px_per_diopter >= 0.0f && p.field_curvature >= 0.0f, ErrorCode::InvalidArgument,
            "px_per_diopter and field_curvature must be non-negative");
    require(p.chroma >= 0.0f && p.chroma < 1.0f, ErrorCode::InvalidArgument,
            "chroma must lie in [0,1)");

    const float d_near = 1.0f / p.z_min;
    const float max_radius =
        p.px_per_diopter * d_near * (1.0f + p.field_curvature) * (1.0f + p.chroma);
    require(max_radius <= 0.5f * static_cast<float>(p.kernel_size - 1) + 0.25f,
            ErrorCode::InvalidArgument, "largest disk does not fit the kernel size");

    PsfGrid grid;
    grid.k = p.kernel_size;
    grid.camera_id = p.camera_id;
    grid.f_number = p.f_number;
    grid.depth_stops.resize(static_cast<size_t>(p.depth_count));
    for (int i = 0; i < p.depth_count; ++i) {
        // Uniform in diopters from 1/z_min down to exactly 0 (infinity).
        grid.depth_stops[i] =
            d_near * (1.0f - static_cast<float>(i) / static_cast<float>(p.depth_count - 1));
    }
    grid.depth_stops.back() = 0.0f;
    grid.radial_stops.resize(static_cast<size_t>(p.radial_count));
    if (p.radial_count == 1) {
        grid.radial_stops[0] = 0.0f;
    } else {
        for (int i = 0; i < p.radial_count; ++i)
            grid.radial_stops[i] =
                static_cast<float>(i) / static_cast<float>(p.radial_count - 1);
        grid.radial_stops.back() = 1.0f;
    }

    const int c0 = (grid.k - 1) / 2;
    const float chan_scale[3] = {1.0f - p.chroma, 1.0f, 1.0f + p.chroma};
    grid.kernels.resize(static_cast<size_t>(p.depth_count) * p.radial_count * 3 *
                        grid.kernel_area());
    for (int d = 0; d < p.depth_count; ++d) {
        const float diopter = grid.depth_stops[d];
        for (int r = 0; r < p.radial_count; ++r) {
            const float rr = grid.radial_stops[r];
            for (int c = 0; c < 3; ++c) {
                const float radius = p.px_per_diopter * diopter *
                                     (1.0f + p.field_curvature * rr * rr) * chan_scale[c];
                float* ker = grid.kernel(d, r, c);
                for (int y = 0; y < grid.k; ++y) {
                    for (int x = 0; x < grid.k; ++x) {
                        const float dist = std::hypot(static_cast<float>(y - c0),
                                                      static_cast<float>(x - c0));
                        const float cover = std::min(1.0f, std::max(0.0f, radius - dist + 0.5f));
                        ker[static_cast<size_t>(y) * grid.k + x] = cover;
                    }
                }
                detail::renormalize_kernel(ker, grid.kernel_area());
            }
        }
    }
    grid.validate();
    return grid;
}

}  // namespace dofsim

#endif  // DOFSIM_PSF_HPP
