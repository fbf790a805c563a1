// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Invertible image signal processing. `unprocess` maps display-referred RGB
// back to linear RAW-space radiance (inverse tone curve, inverse gamma,
// inverse color correction, inverse white balance); `process` is the forward
// pipeline. The forward pipeline used for visualization may be configured
// differently from the one being inverted.

#ifndef DOFSIM_ISP_HPP
#define DOFSIM_ISP_HPP

#include <array>
#include <cmath>
#include <cstdlib>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"
#include "dofsim/rng.hpp"

namespace dofsim {

/// White balance gains, color-correction matrix (rows sum to 1), and the
/// transfer-curve configuration of one ISP instance.
///
/// When `srgb_gamma` is set the gamma stage uses the piecewise sRGB curve;
/// otherwise a pure power law with exponent `gamma` (encode side 1/gamma).
struct IspParams {
    float r_gain = 1.0f;
    float g_gain = 1.0f;
    float b_gain = 1.0f;
    std::array<float, 9> ccm = {1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
    float gamma = 2.0f;
    bool srgb_gamma = true;
    bool tone_curve = true;
    // Augmentation bounds: gains scaled by U[1-wb_jitter, 1+wb_jitter],
    // CCM entries perturbed by U[-ccm_jitter, ccm_jitter] then row-renormalized.
    float wb_jitter = 0.0f;
    float ccm_jitter = 0.0f;

    void validate() const {
        require(r_gain > 0 && g_gain > 0 && b_gain > 0, ErrorCode::InvalidArgument,
                "white balance gains must be positive");
        require(gamma > 0, ErrorCode::InvalidArgument, "gamma must be positive");
        for (int r = 0; r < 3; ++r) {
            const float sum = ccm[r * 3] + ccm[r * 3 + 1] + ccm[r * 3 + 2];
            require(std::abs(sum - 1.0f) <= 1e-6f, ErrorCode::InvalidArgument,
                    "ccm rows must sum to 1");
        }
        invert_ccm(ccm);  // throws SingularCcm if not invertible
    }

    /// Inverse of a row-major 3x3 matrix by adjugate.
    static std::array<float, 9> invert_ccm(const std::array<float, 9>& m) {
        const double a = m[0], b = m[1], c = m[2];
        const double d = m[3], e = m[4], f = m[5];
        const double g = m[6], h = m[7], i = m[8];
        const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
        require(std::abs(det) > 1e-10, ErrorCode::SingularCcm, "ccm is not invertible");
        const double inv = 1.0 / det;
        return {static_cast<float>((e * i - f * h) * inv), static_cast<float>((c * h - b * i) * inv),
                static_cast<float>((b * f - c * e) * inv), static_cast<float>((f * g - d * i) * inv),
                static_cast<float>((a * i - c * g) * inv), static_cast<float>((c * d - a * f) * inv),
                static_cast<float>((d * h - e * g) * inv), static_cast<float>((b * g - a * h) * inv),
                static_cast<float>((a * e - b * d) * inv)};
    }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

/// sRGB electro-optical transfer function (display value -> linear).
inline float srgb_decode(float v) {
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

/// sRGB opto-electronic transfer function (linear -> display value).
inline float srgb_encode(float v) {
    return v <= 0.0031308f ? v * 12.92f : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

/// Smoothstep s-curve used as the global tone curve.
inline float tone_forward(float x) { return x * x * (3.0f - 2.0f * x); }

/// Inverse of the smoothstep tone curve by monotone bisection, run to float
/// resolution (the interval stops shrinking once lo and hi are adjacent).
inline float tone_inverse(float y) {
    y = clamp01(y);
    float lo = 0.0f, hi = 1.0f;
    for (int i = 0; i < 40 && hi - lo > 1e-8f; ++i) {
        const float mid = 0.5f * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (tone_forward(mid) < y ? lo : hi) = mid;
    }
    return 0.5f * (lo + hi);
}

/// Draws a perturbed copy of `params` for augmentation. Gains are scaled
/// uniformly within the wb_jitter bound; CCM entries receive additive
/// uniform noise within ccm_jitter and rows are renormalized to sum 1.
inline IspParams jitter_params(const IspParams& params, RngStream& rng) {
    IspParams out = params;
    if (params.wb_jitter > 0) {
        out.r_gain *= static_cast<float>(rng.uniform(1 - params.wb_jitter, 1 + params.wb_jitter));
        out.g_gain *= static_cast<float>(rng.uniform(1 - params.wb_jitter, 1 + params.wb_jitter));
        out.b_gain *= static_cast<float>(rng.uniform(1 - params.wb_jitter, 1 + params.wb_jitter));
    }
    if (params.ccm_jitter > 0) {
        for (int r = 0; r < 3; ++r) {
            float sum = 0.0f;
            for (int c = 0; c < 3; ++c) {
                float& m = out.ccm[r * 3 + c];
                m += static_cast<float>(rng.uniform(-params.ccm_jitter, params.ccm_jitter));
                sum += m;
            }
            require(std::abs(sum) > 1e-6f, ErrorCode::SingularCcm, "jittered ccm row sums to 0");
            for (int c = 0; c < 3; ++c)
                out.ccm[r * 3 + c] /= sum;
        }
    }
    out.validate();
    return out;
}

/// Display-referred RGB -> linear RAW-space radiance. Stage order: inverse
/// tone curve, inverse gamma, inverse CCM, inverse white balance, with a
/// clamp to [0, 1] after each stage. When `rng` is given, gains and CCM are
/// jittered within the configured bounds before inversion.
inline PlanarImage unprocess(const PlanarImage& rgb, const IspParams& params,
                             RngStream* rng = nullptr) {
    require(rgb.channels == 3, ErrorCode::DimensionMismatch, "unprocess expects a 3-channel image");
    const IspParams p = rng ? jitter_params(params, *rng) : params;
    p.validate();
    const std::array<float, 9> inv_ccm = IspParams::invert_ccm(p.ccm);
    const std::array<float, 3> inv_gain = {1.0f / p.r_gain, 1.0f / p.g_gain, 1.0f / p.b_gain};

    PlanarImage out(rgb.width, rgb.height, 3);
    const size_t n = rgb.plane_size();
    for (size_t i = 0; i < n; ++i) {
        std::array<float, 3> v;
        for (int c = 0; c < 3; ++c) {
            float x = clamp01(rgb.data[c * n + i]);
            if (p.tone_curve)
                x = tone_inverse(x);
            x = p.srgb_gamma ? srgb_decode(x) : std::pow(x, p.gamma);
            v[c] = clamp01(x);
        }
        for (int c = 0; c < 3; ++c) {
            const float mixed =
                inv_ccm[c * 3] * v[0] + inv_ccm[c * 3 + 1] * v[1] + inv_ccm[c * 3 + 2] * v[2];
            out.data[c * n + i] = clamp01(clamp01(mixed) * inv_gain[c]);
        }
    }
    return out;
}

/// Linear RAW-space radiance -> display-referred RGB. Forward order: white
/// balance, CCM, gamma encode, optional tone curve; clamp after each stage.
inline PlanarImage process(const PlanarImage& raw_rgb, const IspParams& params) {
    require(raw_rgb.channels == 3, ErrorCode::DimensionMismatch,
            "process expects a 3-channel image");
    params.validate();
    const std::array<float, 3> gain = {params.r_gain, params.g_gain, params.b_gain};

    PlanarImage out(raw_rgb.width, raw_rgb.height, 3);
    const size_t n = raw_rgb.plane_size();
    for (size_t i = 0; i < n; ++i) {
        std::array<float, 3> v;
        for (int c = 0; c < 3; ++c)
            v[c] = clamp01(clamp01(raw_rgb.data[c * n + i]) * gain[c]);
        for (int c = 0; c < 3; ++c) {
            float x = params.ccm[c * 3] * v[0] + params.ccm[c * 3 + 1] * v[1] +
                      params.ccm[c * 3 + 2] * v[2];
            x = clamp01(x);
            x = params.srgb_gamma ? srgb_encode(x) : std::pow(x, 1.0f / params.gamma);
            x = clamp01(x);
            if (params.tone_curve)
                x = tone_forward(x);
            out.data[c * n + i] = clamp01(x);
        }
    }
    return out;
}

/// Samples a 3-channel linear image onto an RGGB mosaic:
/// (0,0) -> R, (0,1) -> G, (1,0) -> G, (1,1) -> B per 2x2 cell.
inline BayerImage mosaic(const PlanarImage& linear_rgb) {
    require(linear_rgb.channels == 3, ErrorCode::DimensionMismatch,
            "mosaic expects a 3-channel image");
    require(linear_rgb.width % 2 == 0 && linear_rgb.height % 2 == 0, ErrorCode::OddDimensions,
            "mosaic requires even dimensions");
    BayerImage out(linear_rgb.width, linear_rgb.height, BayerDomain::Linear);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const int c = (y % 2 == 0) ? (x % 2 == 0 ? 0 : 1) : (x % 2 == 0 ? 1 : 2);
            out.at(y, x) = linear_rgb.at(c, y, x);
        }
    }
    return out;
}

/// Bilinear demosaic: each channel at each pixel is the average of that
/// channel's mosaic sites within the clamped 3x3 neighborhood. Exact on
/// constant images and on linear ramps away from the border.
inline PlanarImage demosaic(const BayerImage& bayer) {
    require(bayer.domain == BayerDomain::Linear, ErrorCode::QuantizedDomain,
            "demosaic operates on linear-domain mosaics");
    PlanarImage out(bayer.width, bayer.height, 3);
    const auto site_channel = [](int y, int x) {
        return (y % 2 == 0) ? (x % 2 == 0 ? 0 : 1) : (x % 2 == 0 ? 1 : 2);
    };
    for (int y = 0; y < bayer.height; ++y) {
        for (int x = 0; x < bayer.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                int count = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        yy = yy < 0 ? 0 : (yy >= bayer.height ? bayer.height - 1 : yy);
                        xx = xx < 0 ? 0 : (xx >= bayer.width ? bayer.width - 1 : xx);
                        if (site_channel(yy, xx) == c) {
                            sum += bayer.at(yy, xx);
                            ++count;
                        }
                    }
                }
                out.at(c, y, x) = static_cast<float>(sum / count);
            }
        }
    }
    return out;
}

/// Groups each 2x2 RGGB cell into four half-resolution planes (R, G1, G2, B).
inline PlanarImage pack_rggb(const BayerImage& bayer) {
    PlanarImage out(bayer.width / 2, bayer.height / 2, 4);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            out.at(0, y, x) = bayer.at(2 * y, 2 * x);
            out.at(1, y, x) = bayer.at(2 * y, 2 * x + 1);
            out.at(2, y, x) = bayer.at(2 * y + 1, 2 * x);
            out.at(3, y, x) = bayer.at(2 * y + 1, 2 * x + 1);
        }
    }
    return out;
}

/// Exact inverse of pack_rggb.
inline BayerImage unpack_rggb(const PlanarImage& packed, BayerDomain domain = BayerDomain::Linear,
                              int bit_depth = 10) {
    require(packed.channels == 4, ErrorCode::DimensionMismatch,
            "unpack_rggb expects a 4-channel image");
    BayerImage out(packed.width * 2, packed.height * 2, domain, bit_depth);
    for (int y = 0; y < packed.height; ++y) {
        for (int x = 0; x < packed.width; ++x) {
            out.at(2 * y, 2 * x) = packed.at(0, y, x);
            out.at(2 * y, 2 * x + 1) = packed.at(1, y, x);
            out.at(2 * y + 1, 2 * x) = packed.at(2, y, x);
            out.at(2 * y + 1, 2 * x + 1) = packed.at(3, y, x);
        }
    }
    out.validate();
    return out;
}

}  // namespace dofsim

#endif  // DOFSIM_ISP_HPP
