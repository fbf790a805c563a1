// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Sensor realism: ISO-dependent heteroscedastic Gaussian noise and b-bit
// quantization. Noise variance decomposes into a signal-independent read
// term and a signal-proportional shot term; both scale with the gain
// implied by ISO. Randomness is drawn by pixel index from a counter-based
// stream, so noise fields are invariant to thread count and iteration
// order.

#ifndef DOFSIM_SENSOR_HPP
#define DOFSIM_SENSOR_HPP

#include <cfenv>
#include <cmath>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"
#include "dofsim/rng.hpp"

namespace dofsim {

/// Gain law: g = iso / iso_base. Shot variance = shot_coeff * g (analog
/// gain amplifies photon noise linearly in variance); read variance =
/// read0 + read1 * g^2 (pre-gain read noise is amplified in amplitude).
/// All variances are in normalized-signal^2 units. The shipped defaults are
/// placeholders, not calibrated to any physical sensor.
struct NoiseModel {
    float iso_base = 100.0f;
    float shot_coeff = 1e-4f;
    float read0 = 1e-6f;
    float read1 = 1e-6f;
    float iso_min = 100.0f;
    float iso_max = 6400.0f;

    void validate() const {
        require(iso_base > 0.0f, ErrorCode::InvalidArgument, "iso_base must be positive");
        // Zero is allowed so a noise-free sensor is expressible in config.
        require(shot_coeff >= 0.0f, ErrorCode::NegativeVariance,
                "shot coefficient must be non-negative");
        require(read0 >= 0.0f && read1 >= 0.0f, ErrorCode::NegativeVariance,
                "read coefficients must be non-negative");
        require(iso_min > 0.0f && iso_min <= iso_max, ErrorCode::IsoOutOfRange,
                "iso range must satisfy 0 < min <= max");
        require(std::isfinite(read0 + read1 * (iso_max / iso_base) * (iso_max / iso_base)) &&
                    std::isfinite(shot_coeff * iso_max / iso_base),
                ErrorCode::NegativeVariance, "variances must stay finite over the iso range");
    }
};

struct NoiseParams {
    float read_var = 0.0f;  // lambda_read
    float shot_var = 0.0f;  // lambda_shot
};

/// Evaluates the gain law at `iso`.
inline NoiseParams noise_params(float iso, const NoiseModel& model) {
    model.validate();
    require(iso >= model.iso_min && iso <= model.iso_max, ErrorCode::IsoOutOfRange,
            "iso outside configured range");
    const float g = iso / model.iso_base;
    NoiseParams p;
    p.shot_var = model.shot_coeff * g;
    p.read_var = model.read0 + model.read1 * g * g;
    return p;
}

/// Adds per-pixel Gaussian noise with mean I and variance
/// read_var + shot_var * I, then clamps to [0, 1]. Zero variance returns a
/// bit-exact copy. Randomness is indexed by pixel, so the result depends
/// only on the stream, never on traversal order.
inline BayerImage add_noise(const BayerImage& raw, const NoiseParams& params, RngStream& rng) {
    require(raw.domain == BayerDomain::Linear, ErrorCode::QuantizedDomain,
            "noise applies to linear-domain mosaics");
    require(std::isfinite(params.read_var) && params.read_var >= 0.0f &&
                std::isfinite(params.shot_var) && params.shot_var >= 0.0f,
            ErrorCode::NegativeVariance, "noise variances must be finite and non-negative");
    for (float v : raw.data)
        require(v >= 0.0f && v <= 1.0f, ErrorCode::InvalidArgument,
                "noise input must lie in [0,1]");

    BayerImage out = raw;
    if (params.read_var == 0.0f && params.shot_var == 0.0f)
        return out;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float mu = raw.data[i];
        const float sigma = std::sqrt(params.read_var + params.shot_var * mu);
        float v = mu + sigma * static_cast<float>(rng.normal_at(static_cast<uint64_t>(i)));
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.data[i] = v;
    }
    return out;
}

/// Scales to [0, 2^b - 1], clips overshoot at full scale (and undershoot at
/// the black level 0), and rounds to the nearest integer with ties to even.
inline BayerImage quantize(const BayerImage& raw, int bits) {
    require(raw.domain == BayerDomain::Linear, ErrorCode::QuantizedDomain,
            "quantize expects a linear-domain mosaic");
    require(bits >= 1 && bits <= 16, ErrorCode::InvalidArgument, "bit depth must be in [1,16]");
    const float scale = static_cast<float>((1u << bits) - 1u);
    BayerImage out(raw.width, raw.height, BayerDomain::Quantized, bits);
    for (size_t i = 0; i < raw.data.size(); ++i) {
        float y = raw.data[i] * scale;
        y = y > scale ? scale : (y < 0.0f ? 0.0f : y);
        out.data[i] = std::nearbyintf(y);
    }
    out.validate();
    return out;
}

/// Maps digital numbers back to [0, 1]. Exact inverse of quantize on the
/// quantization grid.
inline BayerImage dequantize(const BayerImage& raw, int bits) {
    require(raw.domain == BayerDomain::Quantized, ErrorCode::QuantizedDomain,
            "dequantize expects a quantized-domain mosaic");
    require(bits == raw.bit_depth, ErrorCode::InvalidArgument,
            "bit depth does not match the image");
    const float inv = 1.0f / static_cast<float>((1u << bits) - 1u);
    BayerImage out(raw.width, raw.height, BayerDomain::Linear, bits);
    for (size_t i = 0; i < raw.data.size(); ++i)
        out.data[i] = raw.data[i] * inv;
    return out;
}

}  // namespace dofsim

#endif  // DOFSIM_SENSOR_HPP
