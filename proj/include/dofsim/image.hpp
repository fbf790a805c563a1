// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DOFSIM_IMAGE_HPP
#define DOFSIM_IMAGE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dofsim/error.hpp"

namespace dofsim {

/// Multi-channel raster of linear radiance values, the common carrier for RGB
/// and packed-RAW data. Layout is channel-major, row-major within a channel.
/// Values are dimensionless and normally live in [0, 1]; kernels and auxiliary
/// channels reuse the type with their own ranges.
struct PlanarImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    PlanarImage() = default;

    PlanarImage(int w, int h, int c) : width(w), height(h), channels(c) {
        check_dims(w, h, c);
        data.assign(static_cast<size_t>(w) * h * c, 0.0f);
    }

    PlanarImage(int w, int h, int c, std::vector<float> values)
        : width(w), height(h), channels(c), data(std::move(values)) {
        check_dims(w, h, c);
        require(data.size() == static_cast<size_t>(w) * h * c, ErrorCode::DimensionMismatch,
                "data length " + std::to_string(data.size()) + " does not match " +
                    std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(c));
        for (float v : data)
            require(std::isfinite(v), ErrorCode::NonFiniteValue, "image contains NaN or Inf");
    }

    size_t plane_size() const { return static_cast<size_t>(width) * height; }
    size_t size() const { return data.size(); }

    float* plane(int c) { return data.data() + plane_size() * c; }
    const float* plane(int c) const { return data.data() + plane_size() * c; }

    float& at(int c, int y, int x) {
        return data[plane_size() * c + static_cast<size_t>(y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[plane_size() * c + static_cast<size_t>(y) * width + x];
    }

    void validate() const {
        check_dims(width, height, channels);
        require(data.size() == static_cast<size_t>(width) * height * channels,
                ErrorCode::DimensionMismatch, "data length does not match dimensions");
        for (float v : data)
            require(std::isfinite(v), ErrorCode::NonFiniteValue, "image contains NaN or Inf");
    }

  private:
    static void check_dims(int w, int h, int c) {
        require(w > 0 && h > 0, ErrorCode::DimensionMismatch, "empty image");
        require(c == 1 || c == 3 || c == 4, ErrorCode::DimensionMismatch,
                "channel count must be 1, 3, or 4");
    }
};

enum class BayerDomain { Linear, Quantized };

/// Single-plane RGGB mosaic. Linear-domain data holds radiance values
/// (nominally [0, 1], pre-quantization overshoot above 1 is permitted);
/// quantized-domain data holds integer digital numbers in [0, 2^b - 1].
struct BayerImage {
    int width = 0;
    int height = 0;
    BayerDomain domain = BayerDomain::Linear;
    int bit_depth = 10;  // meaningful in the quantized domain
    std::vector<float> data;

    BayerImage() = default;

    BayerImage(int w, int h, BayerDomain d = BayerDomain::Linear, int bits = 10)
        : width(w), height(h), domain(d), bit_depth(bits) {
        check_dims(w, h);
        data.assign(static_cast<size_t>(w) * h, 0.0f);
    }

    BayerImage(int w, int h, std::vector<float> values, BayerDomain d = BayerDomain::Linear,
               int bits = 10)
        : width(w), height(h), domain(d), bit_depth(bits), data(std::move(values)) {
        check_dims(w, h);
        require(data.size() == static_cast<size_t>(w) * h, ErrorCode::DimensionMismatch,
                "data length does not match dimensions");
        validate_values();
    }

    float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t size() const { return data.size(); }

    float max_digital_number() const {
        return static_cast<float>((1u << bit_depth) - 1u);
    }

    void validate() const {
        check_dims(width, height);
        require(data.size() == static_cast<size_t>(width) * height, ErrorCode::DimensionMismatch,
                "data length does not match dimensions");
        validate_values();
    }

  private:
    static void check_dims(int w, int h) {
        require(w > 0 && h > 0, ErrorCode::DimensionMismatch, "empty mosaic");
        require(w % 2 == 0 && h % 2 == 0, ErrorCode::OddDimensions,
                "mosaic dimensions must be even");
    }

    void validate_values() const {
        if (domain == BayerDomain::Quantized) {
            const float top = max_digital_number();
            for (float v : data)
                require(v >= 0.0f && v <= top && v == std::floor(v), ErrorCode::QuantizedDomain,
                        "quantized mosaic values must be integers in [0, 2^b - 1]");
        } else {
            for (float v : data)
                require(std::isfinite(v), ErrorCode::NonFiniteValue, "mosaic contains NaN or Inf");
        }
    }
};

/// Per-pixel metric depth in meters. +infinity encodes optical infinity.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    DepthMap() = default;

    DepthMap(int w, int h, float fill = std::numeric_limits<float>::infinity())
        : width(w), height(h) {
        require(w > 0 && h > 0, ErrorCode::DimensionMismatch, "empty depth map");
        require(fill > 0.0f, ErrorCode::NonPositiveDepth, "depth must be > 0");
        values.assign(static_cast<size_t>(w) * h, fill);
    }

    DepthMap(int w, int h, std::vector<float> v) : width(w), height(h), values(std::move(v)) {
        require(w > 0 && h > 0, ErrorCode::DimensionMismatch, "empty depth map");
        require(values.size() == static_cast<size_t>(w) * h, ErrorCode::DimensionMismatch,
                "value count does not match dimensions");
        for (float z : values)
            require(z > 0.0f && !std::isnan(z), ErrorCode::NonPositiveDepth,
                    "depth values must be positive (or +inf)");
    }

    float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }

    void validate() const {
        require(width > 0 && height > 0, ErrorCode::DimensionMismatch, "empty depth map");
        require(values.size() == static_cast<size_t>(width) * height, ErrorCode::DimensionMismatch,
                "value count does not match dimensions");
        for (float z : values)
            require(z > 0.0f && !std::isnan(z), ErrorCode::NonPositiveDepth,
                    "depth values must be positive (or +inf)");
    }
};

/// Affine-ambiguous relative depth in [0, 1]; 1.0 is the nearest point in the
/// scene and 0.0 the farthest. Monocular estimators are ingested through this
/// convention and mapped to metric depth by scale_depth.
struct RelativeDepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    RelativeDepthMap() = default;

    RelativeDepthMap(int w, int h, std::vector<float> v)
        : width(w), height(h), values(std::move(v)) {
        require(w > 0 && h > 0, ErrorCode::DimensionMismatch, "empty relative depth map");
        require(values.size() == static_cast<size_t>(w) * h, ErrorCode::DimensionMismatch,
                "value count does not match dimensions");
        for (float t : values)
            require(t >= 0.0f && t <= 1.0f, ErrorCode::InvalidArgument,
                    "relative depth values must lie in [0, 1]");
    }

    /// Ingestion path for estimator output: clamps into [0, 1], rejects NaN.
    static RelativeDepthMap clamped(int w, int h, std::vector<float> v) {
        for (float& t : v) {
            require(!std::isnan(t), ErrorCode::NonFiniteValue, "relative depth contains NaN");
            t = t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t);
        }
        return RelativeDepthMap(w, h, std::move(v));
    }

    float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

/// Checks that an image/depth pair is mutually consistent and both sides
/// satisfy their own invariants.
inline void validate_pair(const PlanarImage& img, const DepthMap& depth) {
    img.validate();
    depth.validate();
    require(img.width == depth.width && img.height == depth.height, ErrorCode::DimensionMismatch,
            "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                " but depth map is " + std::to_string(depth.width) + "x" +
                std::to_string(depth.height));
}

}  // namespace dofsim

#endif  // DOFSIM_IMAGE_HPP
