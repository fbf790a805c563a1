// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Training-sample pipeline: depth scaling, geometric/pixel augmentation,
// patch extraction, auxiliary channel assembly, and shard I/O.
//
// Determinism contract: a sample is a pure function of (config seed, sample
// index, source files). Every random draw comes from the per-sample stream
// in a fixed order, and per-pixel noise uses indexed access, so any worker
// count produces byte-identical output.

#ifndef DOFSIM_DATAPREP_HPP
#define DOFSIM_DATAPREP_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dofsim/config.hpp"
#include "dofsim/error.hpp"
#include "dofsim/image.hpp"
#include "dofsim/image_io.hpp"
#include "dofsim/isp.hpp"
#include "dofsim/psf.hpp"
#include "dofsim/render.hpp"
#include "dofsim/rng.hpp"
#include "dofsim/sensor.hpp"

namespace dofsim {

// ---------------------------------------------------------------------------
// Depth scaling: relative [0,1] depth to metric depth, interpolated in
// diopter space so the blur quantity varies by the chosen curve.
// ---------------------------------------------------------------------------

enum class ScalingKind : uint32_t { Linear = 0, Quadratic = 1, Exponential = 2 };

inline const char* scaling_kind_name(ScalingKind k) {
    switch (k) {
        case ScalingKind::Linear: return "linear";
        case ScalingKind::Quadratic: return "quadratic";
        case ScalingKind::Exponential: return "exponential";
    }
    return "unknown";
}

/// One concrete depth-scaling draw. near/far are meters; far may be +inf.
/// exp_shape is the exponential curvature (used only by Exponential).
struct DepthScaling {
    ScalingKind kind = ScalingKind::Linear;
    float near_m = 0.1f;
    float far_m = std::numeric_limits<float>::infinity();
    float exp_shape = 2.0f;

    void validate() const {
        require(near_m > 0.0f, ErrorCode::DegenerateRange, "near must be positive");
        require(near_m < far_m, ErrorCode::DegenerateRange, "near must be below far");
        require(exp_shape > 0.0f, ErrorCode::InvalidArgument, "exp_shape must be positive");
    }
};

/// Maps relative depth t (1 = nearest) through the strategy curve in diopter
/// space: d(t) = d_far + (d_near - d_far) * f(t), z = 1/d, with d = 0
/// encoding infinity.
inline DepthMap scale_depth(const RelativeDepthMap& rel, const DepthScaling& scaling) {
    scaling.validate();
    const float d_near = 1.0f / scaling.near_m;
    const float d_far = std::isinf(scaling.far_m) ? 0.0f : 1.0f / scaling.far_m;
    const float denom =
        scaling.kind == ScalingKind::Exponential ? std::expm1(scaling.exp_shape) : 1.0f;

    std::vector<float> z(rel.values.size());
    for (size_t i = 0; i < z.size(); ++i) {
        const float t = rel.values[i];
        float f = t;
        if (scaling.kind == ScalingKind::Quadratic)
            f = t * t;
        else if (scaling.kind == ScalingKind::Exponential)
            f = std::expm1(scaling.exp_shape * t) / denom;
        const float d = d_far + (d_near - d_far) * f;
        z[i] = d <= 0.0f ? std::numeric_limits<float>::infinity() : 1.0f / d;
    }
    return DepthMap(rel.width, rel.height, std::move(z));
}

/// Draws a strategy uniformly from the enabled set plus an exponential shape
/// from the configured range.
inline DepthScaling sample_depth_scaling(const SimConfig& cfg, RngStream& rng) {
    std::vector<ScalingKind> enabled;
    if (cfg.scale_linear)
        enabled.push_back(ScalingKind::Linear);
    if (cfg.scale_quadratic)
        enabled.push_back(ScalingKind::Quadratic);
    if (cfg.scale_exponential)
        enabled.push_back(ScalingKind::Exponential);
    require(!enabled.empty(), ErrorCode::InvalidArgument, "no scaling strategies enabled");

    DepthScaling s;
    s.kind = enabled[rng.next_below(static_cast<uint64_t>(enabled.size()))];
    s.near_m = cfg.z_min;
    s.far_m = cfg.z_max;
    if (s.kind == ScalingKind::Exponential)
        s.exp_shape =
            static_cast<float>(rng.uniform(cfg.exp_shape_min, cfg.exp_shape_max));
    return s;
}

// ---------------------------------------------------------------------------
// Auxiliary channels.
// ---------------------------------------------------------------------------

/// Normalized radial position of one sensor pixel: distance from the sensor
/// center over the center-to-corner distance, so pixel (0,0) of the sensor
/// maps to exactly 1.
inline float field_radius_at(float px, float py, int sensor_w, int sensor_h) {
    const float cx = 0.5f * static_cast<float>(sensor_w);
    const float cy = 0.5f * static_cast<float>(sensor_h);
    const float corner = std::hypot(cx, cy);
    return std::hypot(px - cx, py - cy) / corner;
}

/// Field map for a patch at full mosaic resolution: value = normalized
/// radial position of each pixel within the full sensor.
inline PlanarImage make_field_map(int origin_x, int origin_y, int patch_w, int patch_h,
                                  int sensor_w, int sensor_h) {
    require(sensor_w > 0 && sensor_h > 0, ErrorCode::InvalidArgument,
            "sensor dims must be positive");
    require(origin_x >= 0 && origin_y >= 0 && patch_w > 0 && patch_h > 0 &&
                origin_x + patch_w <= sensor_w && origin_y + patch_h <= sensor_h,
            ErrorCode::PatchOutOfBounds, "patch must lie within the sensor");
    PlanarImage out(patch_w, patch_h, 1);
    for (int y = 0; y < patch_h; ++y)
        for (int x = 0; x < patch_w; ++x)
            out.at(0, y, x) = std::min(
                1.0f, field_radius_at(static_cast<float>(origin_x + x),
                                      static_cast<float>(origin_y + y), sensor_w, sensor_h));
    return out;
}

/// Field map at packed (half) resolution: each value is the radial position
/// of its 2x2 mosaic cell's center.
inline PlanarImage make_field_map_packed(int origin_x, int origin_y, int patch_size,
                                         int sensor_w, int sensor_h) {
    require(patch_size > 0 && patch_size % 2 == 0, ErrorCode::OddDimensions,
            "patch size must be even");
    require(origin_x >= 0 && origin_y >= 0 && origin_x + patch_size <= sensor_w &&
                origin_y + patch_size <= sensor_h,
            ErrorCode::PatchOutOfBounds, "patch must lie within the sensor");
    const int half = patch_size / 2;
    PlanarImage out(half, half, 1);
    for (int y = 0; y < half; ++y)
        for (int x = 0; x < half; ++x)
            out.at(0, y, x) = std::min(
                1.0f, field_radius_at(static_cast<float>(origin_x) + 2.0f * x + 0.5f,
                                      static_cast<float>(origin_y) + 2.0f * y + 0.5f, sensor_w,
                                      sensor_h));
    return out;
}

/// Constant plane carrying the ISO setting scaled by 0.001.
inline PlanarImage make_iso_channel(float iso, int width, int height) {
    require(iso > 0.0f, ErrorCode::IsoOutOfRange, "iso must be positive");
    PlanarImage out(width, height, 1);
    std::fill(out.data.begin(), out.data.end(), iso * 0.001f);
    return out;
}

// ---------------------------------------------------------------------------
// Geometric and pixel augmentation.
// ---------------------------------------------------------------------------

struct AugmentOptions {
    bool flips = true;
    bool rotations = true;
    int crop_w = 0;  // 0 = no crop
    int crop_h = 0;
    float exposure_ev = 0.3f;  // exposure jitter: 2^U[-ev, +ev]
    float sat_min = 0.8f;      // saturation scale range
    float sat_max = 1.2f;
};

/// A fully determined augmentation; applying the same draw twice to an
/// involution (e.g. hflip only) restores the original.
struct AugmentDraw {
    bool hflip = false;
    bool vflip = false;
    int rot90 = 0;  // quarter turns, counterclockwise, 0..3
    int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;  // crop_w 0 = no crop
    float exposure_scale = 1.0f;
    float saturation_scale = 1.0f;
};

/// Samples an augmentation. Draw order is fixed: flips, rotation, crop
/// offsets, exposure, saturation; disabled features draw nothing.
inline AugmentDraw sample_augment_draw(const AugmentOptions& opts, int img_w, int img_h,
                                       RngStream& rng) {
    AugmentDraw d;
    if (opts.flips) {
        d.hflip = rng.next_below(2) == 1;
        d.vflip = rng.next_below(2) == 1;
    }
    if (opts.rotations)
        d.rot90 = static_cast<int>(rng.next_below(4));
    if (opts.crop_w > 0 && opts.crop_h > 0) {
        const int cw = opts.crop_w, ch = opts.crop_h;
        int avail_w = (d.rot90 % 2 == 0) ? img_w : img_h;
        int avail_h = (d.rot90 % 2 == 0) ? img_h : img_w;
        require(cw <= avail_w && ch <= avail_h, ErrorCode::CropLargerThanImage,
                "crop exceeds image size");
        d.crop_w = cw;
        d.crop_h = ch;
        d.crop_x = static_cast<int>(rng.next_below(static_cast<uint64_t>(avail_w - cw) + 1));
        d.crop_y = static_cast<int>(rng.next_below(static_cast<uint64_t>(avail_h - ch) + 1));
    }
    if (opts.exposure_ev > 0.0f)
        d.exposure_scale = std::exp2(
            static_cast<float>(rng.uniform(-opts.exposure_ev, opts.exposure_ev)));
    if (opts.sat_max > opts.sat_min)
        d.saturation_scale = static_cast<float>(rng.uniform(opts.sat_min, opts.sat_max));
    else if (opts.sat_min == opts.sat_max)
        d.saturation_scale = opts.sat_min;
    return d;
}

namespace detail {

template <typename GetPixel>
inline void spatial_transform(int w, int h, const AugmentDraw& d, int& out_w, int& out_h,
                              std::vector<float>& out, int channels, GetPixel&& get) {
    // flips, then rotation, then crop; all index remapping, no resampling.
    int tw = (d.rot90 % 2 == 0) ? w : h;
    int th = (d.rot90 % 2 == 0) ? h : w;
    int cw = d.crop_w > 0 ? d.crop_w : tw;
    int chh = d.crop_h > 0 ? d.crop_h : th;
    require(d.crop_x >= 0 && d.crop_y >= 0 && d.crop_x + cw <= tw && d.crop_y + chh <= th,
            ErrorCode::CropLargerThanImage, "crop exceeds image size");
    out_w = cw;
    out_h = chh;
    out.resize(static_cast<size_t>(cw) * chh * channels);
    const size_t plane = static_cast<size_t>(cw) * chh;
    for (int y = 0; y < chh; ++y) {
        for (int x = 0; x < cw; ++x) {
            // Position in the rotated frame.
            const int rx = d.crop_x + x;
            const int ry = d.crop_y + y;
            // Invert the rotation to the flipped frame.
            int fx = rx, fy = ry;
            switch (d.rot90 & 3) {
                case 0: break;
                case 1: fx = w - 1 - ry; fy = rx; break;       // 90 ccw
                case 2: fx = w - 1 - rx; fy = h - 1 - ry; break;
                case 3: fx = ry; fy = h - 1 - rx; break;       // 270 ccw
            }
            // Invert the flips to source coordinates.
            const int sx = d.hflip ? w - 1 - fx : fx;
            const int sy = d.vflip ? h - 1 - fy : fy;
            for (int c = 0; c < channels; ++c)
                out[c * plane + static_cast<size_t>(y) * cw + x] = get(c, sy, sx);
        }
    }
}

}  // namespace detail

/// Applies a fixed augmentation draw to an aligned RGB + relative-depth
/// pair. The spatial transform is shared; exposure and saturation apply to
/// RGB only.
inline std::pair<PlanarImage, RelativeDepthMap> augment_with_draw(const PlanarImage& rgb,
                                                                  const RelativeDepthMap& rel,
                                                                  const AugmentDraw& d) {
    require(rgb.channels == 3, ErrorCode::DimensionMismatch, "augment expects 3-channel rgb");
    require(rgb.width == rel.width && rgb.height == rel.height, ErrorCode::DimensionMismatch,
            "rgb and depth dims must match");

    int w = 0, h = 0;
    std::vector<float> rgb_data;
    detail::spatial_transform(rgb.width, rgb.height, d, w, h, rgb_data, 3,
                              [&](int c, int y, int x) { return rgb.at(c, y, x); });
    std::vector<float> rel_data;
    detail::spatial_transform(rgb.width, rgb.height, d, w, h, rel_data, 1,
                              [&](int, int y, int x) { return rel.at(y, x); });

    const size_t plane = static_cast<size_t>(w) * h;
    if (d.exposure_scale != 1.0f || d.saturation_scale != 1.0f) {
        for (size_t i = 0; i < plane; ++i) {
            float r = rgb_data[i], g = rgb_data[plane + i], b = rgb_data[2 * plane + i];
            if (d.saturation_scale != 1.0f) {
                const float luma = 0.2126f * r + 0.7152f * g + 0.0722f * b;  // Rec.709
                r = luma + d.saturation_scale * (r - luma);
                g = luma + d.saturation_scale * (g - luma);
                b = luma + d.saturation_scale * (b - luma);
            }
            r *= d.exposure_scale;
            g *= d.exposure_scale;
            b *= d.exposure_scale;
            rgb_data[i] = clamp01(r);
            rgb_data[plane + i] = clamp01(g);
            rgb_data[2 * plane + i] = clamp01(b);
        }
    }
    return {PlanarImage(w, h, 3, std::move(rgb_data)),
            RelativeDepthMap(w, h, std::move(rel_data))};
}

/// Samples and applies an augmentation in one step.
inline std::pair<PlanarImage, RelativeDepthMap> augment_geometric(const PlanarImage& rgb,
                                                                  const RelativeDepthMap& rel,
                                                                  RngStream& rng,
                                                                  const AugmentOptions& opts = {}) {
    return augment_with_draw(rgb, rel, sample_augment_draw(opts, rgb.width, rgb.height, rng));
}

// ---------------------------------------------------------------------------
// Training samples.
// ---------------------------------------------------------------------------

/// One training sample: 6 input planes (4 packed RGGB after blur, noise,
/// quantize, dequantize; 1 constant ISO plane; 1 field-position plane) and 4
/// clean packed RGGB target planes, all at (S/2) x (S/2).
/// The target runs through the same quantize/dequantize rounding as the
/// input (a deterministic grid snap, not noise), so a degenerate pipeline
/// with delta kernels and zero noise reproduces the target bit for bit.
struct TrainingSample {
    PlanarImage input_rggb;     // 4ch
    PlanarImage iso_channel;    // 1ch
    PlanarImage field_channel;  // 1ch
    PlanarImage target_rggb;    // 4ch

    uint32_t source_id = 0;
    uint32_t patch_x = 0;
    uint32_t patch_y = 0;
    float iso = 100.0f;
    float field_radius = 0.0f;
    DepthScaling scaling;
    float psf_sigma = 0.0f;
    uint64_t sample_seed = 0;  // stream index under the config seed
};

/// Runs the full synthesis pipeline on one source pair. All randomness comes
/// from `rng`; per-pixel noise uses an indexed child stream.
inline TrainingSample synthesize_sample(const PlanarImage& rgb, const RelativeDepthMap& rel,
                                        const PsfGrid& grid, const SimConfig& cfg, RngStream& rng,
                                        uint32_t source_id = 0) {
    cfg.validate();
    grid.validate();
    const int s = cfg.patch_size;
    require(s >= 2 * grid.k, ErrorCode::InvalidArgument,
            "patch_size must be at least twice the kernel size");

    AugmentOptions aug;  // flips/rotations/exposure/saturation; crop is the patch step
    auto [rgb_a, rel_a] = augment_geometric(rgb, rel, rng, aug);
    require(rgb_a.width >= s && rgb_a.height >= s, ErrorCode::CropLargerThanImage,
            "source image smaller than the patch size");

    // Patch origin, forced even so the patch keeps the sensor's RGGB phase.
    const int max_x = rgb_a.width - s;
    const int max_y = rgb_a.height - s;
    int px = static_cast<int>(rng.next_below(static_cast<uint64_t>(max_x) + 1)) & ~1;
    int py = static_cast<int>(rng.next_below(static_cast<uint64_t>(max_y) + 1)) & ~1;

    AugmentDraw crop;
    crop.crop_x = px;
    crop.crop_y = py;
    crop.crop_w = s;
    crop.crop_h = s;
    auto [rgb_p, rel_p] = augment_with_draw(rgb_a, rel_a, crop);

    const DepthScaling scaling = sample_depth_scaling(cfg, rng);
    const DepthMap depth = scale_depth(rel_p, scaling);

    PlanarImage raw = unprocess(rgb_p, cfg.isp, &rng);

    const float field_radius = std::min(
        1.0f, field_radius_at(static_cast<float>(px + s / 2), static_cast<float>(py + s / 2),
                              rgb_a.width, rgb_a.height));
    PsfStack stack = radial_slice(grid, field_radius);
    const float sigma =
        cfg.psf_sigma_max > cfg.psf_sigma_min
            ? static_cast<float>(rng.uniform(cfg.psf_sigma_min, cfg.psf_sigma_max))
            : cfg.psf_sigma_min;
    stack = augment_psf(stack, sigma, cfg.psf_sigma_min, cfg.psf_sigma_max);

    const DepthWeights weights = depth_weights(depth, grid.depth_stops);
    RenderOptions ropts;
    ropts.strip_rows = cfg.strip_rows;
    PlanarImage blurred = render_fast(raw, depth, stack, weights, ropts);
    // Frequency-domain roundoff can leave values a few ulp outside [0,1];
    // the sensor stages require the physical signal range.
    for (float& v : blurred.data)
        v = clamp01(v);

    const float iso = static_cast<float>(rng.uniform(cfg.iso_min, cfg.iso_max));
    const NoiseParams nparams = noise_params(iso, cfg.effective_noise());
    RngStream noise_rng = rng.child(0x6E6F6973u);  // per-pixel indexed noise
    const BayerImage noisy = add_noise(mosaic(blurred), nparams, noise_rng);

    TrainingSample out;
    out.input_rggb = pack_rggb(dequantize(quantize(noisy, cfg.bit_depth), cfg.bit_depth));
    out.iso_channel = make_iso_channel(iso, s / 2, s / 2);
    out.field_channel = make_field_map_packed(px, py, s, rgb_a.width, rgb_a.height);
    out.target_rggb =
        pack_rggb(dequantize(quantize(mosaic(raw), cfg.bit_depth), cfg.bit_depth));
    out.source_id = source_id;
    out.patch_x = static_cast<uint32_t>(px);
    out.patch_y = static_cast<uint32_t>(py);
    out.iso = iso;
    out.field_radius = field_radius;
    out.scaling = scaling;
    out.psf_sigma = sigma;
    return out;
}

// ---------------------------------------------------------------------------
// Shard I/O.
//
// Layout (all little-endian):
//   magic "DSHARD1\0"
//   u32 sample_count, u32 patch_size, u32 input_planes (6), u32 target_planes (4)
//   u64 config_hash
//   per sample:
//     u32 source_id, u32 patch_x, u32 patch_y, u32 scaling_kind
//     f32 near_m, f32 far_m, f32 exp_shape, f32 iso, f32 field_radius, f32 psf_sigma
//     u64 sample_seed
//     f32 planes: input RGGB (4), iso, field, then target RGGB (4),
//       each (patch_size/2)^2 values, row-major.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::string& s, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(s, u);
}
inline void put_floats(std::string& s, const float* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        put_f32(s, p[i]);
}

class ByteReader {
  public:
    ByteReader(const std::string& buf) : buf_(buf) {}
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() {
        const uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
    void floats(float* p, size_t n) {
        for (size_t i = 0; i < n; ++i)
            p[i] = f32();
    }
    void raw(char* p, size_t n) {
        need(n);
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    bool exhausted() const { return pos_ == buf_.size(); }

  private:
    void need(size_t n) const {
        require(pos_ + n <= buf_.size(), ErrorCode::MalformedShard, "shard truncated");
    }
    const std::string& buf_;
    size_t pos_ = 0;
};

}  // namespace detail

struct Shard {
    uint32_t patch_size = 0;
    uint64_t config_hash = 0;
    std::vector<TrainingSample> samples;
};

inline void write_shard(const std::vector<TrainingSample>& samples, const std::string& path,
                        uint32_t patch_size, uint64_t cfg_hash) {
    const size_t plane = static_cast<size_t>(patch_size / 2) * (patch_size / 2);
    for (const TrainingSample& t : samples) {
        require(t.input_rggb.channels == 4 && t.target_rggb.channels == 4 &&
                    t.iso_channel.channels == 1 && t.field_channel.channels == 1,
                ErrorCode::DimensionMismatch, "sample has wrong channel counts");
        require(t.input_rggb.plane_size() == plane && t.target_rggb.plane_size() == plane &&
                    t.iso_channel.plane_size() == plane && t.field_channel.plane_size() == plane,
                ErrorCode::DimensionMismatch, "sample dims do not match the shard patch size");
    }

    std::string buf;
    buf.reserve(24 + samples.size() * (48 + plane * 10 * 4));
    buf.append("DSHARD1", 7);
    buf.push_back('\0');
    detail::put_u32(buf, static_cast<uint32_t>(samples.size()));
    detail::put_u32(buf, patch_size);
    detail::put_u32(buf, 6);
    detail::put_u32(buf, 4);
    detail::put_u64(buf, cfg_hash);
    for (const TrainingSample& t : samples) {
        detail::put_u32(buf, t.source_id);
        detail::put_u32(buf, t.patch_x);
        detail::put_u32(buf, t.patch_y);
        detail::put_u32(buf, static_cast<uint32_t>(t.scaling.kind));
        detail::put_f32(buf, t.scaling.near_m);
        detail::put_f32(buf, t.scaling.far_m);
        detail::put_f32(buf, t.scaling.exp_shape);
        detail::put_f32(buf, t.iso);
        detail::put_f32(buf, t.field_radius);
        detail::put_f32(buf, t.psf_sigma);
        detail::put_u64(buf, t.sample_seed);
        for (int c = 0; c < 4; ++c)
            detail::put_floats(buf, t.input_rggb.plane(c), plane);
        detail::put_floats(buf, t.iso_channel.plane(0), plane);
        detail::put_floats(buf, t.field_channel.plane(0), plane);
        for (int c = 0; c < 4; ++c)
            detail::put_floats(buf, t.target_rggb.plane(c), plane);
    }

    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open for writing: " + path);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    require(f.good(), ErrorCode::IoError, "write failed: " + path);
}

/// Reads a shard back. If `expected_hash` is given and differs from the
/// stored hash, a warning is printed (the data may still be usable; mixing
/// configs is the caller's decision).
inline Shard read_shard(const std::string& path,
                        std::optional<uint64_t> expected_hash = std::nullopt) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    detail::ByteReader r(buf);
    char magic[8];
    r.raw(magic, 8);
    require(std::memcmp(magic, "DSHARD1\0", 8) == 0, ErrorCode::MalformedShard,
            "bad shard magic: " + path);
    Shard shard;
    const uint32_t count = r.u32();
    shard.patch_size = r.u32();
    const uint32_t in_planes = r.u32();
    const uint32_t tg_planes = r.u32();
    shard.config_hash = r.u64();
    require(shard.patch_size >= 2 && shard.patch_size % 2 == 0 && in_planes == 6 &&
                tg_planes == 4,
            ErrorCode::MalformedShard, "unsupported shard geometry: " + path);
    if (expected_hash && *expected_hash != shard.config_hash)
        std::fprintf(stderr,
                     "warning: shard %s was produced under a different config "
                     "(hash %016llx, expected %016llx)\n",
                     path.c_str(), static_cast<unsigned long long>(shard.config_hash),
                     static_cast<unsigned long long>(*expected_hash));

    const int half = static_cast<int>(shard.patch_size) / 2;
    const size_t plane = static_cast<size_t>(half) * half;
    shard.samples.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        TrainingSample& t = shard.samples[i];
        t.source_id = r.u32();
        t.patch_x = r.u32();
        t.patch_y = r.u32();
        const uint32_t kind = r.u32();
        require(kind <= 2, ErrorCode::MalformedShard, "bad scaling kind");
        t.scaling.kind = static_cast<ScalingKind>(kind);
        t.scaling.near_m = r.f32();
        t.scaling.far_m = r.f32();
        t.scaling.exp_shape = r.f32();
        t.iso = r.f32();
        t.field_radius = r.f32();
        t.psf_sigma = r.f32();
        t.sample_seed = r.u64();
        std::vector<float> in4(plane * 4), iso1(plane), fld1(plane), tg4(plane * 4);
        r.floats(in4.data(), in4.size());
        r.floats(iso1.data(), iso1.size());
        r.floats(fld1.data(), fld1.size());
        r.floats(tg4.data(), tg4.size());
        t.input_rggb = PlanarImage(half, half, 4, std::move(in4));
        t.iso_channel = PlanarImage(half, half, 1, std::move(iso1));
        t.field_channel = PlanarImage(half, half, 1, std::move(fld1));
        t.target_rggb = PlanarImage(half, half, 4, std::move(tg4));
    }
    require(r.exhausted(), ErrorCode::MalformedShard, "trailing bytes in shard: " + path);
    return shard;
}

// ---------------------------------------------------------------------------
// Dataset scanning and parallel shard generation.
// ---------------------------------------------------------------------------

/// A source pair: RGB PNG plus sibling relative-depth PFM with the same
/// stem. source_id is the index in stem-sorted order, so ids are stable for
/// a given directory content.
struct DatasetEntry {
    std::string rgb_path;
    std::string depth_path;
    uint32_t source_id = 0;
};

inline std::vector<DatasetEntry> scan_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), ErrorCode::IoError, "not a directory: " + dir);
    std::vector<DatasetEntry> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".png")
            continue;
        fs::path depth = e.path();
        depth.replace_extension(".pfm");
        if (fs::exists(depth))
            entries.push_back({e.path().string(), depth.string(), 0});
    }
    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.rgb_path < b.rgb_path; });
    for (size_t i = 0; i < entries.size(); ++i)
        entries[i].source_id = static_cast<uint32_t>(i);
    require(!entries.empty(), ErrorCode::EmptyDataset,
            "no png + pfm pairs found in " + dir);
    return entries;
}

struct GenShardsReport {
    uint64_t config_hash = 0;
    int requested = 0;
    int produced = 0;
    int skipped = 0;
    std::vector<std::string> shard_paths;
};

/// Generates `count` samples across `workers` threads and writes them into
/// shards of at most `samples_per_shard`, in sample order. Sample i uses
/// source entries[i % entries.size()] and stream index i under the config
/// seed, so output bytes are identical for any worker count. Samples whose
/// source files fail to load or validate are skipped with a warning.
inline GenShardsReport gen_shards(const std::vector<DatasetEntry>& entries, const PsfGrid& grid,
                                  const SimConfig& cfg, const std::string& out_dir, int count,
                                  int workers, int samples_per_shard = 64) {
    require(!entries.empty(), ErrorCode::EmptyDataset, "dataset is empty");
    require(count >= 0, ErrorCode::InvalidArgument, "count must be non-negative");
    require(workers >= 1, ErrorCode::InvalidArgument, "workers must be positive");
    require(samples_per_shard >= 1, ErrorCode::InvalidArgument,
            "samples_per_shard must be positive");
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    GenShardsReport report;
    report.config_hash = config_hash(cfg);
    report.requested = count;

    const int shard_count = count == 0 ? 1 : (count + samples_per_shard - 1) / samples_per_shard;
    for (int sh = 0; sh < shard_count; ++sh) {
        const int begin = sh * samples_per_shard;
        const int end = std::min(count, begin + samples_per_shard);
        const int n = end - begin;
        std::vector<std::optional<TrainingSample>> results(static_cast<size_t>(std::max(n, 0)));
        std::atomic<int> next{0};
        std::atomic<int> failures{0};

        auto worker_fn = [&]() {
            for (;;) {
                const int slot = next.fetch_add(1);
                if (slot >= n)
                    return;
                const int i = begin + slot;
                const DatasetEntry& entry = entries[static_cast<size_t>(i) % entries.size()];
                try {
                    const PlanarImage rgb = load_png(entry.rgb_path);
                    const PlanarImage rel_img = load_pfm(entry.depth_path);
                    require(rel_img.channels == 1, ErrorCode::DimensionMismatch,
                            "depth pfm must be single-channel");
                    const RelativeDepthMap rel =
                        RelativeDepthMap::clamped(rel_img.width, rel_img.height, rel_img.data);
                    RngStream rng(cfg.rng_seed, static_cast<uint64_t>(i));
                    TrainingSample t =
                        synthesize_sample(rgb, rel, grid, cfg, rng, entry.source_id);
                    t.sample_seed = static_cast<uint64_t>(i);
                    results[static_cast<size_t>(slot)] = std::move(t);
                } catch (const Error& e) {
                    failures.fetch_add(1);
                    std::fprintf(stderr, "warning: skipping sample %d (%s): %s\n", i,
                                 entry.rgb_path.c_str(), e.what());
                }
            }
        };
        if (workers == 1 || n <= 1) {
            worker_fn();
        } else {
            std::vector<std::thread> pool;
            const int nthreads = std::min(workers, std::max(n, 1));
            pool.reserve(static_cast<size_t>(nthreads));
            for (int t = 0; t < nthreads; ++t)
                pool.emplace_back(worker_fn);
            for (auto& t : pool)
                t.join();
        }

        std::vector<TrainingSample> keep;
        keep.reserve(results.size());
        for (auto& r : results)
            if (r)
                keep.push_back(std::move(*r));
        report.produced += static_cast<int>(keep.size());
        report.skipped += failures.load();

        char name[64];
        std::snprintf(name, sizeof(name), "shard-%05d.bin", sh);
        const std::string path = (fs::path(out_dir) / name).string();
        write_shard(keep, path, static_cast<uint32_t>(cfg.patch_size), report.config_hash);
        report.shard_paths.push_back(path);
    }
    return report;
}

}  // namespace dofsim

#endif  // DOFSIM_DATAPREP_HPP
