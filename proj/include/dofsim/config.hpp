// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Simulation configuration: JSON file loading with environment-variable
// overrides and a stable content hash. Every key has a default except
// rng_seed, which must be stated explicitly so no dataset is ever produced
// from an accidental seed.

#ifndef DOFSIM_CONFIG_HPP
#define DOFSIM_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dofsim/error.hpp"
#include "dofsim/isp.hpp"
#include "dofsim/sensor.hpp"

namespace dofsim {

struct SimConfig {
    uint64_t rng_seed = 0;
    int bit_depth = 10;
    // Mosaic patch extent S in pixels; packed training planes are (S/2)^2.
    int patch_size = 512;
    float z_min = 0.1f;
    float z_max = std::numeric_limits<float>::infinity();
    float iso_min = 100.0f;
    float iso_max = 6400.0f;
    bool scale_linear = true;
    bool scale_quadratic = true;
    bool scale_exponential = true;
    float psf_sigma_min = 0.0f;
    float psf_sigma_max = 0.5f;
    float exp_shape_min = 1.0f;
    float exp_shape_max = 4.0f;
    int strip_rows = 64;
    NoiseModel noise;
    IspParams isp;

    void validate() const {
        require(bit_depth >= 8 && bit_depth <= 16, ErrorCode::InvalidArgument,
                "bit_depth must be in [8,16]");
        require(patch_size > 0 && patch_size % 2 == 0, ErrorCode::InvalidArgument,
                "patch_size must be even and positive");
        require(z_min > 0.0f, ErrorCode::InvalidArgument, "z_min must be positive");
        require(z_min < z_max, ErrorCode::DegenerateRange, "z_min must be below z_max");
        require(iso_min > 0.0f && iso_min <= iso_max, ErrorCode::IsoOutOfRange,
                "iso range must satisfy 0 < min <= max");
        require(scale_linear || scale_quadratic || scale_exponential, ErrorCode::InvalidArgument,
                "at least one scaling strategy must be enabled");
        require(psf_sigma_min >= 0.0f && psf_sigma_min <= psf_sigma_max,
                ErrorCode::SigmaOutOfRange, "psf sigma range must satisfy 0 <= min <= max");
        require(exp_shape_min > 0.0f && exp_shape_min <= exp_shape_max,
                ErrorCode::InvalidArgument, "exp shape range must satisfy 0 < min <= max");
        require(strip_rows >= 1, ErrorCode::InvalidArgument, "strip_rows must be positive");
        effective_noise().validate();
        isp.validate();
    }

    /// Noise model with the config's ISO range folded in.
    NoiseModel effective_noise() const {
        NoiseModel m = noise;
        m.iso_min = iso_min;
        m.iso_max = iso_max;
        return m;
    }
};

namespace detail {

inline std::string format_float(float v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

inline float parse_float_or_inf(const nlohmann::json& j, const std::string& key) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity")
            return std::numeric_limits<float>::infinity();
        fail(ErrorCode::InvalidArgument, "config key '" + key + "': unrecognized value '" + s + "'");
    }
    require(j.is_number(), ErrorCode::InvalidArgument, "config key '" + key + "' must be a number");
    return j.get<float>();
}

inline void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                                const std::string& scope) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            ok = ok || it.key() == k;
        require(ok, ErrorCode::InvalidArgument, "unknown config key '" + scope + it.key() + "'");
    }
}

}  // namespace detail

/// Builds a SimConfig from parsed JSON. Unknown keys are rejected so typos
/// cannot silently fall back to defaults; rng_seed is mandatory.
inline SimConfig config_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorCode::InvalidArgument, "config root must be an object");
    detail::reject_unknown_keys(
        j,
        {"rng_seed", "bit_depth", "patch_size", "depth_range", "iso_range",
         "scaling_strategies", "psf_aug_sigma_range", "exp_shape_range", "strip_rows", "noise",
         "isp"},
        "");
    require(j.contains("rng_seed"), ErrorCode::InvalidArgument,
            "config must state rng_seed explicitly");

    SimConfig c;
    c.rng_seed = j.at("rng_seed").get<uint64_t>();
    if (j.contains("bit_depth"))
        c.bit_depth = j.at("bit_depth").get<int>();
    if (j.contains("patch_size"))
        c.patch_size = j.at("patch_size").get<int>();
    if (j.contains("depth_range")) {
        const auto& r = j.at("depth_range");
        require(r.is_array() && r.size() == 2, ErrorCode::InvalidArgument,
                "depth_range must be [z_min, z_max]");
        c.z_min = detail::parse_float_or_inf(r[0], "depth_range[0]");
        c.z_max = detail::parse_float_or_inf(r[1], "depth_range[1]");
    }
    if (j.contains("iso_range")) {
        const auto& r = j.at("iso_range");
        require(r.is_array() && r.size() == 2, ErrorCode::InvalidArgument,
                "iso_range must be [min, max]");
        c.iso_min = r[0].get<float>();
        c.iso_max = r[1].get<float>();
    }
    if (j.contains("scaling_strategies")) {
        const auto& arr = j.at("scaling_strategies");
        require(arr.is_array(), ErrorCode::InvalidArgument, "scaling_strategies must be a list");
        c.scale_linear = c.scale_quadratic = c.scale_exponential = false;
        for (const auto& s : arr) {
            const std::string name = s.get<std::string>();
            if (name == "linear")
                c.scale_linear = true;
            else if (name == "quadratic")
                c.scale_quadratic = true;
            else if (name == "exponential")
                c.scale_exponential = true;
            else
                fail(ErrorCode::InvalidArgument, "unknown scaling strategy '" + name + "'");
        }
    }
    if (j.contains("psf_aug_sigma_range")) {
        const auto& r = j.at("psf_aug_sigma_range");
        require(r.is_array() && r.size() == 2, ErrorCode::InvalidArgument,
                "psf_aug_sigma_range must be [min, max]");
        c.psf_sigma_min = r[0].get<float>();
        c.psf_sigma_max = r[1].get<float>();
    }
    if (j.contains("exp_shape_range")) {
        const auto& r = j.at("exp_shape_range");
        require(r.is_array() && r.size() == 2, ErrorCode::InvalidArgument,
                "exp_shape_range must be [min, max]");
        c.exp_shape_min = r[0].get<float>();
        c.exp_shape_max = r[1].get<float>();
    }
    if (j.contains("strip_rows"))
        c.strip_rows = j.at("strip_rows").get<int>();
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::reject_unknown_keys(n, {"iso_base", "shot", "read0", "read1"}, "noise.");
        if (n.contains("iso_base"))
            c.noise.iso_base = n.at("iso_base").get<float>();
        if (n.contains("shot"))
            c.noise.shot_coeff = n.at("shot").get<float>();
        if (n.contains("read0"))
            c.noise.read0 = n.at("read0").get<float>();
        if (n.contains("read1"))
            c.noise.read1 = n.at("read1").get<float>();
    }
    if (j.contains("isp")) {
        const auto& p = j.at("isp");
        detail::reject_unknown_keys(
            p, {"gains", "ccm", "gamma", "srgb_gamma", "tone_curve", "wb_jitter", "ccm_jitter"},
            "isp.");
        if (p.contains("gains")) {
            const auto& g = p.at("gains");
            require(g.is_array() && g.size() == 3, ErrorCode::InvalidArgument,
                    "isp.gains must be [r, g, b]");
            c.isp.r_gain = g[0].get<float>();
            c.isp.g_gain = g[1].get<float>();
            c.isp.b_gain = g[2].get<float>();
        }
        if (p.contains("ccm")) {
            const auto& m = p.at("ccm");
            require(m.is_array() && m.size() == 3, ErrorCode::InvalidArgument,
                    "isp.ccm must be three rows of three");
            for (int r = 0; r < 3; ++r) {
                require(m[r].is_array() && m[r].size() == 3, ErrorCode::InvalidArgument,
                        "isp.ccm must be three rows of three");
                for (int col = 0; col < 3; ++col)
                    c.isp.ccm[r * 3 + col] = m[r][col].get<float>();
            }
        }
        if (p.contains("gamma"))
            c.isp.gamma = p.at("gamma").get<float>();
        if (p.contains("srgb_gamma"))
            c.isp.srgb_gamma = p.at("srgb_gamma").get<bool>();
        if (p.contains("tone_curve"))
            c.isp.tone_curve = p.at("tone_curve").get<bool>();
        if (p.contains("wb_jitter"))
            c.isp.wb_jitter = p.at("wb_jitter").get<float>();
        if (p.contains("ccm_jitter"))
            c.isp.ccm_jitter = p.at("ccm_jitter").get<float>();
    }
    return c;
}

namespace detail {

inline void apply_env_float(const char* name, float& slot) {
    if (const char* v = std::getenv(name)) {
        char* end = nullptr;
        const double parsed = std::strtod(v, &end);
        require(end && *end == '\0' && end != v, ErrorCode::InvalidArgument,
                std::string("cannot parse ") + name);
        slot = static_cast<float>(parsed);
    }
}

inline void apply_env_int(const char* name, int& slot) {
    if (const char* v = std::getenv(name)) {
        char* end = nullptr;
        const long parsed = std::strtol(v, &end, 10);
        require(end && *end == '\0' && end != v, ErrorCode::InvalidArgument,
                std::string("cannot parse ") + name);
        slot = static_cast<int>(parsed);
    }
}

}  // namespace detail

/// Applies DOFSIM_* environment overrides on top of a loaded config.
/// Supported: DOFSIM_RNG_SEED, DOFSIM_BIT_DEPTH, DOFSIM_PATCH_SIZE,
/// DOFSIM_Z_MIN, DOFSIM_Z_MAX, DOFSIM_ISO_MIN, DOFSIM_ISO_MAX,
/// DOFSIM_PSF_SIGMA_MIN, DOFSIM_PSF_SIGMA_MAX, DOFSIM_EXP_SHAPE_MIN,
/// DOFSIM_EXP_SHAPE_MAX, DOFSIM_STRIP_ROWS, DOFSIM_NOISE_ISO_BASE,
/// DOFSIM_NOISE_SHOT, DOFSIM_NOISE_READ0, DOFSIM_NOISE_READ1.
inline void apply_env_overrides(SimConfig& c) {
    if (const char* v = std::getenv("DOFSIM_RNG_SEED")) {
        char* end = nullptr;
        c.rng_seed = std::strtoull(v, &end, 10);
        require(end && *end == '\0' && end != v, ErrorCode::InvalidArgument,
                "cannot parse DOFSIM_RNG_SEED");
    }
    detail::apply_env_int("DOFSIM_BIT_DEPTH", c.bit_depth);
    detail::apply_env_int("DOFSIM_PATCH_SIZE", c.patch_size);
    detail::apply_env_int("DOFSIM_STRIP_ROWS", c.strip_rows);
    detail::apply_env_float("DOFSIM_Z_MIN", c.z_min);
    detail::apply_env_float("DOFSIM_Z_MAX", c.z_max);
    detail::apply_env_float("DOFSIM_ISO_MIN", c.iso_min);
    detail::apply_env_float("DOFSIM_ISO_MAX", c.iso_max);
    detail::apply_env_float("DOFSIM_PSF_SIGMA_MIN", c.psf_sigma_min);
    detail::apply_env_float("DOFSIM_PSF_SIGMA_MAX", c.psf_sigma_max);
    detail::apply_env_float("DOFSIM_EXP_SHAPE_MIN", c.exp_shape_min);
    detail::apply_env_float("DOFSIM_EXP_SHAPE_MAX", c.exp_shape_max);
    detail::apply_env_float("DOFSIM_NOISE_ISO_BASE", c.noise.iso_base);
    detail::apply_env_float("DOFSIM_NOISE_SHOT", c.noise.shot_coeff);
    detail::apply_env_float("DOFSIM_NOISE_READ0", c.noise.read0);
    detail::apply_env_float("DOFSIM_NOISE_READ1", c.noise.read1);
}

/// Loads, overrides, and validates a config file.
inline SimConfig load_sim_config(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), ErrorCode::IoError, "cannot open config: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail(ErrorCode::InvalidArgument, "config parse error in " + path + ": " + e.what());
    }
    SimConfig c = config_from_json(j);
    apply_env_overrides(c);
    c.validate();
    return c;
}

/// Canonical single-string rendering of the effective config; the basis of
/// config_hash, so field order and float formatting are fixed.
inline std::string canonical_config_text(const SimConfig& c) {
    std::string s;
    s += "bit_depth=" + std::to_string(c.bit_depth) + "\n";
    s += "ccm=";
    for (int i = 0; i < 9; ++i)
        s += (i ? "," : "") + detail::format_float(c.isp.ccm[i]);
    s += "\n";
    s += "ccm_jitter=" + detail::format_float(c.isp.ccm_jitter) + "\n";
    s += "exp_shape_max=" + detail::format_float(c.exp_shape_max) + "\n";
    s += "exp_shape_min=" + detail::format_float(c.exp_shape_min) + "\n";
    s += "gains=" + detail::format_float(c.isp.r_gain) + "," + detail::format_float(c.isp.g_gain) +
         "," + detail::format_float(c.isp.b_gain) + "\n";
    s += "gamma=" + detail::format_float(c.isp.gamma) + "\n";
    s += "iso_max=" + detail::format_float(c.iso_max) + "\n";
    s += "iso_min=" + detail::format_float(c.iso_min) + "\n";
    s += "noise_iso_base=" + detail::format_float(c.noise.iso_base) + "\n";
    s += "noise_read0=" + detail::format_float(c.noise.read0) + "\n";
    s += "noise_read1=" + detail::format_float(c.noise.read1) + "\n";
    s += "noise_shot=" + detail::format_float(c.noise.shot_coeff) + "\n";
    s += "patch_size=" + std::to_string(c.patch_size) + "\n";
    s += "psf_sigma_max=" + detail::format_float(c.psf_sigma_max) + "\n";
    s += "psf_sigma_min=" + detail::format_float(c.psf_sigma_min) + "\n";
    s += "rng_seed=" + std::to_string(c.rng_seed) + "\n";
    s += std::string("scale_exponential=") + (c.scale_exponential ? "1" : "0") + "\n";
    s += std::string("scale_linear=") + (c.scale_linear ? "1" : "0") + "\n";
    s += std::string("scale_quadratic=") + (c.scale_quadratic ? "1" : "0") + "\n";
    s += std::string("srgb_gamma=") + (c.isp.srgb_gamma ? "1" : "0") + "\n";
    s += "strip_rows=" + std::to_string(c.strip_rows) + "\n";
    s += std::string("tone_curve=") + (c.isp.tone_curve ? "1" : "0") + "\n";
    s += "wb_jitter=" + detail::format_float(c.isp.wb_jitter) + "\n";
    s += "z_max=" + detail::format_float(c.z_max) + "\n";
    s += "z_min=" + detail::format_float(c.z_min) + "\n";
    return s;
}

inline uint64_t fnv1a64(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

/// Stable 64-bit hash of the effective configuration; stamped into shards
/// so mixed-config datasets are detectable.
inline uint64_t config_hash(const SimConfig& c) {
    const std::string s = canonical_config_text(c);
    return fnv1a64(s.data(), s.size());
}

}  // namespace dofsim

#endif  // DOFSIM_CONFIG_HPP
