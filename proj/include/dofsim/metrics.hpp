// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Image-quality and noise-statistics measurement used by validation and
// benchmarking.

#ifndef DOFSIM_METRICS_HPP
#define DOFSIM_METRICS_HPP

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"

namespace dofsim {

/// 10 * log10(peak^2 / MSE) over all channels; +infinity for identical
/// images.
inline double psnr(const PlanarImage& a, const PlanarImage& b, double peak = 1.0) {
    require(a.width == b.width && a.height == b.height && a.channels == b.channels,
            ErrorCode::DimensionMismatch, "psnr requires matching dims");
    require(peak > 0.0, ErrorCode::InvalidArgument, "peak must be positive");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        se += d * d;
    }
    if (se == 0.0)
        return std::numeric_limits<double>::infinity();
    const double mse = se / static_cast<double>(a.data.size());
    return 10.0 * std::log10(peak * peak / mse);
}

/// Mean local SSIM with the standard 11x11 Gaussian window (sigma 1.5) and
/// constants k1 = 0.01, k2 = 0.03 on a unit dynamic range. Multi-channel
/// images average the per-channel scores. Window statistics are computed
/// over fully interior positions only.
inline double ssim(const PlanarImage& a, const PlanarImage& b) {
    require(a.width == b.width && a.height == b.height && a.channels == b.channels,
            ErrorCode::DimensionMismatch, "ssim requires matching dims");
    constexpr int kWin = 11;
    constexpr int kHalf = kWin / 2;
    require(a.width >= kWin && a.height >= kWin, ErrorCode::ImageTooSmall,
            "ssim requires dims >= 11");

    double window[kWin][kWin];
    double wsum = 0.0;
    for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
            const double dy = y - kHalf, dx = x - kHalf;
            window[y][x] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            wsum += window[y][x];
        }
    }
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x)
            window[y][x] /= wsum;

    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const float* pa = a.plane(c);
        const float* pb = b.plane(c);
        double acc = 0.0;
        long long count = 0;
        for (int y = kHalf; y < a.height - kHalf; ++y) {
            for (int x = kHalf; x < a.width - kHalf; ++x) {
                double ma = 0.0, mb = 0.0, sa = 0.0, sb = 0.0, sab = 0.0;
                for (int wy = 0; wy < kWin; ++wy) {
                    const size_t row = static_cast<size_t>(y + wy - kHalf) * a.width;
                    for (int wx = 0; wx < kWin; ++wx) {
                        const double w = window[wy][wx];
                        const double va = pa[row + x + wx - kHalf];
                        const double vb = pb[row + x + wx - kHalf];
                        ma += w * va;
                        mb += w * vb;
                        sa += w * va * va;
                        sb += w * vb * vb;
                        sab += w * va * vb;
                    }
                }
                sa -= ma * ma;
                sb -= mb * mb;
                sab -= ma * mb;
                const double num = (2.0 * ma * mb + kC1) * (2.0 * sab + kC2);
                const double den = (ma * ma + mb * mb + kC1) * (sa + sb + kC2);
                acc += num / den;
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / a.channels;
}

/// Residual statistics of `noisy` against `clean`, bucketed by clean value.
/// Bins with no pixels are reported absent (count 0), not as zero variance.
struct NoiseBin {
    long long count = 0;
    double mean_signal = 0.0;  // mean clean value in the bin
    double variance = 0.0;     // sample variance of (noisy - clean)
};

inline std::vector<NoiseBin> noise_stats(const BayerImage& clean, const BayerImage& noisy,
                                         int bins) {
    require(clean.width == noisy.width && clean.height == noisy.height,
            ErrorCode::DimensionMismatch, "noise_stats requires matching dims");
    require(bins >= 1, ErrorCode::InvalidArgument, "need at least one bin");

    std::vector<NoiseBin> out(static_cast<size_t>(bins));
    std::vector<double> rsum(static_cast<size_t>(bins), 0.0);
    std::vector<double> rsq(static_cast<size_t>(bins), 0.0);
    for (size_t i = 0; i < clean.data.size(); ++i) {
        const double mu = clean.data[i];
        int b = static_cast<int>(mu * bins);
        b = b < 0 ? 0 : (b >= bins ? bins - 1 : b);
        const double r = static_cast<double>(noisy.data[i]) - mu;
        out[b].count += 1;
        out[b].mean_signal += mu;
        rsum[b] += r;
        rsq[b] += r * r;
    }
    for (int b = 0; b < bins; ++b) {
        if (out[b].count == 0)
            continue;
        const double n = static_cast<double>(out[b].count);
        out[b].mean_signal /= n;
        const double mean_r = rsum[b] / n;
        // Sample variance; falls back to 0 for single-pixel bins.
        out[b].variance = out[b].count > 1 ? (rsq[b] - n * mean_r * mean_r) / (n - 1.0) : 0.0;
    }
    return out;
}

/// Weighted least-squares fit variance = read_var + shot_var * mean over the
/// populated bins, weighted by bin population. Returns (read_var, shot_var).
inline std::pair<double, double> fit_noise_model(const std::vector<NoiseBin>& stats) {
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const NoiseBin& b : stats) {
        if (b.count < 2)
            continue;
        const double w = static_cast<double>(b.count);
        sw += w;
        sx += w * b.mean_signal;
        sy += w * b.variance;
        sxx += w * b.mean_signal * b.mean_signal;
        sxy += w * b.mean_signal * b.variance;
    }
    require(sw > 0.0, ErrorCode::InvalidArgument, "no populated bins to fit");
    const double det = sw * sxx - sx * sx;
    require(std::abs(det) > 1e-12 * sw * sxx + 1e-300, ErrorCode::DegenerateRange,
            "signal levels are collinear; cannot separate read and shot terms");
    const double shot = (sw * sxy - sx * sy) / det;
    const double read = (sy - shot * sx) / sw;
    return {read, shot};
}

}  // namespace dofsim

#endif  // DOFSIM_METRICS_HPP
