// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Image file I/O: 8/16-bit PNG for display-referred RGB and grayscale, PFM
// for float images such as relative depth maps. PNG values are normalized
// to [0,1] on load; PFM values pass through untouched.

#ifndef DOFSIM_IMAGE_IO_HPP
#define DOFSIM_IMAGE_IO_HPP

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dofsim/error.hpp"
#include "dofsim/image.hpp"

namespace dofsim {

inline PlanarImage load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    require(fp != nullptr, ErrorCode::IoError, "cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png)
            png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(ErrorCode::IoError, "png allocation failed");
    }

    std::vector<float> data;
    int width = 0, height = 0, channels = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(ErrorCode::MalformedHeader, "png decode failed: " + path);
    }
    png_init_io(png, fp);
    // Expand palette/low-bit images, strip alpha: output is 8- or 16-bit
    // gray or RGB.
    png_read_png(png, info,
                 PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND,
                 nullptr);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    const bool ok_layout = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_RGB) &&
                           (bit_depth == 8 || bit_depth == 16) && width > 0 && height > 0;
    if (!ok_layout) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(ErrorCode::MalformedHeader, "unsupported png layout: " + path);
    }

    png_bytep* rows = png_get_rows(png, info);
    try {
        data.resize(static_cast<size_t>(width) * height * channels);
        const size_t plane = static_cast<size_t>(width) * height;
        const float norm = bit_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
        for (int y = 0; y < height; ++y) {
            const png_bytep row = rows[y];
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < channels; ++c) {
                    unsigned v;
                    if (bit_depth == 8) {
                        v = row[x * channels + c];
                    } else {  // PNG 16-bit samples are big-endian
                        const size_t o = (static_cast<size_t>(x) * channels + c) * 2;
                        v = (static_cast<unsigned>(row[o]) << 8) | row[o + 1];
                    }
                    data[c * plane + static_cast<size_t>(y) * width + x] =
                        static_cast<float>(v) * norm;
                }
            }
        }
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return PlanarImage(width, height, channels, std::move(data));
}

/// Writes a 1- or 3-channel image as PNG at 8 or 16 bits; values are clamped
/// to [0,1] and scaled to the full code range.
inline void save_png(const PlanarImage& img, const std::string& path, int bit_depth = 8) {
    img.validate();
    require(img.channels == 1 || img.channels == 3, ErrorCode::DimensionMismatch,
            "png output supports 1 or 3 channels");
    require(bit_depth == 8 || bit_depth == 16, ErrorCode::InvalidArgument,
            "png bit depth must be 8 or 16");

    FILE* fp = std::fopen(path.c_str(), "wb");
    require(fp != nullptr, ErrorCode::IoError, "cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png)
            png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail(ErrorCode::IoError, "png allocation failed");
    }

    const size_t stride = static_cast<size_t>(img.width) * img.channels * (bit_depth / 8);
    std::vector<png_byte> rowbuf(stride);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail(ErrorCode::IoError, "png encode failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), bit_depth,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t plane = img.plane_size();
    const float scale = bit_depth == 8 ? 255.0f : 65535.0f;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                float v = img.data[c * plane + static_cast<size_t>(y) * img.width + x];
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                const unsigned q = static_cast<unsigned>(std::nearbyintf(v * scale));
                if (bit_depth == 8) {
                    rowbuf[static_cast<size_t>(x) * img.channels + c] = static_cast<png_byte>(q);
                } else {
                    const size_t o = (static_cast<size_t>(x) * img.channels + c) * 2;
                    rowbuf[o] = static_cast<png_byte>(q >> 8);
                    rowbuf[o + 1] = static_cast<png_byte>(q & 0xFF);
                }
            }
        }
        png_write_row(png, rowbuf.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

namespace detail {

inline void byteswap_floats(std::vector<float>& v) {
    for (float& f : v) {
        uint32_t u;
        std::memcpy(&u, &f, 4);
        u = ((u & 0x000000FFu) << 24) | ((u & 0x0000FF00u) << 8) | ((u & 0x00FF0000u) >> 8) |
            ((u & 0xFF000000u) >> 24);
        std::memcpy(&f, &u, 4);
    }
}

inline bool host_is_little_endian() {
    const uint16_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

}  // namespace detail

/// Loads a PFM float image ("Pf" grayscale or "PF" color). The scale line's
/// sign gives the byte order (negative = little-endian); rows are stored
/// bottom-up.
inline PlanarImage load_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open: " + path);
    std::string magic;
    f >> magic;
    require(magic == "Pf" || magic == "PF", ErrorCode::MalformedHeader,
            "not a pfm file: " + path);
    const int channels = magic == "PF" ? 3 : 1;
    long long w = 0, h = 0;
    double scale = 0.0;
    f >> w >> h >> scale;
    require(f.good() && w > 0 && h > 0 && scale != 0.0, ErrorCode::MalformedHeader,
            "bad pfm header: " + path);
    const int sep = f.get();
    require(sep == '\n' || sep == ' ' || sep == '\r' || sep == '\t', ErrorCode::MalformedHeader,
            "missing pfm header separator");

    std::vector<float> raw(static_cast<size_t>(w) * h * channels);
    f.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(raw.size() * sizeof(float)));
    require(f.gcount() == static_cast<std::streamsize>(raw.size() * sizeof(float)),
            ErrorCode::MalformedHeader, "pfm payload truncated: " + path);
    const bool file_le = scale < 0.0;
    if (file_le != detail::host_is_little_endian())
        detail::byteswap_floats(raw);

    // PFM interleaves channels and stores the bottom row first.
    std::vector<float> data(raw.size());
    const size_t plane = static_cast<size_t>(w) * h;
    for (long long y = 0; y < h; ++y) {
        const size_t src_row = static_cast<size_t>(h - 1 - y) * w * channels;
        for (long long x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                data[c * plane + static_cast<size_t>(y) * w + x] =
                    raw[src_row + static_cast<size_t>(x) * channels + c];
    }
    return PlanarImage(static_cast<int>(w), static_cast<int>(h), channels, std::move(data));
}

/// Writes a 1- or 3-channel float image as little-endian PFM.
inline void save_pfm(const PlanarImage& img, const std::string& path) {
    img.validate();
    require(img.channels == 1 || img.channels == 3, ErrorCode::DimensionMismatch,
            "pfm output supports 1 or 3 channels");
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorCode::IoError, "cannot open for writing: " + path);
    f << (img.channels == 3 ? "PF" : "Pf") << "\n" << img.width << " " << img.height << "\n";
    f << (detail::host_is_little_endian() ? "-1.0" : "1.0") << "\n";
    const size_t plane = img.plane_size();
    std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] =
                    img.data[c * plane + static_cast<size_t>(y) * img.width + x];
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    require(f.good(), ErrorCode::IoError, "write failed: " + path);
}

}  // namespace dofsim

#endif  // DOFSIM_IMAGE_IO_HPP
