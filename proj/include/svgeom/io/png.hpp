#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include <svgeom/image.hpp>

namespace svgeom {

/// Decoded PNG: exactly one of the two buffers is populated, matching
/// `bit_depth`. Only the formats this project writes are accepted back
/// (8-bit gray, 8-bit RGB, 16-bit gray); anything else is rejected rather
/// than converted.
struct PngData {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    Image<std::uint8_t> data8;
    Image<std::uint16_t> data16;
};

namespace detail {

class FileHandle {
  public:
    FileHandle(const std::string &path, const char *mode) : fp_(std::fopen(path.c_str(), mode)) {
        if (!fp_)
            throw std::runtime_error("png: cannot open " + path);
    }
    ~FileHandle() {
        if (fp_)
            std::fclose(fp_);
    }
    FileHandle(const FileHandle &) = delete;
    FileHandle &operator=(const FileHandle &) = delete;
    std::FILE *get() { return fp_; }

  private:
    std::FILE *fp_;
};

} // namespace detail

/// Write an 8-bit PNG; `img` must have 1 (gray) or 3 (RGB) planes.
inline void write_png8(const std::string &path, const Image<std::uint8_t> &img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw std::invalid_argument("write_png8: need 1 or 3 channels");
    detail::FileHandle file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: allocation failed");
    }
    // interleave the planes into rows up front, before libpng's longjmp scope
    std::vector<std::uint8_t> rows(static_cast<size_t>(img.width()) * img.height() *
                                   img.channels());
    std::vector<png_bytep> row_ptrs(img.height());
    const size_t stride = static_cast<size_t>(img.width()) * img.channels();
    for (int y = 0; y < img.height(); ++y) {
        row_ptrs[y] = rows.data() + y * stride;
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                row_ptrs[y][x * img.channels() + c] = img(x, y, c);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: write failed for " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Write a 16-bit grayscale PNG (single plane).
inline void write_png16(const std::string &path, const Image<std::uint16_t> &img) {
    if (img.channels() != 1)
        throw std::invalid_argument("write_png16: need a single channel");
    detail::FileHandle file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: allocation failed");
    }
    // PNG 16-bit samples are big-endian in the stream; pack bytes explicitly
    std::vector<std::uint8_t> rows(static_cast<size_t>(img.width()) * img.height() * 2);
    std::vector<png_bytep> row_ptrs(img.height());
    const size_t stride = static_cast<size_t>(img.width()) * 2;
    for (int y = 0; y < img.height(); ++y) {
        row_ptrs[y] = rows.data() + y * stride;
        for (int x = 0; x < img.width(); ++x) {
            row_ptrs[y][2 * x] = static_cast<std::uint8_t>(img(x, y) >> 8);
            row_ptrs[y][2 * x + 1] = static_cast<std::uint8_t>(img(x, y) & 0xff);
        }
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: write failed for " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline PngData read_png(const std::string &path) {
    detail::FileHandle file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: allocation failed");
    }
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: cannot decode " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    int channels = 0;
    if (color == PNG_COLOR_TYPE_GRAY)
        channels = 1;
    else if (color == PNG_COLOR_TYPE_RGB)
        channels = 3;
    if (channels == 0 || (depth != 8 && depth != 16) || (depth == 16 && channels != 1)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: unsupported pixel format in " + path);
    }
    const size_t stride = static_cast<size_t>(width) * channels * (depth / 8);
    raw.resize(stride * height);
    row_ptrs.resize(height);
    for (int y = 0; y < height; ++y)
        row_ptrs[y] = raw.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    PngData out;
    out.width = width;
    out.height = height;
    out.channels = channels;
    out.bit_depth = depth;
    if (depth == 8) {
        out.data8 = Image<std::uint8_t>(width, height, channels);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    out.data8(x, y, c) = raw[y * stride + x * channels + c];
    } else {
        out.data16 = Image<std::uint16_t>(width, height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                out.data16(x, y) = static_cast<std::uint16_t>(
                    (raw[y * stride + 2 * x] << 8) | raw[y * stride + 2 * x + 1]);
    }
    return out;
}

// ---- float image <-> 8-bit PNG ---------------------------------------------

/// Store a [0,1] float image as 8-bit PNG (1 or 3 channels). Values are
/// clamped, so the quantization error is at most 1/510 inside the range.
inline void save_image_png(const ImageBuffer &img, const std::string &path) {
    if (img.channels() != 1 && img.channels() != 3)
        throw std::invalid_argument("save_image_png: need 1 or 3 channels");
    Image<std::uint8_t> q(img.width(), img.height(), img.channels());
    for (int c = 0; c < img.channels(); ++c)
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                const float v = img(x, y, c);
                const long code = std::isfinite(v) ? std::lround(v * 255.0f) : 0;
                q(x, y, c) = static_cast<std::uint8_t>(std::clamp(code, 0L, 255L));
            }
    write_png8(path, q);
}

inline ImageBuffer load_image_png(const std::string &path) {
    const PngData png = read_png(path);
    if (png.bit_depth != 8)
        throw std::runtime_error("load_image_png: " + path + " is not an 8-bit image");
    ImageBuffer out(png.width, png.height, png.channels);
    for (int c = 0; c < png.channels; ++c)
        for (int y = 0; y < png.height; ++y)
            for (int x = 0; x < png.width; ++x)
                out(x, y, c) = static_cast<float>(png.data8(x, y, c)) / 255.0f;
    return out;
}

// ---- distance map <-> 16-bit PNG -------------------------------------------

/// Fixed-point distance encoding: 1/256 m per code unit (code 256 is one
/// metre), code 0 reserved for invalid pixels. Positive distances closer
/// than half a code unit therefore collapse to invalid; the round trip is
/// otherwise within 1/512 m.
inline void save_distance_png(const DistanceMap &dist, const std::string &path) {
    if (dist.channels() != 1)
        throw std::invalid_argument("save_distance_png: need a single channel");
    Image<std::uint16_t> q(dist.width(), dist.height());
    for (int y = 0; y < dist.height(); ++y)
        for (int x = 0; x < dist.width(); ++x) {
            const float d = dist(x, y);
            if (!std::isfinite(d) || d <= 0.0f)
                continue; // stays 0: invalid
            q(x, y) = static_cast<std::uint16_t>(
                std::clamp(std::lround(d * 256.0f), 0L, 65535L));
        }
    write_png16(path, q);
}

inline DistanceMap load_distance_png(const std::string &path) {
    const PngData png = read_png(path);
    if (png.bit_depth != 16)
        throw std::runtime_error("load_distance_png: " + path + " is not a 16-bit map");
    DistanceMap out(png.width, png.height);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            out(x, y) = static_cast<float>(png.data16(x, y)) / 256.0f;
    return out;
}

} // namespace svgeom
