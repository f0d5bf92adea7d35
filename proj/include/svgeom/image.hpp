#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace svgeom {

/// Planar, row-major image buffer. Channel planes are stored back to back;
/// within a plane, pixel (x, y) lives at y * width + x.
template <typename T>
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels = 1, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {
        if (width < 1 || height < 1 || channels < 1)
            throw std::invalid_argument("Image: dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t plane_size() const { return static_cast<size_t>(width_) * height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T &operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    const T &operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    T *data() { return data_.data(); }
    const T *data() const { return data_.data(); }
    T *plane(int c) { return data_.data() + c * plane_size(); }
    const T *plane(int c) const { return data_.data() + c * plane_size(); }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    bool same_shape(const Image &other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    friend bool operator==(const Image &a, const Image &b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.channels_ == b.channels_ &&
               a.data_ == b.data_;
    }

  private:
    size_t index(int x, int y, int c) const {
        return c * plane_size() + static_cast<size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using ImageBuffer = Image<float>;
using DistanceMap = Image<float>;
using LabelMap = Image<std::uint8_t>;
using EgoMask = Image<std::uint8_t>;
using FeatureMap = Image<double>;

template <typename T, typename U>
Image<T> image_cast(const Image<U> &src) {
    Image<T> out(src.width(), src.height(), src.channels());
    for (int c = 0; c < src.channels(); ++c)
        for (int y = 0; y < src.height(); ++y)
            for (int x = 0; x < src.width(); ++x)
                out(x, y, c) = static_cast<T>(src(x, y, c));
    return out;
}

/// Corner-aligned bilinear resize: output corners map exactly onto input
/// corners, so resizing to the native size is the identity.
template <typename T>
Image<T> resize_bilinear(const Image<T> &src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1)
        throw std::invalid_argument("resize_bilinear: output size must be positive");
    Image<T> out(out_w, out_h, src.channels());
    const double sx = out_w > 1 ? static_cast<double>(src.width() - 1) / (out_w - 1) : 0.0;
    const double sy = out_h > 1 ? static_cast<double>(src.height() - 1) / (out_h - 1) : 0.0;
    for (int c = 0; c < src.channels(); ++c) {
        for (int y = 0; y < out_h; ++y) {
            const double fy = y * sy;
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, src.height() - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                const double fx = x * sx;
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, src.width() - 1);
                const double wx = fx - x0;
                const double top = (1.0 - wx) * src(x0, y0, c) + wx * src(x1, y0, c);
                const double bot = (1.0 - wx) * src(x0, y1, c) + wx * src(x1, y1, c);
                out(x, y, c) = static_cast<T>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

} // namespace svgeom
