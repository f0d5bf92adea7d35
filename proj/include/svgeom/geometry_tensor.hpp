#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "camera.hpp"
#include "image.hpp"

namespace svgeom {

/// Plane order inside a camera geometry tensor.
enum GeometryChannel : int {
    kCcX = 0, // centered pixel coordinates, x
    kCcY = 1, // centered pixel coordinates, y
    kAX = 2,  // horizontal incidence angle, radians
    kAY = 3,  // vertical incidence angle, radians
    kNcX = 4, // normalized coordinates in [-1, 1], x
    kNcY = 5, // normalized coordinates in [-1, 1], y
};

/// Six-plane per-pixel camera geometry descriptor in the order above.
/// float is the storage format; instantiate with double when downstream math
/// needs full precision.
template <typename T = float>
using GeometryTensor = Image<T>;

/// Centered coordinate planes: built on the native (w+1) x (h+1) sensor grid
/// as cc_x[i,j] = i - cx, cc_y[i,j] = j - cy, then bilinearly resized.
template <typename T = float>
std::pair<Image<T>, Image<T>> centered_coords(const Camera &camera, int out_w, int out_h) {
    const Intrinsics &k = camera.intrinsics();
    Image<T> ccx(k.width + 1, k.height + 1);
    Image<T> ccy(k.width + 1, k.height + 1);
    for (int j = 0; j <= k.height; ++j) {
        for (int i = 0; i <= k.width; ++i) {
            ccx(i, j) = static_cast<T>(i - k.cx);
            ccy(i, j) = static_cast<T>(j - k.cy);
        }
    }
    return {resize_bilinear(ccx, out_w, out_h), resize_bilinear(ccy, out_w, out_h)};
}

/// Per-pixel incidence angles from centered coordinates: the radial inverse of
/// the coordinate magnitude, with the coordinate sign carried so the map is
/// odd about the principal point. The polynomial model goes through a root
/// lookup table (built on demand when none is supplied).
template <typename T>
std::pair<Image<T>, Image<T>> incidence_maps(const Camera &camera, const Image<T> &ccx,
                                             const Image<T> &ccy,
                                             const RootLut *lut = nullptr) {
    if (!ccx.same_shape(ccy))
        throw std::invalid_argument("incidence_maps: coordinate planes differ in shape");
    std::optional<RootLut> own;
    if (camera.intrinsics().model == CameraModel::polynomial && !lut)
        own.emplace(camera);
    const RootLut *table = lut ? lut : (own ? &*own : nullptr);
    const auto angle = [&](double cc) {
        const double theta =
            table ? (*table)(std::abs(cc)) : camera.radial_inverse(std::abs(cc));
        return std::copysign(theta, cc);
    };
    Image<T> ax(ccx.width(), ccx.height());
    Image<T> ay(ccx.width(), ccx.height());
    for (int y = 0; y < ccx.height(); ++y) {
        for (int x = 0; x < ccx.width(); ++x) {
            ax(x, y) = static_cast<T>(angle(ccx(x, y)));
            ay(x, y) = static_cast<T>(angle(ccy(x, y)));
        }
    }
    return {std::move(ax), std::move(ay)};
}

/// Normalized coordinate planes spanning [-1, 1] linearly across the output,
/// independent of the camera.
template <typename T = float>
std::pair<Image<T>, Image<T>> normalized_coords(int out_w, int out_h) {
    if (out_w < 2 || out_h < 2)
        throw std::invalid_argument("normalized_coords: output must be at least 2x2");
    Image<T> ncx(out_w, out_h);
    Image<T> ncy(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            ncx(x, y) = static_cast<T>(2.0 * x / (out_w - 1) - 1.0);
            ncy(x, y) = static_cast<T>(2.0 * y / (out_h - 1) - 1.0);
        }
    }
    return {std::move(ncx), std::move(ncy)};
}

/// Full six-plane tensor: centered coordinates and incidence angles are built
/// on the native sensor grid and resized; normalized coordinates are built
/// directly at the output size.
template <typename T = float>
GeometryTensor<T> assemble_tensor(const Camera &camera, int out_w, int out_h,
                                  const RootLut *lut = nullptr) {
    const Intrinsics &k = camera.intrinsics();
    auto [ccx_n, ccy_n] = centered_coords<T>(camera, k.width + 1, k.height + 1);
    auto [ax_n, ay_n] = incidence_maps(camera, ccx_n, ccy_n, lut);
    const Image<T> planes[4] = {
        resize_bilinear(ccx_n, out_w, out_h), resize_bilinear(ccy_n, out_w, out_h),
        resize_bilinear(ax_n, out_w, out_h), resize_bilinear(ay_n, out_w, out_h)};
    auto [ncx, ncy] = normalized_coords<T>(out_w, out_h);

    GeometryTensor<T> tensor(out_w, out_h, 6);
    const Image<T> *src[6] = {&planes[0], &planes[1], &planes[2],
                              &planes[3], &ncx,       &ncy};
    for (int c = 0; c < 6; ++c)
        std::copy(src[c]->data(), src[c]->data() + src[c]->size(),
                  tensor.data() + c * tensor.plane_size());
    return tensor;
}

} // namespace svgeom
