#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "camera.hpp"
#include "image.hpp"
#include "pose.hpp"

namespace svgeom {

/// Per-pixel 3D points in the camera frame; invalid pixels had no usable
/// unprojection (radius outside the lens domain, nonpositive distance).
struct PointCloud {
    Image<double> x, y, z;
    Image<std::uint8_t> valid;

    explicit PointCloud(int w, int h) : x(w, h), y(w, h), z(w, h), valid(w, h) {}
    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

/// Continuous source-image coordinates per target pixel. Invalid entries are
/// never dereferenced by the samplers.
struct SampleGrid {
    Image<double> u, v;
    Image<std::uint8_t> valid;

    explicit SampleGrid(int w, int h) : u(w, h), v(w, h), valid(w, h) {}
    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

/// Lift every pixel to 3D by scaling its unit ray with the Euclidean distance.
/// Pixels whose radius has no root, or whose distance is not positive and
/// finite, are flagged invalid instead of aborting the frame.
inline PointCloud lift(const DistanceMap &dist, const Camera &camera) {
    const Intrinsics &k = camera.intrinsics();
    if (dist.width() != k.width || dist.height() != k.height || dist.channels() != 1)
        throw std::invalid_argument("lift: distance map does not match the sensor size");
    PointCloud cloud(dist.width(), dist.height());
    for (int y = 0; y < dist.height(); ++y) {
        for (int x = 0; x < dist.width(); ++x) {
            const double d = dist(x, y);
            const double rho = std::hypot(x - k.cx, y - k.cy);
            if (!(d > 0.0) || !std::isfinite(d) || rho > camera.rho_max())
                continue;
            const Eigen::Vector3d p = camera.unproject(x, y) * d;
            cloud.x(x, y) = p.x();
            cloud.y(x, y) = p.y();
            cloud.z(x, y) = p.z();
            cloud.valid(x, y) = 1;
        }
    }
    return cloud;
}

/// Transform the cloud into the source frame and project it into the source
/// camera. Validity combines the cloud flag with the projection flag.
inline SampleGrid reproject(const PointCloud &cloud, const Pose &pose,
                            const Camera &src_camera) {
    SampleGrid grid(cloud.width(), cloud.height());
    for (int y = 0; y < cloud.height(); ++y) {
        for (int x = 0; x < cloud.width(); ++x) {
            if (!cloud.valid(x, y))
                continue;
            const Eigen::Vector3d p =
                pose.apply({cloud.x(x, y), cloud.y(x, y), cloud.z(x, y)});
            if (p.isZero())
                continue;
            const ProjectedPixel px = src_camera.project(p);
            grid.u(x, y) = px.u;
            grid.v(x, y) = px.v;
            grid.valid(x, y) = px.valid ? 1 : 0;
        }
    }
    return grid;
}

/// Bilinear resampling with zero fill: invalid grid entries produce 0, and
/// out-of-bounds neighbors contribute 0 rather than clamping.
inline ImageBuffer bilinear_sample(const ImageBuffer &src, const SampleGrid &grid) {
    ImageBuffer out(grid.width(), grid.height(), src.channels());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            if (!grid.valid(x, y))
                continue;
            const double u = grid.u(x, y);
            const double v = grid.v(x, y);
            const int x0 = static_cast<int>(std::floor(u));
            const int y0 = static_cast<int>(std::floor(v));
            const double wx = u - x0;
            const double wy = v - y0;
            const double w00 = (1.0 - wx) * (1.0 - wy);
            const double w10 = wx * (1.0 - wy);
            const double w01 = (1.0 - wx) * wy;
            const double w11 = wx * wy;
            for (int c = 0; c < src.channels(); ++c) {
                double acc = 0.0;
                if (src.in_bounds(x0, y0))
                    acc += w00 * src(x0, y0, c);
                if (src.in_bounds(x0 + 1, y0))
                    acc += w10 * src(x0 + 1, y0, c);
                if (src.in_bounds(x0, y0 + 1))
                    acc += w01 * src(x0, y0 + 1, c);
                if (src.in_bounds(x0 + 1, y0 + 1))
                    acc += w11 * src(x0 + 1, y0 + 1, c);
                out(x, y, c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

/// Nearest-neighbor resampling for label maps; invalid or out-of-bounds
/// entries yield label 0 and are excluded by the ego mask.
inline LabelMap nearest_sample(const LabelMap &labels, const SampleGrid &grid) {
    LabelMap out(grid.width(), grid.height(), labels.channels());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            if (!grid.valid(x, y))
                continue;
            const int sx = static_cast<int>(std::lround(grid.u(x, y)));
            const int sy = static_cast<int>(std::lround(grid.v(x, y)));
            if (!labels.in_bounds(sx, sy))
                continue;
            for (int c = 0; c < labels.channels(); ++c)
                out(x, y, c) = labels(sx, sy, c);
        }
    }
    return out;
}

/// 1 where the grid is valid and lands inside [0, w-1] x [0, h-1] of the
/// source image, so every bilinear neighbor exists.
inline EgoMask ego_mask(const SampleGrid &grid, int src_w, int src_h) {
    EgoMask mask(grid.width(), grid.height());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            const bool inside = grid.valid(x, y) && grid.u(x, y) >= 0.0 &&
                                grid.u(x, y) <= src_w - 1 && grid.v(x, y) >= 0.0 &&
                                grid.v(x, y) <= src_h - 1;
            mask(x, y) = inside ? 1 : 0;
        }
    }
    return mask;
}

} // namespace svgeom
