#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <svgeom/image.hpp>

namespace svgeom {

/// Top-view height grid around the vehicle. The grid spans [-range, range]
/// in both ground axes; cell (0, 0) covers the corner at (-range, -range).
/// Heights are only meaningful where `known` is set.
struct HeightGrid {
    explicit HeightGrid(double cell_size_m = 0.05, double range_m = 10.0)
        : cell_size(cell_size_m), range(range_m) {
        if (!(cell_size > 0.0) || !(range > 0.0))
            throw std::invalid_argument("HeightGrid: cell size and range must be positive");
        cells = static_cast<int>(std::llround(2.0 * range / cell_size));
        if (cells < 1)
            throw std::invalid_argument("HeightGrid: range smaller than one cell");
        height = Image<float>(cells, cells);
        count = Image<std::uint32_t>(cells, cells);
        known = Image<std::uint8_t>(cells, cells);
    }

    bool same_geometry(const HeightGrid &other) const {
        return cells == other.cells && cell_size == other.cell_size && range == other.range;
    }

    double cell_size;
    double range;
    int cells = 0;
    Image<float> height;
    Image<std::uint32_t> count;
    Image<std::uint8_t> known;
};

/// Carries the previous smoothed grid between frames for the temporal filter.
struct FusionState {
    std::optional<HeightGrid> previous;
    double lambda = 0.5; // blend weight of the current frame, in (0, 1]
};

/// Drop vehicle-frame points into a fresh grid with the geometry of `proto`.
/// A cell keeps the maximum height among its hits (an obstacle clipping the
/// cell matters more than the ground behind it); points outside the range
/// are skipped.
inline HeightGrid project_to_grid(const std::vector<Eigen::Vector3d> &points,
                                  const HeightGrid &proto) {
    HeightGrid grid(proto.cell_size, proto.range);
    for (const auto &p : points) {
        const int ix = static_cast<int>(std::floor((p.x() + grid.range) / grid.cell_size));
        const int iy = static_cast<int>(std::floor((p.y() + grid.range) / grid.cell_size));
        if (ix < 0 || ix >= grid.cells || iy < 0 || iy >= grid.cells)
            continue;
        const float z = static_cast<float>(p.z());
        if (grid.known(ix, iy))
            grid.height(ix, iy) = std::max(grid.height(ix, iy), z);
        else
            grid.height(ix, iy) = z;
        grid.known(ix, iy) = 1;
        ++grid.count(ix, iy);
    }
    return grid;
}

/// Merge per-camera grids: cells seen by several cameras combine by the
/// observation-count-weighted mean, single-camera cells pass through.
inline HeightGrid fuse_cameras(const std::vector<HeightGrid> &grids) {
    if (grids.empty())
        throw std::invalid_argument("fuse_cameras: nothing to fuse");
    for (const auto &g : grids)
        if (!g.same_geometry(grids.front()))
            throw std::invalid_argument("fuse_cameras: grid geometries differ");
    HeightGrid fused(grids.front().cell_size, grids.front().range);
    for (int iy = 0; iy < fused.cells; ++iy)
        for (int ix = 0; ix < fused.cells; ++ix) {
            double weighted = 0.0;
            std::uint64_t total = 0;
            for (const auto &g : grids) {
                if (!g.known(ix, iy))
                    continue;
                weighted += static_cast<double>(g.height(ix, iy)) * g.count(ix, iy);
                total += g.count(ix, iy);
            }
            if (total == 0)
                continue;
            fused.height(ix, iy) = static_cast<float>(weighted / static_cast<double>(total));
            fused.count(ix, iy) = static_cast<std::uint32_t>(
                std::min<std::uint64_t>(total, std::numeric_limits<std::uint32_t>::max()));
            fused.known(ix, iy) = 1;
        }
    return fused;
}

/// 3x3 median over the known cells of each window. Unknown cells stay
/// unknown; a known cell always has at least itself in the window.
inline HeightGrid spatial_smooth(const HeightGrid &grid) {
    HeightGrid out = grid;
    std::vector<float> window;
    window.reserve(9);
    for (int iy = 0; iy < grid.cells; ++iy)
        for (int ix = 0; ix < grid.cells; ++ix) {
            if (!grid.known(ix, iy))
                continue;
            window.clear();
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ax = ix + dx, ay = iy + dy;
                    if (ax < 0 || ax >= grid.cells || ay < 0 || ay >= grid.cells)
                        continue;
                    if (grid.known(ax, ay))
                        window.push_back(grid.height(ax, ay));
                }
            std::sort(window.begin(), window.end());
            const size_t n = window.size();
            out.height(ix, iy) = n % 2 ? window[n / 2]
                                       : 0.5f * (window[n / 2 - 1] + window[n / 2]);
        }
    return out;
}

/// Exponential blend against the previous smoothed grid. Cells known in both
/// frames mix as lambda * now + (1 - lambda) * prev; cells the current frame
/// does not see stay unknown (the filter never invents observations). The
/// result becomes the new `state.previous`.
inline HeightGrid temporal_smooth(const HeightGrid &grid, FusionState &state) {
    if (!(state.lambda > 0.0) || state.lambda > 1.0)
        throw std::invalid_argument("temporal_smooth: lambda must be in (0, 1]");
    HeightGrid out = grid;
    if (state.previous) {
        const HeightGrid &prev = *state.previous;
        if (!prev.same_geometry(grid))
            throw std::invalid_argument("temporal_smooth: grid geometry changed between frames");
        for (int iy = 0; iy < grid.cells; ++iy)
            for (int ix = 0; ix < grid.cells; ++ix)
                if (grid.known(ix, iy) && prev.known(ix, iy))
                    out.height(ix, iy) =
                        static_cast<float>(state.lambda * grid.height(ix, iy) +
                                           (1.0 - state.lambda) * prev.height(ix, iy));
    }
    state.previous = out;
    return out;
}

} // namespace svgeom
