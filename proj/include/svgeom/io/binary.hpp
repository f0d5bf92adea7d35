#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <svgeom/heightmap.hpp>
#include <svgeom/image.hpp>

namespace svgeom {

// Little-endian binary containers. Each starts with a four-byte magic and a
// version integer so a mismatched file fails loudly instead of decoding into
// garbage.
//
//   SVGT  float32 plane stack:  magic, i32 version, i32 width/height/channels,
//         then width*height*channels float32, plane-major.
//   SVHG  height grid:          magic, i32 version, i32 cells,
//         f64 cell_size, f64 range, cells^2 float32 heights,
//         cells^2 uint8 known flags.
//
// SVGT doubles as the container for network parameter matrices (rows as
// height, columns as width, one channel); values pass through float32.

namespace detail {

inline void write_bytes(std::ofstream &out, const void *p, size_t n) {
    out.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::ifstream &in, void *p, size_t n, const std::string &path) {
    in.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
        throw std::runtime_error("binary: truncated file " + path);
}

inline void write_i32(std::ofstream &out, std::int32_t v) { write_bytes(out, &v, 4); }

inline std::int32_t read_i32(std::ifstream &in, const std::string &path) {
    std::int32_t v = 0;
    read_bytes(in, &v, 4, path);
    return v;
}

inline void check_magic(std::ifstream &in, const char (&magic)[5], int version,
                        const std::string &path) {
    char got[4];
    read_bytes(in, got, 4, path);
    if (std::memcmp(got, magic, 4) != 0)
        throw std::runtime_error("binary: " + path + " is not a " + magic + " file");
    const std::int32_t v = read_i32(in, path);
    if (v != version)
        throw std::runtime_error("binary: " + path + " has unsupported " + magic +
                                 " version " + std::to_string(v));
}

} // namespace detail

inline void save_tensor(const Image<float> &tensor, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("binary: cannot open " + path + " for writing");
    detail::write_bytes(out, "SVGT", 4);
    detail::write_i32(out, 1);
    detail::write_i32(out, tensor.width());
    detail::write_i32(out, tensor.height());
    detail::write_i32(out, tensor.channels());
    detail::write_bytes(out, tensor.data(), tensor.size() * sizeof(float));
    if (!out)
        throw std::runtime_error("binary: short write to " + path);
}

inline Image<float> load_tensor(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("binary: cannot open " + path);
    detail::check_magic(in, "SVGT", 1, path);
    const std::int32_t w = detail::read_i32(in, path);
    const std::int32_t h = detail::read_i32(in, path);
    const std::int32_t c = detail::read_i32(in, path);
    if (w < 1 || h < 1 || c < 1)
        throw std::runtime_error("binary: bad tensor shape in " + path);
    Image<float> tensor(w, h, c);
    detail::read_bytes(in, tensor.data(), tensor.size() * sizeof(float), path);
    return tensor;
}

inline void save_matrix(const Eigen::MatrixXd &m, const std::string &path) {
    Image<float> plane(static_cast<int>(m.cols()), static_cast<int>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            plane(static_cast<int>(c), static_cast<int>(r)) = static_cast<float>(m(r, c));
    save_tensor(plane, path);
}

inline Eigen::MatrixXd load_matrix(const std::string &path) {
    const Image<float> plane = load_tensor(path);
    if (plane.channels() != 1)
        throw std::runtime_error("binary: " + path + " is not a single matrix");
    Eigen::MatrixXd m(plane.height(), plane.width());
    for (int r = 0; r < plane.height(); ++r)
        for (int c = 0; c < plane.width(); ++c)
            m(r, c) = plane(c, r);
    return m;
}

/// The grid file stores heights and the known mask; observation counts are
/// per-run working state and reload as one observation per known cell.
inline void save_grid(const HeightGrid &grid, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("binary: cannot open " + path + " for writing");
    detail::write_bytes(out, "SVHG", 4);
    detail::write_i32(out, 1);
    detail::write_i32(out, grid.cells);
    detail::write_bytes(out, &grid.cell_size, sizeof(double));
    detail::write_bytes(out, &grid.range, sizeof(double));
    detail::write_bytes(out, grid.height.data(), grid.height.size() * sizeof(float));
    detail::write_bytes(out, grid.known.data(), grid.known.size());
    if (!out)
        throw std::runtime_error("binary: short write to " + path);
}

inline HeightGrid load_grid(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("binary: cannot open " + path);
    detail::check_magic(in, "SVHG", 1, path);
    const std::int32_t cells = detail::read_i32(in, path);
    double cell_size = 0.0, range = 0.0;
    detail::read_bytes(in, &cell_size, sizeof(double), path);
    detail::read_bytes(in, &range, sizeof(double), path);
    HeightGrid grid(cell_size, range);
    if (grid.cells != cells)
        throw std::runtime_error("binary: inconsistent grid geometry in " + path);
    detail::read_bytes(in, grid.height.data(), grid.height.size() * sizeof(float), path);
    detail::read_bytes(in, grid.known.data(), grid.known.size(), path);
    for (int iy = 0; iy < grid.cells; ++iy)
        for (int ix = 0; ix < grid.cells; ++ix)
            grid.count(ix, iy) = grid.known(ix, iy) ? 1 : 0;
    return grid;
}

} // namespace svgeom
