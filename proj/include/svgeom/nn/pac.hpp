#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <svgeom/image.hpp>

namespace svgeom {

/// Parameters of one pixel-adaptive convolution: a conventional k x k filter
/// bank (one out x in matrix per window offset, row-major over the window)
/// plus the bandwidth of the Gaussian kernel applied to the guidance features.
struct PacFilter {
    int k = 3;
    std::vector<Eigen::MatrixXd> weights; // k*k matrices, each out x in
    Eigen::VectorXd bias;                 // one scalar per output channel
    double sigma = 1.0;
};

namespace detail {

inline void validate_pac(const FeatureMap &x, const FeatureMap &guide, const PacFilter &f) {
    if (x.width() != guide.width() || x.height() != guide.height())
        throw std::invalid_argument("pixel_adaptive_conv: input and guidance sizes differ");
    if (f.k < 1 || f.k % 2 == 0)
        throw std::invalid_argument("pixel_adaptive_conv: window size must be odd");
    if (!(f.sigma > 0.0))
        throw std::invalid_argument("pixel_adaptive_conv: sigma must be positive");
    if (static_cast<int>(f.weights.size()) != f.k * f.k)
        throw std::invalid_argument("pixel_adaptive_conv: need one weight matrix per offset");
    const Eigen::Index out = f.weights.front().rows();
    for (const auto &w : f.weights)
        if (w.rows() != out || w.cols() != x.channels())
            throw std::invalid_argument("pixel_adaptive_conv: weight shape mismatch");
    if (f.bias.size() != out)
        throw std::invalid_argument("pixel_adaptive_conv: bias length mismatch");
}

} // namespace detail

/// Convolution whose window terms are modulated by a Gaussian affinity
/// between the guidance feature at the centre and at the neighbour:
///
///   x'_ij = sum_{ab in window} exp(-|G_ij - G_ab|^2 / (2 sigma^2))
///           * W[a-i, b-j] x_ab  +  B
///
/// Out-of-bounds neighbours are treated as zero vectors, so they drop out of
/// the sum regardless of their affinity.
inline FeatureMap pixel_adaptive_conv(const FeatureMap &x, const FeatureMap &guide,
                                      const PacFilter &f) {
    detail::validate_pac(x, guide, f);
    const int w = x.width(), h = x.height();
    const int c_in = x.channels();
    const int c_out = static_cast<int>(f.weights.front().rows());
    const int d = guide.channels();
    const int r = f.k / 2;
    const double inv_two_sigma2 = 0.5 / (f.sigma * f.sigma);

    FeatureMap out(w, h, c_out);
    std::vector<double> acc(c_out);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            for (int o = 0; o < c_out; ++o)
                acc[o] = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    if (!x.in_bounds(a, b))
                        continue;
                    double sq = 0.0;
                    for (int c = 0; c < d; ++c) {
                        const double diff = guide(i, j, c) - guide(a, b, c);
                        sq += diff * diff;
                    }
                    const double kern = std::exp(-sq * inv_two_sigma2);
                    const Eigen::MatrixXd &wm = f.weights[(dy + r) * f.k + (dx + r)];
                    for (int o = 0; o < c_out; ++o) {
                        double dot = 0.0;
                        for (int c = 0; c < c_in; ++c)
                            dot += wm(o, c) * x(a, b, c);
                        acc[o] += kern * dot;
                    }
                }
            }
            for (int o = 0; o < c_out; ++o)
                out(i, j, o) = acc[o] + f.bias(o);
        }
    }
    return out;
}

} // namespace svgeom
