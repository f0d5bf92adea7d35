#pragma once

// Naive nested-loop transcriptions of the nn kernels, kept deliberately free
// of the production code paths (nothing is precomputed or hoisted) so the
// equivalence tests compare two independently written evaluations. Not meant
// to be fast; used only by tests.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include <svgeom/nn/attention.hpp>
#include <svgeom/nn/pac.hpp>

namespace svgeom {

inline FeatureMap pixel_adaptive_conv_reference(const FeatureMap &x, const FeatureMap &guide,
                                                const PacFilter &f) {
    const int r = f.k / 2;
    const int c_out = static_cast<int>(f.bias.size());
    FeatureMap out(x.width(), x.height(), c_out);
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i)
            for (int o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int a = i + dx, b = j + dy;
                        if (a < 0 || a >= x.width() || b < 0 || b >= x.height())
                            continue;
                        double sq = 0.0;
                        for (int c = 0; c < guide.channels(); ++c) {
                            const double diff = guide(i, j, c) - guide(a, b, c);
                            sq += diff * diff;
                        }
                        const double kern = std::exp(-sq * (0.5 / (f.sigma * f.sigma)));
                        double dot = 0.0;
                        for (int c = 0; c < x.channels(); ++c)
                            dot += f.weights[(dy + r) * f.k + (dx + r)](o, c) * x(a, b, c);
                        acc += kern * dot;
                    }
                out(i, j, o) = acc + f.bias(o);
            }
    return out;
}

namespace detail {

// phi(x_ij) etc., evaluated in place with nothing cached.
inline double ref_transform_at(const Eigen::MatrixXd &m, const FeatureMap &x, int i, int j,
                               int row) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        acc += m(row, c) * x(i, j, static_cast<int>(c));
    return acc;
}

} // namespace detail

inline FeatureMap pairwise_attention_reference(const FeatureMap &x, const AttentionParams &p) {
    const int r = p.radius;
    const int d_mid = static_cast<int>(p.phi.rows());
    const int d_out = static_cast<int>(p.chi.rows());
    FeatureMap z(x.width(), x.height(), d_out);
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i) {
            std::vector<double> raw;
            std::vector<int> na, nb;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    if (a < 0 || a >= x.width() || b < 0 || b >= x.height())
                        continue;
                    for (int o = 0; o < d_out; ++o) {
                        double lin = p.zeta_b(o);
                        for (int c = 0; c < d_mid; ++c)
                            lin += p.zeta_w(o, c) * (detail::ref_transform_at(p.phi, x, i, j, c) *
                                                     detail::ref_transform_at(p.psi, x, a, b, c));
                        raw.push_back(std::exp(lin));
                    }
                    na.push_back(a);
                    nb.push_back(b);
                }
            for (int o = 0; o < d_out; ++o) {
                double sum = 0.0;
                if (p.normalize)
                    for (size_t m = 0; m < na.size(); ++m)
                        sum += raw[m * d_out + o];
                double acc = 0.0;
                for (size_t m = 0; m < na.size(); ++m) {
                    const double weight =
                        p.normalize ? raw[m * d_out + o] / sum : raw[m * d_out + o];
                    acc += weight * detail::ref_transform_at(p.chi, x, na[m], nb[m], o);
                }
                z(i, j, o) = acc;
            }
        }
    return z;
}

inline FeatureMap patchwise_attention_reference(const FeatureMap &x, const AttentionParams &p) {
    const int r = p.radius;
    const int side = 2 * r + 1;
    const int n = side * side;
    const int d_mid = static_cast<int>(p.phi.rows());
    const int d_out = static_cast<int>(p.chi.rows());
    FeatureMap z(x.width(), x.height(), d_out);
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i) {
            // Concatenated patch descriptor; absent neighbours stay zero.
            std::vector<double> delta(static_cast<size_t>(d_mid) * (1 + n), 0.0);
            for (int c = 0; c < d_mid; ++c)
                delta[c] = detail::ref_transform_at(p.phi, x, i, j, c);
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    if (a < 0 || a >= x.width() || b < 0 || b >= x.height())
                        continue;
                    const int pos = (dy + r) * side + (dx + r);
                    for (int c = 0; c < d_mid; ++c)
                        delta[static_cast<size_t>(d_mid) * (1 + pos) + c] =
                            detail::ref_transform_at(p.psi, x, a, b, c);
                }
            std::vector<double> raw(static_cast<size_t>(d_out) * n);
            for (int row = 0; row < d_out * n; ++row) {
                double lin = p.zeta_b(row);
                for (size_t c = 0; c < delta.size(); ++c)
                    lin += p.zeta_w(row, static_cast<Eigen::Index>(c)) * delta[c];
                raw[row] = std::exp(lin);
            }
            for (int o = 0; o < d_out; ++o) {
                double sum = 0.0;
                if (p.normalize)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int a = i + dx, b = j + dy;
                            if (a < 0 || a >= x.width() || b < 0 || b >= x.height())
                                continue;
                            sum += raw[((dy + r) * side + (dx + r)) * d_out + o];
                        }
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int a = i + dx, b = j + dy;
                        if (a < 0 || a >= x.width() || b < 0 || b >= x.height())
                            continue;
                        const double w = raw[((dy + r) * side + (dx + r)) * d_out + o];
                        const double weight = p.normalize ? w / sum : w;
                        acc += weight * detail::ref_transform_at(p.chi, x, a, b, o);
                    }
                z(i, j, o) = acc;
            }
        }
    return z;
}

} // namespace svgeom
