#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <svgeom/image.hpp>

namespace svgeom {

/// Parameters shared by the pairwise and patchwise vector attention ops.
/// phi/psi embed features for the relation, chi transforms the values, and
/// the affine map (zeta_w, zeta_b) followed by exp and a footprint-wise
/// normalisation turns relations into aggregation weights (a softmax over
/// the footprint, per output channel). `normalize` exists so tests can
/// observe the raw weights; real use keeps it on.
struct AttentionParams {
    int radius = 1;
    Eigen::MatrixXd phi;    // mid x in
    Eigen::MatrixXd psi;    // mid x in
    Eigen::MatrixXd chi;    // out x in
    Eigen::MatrixXd zeta_w; // pairwise: out x mid; patchwise: n*out x mid*(1+n)
    Eigen::VectorXd zeta_b; // one entry per zeta_w row
    bool normalize = true;
};

namespace detail {

inline void validate_attention_base(const FeatureMap &x, const AttentionParams &p) {
    if (p.radius < 0)
        throw std::invalid_argument("attention: radius must be non-negative");
    const int d_in = x.channels();
    if (p.phi.cols() != d_in || p.psi.cols() != d_in || p.chi.cols() != d_in)
        throw std::invalid_argument("attention: transform width does not match channels");
    if (p.phi.rows() != p.psi.rows())
        throw std::invalid_argument("attention: phi and psi must embed to the same size");
    if (p.zeta_b.size() != p.zeta_w.rows())
        throw std::invalid_argument("attention: zeta bias length mismatch");
}

/// Apply an `out x in` matrix to the channel vector at one pixel, written as
/// plain loops so callers that re-derive the same product elsewhere (the
/// brute-force references) agree bit for bit.
inline void apply_transform(const Eigen::MatrixXd &m, const FeatureMap &x, int i, int j,
                            double *out) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            acc += m(r, c) * x(i, j, static_cast<int>(c));
        out[r] = acc;
    }
}

inline FeatureMap transform_plane(const Eigen::MatrixXd &m, const FeatureMap &x) {
    FeatureMap out(x.width(), x.height(), static_cast<int>(m.rows()));
    std::vector<double> tmp(m.rows());
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i) {
            apply_transform(m, x, i, j, tmp.data());
            for (int c = 0; c < out.channels(); ++c)
                out(i, j, c) = tmp[c];
        }
    return out;
}

} // namespace detail

/// Pairwise vector attention:
///
///   z_ij = sum_{ab in footprint} zeta(phi(x_ij) . psi(x_ab)) . chi(x_ab)
///
/// where "." between vectors is elementwise. The footprint is the (2r+1)^2
/// window clipped to the image, and the weight normalisation runs over the
/// clipped footprint only.
inline FeatureMap pairwise_attention(const FeatureMap &x, const AttentionParams &p) {
    detail::validate_attention_base(x, p);
    if (p.zeta_w.cols() != p.phi.rows())
        throw std::invalid_argument("pairwise_attention: zeta width must match the embedding");
    if (p.zeta_w.rows() != p.chi.rows())
        throw std::invalid_argument("pairwise_attention: zeta and chi output sizes differ");

    const int w = x.width(), h = x.height();
    const int d_mid = static_cast<int>(p.phi.rows());
    const int d_out = static_cast<int>(p.chi.rows());
    const int r = p.radius;

    const FeatureMap fp = detail::transform_plane(p.phi, x);
    const FeatureMap fs = detail::transform_plane(p.psi, x);
    const FeatureMap fc = detail::transform_plane(p.chi, x);

    FeatureMap z(w, h, d_out);
    std::vector<double> raw;   // per-member weight vectors, footprint order
    std::vector<int> na, nb;   // member coordinates
    std::vector<double> delta(d_mid), sum(d_out), acc(d_out);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            raw.clear();
            na.clear();
            nb.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    if (!x.in_bounds(a, b))
                        continue;
                    for (int c = 0; c < d_mid; ++c)
                        delta[c] = fp(i, j, c) * fs(a, b, c);
                    for (int o = 0; o < d_out; ++o) {
                        double lin = p.zeta_b(o);
                        for (int c = 0; c < d_mid; ++c)
                            lin += p.zeta_w(o, c) * delta[c];
                        raw.push_back(std::exp(lin));
                    }
                    na.push_back(a);
                    nb.push_back(b);
                }
            const int n = static_cast<int>(na.size());
            for (int o = 0; o < d_out; ++o) {
                sum[o] = 0.0;
                acc[o] = 0.0;
            }
            if (p.normalize)
                for (int m = 0; m < n; ++m)
                    for (int o = 0; o < d_out; ++o)
                        sum[o] += raw[m * d_out + o];
            for (int m = 0; m < n; ++m)
                for (int o = 0; o < d_out; ++o) {
                    const double weight =
                        p.normalize ? raw[m * d_out + o] / sum[o] : raw[m * d_out + o];
                    acc[o] += weight * fc(na[m], nb[m], o);
                }
            for (int o = 0; o < d_out; ++o)
                z(i, j, o) = acc[o];
        }
    }
    return z;
}

/// Patchwise vector attention: the weights for every footprint position are
/// produced jointly from the whole patch,
///
///   z_ij = sum_{ab} zeta([phi(x_ij), psi(x_a1b1), ..., psi(x_anbn)])_ab . chi(x_ab)
///
/// so the op can tell footprint positions apart. Out-of-bounds patch slots
/// are zero vectors; the normalisation and the aggregation skip them.
inline FeatureMap patchwise_attention(const FeatureMap &x, const AttentionParams &p) {
    detail::validate_attention_base(x, p);
    const int side = 2 * p.radius + 1;
    const int n = side * side;
    const int d_mid = static_cast<int>(p.phi.rows());
    const int d_out = static_cast<int>(p.chi.rows());
    if (p.zeta_w.cols() != static_cast<Eigen::Index>(d_mid) * (1 + n))
        throw std::invalid_argument("patchwise_attention: zeta width must cover the patch");
    if (p.zeta_w.rows() != static_cast<Eigen::Index>(d_out) * n)
        throw std::invalid_argument("patchwise_attention: zeta must emit weights per position");

    const int w = x.width(), h = x.height();
    const int r = p.radius;
    const FeatureMap fp = detail::transform_plane(p.phi, x);
    const FeatureMap fs = detail::transform_plane(p.psi, x);
    const FeatureMap fc = detail::transform_plane(p.chi, x);

    FeatureMap z(w, h, d_out);
    std::vector<double> delta(static_cast<size_t>(d_mid) * (1 + n));
    std::vector<double> raw(static_cast<size_t>(d_out) * n);
    std::vector<char> inside(n);
    std::vector<double> sum(d_out), acc(d_out);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            for (int c = 0; c < d_mid; ++c)
                delta[c] = fp(i, j, c);
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    const int pos = (dy + r) * side + (dx + r);
                    inside[pos] = x.in_bounds(a, b);
                    double *slot = delta.data() + static_cast<size_t>(d_mid) * (1 + pos);
                    for (int c = 0; c < d_mid; ++c)
                        slot[c] = inside[pos] ? fs(a, b, c) : 0.0;
                }
            for (Eigen::Index row = 0; row < p.zeta_w.rows(); ++row) {
                double lin = p.zeta_b(row);
                for (Eigen::Index c = 0; c < p.zeta_w.cols(); ++c)
                    lin += p.zeta_w(row, c) * delta[c];
                raw[row] = std::exp(lin);
            }
            for (int o = 0; o < d_out; ++o) {
                sum[o] = 0.0;
                acc[o] = 0.0;
            }
            if (p.normalize)
                for (int pos = 0; pos < n; ++pos)
                    if (inside[pos])
                        for (int o = 0; o < d_out; ++o)
                            sum[o] += raw[pos * d_out + o];
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int a = i + dx, b = j + dy;
                    const int pos = (dy + r) * side + (dx + r);
                    if (!inside[pos])
                        continue;
                    for (int o = 0; o < d_out; ++o) {
                        const double weight = p.normalize ? raw[pos * d_out + o] / sum[o]
                                                          : raw[pos * d_out + o];
                        acc[o] += weight * fc(a, b, o);
                    }
                }
            for (int o = 0; o < d_out; ++o)
                z(i, j, o) = acc[o];
        }
    }
    return z;
}

} // namespace svgeom
