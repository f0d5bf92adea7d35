#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "robust_loss.hpp"
#include "ssim.hpp"

namespace svgeom {

struct LossWeights {
    double beta = 1e-3;         // smoothness weight
    double gamma = 1e-2;        // distance-consistency weight
    double tau = 0.85;          // SSIM share of the reconstruction loss
    double epsilon_frac = 1.0;  // fraction of frames eligible for dynamic masking
};

struct UncertaintyParams {
    double sigma1 = 1.0; // distance-task noise
    double sigma2 = 1.0; // segmentation-task noise
};

/// Per-pixel reconstruction penalty: tau * (1 - SSIM)/2 plus (1 - tau) times
/// the robust penalty of the across-channel residual norm. Masked-out pixels
/// score 0 and must be excluded downstream via the mask.
inline Image<float> reconstruction_map(const ImageBuffer &target, const ImageBuffer &recon,
                                       const EgoMask &mask, const LossWeights &w,
                                       const RobustParams &p) {
    if (!target.same_shape(recon))
        throw std::invalid_argument("reconstruction_map: images differ in shape");
    const Image<float> structural = ssim(target, recon, mask);
    Image<float> out(target.width(), target.height());
    for (int y = 0; y < target.height(); ++y) {
        for (int x = 0; x < target.width(); ++x) {
            if (!mask(x, y))
                continue;
            double sq = 0.0;
            for (int c = 0; c < target.channels(); ++c) {
                const double r = static_cast<double>(target(x, y, c)) - recon(x, y, c);
                sq += r * r;
            }
            out(x, y) = static_cast<float>(w.tau * (1.0 - structural(x, y)) / 2.0 +
                                           (1.0 - w.tau) * robust_loss(std::sqrt(sq), p));
        }
    }
    return out;
}

/// Per-pixel minimum over per-source maps, each with its own validity mask:
/// only valid sources compete, and the union mask records pixels covered by
/// at least one source.
inline std::pair<Image<float>, EgoMask>
min_reconstruction(const std::vector<Image<float>> &maps, const std::vector<EgoMask> &masks) {
    if (maps.empty())
        throw std::invalid_argument("min_reconstruction: no source maps");
    if (maps.size() != masks.size())
        throw std::invalid_argument("min_reconstruction: map/mask count mismatch");
    for (size_t i = 0; i < maps.size(); ++i)
        if (!maps[i].same_shape(maps[0]) || masks[i].width() != maps[0].width() ||
            masks[i].height() != maps[0].height())
            throw std::invalid_argument("min_reconstruction: size mismatch");

    Image<float> best(maps[0].width(), maps[0].height());
    EgoMask covered(maps[0].width(), maps[0].height());
    for (int y = 0; y < best.height(); ++y) {
        for (int x = 0; x < best.width(); ++x) {
            bool any = false;
            float value = 0.0f;
            for (size_t i = 0; i < maps.size(); ++i) {
                if (!masks[i](x, y))
                    continue;
                const float v = maps[i](x, y);
                value = any ? std::min(value, v) : v;
                any = true;
            }
            best(x, y) = value;
            covered(x, y) = any ? 1 : 0;
        }
    }
    return {std::move(best), std::move(covered)};
}

/// Mean of a per-pixel map over its mask. An optional binary weight (the
/// dynamic-object mask) multiplies the numerator only, so suppressed pixels
/// still count toward the denominator instead of renormalizing the loss.
inline double average_masked(const Image<float> &map, const EgoMask &mask,
                             const EgoMask *mu = nullptr) {
    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            if (!mask(x, y))
                continue;
            ++count;
            if (mu && !(*mu)(x, y))
                continue;
            sum += map(x, y);
        }
    return count > 0 ? sum / count : 0.0;
}

/// Edge-aware smoothness: mean-normalized distance gradients attenuated by
/// exponential image gradients (forward differences), averaged per axis.
inline double smoothness(const DistanceMap &dist, const ImageBuffer &image) {
    if (dist.width() != image.width() || dist.height() != image.height())
        throw std::invalid_argument("smoothness: size mismatch");
    double mean = 0.0;
    for (int y = 0; y < dist.height(); ++y)
        for (int x = 0; x < dist.width(); ++x)
            mean += dist(x, y);
    mean /= dist.plane_size();
    if (mean == 0.0)
        throw std::domain_error("smoothness: mean distance is zero");

    const auto image_grad = [&](int x, int y, int dx, int dy) {
        double g = 0.0;
        for (int c = 0; c < image.channels(); ++c)
            g += std::abs(static_cast<double>(image(x + dx, y + dy, c)) - image(x, y, c));
        return g / image.channels();
    };

    double sum_x = 0.0;
    for (int y = 0; y < dist.height(); ++y)
        for (int x = 0; x + 1 < dist.width(); ++x)
            sum_x += std::abs(dist(x + 1, y) - dist(x, y)) / mean *
                     std::exp(-image_grad(x, y, 1, 0));
    double sum_y = 0.0;
    for (int y = 0; y + 1 < dist.height(); ++y)
        for (int x = 0; x < dist.width(); ++x)
            sum_y += std::abs(dist(x, y + 1) - dist(x, y)) / mean *
                     std::exp(-image_grad(x, y, 0, 1));

    const double nx = static_cast<double>(dist.width() - 1) * dist.height();
    const double ny = static_cast<double>(dist.width()) * (dist.height() - 1);
    return (nx > 0 ? sum_x / nx : 0.0) + (ny > 0 ? sum_y / ny : 0.0);
}

/// Symmetric relative distance difference |a-b|/(a+b) averaged over the mask.
/// Pixels where both distances are zero are skipped.
inline double distance_consistency(const DistanceMap &d_t, const DistanceMap &d_warped,
                                   const EgoMask &mask) {
    if (!d_t.same_shape(d_warped))
        throw std::invalid_argument("distance_consistency: size mismatch");
    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < d_t.height(); ++y)
        for (int x = 0; x < d_t.width(); ++x) {
            if (!mask(x, y))
                continue;
            const double a = d_t(x, y);
            const double b = d_warped(x, y);
            if (a + b == 0.0)
                continue;
            sum += std::abs(a - b) / (a + b);
            ++count;
        }
    return count > 0 ? sum / count : 0.0;
}

/// Total self-supervised distance loss over spatially averaged parts.
inline double total_distance_loss(double l_r, double l_s, double l_dc,
                                  const LossWeights &w) {
    return l_r + w.beta * l_s + w.gamma * l_dc;
}

/// Pixel-averaged cross entropy of per-pixel class posteriors (one plane per
/// class) against integer labels. Posterior rows must sum to 1 within 1e-6;
/// the log argument is clamped at 1e-12.
inline double cross_entropy(const ImageBuffer &posteriors, const LabelMap &labels) {
    if (posteriors.width() != labels.width() || posteriors.height() != labels.height())
        throw std::invalid_argument("cross_entropy: size mismatch");
    const int n_classes = posteriors.channels();
    double sum = 0.0;
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            double total = 0.0;
            for (int c = 0; c < n_classes; ++c)
                total += posteriors(x, y, c);
            if (std::abs(total - 1.0) > 1e-6)
                throw std::invalid_argument("cross_entropy: posteriors do not sum to 1");
            const int label = labels(x, y);
            if (label >= n_classes)
                throw std::invalid_argument("cross_entropy: label outside class range");
            sum += -std::log(std::max(static_cast<double>(posteriors(x, y, label)), 1e-12));
        }
    return sum / labels.plane_size();
}

/// Per-pixel dynamic-object mask: 1 iff neither the target labels nor the
/// warped source labels show a dynamic class at the pixel.
inline EgoMask dynamic_mask(const LabelMap &m_t, const LabelMap &m_warped,
                            const std::set<int> &dynamic_classes) {
    if (!m_t.same_shape(m_warped))
        throw std::invalid_argument("dynamic_mask: size mismatch");
    EgoMask mu(m_t.width(), m_t.height());
    for (int y = 0; y < m_t.height(); ++y)
        for (int x = 0; x < m_t.width(); ++x)
            mu(x, y) = dynamic_classes.count(m_t(x, y)) == 0 &&
                               dynamic_classes.count(m_warped(x, y)) == 0
                           ? 1
                           : 0;
    return mu;
}

/// A frame is flagged as mostly-moving when the dynamic-class pixels of the
/// target and warped-source labels overlap poorly (IoU below the threshold).
/// Frames without any dynamic pixels are never flagged.
inline bool motion_flagged(const LabelMap &m_t, const LabelMap &m_warped,
                           const std::set<int> &dynamic_classes,
                           double iou_threshold = 0.5) {
    if (!m_t.same_shape(m_warped))
        throw std::invalid_argument("motion_flagged: size mismatch");
    long inter = 0, uni = 0;
    for (int y = 0; y < m_t.height(); ++y)
        for (int x = 0; x < m_t.width(); ++x) {
            const bool a = dynamic_classes.count(m_t(x, y)) > 0;
            const bool b = dynamic_classes.count(m_warped(x, y)) > 0;
            inter += a && b;
            uni += a || b;
        }
    if (uni == 0)
        return false;
    return static_cast<double>(inter) / uni < iou_threshold;
}

/// Select the frames whose dynamic mask actually gets applied: a budget of
/// round(epsilon_frac * n) frames is spent on motion-flagged frames in order.
inline std::vector<bool> apply_fraction(const std::vector<bool> &motion_flags,
                                        double epsilon_frac) {
    if (epsilon_frac < 0.0 || epsilon_frac > 1.0)
        throw std::invalid_argument("apply_fraction: fraction outside [0, 1]");
    long budget = std::llround(epsilon_frac * static_cast<double>(motion_flags.size()));
    std::vector<bool> apply(motion_flags.size(), false);
    for (size_t i = 0; i < motion_flags.size() && budget > 0; ++i) {
        if (motion_flags[i]) {
            apply[i] = true;
            --budget;
        }
    }
    return apply;
}

/// Homoscedastic-uncertainty multi-task total.
inline double mtl_loss(double l_tot, double l_ce, const UncertaintyParams &u) {
    if (!(u.sigma1 > 0.0) || !(u.sigma2 > 0.0))
        throw std::invalid_argument("mtl_loss: sigmas must be positive");
    return l_tot / (2.0 * u.sigma1 * u.sigma1) + l_ce / (2.0 * u.sigma2 * u.sigma2) +
           std::log1p(u.sigma1) + std::log1p(u.sigma2);
}

enum class DistanceCoding {
    direct,  // fisheye distance: D = 0.1 + (100 - 0.1) s
    inverse, // pinhole depth:    D = 1 / (0.01 + (10 - 0.01) s)
};

/// Map sigmoid activations in [0,1] to metric distances in [0.1, 100].
/// Written in interpolation form so both endpoints are attained exactly.
inline DistanceMap sigmoid_to_distance(const ImageBuffer &s, DistanceCoding mode) {
    DistanceMap out(s.width(), s.height(), s.channels());
    for (int c = 0; c < s.channels(); ++c)
        for (int y = 0; y < s.height(); ++y)
            for (int x = 0; x < s.width(); ++x) {
                const double v = s(x, y, c);
                if (!(v >= 0.0 && v <= 1.0))
                    throw std::domain_error("sigmoid_to_distance: value outside [0, 1]");
                const double d = mode == DistanceCoding::direct
                                     ? 0.1 * (1.0 - v) + 100.0 * v
                                     : 1.0 / (0.01 * (1.0 - v) + 10.0 * v);
                out(x, y, c) = static_cast<float>(d);
            }
    return out;
}

} // namespace svgeom
