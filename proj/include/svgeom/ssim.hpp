#pragma once

#include <cmath>
#include <stdexcept>

#include "image.hpp"

namespace svgeom {

/// Windowed structural similarity between two images with intensities in
/// [0,1]: 3x3 uniform window, stabilizers C1 = 0.01^2 and C2 = 0.03^2.
/// Masked-out pixels are excluded from the window statistics; pixels whose own
/// mask is 0 get value 0 (they are excluded from any later reduction anyway).
/// Channels are scored independently and averaged into a single plane.
inline Image<float> ssim(const ImageBuffer &a, const ImageBuffer &b, const EgoMask &mask) {
    if (!a.same_shape(b))
        throw std::invalid_argument("ssim: images differ in shape");
    if (mask.width() != a.width() || mask.height() != a.height())
        throw std::invalid_argument("ssim: mask size mismatch");
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;

    Image<float> out(a.width(), a.height());
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (!mask(x, y))
                continue;
            double score = 0.0;
            for (int c = 0; c < a.channels(); ++c) {
                double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int px = x + dx;
                        const int py = y + dy;
                        if (!a.in_bounds(px, py) || !mask(px, py))
                            continue;
                        const double va = a(px, py, c);
                        const double vb = b(px, py, c);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                        ++n;
                    }
                }
                const double mu_a = sa / n;
                const double mu_b = sb / n;
                const double var_a = saa / n - mu_a * mu_a;
                const double var_b = sbb / n - mu_b * mu_b;
                const double cov = sab / n - mu_a * mu_b;
                score += (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2) /
                         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
            }
            out(x, y) = static_cast<float>(score / a.channels());
        }
    }
    return out;
}

inline Image<float> ssim(const ImageBuffer &a, const ImageBuffer &b) {
    return ssim(a, b, EgoMask(a.width(), a.height(), 1, 1));
}

} // namespace svgeom
