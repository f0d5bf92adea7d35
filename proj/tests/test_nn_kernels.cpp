#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <svgeom/nn/attention.hpp>
#include <svgeom/nn/pac.hpp>
#include <svgeom/nn/reference.hpp>

#include "testutil.hpp"

using namespace svgeom;

namespace {

// ---- oracles ---------------------------------------------------------------

// Ordinary zero-padded convolution, the degenerate case of the pixel-adaptive
// op when the guidance kernel is identically one.
FeatureMap plain_convolution(const FeatureMap &x, const PacFilter &f) {
    const int r = f.k / 2;
    const int c_out = static_cast<int>(f.bias.size());
    FeatureMap out(x.width(), x.height(), c_out);
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i)
            for (int o = 0; o < c_out; ++o) {
                double acc = f.bias(o);
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int a = i + dx, b = j + dy;
                        if (!x.in_bounds(a, b))
                            continue;
                        for (int c = 0; c < x.channels(); ++c)
                            acc += f.weights[(dy + r) * f.k + (dx + r)](o, c) * x(a, b, c);
                    }
                out(i, j, o) = acc;
            }
    return out;
}

// Plain sum of the clipped footprint, the degenerate case of pairwise
// attention with unit weights and an identity value transform.
FeatureMap footprint_sum(const FeatureMap &x, int r) {
    FeatureMap out(x.width(), x.height(), x.channels());
    for (int j = 0; j < x.height(); ++j)
        for (int i = 0; i < x.width(); ++i)
            for (int c = 0; c < x.channels(); ++c) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        if (x.in_bounds(i + dx, j + dy))
                            acc += x(i + dx, j + dy, c);
                out(i, j, c) = acc;
            }
    return out;
}

// ---- fixtures --------------------------------------------------------------

Eigen::MatrixXd random_matrix(int rows, int cols, double lo = -0.8, double hi = 0.8) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = testutil::uniform(lo, hi);
    return m;
}

Eigen::VectorXd random_vector(int n, double lo = -0.5, double hi = 0.5) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v(i) = testutil::uniform(lo, hi);
    return v;
}

FeatureMap random_features(int w, int h, int channels, double lo = -1.0, double hi = 1.0) {
    FeatureMap f(w, h, channels);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                f(x, y, c) = testutil::uniform(lo, hi);
    return f;
}

PacFilter random_pac(int k, int c_in, int c_out, double sigma) {
    PacFilter f;
    f.k = k;
    f.sigma = sigma;
    for (int i = 0; i < k * k; ++i)
        f.weights.push_back(random_matrix(c_out, c_in));
    f.bias = random_vector(c_out);
    return f;
}

AttentionParams random_pairwise(int d_in, int d_mid, int d_out, int radius) {
    AttentionParams p;
    p.radius = radius;
    p.phi = random_matrix(d_mid, d_in);
    p.psi = random_matrix(d_mid, d_in);
    p.chi = random_matrix(d_out, d_in);
    p.zeta_w = random_matrix(d_out, d_mid, -0.3, 0.3);
    p.zeta_b = random_vector(d_out);
    return p;
}

AttentionParams random_patchwise(int d_in, int d_mid, int d_out, int radius) {
    const int n = (2 * radius + 1) * (2 * radius + 1);
    AttentionParams p;
    p.radius = radius;
    p.phi = random_matrix(d_mid, d_in);
    p.psi = random_matrix(d_mid, d_in);
    p.chi = random_matrix(d_out, d_in);
    p.zeta_w = random_matrix(d_out * n, d_mid * (1 + n), -0.1, 0.1);
    p.zeta_b = random_vector(d_out * n);
    return p;
}

double max_abs_diff(const FeatureMap &a, const FeatureMap &b) {
    REQUIRE(a.same_shape(b));
    double worst = 0.0;
    for (int c = 0; c < a.channels(); ++c)
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x)
                worst = std::max(worst, std::abs(a(x, y, c) - b(x, y, c)));
    return worst;
}

void require_finite(const FeatureMap &a) {
    for (int c = 0; c < a.channels(); ++c)
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x)
                REQUIRE(std::isfinite(a(x, y, c)));
}

} // namespace

TEST_CASE("pixel-adaptive convolution") {
    SECTION("constant guidance degenerates to plain convolution") {
        const FeatureMap x = random_features(7, 6, 2);
        const FeatureMap guide(7, 6, 3, 0.37);
        const PacFilter f = random_pac(3, 2, 2, 0.5);
        const FeatureMap got = pixel_adaptive_conv(x, guide, f);
        CHECK(max_abs_diff(got, plain_convolution(x, f)) < 1e-10);
    }
    SECTION("huge bandwidth approaches plain convolution") {
        const FeatureMap x = random_features(6, 6, 2);
        const FeatureMap guide = random_features(6, 6, 2);
        PacFilter f = random_pac(3, 2, 1, 1.0);
        f.sigma = 1e6;
        const FeatureMap got = pixel_adaptive_conv(x, guide, f);
        CHECK(max_abs_diff(got, plain_convolution(x, f)) < 1e-6);
    }
    SECTION("distinct guidance features attenuate the window terms") {
        // one centre pixel whose guidance disagrees with its surroundings
        FeatureMap x(3, 3, 1, 1.0);
        FeatureMap guide(3, 3, 1, 0.0);
        guide(1, 1) = 4.0;
        PacFilter f;
        f.k = 3;
        f.weights.assign(9, Eigen::MatrixXd::Ones(1, 1));
        f.bias = Eigen::VectorXd::Zero(1);
        f.sigma = 1.0;
        const FeatureMap got = pixel_adaptive_conv(x, guide, f);
        // at the centre only the centre contributes appreciably
        const double kern = std::exp(-0.5 * 16.0);
        CHECK(got(1, 1) == Catch::Approx(1.0 + 8.0 * kern).margin(1e-12));
        // a corner sees 3 agreeing neighbours plus the attenuated centre
        CHECK(got(0, 0) == Catch::Approx(3.0 + kern).margin(1e-12));
    }
    SECTION("matches the brute-force reference on a random instance") {
        const FeatureMap x = random_features(5, 5, 2);
        const FeatureMap guide = random_features(5, 5, 2);
        const PacFilter f = random_pac(3, 2, 2, 0.8);
        CHECK(max_abs_diff(pixel_adaptive_conv(x, guide, f),
                           pixel_adaptive_conv_reference(x, guide, f)) < 1e-12);
    }
    SECTION("shape and parameter validation") {
        const FeatureMap x = random_features(4, 4, 2);
        const FeatureMap guide = random_features(4, 4, 1);
        CHECK_THROWS_AS(pixel_adaptive_conv(x, random_features(5, 4, 1), random_pac(3, 2, 1, 1.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(pixel_adaptive_conv(x, guide, random_pac(4, 2, 1, 1.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(pixel_adaptive_conv(x, guide, random_pac(3, 2, 1, 0.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(pixel_adaptive_conv(x, guide, random_pac(3, 3, 1, 1.0)),
                        std::invalid_argument);
        PacFilter bad_bias = random_pac(3, 2, 2, 1.0);
        bad_bias.bias = Eigen::VectorXd::Zero(3);
        CHECK_THROWS_AS(pixel_adaptive_conv(x, guide, bad_bias), std::invalid_argument);
    }
}

TEST_CASE("pairwise attention") {
    SECTION("unit weights and identity values reduce to a footprint sum") {
        const FeatureMap x = random_features(6, 5, 3);
        AttentionParams p = random_pairwise(3, 2, 3, 1);
        p.zeta_w.setZero();
        p.zeta_b.setZero();
        p.chi = Eigen::MatrixXd::Identity(3, 3);
        p.normalize = false;
        CHECK(pairwise_attention(x, p) == footprint_sum(x, 1));
    }
    SECTION("normalised weights sum to one over each footprint") {
        // probe: one input channel is constant 1 and chi selects exactly it,
        // so the output is the plain sum of the aggregation weights
        FeatureMap x = random_features(7, 5, 3);
        for (int y = 0; y < 5; ++y)
            for (int i = 0; i < 7; ++i)
                x(i, y, 2) = 1.0;
        AttentionParams p = random_pairwise(3, 2, 1, 2);
        p.chi = Eigen::MatrixXd::Zero(1, 3);
        p.chi(0, 2) = 1.0;
        const FeatureMap z = pairwise_attention(x, p);
        for (int y = 0; y < 5; ++y)
            for (int i = 0; i < 7; ++i)
                CHECK(z(i, y) == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("matches the brute-force reference on a random instance") {
        const FeatureMap x = random_features(4, 4, 3);
        const AttentionParams p = random_pairwise(3, 2, 2, 1);
        CHECK(pairwise_attention(x, p) == pairwise_attention_reference(x, p));
    }
    SECTION("equivariant under translating the input") {
        const int w = 7, h = 6, r = 1;
        const FeatureMap x = random_features(w, h, 2);
        FeatureMap shifted(w, h, 2);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < h; ++y)
                for (int i = 1; i < w; ++i)
                    shifted(i, y, c) = x(i - 1, y, c);
        const AttentionParams p = random_pairwise(2, 2, 2, r);
        const FeatureMap z = pairwise_attention(x, p);
        const FeatureMap zs = pairwise_attention(shifted, p);
        // compare where the footprint stays inside the image on both sides
        for (int c = 0; c < 2; ++c)
            for (int y = r; y < h - r; ++y)
                for (int i = r; i + 1 < w - r; ++i)
                    CHECK(zs(i + 1, y, c) == z(i, y, c));
    }
    SECTION("invariant to permuting footprint members") {
        FeatureMap x = random_features(5, 5, 2);
        FeatureMap swapped = x;
        for (int c = 0; c < 2; ++c) {
            swapped(1, 2, c) = x(2, 1, c);
            swapped(2, 1, c) = x(1, 2, c);
        }
        const AttentionParams p = random_pairwise(2, 3, 2, 1);
        const FeatureMap z = pairwise_attention(x, p);
        const FeatureMap zs = pairwise_attention(swapped, p);
        for (int c = 0; c < 2; ++c)
            CHECK(zs(2, 2, c) == Catch::Approx(z(2, 2, c)).margin(1e-12));
    }
    SECTION("parameter validation") {
        const FeatureMap x = random_features(4, 4, 3);
        AttentionParams p = random_pairwise(3, 2, 2, 1);
        p.radius = -1;
        CHECK_THROWS_AS(pairwise_attention(x, p), std::invalid_argument);
        p = random_pairwise(2, 2, 2, 1); // transforms built for 2 channels
        CHECK_THROWS_AS(pairwise_attention(x, p), std::invalid_argument);
        p = random_pairwise(3, 2, 2, 1);
        p.zeta_w = random_matrix(2, 3); // embedding is 2 wide, not 3
        CHECK_THROWS_AS(pairwise_attention(x, p), std::invalid_argument);
        p = random_pairwise(3, 2, 2, 1);
        p.zeta_b = random_vector(5);
        CHECK_THROWS_AS(pairwise_attention(x, p), std::invalid_argument);
        p = random_pairwise(3, 2, 2, 1);
        p.chi = random_matrix(4, 3); // zeta emits 2 channels, chi 4
        CHECK_THROWS_AS(pairwise_attention(x, p), std::invalid_argument);
    }
}

TEST_CASE("patchwise attention") {
    SECTION("radius zero depends only on the centre feature") {
        FeatureMap x = random_features(4, 4, 2);
        FeatureMap y = random_features(4, 4, 2);
        for (int c = 0; c < 2; ++c)
            y(2, 1, c) = x(2, 1, c);
        const AttentionParams p = random_patchwise(2, 2, 3, 0);
        const FeatureMap zx = patchwise_attention(x, p);
        const FeatureMap zy = patchwise_attention(y, p);
        for (int o = 0; o < 3; ++o) {
            CHECK(zx(2, 1, o) == zy(2, 1, o));
            // with one member the normalised weight is exactly one
            double chi_x = 0.0;
            for (int c = 0; c < 2; ++c)
                chi_x += p.chi(o, c) * x(2, 1, c);
            CHECK(zx(2, 1, o) == Catch::Approx(chi_x).margin(1e-15));
        }
    }
    SECTION("sensitive to the position of footprint members") {
        FeatureMap x = random_features(5, 5, 2);
        FeatureMap swapped = x;
        for (int c = 0; c < 2; ++c) {
            swapped(1, 2, c) = x(2, 1, c);
            swapped(2, 1, c) = x(1, 2, c);
        }
        const AttentionParams p = random_patchwise(2, 2, 2, 1);
        const FeatureMap z = patchwise_attention(x, p);
        const FeatureMap zs = patchwise_attention(swapped, p);
        double diff = 0.0;
        for (int c = 0; c < 2; ++c)
            diff = std::max(diff, std::abs(zs(2, 2, c) - z(2, 2, c)));
        CHECK(diff > 1e-6);
    }
    SECTION("normalised weights sum to one over each footprint") {
        FeatureMap x = random_features(6, 6, 3);
        for (int y = 0; y < 6; ++y)
            for (int i = 0; i < 6; ++i)
                x(i, y, 2) = 1.0;
        AttentionParams p = random_patchwise(3, 2, 1, 1);
        p.chi = Eigen::MatrixXd::Zero(1, 3);
        p.chi(0, 2) = 1.0;
        const FeatureMap z = patchwise_attention(x, p);
        for (int y = 0; y < 6; ++y)
            for (int i = 0; i < 6; ++i)
                CHECK(z(i, y) == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("matches the brute-force reference on a random instance") {
        const FeatureMap x = random_features(4, 4, 3);
        const AttentionParams p = random_patchwise(3, 2, 2, 1);
        CHECK(patchwise_attention(x, p) == patchwise_attention_reference(x, p));
    }
    SECTION("parameter validation") {
        const FeatureMap x = random_features(4, 4, 3);
        AttentionParams p = random_patchwise(3, 2, 2, 1);
        p.zeta_w = random_matrix(2 * 9, 2 * 9); // patch descriptor is 2*10 wide
        CHECK_THROWS_AS(patchwise_attention(x, p), std::invalid_argument);
        p = random_patchwise(3, 2, 2, 1);
        p.zeta_w = random_matrix(2 * 8, 2 * 10); // weights for 8 of 9 positions
        p.zeta_b = random_vector(2 * 8);
        CHECK_THROWS_AS(patchwise_attention(x, p), std::invalid_argument);
    }
}

TEST_CASE("brute-force references agree with the kernels across random instances") {
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 3 + trial % 4;
        const int h = 3 + (trial / 2) % 4;
        const int d_in = 1 + trial % 3;
        const int radius = trial % 3;
        const int k = 1 + 2 * (trial % 3);

        const FeatureMap x = random_features(w, h, d_in);
        const FeatureMap guide = random_features(w, h, 1 + trial % 2);
        const PacFilter f = random_pac(k, d_in, 1 + trial % 2, 0.5 + 0.2 * trial);
        const FeatureMap conv = pixel_adaptive_conv(x, guide, f);
        CHECK(max_abs_diff(conv, pixel_adaptive_conv_reference(x, guide, f)) < 1e-12);
        require_finite(conv);
        // deterministic: a second evaluation reproduces the first bit for bit
        CHECK(conv == pixel_adaptive_conv(x, guide, f));

        const AttentionParams pw = random_pairwise(d_in, 2, 2, radius);
        const FeatureMap zp = pairwise_attention(x, pw);
        CHECK(zp == pairwise_attention_reference(x, pw));
        require_finite(zp);
        CHECK(zp == pairwise_attention(x, pw));

        const AttentionParams pt = random_patchwise(d_in, 2, 2, radius);
        const FeatureMap zt = patchwise_attention(x, pt);
        CHECK(zt == patchwise_attention_reference(x, pt));
        require_finite(zt);
        CHECK(zt == patchwise_attention(x, pt));
    }
}
