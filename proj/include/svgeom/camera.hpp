#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace svgeom {

enum class CameraModel {
    polynomial,
    ucm,
    eucm,
    rectilinear,
    stereographic,
    double_sphere,
};

inline const char *to_string(CameraModel m) {
    switch (m) {
    case CameraModel::polynomial: return "polynomial";
    case CameraModel::ucm: return "ucm";
    case CameraModel::eucm: return "eucm";
    case CameraModel::rectilinear: return "rectilinear";
    case CameraModel::stereographic: return "stereographic";
    case CameraModel::double_sphere: return "double_sphere";
    }
    return "?";
}

inline std::optional<CameraModel> camera_model_from_string(const std::string &s) {
    if (s == "polynomial") return CameraModel::polynomial;
    if (s == "ucm") return CameraModel::ucm;
    if (s == "eucm") return CameraModel::eucm;
    if (s == "rectilinear") return CameraModel::rectilinear;
    if (s == "stereographic") return CameraModel::stereographic;
    if (s == "double_sphere") return CameraModel::double_sphere;
    return std::nullopt;
}

struct Intrinsics {
    CameraModel model = CameraModel::rectilinear;
    int width = 0;
    int height = 0;
    double cx = 0.0;
    double cy = 0.0;
    double f = 0.0;               // focal length in pixels (all models but polynomial)
    std::array<double, 4> a{};    // polynomial coefficients, pixels per rad^k
    double xi = 0.0;              // ucm / double_sphere offset
    double alpha = 0.0;           // eucm / double_sphere mixing
    double beta = 1.0;            // eucm shape
    std::optional<double> fov_deg; // full horizontal field of view, when declared
};

struct ProjectedPixel {
    double u = std::numeric_limits<double>::quiet_NaN();
    double v = std::numeric_limits<double>::quiet_NaN();
    bool valid = false;
};

/// A calibrated camera: one of six radial distortion models plus the derived
/// domain bound theta_max and the matching image-plane radius rho_max.
class Camera {
  public:
    explicit Camera(Intrinsics k) : k_(std::move(k)) {
        if (k_.width < 1 || k_.height < 1)
            throw std::invalid_argument("camera: sensor size must be at least 1x1");
        if (k_.cx < 0.0 || k_.cx > k_.width || k_.cy < 0.0 || k_.cy > k_.height)
            throw std::invalid_argument("camera: principal point outside the sensor");
        if (k_.model != CameraModel::polynomial && !(k_.f > 0.0))
            throw std::invalid_argument("camera: focal length must be positive");

        if (k_.model == CameraModel::polynomial) {
            // The polynomial has no intrinsic domain bound; it comes from the
            // declared field of view (automotive fisheye half-angle by default).
            theta_max_ = k_.fov_deg ? *k_.fov_deg * kDegToRad / 2.0
                                    : kDefaultHalfFovDeg * kDegToRad;
            check_poly_monotone();
        } else {
            theta_max_ = scan_theta_max();
            if (k_.fov_deg)
                theta_max_ = std::min(theta_max_, *k_.fov_deg * kDegToRad / 2.0);
            if (!(theta_max_ > 0.0))
                throw std::domain_error("camera: model has an empty angular domain");
        }
        rho_max_ = radial_eval(theta_max_);
    }

    const Intrinsics &intrinsics() const { return k_; }
    double theta_max() const { return theta_max_; }
    double rho_max() const { return rho_max_; }

    /// Image-plane radius (pixels) for incidence angle theta (radians).
    double radial_forward(double theta) const {
        if (theta < 0.0 || theta > theta_max_)
            throw std::domain_error("radial_forward: angle outside [0, theta_max]");
        return radial_eval(theta);
    }

    /// Incidence angle for image-plane radius rho. Closed form for all models
    /// except the polynomial, which is inverted numerically.
    double radial_inverse(double rho) const {
        if (rho < 0.0)
            throw std::domain_error("radial_inverse: radius must be nonnegative");
        if (rho > rho_max_)
            throw std::domain_error("radial_inverse: no root, radius exceeds rho_max");
        switch (k_.model) {
        case CameraModel::polynomial:
            return invert_poly(rho);
        case CameraModel::rectilinear:
            return std::atan(rho / k_.f);
        case CameraModel::stereographic:
            return 2.0 * std::atan(rho / (2.0 * k_.f));
        case CameraModel::ucm: {
            const double arg = rho * k_.xi / std::sqrt(k_.f * k_.f + rho * rho);
            return std::atan2(rho, k_.f) + std::asin(std::clamp(arg, -1.0, 1.0));
        }
        case CameraModel::eucm: {
            const double rm = rho / k_.f;
            const double r2 = rm * rm;
            const double inner =
                std::max(0.0, 1.0 - (2.0 * k_.alpha - 1.0) * k_.beta * r2);
            const double mz = (1.0 - k_.beta * k_.alpha * k_.alpha * r2) /
                              (k_.alpha * std::sqrt(inner) + 1.0 - k_.alpha);
            return std::atan2(rm, mz);
        }
        case CameraModel::double_sphere: {
            const double rm = rho / k_.f;
            const double r2 = rm * rm;
            const double inner = std::max(0.0, 1.0 - (2.0 * k_.alpha - 1.0) * r2);
            const double mz = (1.0 - k_.alpha * k_.alpha * r2) /
                              (k_.alpha * std::sqrt(inner) + 1.0 - k_.alpha);
            const double scale =
                (mz * k_.xi + std::sqrt(mz * mz + (1.0 - k_.xi * k_.xi) * r2)) /
                (mz * mz + r2);
            return std::atan2(scale * rm, scale * mz - k_.xi);
        }
        }
        throw std::logic_error("radial_inverse: unknown model");
    }

    /// Project a 3D point in the camera frame to pixel coordinates. The flag is
    /// false when the incidence angle is outside the lens domain or the pixel
    /// lands outside [0,w]x[0,h]; azimuth is preserved.
    ProjectedPixel project(const Eigen::Vector3d &point) const {
        const double rxy = std::hypot(point.x(), point.y());
        if (rxy == 0.0 && point.z() == 0.0)
            throw std::invalid_argument("project: zero vector has no direction");
        const double theta = std::atan2(rxy, point.z());
        if (theta > theta_max_)
            return {};
        const double rho = radial_eval(theta);
        ProjectedPixel out;
        out.u = rxy > 0.0 ? k_.cx + rho * point.x() / rxy : k_.cx;
        out.v = rxy > 0.0 ? k_.cy + rho * point.y() / rxy : k_.cy;
        out.valid = out.u >= 0.0 && out.u <= k_.width && out.v >= 0.0 && out.v <= k_.height;
        return out;
    }

    /// Unit ray through pixel (u, v); inverse of project up to scale.
    Eigen::Vector3d unproject(double u, double v) const {
        const double dx = u - k_.cx;
        const double dy = v - k_.cy;
        const double rho = std::hypot(dx, dy);
        if (rho == 0.0)
            return {0.0, 0.0, 1.0};
        const double theta = radial_inverse(rho);
        const double s = std::sin(theta);
        return {s * dx / rho, s * dy / rho, std::cos(theta)};
    }

  private:
    static constexpr double kDegToRad = std::numbers::pi / 180.0;
    static constexpr double kDefaultHalfFovDeg = 97.5;
    static constexpr double kScanStep = 1e-3;  // radians, theta_max search
    static constexpr double kRhoCap = 1e6;     // pixels, treat beyond as diverged

    double poly_eval(double t) const {
        return t * (k_.a[0] + t * (k_.a[1] + t * (k_.a[2] + t * k_.a[3])));
    }

    double poly_deriv(double t) const {
        return k_.a[0] + t * (2.0 * k_.a[1] + t * (3.0 * k_.a[2] + t * 4.0 * k_.a[3]));
    }

    // Model formula without the domain check; callers guarantee theta is sane.
    double radial_eval(double theta) const {
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        switch (k_.model) {
        case CameraModel::polynomial:
            return poly_eval(theta);
        case CameraModel::ucm:
            return k_.f * s / (c + k_.xi);
        case CameraModel::eucm: {
            const double d = std::sqrt(k_.beta * s * s + c * c);
            return k_.f * s / (c + k_.alpha * (d - c));
        }
        case CameraModel::rectilinear:
            return k_.f * std::tan(theta);
        case CameraModel::stereographic:
            return 2.0 * k_.f * std::tan(0.5 * theta);
        case CameraModel::double_sphere: {
            const double zs = k_.xi + c;
            const double d = std::sqrt(s * s + zs * zs);
            return k_.f * s / (k_.alpha * d + (1.0 - k_.alpha) * zs);
        }
        }
        throw std::logic_error("radial_eval: unknown model");
    }

    // Largest angle, scanned in kScanStep increments over (0, pi), up to which
    // the radial profile stays finite, bounded and strictly increasing. The
    // result backs off one step: the last increasing sample may already sit
    // past the true peak of a wrap-around profile (e.g. double sphere with
    // alpha > 1/2), and the domain must stay strictly below it.
    double scan_theta_max() const {
        double best = 0.0;
        double prev = 0.0;
        for (int i = 1; i * kScanStep < std::numbers::pi; ++i) {
            const double t = i * kScanStep;
            const double r = radial_eval(t);
            if (!std::isfinite(r) || r <= prev || r > kRhoCap)
                break;
            best = t;
            prev = r;
        }
        return std::max(0.0, best - kScanStep);
    }

    void check_poly_monotone() const {
        double prev = 0.0;
        const int n = static_cast<int>(std::ceil(theta_max_ / kScanStep));
        for (int i = 1; i <= n; ++i) {
            const double t = std::min(i * kScanStep, theta_max_);
            const double r = poly_eval(t);
            if (!(r > prev))
                throw std::domain_error(
                    "camera: polynomial radius is not strictly increasing on [0, theta_max]");
            prev = r;
        }
    }

    // Newton from the linear-term guess with a bisection fallback whenever the
    // iterate leaves the bracket [0, theta_max]. Monotonicity was checked at
    // construction, so the bracket always contains exactly one root.
    double invert_poly(double rho) const {
        if (rho == 0.0)
            return 0.0;
        double lo = 0.0;
        double hi = theta_max_;
        double t = k_.a[0] > 0.0 ? std::clamp(rho / k_.a[0], lo, hi) : 0.5 * hi;
        for (int it = 0; it < 30; ++it) {
            const double err = poly_eval(t) - rho;
            (err > 0.0 ? hi : lo) = t;
            const double d = poly_deriv(t);
            double next = t - err / d;
            if (!(d > 0.0) || next <= lo || next >= hi)
                next = 0.5 * (lo + hi);
            if (std::abs(next - t) < 1e-10)
                return next;
            t = next;
        }
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            (poly_eval(mid) > rho ? hi : lo) = mid;
        }
        return 0.5 * (lo + hi);
    }

    Intrinsics k_;
    double theta_max_ = 0.0;
    double rho_max_ = 0.0;
};

/// Radius-to-angle lookup table for the polynomial model: precomputed inverse
/// samples every `step` pixels (final entry exactly at rho_max), queried with
/// linear interpolation.
class RootLut {
  public:
    RootLut(const Camera &camera, double step = 0.25) : step_(step) {
        if (camera.intrinsics().model != CameraModel::polynomial)
            throw std::invalid_argument("root lut: only the polynomial model needs one");
        if (!(step > 0.0))
            throw std::invalid_argument("root lut: step must be positive");
        rho_max_ = camera.rho_max();
        for (int i = 0; i * step < rho_max_; ++i) {
            rho_.push_back(i * step);
            theta_.push_back(camera.radial_inverse(i * step));
        }
        rho_.push_back(rho_max_);
        theta_.push_back(camera.radial_inverse(rho_max_));
    }

    double step() const { return step_; }
    double rho_max() const { return rho_max_; }
    const std::vector<double> &radii() const { return rho_; }
    const std::vector<double> &thetas() const { return theta_; }

    double operator()(double rho) const {
        if (rho < 0.0)
            throw std::domain_error("root lut: radius must be nonnegative");
        if (rho > rho_max_)
            throw std::domain_error("root lut: no root, radius exceeds rho_max");
        // The last interval may be shorter than `step`; the clamp routes any
        // radius beyond the regular grid into it.
        const size_t i =
            std::min(static_cast<size_t>(rho / step_), rho_.size() - 2);
        const double w = (rho - rho_[i]) / (rho_[i + 1] - rho_[i]);
        return theta_[i] + w * (theta_[i + 1] - theta_[i]);
    }

  private:
    double step_ = 0.0;
    double rho_max_ = 0.0;
    std::vector<double> rho_;
    std::vector<double> theta_;
};

} // namespace svgeom
