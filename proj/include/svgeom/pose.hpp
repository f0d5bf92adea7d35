#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

namespace svgeom {

/// Rigid transform as unit quaternion + translation, mapping points from the
/// target frame into the source frame.
class Pose {
  public:
    Pose() : q_(1.0, 0.0, 0.0, 0.0), t_(0.0, 0.0, 0.0) {}

    Pose(const Eigen::Quaterniond &q, const Eigen::Vector3d &t) : q_(q), t_(t) {
        if (std::abs(q_.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("pose: quaternion is not unit length");
        q_.normalize();
    }

    static Pose identity() { return {}; }

    const Eigen::Quaterniond &rotation() const { return q_; }
    const Eigen::Vector3d &translation() const { return t_; }

    Eigen::Vector3d apply(const Eigen::Vector3d &p) const { return q_ * p + t_; }

    Pose inverse() const {
        const Eigen::Quaterniond qi = q_.conjugate();
        return {qi, qi * -t_};
    }

    /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
    friend Pose operator*(const Pose &a, const Pose &b) {
        return {(a.q_ * b.q_).normalized(), a.q_ * b.t_ + a.t_};
    }

  private:
    Eigen::Quaterniond q_;
    Eigen::Vector3d t_;
};

} // namespace svgeom
