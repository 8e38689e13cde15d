#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace ckfdist {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) {
        a += 2.0 * kPi;
    } else if (a > kPi) {
        a -= 2.0 * kPi;
    }
    return a;
}

// Shortest distance between two angles on the circle, in [0, pi].
inline double angular_distance(double a, double b) { return std::abs(wrap_angle(a - b)); }

inline Eigen::Matrix3d rot_x(double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix();
}
inline Eigen::Matrix3d rot_y(double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix();
}
inline Eigen::Matrix3d rot_z(double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

inline bool is_orthonormal(const Eigen::Matrix3d& m, double tol = 1e-9) {
    return (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(m.determinant() - 1.0) <= tol;
}

/// Orientation of a segment frame in the world frame. Matrix columns are the
/// segment axes expressed in world coordinates: r_x anterior, r_y the knee
/// hinge axis (subject's left), r_z proximal along the segment.
///
/// The unit quaternion is the source of truth and the matrix is derived from
/// it, so serializing the quaternion and reloading restores the matrix bit
/// for bit.
class SegmentOrientation {
public:
    SegmentOrientation() : q_(Eigen::Quaterniond::Identity()) { rot_ = q_.toRotationMatrix(); }

    explicit SegmentOrientation(const Eigen::Quaterniond& q) : q_(q.normalized()) {
        rot_ = q_.toRotationMatrix();
    }

    // Accepts matrices that are only approximately orthonormal; the detour
    // through the quaternion re-orthonormalizes.
    explicit SegmentOrientation(const Eigen::Matrix3d& rot)
        : SegmentOrientation(Eigen::Quaterniond(rot)) {}

    /// `q` must already be unit norm; it is stored without renormalization.
    /// Deserialization uses this so stored coefficients survive untouched.
    static SegmentOrientation from_unit_quaternion(const Eigen::Quaterniond& q) {
        SegmentOrientation o;
        o.q_ = q;
        o.rot_ = q.toRotationMatrix();
        return o;
    }

    const Eigen::Matrix3d& matrix() const { return rot_; }
    const Eigen::Quaterniond& quaternion() const { return q_; }

    Eigen::Vector3d x_axis() const { return rot_.col(0); }
    Eigen::Vector3d y_axis() const { return rot_.col(1); }
    Eigen::Vector3d z_axis() const { return rot_.col(2); }

private:
    Eigen::Quaterniond q_;
    Eigen::Matrix3d rot_;
};

/// Intrinsic Y-X-Z factorization R = R_y(y) * R_x(x) * R_z(z), returned as
/// (y, x, z). For hip joint rotations this is (sagittal, frontal, transverse).
inline Eigen::Vector3d euler_yxz(const Eigen::Matrix3d& R) {
    const double x = std::asin(std::clamp(-R(1, 2), -1.0, 1.0));
    const double y = std::atan2(R(0, 2), R(2, 2));
    const double z = std::atan2(R(1, 0), R(1, 1));
    return {y, x, z};
}

}  // namespace ckfdist
