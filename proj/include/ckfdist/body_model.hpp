#pragma once

#include "ckfdist/errors.hpp"
#include "ckfdist/geometry.hpp"

namespace ckfdist {

// Below this separation (meters) two points cannot define a direction.
inline constexpr double kSegmentLengthEps = 1e-6;

enum class Side { Left, Right };

inline Side other_side(Side s) { return s == Side::Left ? Side::Right : Side::Left; }
inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

/// Segment lengths in meters, constant over a trial.
struct BodyDimensions {
    // Defaults are the standard anthropometric ratios for a 1.70 m subject.
    double pelvis_width = 0.2295;       // hip center to hip center
    double thigh_length_left = 0.4165;  // hip center to knee center
    double thigh_length_right = 0.4165;
    double shank_length_left = 0.4182;  // knee center to ankle center
    double shank_length_right = 0.4182;

    double thigh(Side s) const { return s == Side::Left ? thigh_length_left : thigh_length_right; }
    double shank(Side s) const { return s == Side::Left ? shank_length_left : shank_length_right; }
    double leg(Side s) const { return thigh(s) + shank(s); }
    double mean_leg() const { return 0.5 * (leg(Side::Left) + leg(Side::Right)); }

    bool valid() const {
        return pelvis_width > 0.0 && thigh_length_left > 0.0 && thigh_length_right > 0.0 &&
               shank_length_left > 0.0 && shank_length_right > 0.0;
    }

    /// Scaled from subject height: thigh 0.245 H, shank 0.246 H, hip-to-hip
    /// 0.135 H.
    static BodyDimensions from_height(double height_m) {
        BodyDimensions d;
        d.pelvis_width = 0.135 * height_m;
        d.thigh_length_left = d.thigh_length_right = 0.245 * height_m;
        d.shank_length_left = d.shank_length_right = 0.246 * height_m;
        return d;
    }
};

/// One frame of lower-body pose: the three tracked points plus the three
/// instrumented segment orientations.
struct PoseSnapshot {
    Eigen::Vector3d mid_pelvis_pos = Eigen::Vector3d::Zero();
    Eigen::Vector3d left_ankle_pos = Eigen::Vector3d::Zero();
    Eigen::Vector3d right_ankle_pos = Eigen::Vector3d::Zero();
    SegmentOrientation pelvis_ori;
    SegmentOrientation left_shank_ori;
    SegmentOrientation right_shank_ori;

    const Eigen::Vector3d& ankle_pos(Side s) const {
        return s == Side::Left ? left_ankle_pos : right_ankle_pos;
    }
    Eigen::Vector3d& ankle_pos(Side s) {
        return s == Side::Left ? left_ankle_pos : right_ankle_pos;
    }
    const SegmentOrientation& shank_ori(Side s) const {
        return s == Side::Left ? left_shank_ori : right_shank_ori;
    }
    SegmentOrientation& shank_ori(Side s) {
        return s == Side::Left ? left_shank_ori : right_shank_ori;
    }
};

/// Joint angles of one pose. Hip angles are the intrinsic Y-X-Z (sagittal,
/// frontal, transverse) factorization of the pelvis-to-thigh rotation; knee
/// angles are hinge flexion.
struct JointAngleFrame {
    Eigen::Vector3d hip_left = Eigen::Vector3d::Zero();
    Eigen::Vector3d hip_right = Eigen::Vector3d::Zero();
    double knee_left = 0.0;
    double knee_right = 0.0;
};

/// Offset from the mid-pelvis point to a hip center: +/- half the pelvis
/// width along the pelvis lateral axis r_y (positive toward the left hip).
inline Eigen::Vector3d hip_offset(const SegmentOrientation& pelvis_ori, double pelvis_width,
                                  Side side) {
    const double half = 0.5 * pelvis_width;
    return (side == Side::Left ? half : -half) * pelvis_ori.y_axis();
}

inline Eigen::Vector3d hip_position(const PoseSnapshot& pose, const BodyDimensions& dims,
                                    Side side) {
    return pose.mid_pelvis_pos + hip_offset(pose.pelvis_ori, dims.pelvis_width, side);
}

/// Knee center from the ankle: the shank z axis points proximally, so the
/// knee sits one shank length along it.
inline Eigen::Vector3d knee_position(const Eigen::Vector3d& ankle_pos,
                                     const SegmentOrientation& shank_ori, double shank_length) {
    return ankle_pos + shank_length * shank_ori.z_axis();
}

inline Eigen::Vector3d knee_position(const PoseSnapshot& pose, const BodyDimensions& dims,
                                     Side side) {
    return knee_position(pose.ankle_pos(side), pose.shank_ori(side), dims.shank(side));
}

/// Knee flexion angle from the knee-to-hip vector expressed in the shank
/// frame: theta = atan2(-u . r_x, u . r_z). Zero for a straight leg, positive
/// flexion bends the heel backward; range (-pi, pi].
inline double knee_angle_from_positions(const Eigen::Vector3d& hip_pos,
                                        const Eigen::Vector3d& knee_pos,
                                        const SegmentOrientation& shank_ori,
                                        double eps_len = kSegmentLengthEps) {
    const Eigen::Vector3d u = hip_pos - knee_pos;
    if (u.norm() <= eps_len) {
        throw DegenerateSegment("knee angle undefined: hip and knee coincide");
    }
    const double theta = std::atan2(-u.dot(shank_ori.x_axis()), u.dot(shank_ori.z_axis()));
    return theta <= -kPi ? kPi : theta;
}

/// Thigh frame reconstructed from point estimates: r_z along knee->hip, r_y
/// the shank hinge axis (re-orthogonalized, since point estimates need not
/// satisfy the hinge constraint exactly), r_x their right-handed completion.
inline SegmentOrientation thigh_orientation(const Eigen::Vector3d& hip_pos,
                                            const Eigen::Vector3d& knee_pos,
                                            const SegmentOrientation& shank_ori,
                                            double eps_len = kSegmentLengthEps) {
    const Eigen::Vector3d u = hip_pos - knee_pos;
    const double len = u.norm();
    if (len <= eps_len) {
        throw DegenerateSegment("thigh frame undefined: hip and knee coincide");
    }
    const Eigen::Vector3d r_z = u / len;
    Eigen::Vector3d r_y = shank_ori.y_axis();
    r_y -= r_y.dot(r_z) * r_z;
    const double ny = r_y.norm();
    if (ny <= eps_len) {
        throw DegenerateSegment("thigh frame undefined: hinge axis parallel to thigh");
    }
    r_y /= ny;
    Eigen::Matrix3d m;
    m.col(0) = r_y.cross(r_z);
    m.col(1) = r_y;
    m.col(2) = r_z;
    return SegmentOrientation(m);
}

}  // namespace ckfdist
