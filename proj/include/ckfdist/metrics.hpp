#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ckfdist/body_model.hpp"
#include "ckfdist/errors.hpp"

namespace ckfdist {

/// Root-mean-square error after removing the mean error (constant offsets
/// between estimate and reference do not count).
inline double rmse_bias_removed(std::span<const double> est, std::span<const double> truth) {
    if (est.size() != truth.size()) {
        throw LengthMismatch("rmse: series lengths differ");
    }
    if (est.size() < 2) {
        throw LengthMismatch("rmse: need at least two samples");
    }
    const double n = static_cast<double>(est.size());
    double bias = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        bias += est[i] - truth[i];
    }
    bias /= n;
    double sq = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double r = est[i] - truth[i] - bias;
        sq += r * r;
    }
    return std::sqrt(sq / n);
}

inline double pearson_cc(std::span<const double> est, std::span<const double> truth) {
    if (est.size() != truth.size()) {
        throw LengthMismatch("pearson: series lengths differ");
    }
    if (est.size() < 2) {
        throw LengthMismatch("pearson: need at least two samples");
    }
    const double n = static_cast<double>(est.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        mx += est[i];
        my += truth[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double dx = est[i] - mx;
        const double dy = truth[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw DegenerateSeries("pearson: a series has zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double path_length(std::span<const Eigen::Vector3d> path) {
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        total += (path[i] - path[i - 1]).norm();
    }
    return total;
}

/// Total-travelled-distance deviation: percent error of the estimated path
/// length relative to the true path length.
inline double ttd_deviation(std::span<const Eigen::Vector3d> est,
                            std::span<const Eigen::Vector3d> truth) {
    if (est.size() != truth.size()) {
        throw LengthMismatch("ttd: series lengths differ");
    }
    if (est.size() < 2) {
        throw LengthMismatch("ttd: need at least two samples");
    }
    const double ttd_truth = path_length(truth);
    if (ttd_truth <= 0.0) {
        throw ZeroTruthPath("ttd: reference path has zero length");
    }
    return std::abs(path_length(est) - ttd_truth) / ttd_truth * 100.0;
}

/// The eight angle series evaluated throughout: hip sagittal/frontal/
/// transverse per side plus knee sagittal per side. Radians.
struct JointAngleTable {
    static constexpr int kSeriesCount = 8;

    std::vector<double> hip_left_y, hip_left_x, hip_left_z;
    std::vector<double> hip_right_y, hip_right_x, hip_right_z;
    std::vector<double> knee_left, knee_right;

    std::span<const double> series(int i) const {
        switch (i) {
            case 0: return hip_left_y;
            case 1: return hip_left_x;
            case 2: return hip_left_z;
            case 3: return hip_right_y;
            case 4: return hip_right_x;
            case 5: return hip_right_z;
            case 6: return knee_left;
            default: return knee_right;
        }
    }

    static const char* series_name(int i) {
        switch (i) {
            case 0: return "hip_l_y";
            case 1: return "hip_l_x";
            case 2: return "hip_l_z";
            case 3: return "hip_r_y";
            case 4: return "hip_r_x";
            case 5: return "hip_r_z";
            case 6: return "knee_l";
            default: return "knee_r";
        }
    }

    void reserve(std::size_t n) {
        hip_left_y.reserve(n);
        hip_left_x.reserve(n);
        hip_left_z.reserve(n);
        hip_right_y.reserve(n);
        hip_right_x.reserve(n);
        hip_right_z.reserve(n);
        knee_left.reserve(n);
        knee_right.reserve(n);
    }

    void push(const JointAngleFrame& f) {
        hip_left_y.push_back(f.hip_left.x());
        hip_left_x.push_back(f.hip_left.y());
        hip_left_z.push_back(f.hip_left.z());
        hip_right_y.push_back(f.hip_right.x());
        hip_right_x.push_back(f.hip_right.y());
        hip_right_z.push_back(f.hip_right.z());
        knee_left.push_back(f.knee_left);
        knee_right.push_back(f.knee_right);
    }
};

/// Joint angles of one pose via the body model: thigh frames reconstructed
/// from the point estimates, hip angles from the pelvis-to-thigh rotation.
inline JointAngleFrame joint_angles_of_pose(const PoseSnapshot& pose, const BodyDimensions& dims) {
    JointAngleFrame out;
    for (const Side side : {Side::Left, Side::Right}) {
        const Eigen::Vector3d hip = hip_position(pose, dims, side);
        const Eigen::Vector3d knee = knee_position(pose, dims, side);
        const SegmentOrientation thigh = thigh_orientation(hip, knee, pose.shank_ori(side));
        const Eigen::Vector3d hip_angles =
            euler_yxz(pose.pelvis_ori.matrix().transpose() * thigh.matrix());
        const double knee_angle = knee_angle_from_positions(hip, knee, pose.shank_ori(side));
        if (side == Side::Left) {
            out.hip_left = hip_angles;
            out.knee_left = knee_angle;
        } else {
            out.hip_right = hip_angles;
            out.knee_right = knee_angle;
        }
    }
    return out;
}

inline JointAngleTable joint_angles_from_poses(std::span<const PoseSnapshot> poses,
                                               const BodyDimensions& dims) {
    JointAngleTable table;
    table.reserve(poses.size());
    for (const PoseSnapshot& pose : poses) {
        table.push(joint_angles_of_pose(pose, dims));
    }
    return table;
}

inline JointAngleTable joint_angle_table(std::span<const JointAngleFrame> frames) {
    JointAngleTable table;
    table.reserve(frames.size());
    for (const JointAngleFrame& f : frames) {
        table.push(f);
    }
    return table;
}

}  // namespace ckfdist
