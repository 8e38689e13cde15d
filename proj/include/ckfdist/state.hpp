#pragma once

#include <Eigen/Dense>

#include "ckfdist/body_model.hpp"

namespace ckfdist {

inline constexpr int kStateDim = 18;

using Vector18d = Eigen::Matrix<double, kStateDim, 1>;
using Matrix18d = Eigen::Matrix<double, kStateDim, kStateDim>;

// Rows of a stacked measurement against the 18-dim state.
using MeasurementJacobian = Eigen::Matrix<double, Eigen::Dynamic, kStateDim>;

/// The three tracked points, in state order.
enum class BodyPoint { MidPelvis = 0, LeftAnkle = 1, RightAnkle = 2 };

inline constexpr int position_offset(BodyPoint p) { return 3 * static_cast<int>(p); }
inline constexpr int velocity_offset(BodyPoint p) { return 9 + 3 * static_cast<int>(p); }

inline BodyPoint ankle_point(Side s) {
    return s == Side::Left ? BodyPoint::LeftAnkle : BodyPoint::RightAnkle;
}

/// x = [p_mp, p_la, p_ra, v_mp, v_la, v_ra] with covariance P.
struct FilterState {
    Vector18d x = Vector18d::Zero();
    Matrix18d P = Matrix18d::Zero();

    Eigen::Vector3d position(BodyPoint p) const { return x.segment<3>(position_offset(p)); }
    Eigen::Vector3d velocity(BodyPoint p) const { return x.segment<3>(velocity_offset(p)); }

    void set_position(BodyPoint p, const Eigen::Vector3d& v) {
        x.segment<3>(position_offset(p)) = v;
    }
    void set_velocity(BodyPoint p, const Eigen::Vector3d& v) {
        x.segment<3>(velocity_offset(p)) = v;
    }
};

}  // namespace ckfdist
