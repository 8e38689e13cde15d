#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "ckfdist/distance.hpp"
#include "ckfdist/state.hpp"

namespace ckfdist {

/// With distance measurements available, the ankles anchor the pelvis through
/// the solved leg geometry. Baseline mode replaces them with the standing
/// assumptions (pelvis height fixed, pelvis over the midpoint of the ankles).
enum class FilterMode { Distance, Baseline };

inline const char* to_string(FilterMode m) {
    return m == FilterMode::Distance ? "distance" : "baseline";
}

struct NoiseModel {
    // White-noise acceleration density driving Q, (m/s^2)^2. Deliberately
    // larger than the simulated accelerometer noise so the corrections stay
    // authoritative over dead reckoning. Raising it strengthens the ZUPT
    // pull but also widens the velocity covariance the constraint projection
    // mixes back into positions, so the stance ankle speed is U-shaped in
    // this knob; 1.0 sits near the bottom of that U.
    double accel_variance = 1.0;

    // Noise propagation for the distance-derived position rows; see
    // ReconstructionNoise.
    ReconstructionNoise pla;

    double zupt_variance = 1e-4;   // stance ankle velocity, (m/s)^2
    double floor_variance = 1e-4;  // stance ankle height, m^2

    // Baseline-mode pelvis pseudo-measurements.
    double pelvis_z_variance = 1e-2;
    double pelvis_xy_variance = 1e-2;

    // Per-state variance ceiling applied after the measurement update.
    Vector18d covariance_cap = Vector18d::Ones();
};

struct ContactFlags {
    bool left = false;
    bool right = false;

    bool foot(Side s) const { return s == Side::Left ? left : right; }
    bool any() const { return left || right; }
};

/// Everything the filter consumes for one frame k.
struct FrameInput {
    double dt = 0.01;

    // Free accelerations in the world frame (gravity removed), from frame
    // k-1: the prediction integrates them across the step into frame k.
    Eigen::Vector3d accel_mp = Eigen::Vector3d::Zero();
    Eigen::Vector3d accel_la = Eigen::Vector3d::Zero();
    Eigen::Vector3d accel_ra = Eigen::Vector3d::Zero();

    // Orientation estimates at frame k (from the sensor fusion upstream).
    SegmentOrientation pelvis_ori;
    SegmentOrientation left_shank_ori;
    SegmentOrientation right_shank_ori;

    ContactFlags contacts;
    std::optional<DistanceMeasurement> dist_left;
    std::optional<DistanceMeasurement> dist_right;
    double floor_z = 0.0;

    const Eigen::Vector3d& accel(BodyPoint p) const {
        switch (p) {
            case BodyPoint::MidPelvis: return accel_mp;
            case BodyPoint::LeftAnkle: return accel_la;
            default: return accel_ra;
        }
    }
    const SegmentOrientation& shank_ori(Side s) const {
        return s == Side::Left ? left_shank_ori : right_shank_ori;
    }
    const std::optional<DistanceMeasurement>& dist(Side s) const {
        return s == Side::Left ? dist_left : dist_right;
    }
};

struct RomLimits {
    double min_rad = 0.0;
    double max_rad = deg_to_rad(140.0);
};

struct ConstraintSettings {
    // The tolerance exit ends the common case after two or three passes; the
    // budget exists for rare ill-conditioned frames where the backtracking
    // line search shortens steps and convergence needs several more.
    int iterations = 12;
    double tolerance = 1e-8;  // max-norm of the constraint residual
};

struct FilterParams {
    BodyDimensions dims;
    NoiseModel noise;
    RomLimits rom;
    ConstraintSettings constraint;
    InfeasiblePolicy policy = InfeasiblePolicy::Clamp;
    FilterMode mode = FilterMode::Distance;
    // Baseline pelvis height above the floor; defaults to the unbent mean
    // leg length.
    std::optional<double> baseline_pelvis_height;
};

/// Constant-velocity prediction over dt driven by the measured accelerations:
///   p <- p + v dt + a dt^2/2,  v <- v + a dt,
/// with Q from a white-noise acceleration of variance accel_variance.
inline FilterState predict(const FilterState& state, const FrameInput& input,
                           const NoiseModel& noise) {
    const double dt = input.dt;
    const double dt2 = dt * dt;

    FilterState out;
    for (const BodyPoint p :
         {BodyPoint::MidPelvis, BodyPoint::LeftAnkle, BodyPoint::RightAnkle}) {
        const Eigen::Vector3d a = input.accel(p);
        out.set_position(p, state.position(p) + dt * state.velocity(p) + 0.5 * dt2 * a);
        out.set_velocity(p, state.velocity(p) + dt * a);
    }

    Matrix18d F = Matrix18d::Identity();
    for (int i = 0; i < 9; ++i) {
        F(i, 9 + i) = dt;
    }
    out.P = F * state.P * F.transpose();

    const double q_pp = 0.25 * dt2 * dt2 * noise.accel_variance;
    const double q_pv = 0.5 * dt * dt2 * noise.accel_variance;
    const double q_vv = dt2 * noise.accel_variance;
    for (int i = 0; i < 9; ++i) {
        out.P(i, i) += q_pp;
        out.P(i, 9 + i) += q_pv;
        out.P(9 + i, i) += q_pv;
        out.P(9 + i, 9 + i) += q_vv;
    }
    return out;
}

/// Measurement rows stacked for a joint update.
struct StackedMeasurement {
    MeasurementJacobian H{0, kStateDim};
    Eigen::VectorXd y;
    Eigen::VectorXd variance;  // diagonal of R

    Eigen::Index rows() const { return H.rows(); }

    void append(const MeasurementJacobian& h, const Eigen::VectorXd& val,
                const Eigen::VectorXd& var) {
        const Eigen::Index n = rows();
        const Eigen::Index m = h.rows();
        H.conservativeResize(n + m, kStateDim);
        y.conservativeResize(n + m);
        variance.conservativeResize(n + m);
        H.bottomRows(m) = h;
        y.tail(m) = val;
        variance.tail(m) = var;
    }

    void append_row(const Eigen::Matrix<double, 1, kStateDim>& h, double val, double var) {
        append(h, Eigen::VectorXd::Constant(1, val), Eigen::VectorXd::Constant(1, var));
    }
};

/// Builds the frame's measurement stack. Distance mode: one 3-row block per
/// available distance reading. Baseline mode: pelvis height and pelvis-over-
/// ankle-midpoint rows instead. Both modes: per contacting foot, three
/// zero-velocity rows and one floor-height row on the ankle.
inline StackedMeasurement assemble_measurement(const FilterState& predicted,
                                               const FrameInput& input, const FilterParams& params) {
    StackedMeasurement m;

    if (params.mode == FilterMode::Distance) {
        for (const Side side : {Side::Left, Side::Right}) {
            const auto& dist = input.dist(side);
            if (!dist) {
                continue;
            }
            const PseudoMeasurement pm = build_pseudo_measurement(
                predicted, input.pelvis_ori, input.shank_ori(side), params.dims, *dist,
                params.noise.pla, params.policy);
            if (!pm.empty()) {
                m.append(pm.jacobian, pm.value, pm.variance);
            }
        }
    } else {
        const double height =
            params.baseline_pelvis_height.value_or(params.dims.mean_leg());
        Eigen::Matrix<double, 1, kStateDim> row;

        row.setZero();
        row(0, position_offset(BodyPoint::MidPelvis) + 2) = 1.0;
        m.append_row(row, input.floor_z + height, params.noise.pelvis_z_variance);

        for (int axis = 0; axis < 2; ++axis) {
            row.setZero();
            row(0, position_offset(BodyPoint::MidPelvis) + axis) = 1.0;
            row(0, position_offset(BodyPoint::LeftAnkle) + axis) = -0.5;
            row(0, position_offset(BodyPoint::RightAnkle) + axis) = -0.5;
            m.append_row(row, 0.0, params.noise.pelvis_xy_variance);
        }
    }

    for (const Side side : {Side::Left, Side::Right}) {
        if (!input.contacts.foot(side)) {
            continue;
        }
        const BodyPoint ankle = ankle_point(side);
        MeasurementJacobian h(3, kStateDim);
        h.setZero();
        h.block<3, 3>(0, velocity_offset(ankle)) = Eigen::Matrix3d::Identity();
        m.append(h, Eigen::Vector3d::Zero(),
                 Eigen::Vector3d::Constant(params.noise.zupt_variance));

        Eigen::Matrix<double, 1, kStateDim> row;
        row.setZero();
        row(0, position_offset(ankle) + 2) = 1.0;
        m.append_row(row, input.floor_z, params.noise.floor_variance);
    }

    return m;
}

/// Standard joint update; no-op on an empty stack. Throws SingularInnovation
/// when S = H P H^T + R is not invertible.
inline FilterState kalman_update(const FilterState& predicted, const MeasurementJacobian& H,
                                 const Eigen::VectorXd& y, const Eigen::VectorXd& r_diag) {
    if (H.rows() == 0) {
        return predicted;
    }

    Eigen::MatrixXd S = H * predicted.P * H.transpose();
    S.diagonal() += r_diag;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) {
        throw SingularInnovation("innovation covariance is singular");
    }

    // K = P H^T S^-1, via S^-1 (H P) and the symmetry of P.
    const Eigen::MatrixXd K = lu.solve(H * predicted.P).transpose();

    FilterState out;
    out.x = predicted.x + K * (y - H * predicted.x);
    out.P = (Matrix18d::Identity() - K * H) * predicted.P;
    out.P = 0.5 * (out.P + out.P.transpose()).eval();
    return out;
}

inline FilterState kalman_update(const FilterState& predicted, const StackedMeasurement& m) {
    return kalman_update(predicted, m.H, m.y, m.variance);
}

/// Rescales P so no diagonal entry exceeds its cap, preserving correlation
/// coefficients: P' = D P D with D = diag(min(1, sqrt(cap_i / P_ii))).
inline Matrix18d limit_covariance(const Matrix18d& P, const Vector18d& cap) {
    Vector18d scale;
    for (int i = 0; i < kStateDim; ++i) {
        scale(i) = P(i, i) > cap(i) ? std::sqrt(cap(i) / P(i, i)) : 1.0;
    }
    return scale.asDiagonal() * P * scale.asDiagonal();
}

namespace detail {

/// Active biomechanical constraints linearized at x: per leg, the thigh
/// length equality, the knee hinge equality, and (when violated) the knee
/// range-of-motion bound. residual = g(x) - g_target.
struct ConstraintLinearization {
    Eigen::MatrixXd jacobian{0, kStateDim};
    Eigen::VectorXd residual;

    Eigen::Index rows() const { return jacobian.rows(); }
};

inline ConstraintLinearization linearize_constraints(const Vector18d& x, const FrameInput& input,
                                                     const BodyDimensions& dims,
                                                     const RomLimits& rom) {
    std::vector<Eigen::Matrix<double, 1, kStateDim>> rows;
    std::vector<double> residuals;
    rows.reserve(6);
    residuals.reserve(6);

    for (const Side side : {Side::Left, Side::Right}) {
        const SegmentOrientation& shank = input.shank_ori(side);
        const int mp = position_offset(BodyPoint::MidPelvis);
        const int ank = position_offset(ankle_point(side));

        // u = hip - knee as a function of the state: the orientation terms
        // are external inputs, so du/dp_mp = I and du/dp_ankle = -I.
        const Eigen::Vector3d psi = compute_psi(input.pelvis_ori, shank, dims, side);
        const Eigen::Vector3d u =
            x.segment<3>(mp) - x.segment<3>(ank) + psi;
        const double len = u.norm();
        if (len <= kSegmentLengthEps) {
            throw DegenerateSegment("constraint linearization: hip and knee coincide");
        }
        const Eigen::Vector3d u_hat = u / len;

        Eigen::Matrix<double, 1, kStateDim> row;

        // Thigh length: ||u|| = d_thigh.
        row.setZero();
        row.segment<3>(mp) = u_hat.transpose();
        row.segment<3>(ank) = -u_hat.transpose();
        rows.push_back(row);
        residuals.push_back(len - dims.thigh(side));

        // Hinge: u has no component along the knee axis.
        const Eigen::Vector3d r_y = shank.y_axis();
        row.setZero();
        row.segment<3>(mp) = r_y.transpose();
        row.segment<3>(ank) = -r_y.transpose();
        rows.push_back(row);
        residuals.push_back(u.dot(r_y));

        // Knee angle bound, active-set style.
        const double a = -u.dot(shank.x_axis());
        const double b = u.dot(shank.z_axis());
        const double theta = std::atan2(a, b);
        double bound = 0.0;
        bool active = false;
        if (theta < rom.min_rad) {
            bound = rom.min_rad;
            active = true;
        } else if (theta > rom.max_rad) {
            bound = rom.max_rad;
            active = true;
        }
        if (active) {
            const double denom = a * a + b * b;
            if (denom > kSegmentLengthEps * kSegmentLengthEps) {
                // d theta / d u, from theta = atan2(-u . r_x, u . r_z).
                const Eigen::Vector3d grad =
                    (b * (-shank.x_axis()) - a * shank.z_axis()) / denom;
                row.setZero();
                row.segment<3>(mp) = grad.transpose();
                row.segment<3>(ank) = -grad.transpose();
                rows.push_back(row);
                residuals.push_back(theta - bound);
            }
        }
    }

    ConstraintLinearization out;
    out.jacobian.resize(static_cast<Eigen::Index>(rows.size()), kStateDim);
    out.residual.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        out.jacobian.row(static_cast<Eigen::Index>(i)) = rows[i];
        out.residual(static_cast<Eigen::Index>(i)) = residuals[i];
    }
    return out;
}

}  // namespace detail

/// Projects the state onto the constraint manifold, minimum-variance style:
///   x <- x - P D^T (D P D^T)^-1 r,
/// re-linearizing each iteration, then projects P once at the final
/// linearization. The constraint surfaces are curved, so a full weighted
/// step can overshoot badly when P is ill-conditioned; each step is
/// backtracked (halved) until the residual max-norm decreases, which also
/// keeps the iterates away from degenerate geometry. Falls back to the
/// unweighted projection (P = I) when the weighted normal matrix is
/// singular; throws ConstraintSingular if even D D^T cannot be inverted.
inline FilterState constraint_update(const FilterState& state, const FrameInput& input,
                                     const BodyDimensions& dims, const RomLimits& rom,
                                     const ConstraintSettings& settings) {
    FilterState out = state;
    detail::ConstraintLinearization lin =
        detail::linearize_constraints(out.x, input, dims, rom);

    for (int it = 0; it < settings.iterations; ++it) {
        const double res =
            lin.rows() == 0 ? 0.0 : lin.residual.cwiseAbs().maxCoeff();
        if (lin.rows() == 0 || res < settings.tolerance) {
            break;
        }
        const Eigen::MatrixXd DP = lin.jacobian * state.P;
        const Eigen::MatrixXd DPD = DP * lin.jacobian.transpose();
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(DPD);
        Eigen::VectorXd dx;
        if (lu.isInvertible()) {
            dx = DP.transpose() * lu.solve(lin.residual);
        } else {
            const Eigen::FullPivLU<Eigen::MatrixXd> lu_plain(lin.jacobian *
                                                             lin.jacobian.transpose());
            if (!lu_plain.isInvertible()) {
                throw ConstraintSingular("constraint normal system is singular");
            }
            dx = lin.jacobian.transpose() * lu_plain.solve(lin.residual);
        }

        double scale = 1.0;
        detail::ConstraintLinearization next =
            detail::linearize_constraints(out.x - dx, input, dims, rom);
        for (int half = 0; half < 6; ++half) {
            const double res_next =
                next.rows() == 0 ? 0.0 : next.residual.cwiseAbs().maxCoeff();
            if (res_next < res) {
                break;
            }
            scale *= 0.5;
            next = detail::linearize_constraints(out.x - scale * dx, input, dims, rom);
        }
        out.x -= scale * dx;
        lin = std::move(next);
    }

    // Covariance projection onto the tangent space of the final active set.
    if (lin.rows() > 0) {
        const Eigen::MatrixXd DP = lin.jacobian * state.P;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(DP * lin.jacobian.transpose());
        if (lu.isInvertible()) {
            out.P = state.P - DP.transpose() * lu.solve(DP);
            out.P = 0.5 * (out.P + out.P.transpose()).eval();
        }
    }
    return out;
}

/// One full filter cycle: predict, measurement update, covariance limiter,
/// constraint projection.
inline FilterState step(const FilterState& state, const FrameInput& input,
                        const FilterParams& params) {
    FilterState s = predict(state, input, params.noise);
    s = kalman_update(s, assemble_measurement(s, input, params));
    s.P = limit_covariance(s.P, params.noise.covariance_cap);
    return constraint_update(s, input, params.dims, params.rom, params.constraint);
}

}  // namespace ckfdist
