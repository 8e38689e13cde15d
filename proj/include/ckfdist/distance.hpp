#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ckfdist/body_model.hpp"
#include "ckfdist/state.hpp"

namespace ckfdist {

// Residual below which a candidate root is accepted as exact.
inline constexpr double kSolveResidualTol = 1e-9;

// alpha^2 + beta^2 at or below this is treated as a degenerate geometry where
// the knee angle has no effect on the measured distance.
inline constexpr double kSolveConditionEps = 1e-12;

/// What to do when the measured distance is outside the reachable range.
enum class InfeasiblePolicy { Clamp, Reject };

enum class SolveStatus {
    Ok,              // exact root found
    Clamped,         // distance clamped to the nearest reachable value
    Infeasible,      // unreachable and policy == Reject
    IllConditioned,  // knee angle does not affect the distance
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Ok: return "ok";
        case SolveStatus::Clamped: return "clamped";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::IllConditioned: return "ill-conditioned";
    }
    return "?";
}

/// One pelvis-to-ankle distance reading.
struct DistanceMeasurement {
    Side side = Side::Left;
    double value = 0.0;  // meters
    double sigma = 0.0;  // standard deviation of the reading
};

/// Knee-independent part of the pelvis-to-ankle vector: hip offset within the
/// pelvis minus the full shank segment,
///   psi = +/- (w_p / 2) r_y_pelvis - d_shank r_z_shank
/// (+ for the left side, - for the right).
inline Eigen::Vector3d compute_psi(const SegmentOrientation& pelvis_ori,
                                   const SegmentOrientation& shank_ori,
                                   const BodyDimensions& dims, Side side) {
    return hip_offset(pelvis_ori, dims.pelvis_width, side) -
           dims.shank(side) * shank_ori.z_axis();
}

/// Mid-pelvis-to-ankle vector as a function of the knee angle:
///   tau(theta) = psi + d_thigh (sin(theta) r_x_shank - cos(theta) r_z_shank).
/// Note the sign: the ankle sits *below* the pelvis, so tau = p_ankle - p_mp.
inline Eigen::Vector3d pelvis_ankle_vector(const Eigen::Vector3d& psi, double theta,
                                           double thigh_length,
                                           const SegmentOrientation& shank_ori) {
    return psi + thigh_length * (std::sin(theta) * shank_ori.x_axis() -
                                 std::cos(theta) * shank_ori.z_axis());
}

struct KneeAngleSolution {
    double angle = 0.0;  // radians, in [-pi, pi]
    SolveStatus status = SolveStatus::Ok;

    bool usable() const { return status == SolveStatus::Ok || status == SolveStatus::Clamped; }
};

/// Solves ||tau(theta)|| = measured_dist for the knee angle.
///
/// Expanding the norm gives alpha cos(theta) + beta sin(theta) = gamma with
///   alpha = -2 d_thigh (psi . r_z),  beta = 2 d_thigh (psi . r_x),
///   gamma = d^2 - psi . psi - d_thigh^2.
/// The equation has two roots per period; the one angularly closest to
/// theta_ref (the angle implied by the current state estimate) is returned.
/// When gamma^2 > alpha^2 + beta^2 no exact root exists: Clamp projects gamma
/// to the nearest reachable extreme (the root is then unique), Reject gives
/// up on the measurement.
inline KneeAngleSolution solve_knee_angle(double measured_dist, const Eigen::Vector3d& psi,
                                          double thigh_length,
                                          const SegmentOrientation& shank_ori, double theta_ref,
                                          InfeasiblePolicy policy = InfeasiblePolicy::Clamp,
                                          double eps_cond = kSolveConditionEps) {
    const double alpha = -2.0 * thigh_length * psi.dot(shank_ori.z_axis());
    const double beta = 2.0 * thigh_length * psi.dot(shank_ori.x_axis());
    double gamma = measured_dist * measured_dist - psi.squaredNorm() - thigh_length * thigh_length;

    const double r2 = alpha * alpha + beta * beta;
    if (r2 <= eps_cond) {
        return {0.0, SolveStatus::IllConditioned};
    }

    SolveStatus status = SolveStatus::Ok;
    if (gamma * gamma > r2) {
        if (policy == InfeasiblePolicy::Reject) {
            return {0.0, SolveStatus::Infeasible};
        }
        gamma = std::copysign(std::sqrt(r2), gamma);
        status = SolveStatus::Clamped;
    }

    // Roots of the squared equation in cos(theta); the sine sign must be
    // checked against the original equation since arccos alone is ambiguous.
    const double disc = std::sqrt(std::max(0.0, r2 - gamma * gamma));
    const double cos_roots[2] = {(alpha * gamma + beta * disc) / r2,
                                 (alpha * gamma - beta * disc) / r2};

    double best_angle = 0.0;
    double best_ref_dist = 0.0;
    bool found = false;
    double fallback_angle = 0.0;
    double fallback_residual = std::numeric_limits<double>::infinity();
    for (double c : cos_roots) {
        const double base = std::acos(std::clamp(c, -1.0, 1.0));
        for (const double theta : {base, -base}) {
            const double residual =
                std::abs(alpha * std::cos(theta) + beta * std::sin(theta) - gamma);
            if (residual < fallback_residual) {
                fallback_residual = residual;
                fallback_angle = theta;
            }
            if (residual > kSolveResidualTol) {
                continue;
            }
            const double ref_dist = angular_distance(theta, theta_ref);
            if (!found || ref_dist < best_ref_dist) {
                best_angle = theta;
                best_ref_dist = ref_dist;
                found = true;
            }
        }
    }
    if (!found) {
        // Rounding can push every candidate's residual past the acceptance
        // tolerance right at the feasibility boundary; take the best one.
        best_angle = fallback_angle;
    }
    return {best_angle, status};
}

/// A linear(ized) measurement block against the 18-dim state.
struct PseudoMeasurement {
    MeasurementJacobian jacobian{0, kStateDim};
    Eigen::VectorXd value;     // measurement vector y
    Eigen::VectorXd variance;  // diagonal of R

    Eigen::Index rows() const { return jacobian.rows(); }
    bool empty() const { return jacobian.rows() == 0; }
};

/// How a distance reading's noise maps onto the reconstructed position rows.
/// The reconstruction amplifies distance noise by the local geometry: with
/// f(theta) = alpha cos(theta) + beta sin(theta) and f' its derivative,
///   var(theta) = (2 d sigma / f')^2
/// away from the reach extremes, saturating at the second-order value
///   var(theta) = 4 d sigma / r,   r = sqrt(alpha^2 + beta^2),
/// which governs where f' vanishes (straight leg, clamped readings). Each
/// axis then carries the angle spread through tau to second order,
///   scale^2 (J_i^2 s^2 + H_i^2 s^4 / 2) + variance_floor,
/// with J = d tau/d theta, H = d^2 tau/d theta^2 = psi - tau, s^2 the angle
/// variance. The curvature term matters exactly where J_i vanishes: near a
/// reach extreme the leg line barely moves to first order, yet over the
/// admitted angle range tau still shifts by O(s^2) along the leg, and
/// claiming centimeter confidence there lets one clamped reading yank the
/// state. The floor absorbs what the propagation cannot see (a wrong branch
/// pick when the reference angle is off, prediction-model mismatch). The
/// override bypasses the propagation wholesale.
struct ReconstructionNoise {
    double scale = 1.0;
    double variance_floor = 1e-4;  // (1 cm)^2 per axis
    std::optional<Eigen::Vector3d> variance_override;
};

/// Per-axis variance of tau(theta(d)) under distance noise sigma, via the
/// propagation described on ReconstructionNoise.
inline Eigen::Vector3d propagate_distance_variance(double measured_dist, double sigma,
                                                   const Eigen::Vector3d& psi, double theta,
                                                   double thigh_length,
                                                   const SegmentOrientation& shank_ori,
                                                   const ReconstructionNoise& noise) {
    if (noise.variance_override) {
        return *noise.variance_override;
    }
    const double alpha = -2.0 * thigh_length * psi.dot(shank_ori.z_axis());
    const double beta = 2.0 * thigh_length * psi.dot(shank_ori.x_axis());
    const double r = std::sqrt(alpha * alpha + beta * beta);
    const double slope = -alpha * std::sin(theta) + beta * std::cos(theta);
    const double curv = -alpha * std::cos(theta) - beta * std::sin(theta);
    const double ds = measured_dist * sigma;

    double var_theta = r > 0.0 ? 4.0 * ds / r : 0.0;
    if (slope != 0.0) {
        // Mean-square spread of the inverse map theta(d^2) to second order:
        // the curvature term carries both the extra variance and the
        // linearization bias, which the Kalman R must absorb as error power.
        const double vm = (2.0 * ds) * (2.0 * ds);
        const double lin = vm / (slope * slope);
        const double quad = curv * vm / (slope * slope * slope);
        var_theta = std::min(var_theta, lin + 0.75 * quad * quad);
    }

    const Eigen::Vector3d dtau_dtheta =
        thigh_length * (std::cos(theta) * shank_ori.x_axis() +
                        std::sin(theta) * shank_ori.z_axis());
    const Eigen::Vector3d d2tau_dtheta2 =
        thigh_length * (std::cos(theta) * shank_ori.z_axis() -
                        std::sin(theta) * shank_ori.x_axis());
    return (noise.scale * noise.scale) *
               (var_theta * dtau_dtheta.cwiseAbs2() +
                (0.5 * var_theta * var_theta) * d2tau_dtheta2.cwiseAbs2()) +
           Eigen::Vector3d::Constant(noise.variance_floor);
}

/// Converts one distance reading into a 3D relative-position measurement:
/// solve for the knee angle that matches the distance, reconstruct the
/// pelvis-to-ankle vector tau(theta), and measure p_ankle - p_mp against it.
/// The row block is [-I at p_mp | +I at p_ankle | 0 elsewhere]; the row
/// variances come from propagating the reading's sigma through the solve.
///
/// theta_ref comes from the predicted state (falls back to 0 when the
/// predicted leg geometry is degenerate). Returns an empty block when the
/// solver rejects the measurement or the geometry is ill-conditioned.
inline PseudoMeasurement build_pseudo_measurement(const FilterState& predicted,
                                                  const SegmentOrientation& pelvis_ori,
                                                  const SegmentOrientation& shank_ori,
                                                  const BodyDimensions& dims,
                                                  const DistanceMeasurement& meas,
                                                  const ReconstructionNoise& noise,
                                                  InfeasiblePolicy policy = InfeasiblePolicy::Clamp) {
    const Side side = meas.side;
    const Eigen::Vector3d p_mp = predicted.position(BodyPoint::MidPelvis);
    const Eigen::Vector3d p_ankle = predicted.position(ankle_point(side));
    const Eigen::Vector3d psi = compute_psi(pelvis_ori, shank_ori, dims, side);

    double theta_ref = 0.0;
    const Eigen::Vector3d hip = p_mp + hip_offset(pelvis_ori, dims.pelvis_width, side);
    const Eigen::Vector3d knee = knee_position(p_ankle, shank_ori, dims.shank(side));
    if ((hip - knee).norm() > kSegmentLengthEps) {
        theta_ref = knee_angle_from_positions(hip, knee, shank_ori);
    }

    const KneeAngleSolution sol =
        solve_knee_angle(meas.value, psi, dims.thigh(side), shank_ori, theta_ref, policy);
    if (!sol.usable()) {
        return {};
    }

    PseudoMeasurement out;
    out.jacobian.setZero(3, kStateDim);
    out.jacobian.block<3, 3>(0, position_offset(BodyPoint::MidPelvis)) =
        -Eigen::Matrix3d::Identity();
    out.jacobian.block<3, 3>(0, position_offset(ankle_point(side))) = Eigen::Matrix3d::Identity();
    out.value = pelvis_ankle_vector(psi, sol.angle, dims.thigh(side), shank_ori);
    out.variance = propagate_distance_variance(meas.value, meas.sigma, psi, sol.angle,
                                               dims.thigh(side), shank_ori, noise);
    return out;
}

}  // namespace ckfdist
