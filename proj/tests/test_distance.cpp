#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ckfdist/distance.hpp"

using namespace ckfdist;

namespace {

BodyDimensions paper_dims() {
    BodyDimensions d;
    d.pelvis_width = 0.23;
    d.thigh_length_left = 0.45;
    d.thigh_length_right = 0.45;
    d.shank_length_left = 0.45;
    d.shank_length_right = 0.45;
    return d;
}

SegmentOrientation random_orientation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    while (q.norm() < 1e-6) {
        q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
    }
    return SegmentOrientation(q);
}

struct Quadratic {
    double alpha, beta, gamma, r;
};

Quadratic quadratic_terms(double dist, const Eigen::Vector3d& psi, double thigh,
                          const SegmentOrientation& shank) {
    Quadratic q;
    q.alpha = -2.0 * thigh * psi.dot(shank.z_axis());
    q.beta = 2.0 * thigh * psi.dot(shank.x_axis());
    q.gamma = dist * dist - psi.squaredNorm() - thigh * thigh;
    q.r = std::hypot(q.alpha, q.beta);
    return q;
}

}  // namespace

TEST_CASE("psi for identity orientations", "[distance]") {
    const SegmentOrientation ident;
    const BodyDimensions dims = paper_dims();
    const Eigen::Vector3d left = compute_psi(ident, ident, dims, Side::Left);
    CHECK((left - Eigen::Vector3d(0.0, 0.115, -0.45)).norm() < 1e-12);
    const Eigen::Vector3d right = compute_psi(ident, ident, dims, Side::Right);
    CHECK((right - Eigen::Vector3d(0.0, -0.115, -0.45)).norm() < 1e-12);

    BodyDimensions zero = dims;
    zero.pelvis_width = 0.0;
    zero.shank_length_left = 0.0;
    CHECK(compute_psi(ident, ident, zero, Side::Left).norm() < 1e-15);
}

TEST_CASE("pelvis_ankle_vector at the bent and straight poses", "[distance]") {
    const SegmentOrientation ident;
    const Eigen::Vector3d psi(0.0, 0.115, -0.45);

    const Eigen::Vector3d straight = pelvis_ankle_vector(psi, 0.0, 0.45, ident);
    CHECK((straight - Eigen::Vector3d(0.0, 0.115, -0.90)).norm() < 1e-12);
    CHECK(straight.norm() == Catch::Approx(0.90732).margin(5e-6));

    const Eigen::Vector3d bent = pelvis_ankle_vector(psi, 0.5 * kPi, 0.45, ident);
    CHECK((bent - Eigen::Vector3d(0.45, 0.115, -0.45)).norm() < 1e-12);
    CHECK(bent.norm() == Catch::Approx(0.64671).margin(5e-6));

    // Vanishing thigh: tau collapses to psi for every angle.
    for (double theta : {-2.0, 0.0, 1.3}) {
        CHECK((pelvis_ankle_vector(psi, theta, 0.0, ident) - psi).norm() < 1e-15);
    }
}

TEST_CASE("solve_knee_angle recovers the generating angles", "[distance]") {
    const SegmentOrientation ident;
    const BodyDimensions dims = paper_dims();
    const Eigen::Vector3d psi = compute_psi(ident, ident, dims, Side::Left);

    // The straight leg sits exactly on the max-reach boundary, so rounding in
    // d^2 decides between an exact root and a clamp; either way the angle is
    // recovered.
    const double d_straight = pelvis_ankle_vector(psi, 0.0, 0.45, ident).norm();
    const KneeAngleSolution s0 = solve_knee_angle(d_straight, psi, 0.45, ident, 0.1);
    CHECK(s0.usable());
    CHECK(std::abs(s0.angle) < 1e-7);

    const double d_bent = pelvis_ankle_vector(psi, 0.5 * kPi, 0.45, ident).norm();
    const KneeAngleSolution s1 = solve_knee_angle(d_bent, psi, 0.45, ident, 1.4);
    CHECK(s1.status == SolveStatus::Ok);
    CHECK(s1.angle == Catch::Approx(0.5 * kPi).margin(1e-7));

    // Rounded five-digit distances land within ~1e-4 of the generating angle.
    CHECK(std::abs(solve_knee_angle(0.90732, psi, 0.45, ident, 0.1).angle) < 1e-3);
    CHECK(solve_knee_angle(0.64671, psi, 0.45, ident, 1.4).angle ==
          Catch::Approx(0.5 * kPi).margin(1e-4));
}

TEST_CASE("unreachable distance clamps to the straight-leg pose", "[distance]") {
    const SegmentOrientation ident;
    const Eigen::Vector3d psi(0.0, 0.115, -0.45);

    // d = 2.0 with this geometry: alpha = 0.405, beta = 0, and
    // gamma = 4 - 0.215725 - 0.2025 = 3.581775 > sqrt(alpha^2 + beta^2),
    // so no knee angle reaches the distance. Clamping gamma to +0.405 gives
    // cos(theta) = 1: theta = 0, the maximum-reach (straight leg) pose, which
    // is the closest reachable configuration to an overlong measurement.
    const Quadratic q = quadratic_terms(2.0, psi, 0.45, ident);
    CHECK(q.alpha == Catch::Approx(0.405));
    CHECK(q.beta == Catch::Approx(0.0).margin(1e-15));
    CHECK(q.gamma == Catch::Approx(3.581775));

    const KneeAngleSolution clamped = solve_knee_angle(2.0, psi, 0.45, ident, 1.0);
    CHECK(clamped.status == SolveStatus::Clamped);
    CHECK(clamped.angle == Catch::Approx(0.0).margin(1e-12));
    CHECK(clamped.usable());

    // Unreachably short: gamma < -r clamps to the fully folded pose.
    const KneeAngleSolution folded = solve_knee_angle(0.0, psi, 0.45, ident, 1.0);
    CHECK(folded.status == SolveStatus::Clamped);
    CHECK(std::abs(folded.angle) == Catch::Approx(kPi).margin(1e-9));

    const KneeAngleSolution rejected =
        solve_knee_angle(2.0, psi, 0.45, ident, 1.0, InfeasiblePolicy::Reject);
    CHECK(rejected.status == SolveStatus::Infeasible);
    CHECK_FALSE(rejected.usable());
}

TEST_CASE("zero thigh length is ill-conditioned", "[distance]") {
    const SegmentOrientation ident;
    const Eigen::Vector3d psi(0.0, 0.115, -0.45);
    const KneeAngleSolution s = solve_knee_angle(psi.norm(), psi, 0.0, ident, 0.3);
    CHECK(s.status == SolveStatus::IllConditioned);
    CHECK_FALSE(s.usable());
}

TEST_CASE("solver round-trips random feasible configurations", "[distance]") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> utheta(-kPi, kPi);
    std::uniform_real_distribution<double> udelta(-0.3, 0.3);
    const BodyDimensions dims = paper_dims();

    int accepted = 0;
    int attempts = 0;
    while (accepted < 2000 && attempts < 100000) {
        ++attempts;
        const SegmentOrientation pelvis = random_orientation(rng);
        const SegmentOrientation shank = random_orientation(rng);
        const double theta_true = utheta(rng);
        const Eigen::Vector3d psi = compute_psi(pelvis, shank, dims, Side::Left);
        const double dist = pelvis_ankle_vector(psi, theta_true, 0.45, shank).norm();

        // The two roots of the cosine equation sit symmetrically about
        // delta = atan2(beta, alpha). Keep configurations where the partner
        // root is at least 0.7 rad away, so a 0.3 rad reference perturbation
        // cannot flip the branch; this rejects ~22% of draws.
        const Quadratic q = quadratic_terms(dist, psi, 0.45, shank);
        const double offset = std::abs(wrap_angle(theta_true - std::atan2(q.beta, q.alpha)));
        if (offset < 0.35 || offset > kPi - 0.35) {
            continue;
        }

        const double theta_ref = theta_true + udelta(rng);
        const KneeAngleSolution sol = solve_knee_angle(dist, psi, 0.45, shank, theta_ref);
        REQUIRE(sol.status == SolveStatus::Ok);
        CHECK(angular_distance(sol.angle, theta_true) < 1e-7);

        // Solution validity: the returned angle satisfies the original
        // equation, and the reconstructed distance matches the input.
        CHECK(std::abs(q.alpha * std::cos(sol.angle) + q.beta * std::sin(sol.angle) - q.gamma) <
              1e-7);
        CHECK(pelvis_ankle_vector(psi, sol.angle, 0.45, shank).norm() ==
              Catch::Approx(dist).margin(1e-9));
        ++accepted;
    }
    REQUIRE(accepted == 2000);
}

TEST_CASE("no valid candidate is closer to the reference", "[distance]") {
    std::mt19937_64 rng(211);
    std::uniform_real_distribution<double> utheta(-kPi, kPi);
    const BodyDimensions dims = paper_dims();
    for (int i = 0; i < 500; ++i) {
        const SegmentOrientation pelvis = random_orientation(rng);
        const SegmentOrientation shank = random_orientation(rng);
        const Eigen::Vector3d psi = compute_psi(pelvis, shank, dims, Side::Left);
        const double dist = pelvis_ankle_vector(psi, utheta(rng), 0.45, shank).norm();
        const double theta_ref = utheta(rng);
        const KneeAngleSolution sol = solve_knee_angle(dist, psi, 0.45, shank, theta_ref);
        if (sol.status != SolveStatus::Ok) {
            continue;
        }
        // The equation r cos(theta - delta) = gamma has exactly the two roots
        // delta +/- acos(gamma / r); the returned angle must be the closer one.
        const Quadratic q = quadratic_terms(dist, psi, 0.45, shank);
        const double delta = std::atan2(q.beta, q.alpha);
        const double half = std::acos(std::clamp(q.gamma / q.r, -1.0, 1.0));
        const double best = std::min(angular_distance(delta + half, theta_ref),
                                     angular_distance(delta - half, theta_ref));
        CHECK(angular_distance(sol.angle, theta_ref) <= best + 1e-9);
    }
}

TEST_CASE("norm of tau matches the quadratic form", "[distance]") {
    std::mt19937_64 rng(307);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> utheta(-kPi, kPi);
    const BodyDimensions dims = paper_dims();
    for (int i = 0; i < 5000; ++i) {
        const SegmentOrientation pelvis = random_orientation(rng);
        const SegmentOrientation shank = random_orientation(rng);
        const double thigh = 0.2 + 0.4 * std::abs(u(rng));
        const double theta = utheta(rng);
        const Eigen::Vector3d psi = compute_psi(pelvis, shank, dims, Side::Left);

        const double norm2 = pelvis_ankle_vector(psi, theta, thigh, shank).squaredNorm();
        const double alpha = -2.0 * thigh * psi.dot(shank.z_axis());
        const double beta = 2.0 * thigh * psi.dot(shank.x_axis());
        const double form = psi.squaredNorm() + thigh * thigh + alpha * std::cos(theta) +
                            beta * std::sin(theta);
        CHECK(std::abs(norm2 - form) < 1e-12);
    }
}

TEST_CASE("pseudo-measurement block structure and value", "[distance]") {
    const BodyDimensions dims = paper_dims();
    FilterState state;
    state.set_position(BodyPoint::MidPelvis, {0.1, 0.2, 0.9});
    state.set_position(BodyPoint::LeftAnkle, {0.15, 0.3, 0.0});
    state.set_position(BodyPoint::RightAnkle, {0.05, 0.1, 0.0});

    const SegmentOrientation ident;
    const DistanceMeasurement meas{Side::Left, 0.90732, 0.1};
    const Eigen::Vector3d variance = Eigen::Vector3d::Constant(0.01);
    ReconstructionNoise pla;
    pla.variance_override = variance;
    const PseudoMeasurement pm =
        build_pseudo_measurement(state, ident, ident, dims, meas, pla);

    REQUIRE(pm.rows() == 3);
    Eigen::Matrix<double, 3, kStateDim> expected = Eigen::Matrix<double, 3, kStateDim>::Zero();
    expected.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();
    expected.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
    CHECK((pm.jacobian - expected).norm() < 1e-15);
    CHECK((pm.variance - variance).norm() < 1e-15);

    // d = 0.90732 exceeds the straight-leg reach by a hair, so the solve
    // clamps to theta = 0 and y = tau(0) exactly.
    CHECK((pm.value - Eigen::Vector3d(0.0, 0.115, -0.90)).norm() < 1e-12);

    // The jacobian measures the ankle relative to the pelvis.
    const Eigen::Vector3d predicted = pm.jacobian * state.x;
    CHECK((predicted - (state.position(BodyPoint::LeftAnkle) -
                        state.position(BodyPoint::MidPelvis)))
              .norm() < 1e-15);
}

TEST_CASE("right side mirrors the y component", "[distance]") {
    const BodyDimensions dims = paper_dims();
    const SegmentOrientation ident;
    FilterState state;  // zero positions: same reference geometry per side

    const ReconstructionNoise pla;
    const PseudoMeasurement left = build_pseudo_measurement(
        state, ident, ident, dims, {Side::Left, 0.90732, 0.1}, pla);
    const PseudoMeasurement right = build_pseudo_measurement(
        state, ident, ident, dims, {Side::Right, 0.90732, 0.1}, pla);

    REQUIRE(left.rows() == 3);
    REQUIRE(right.rows() == 3);
    CHECK(right.value(0) == Catch::Approx(left.value(0)).margin(1e-12));
    CHECK(right.value(1) == Catch::Approx(-left.value(1)).margin(1e-12));
    CHECK(right.value(2) == Catch::Approx(left.value(2)).margin(1e-12));

    // Right block addresses the right ankle sub-block.
    Eigen::Matrix<double, 3, kStateDim> expected = Eigen::Matrix<double, 3, kStateDim>::Zero();
    expected.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();
    expected.block<3, 3>(0, 6) = Eigen::Matrix3d::Identity();
    CHECK((right.jacobian - expected).norm() < 1e-15);
}

TEST_CASE("propagated row variance predicts the reconstruction spread", "[distance]") {
    // Well-conditioned bent-knee geometry: perturb the distance with Gaussian
    // noise, re-solve, and compare the empirical spread of tau(theta(d))
    // against the claimed per-axis variance.
    const BodyDimensions dims = paper_dims();
    const double thigh = dims.thigh(Side::Left);
    const double sigma = 0.03;

    // Deterministic search for a geometry where the mid-band reading sits at
    // the best-conditioned angle (slope = r) with the full +/-5 sigma noise
    // band strictly inside reach, so no sample clamps and the first-order
    // propagation is the right model.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    SegmentOrientation shank;
    SegmentOrientation pelvis;
    Eigen::Vector3d psi = Eigen::Vector3d::Zero();
    double theta_true = 0.0;
    double d_true = 0.0;
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
        shank = random_orientation(rng);
        pelvis = random_orientation(rng);
        psi = compute_psi(pelvis, shank, dims, Side::Left);
        const Quadratic q = quadratic_terms(0.0, psi, thigh, shank);
        if (q.r < 0.05) {
            continue;
        }
        theta_true = std::atan2(q.beta, q.alpha) + 0.5 * kPi;
        const double base = psi.squaredNorm() + thigh * thigh;
        d_true = std::sqrt(base);
        const double d_hi = std::sqrt(base + q.r);
        const double d_lo = std::sqrt(std::max(0.0, base - q.r));
        found = d_true + 5.0 * sigma < d_hi && d_true - 5.0 * sigma > d_lo;
    }
    REQUIRE(found);

    const ReconstructionNoise pla;
    const Eigen::Vector3d claimed = propagate_distance_variance(
        d_true, sigma, psi, theta_true, thigh, shank, pla);

    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d sumsq = Eigen::Vector3d::Zero();
    const int samples = 20000;
    const Eigen::Vector3d center = pelvis_ankle_vector(psi, theta_true, thigh, shank);
    for (int i = 0; i < samples; ++i) {
        const double d = d_true + sigma * n(rng);
        const KneeAngleSolution sol =
            solve_knee_angle(d, psi, thigh, shank, theta_true);
        REQUIRE(sol.usable());
        const Eigen::Vector3d err =
            pelvis_ankle_vector(psi, sol.angle, thigh, shank) - center;
        sum += err;
        sumsq += err.cwiseAbs2();
    }
    const Eigen::Vector3d empirical =
        sumsq / samples - (sum / samples).cwiseAbs2();

    for (int axis = 0; axis < 3; ++axis) {
        const double propagated = claimed(axis) - pla.variance_floor;
        if (propagated < 10.0 * pla.variance_floor) {
            continue;  // axis dominated by the variance floor
        }
        const double ratio = empirical(axis) / propagated;
        CHECK(ratio > 0.5);
        CHECK(ratio < 2.0);
    }

    // At the reach apex the slope vanishes but the claimed variance stays
    // finite, saturating at the second-order value 4 d sigma / r carried
    // through tau's first and second derivatives.
    const Quadratic q = quadratic_terms(d_true, psi, thigh, shank);
    const double theta_extreme = std::atan2(q.beta, q.alpha);
    const double m_apex = q.r + psi.squaredNorm() + thigh * thigh;
    const double d_extreme = std::sqrt(m_apex);
    const Eigen::Vector3d at_extreme = propagate_distance_variance(
        d_extreme, sigma, psi, theta_extreme, thigh, shank, pla);
    CHECK(at_extreme.allFinite());
    CHECK(at_extreme.minCoeff() >= pla.variance_floor);
    const double s2 = 4.0 * d_extreme * sigma / q.r;
    const Eigen::Vector3d dtau =
        thigh * (std::cos(theta_extreme) * shank.x_axis() +
                 std::sin(theta_extreme) * shank.z_axis());
    const Eigen::Vector3d d2tau =
        thigh * (std::cos(theta_extreme) * shank.z_axis() -
                 std::sin(theta_extreme) * shank.x_axis());
    const Eigen::Vector3d expected = s2 * dtau.cwiseAbs2() +
                                     (0.5 * s2 * s2) * d2tau.cwiseAbs2() +
                                     Eigen::Vector3d::Constant(pla.variance_floor);
    CHECK((at_extreme - expected).norm() < 1e-15);

    // Zero sigma collapses to the floor: exact readings are fully trusted.
    const Eigen::Vector3d exact = propagate_distance_variance(
        d_true, 0.0, psi, theta_true, thigh, shank, pla);
    CHECK((exact - Eigen::Vector3d::Constant(pla.variance_floor)).norm() < 1e-18);
}

TEST_CASE("reject policy yields an empty block", "[distance]") {
    const BodyDimensions dims = paper_dims();
    const SegmentOrientation ident;
    FilterState state;
    const PseudoMeasurement pm =
        build_pseudo_measurement(state, ident, ident, dims, {Side::Left, 2.0, 0.1},
                                 ReconstructionNoise{}, InfeasiblePolicy::Reject);
    CHECK(pm.empty());
    CHECK(pm.rows() == 0);
}
