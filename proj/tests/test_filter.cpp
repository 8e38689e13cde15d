#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ckfdist/filter.hpp"
#include "ckfdist/simulator.hpp"

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

FilterParams paper_params() {
    FilterParams p;
    p.dims = paper_dims();
    return p;
}

/// Straight-leg standing geometry consistent with identity orientations:
/// ankles one full leg below their hips.
FilterState standing_state(const BodyDimensions& dims) {
    FilterState s;
    s.set_position(BodyPoint::MidPelvis, {0.0, 0.0, 0.0});
    s.set_position(BodyPoint::LeftAnkle, {0.0, 0.5 * dims.pelvis_width, -0.90});
    s.set_position(BodyPoint::RightAnkle, {0.0, -0.5 * dims.pelvis_width, -0.90});
    s.P = Matrix18d::Identity();
    return s;
}

double thigh_length_of(const Vector18d& x, const FrameInput& input, const BodyDimensions& dims,
                       Side side) {
    const Eigen::Vector3d psi = compute_psi(input.pelvis_ori, input.shank_ori(side), dims, side);
    const int mp = position_offset(BodyPoint::MidPelvis);
    const int ank = position_offset(ankle_point(side));
    return (x.segment<3>(mp) - x.segment<3>(ank) + psi).norm();
}

double hinge_residual_of(const Vector18d& x, const FrameInput& input, const BodyDimensions& dims,
                         Side side) {
    const Eigen::Vector3d psi = compute_psi(input.pelvis_ori, input.shank_ori(side), dims, side);
    const int mp = position_offset(BodyPoint::MidPelvis);
    const int ank = position_offset(ankle_point(side));
    const Eigen::Vector3d u = x.segment<3>(mp) - x.segment<3>(ank) + psi;
    return u.dot(input.shank_ori(side).y_axis());
}

double knee_angle_of(const Vector18d& x, const FrameInput& input, const BodyDimensions& dims,
                     Side side) {
    const Eigen::Vector3d psi = compute_psi(input.pelvis_ori, input.shank_ori(side), dims, side);
    const int mp = position_offset(BodyPoint::MidPelvis);
    const int ank = position_offset(ankle_point(side));
    const Eigen::Vector3d u = x.segment<3>(mp) - x.segment<3>(ank) + psi;
    return std::atan2(-u.dot(input.shank_ori(side).x_axis()),
                      u.dot(input.shank_ori(side).z_axis()));
}

}  // namespace

TEST_CASE("predict applies the kinematic equations", "[filter]") {
    NoiseModel noise;
    FrameInput input;

    FilterState s;
    s.set_position(BodyPoint::MidPelvis, {0.0, 0.0, 0.0});
    s.set_velocity(BodyPoint::MidPelvis, {1.0, 0.0, 0.0});
    input.dt = 0.01;
    FilterState out = predict(s, input, noise);
    CHECK((out.position(BodyPoint::MidPelvis) - Eigen::Vector3d(0.01, 0.0, 0.0)).norm() < 1e-15);
    CHECK((out.velocity(BodyPoint::MidPelvis) - Eigen::Vector3d(1.0, 0.0, 0.0)).norm() < 1e-15);

    FilterState rest;
    input.dt = 0.1;
    input.accel_mp = {0.0, 0.0, -9.81};
    out = predict(rest, input, noise);
    CHECK(out.position(BodyPoint::MidPelvis).z() == Catch::Approx(-0.04905));
    CHECK(out.velocity(BodyPoint::MidPelvis).z() == Catch::Approx(-0.981));
}

TEST_CASE("predict is the identity on a velocity-free state with zero Q", "[filter]") {
    NoiseModel noise;
    noise.accel_variance = 0.0;
    FrameInput input;  // zero accelerations

    FilterState s;
    s.set_position(BodyPoint::LeftAnkle, {0.3, -0.2, 0.1});
    // Position-only covariance: the velocity rows/cols stay zero, so
    // F P F^T = P exactly.
    for (int i = 0; i < 9; ++i) {
        s.P(i, i) = 0.5 + 0.1 * i;
    }
    s.P(0, 3) = s.P(3, 0) = 0.05;

    const FilterState out = predict(s, input, noise);
    CHECK((out.x - s.x).norm() < 1e-15);
    CHECK((out.P - s.P).norm() < 1e-15);
}

TEST_CASE("predict propagates covariance as F P F^T + Q", "[filter]") {
    NoiseModel noise;
    noise.accel_variance = 2.0;
    FrameInput input;
    input.dt = 0.02;
    const double dt = input.dt;

    FilterState s;
    s.P = Matrix18d::Identity();
    const FilterState out = predict(s, input, noise);

    const double q_pp = 0.25 * dt * dt * dt * dt * noise.accel_variance;
    const double q_pv = 0.5 * dt * dt * dt * noise.accel_variance;
    const double q_vv = dt * dt * noise.accel_variance;
    for (int i = 0; i < 9; ++i) {
        CHECK(out.P(i, i) == Catch::Approx(1.0 + dt * dt + q_pp));
        CHECK(out.P(i, 9 + i) == Catch::Approx(dt + q_pv));
        CHECK(out.P(9 + i, i) == Catch::Approx(dt + q_pv));
        CHECK(out.P(9 + i, 9 + i) == Catch::Approx(1.0 + q_vv));
    }
    CHECK((out.P - out.P.transpose()).norm() < 1e-12);
}

TEST_CASE("kalman_update matches the scalar textbook case", "[filter]") {
    FilterState s;
    s.x(0) = 3.0;
    s.P = Matrix18d::Identity();

    MeasurementJacobian H(1, kStateDim);
    H.setZero();
    H(0, 0) = 1.0;
    Eigen::VectorXd y(1), r(1);
    y(0) = s.x(0) + 2.0;
    r(0) = 1.0;

    const FilterState out = kalman_update(s, H, y, r);
    CHECK(out.x(0) == Catch::Approx(4.0));
    CHECK(out.P(0, 0) == Catch::Approx(0.5));
    for (int i = 1; i < kStateDim; ++i) {
        CHECK(out.x(i) == Catch::Approx(0.0).margin(1e-15));
        CHECK(out.P(i, i) == Catch::Approx(1.0));
    }
}

TEST_CASE("kalman_update edge behaviors", "[filter]") {
    FilterState s;
    s.x.setLinSpaced(kStateDim, 0.0, 1.7);
    s.P = Matrix18d::Identity() * 0.3;

    // Empty stack: no-op.
    const FilterState same = kalman_update(s, MeasurementJacobian(0, kStateDim),
                                           Eigen::VectorXd(0), Eigen::VectorXd(0));
    CHECK((same.x - s.x).norm() == 0.0);
    CHECK((same.P - s.P).norm() == 0.0);

    // Perfect measurement: R = 0 pins the entry to y.
    MeasurementJacobian H(1, kStateDim);
    H.setZero();
    H(0, 4) = 1.0;
    Eigen::VectorXd y(1), r(1);
    y(0) = -2.5;
    r(0) = 0.0;
    const FilterState pinned = kalman_update(s, H, y, r);
    CHECK(pinned.x(4) == Catch::Approx(-2.5).margin(1e-9));
    CHECK(pinned.P(4, 4) == Catch::Approx(0.0).margin(1e-12));

    // Singular innovation: zero covariance and zero measurement noise.
    FilterState flat;
    flat.P = Matrix18d::Zero();
    CHECK_THROWS_AS(kalman_update(flat, H, y, r), SingularInnovation);
}

TEST_CASE("joint update equals sequential scalar updates", "[filter]") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> uvar(0.05, 1.0);

    for (int trial = 0; trial < 30; ++trial) {
        FilterState s;
        for (int i = 0; i < kStateDim; ++i) {
            s.x(i) = n(rng);
        }
        Eigen::MatrixXd a(kStateDim, kStateDim);
        for (int i = 0; i < kStateDim; ++i) {
            for (int j = 0; j < kStateDim; ++j) {
                a(i, j) = n(rng);
            }
        }
        s.P = a * a.transpose() / kStateDim + 0.1 * Matrix18d::Identity();

        const int rows = 7;
        MeasurementJacobian H(rows, kStateDim);
        Eigen::VectorXd y(rows), r(rows);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < kStateDim; ++j) {
                H(i, j) = n(rng);
            }
            y(i) = n(rng);
            r(i) = uvar(rng);
        }

        const FilterState joint = kalman_update(s, H, y, r);

        FilterState seq = s;
        for (int i = 0; i < rows; ++i) {
            seq = kalman_update(seq, MeasurementJacobian(H.row(i)),
                                y.segment(i, 1), r.segment(i, 1));
        }

        CHECK((joint.x - seq.x).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((joint.P - seq.P).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("limit_covariance caps diagonals symmetrically", "[filter]") {
    const Vector18d cap = Vector18d::Ones();

    Matrix18d below = Matrix18d::Identity() * 0.7;
    CHECK((limit_covariance(below, cap) - below).norm() < 1e-15);

    Matrix18d diag = Matrix18d::Identity() * 4.0;
    CHECK((limit_covariance(diag, cap) - Matrix18d::Identity()).norm() < 1e-12);

    Matrix18d coupled = Matrix18d::Zero();
    coupled(0, 0) = coupled(1, 1) = 4.0;
    coupled(0, 1) = coupled(1, 0) = 2.0;
    const Matrix18d limited = limit_covariance(coupled, cap);
    CHECK(limited(0, 0) == Catch::Approx(1.0));
    CHECK(limited(1, 1) == Catch::Approx(1.0));
    CHECK(limited(0, 1) == Catch::Approx(0.5));
    CHECK(limited(1, 0) == Catch::Approx(0.5));

    // Mixed case: untouched entries stay put, PSD is preserved.
    Matrix18d mixed = Matrix18d::Identity() * 0.5;
    mixed(2, 2) = 9.0;
    mixed(2, 5) = mixed(5, 2) = 1.5;
    const Matrix18d m = limit_covariance(mixed, cap);
    CHECK(m(2, 2) == Catch::Approx(1.0));
    CHECK(m(0, 0) == Catch::Approx(0.5));
    CHECK(m(2, 5) == Catch::Approx(1.5 / 3.0));
    const Eigen::SelfAdjointEigenSolver<Matrix18d> eig(m);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("measurement stack row counts per mode and contacts", "[filter]") {
    FilterParams params = paper_params();
    FilterState s = standing_state(params.dims);

    FrameInput input;
    input.dist_left = DistanceMeasurement{Side::Left, 0.9, 0.1};
    input.dist_right = DistanceMeasurement{Side::Right, 0.9, 0.1};
    input.contacts = {true, true};

    // Distance mode, everything present: 3 + 3 + (3 + 1) + (3 + 1) = 14 rows.
    StackedMeasurement m = assemble_measurement(s, input, params);
    CHECK(m.rows() == 14);
    CHECK(m.y.size() == 14);
    CHECK(m.variance.size() == 14);
    // The distance blocks pass the pseudo-measurement builder's output through
    // unchanged: left rows first, then right.
    const PseudoMeasurement ref_l = build_pseudo_measurement(
        s, input.pelvis_ori, input.left_shank_ori, params.dims, *input.dist_left,
        params.noise.pla);
    const PseudoMeasurement ref_r = build_pseudo_measurement(
        s, input.pelvis_ori, input.right_shank_ori, params.dims, *input.dist_right,
        params.noise.pla);
    REQUIRE(ref_l.rows() == 3);
    REQUIRE(ref_r.rows() == 3);
    CHECK((m.y.segment<3>(0) - ref_l.value).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((m.variance.segment<3>(0) - ref_l.variance).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((m.y.segment<3>(3) - ref_r.value).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((m.variance.segment<3>(3) - ref_r.variance).cwiseAbs().maxCoeff() < 1e-15);
    // Left contact block: velocity rows then floor row, then the right block.
    CHECK(m.H(0, position_offset(BodyPoint::MidPelvis)) == -1.0);
    CHECK(m.H(0, position_offset(BodyPoint::LeftAnkle)) == 1.0);
    CHECK(m.H(3, position_offset(BodyPoint::RightAnkle)) == 1.0);
    CHECK(m.H(6, velocity_offset(BodyPoint::LeftAnkle)) == 1.0);
    CHECK(m.variance(6) == Catch::Approx(params.noise.zupt_variance));
    CHECK(m.H(9, position_offset(BodyPoint::LeftAnkle) + 2) == 1.0);
    CHECK(m.variance(9) == Catch::Approx(params.noise.floor_variance));
    CHECK(m.H(10, velocity_offset(BodyPoint::RightAnkle)) == 1.0);
    CHECK(m.H(13, position_offset(BodyPoint::RightAnkle) + 2) == 1.0);

    // No contacts: just the two distance blocks.
    input.contacts = {false, false};
    CHECK(assemble_measurement(s, input, params).rows() == 6);

    // Nothing at all: empty stack.
    input.dist_left.reset();
    input.dist_right.reset();
    CHECK(assemble_measurement(s, input, params).rows() == 0);
}

TEST_CASE("baseline mode ignores distances and adds pelvis rows", "[filter]") {
    FilterParams params = paper_params();
    params.mode = FilterMode::Baseline;
    FilterState s = standing_state(params.dims);

    FrameInput input;
    input.floor_z = -0.90;

    StackedMeasurement m = assemble_measurement(s, input, params);
    REQUIRE(m.rows() == 3);
    // Pelvis z row: floor + mean unbent leg length above the floor.
    CHECK(m.H(0, position_offset(BodyPoint::MidPelvis) + 2) == 1.0);
    CHECK(m.y(0) == Catch::Approx(input.floor_z + params.dims.mean_leg()));
    CHECK(m.variance(0) == Catch::Approx(params.noise.pelvis_z_variance));
    // XY rows: pelvis minus the ankle midpoint.
    CHECK(m.H(1, position_offset(BodyPoint::MidPelvis)) == 1.0);
    CHECK(m.H(1, position_offset(BodyPoint::LeftAnkle)) == Catch::Approx(-0.5));
    CHECK(m.H(1, position_offset(BodyPoint::RightAnkle)) == Catch::Approx(-0.5));
    CHECK(m.y(1) == 0.0);
    CHECK(m.variance(2) == Catch::Approx(params.noise.pelvis_xy_variance));

    // Distances present make no difference in baseline mode.
    input.dist_left = DistanceMeasurement{Side::Left, 0.9, 0.1};
    input.dist_right = DistanceMeasurement{Side::Right, 0.9, 0.1};
    const StackedMeasurement m2 = assemble_measurement(s, input, params);
    CHECK(m2.rows() == 3);
    CHECK((m2.H - m.H).norm() == 0.0);
    CHECK((m2.y - m.y).norm() == 0.0);

    input.contacts = {true, true};
    CHECK(assemble_measurement(s, input, params).rows() == 11);

    // Explicit height override feeds the z target.
    params.baseline_pelvis_height = 0.8;
    const StackedMeasurement m3 = assemble_measurement(s, input, params);
    CHECK(m3.y(0) == Catch::Approx(input.floor_z + 0.8));
}

TEST_CASE("constraint projection: fixed point stays put", "[filter]") {
    const FilterParams params = paper_params();
    FilterState s = standing_state(params.dims);
    FrameInput input;

    const FilterState out =
        constraint_update(s, input, params.dims, params.rom, params.constraint);
    CHECK((out.x - s.x).cwiseAbs().maxCoeff() < 1e-12);

    // The covariance collapses along the active constraint gradients.
    const auto lin = detail::linearize_constraints(out.x, input, params.dims, params.rom);
    REQUIRE(lin.rows() == 4);  // thigh length + hinge per leg, ROM inactive
    CHECK((lin.jacobian * out.P * lin.jacobian.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((out.P - out.P.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constraint projection restores the thigh length", "[filter]") {
    const FilterParams params = paper_params();
    FilterState s = standing_state(params.dims);
    FrameInput input;

    // Pull the left ankle down so the apparent thigh is 0.50 m.
    s.x(position_offset(BodyPoint::LeftAnkle) + 2) = -0.95;
    REQUIRE(thigh_length_of(s.x, input, params.dims, Side::Left) == Catch::Approx(0.50));

    const FilterState out =
        constraint_update(s, input, params.dims, params.rom, params.constraint);
    CHECK(thigh_length_of(out.x, input, params.dims, Side::Left) ==
          Catch::Approx(0.45).margin(1e-6));
    CHECK(std::abs(hinge_residual_of(out.x, input, params.dims, Side::Left)) < 1e-6);
    // The untouched leg still satisfies its constraints.
    CHECK(thigh_length_of(out.x, input, params.dims, Side::Right) ==
          Catch::Approx(0.45).margin(1e-6));
}

TEST_CASE("constraint projection enforces the knee bound", "[filter]") {
    const FilterParams params = paper_params();
    FilterState s = standing_state(params.dims);
    FrameInput input;

    // Hyperextend the left knee to -0.2 rad by moving the ankle.
    const Eigen::Vector3d psi =
        compute_psi(input.pelvis_ori, input.left_shank_ori, params.dims, Side::Left);
    const double theta = -0.2;
    const Eigen::Vector3d u =
        0.45 * (std::cos(theta) * Eigen::Vector3d::UnitZ() -
                std::sin(theta) * Eigen::Vector3d::UnitX());
    s.x.segment<3>(position_offset(BodyPoint::LeftAnkle)) =
        s.x.segment<3>(position_offset(BodyPoint::MidPelvis)) + psi - u;
    REQUIRE(knee_angle_of(s.x, input, params.dims, Side::Left) == Catch::Approx(-0.2));

    const FilterState out =
        constraint_update(s, input, params.dims, params.rom, params.constraint);
    // The bound is an inequality: once the first projection lands inside the
    // feasible region the row deactivates, so the result sits at or slightly
    // above zero rather than exactly on the bound.
    const double knee_out = knee_angle_of(out.x, input, params.dims, Side::Left);
    CHECK(knee_out > -1e-6);
    CHECK(knee_out < 1e-2);
    CHECK(thigh_length_of(out.x, input, params.dims, Side::Left) ==
          Catch::Approx(0.45).margin(1e-6));
    CHECK(std::abs(hinge_residual_of(out.x, input, params.dims, Side::Left)) < 1e-6);
}

TEST_CASE("constraint projection singular fallback and failure", "[filter]") {
    const FilterParams params = paper_params();
    FrameInput input;

    // Zero covariance forces the unweighted fallback; a violated state still
    // gets projected.
    FilterState s = standing_state(params.dims);
    s.P = Matrix18d::Zero();
    s.x(position_offset(BodyPoint::LeftAnkle) + 2) = -0.95;
    const FilterState out =
        constraint_update(s, input, params.dims, params.rom, params.constraint);
    CHECK(thigh_length_of(out.x, input, params.dims, Side::Left) ==
          Catch::Approx(0.45).margin(1e-6));

    // Thigh aligned with the hinge axis: the thigh-length and hinge rows
    // coincide, so even the unweighted normal matrix is singular.
    FilterState degen;
    degen.P = Matrix18d::Zero();
    const Eigen::Vector3d psi =
        compute_psi(input.pelvis_ori, input.left_shank_ori, params.dims, Side::Left);
    degen.x.segment<3>(position_offset(BodyPoint::LeftAnkle)) =
        psi - 0.52 * Eigen::Vector3d::UnitY();
    degen.x.segment<3>(position_offset(BodyPoint::RightAnkle)) =
        compute_psi(input.pelvis_ori, input.right_shank_ori, params.dims, Side::Right) -
        0.52 * Eigen::Vector3d::UnitY();
    CHECK_THROWS_AS(
        constraint_update(degen, input, params.dims, params.rom, params.constraint),
        ConstraintSingular);
}

TEST_CASE("step keeps covariance symmetric PSD and constraints tight", "[filter]") {
    const MotionPreset preset = MotionPreset::standard(PresetName::Walk);
    BodyDimensions dims;  // library defaults
    TrialData trial = generate_truth(preset, dims, 100.0, 3);
    SensorNoise noise;
    noise.dist_sigma = 0.1;
    trial = derive_sensor_streams(trial, noise, 3);

    FilterParams params;
    params.dims = dims;

    FilterState state;
    state.set_position(BodyPoint::MidPelvis, trial.truth[0].mid_pelvis_pos);
    state.set_position(BodyPoint::LeftAnkle, trial.truth[0].left_ankle_pos);
    state.set_position(BodyPoint::RightAnkle, trial.truth[0].right_ankle_pos);
    state.P = Matrix18d::Identity() * 1e-3;

    const std::size_t check_until = 500;  // 5 s is plenty at unit-test scale
    for (std::size_t k = 1; k < check_until; ++k) {
        state = step(state, trial.frames[k], params);

        CHECK((state.P - state.P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        const Eigen::SelfAdjointEigenSolver<Matrix18d> eig(state.P);
        CHECK(eig.eigenvalues().minCoeff() > -1e-8);

        for (const Side side : {Side::Left, Side::Right}) {
            CHECK(std::abs(thigh_length_of(state.x, trial.frames[k], dims, side) -
                           dims.thigh(side)) < 1e-6);
            CHECK(std::abs(hinge_residual_of(state.x, trial.frames[k], dims, side)) < 1e-6);
            const double theta = knee_angle_of(state.x, trial.frames[k], dims, side);
            CHECK(theta > params.rom.min_rad - 1e-6);
            CHECK(theta < params.rom.max_rad + 1e-6);
        }
    }
}

TEST_CASE("a tight ZUPT freezes the stance ankle", "[filter]") {
    FilterParams params = paper_params();
    params.noise.zupt_variance = 1e-8;
    FilterState s = standing_state(params.dims);
    s.set_velocity(BodyPoint::LeftAnkle, {0.5, -0.2, 0.3});

    FrameInput input;
    input.contacts.left = true;
    input.floor_z = -0.90;

    const FilterState out = step(s, input, params);
    CHECK(out.velocity(BodyPoint::LeftAnkle).norm() < 1e-3);
}
