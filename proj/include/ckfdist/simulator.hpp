#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ckfdist/body_model.hpp"
#include "ckfdist/filter.hpp"

namespace ckfdist {

enum class PresetName {
    Walk,
    Figure8,
    Zigzag,
    TugTurn,
    Jog,
    HighKnee,
    Speedskater,
    JumpingJacks,
};

inline const std::array<PresetName, 8>& all_presets() {
    static const std::array<PresetName, 8> presets = {
        PresetName::Walk,       PresetName::Figure8,     PresetName::Zigzag,
        PresetName::TugTurn,    PresetName::Jog,         PresetName::HighKnee,
        PresetName::Speedskater, PresetName::JumpingJacks,
    };
    return presets;
}

inline const char* to_string(PresetName p) {
    switch (p) {
        case PresetName::Walk: return "walk";
        case PresetName::Figure8: return "figure8";
        case PresetName::Zigzag: return "zigzag";
        case PresetName::TugTurn: return "tug_turn";
        case PresetName::Jog: return "jog";
        case PresetName::HighKnee: return "high_knee";
        case PresetName::Speedskater: return "speedskater";
        case PresetName::JumpingJacks: return "jumping_jacks";
    }
    return "?";
}

inline std::optional<PresetName> preset_from_string(std::string_view s) {
    for (const PresetName p : all_presets()) {
        if (s == to_string(p)) {
            return p;
        }
    }
    return std::nullopt;
}

/// 'F' for steady walking movements, 'D' for dynamic ones.
inline char movement_group(PresetName p) {
    switch (p) {
        case PresetName::Walk:
        case PresetName::Figure8:
        case PresetName::Zigzag: return 'F';
        default: return 'D';
    }
}

/// How the heading evolves over the trial.
enum class HeadingKind { None, MidTurn, TwoTurns, Serpentine, RandomTurns };

/// Parameters of one synthetic movement. `standard(name)` gives the tuned
/// defaults; individual fields can be adjusted afterwards. Every pose the
/// parameters produce must keep the knee inside its range of motion and the
/// hip-ankle span strictly reachable, or generate_truth throws InvalidPreset.
struct MotionPreset {
    PresetName name = PresetName::Walk;
    double duration_s = 30.0;
    double cadence_steps_per_min = 100.0;  // stride period = 120 / cadence
    double duty_factor = 0.62;             // stance fraction of the stride
    double forward_speed_mps = 0.8;

    // Driver amplitudes. Knee amplitude sets the swing foot lift; hip
    // amplitude sets the lateral foothold excursion of in-place movements.
    double knee_amplitude_rad = 0.60;
    double hip_amplitude_rad = 0.0;

    double pelvis_height_m = 0.73;  // mean mid-pelvis height above the floor
    double pelvis_osc_m = 0.03;     // vertical oscillation amplitude
    double lateral_sway_m = 0.025;
    double pelvis_roll_rad = 0.04;
    double stance_width_m = 0.20;  // lateral distance between neutral footholds

    bool legs_in_phase = false;    // both feet share the stance window
    bool alternate_width = false;  // widen every other foothold (in/out hops)

    HeadingKind heading_kind = HeadingKind::MidTurn;
    double turn_amplitude_rad = kPi;  // serpentine amplitude or ramp size
    double turn_period_s = 3.0;       // serpentine period or ramp duration

    double stride_period() const { return 120.0 / cadence_steps_per_min; }

    static MotionPreset standard(PresetName name) {
        MotionPreset p;
        p.name = name;
        switch (name) {
            case PresetName::Walk:
                break;
            case PresetName::Figure8:
                p.duration_s = 60.0;
                p.heading_kind = HeadingKind::Serpentine;
                p.turn_amplitude_rad = kPi;
                p.turn_period_s = 20.0;
                break;
            case PresetName::Zigzag:
                p.duration_s = 60.0;
                p.heading_kind = HeadingKind::Serpentine;
                p.turn_amplitude_rad = 0.25 * kPi;
                p.turn_period_s = 8.0;
                break;
            case PresetName::TugTurn:
                p.cadence_steps_per_min = 105.0;
                p.forward_speed_mps = 0.9;
                p.pelvis_height_m = 0.70;
                p.heading_kind = HeadingKind::TwoTurns;
                p.turn_period_s = 2.5;
                break;
            case PresetName::Jog:
                p.cadence_steps_per_min = 150.0;
                p.duty_factor = 0.40;
                p.forward_speed_mps = 1.6;
                p.knee_amplitude_rad = 1.0;
                p.pelvis_height_m = 0.68;
                p.pelvis_osc_m = 0.045;
                p.lateral_sway_m = 0.015;
                p.turn_period_s = 2.0;
                break;
            case PresetName::HighKnee:
                p.cadence_steps_per_min = 140.0;
                p.duty_factor = 0.42;
                p.forward_speed_mps = 0.0;
                p.knee_amplitude_rad = 1.35;
                p.pelvis_height_m = 0.77;
                p.pelvis_osc_m = 0.04;
                p.lateral_sway_m = 0.02;
                p.heading_kind = HeadingKind::None;
                break;
            case PresetName::Speedskater:
                p.cadence_steps_per_min = 110.0;
                p.duty_factor = 0.45;
                p.forward_speed_mps = 0.0;
                p.knee_amplitude_rad = 0.9;
                p.hip_amplitude_rad = 0.25;
                p.pelvis_height_m = 0.75;
                p.pelvis_osc_m = 0.035;
                p.lateral_sway_m = 0.12;
                p.stance_width_m = 0.22;
                p.heading_kind = HeadingKind::None;
                break;
            case PresetName::JumpingJacks:
                p.cadence_steps_per_min = 133.0;
                p.duty_factor = 0.62;
                p.forward_speed_mps = 0.0;
                p.knee_amplitude_rad = 0.7;
                p.hip_amplitude_rad = 0.30;
                p.pelvis_height_m = 0.75;
                p.pelvis_osc_m = 0.045;
                p.lateral_sway_m = 0.0;
                p.stance_width_m = 0.22;
                p.legs_in_phase = true;
                p.alternate_width = true;
                p.heading_kind = HeadingKind::None;
                break;
        }
        return p;
    }
};

/// Sensor corruption applied by derive_sensor_streams.
struct SensorNoise {
    double accel_sigma = 0.02;        // m/s^2, per world axis
    double orientation_sigma = 0.0;   // rad, small-angle perturbation per axis
    double dist_sigma = 0.0;          // m, on the two distance readings
};

struct TrialMeta {
    PresetName preset = PresetName::Walk;
    char group = 'F';
    std::uint64_t seed = 0;
    double sample_rate = 100.0;
    double dist_sigma = 0.0;
    double accel_sigma = 0.0;
    double orientation_sigma = 0.0;
};

/// One simulated recording: the sensor streams the filter sees plus the
/// ground truth they were derived from.
struct TrialData {
    TrialMeta meta;
    BodyDimensions dims;
    double floor_z = 0.0;
    std::vector<double> time;
    std::vector<FrameInput> frames;
    std::vector<PoseSnapshot> truth;
    std::vector<JointAngleFrame> truth_angles;

    std::size_t frame_count() const { return truth.size(); }
};

namespace detail {

// Quintic smoothstep: s(0)=0, s(1)=1, zero velocity and acceleration at both
// ends, so swing trajectories splice into stance without accel spikes.
inline double smoothstep5(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// Lift profile: 0 at both ends, 1 at u = 1/2, C^2 everywhere.
inline double swing_bump(double u) {
    u = std::clamp(u, 0.0, 1.0);
    const double w = u * (1.0 - u);
    return 64.0 * w * w * w;
}

struct HeadingProfile {
    double serpentine_amp = 0.0;
    double serpentine_period = 0.0;
    struct Ramp {
        double center = 0.0;
        double delta = 0.0;
        double width = 1.0;
    };
    std::vector<Ramp> ramps;

    double operator()(double t) const {
        double phi = 0.0;
        if (serpentine_period > 0.0) {
            phi += serpentine_amp * std::sin(2.0 * kPi * t / serpentine_period);
        }
        for (const Ramp& r : ramps) {
            phi += r.delta * smoothstep5((t - r.center) / r.width + 0.5);
        }
        return phi;
    }

    static HeadingProfile build(const MotionPreset& p, std::uint64_t seed) {
        HeadingProfile h;
        HeadingKind kind = p.heading_kind;
        // Long recordings of the plain walk get randomized turns so the
        // subject does not walk hundreds of meters in a straight line.
        if (kind == HeadingKind::MidTurn && p.duration_s >= 90.0) {
            kind = HeadingKind::RandomTurns;
        }
        switch (kind) {
            case HeadingKind::None:
                break;
            case HeadingKind::MidTurn:
                h.ramps.push_back({0.5 * p.duration_s, p.turn_amplitude_rad, p.turn_period_s});
                break;
            case HeadingKind::TwoTurns:
                h.ramps.push_back({0.40 * p.duration_s, p.turn_amplitude_rad, p.turn_period_s});
                h.ramps.push_back({0.85 * p.duration_s, p.turn_amplitude_rad, p.turn_period_s});
                break;
            case HeadingKind::Serpentine:
                h.serpentine_amp = p.turn_amplitude_rad;
                h.serpentine_period = p.turn_period_s;
                break;
            case HeadingKind::RandomTurns: {
                std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
                std::uniform_real_distribution<double> gap(8.0, 15.0);
                double t = gap(rng);
                double direction = 1.0;
                while (t < p.duration_s - 5.0) {
                    h.ramps.push_back({t, direction * p.turn_amplitude_rad, p.turn_period_s});
                    direction = -direction;
                    t += gap(rng);
                }
                break;
            }
        }
        return h;
    }
};

// Planar pelvis path sampled on a grid aligned with the frame times, extended
// past both trial ends so early and late footholds stay in range. Grid values
// come from trapezoidal integration of speed * (cos phi, sin phi).
struct PathTable {
    double t0 = 0.0;
    double step = 0.0;
    std::vector<Eigen::Vector2d> xy;

    static PathTable build(const HeadingProfile& heading, double speed, double t_begin,
                           double t_end, double frame_dt, int substeps) {
        PathTable table;
        table.step = frame_dt / substeps;
        table.t0 = t_begin;
        const auto n = static_cast<std::size_t>(std::llround((t_end - t_begin) / table.step)) + 1;
        table.xy.resize(n);
        table.xy[0] = Eigen::Vector2d::Zero();
        double phi_prev = heading(t_begin);
        Eigen::Vector2d v_prev(std::cos(phi_prev), std::sin(phi_prev));
        for (std::size_t i = 1; i < n; ++i) {
            const double t = t_begin + static_cast<double>(i) * table.step;
            const double phi = heading(t);
            const Eigen::Vector2d v(std::cos(phi), std::sin(phi));
            table.xy[i] = table.xy[i - 1] + 0.5 * speed * table.step * (v_prev + v);
            v_prev = v;
        }
        return table;
    }

    Eigen::Vector2d at(double t) const {
        const double s = (t - t0) / step;
        const auto last = static_cast<double>(xy.size() - 1);
        const double clamped = std::clamp(s, 0.0, last);
        const auto i = static_cast<std::size_t>(clamped);
        if (static_cast<double>(i) >= last) {
            return xy.back();
        }
        const double f = clamped - static_cast<double>(i);
        return (1.0 - f) * xy[i] + f * xy[i + 1];
    }
};

struct LegPose {
    SegmentOrientation shank;
    SegmentOrientation thigh;
    Eigen::Vector3d knee = Eigen::Vector3d::Zero();
    double knee_angle = 0.0;
};

/// Exact two-segment inverse kinematics. The knee bends within the plane
/// spanned by the hip-ankle axis and the anterior reference, with the knee
/// pushed toward the anterior side.
inline LegPose leg_ik(const Eigen::Vector3d& hip, const Eigen::Vector3d& ankle,
                      const Eigen::Vector3d& anterior_ref, double thigh_len, double shank_len,
                      const char* context) {
    const Eigen::Vector3d w = hip - ankle;
    const double span = w.norm();
    if (span >= thigh_len + shank_len - 1e-9) {
        throw InvalidPreset(std::string(context) + ": hip-ankle span " + std::to_string(span) +
                            " m not reachable with leg " + std::to_string(thigh_len + shank_len) +
                            " m");
    }
    if (span <= std::abs(thigh_len - shank_len) + 1e-9) {
        throw InvalidPreset(std::string(context) + ": hip-ankle span collapsed");
    }
    const Eigen::Vector3d w_hat = w / span;

    Eigen::Vector3d e = anterior_ref - anterior_ref.dot(w_hat) * w_hat;
    const double en = e.norm();
    if (en <= 1e-9) {
        throw InvalidPreset(std::string(context) + ": leg plane undefined (anterior reference "
                                                   "parallel to the hip-ankle axis)");
    }
    e /= en;

    const double cos_theta =
        std::clamp((span * span - thigh_len * thigh_len - shank_len * shank_len) /
                       (2.0 * thigh_len * shank_len),
                   -1.0, 1.0);
    const double theta = std::acos(cos_theta);

    // Law of cosines gives cos/sin of the shank-to-span angle exactly.
    const double sin_phi = thigh_len * std::sin(theta) / span;
    const double cos_phi = (thigh_len * cos_theta + shank_len) / span;

    LegPose pose;
    const Eigen::Vector3d r_z_shank = cos_phi * w_hat + sin_phi * e;
    const Eigen::Vector3d r_x_shank = cos_phi * e - sin_phi * w_hat;
    const Eigen::Vector3d r_y = w_hat.cross(e);
    Eigen::Matrix3d m;
    m.col(0) = r_x_shank;
    m.col(1) = r_y;
    m.col(2) = r_z_shank;
    pose.shank = SegmentOrientation(m);
    pose.knee = ankle + shank_len * r_z_shank;
    pose.knee_angle = theta;

    const Eigen::Vector3d r_z_thigh = (hip - pose.knee).normalized();
    m.col(0) = r_y.cross(r_z_thigh);
    m.col(1) = r_y;
    m.col(2) = r_z_thigh;
    pose.thigh = SegmentOrientation(m);
    return pose;
}

struct GaitTimeline {
    double period = 1.0;
    double duty = 0.6;
    double offset_right = 0.0;

    double local_time(Side s, double t) const {
        return s == Side::Right ? t - offset_right : t;
    }
    long stride_index(Side s, double t) const {
        return static_cast<long>(std::floor(local_time(s, t) / period));
    }
    double phase(Side s, double t) const {
        const double tl = local_time(s, t);
        return tl / period - std::floor(tl / period);
    }
    bool in_stance(Side s, double t) const { return phase(s, t) < duty; }
    double foothold_time(Side s, long k) const {
        return (static_cast<double>(k) + 0.5 * duty) * period +
               (s == Side::Right ? offset_right : 0.0);
    }
};

}  // namespace detail

/// Synthesizes ground truth for one trial: pelvis path from the heading
/// profile, footholds along it, stance feet pinned to the floor, swing feet
/// on zero-acceleration-spliced arcs, and exact leg IK for the segment
/// orientations. Throws InvalidPreset when the preset produces an
/// unreachable pose or a knee outside `rom`.
inline TrialData generate_truth(const MotionPreset& preset, const BodyDimensions& dims,
                                double sample_rate, std::uint64_t seed, double floor_z = 0.0,
                                const RomLimits& rom = RomLimits{}) {
    if (!dims.valid()) {
        throw InvalidPreset("body dimensions must be strictly positive");
    }
    if (sample_rate <= 0.0 || preset.duration_s <= 0.0) {
        throw InvalidPreset("sample rate and duration must be positive");
    }

    const double dt = 1.0 / sample_rate;
    const double period = preset.stride_period();
    const double duty = preset.duty_factor;
    if (duty <= 0.0 || duty >= 1.0) {
        throw InvalidPreset("duty factor must lie in (0, 1)");
    }

    detail::GaitTimeline timeline;
    timeline.period = period;
    timeline.duty = duty;
    timeline.offset_right = preset.legs_in_phase ? 0.0 : 0.5 * period;

    const detail::HeadingProfile heading = detail::HeadingProfile::build(preset, seed);

    const auto frames = static_cast<std::size_t>(std::llround(preset.duration_s * sample_rate));
    if (frames < 3) {
        throw InvalidPreset("trial too short");
    }
    const auto ext_frames = static_cast<std::size_t>(std::ceil(2.0 * period * sample_rate));
    const double t_begin = -static_cast<double>(ext_frames) * dt;
    const double t_end = (static_cast<double>(frames - 1) + static_cast<double>(ext_frames)) * dt;
    const detail::PathTable path = detail::PathTable::build(
        heading, preset.forward_speed_mps, t_begin, t_end, dt, 8);

    const double lift_cap = 0.8 * std::min(dims.shank(Side::Left), dims.shank(Side::Right));
    const double foot_lift =
        std::min(dims.mean_leg() * 0.5 * (1.0 - std::cos(preset.knee_amplitude_rad)), lift_cap);
    const double lateral_amp = dims.mean_leg() * std::sin(preset.hip_amplitude_rad);

    const auto foothold = [&](Side side, long k) -> Eigen::Vector2d {
        const double tm = timeline.foothold_time(side, k);
        const double phi = heading(tm);
        const Eigen::Vector2d normal(-std::sin(phi), std::cos(phi));
        double lat = 0.5 * preset.stance_width_m;
        lat += preset.alternate_width ? lateral_amp * static_cast<double>(k & 1) : lateral_amp;
        if (side == Side::Right) {
            lat = -lat;
        }
        return path.at(tm) + lat * normal;
    };

    const auto ankle_at = [&](Side side, double t) -> Eigen::Vector3d {
        const long k = timeline.stride_index(side, t);
        const double phase = timeline.phase(side, t);
        if (phase < duty) {
            const Eigen::Vector2d fh = foothold(side, k);
            return {fh.x(), fh.y(), floor_z};
        }
        const double u = (phase - duty) / (1.0 - duty);
        const Eigen::Vector2d a = foothold(side, k);
        const Eigen::Vector2d b = foothold(side, k + 1);
        const Eigen::Vector2d xy = a + detail::smoothstep5(u) * (b - a);
        return {xy.x(), xy.y(), floor_z + foot_lift * detail::swing_bump(u)};
    };

    // A foot counts as in contact while it rests on the floor without moving:
    // all scheduled stance, plus a degenerate swing that goes nowhere.
    const auto in_contact = [&](Side side, double t) -> bool {
        if (timeline.in_stance(side, t)) {
            return true;
        }
        if (foot_lift > 0.0) {
            return false;
        }
        const long k = timeline.stride_index(side, t);
        return (foothold(side, k + 1) - foothold(side, k)).norm() == 0.0;
    };

    // Vertical bounce and lateral sway are phased against the left
    // mid-stance. Walking vaults over the stance leg (apex at mid-stance);
    // airborne movements compress at mid-stance.
    const double t_lms = 0.5 * duty * period;
    const double bounce_freq = preset.legs_in_phase ? 1.0 : 2.0;
    const double bounce_sign = (preset.legs_in_phase || duty < 0.5) ? -1.0 : 1.0;

    TrialData trial;
    trial.meta.preset = preset.name;
    trial.meta.group = movement_group(preset.name);
    trial.meta.seed = seed;
    trial.meta.sample_rate = sample_rate;
    trial.dims = dims;
    trial.floor_z = floor_z;
    trial.time.resize(frames);
    trial.frames.resize(frames);
    trial.truth.resize(frames);
    trial.truth_angles.resize(frames);

    for (std::size_t k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) * dt;
        trial.time[k] = t;

        const double phi = heading(t);
        const double cycle = 2.0 * kPi * (t - t_lms) / period;
        const Eigen::Vector2d normal(-std::sin(phi), std::cos(phi));
        const double sway = preset.legs_in_phase ? 0.0 : preset.lateral_sway_m * std::cos(cycle);
        const double roll = preset.legs_in_phase ? 0.0 : preset.pelvis_roll_rad * std::sin(cycle);
        const double z = preset.pelvis_height_m +
                         bounce_sign * preset.pelvis_osc_m * std::cos(bounce_freq * cycle);

        // Grid indices line up with frame times exactly; path.at() does no
        // interpolation here.
        const Eigen::Vector2d base = path.at(t);
        PoseSnapshot& pose = trial.truth[k];
        pose.mid_pelvis_pos = {base.x() + sway * normal.x(), base.y() + sway * normal.y(),
                               floor_z + z};
        pose.pelvis_ori = SegmentOrientation(Eigen::Matrix3d(rot_z(phi) * rot_x(roll)));

        JointAngleFrame& angles = trial.truth_angles[k];
        for (const Side side : {Side::Left, Side::Right}) {
            pose.ankle_pos(side) = ankle_at(side, t);
            const Eigen::Vector3d hip = hip_position(pose, dims, side);
            const detail::LegPose leg =
                detail::leg_ik(hip, pose.ankle_pos(side), pose.pelvis_ori.x_axis(),
                               dims.thigh(side), dims.shank(side), to_string(preset.name));
            if (leg.knee_angle > rom.max_rad - 1e-9 || leg.knee_angle < rom.min_rad - 1e-9) {
                throw InvalidPreset(std::string(to_string(preset.name)) +
                                    ": knee angle " + std::to_string(rad_to_deg(leg.knee_angle)) +
                                    " deg outside the allowed range");
            }
            pose.shank_ori(side) = leg.shank;
            const Eigen::Matrix3d hip_rel =
                pose.pelvis_ori.matrix().transpose() * leg.thigh.matrix();
            if (side == Side::Left) {
                angles.hip_left = euler_yxz(hip_rel);
                angles.knee_left = leg.knee_angle;
            } else {
                angles.hip_right = euler_yxz(hip_rel);
                angles.knee_right = leg.knee_angle;
            }
        }

        FrameInput& frame = trial.frames[k];
        frame.dt = dt;
        frame.floor_z = floor_z;
        frame.contacts.left = in_contact(Side::Left, t) &&
                              std::abs(pose.left_ankle_pos.z() - floor_z) <= 1e-9;
        frame.contacts.right = in_contact(Side::Right, t) &&
                               std::abs(pose.right_ankle_pos.z() - floor_z) <= 1e-9;
    }
    return trial;
}

/// Derives the sensor streams the filter consumes from the stored truth:
/// world-frame accelerations by second-order central differences of the truth
/// positions (frame k stores the acceleration over the step arriving at k)
/// plus white noise, orientations copied (optionally perturbed), and
/// per-frame pelvis-to-ankle distances plus white noise.
///
/// Unit noise draws are scaled by the sigmas afterwards, in a fixed per-frame
/// order, so trials with the same seed share the same underlying noise across
/// different sigma settings.
inline TrialData derive_sensor_streams(const TrialData& truth_trial, const SensorNoise& noise,
                                       std::uint64_t seed) {
    TrialData trial = truth_trial;
    trial.meta.seed = seed;
    trial.meta.dist_sigma = noise.dist_sigma;
    trial.meta.accel_sigma = noise.accel_sigma;
    trial.meta.orientation_sigma = noise.orientation_sigma;

    const std::size_t n = trial.frame_count();
    if (n < 3) {
        throw InvalidPreset("trial too short to differentiate");
    }
    const double dt = trial.frames[0].dt;

    // Central difference at the step's departure frame k-1. Per step,
    // p_k = p_{k-1} + v_{k-1} dt + a dt^2/2 holds exactly when v_{k-1} is the
    // central-difference velocity, and the two-step form
    // p_k = 2 p_{k-1} - p_{k-2} + a dt^2 reproduces the truth to rounding.
    // Endpoints borrow the nearest interior frame.
    const auto step_accel = [&](std::size_t k, const auto& member) -> Eigen::Vector3d {
        const std::size_t depart = k > 0 ? k - 1 : 0;
        const std::size_t i = std::clamp<std::size_t>(depart, 1, n - 2);
        const Eigen::Vector3d& prev = trial.truth[i - 1].*member;
        const Eigen::Vector3d& cur = trial.truth[i].*member;
        const Eigen::Vector3d& next = trial.truth[i + 1].*member;
        return (next - 2.0 * cur + prev) / (dt * dt);
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit;
    const auto draw3 = [&]() -> Eigen::Vector3d {
        const double a = unit(rng);
        const double b = unit(rng);
        const double c = unit(rng);
        return {a, b, c};
    };
    const auto perturb = [&](const SegmentOrientation& ori) -> SegmentOrientation {
        const Eigen::Vector3d d = noise.orientation_sigma * draw3();
        const double angle = d.norm();
        if (angle == 0.0) {
            return ori;
        }
        const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, d / angle));
        return SegmentOrientation(Eigen::Quaterniond(ori.quaternion() * q));
    };

    for (std::size_t k = 0; k < n; ++k) {
        FrameInput& frame = trial.frames[k];
        const PoseSnapshot& pose = trial.truth[k];

        frame.accel_mp =
            step_accel(k, &PoseSnapshot::mid_pelvis_pos) + noise.accel_sigma * draw3();
        frame.accel_la =
            step_accel(k, &PoseSnapshot::left_ankle_pos) + noise.accel_sigma * draw3();
        frame.accel_ra =
            step_accel(k, &PoseSnapshot::right_ankle_pos) + noise.accel_sigma * draw3();

        if (noise.orientation_sigma > 0.0) {
            frame.pelvis_ori = perturb(pose.pelvis_ori);
            frame.left_shank_ori = perturb(pose.left_shank_ori);
            frame.right_shank_ori = perturb(pose.right_shank_ori);
        } else {
            frame.pelvis_ori = pose.pelvis_ori;
            frame.left_shank_ori = pose.left_shank_ori;
            frame.right_shank_ori = pose.right_shank_ori;
        }

        for (const Side side : {Side::Left, Side::Right}) {
            const double d_true = (pose.ankle_pos(side) - pose.mid_pelvis_pos).norm();
            const double d = std::max(0.0, d_true + noise.dist_sigma * unit(rng));
            DistanceMeasurement meas{side, d, noise.dist_sigma};
            if (side == Side::Left) {
                frame.dist_left = meas;
            } else {
                frame.dist_right = meas;
            }
        }
    }
    return trial;
}

}  // namespace ckfdist
