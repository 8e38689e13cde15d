#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "ckfdist/simulator.hpp"

namespace ckfdist {

inline constexpr std::string_view kTrialMagic = "ckfdist-trial";
inline constexpr std::string_view kTrajectoryMagic = "ckfdist-trajectory";
inline constexpr std::string_view kFormatVersion = "v1";

/// An estimated (or reference) trajectory: tracked points plus the segment
/// orientations that accompanied them. Carries the body dimensions so joint
/// angles can be recomputed from the poses alone.
struct TrajectoryData {
    double sample_rate = 100.0;
    BodyDimensions dims;
    std::vector<double> time;
    std::vector<PoseSnapshot> poses;
};

namespace detail {

// Shortest round-trip formatting: the decimal string reparses to the exact
// same double, which is what makes save/load bit-lossless and sweeps
// byte-reproducible.
inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline void append_number(std::string& out, std::uint64_t v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline void append_vec3(std::string& out, const Eigen::Vector3d& v) {
    append_number(out, v.x());
    out.push_back(' ');
    append_number(out, v.y());
    out.push_back(' ');
    append_number(out, v.z());
}

inline void append_quat(std::string& out, const Eigen::Quaterniond& q) {
    append_number(out, q.w());
    out.push_back(' ');
    append_number(out, q.x());
    out.push_back(' ');
    append_number(out, q.y());
    out.push_back(' ');
    append_number(out, q.z());
}

inline void append_orientations(std::string& out, const SegmentOrientation& pelvis,
                                const SegmentOrientation& lshank,
                                const SegmentOrientation& rshank) {
    append_quat(out, pelvis.quaternion());
    out.push_back(' ');
    append_quat(out, lshank.quaternion());
    out.push_back(' ');
    append_quat(out, rshank.quaternion());
}

[[noreturn]] inline void schema_fail(std::size_t line_no, const std::string& what) {
    throw SchemaError("line " + std::to_string(line_no) + ": " + what);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') {
            ++j;
        }
        if (j > i) {
            out.push_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        schema_fail(line_no, "bad number '" + std::string(tok) + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(std::string_view tok, std::size_t line_no) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        schema_fail(line_no, "bad integer '" + std::string(tok) + "'");
    }
    return v;
}

inline Eigen::Quaterniond parse_quat(const std::vector<std::string_view>& toks, std::size_t base,
                                     std::size_t line_no) {
    const double w = parse_double(toks[base], line_no);
    const double x = parse_double(toks[base + 1], line_no);
    const double y = parse_double(toks[base + 2], line_no);
    const double z = parse_double(toks[base + 3], line_no);
    const Eigen::Quaterniond q(w, x, y, z);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
        schema_fail(line_no, "quaternion is not unit norm");
    }
    return q;
}

/// Line-oriented reader over a whole file, tracking line numbers for
/// diagnostics. Trailing '\r' is tolerated.
class LineReader {
public:
    explicit LineReader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw SchemaError("cannot open '" + path + "'");
        }
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            lines_.push_back(line);
        }
    }

    bool done() const { return next_ >= lines_.size(); }
    std::size_t line_no() const { return next_; }  // 1-based number of the line just read

    std::string_view next(const char* expectation) {
        if (done()) {
            schema_fail(lines_.size() + 1,
                        std::string("unexpected end of file, expected ") + expectation);
        }
        return lines_[next_++];
    }

private:
    std::string path_;
    std::vector<std::string> lines_;
    std::size_t next_ = 0;
};

inline void check_header(LineReader& reader, std::string_view magic) {
    const std::string_view line = reader.next("format header");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != magic) {
        schema_fail(1, "not a '" + std::string(magic) + "' file");
    }
    if (toks[1] != kFormatVersion) {
        throw VersionMismatch("unsupported " + std::string(magic) + " version '" +
                              std::string(toks[1]) + "' (supported: " +
                              std::string(kFormatVersion) + ")");
    }
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw SchemaError("cannot open '" + path + "' for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw SchemaError("short write to '" + path + "'");
    }
}

}  // namespace detail

inline void save_trial(const TrialData& trial, const std::string& path) {
    const std::size_t n = trial.frame_count();
    std::string out;
    out.reserve(n * 360 + 512);

    out.append(kTrialMagic).append(" ").append(kFormatVersion).push_back('\n');
    out.append("[meta]\n");
    const auto meta_num = [&](const char* key, double v) {
        out.append(key).append(" = ");
        detail::append_number(out, v);
        out.push_back('\n');
    };
    out.append("preset = ").append(to_string(trial.meta.preset)).push_back('\n');
    out.append("group = ").push_back(trial.meta.group);
    out.push_back('\n');
    out.append("seed = ");
    detail::append_number(out, trial.meta.seed);
    out.push_back('\n');
    meta_num("sample_rate", trial.meta.sample_rate);
    out.append("frames = ");
    detail::append_number(out, static_cast<std::uint64_t>(n));
    out.push_back('\n');
    meta_num("sigma_dist", trial.meta.dist_sigma);
    meta_num("sigma_accel", trial.meta.accel_sigma);
    meta_num("sigma_orientation", trial.meta.orientation_sigma);
    meta_num("floor_z", trial.floor_z);
    meta_num("pelvis_width", trial.dims.pelvis_width);
    meta_num("thigh_left", trial.dims.thigh_length_left);
    meta_num("thigh_right", trial.dims.thigh_length_right);
    meta_num("shank_left", trial.dims.shank_length_left);
    meta_num("shank_right", trial.dims.shank_length_right);

    out.append("[time]\n");
    for (std::size_t k = 0; k < n; ++k) {
        detail::append_number(out, trial.time[k]);
        out.push_back('\n');
    }
    out.append("[orientations]\n");
    for (const FrameInput& f : trial.frames) {
        detail::append_orientations(out, f.pelvis_ori, f.left_shank_ori, f.right_shank_ori);
        out.push_back('\n');
    }
    out.append("[accelerations]\n");
    for (const FrameInput& f : trial.frames) {
        detail::append_vec3(out, f.accel_mp);
        out.push_back(' ');
        detail::append_vec3(out, f.accel_la);
        out.push_back(' ');
        detail::append_vec3(out, f.accel_ra);
        out.push_back('\n');
    }
    out.append("[contacts]\n");
    for (const FrameInput& f : trial.frames) {
        out.push_back(f.contacts.left ? '1' : '0');
        out.push_back(' ');
        out.push_back(f.contacts.right ? '1' : '0');
        out.push_back('\n');
    }
    out.append("[distances]\n");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const FrameInput& f : trial.frames) {
        detail::append_number(out, f.dist_left ? f.dist_left->value : nan);
        out.push_back(' ');
        detail::append_number(out, f.dist_right ? f.dist_right->value : nan);
        out.push_back('\n');
    }
    out.append("[truth_positions]\n");
    for (const PoseSnapshot& p : trial.truth) {
        detail::append_vec3(out, p.mid_pelvis_pos);
        out.push_back(' ');
        detail::append_vec3(out, p.left_ankle_pos);
        out.push_back(' ');
        detail::append_vec3(out, p.right_ankle_pos);
        out.push_back('\n');
    }
    out.append("[truth_orientations]\n");
    for (const PoseSnapshot& p : trial.truth) {
        detail::append_orientations(out, p.pelvis_ori, p.left_shank_ori, p.right_shank_ori);
        out.push_back('\n');
    }
    out.append("[truth_angles]\n");
    for (const JointAngleFrame& a : trial.truth_angles) {
        detail::append_vec3(out, a.hip_left);
        out.push_back(' ');
        detail::append_vec3(out, a.hip_right);
        out.push_back(' ');
        detail::append_number(out, a.knee_left);
        out.push_back(' ');
        detail::append_number(out, a.knee_right);
        out.push_back('\n');
    }

    detail::write_file(path, out);
}

inline TrialData load_trial(const std::string& path) {
    detail::LineReader reader(path);
    detail::check_header(reader, kTrialMagic);

    if (reader.next("[meta]") != "[meta]") {
        detail::schema_fail(reader.line_no(), "expected [meta]");
    }

    TrialData trial;
    std::size_t frames = 0;
    bool have_frames = false;
    double sigma_dist = 0.0;

    // Meta runs until the first per-frame section header.
    std::string_view line;
    while (true) {
        line = reader.next("meta entry or section header");
        if (!line.empty() && line.front() == '[') {
            break;
        }
        const auto toks = detail::split_ws(line);
        if (toks.size() != 3 || toks[1] != "=") {
            detail::schema_fail(reader.line_no(), "expected 'key = value'");
        }
        const std::string_view key = toks[0];
        const std::string_view val = toks[2];
        const std::size_t ln = reader.line_no();
        if (key == "preset") {
            const auto p = preset_from_string(val);
            if (!p) {
                detail::schema_fail(ln, "unknown preset '" + std::string(val) + "'");
            }
            trial.meta.preset = *p;
        } else if (key == "group") {
            if (val != "F" && val != "D") {
                detail::schema_fail(ln, "group must be F or D");
            }
            trial.meta.group = val[0];
        } else if (key == "seed") {
            trial.meta.seed = detail::parse_u64(val, ln);
        } else if (key == "sample_rate") {
            trial.meta.sample_rate = detail::parse_double(val, ln);
        } else if (key == "frames") {
            frames = detail::parse_u64(val, ln);
            have_frames = true;
        } else if (key == "sigma_dist") {
            sigma_dist = detail::parse_double(val, ln);
            trial.meta.dist_sigma = sigma_dist;
        } else if (key == "sigma_accel") {
            trial.meta.accel_sigma = detail::parse_double(val, ln);
        } else if (key == "sigma_orientation") {
            trial.meta.orientation_sigma = detail::parse_double(val, ln);
        } else if (key == "floor_z") {
            trial.floor_z = detail::parse_double(val, ln);
        } else if (key == "pelvis_width") {
            trial.dims.pelvis_width = detail::parse_double(val, ln);
        } else if (key == "thigh_left") {
            trial.dims.thigh_length_left = detail::parse_double(val, ln);
        } else if (key == "thigh_right") {
            trial.dims.thigh_length_right = detail::parse_double(val, ln);
        } else if (key == "shank_left") {
            trial.dims.shank_length_left = detail::parse_double(val, ln);
        } else if (key == "shank_right") {
            trial.dims.shank_length_right = detail::parse_double(val, ln);
        } else {
            detail::schema_fail(ln, "unknown meta key '" + std::string(key) + "'");
        }
    }
    if (!have_frames || frames < 1) {
        detail::schema_fail(reader.line_no(), "meta is missing a positive 'frames' count");
    }
    if (!trial.dims.valid()) {
        detail::schema_fail(reader.line_no(), "meta dimensions must be strictly positive");
    }

    trial.time.resize(frames);
    trial.frames.assign(frames, FrameInput{});
    trial.truth.assign(frames, PoseSnapshot{});
    trial.truth_angles.assign(frames, JointAngleFrame{});
    const double dt = 1.0 / trial.meta.sample_rate;
    for (FrameInput& f : trial.frames) {
        f.dt = dt;
        f.floor_z = trial.floor_z;
    }

    enum SectionBit {
        kTime = 1,
        kOrient = 2,
        kAccel = 4,
        kContacts = 8,
        kDistances = 16,
        kTruthPos = 32,
        kTruthOrient = 64,
        kTruthAngles = 128,
    };
    int seen = 0;

    const auto read_orientation_rows = [&](const auto& assign) {
        for (std::size_t k = 0; k < frames; ++k) {
            const auto toks = detail::split_ws(reader.next("orientation row"));
            const std::size_t ln = reader.line_no();
            if (toks.size() != 12) {
                detail::schema_fail(ln, "expected 12 quaternion components");
            }
            assign(k, detail::parse_quat(toks, 0, ln), detail::parse_quat(toks, 4, ln),
                   detail::parse_quat(toks, 8, ln));
        }
    };

    while (true) {
        const std::string section(line);
        if (section == "[time]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("time row"));
                if (toks.size() != 1) {
                    detail::schema_fail(reader.line_no(), "expected 1 time value");
                }
                trial.time[k] = detail::parse_double(toks[0], reader.line_no());
            }
            seen |= kTime;
        } else if (section == "[orientations]") {
            read_orientation_rows([&](std::size_t k, const Eigen::Quaterniond& qp,
                                      const Eigen::Quaterniond& ql, const Eigen::Quaterniond& qr) {
                trial.frames[k].pelvis_ori = SegmentOrientation::from_unit_quaternion(qp);
                trial.frames[k].left_shank_ori = SegmentOrientation::from_unit_quaternion(ql);
                trial.frames[k].right_shank_ori = SegmentOrientation::from_unit_quaternion(qr);
            });
            seen |= kOrient;
        } else if (section == "[accelerations]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("acceleration row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 9) {
                    detail::schema_fail(ln, "expected 9 acceleration components");
                }
                for (int j = 0; j < 3; ++j) {
                    Eigen::Vector3d v(detail::parse_double(toks[3 * j], ln),
                                      detail::parse_double(toks[3 * j + 1], ln),
                                      detail::parse_double(toks[3 * j + 2], ln));
                    if (j == 0) {
                        trial.frames[k].accel_mp = v;
                    } else if (j == 1) {
                        trial.frames[k].accel_la = v;
                    } else {
                        trial.frames[k].accel_ra = v;
                    }
                }
            }
            seen |= kAccel;
        } else if (section == "[contacts]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("contact row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 2) {
                    detail::schema_fail(ln, "expected 2 contact flags");
                }
                for (int j = 0; j < 2; ++j) {
                    if (toks[j] != "0" && toks[j] != "1") {
                        detail::schema_fail(ln, "contact flags must be 0 or 1");
                    }
                }
                trial.frames[k].contacts.left = toks[0] == "1";
                trial.frames[k].contacts.right = toks[1] == "1";
            }
            seen |= kContacts;
        } else if (section == "[distances]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("distance row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 2) {
                    detail::schema_fail(ln, "expected 2 distance values");
                }
                for (int j = 0; j < 2; ++j) {
                    const double v = detail::parse_double(toks[j], ln);
                    const Side side = j == 0 ? Side::Left : Side::Right;
                    auto& slot = j == 0 ? trial.frames[k].dist_left : trial.frames[k].dist_right;
                    if (std::isnan(v)) {
                        slot.reset();
                    } else {
                        slot = DistanceMeasurement{side, v, sigma_dist};
                    }
                }
            }
            seen |= kDistances;
        } else if (section == "[truth_positions]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("truth position row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 9) {
                    detail::schema_fail(ln, "expected 9 position components");
                }
                const auto vec = [&](std::size_t base) {
                    return Eigen::Vector3d(detail::parse_double(toks[base], ln),
                                           detail::parse_double(toks[base + 1], ln),
                                           detail::parse_double(toks[base + 2], ln));
                };
                trial.truth[k].mid_pelvis_pos = vec(0);
                trial.truth[k].left_ankle_pos = vec(3);
                trial.truth[k].right_ankle_pos = vec(6);
            }
            seen |= kTruthPos;
        } else if (section == "[truth_orientations]") {
            read_orientation_rows([&](std::size_t k, const Eigen::Quaterniond& qp,
                                      const Eigen::Quaterniond& ql, const Eigen::Quaterniond& qr) {
                trial.truth[k].pelvis_ori = SegmentOrientation::from_unit_quaternion(qp);
                trial.truth[k].left_shank_ori = SegmentOrientation::from_unit_quaternion(ql);
                trial.truth[k].right_shank_ori = SegmentOrientation::from_unit_quaternion(qr);
            });
            seen |= kTruthOrient;
        } else if (section == "[truth_angles]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("truth angle row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 8) {
                    detail::schema_fail(ln, "expected 8 angle values");
                }
                JointAngleFrame& a = trial.truth_angles[k];
                a.hip_left = {detail::parse_double(toks[0], ln),
                              detail::parse_double(toks[1], ln),
                              detail::parse_double(toks[2], ln)};
                a.hip_right = {detail::parse_double(toks[3], ln),
                               detail::parse_double(toks[4], ln),
                               detail::parse_double(toks[5], ln)};
                a.knee_left = detail::parse_double(toks[6], ln);
                a.knee_right = detail::parse_double(toks[7], ln);
            }
            seen |= kTruthAngles;
        } else {
            detail::schema_fail(reader.line_no(), "unknown section '" + section + "'");
        }

        if (reader.done()) {
            break;
        }
        line = reader.next("section header");
        if (line.empty() && reader.done()) {
            break;
        }
    }

    const std::pair<int, const char*> required[] = {
        {kTime, "[time]"},           {kOrient, "[orientations]"},
        {kAccel, "[accelerations]"}, {kContacts, "[contacts]"},
        {kDistances, "[distances]"}, {kTruthPos, "[truth_positions]"},
        {kTruthOrient, "[truth_orientations]"}, {kTruthAngles, "[truth_angles]"},
    };
    for (const auto& [bit, name] : required) {
        if (!(seen & bit)) {
            throw SchemaError(std::string("missing section ") + name);
        }
    }
    return trial;
}

inline void save_trajectory(const TrajectoryData& traj, const std::string& path) {
    const std::size_t n = traj.poses.size();
    std::string out;
    out.reserve(n * 200 + 128);

    out.append(kTrajectoryMagic).append(" ").append(kFormatVersion).push_back('\n');
    out.append("[meta]\n");
    out.append("sample_rate = ");
    detail::append_number(out, traj.sample_rate);
    out.push_back('\n');
    out.append("frames = ");
    detail::append_number(out, static_cast<std::uint64_t>(n));
    out.push_back('\n');
    const auto meta_num = [&](const char* key, double v) {
        out.append(key).append(" = ");
        detail::append_number(out, v);
        out.push_back('\n');
    };
    meta_num("pelvis_width", traj.dims.pelvis_width);
    meta_num("thigh_left", traj.dims.thigh_length_left);
    meta_num("thigh_right", traj.dims.thigh_length_right);
    meta_num("shank_left", traj.dims.shank_length_left);
    meta_num("shank_right", traj.dims.shank_length_right);

    out.append("[time]\n");
    for (std::size_t k = 0; k < n; ++k) {
        detail::append_number(out, traj.time[k]);
        out.push_back('\n');
    }
    out.append("[positions]\n");
    for (const PoseSnapshot& p : traj.poses) {
        detail::append_vec3(out, p.mid_pelvis_pos);
        out.push_back(' ');
        detail::append_vec3(out, p.left_ankle_pos);
        out.push_back(' ');
        detail::append_vec3(out, p.right_ankle_pos);
        out.push_back('\n');
    }
    out.append("[orientations]\n");
    for (const PoseSnapshot& p : traj.poses) {
        detail::append_orientations(out, p.pelvis_ori, p.left_shank_ori, p.right_shank_ori);
        out.push_back('\n');
    }

    detail::write_file(path, out);
}

inline TrajectoryData load_trajectory(const std::string& path) {
    detail::LineReader reader(path);
    detail::check_header(reader, kTrajectoryMagic);

    if (reader.next("[meta]") != "[meta]") {
        detail::schema_fail(reader.line_no(), "expected [meta]");
    }

    TrajectoryData traj;
    std::size_t frames = 0;
    bool have_frames = false;
    std::string_view line;
    while (true) {
        line = reader.next("meta entry or section header");
        if (!line.empty() && line.front() == '[') {
            break;
        }
        const auto toks = detail::split_ws(line);
        if (toks.size() != 3 || toks[1] != "=") {
            detail::schema_fail(reader.line_no(), "expected 'key = value'");
        }
        const std::size_t ln = reader.line_no();
        if (toks[0] == "sample_rate") {
            traj.sample_rate = detail::parse_double(toks[2], ln);
        } else if (toks[0] == "frames") {
            frames = detail::parse_u64(toks[2], ln);
            have_frames = true;
        } else if (toks[0] == "pelvis_width") {
            traj.dims.pelvis_width = detail::parse_double(toks[2], ln);
        } else if (toks[0] == "thigh_left") {
            traj.dims.thigh_length_left = detail::parse_double(toks[2], ln);
        } else if (toks[0] == "thigh_right") {
            traj.dims.thigh_length_right = detail::parse_double(toks[2], ln);
        } else if (toks[0] == "shank_left") {
            traj.dims.shank_length_left = detail::parse_double(toks[2], ln);
        } else if (toks[0] == "shank_right") {
            traj.dims.shank_length_right = detail::parse_double(toks[2], ln);
        } else {
            detail::schema_fail(ln, "unknown meta key '" + std::string(toks[0]) + "'");
        }
    }
    if (!have_frames || frames < 1) {
        detail::schema_fail(reader.line_no(), "meta is missing a positive 'frames' count");
    }

    traj.time.resize(frames);
    traj.poses.assign(frames, PoseSnapshot{});

    int seen = 0;
    while (true) {
        const std::string section(line);
        if (section == "[time]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("time row"));
                if (toks.size() != 1) {
                    detail::schema_fail(reader.line_no(), "expected 1 time value");
                }
                traj.time[k] = detail::parse_double(toks[0], reader.line_no());
            }
            seen |= 1;
        } else if (section == "[positions]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("position row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 9) {
                    detail::schema_fail(ln, "expected 9 position components");
                }
                const auto vec = [&](std::size_t base) {
                    return Eigen::Vector3d(detail::parse_double(toks[base], ln),
                                           detail::parse_double(toks[base + 1], ln),
                                           detail::parse_double(toks[base + 2], ln));
                };
                traj.poses[k].mid_pelvis_pos = vec(0);
                traj.poses[k].left_ankle_pos = vec(3);
                traj.poses[k].right_ankle_pos = vec(6);
            }
            seen |= 2;
        } else if (section == "[orientations]") {
            for (std::size_t k = 0; k < frames; ++k) {
                const auto toks = detail::split_ws(reader.next("orientation row"));
                const std::size_t ln = reader.line_no();
                if (toks.size() != 12) {
                    detail::schema_fail(ln, "expected 12 quaternion components");
                }
                traj.poses[k].pelvis_ori =
                    SegmentOrientation::from_unit_quaternion(detail::parse_quat(toks, 0, ln));
                traj.poses[k].left_shank_ori =
                    SegmentOrientation::from_unit_quaternion(detail::parse_quat(toks, 4, ln));
                traj.poses[k].right_shank_ori =
                    SegmentOrientation::from_unit_quaternion(detail::parse_quat(toks, 8, ln));
            }
            seen |= 4;
        } else {
            detail::schema_fail(reader.line_no(), "unknown section '" + section + "'");
        }
        if (reader.done()) {
            break;
        }
        line = reader.next("section header");
        if (line.empty() && reader.done()) {
            break;
        }
    }
    if (seen != 7) {
        throw SchemaError("missing section: trajectory needs [time], [positions], and "
                          "[orientations]");
    }
    return traj;
}

}  // namespace ckfdist
