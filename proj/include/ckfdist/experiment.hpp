#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ckfdist/metrics.hpp"
#include "ckfdist/trial_io.hpp"

namespace ckfdist {

/// The default sweep grid on the distance-noise axis, in meters.
inline std::vector<double> default_sigma_sweep() {
    return {0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.15, 0.2};
}

struct InitialVariances {
    double position = 1e-4;  // positions seeded from the reference first frame
    double velocity = 1e-2;  // velocities seeded at zero
};

struct ExperimentConfig {
    std::vector<PresetName> presets{PresetName::Walk, PresetName::HighKnee};
    std::vector<FilterMode> modes{FilterMode::Distance, FilterMode::Baseline};
    std::vector<double> sigma_dist = default_sigma_sweep();
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    double sample_rate = 100.0;
    double sigma_accel = 0.02;
    double sigma_orientation = 0.0;
    double floor_z = 0.0;

    BodyDimensions dims;
    NoiseModel noise;
    RomLimits rom;
    ConstraintSettings constraint;
    InfeasiblePolicy policy = InfeasiblePolicy::Clamp;
    InitialVariances initial;
    std::optional<double> baseline_pelvis_height;  // above floor; default mean leg length

    int workers = 0;  // 0 picks hardware concurrency; CKFDIST_WORKERS overrides

    void validate() const {
        if (presets.empty() || modes.empty() || seeds.empty() || sigma_dist.empty()) {
            throw SchemaError("config needs at least one preset, mode, seed, and sigma");
        }
        for (double s : sigma_dist) {
            if (!(s >= 0.0)) {
                throw SchemaError("sigma_dist values must be >= 0");
            }
        }
        if (!(sample_rate > 0.0)) {
            throw SchemaError("sample_rate must be > 0");
        }
        if (!(sigma_accel >= 0.0) || !(sigma_orientation >= 0.0)) {
            throw SchemaError("sensor sigmas must be >= 0");
        }
        if (!dims.valid()) {
            throw SchemaError("body dimensions must be strictly positive");
        }
        if (!(initial.position > 0.0) || !(initial.velocity > 0.0)) {
            throw SchemaError("initial variances must be > 0");
        }
        if (workers < 0) {
            throw SchemaError("workers must be >= 0");
        }
    }
};

/// Per-trial result line. Metric slots hold NaN when unavailable (failed cell,
/// or a degenerate series where the correlation is undefined).
struct ResultRow {
    PresetName preset = PresetName::Walk;
    char group = 'F';
    FilterMode mode = FilterMode::Distance;
    double sigma_dist = 0.0;
    std::uint64_t seed = 0;

    std::array<double, JointAngleTable::kSeriesCount> rmse_deg{};
    std::array<double, JointAngleTable::kSeriesCount> cc{};
    double ttd_dev_left_pct = 0.0;
    double ttd_dev_right_pct = 0.0;

    // Wall-clock filter time. Reported separately from the metric table so
    // result files stay byte-reproducible.
    double runtime_s = 0.0;

    std::string error;  // nonempty marks a failed cell

    bool failed() const { return !error.empty(); }
};

/// One aggregated statistic: a (cell, metric) pair averaged over seeds.
struct SummaryRow {
    PresetName preset = PresetName::Walk;
    char group = 'F';
    FilterMode mode = FilterMode::Distance;
    double sigma_dist = 0.0;
    std::string metric;
    int n = 0;  // finite samples that entered the mean
    double mean = 0.0;
    double stddev = 0.0;
};

struct TrialRunResult {
    ResultRow row;
    TrajectoryData estimate;
    JointAngleTable est_angles;
    JointAngleTable truth_angles;
};

inline FilterState initial_state(const TrialData& trial, const InitialVariances& initial) {
    if (trial.frame_count() == 0) {
        throw LengthMismatch("trial has no frames");
    }
    FilterState state;
    const PoseSnapshot& first = trial.truth.front();
    state.set_position(BodyPoint::MidPelvis, first.mid_pelvis_pos);
    state.set_position(BodyPoint::LeftAnkle, first.left_ankle_pos);
    state.set_position(BodyPoint::RightAnkle, first.right_ankle_pos);
    for (int i = 0; i < 9; ++i) {
        state.P(i, i) = initial.position;
        state.P(9 + i, 9 + i) = initial.velocity;
    }
    return state;
}

inline FilterParams make_filter_params(const ExperimentConfig& config, FilterMode mode) {
    FilterParams params;
    params.dims = config.dims;
    params.noise = config.noise;
    params.rom = config.rom;
    params.constraint = config.constraint;
    params.policy = config.policy;
    params.mode = mode;
    params.baseline_pelvis_height = config.baseline_pelvis_height;
    return params;
}

namespace detail {

inline constexpr std::size_t kSeries = JointAngleTable::kSeriesCount;

/// Metric column order used by both the per-trial table and the summary:
/// bias-removed RMSE and correlation per angle series, then the two
/// travelled-distance deviations.
inline std::vector<std::string> metric_names() {
    std::vector<std::string> names;
    names.reserve(2 * kSeries + 2);
    for (std::size_t i = 0; i < kSeries; ++i) {
        names.push_back(std::string("rmse_deg_") + JointAngleTable::series_name(static_cast<int>(i)));
    }
    for (std::size_t i = 0; i < kSeries; ++i) {
        names.push_back(std::string("cc_") + JointAngleTable::series_name(static_cast<int>(i)));
    }
    names.push_back("ttd_dev_pct_left");
    names.push_back("ttd_dev_pct_right");
    return names;
}

inline std::vector<double> metric_values(const ResultRow& row) {
    std::vector<double> v;
    v.reserve(2 * kSeries + 2);
    v.insert(v.end(), row.rmse_deg.begin(), row.rmse_deg.end());
    v.insert(v.end(), row.cc.begin(), row.cc.end());
    v.push_back(row.ttd_dev_left_pct);
    v.push_back(row.ttd_dev_right_pct);
    return v;
}

inline void fill_metrics_nan(ResultRow& row) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.rmse_deg.fill(nan);
    row.cc.fill(nan);
    row.ttd_dev_left_pct = nan;
    row.ttd_dev_right_pct = nan;
}

}  // namespace detail

/// Runs the filter over a trial and scores the estimate against the stored
/// reference. Positions come from the filter state; orientations are the
/// measured streams passed through unchanged.
inline TrialRunResult run_trial(const ExperimentConfig& config, FilterMode mode,
                                const TrialData& trial) {
    const std::size_t n = trial.frame_count();
    if (n == 0 || trial.frames.size() != n || trial.truth_angles.size() != n ||
        trial.time.size() != n) {
        throw LengthMismatch("trial sections disagree on frame count");
    }

    FilterParams params = make_filter_params(config, mode);
    params.dims = trial.dims;  // trial carries the dimensions it was built with

    TrialRunResult out;
    out.row.preset = trial.meta.preset;
    out.row.group = trial.meta.group;
    out.row.mode = mode;
    out.row.sigma_dist = trial.meta.dist_sigma;
    out.row.seed = trial.meta.seed;

    out.estimate.sample_rate = trial.meta.sample_rate;
    out.estimate.dims = trial.dims;
    out.estimate.time = trial.time;
    out.estimate.poses.assign(n, PoseSnapshot{});

    const auto record = [&](std::size_t k, const FilterState& state) {
        PoseSnapshot& pose = out.estimate.poses[k];
        pose.mid_pelvis_pos = state.position(BodyPoint::MidPelvis);
        pose.left_ankle_pos = state.position(BodyPoint::LeftAnkle);
        pose.right_ankle_pos = state.position(BodyPoint::RightAnkle);
        pose.pelvis_ori = trial.frames[k].pelvis_ori;
        pose.left_shank_ori = trial.frames[k].left_shank_ori;
        pose.right_shank_ori = trial.frames[k].right_shank_ori;
    };

    const auto t0 = std::chrono::steady_clock::now();
    FilterState state = initial_state(trial, config.initial);
    record(0, state);
    for (std::size_t k = 1; k < n; ++k) {
        try {
            state = step(state, trial.frames[k], params);
        } catch (const Error& e) {
            throw Error("frame " + std::to_string(k) + ": " + e.what());
        }
        record(k, state);
    }
    out.row.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    out.est_angles = joint_angles_from_poses(out.estimate.poses, trial.dims);
    out.truth_angles = joint_angle_table(trial.truth_angles);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < static_cast<int>(detail::kSeries); ++i) {
        const auto est = out.est_angles.series(i);
        const auto truth = out.truth_angles.series(i);
        out.row.rmse_deg[static_cast<std::size_t>(i)] = rad_to_deg(rmse_bias_removed(est, truth));
        try {
            out.row.cc[static_cast<std::size_t>(i)] = pearson_cc(est, truth);
        } catch (const DegenerateSeries&) {
            out.row.cc[static_cast<std::size_t>(i)] = nan;
        }
    }

    std::vector<Eigen::Vector3d> est_path(n), truth_path(n);
    for (const Side side : {Side::Left, Side::Right}) {
        for (std::size_t k = 0; k < n; ++k) {
            est_path[k] = out.estimate.poses[k].ankle_pos(side);
            truth_path[k] = trial.truth[k].ankle_pos(side);
        }
        double dev = nan;
        try {
            dev = ttd_deviation(est_path, truth_path);
        } catch (const ZeroTruthPath&) {
        }
        (side == Side::Left ? out.row.ttd_dev_left_pct : out.row.ttd_dev_right_pct) = dev;
    }

    return out;
}

/// One unit of sweep work.
struct SweepCell {
    PresetName preset = PresetName::Walk;
    FilterMode mode = FilterMode::Distance;
    double sigma_dist = 0.0;
    std::uint64_t seed = 0;
};

inline std::vector<SweepCell> enumerate_cells(const ExperimentConfig& config) {
    std::vector<SweepCell> cells;
    cells.reserve(config.presets.size() * config.modes.size() * config.sigma_dist.size() *
                  config.seeds.size());
    for (const PresetName preset : config.presets) {
        for (const FilterMode mode : config.modes) {
            for (const double sigma : config.sigma_dist) {
                for (const std::uint64_t seed : config.seeds) {
                    cells.push_back({preset, mode, sigma, seed});
                }
            }
        }
    }
    return cells;
}

inline TrialData make_trial(const ExperimentConfig& config, PresetName preset, double sigma_dist,
                            std::uint64_t seed) {
    const TrialData truth = generate_truth(MotionPreset::standard(preset), config.dims,
                                           config.sample_rate, seed, config.floor_z, config.rom);
    SensorNoise noise;
    noise.accel_sigma = config.sigma_accel;
    noise.orientation_sigma = config.sigma_orientation;
    noise.dist_sigma = sigma_dist;
    return derive_sensor_streams(truth, noise, seed);
}

/// Runs one sweep cell end to end. Failures are captured in the row rather
/// than thrown, so a sweep can continue past bad cells.
inline ResultRow run_cell(const ExperimentConfig& config, const SweepCell& cell) {
    ResultRow row;
    row.preset = cell.preset;
    row.group = movement_group(cell.preset);
    row.mode = cell.mode;
    row.sigma_dist = cell.sigma_dist;
    row.seed = cell.seed;
    try {
        const TrialData trial = make_trial(config, cell.preset, cell.sigma_dist, cell.seed);
        return run_trial(config, cell.mode, trial).row;
    } catch (const std::exception& e) {
        detail::fill_metrics_nan(row);
        std::string msg = e.what();
        for (char& c : msg) {
            if (c == ',' || c == '\n' || c == '\r') {
                c = ';';
            }
        }
        row.error = msg;
        return row;
    }
}

inline int resolve_workers(const ExperimentConfig& config) {
    int workers = config.workers;
    if (const char* env = std::getenv("CKFDIST_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 0 && v <= 1024) {
            workers = static_cast<int>(v);
        }
    }
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
    }
    return std::max(1, workers);
}

namespace detail {

inline std::tuple<std::string_view, std::string_view, double, std::uint64_t> row_key(
    const ResultRow& r) {
    return {to_string(r.preset), to_string(r.mode), r.sigma_dist, r.seed};
}

}  // namespace detail

struct SweepResult {
    std::vector<ResultRow> rows;       // sorted by (preset, mode, sigma, seed)
    std::vector<SummaryRow> summary;   // sorted by (preset, mode, sigma, metric order)
    int failed_cells = 0;
};

/// Aggregates per-trial rows into per-cell mean/stddev, one summary row per
/// metric. NaN samples (failed cells, undefined correlations) are skipped;
/// `n` records how many samples remained.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    const std::vector<std::string> names = detail::metric_names();
    std::vector<SummaryRow> summary;

    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].preset == rows[i].preset &&
               rows[j].mode == rows[i].mode && rows[j].sigma_dist == rows[i].sigma_dist) {
            ++j;
        }
        for (std::size_t m = 0; m < names.size(); ++m) {
            SummaryRow s;
            s.preset = rows[i].preset;
            s.group = rows[i].group;
            s.mode = rows[i].mode;
            s.sigma_dist = rows[i].sigma_dist;
            s.metric = names[m];

            double sum = 0.0;
            int n = 0;
            for (std::size_t k = i; k < j; ++k) {
                const double v = detail::metric_values(rows[k])[m];
                if (std::isfinite(v)) {
                    sum += v;
                    ++n;
                }
            }
            const double nan = std::numeric_limits<double>::quiet_NaN();
            s.n = n;
            s.mean = n > 0 ? sum / n : nan;
            if (n > 1) {
                double ss = 0.0;
                for (std::size_t k = i; k < j; ++k) {
                    const double v = detail::metric_values(rows[k])[m];
                    if (std::isfinite(v)) {
                        const double d = v - s.mean;
                        ss += d * d;
                    }
                }
                s.stddev = std::sqrt(ss / (n - 1));
            } else {
                s.stddev = n == 1 ? 0.0 : nan;
            }
            summary.push_back(std::move(s));
        }
        i = j;
    }
    return summary;
}

/// Runs every cell of the config's Cartesian product, in parallel up to the
/// resolved worker count. Rows are sorted by key afterwards, so the output is
/// independent of scheduling.
inline SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const std::vector<SweepCell> cells = enumerate_cells(config);
    std::vector<ResultRow> rows(cells.size());

    const int workers = std::min<int>(resolve_workers(config), static_cast<int>(cells.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            rows[i] = run_cell(config, cells[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) {
                        return;
                    }
                    rows[i] = run_cell(config, cells[i]);
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return detail::row_key(a) < detail::row_key(b);
    });

    SweepResult result;
    result.failed_cells = static_cast<int>(
        std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.failed(); }));
    result.summary = summarize(rows);
    result.rows = std::move(rows);
    return result;
}

inline std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string out = "preset,group,mode,sigma_dist,seed";
    for (const std::string& name : detail::metric_names()) {
        out.push_back(',');
        out.append(name);
    }
    out.append(",error\n");
    for (const ResultRow& r : rows) {
        out.append(to_string(r.preset));
        out.push_back(',');
        out.push_back(r.group);
        out.push_back(',');
        out.append(to_string(r.mode));
        out.push_back(',');
        detail::append_number(out, r.sigma_dist);
        out.push_back(',');
        detail::append_number(out, r.seed);
        for (const double v : detail::metric_values(r)) {
            out.push_back(',');
            detail::append_number(out, v);
        }
        out.push_back(',');
        out.append(r.error);
        out.push_back('\n');
    }
    return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "preset,group,mode,sigma_dist,metric,n,mean,stddev\n";
    for (const SummaryRow& s : rows) {
        out.append(to_string(s.preset));
        out.push_back(',');
        out.push_back(s.group);
        out.push_back(',');
        out.append(to_string(s.mode));
        out.push_back(',');
        detail::append_number(out, s.sigma_dist);
        out.push_back(',');
        out.append(s.metric);
        out.push_back(',');
        detail::append_number(out, static_cast<std::uint64_t>(s.n));
        out.push_back(',');
        detail::append_number(out, s.mean);
        out.push_back(',');
        detail::append_number(out, s.stddev);
        out.push_back('\n');
    }
    return out;
}

inline std::string timings_csv(const std::vector<ResultRow>& rows) {
    std::string out = "preset,group,mode,sigma_dist,seed,runtime_s\n";
    for (const ResultRow& r : rows) {
        out.append(to_string(r.preset));
        out.push_back(',');
        out.push_back(r.group);
        out.push_back(',');
        out.append(to_string(r.mode));
        out.push_back(',');
        detail::append_number(out, r.sigma_dist);
        out.push_back(',');
        detail::append_number(out, r.seed);
        out.push_back(',');
        detail::append_number(out, r.runtime_s);
        out.push_back('\n');
    }
    return out;
}

}  // namespace ckfdist
