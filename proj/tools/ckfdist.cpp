// Command-line front end: simulate trials, run the filter, sweep the noise
// grid, and score trajectory files against each other.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ckfdist/ckfdist.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

ckfdist::PresetName parse_preset(const std::string& name) {
    const auto p = ckfdist::preset_from_string(name);
    if (!p) {
        std::string valid;
        for (const ckfdist::PresetName q : ckfdist::all_presets()) {
            if (!valid.empty()) {
                valid += ", ";
            }
            valid += ckfdist::to_string(q);
        }
        throw ckfdist::SchemaError("unknown preset '" + name + "' (valid: " + valid + ")");
    }
    return *p;
}

ckfdist::FilterMode parse_mode(const std::string& name) {
    if (name == "distance") {
        return ckfdist::FilterMode::Distance;
    }
    if (name == "baseline") {
        return ckfdist::FilterMode::Baseline;
    }
    throw ckfdist::SchemaError("unknown mode '" + name + "' (valid: distance, baseline)");
}

ckfdist::InfeasiblePolicy parse_policy(const std::string& name) {
    if (name == "clamp") {
        return ckfdist::InfeasiblePolicy::Clamp;
    }
    if (name == "reject") {
        return ckfdist::InfeasiblePolicy::Reject;
    }
    throw ckfdist::SchemaError("unknown policy '" + name + "' (valid: clamp, reject)");
}

double as_number(const json& v, const char* key) {
    if (!v.is_number()) {
        throw ckfdist::SchemaError(std::string("config key '") + key + "' must be a number");
    }
    return v.get<double>();
}

// Strict loader: every key must be known, so typos fail loudly instead of
// silently running with defaults.
ckfdist::ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ckfdist::SchemaError("cannot open config '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ckfdist::SchemaError("config '" + path + "': " + e.what());
    }
    if (!j.is_object()) {
        throw ckfdist::SchemaError("config '" + path + "' must be a JSON object");
    }

    ckfdist::ExperimentConfig cfg;

    // subject_height scales all dimensions; explicit dimension keys override
    // it, so it is applied first regardless of key order in the file.
    if (const auto it = j.find("subject_height"); it != j.end()) {
        cfg.dims = ckfdist::BodyDimensions::from_height(as_number(*it, "subject_height"));
    }

    for (const auto& [key, value] : j.items()) {
        if (key == "subject_height") {
            continue;
        } else if (key == "presets") {
            cfg.presets.clear();
            for (const auto& v : value) {
                cfg.presets.push_back(parse_preset(v.get<std::string>()));
            }
        } else if (key == "modes") {
            cfg.modes.clear();
            for (const auto& v : value) {
                cfg.modes.push_back(parse_mode(v.get<std::string>()));
            }
        } else if (key == "sigma_dist") {
            cfg.sigma_dist.clear();
            for (const auto& v : value) {
                cfg.sigma_dist.push_back(as_number(v, "sigma_dist"));
            }
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& v : value) {
                cfg.seeds.push_back(v.get<std::uint64_t>());
            }
        } else if (key == "sample_rate") {
            cfg.sample_rate = as_number(value, key.c_str());
        } else if (key == "sigma_accel") {
            cfg.sigma_accel = as_number(value, key.c_str());
        } else if (key == "sigma_orientation") {
            cfg.sigma_orientation = as_number(value, key.c_str());
        } else if (key == "floor_z") {
            cfg.floor_z = as_number(value, key.c_str());
        } else if (key == "pelvis_width") {
            cfg.dims.pelvis_width = as_number(value, key.c_str());
        } else if (key == "thigh_left") {
            cfg.dims.thigh_length_left = as_number(value, key.c_str());
        } else if (key == "thigh_right") {
            cfg.dims.thigh_length_right = as_number(value, key.c_str());
        } else if (key == "shank_left") {
            cfg.dims.shank_length_left = as_number(value, key.c_str());
        } else if (key == "shank_right") {
            cfg.dims.shank_length_right = as_number(value, key.c_str());
        } else if (key == "accel_variance") {
            cfg.noise.accel_variance = as_number(value, key.c_str());
        } else if (key == "zupt_variance") {
            cfg.noise.zupt_variance = as_number(value, key.c_str());
        } else if (key == "floor_variance") {
            cfg.noise.floor_variance = as_number(value, key.c_str());
        } else if (key == "pelvis_z_variance") {
            cfg.noise.pelvis_z_variance = as_number(value, key.c_str());
        } else if (key == "pelvis_xy_variance") {
            cfg.noise.pelvis_xy_variance = as_number(value, key.c_str());
        } else if (key == "pla_scale") {
            cfg.noise.pla.scale = as_number(value, key.c_str());
        } else if (key == "pla_variance_floor") {
            cfg.noise.pla.variance_floor = as_number(value, key.c_str());
        } else if (key == "pla_variance_override") {
            if (value.is_null()) {
                cfg.noise.pla.variance_override.reset();
            } else {
                cfg.noise.pla.variance_override =
                    Eigen::Vector3d::Constant(as_number(value, key.c_str()));
            }
        } else if (key == "covariance_cap") {
            cfg.noise.covariance_cap =
                ckfdist::Vector18d::Constant(as_number(value, key.c_str()));
        } else if (key == "rom_min_deg") {
            cfg.rom.min_rad = ckfdist::deg_to_rad(as_number(value, key.c_str()));
        } else if (key == "rom_max_deg") {
            cfg.rom.max_rad = ckfdist::deg_to_rad(as_number(value, key.c_str()));
        } else if (key == "infeasible_policy") {
            cfg.policy = parse_policy(value.get<std::string>());
        } else if (key == "constraint_iterations") {
            cfg.constraint.iterations = value.get<int>();
        } else if (key == "constraint_tolerance") {
            cfg.constraint.tolerance = as_number(value, key.c_str());
        } else if (key == "initial_position_variance") {
            cfg.initial.position = as_number(value, key.c_str());
        } else if (key == "initial_velocity_variance") {
            cfg.initial.velocity = as_number(value, key.c_str());
        } else if (key == "baseline_pelvis_height") {
            if (value.is_null()) {
                cfg.baseline_pelvis_height.reset();
            } else {
                cfg.baseline_pelvis_height = as_number(value, key.c_str());
            }
        } else if (key == "workers") {
            cfg.workers = value.get<int>();
        } else {
            throw ckfdist::SchemaError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

struct CommonOptions {
    std::string config_path;
    double sample_rate = 0.0;
    double sigma_accel = -1.0;
    double sigma_orientation = -1.0;
    double floor_z = 0.0;
    double subject_height = 0.0;
    std::string policy;
    int workers = -1;

    CLI::Option* sample_rate_opt = nullptr;
    CLI::Option* floor_z_opt = nullptr;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config_path, "JSON config file; flags override its values");
        sample_rate_opt = cmd.add_option("--sample-rate", sample_rate, "Sample rate in Hz");
        cmd.add_option("--sigma-accel", sigma_accel, "Accelerometer noise sigma (m/s^2)");
        cmd.add_option("--sigma-orientation", sigma_orientation,
                       "Orientation noise sigma (rad)");
        floor_z_opt = cmd.add_option("--floor-z", floor_z, "Floor height (m)");
        cmd.add_option("--height", subject_height,
                       "Subject height (m); scales segment lengths");
        cmd.add_option("--policy", policy, "Infeasible-distance policy: clamp or reject");
        cmd.add_option("--workers", workers, "Worker thread count (0 = hardware)");
    }

    ckfdist::ExperimentConfig resolve() const {
        ckfdist::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config_file(config_path);
        }
        if (sample_rate_opt->count() > 0) {
            cfg.sample_rate = sample_rate;
        }
        if (sigma_accel >= 0.0) {
            cfg.sigma_accel = sigma_accel;
        }
        if (sigma_orientation >= 0.0) {
            cfg.sigma_orientation = sigma_orientation;
        }
        if (floor_z_opt->count() > 0) {
            cfg.floor_z = floor_z;
        }
        if (subject_height > 0.0) {
            cfg.dims = ckfdist::BodyDimensions::from_height(subject_height);
        }
        if (!policy.empty()) {
            cfg.policy = parse_policy(policy);
        }
        if (workers >= 0) {
            cfg.workers = workers;
        }
        return cfg;
    }
};

void write_text(const std::string& path, const std::string& content) {
    ckfdist::detail::write_file(path, content);
}

void print_metric_report(std::ostream& os,
                         const std::array<double, ckfdist::JointAngleTable::kSeriesCount>& rmse,
                         const std::array<double, ckfdist::JointAngleTable::kSeriesCount>& cc,
                         double ttd_left, double ttd_right) {
    os << "series    rmse_deg      cc\n";
    char buf[96];
    for (int i = 0; i < ckfdist::JointAngleTable::kSeriesCount; ++i) {
        std::snprintf(buf, sizeof(buf), "%-8s %9.4f %7.4f\n",
                      ckfdist::JointAngleTable::series_name(i),
                      rmse[static_cast<std::size_t>(i)], cc[static_cast<std::size_t>(i)]);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "ttd_dev_pct_left  %9.4f\nttd_dev_pct_right %9.4f\n",
                  ttd_left, ttd_right);
    os << buf;
}

int cmd_simulate(const CommonOptions& common, const std::string& preset_name,
                 std::uint64_t seed, double sigma_dist, const std::string& out_path) {
    ckfdist::ExperimentConfig cfg = common.resolve();
    const ckfdist::PresetName preset = parse_preset(preset_name);
    const ckfdist::TrialData trial = ckfdist::make_trial(cfg, preset, sigma_dist, seed);
    ckfdist::save_trial(trial, out_path);
    std::cout << "wrote " << trial.frame_count() << " frames (" << preset_name << ", seed "
              << seed << ", sigma_dist " << sigma_dist << ") to " << out_path << "\n";
    return 0;
}

int cmd_run(const CommonOptions& common, const std::string& trial_path,
            const std::string& mode_name, const std::string& results_path,
            const std::string& traj_path, const std::string& ref_path) {
    ckfdist::ExperimentConfig cfg = common.resolve();
    const ckfdist::FilterMode mode = parse_mode(mode_name);
    const ckfdist::TrialData trial = ckfdist::load_trial(trial_path);
    const ckfdist::TrialRunResult result = ckfdist::run_trial(cfg, mode, trial);

    print_metric_report(std::cout, result.row.rmse_deg, result.row.cc,
                        result.row.ttd_dev_left_pct, result.row.ttd_dev_right_pct);
    std::cout << "runtime_s " << result.row.runtime_s << "\n";

    if (!results_path.empty()) {
        write_text(results_path, ckfdist::results_csv({result.row}));
        std::cout << "results -> " << results_path << "\n";
    }
    if (!traj_path.empty()) {
        ckfdist::save_trajectory(result.estimate, traj_path);
        std::cout << "trajectory -> " << traj_path << "\n";
    }
    if (!ref_path.empty()) {
        ckfdist::TrajectoryData ref;
        ref.sample_rate = trial.meta.sample_rate;
        ref.dims = trial.dims;
        ref.time = trial.time;
        ref.poses = trial.truth;
        ckfdist::save_trajectory(ref, ref_path);
        std::cout << "reference trajectory -> " << ref_path << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonOptions& common, const std::vector<std::string>& preset_names,
              const std::vector<std::string>& mode_names, const std::vector<double>& sigmas,
              const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
    ckfdist::ExperimentConfig cfg = common.resolve();
    if (!preset_names.empty()) {
        cfg.presets.clear();
        for (const std::string& p : preset_names) {
            cfg.presets.push_back(parse_preset(p));
        }
    }
    if (!mode_names.empty()) {
        cfg.modes.clear();
        for (const std::string& m : mode_names) {
            cfg.modes.push_back(parse_mode(m));
        }
    }
    if (!sigmas.empty()) {
        cfg.sigma_dist = sigmas;
    }
    if (!seeds.empty()) {
        cfg.seeds = seeds;
    }

    const ckfdist::SweepResult sweep = ckfdist::run_sweep(cfg);

    std::filesystem::create_directories(out_dir);
    const auto path = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    write_text(path("results.csv"), ckfdist::results_csv(sweep.rows));
    write_text(path("summary.csv"), ckfdist::summary_csv(sweep.summary));
    write_text(path("timings.csv"), ckfdist::timings_csv(sweep.rows));

    std::cout << "cells " << sweep.rows.size() << ", failed " << sweep.failed_cells << ", wrote "
              << path("results.csv") << "\n";
    for (const ckfdist::ResultRow& row : sweep.rows) {
        if (row.failed()) {
            std::cerr << "failed: " << ckfdist::to_string(row.preset) << " "
                      << ckfdist::to_string(row.mode) << " sigma " << row.sigma_dist << " seed "
                      << row.seed << ": " << row.error << "\n";
        }
    }
    return sweep.failed_cells == 0 ? 0 : 1;
}

int cmd_metrics(const std::string& est_path, const std::string& ref_path,
                const std::string& csv_path) {
    const ckfdist::TrajectoryData est = ckfdist::load_trajectory(est_path);
    const ckfdist::TrajectoryData ref = ckfdist::load_trajectory(ref_path);
    if (est.poses.size() != ref.poses.size()) {
        throw ckfdist::LengthMismatch("trajectories have different frame counts");
    }

    const ckfdist::JointAngleTable est_angles =
        ckfdist::joint_angles_from_poses(est.poses, est.dims);
    const ckfdist::JointAngleTable ref_angles =
        ckfdist::joint_angles_from_poses(ref.poses, ref.dims);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, ckfdist::JointAngleTable::kSeriesCount> rmse{};
    std::array<double, ckfdist::JointAngleTable::kSeriesCount> cc{};
    for (int i = 0; i < ckfdist::JointAngleTable::kSeriesCount; ++i) {
        rmse[static_cast<std::size_t>(i)] =
            ckfdist::rad_to_deg(ckfdist::rmse_bias_removed(est_angles.series(i), ref_angles.series(i)));
        try {
            cc[static_cast<std::size_t>(i)] = ckfdist::pearson_cc(est_angles.series(i), ref_angles.series(i));
        } catch (const ckfdist::DegenerateSeries&) {
            cc[static_cast<std::size_t>(i)] = nan;
        }
    }

    const std::size_t n = est.poses.size();
    std::array<double, 2> ttd{nan, nan};
    std::vector<Eigen::Vector3d> est_path_v(n), ref_path_v(n);
    for (const ckfdist::Side side : {ckfdist::Side::Left, ckfdist::Side::Right}) {
        for (std::size_t k = 0; k < n; ++k) {
            est_path_v[k] = est.poses[k].ankle_pos(side);
            ref_path_v[k] = ref.poses[k].ankle_pos(side);
        }
        try {
            ttd[side == ckfdist::Side::Left ? 0 : 1] =
                ckfdist::ttd_deviation(est_path_v, ref_path_v);
        } catch (const ckfdist::ZeroTruthPath&) {
        }
    }

    print_metric_report(std::cout, rmse, cc, ttd[0], ttd[1]);

    if (!csv_path.empty()) {
        std::string out = "metric,value\n";
        for (int i = 0; i < ckfdist::JointAngleTable::kSeriesCount; ++i) {
            out += std::string("rmse_deg_") + ckfdist::JointAngleTable::series_name(i) + ",";
            ckfdist::detail::append_number(out, rmse[static_cast<std::size_t>(i)]);
            out += "\n";
        }
        for (int i = 0; i < ckfdist::JointAngleTable::kSeriesCount; ++i) {
            out += std::string("cc_") + ckfdist::JointAngleTable::series_name(i) + ",";
            ckfdist::detail::append_number(out, cc[static_cast<std::size_t>(i)]);
            out += "\n";
        }
        out += "ttd_dev_pct_left,";
        ckfdist::detail::append_number(out, ttd[0]);
        out += "\nttd_dev_pct_right,";
        ckfdist::detail::append_number(out, ttd[1]);
        out += "\n";
        write_text(csv_path, out);
        std::cout << "metrics -> " << csv_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lower-body kinematics: constrained Kalman filter over three IMU streams "
                 "plus pelvis-to-ankle distance measurements"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic trial file");
    CommonOptions sim_common;
    sim_common.add_to(*sim);
    std::string sim_preset = "walk";
    std::uint64_t sim_seed = 1;
    double sim_sigma_dist = 0.0;
    std::string sim_out;
    sim->add_option("--preset", sim_preset, "Movement preset")->required();
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--sigma-dist", sim_sigma_dist, "Distance noise sigma (m)");
    sim->add_option("-o,--output", sim_out, "Trial file to write")->required();

    // run
    auto* run = app.add_subcommand("run", "Run the filter on a trial file");
    CommonOptions run_common;
    run_common.add_to(*run);
    std::string run_trial_path, run_mode = "distance", run_results, run_traj, run_ref;
    run->add_option("--trial", run_trial_path, "Trial file")->required();
    run->add_option("--mode", run_mode, "Filter mode: distance or baseline");
    run->add_option("-o,--results", run_results, "Write a one-row results CSV here");
    run->add_option("--trajectory", run_traj, "Write the estimated trajectory here");
    run->add_option("--reference", run_ref, "Write the trial's reference trajectory here");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run the full noise sweep");
    CommonOptions sweep_common;
    sweep_common.add_to(*sweep);
    std::vector<std::string> sweep_presets, sweep_modes;
    std::vector<double> sweep_sigmas;
    std::vector<std::uint64_t> sweep_seeds;
    std::string sweep_out_dir = ".";
    sweep->add_option("--presets", sweep_presets, "Presets to sweep")->delimiter(',');
    sweep->add_option("--modes", sweep_modes, "Modes to sweep")->delimiter(',');
    sweep->add_option("--sigmas", sweep_sigmas, "Distance noise sigmas")->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "Seeds to sweep")->delimiter(',');
    sweep->add_option("--out-dir", sweep_out_dir, "Directory for results/summary/timings CSVs");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Score one trajectory file against another");
    std::string met_est, met_ref, met_csv;
    metrics->add_option("--est", met_est, "Estimated trajectory file")->required();
    metrics->add_option("--ref", met_ref, "Reference trajectory file")->required();
    metrics->add_option("--csv", met_csv, "Also write metric,value rows here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            return cmd_simulate(sim_common, sim_preset, sim_seed, sim_sigma_dist, sim_out);
        }
        if (run->parsed()) {
            return cmd_run(run_common, run_trial_path, run_mode, run_results, run_traj, run_ref);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_common, sweep_presets, sweep_modes, sweep_sigmas, sweep_seeds,
                             sweep_out_dir);
        }
        if (metrics->parsed()) {
            return cmd_metrics(met_est, met_ref, met_csv);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
