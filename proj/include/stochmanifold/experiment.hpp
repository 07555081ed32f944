#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stochmanifold {

inline constexpr int kConfigSchemaVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct NoiseConfig {
    std::uint64_t master_seed = 1;
    double dt = 0.01;
    double t_min = -80.0;
    double t_max = 20.0;
    double burn_in = 20.0;
};

struct SolverConfig {
    double dt = 0.01;  // integer divisor of noise.dt; paths are refined to it
    double tol_fixed_point = 1e-8;
    int max_iters = 200;
    std::optional<double> eta;  // empty: midpoint of the admissible interval
    double delta = 1.0;
    double T_hist = 0.0;        // 0: from the tail bound
};

// Knobs of the individual experiments.
struct RunConfig {
    double T = 16.0;                             // horizon of simulate / reduce / compare
    std::vector<double> initial_state;           // empty: 1 in every coordinate
    int grid_points = 5;                         // manifold: per center dimension
    double grid_radius = 1.0;
    double tau = 16.0;                           // compare: shooting target time
    std::vector<double> cauchy_taus{2.0, 4.0, 8.0, 16.0};
    double fit_horizon = 10.0;                   // compare: rate-fit window
    double tol_cone = 1e-3;
};

struct SineGordonConfig {
    double a = 10.0;
    double nu = 25.0;
    double b = 100.0;
    std::string f_name = "sin";
    double f_scale = 1.0;
    int K = 16;
    double T = 200.0;
    double dt = 0.01;
    int n_paths = 64;
    std::uint64_t master_seed = 1;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::string experiment = "simulate";
    nlohmann::json model;  // inline model JSON; defaults to the two-mode model
    NoiseConfig noise;
    SolverConfig solver;
    int n_paths = 1;
    RunConfig run;
    SineGordonConfig sine_gordon;
    std::filesystem::path output_dir = "out";
};

// Throws InvalidArgument on schema violations. `base_dir` resolves a model
// given as a file reference ("model": "file.json").
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
nlohmann::json config_to_json(const ExperimentConfig& config);

// Worker count from STOCHMANIFOLD_THREADS, capped by the hardware and by `n_jobs`.
int worker_count(int n_jobs);

struct PathFailure {
    int path = 0;
    std::string message;
    double diagnostic = 0.0;
};

struct RunResult {
    int exit_code = kExitOk;
    std::string message;
    std::vector<std::string> conditions;  // one line per evaluated precondition
    std::vector<std::string> artifacts;  // relative to output_dir, sorted
    std::vector<PathFailure> failures;
    nlohmann::json summary;
};

/// Runs the configured experiment and writes config.resolved.json, per-path
/// CSVs, summary.json and MANIFEST.json into output_dir. Precondition checks
/// are always evaluated; a failed one aborts with kExitConfig unless `force`.
RunResult run_experiment(const ExperimentConfig& config, bool force = false);

} // namespace stochmanifold
