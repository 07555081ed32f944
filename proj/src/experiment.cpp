#include "stochmanifold/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "stochmanifold/error.hpp"
#include "stochmanifold/flow.hpp"
#include "stochmanifold/io.hpp"
#include "stochmanifold/manifold.hpp"
#include "stochmanifold/model.hpp"
#include "stochmanifold/noise.hpp"
#include "stochmanifold/reduce.hpp"
#include "stochmanifold/sinegordon.hpp"

namespace stochmanifold {

namespace {

using nlohmann::json;

const std::set<std::string> kExperiments{"simulate", "manifold", "reduce", "compare", "sine-gordon"};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw InvalidArgument(where + ": expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            throw InvalidArgument(where + ": unknown key '" + key + "'");
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(where + "." + key + ": wrong type");
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw InvalidArgument(message);
    }
}

int refinement_factor(double noise_dt, double solver_dt) {
    const double r = noise_dt / solver_dt;
    const double rounded = std::round(r);
    require(rounded >= 1.0 && std::abs(r - rounded) <= 1e-9 * r,
            "solver.dt must divide noise.dt into an integer number of steps");
    return static_cast<int>(rounded);
}

void validate(const ExperimentConfig& c) {
    require(c.schema_version == kConfigSchemaVersion,
            "schema_version " + std::to_string(c.schema_version) + " is not supported");
    require(kExperiments.count(c.experiment) == 1, "unknown experiment '" + c.experiment + "'");
    require(c.n_paths >= 1, "ensemble.n_paths must be at least 1");
    require(c.noise.dt > 0.0 && c.solver.dt > 0.0, "time steps must be positive");
    require(c.noise.t_min < c.noise.t_max, "noise.t_min must be below noise.t_max");
    require(c.noise.burn_in >= 0.0, "noise.burn_in must be non-negative");
    require(c.noise.t_min + c.noise.burn_in < 0.0, "noise window must cover t = 0 after burn-in");
    refinement_factor(c.noise.dt, c.solver.dt);
    require(c.solver.tol_fixed_point > 0.0 && c.solver.max_iters >= 1, "solver tolerances must be positive");
    require(c.solver.delta > 0.0, "solver.delta must be positive");
    require(c.solver.T_hist >= 0.0, "solver.T_hist must be non-negative");
    require(c.run.T > 0.0 && c.run.T <= c.noise.t_max, "run.T must lie in (0, noise.t_max]");
    require(c.run.grid_points >= 1 && c.run.grid_radius >= 0.0, "manifold grid must be non-empty");
    require(c.run.tau > 0.0 && c.run.tau <= c.run.T, "run.tau must lie in (0, run.T]");
    require(c.run.fit_horizon > 0.0, "run.fit_horizon must be positive");
    require(c.run.tol_cone >= 0.0, "run.tol_cone must be non-negative");
    const auto& sg = c.sine_gordon;
    require(sg.T > 0.0 && sg.dt > 0.0 && sg.n_paths >= 1 && sg.K >= 2, "sine_gordon: invalid run parameters");
}

} // namespace

ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    check_keys(doc, {"schema_version", "experiment", "model", "noise", "solver", "ensemble", "run", "sine_gordon",
                     "output_dir"},
               "config");
    read(doc, "schema_version", c.schema_version, "config");
    read(doc, "experiment", c.experiment, "config");

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        if (m.is_string()) {
            const std::filesystem::path file = base_dir / m.get<std::string>();
            try {
                c.model = json::parse(read_text(file));
            } catch (const json::parse_error& e) {
                throw InvalidArgument("model file " + file.string() + ": " + e.what());
            }
        } else {
            c.model = m;
        }
    } else {
        c.model = model_to_json(two_mode_model(1.0, 0.05));
    }
    model_from_json(c.model);  // validates

    if (doc.contains("noise")) {
        const json& n = doc.at("noise");
        check_keys(n, {"master_seed", "dt", "t_min", "t_max", "burn_in"}, "noise");
        read(n, "master_seed", c.noise.master_seed, "noise");
        read(n, "dt", c.noise.dt, "noise");
        read(n, "t_min", c.noise.t_min, "noise");
        read(n, "t_max", c.noise.t_max, "noise");
        read(n, "burn_in", c.noise.burn_in, "noise");
    }
    c.solver.dt = c.noise.dt;
    if (doc.contains("solver")) {
        const json& s = doc.at("solver");
        check_keys(s, {"dt", "tol_fixed_point", "max_iters", "eta", "delta", "T_hist"}, "solver");
        read(s, "dt", c.solver.dt, "solver");
        read(s, "tol_fixed_point", c.solver.tol_fixed_point, "solver");
        read(s, "max_iters", c.solver.max_iters, "solver");
        if (s.contains("eta") && !s.at("eta").is_null()) {
            double eta = 0.0;
            read(s, "eta", eta, "solver");
            c.solver.eta = eta;
        }
        read(s, "delta", c.solver.delta, "solver");
        read(s, "T_hist", c.solver.T_hist, "solver");
    }
    if (doc.contains("ensemble")) {
        const json& e = doc.at("ensemble");
        check_keys(e, {"n_paths"}, "ensemble");
        read(e, "n_paths", c.n_paths, "ensemble");
    }
    if (doc.contains("run")) {
        const json& r = doc.at("run");
        check_keys(r, {"T", "initial_state", "grid_points", "grid_radius", "tau", "cauchy_taus", "fit_horizon",
                       "tol_cone"},
                   "run");
        read(r, "T", c.run.T, "run");
        read(r, "initial_state", c.run.initial_state, "run");
        read(r, "grid_points", c.run.grid_points, "run");
        read(r, "grid_radius", c.run.grid_radius, "run");
        read(r, "tau", c.run.tau, "run");
        read(r, "cauchy_taus", c.run.cauchy_taus, "run");
        read(r, "fit_horizon", c.run.fit_horizon, "run");
        read(r, "tol_cone", c.run.tol_cone, "run");
    }
    if (doc.contains("sine_gordon")) {
        const json& g = doc.at("sine_gordon");
        check_keys(g, {"a", "nu", "b", "f", "K", "T", "dt", "n_paths", "master_seed"}, "sine_gordon");
        auto& sg = c.sine_gordon;
        read(g, "a", sg.a, "sine_gordon");
        read(g, "nu", sg.nu, "sine_gordon");
        read(g, "b", sg.b, "sine_gordon");
        if (g.contains("f")) {
            const json& f = g.at("f");
            check_keys(f, {"name", "scale"}, "sine_gordon.f");
            read(f, "name", sg.f_name, "sine_gordon.f");
            read(f, "scale", sg.f_scale, "sine_gordon.f");
        }
        read(g, "K", sg.K, "sine_gordon");
        read(g, "T", sg.T, "sine_gordon");
        read(g, "dt", sg.dt, "sine_gordon");
        read(g, "n_paths", sg.n_paths, "sine_gordon");
        read(g, "master_seed", sg.master_seed, "sine_gordon");
    }
    if (doc.contains("output_dir")) {
        std::string out;
        read(doc, "output_dir", out, "config");
        c.output_dir = out;
    }
    validate(c);
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    const auto& sg = c.sine_gordon;
    return {{"schema_version", c.schema_version},
            {"experiment", c.experiment},
            {"model", c.model},
            {"noise",
             {{"master_seed", c.noise.master_seed},
              {"dt", c.noise.dt},
              {"t_min", c.noise.t_min},
              {"t_max", c.noise.t_max},
              {"burn_in", c.noise.burn_in}}},
            {"solver",
             {{"dt", c.solver.dt},
              {"tol_fixed_point", c.solver.tol_fixed_point},
              {"max_iters", c.solver.max_iters},
              {"eta", c.solver.eta ? json(*c.solver.eta) : json(nullptr)},
              {"delta", c.solver.delta},
              {"T_hist", c.solver.T_hist}}},
            {"ensemble", {{"n_paths", c.n_paths}}},
            {"run",
             {{"T", c.run.T},
              {"initial_state", c.run.initial_state},
              {"grid_points", c.run.grid_points},
              {"grid_radius", c.run.grid_radius},
              {"tau", c.run.tau},
              {"cauchy_taus", c.run.cauchy_taus},
              {"fit_horizon", c.run.fit_horizon},
              {"tol_cone", c.run.tol_cone}}},
            {"sine_gordon",
             {{"a", sg.a},
              {"nu", sg.nu},
              {"b", sg.b},
              {"f", {{"name", sg.f_name}, {"scale", sg.f_scale}}},
              {"K", sg.K},
              {"T", sg.T},
              {"dt", sg.dt},
              {"n_paths", sg.n_paths},
              {"master_seed", sg.master_seed}}},
            {"output_dir", c.output_dir.string()}};
}

int worker_count(int n_jobs) {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("STOCHMANIFOLD_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) {
            n = std::min<long>(n, cap);
        }
    }
    return std::max(1, std::min(n, n_jobs));
}

namespace {

struct PathOutput {
    std::map<std::string, std::string> files;
    json summary;
};

struct Ensemble {
    std::vector<std::optional<PathOutput>> outputs;
    std::vector<PathFailure> failures;
};

// Paths run on a worker pool; results are kept by index so that aggregation
// and file output do not depend on scheduling.
Ensemble run_ensemble(int n, const std::function<PathOutput(int)>& job) {
    Ensemble ens;
    ens.outputs.resize(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::mutex mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                PathOutput out = job(i);
                ens.outputs[static_cast<std::size_t>(i)] = std::move(out);
            } catch (const NumericalFailure& e) {
                std::lock_guard lock(mutex);
                ens.failures.push_back({i, e.what(), e.diagnostic()});
            } catch (const std::exception& e) {
                std::lock_guard lock(mutex);
                ens.failures.push_back({i, e.what(), std::numeric_limits<double>::quiet_NaN()});
            }
        }
    };
    const int n_workers = worker_count(n);
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
    std::sort(ens.failures.begin(), ens.failures.end(),
              [](const PathFailure& a, const PathFailure& b) { return a.path < b.path; });
    return ens;
}

std::string path_dir(int i) {
    std::ostringstream s;
    s << "path_" << std::setw(3) << std::setfill('0') << i << '/';
    return s.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Gate {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool satisfied = false;
    bool enforced = false;
    json detail;
};

std::string describe(const Gate& g) {
    std::ostringstream s;
    s << g.name << ": value " << format_double(g.value) << " (must be < " << format_double(g.threshold)
      << "), margin " << format_double(g.value - g.threshold) << ", " << (g.satisfied ? "satisfied" : "VIOLATED")
      << (g.enforced ? "" : " (not required by this experiment)");
    return s.str();
}

struct Context {
    const ExperimentConfig& config;
    SpectralModel model;
    ManifoldOptions options;
    int refine_factor = 1;
    StateVector u0;
};

ManifoldOptions manifold_options(const ExperimentConfig& c) {
    ManifoldOptions o;
    if (c.solver.eta) {
        o.eta = *c.solver.eta;
    }
    o.tol_fixed_point = c.solver.tol_fixed_point;
    o.max_iters = c.solver.max_iters;
    o.T_hist = c.solver.T_hist;
    o.require_contraction = false;  // gating happens here, with --force
    return o;
}

std::vector<Gate> model_gates(const ExperimentConfig& c, const SpectralModel& model) {
    const std::string& e = c.experiment;
    const double eta = c.solver.eta ? *c.solver.eta : default_eta(model.alpha(), model.beta());
    const C1Check c1 = check_c1(model.lipschitz(), model.alpha(), model.beta(), eta);
    const ConeCheck cone = check_cone_condition(model.alpha(), model.beta(), model.lipschitz(), c.solver.delta);
    Gate g1{"contraction factor", c1.factor, 1.0, c1.satisfied, e != "simulate", {{"eta", eta}}};
    Gate g2{"cone condition", cone.margin, 0.0, cone.satisfied, e == "compare",
            {{"delta", c.solver.delta}, {"k", cone.k_rate}}};
    return {g1, g2};
}

json gate_json(const Gate& g) {
    json j = g.detail;
    j["value"] = g.value;
    j["threshold"] = g.threshold;
    j["margin"] = g.value - g.threshold;
    j["satisfied"] = g.satisfied;
    j["enforced"] = g.enforced;
    return j;
}

struct PathNoise {
    WienerPath path;
    std::shared_ptr<const OUProcess> ou;
};

PathNoise make_noise(const Context& ctx, int i) {
    const auto& n = ctx.config.noise;
    WienerPath path = sample_wiener(derive_seed(n.master_seed, static_cast<std::uint64_t>(i)), n.t_min, n.t_max, n.dt);
    if (ctx.refine_factor > 1) {
        path = refine(path, ctx.refine_factor);
    }
    auto ou = std::make_shared<const OUProcess>(ou_stationary(path, n.burn_in));
    return {std::move(path), std::move(ou)};
}

void add_noise_files(PathOutput& out, int i, const PathNoise& noise) {
    out.files[path_dir(i) + "noise.csv"] = path_csv(noise.path, *noise.ou).text();
    out.files[path_dir(i) + "noise.json"] = dump(path_sidecar(noise.path, *noise.ou));
}

void add_trajectory(PathOutput& out, const std::string& name, const Trajectory& traj, const SpectralModel& model) {
    out.files[name + ".csv"] = trajectory_csv(traj).text();
    out.files[name + ".json"] = dump(trajectory_sidecar(traj, model));
}

StateVector center_part(const SpectralModel& model, const StateVector& v) { return project_c(model, v); }

PathOutput simulate_path(const Context& ctx, int i) {
    PathOutput out;
    const PathNoise noise = make_noise(ctx, i);
    const double T = ctx.config.run.T;
    const StateVector v0 = transform_to_v(noise.ou->z(0), ctx.u0);
    const Trajectory v = integrate_random_pde(ctx.model, *noise.ou, v0, 0.0, T);
    const Trajectory u = to_original_coordinates(v, *noise.ou);
    add_noise_files(out, i, noise);
    add_trajectory(out, path_dir(i) + "trajectory", u, ctx.model);
    out.summary = {{"seed", noise.path.seed()}, {"rows", u.size()}, {"final_norm", u.back().norm()}};
    return out;
}

PathOutput manifold_path(const Context& ctx, int i) {
    PathOutput out;
    const PathNoise noise = make_noise(ctx, i);
    const ManifoldMap mm(ctx.model, noise.ou, ctx.options);
    const std::int64_t fiber = mm.fiber_index(0.0);
    const auto& centers = ctx.model.center_indices();
    const auto& stables = ctx.model.stable_indices();
    const int g = ctx.config.run.grid_points;
    const double r = ctx.config.run.grid_radius;

    std::vector<std::string> header;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        header.push_back("xi_" + std::to_string(j + 1));
    }
    for (std::size_t j = 0; j < stables.size(); ++j) {
        header.push_back("hs_" + std::to_string(j + 1));
    }
    CsvTable table(header);

    std::size_t total = 1;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        total *= static_cast<std::size_t>(g);
    }
    double measured = 0.0;
    double tail = 0.0;
    int iterations = 0;
    std::vector<double> row(header.size());
    for (std::size_t flat = 0; flat < total; ++flat) {
        StateVector xi = StateVector::Zero(ctx.model.n_total());
        std::size_t rest = flat;
        for (std::size_t j = 0; j < centers.size(); ++j) {
            const auto idx = static_cast<int>(rest % static_cast<std::size_t>(g));
            rest /= static_cast<std::size_t>(g);
            xi(centers[j]) = g == 1 ? 0.0 : -r + 2.0 * r * idx / (g - 1);
            row[j] = xi(centers[j]);
        }
        const HsResult res = hs_eval(mm, xi, fiber);
        for (std::size_t j = 0; j < stables.size(); ++j) {
            row[centers.size() + j] = res.value(stables[j]);
        }
        table.add_row(row);
        measured = std::max(measured, res.fixed_point.last_ratio);
        tail = std::max(tail, res.fixed_point.tail_bound);
        iterations = std::max(iterations, res.fixed_point.iterations);
    }
    const json diag = {{"factor_theoretical", mm.contraction().factor},
                       {"factor_measured", measured},
                       {"iterations_max", iterations},
                       {"tail_bound", tail}};
    add_noise_files(out, i, noise);
    out.files[path_dir(i) + "manifold.csv"] = table.text();
    out.files[path_dir(i) + "diagnostics.json"] = dump(diag);
    out.summary = diag;
    out.summary["seed"] = noise.path.seed();
    out.summary["T_hist"] = mm.T_hist();
    return out;
}

PathOutput reduce_path(const Context& ctx, int i) {
    PathOutput out;
    const PathNoise noise = make_noise(ctx, i);
    const ManifoldMap mm(ctx.model, noise.ou, ctx.options);
    const double T = ctx.config.run.T;
    const StateVector xi = center_part(ctx.model, transform_to_v(noise.ou->z(0), ctx.u0));
    const ReducedResult reduced = integrate_reduced(mm, xi, 0.0, T);
    const StateVector v0 = xi + hs(mm, xi, 0.0);
    const Trajectory full = integrate_random_pde(ctx.model, *noise.ou, v0, 0.0, T);

    double gap = 0.0;
    for (std::size_t k = 0; k < full.size(); ++k) {
        gap = std::max(gap, (full.states[k] - reduced.reconstructed.states[k]).norm());
    }
    const StateVector& end = full.back();
    const StateVector xi_end = center_part(ctx.model, end);
    const double defect = (project_s(ctx.model, end) - hs(mm, xi_end, T)).norm();

    add_noise_files(out, i, noise);
    add_trajectory(out, path_dir(i) + "full", to_original_coordinates(full, *noise.ou), ctx.model);
    add_trajectory(out, path_dir(i) + "reduced", to_original_coordinates(reduced.reconstructed, *noise.ou),
                   ctx.model);
    out.summary = {{"seed", noise.path.seed()},
                   {"sup_gap", gap},
                   {"graph_defect", defect},
                   {"max_iterations", reduced.max_iterations}};
    return out;
}

PathOutput compare_path(const Context& ctx, int i) {
    PathOutput out;
    const PathNoise noise = make_noise(ctx, i);
    const ManifoldMap mm(ctx.model, noise.ou, ctx.options);
    const RunConfig& run = ctx.config.run;
    const StateVector v0 = transform_to_v(noise.ou->z(0), ctx.u0);
    const Trajectory full = integrate_random_pde(ctx.model, *noise.ou, v0, 0.0, run.T);
    std::vector<double> taus;
    std::copy_if(run.cauchy_taus.begin(), run.cauchy_taus.end(), std::back_inserter(taus),
                 [&](double t) { return t > 0.0 && t <= run.tau; });
    const TrackingOrbit tr = tracking_orbit(mm, full, run.tau, taus);
    const ConeCheck cone = check_cone_condition(ctx.model.alpha(), ctx.model.beta(), ctx.model.lipschitz(),
                                                ctx.config.solver.delta);
    CompletenessOptions copts;
    copts.horizon = run.fit_horizon;
    const TrackingReport rep = verify_completeness(mm, full, tr.orbit, {ctx.config.solver.delta, cone.k_rate}, copts);
    const ConeReport cr = cone_monitor(ctx.model, difference(full, tr.orbit), ctx.config.solver.delta, run.tol_cone);

    CsvTable table({"t", "dist", "log_dist"});
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        table.add_row({rep.times[k], rep.distances[k], std::log(rep.distances[k])});
    }
    add_noise_files(out, i, noise);
    out.files[path_dir(i) + "distance.csv"] = table.text();
    add_trajectory(out, path_dir(i) + "tracking", to_original_coordinates(tr.orbit, *noise.ou), ctx.model);
    out.summary = {{"seed", noise.path.seed()},
                   {"fitted_rate", rep.fitted_rate},
                   {"raw_rate", rep.raw_rate},
                   {"D_estimate", rep.D_estimate},
                   {"rate_ok", rep.rate_ok},
                   {"D_ok", rep.D_ok},
                   {"degenerate", rep.degenerate},
                   {"cone_violation", cr.violation ? json(*cr.violation) : json(nullptr)},
                   {"shooting_iterations", tr.shooting_iterations},
                   {"shooting_residual", tr.shooting_residual},
                   {"cauchy_gaps", tr.cauchy_gaps}};
    return out;
}

void aggregate(const std::string& experiment, const Ensemble& ens, json& summary) {
    if (experiment != "compare") {
        return;
    }
    json rates = json::array();
    json ds = json::array();
    int violations = 0;
    for (const auto& o : ens.outputs) {
        if (!o) {
            rates.push_back(nullptr);
            ds.push_back(nullptr);
            continue;
        }
        rates.push_back(o->summary.at("fitted_rate"));
        ds.push_back(o->summary.at("D_estimate"));
        violations += o->summary.at("cone_violation").is_null() ? 0 : 1;
    }
    summary["k_theoretical"] = summary.at("conditions").at("cone condition").at("k");
    summary["fitted_rates"] = rates;
    summary["D_estimates"] = ds;
    summary["cone_violations"] = violations;
}

HyperbolicModel hyperbolic_from(const SineGordonConfig& sg) {
    HyperbolicModel hm;
    hm.a = sg.a;
    hm.nu = sg.nu;
    hm.b = sg.b;
    hm.f_name = sg.f_name;
    hm.f_scale = sg.f_scale;
    hm.K = sg.K;
    return hm;
}

// Files and summary of the sine-Gordon experiment; the reduced 2-D runs are
// cheap, so the ensemble is handled by detect_stationary itself.
void run_sine_gordon(const ExperimentConfig& c, const SineGordonSystem& sys, std::map<std::string, std::string>& files,
                     json& summary) {
    const HyperbolicModel& hm = sys.physical;
    CsvTable spectrum({"k", "delta_minus_re", "delta_minus_im", "delta_plus_re", "delta_plus_im"});
    for (int k = 1; k <= hm.K; ++k) {
        const ModeSpectrum s = anu_spectrum(hm, k);
        spectrum.add_row({static_cast<double>(k), s.delta_minus.real(), s.delta_minus.imag(), s.delta_plus.real(),
                          s.delta_plus.imag()});
    }
    files["spectrum.csv"] = spectrum.text();

    StationaryOptions so;
    so.T = c.sine_gordon.T;
    so.dt = c.sine_gordon.dt;
    so.n_paths = c.sine_gordon.n_paths;
    so.master_seed = c.sine_gordon.master_seed;
    so.manifold = manifold_options(c);
    const StationaryReport rep = detect_stationary(sys, so);

    CsvTable hist({"path", "coordinate", "bin_left", "bin_right", "count"});
    json paths = json::array();
    for (std::size_t p = 0; p < rep.paths.size(); ++p) {
        const PathStationarity& ps = rep.paths[p];
        paths.push_back({{"seed", ps.seed},
                         {"blew_up", ps.blew_up},
                         {"blowup_time", ps.blowup_time ? json(*ps.blowup_time) : json(nullptr)},
                         {"initial_gap", ps.initial_gap},
                         {"final_gap", ps.final_gap},
                         {"synchronized", ps.synchronized},
                         {"ks", ps.ks},
                         {"ks_critical", ps.ks_critical},
                         {"ks_pass", ps.ks_pass}});
        for (int coord = 0; coord < 2; ++coord) {
            const auto& edges = ps.histogram_edges[static_cast<std::size_t>(coord)];
            const auto& counts = ps.histogram_counts[static_cast<std::size_t>(coord)];
            for (std::size_t b = 0; b < counts.size(); ++b) {
                hist.add_row({static_cast<double>(p), static_cast<double>(coord + 1), edges[b], edges[b + 1],
                              static_cast<double>(counts[b])});
            }
        }
    }
    const json report = {{"growth_rate_linear", rep.growth_rate_linear},
                         {"linearization_contracting", rep.linearization_contracting},
                         {"ks_pass_fraction", rep.ks_pass_fraction},
                         {"sync_pass_fraction", rep.sync_pass_fraction},
                         {"blowups", rep.blowups},
                         {"paths", paths}};
    files["stationary.json"] = dump(report);
    files["histogram.csv"] = hist.text();
    summary["ks_pass_fraction"] = rep.ks_pass_fraction;
    summary["sync_pass_fraction"] = rep.sync_pass_fraction;
    summary["blowups"] = rep.blowups;
    summary["projection_gains"] = {{"mode1", sys.projection_mode1},
                                   {"mode2", sys.projection_mode2},
                                   {"mode1_published", kPublishedMode1Coefficient}};
}

void finish(const std::filesystem::path& dir, std::map<std::string, std::string>& files, RunResult& result) {
    json manifest = json::array();
    for (const auto& [name, body] : files) {
        write_text(dir / name, body);
        manifest.push_back({{"file", name}, {"sha256", sha256_hex(body)}, {"bytes", body.size()}});
        result.artifacts.push_back(name);
    }
    write_text(dir / "MANIFEST.json", dump({{"artifacts", manifest}}));
    result.artifacts.push_back("MANIFEST.json");
}

} // namespace

RunResult run_experiment(const ExperimentConfig& config, bool force) {
    RunResult result;
    std::map<std::string, std::string> files;
    try {
        validate(config);
        const std::string resolved = dump(config_to_json(config));
        files["config.resolved.json"] = resolved;
        write_text(config.output_dir / "config.resolved.json", resolved);

        std::vector<Gate> gates;
        std::optional<SineGordonSystem> sys;
        std::optional<Context> ctx;
        if (config.experiment == "sine-gordon") {
            sys = build_spectral_model(hyperbolic_from(config.sine_gordon));
            const SpectralModel& m = sys->model;
            const double eta = config.solver.eta ? *config.solver.eta : default_eta(m.alpha(), m.beta());
            const C1Check c1 = check_c1(m.lipschitz(), m.alpha(), m.beta(), eta);
            gates.push_back({"contraction factor", c1.factor, 1.0, c1.satisfied, true, {{"eta", eta}}});
            gates.push_back({"smallness 16 L_f / a^2 (derived)", sys->smallness_derived, 1.0,
                             sys->smallness_derived < 1.0, true, json::object()});
            gates.push_back({"smallness 8 L_f / a^2 (as published)", sys->smallness_published, 1.0,
                             sys->smallness_published < 1.0, false, json::object()});
        } else {
            ctx.emplace(Context{config, model_from_json(config.model), manifold_options(config),
                                refinement_factor(config.noise.dt, config.solver.dt), StateVector()});
            const int n = ctx->model.n_total();
            if (config.run.initial_state.empty()) {
                ctx->u0 = StateVector::Ones(n);
            } else {
                if (static_cast<int>(config.run.initial_state.size()) != n) {
                    throw InvalidArgument("run.initial_state must have " + std::to_string(n) + " entries");
                }
                ctx->u0 = Eigen::Map<const StateVector>(config.run.initial_state.data(), n);
            }
            if (config.experiment == "manifold" &&
                std::pow(static_cast<double>(config.run.grid_points), ctx->model.n_c()) > 1e5) {
                throw InvalidArgument("run.grid_points: manifold grid exceeds 1e5 points");
            }
            gates = model_gates(config, ctx->model);
        }

        bool violated = false;
        json conditions = json::object();
        for (const Gate& g : gates) {
            result.conditions.push_back(describe(g));
            conditions[g.name] = gate_json(g);
            violated = violated || (g.enforced && !g.satisfied);
        }
        if (violated && !force) {
            for (const Gate& g : gates) {
                if (g.enforced && !g.satisfied) {
                    throw InvalidArgument("precondition violated: " + describe(g));
                }
            }
        }

        json summary = {{"experiment", config.experiment},
                        {"hypothesis", violated ? "out-of-hypothesis" : "within-hypothesis"},
                        {"conditions", conditions}};
        if (sys) {
            run_sine_gordon(config, *sys, files, summary);
        } else {
            std::function<PathOutput(int)> job;
            if (config.experiment == "simulate") {
                job = [&](int i) { return simulate_path(*ctx, i); };
            } else if (config.experiment == "manifold") {
                job = [&](int i) { return manifold_path(*ctx, i); };
            } else if (config.experiment == "reduce") {
                job = [&](int i) { return reduce_path(*ctx, i); };
            } else {
                job = [&](int i) { return compare_path(*ctx, i); };
            }
            Ensemble ens = run_ensemble(config.n_paths, job);
            json paths = json::array();
            for (auto& o : ens.outputs) {
                if (o) {
                    files.merge(o->files);
                    paths.push_back(o->summary);
                } else {
                    paths.push_back(nullptr);
                }
            }
            summary["paths"] = paths;
            aggregate(config.experiment, ens, summary);
            json roster = json::array();
            for (const auto& f : ens.failures) {
                roster.push_back({{"path", f.path}, {"message", f.message}, {"diagnostic", f.diagnostic}});
            }
            summary["failures"] = roster;
            result.failures = std::move(ens.failures);
        }
        if (!result.failures.empty()) {
            result.exit_code = kExitNumerical;
            result.message = "numerical failure on path " + std::to_string(result.failures.front().path) + ": " +
                             result.failures.front().message;
        }
        files["summary.json"] = dump(summary);
        result.summary = std::move(summary);
        finish(config.output_dir, files, result);
    } catch (const InvalidArgument& e) {
        result.exit_code = kExitConfig;
        result.message = e.what();
    } catch (const NumericalFailure& e) {
        result.exit_code = kExitNumerical;
        result.message = std::string("numerical failure: ") + e.what();
    }
    return result;
}

} // namespace stochmanifold
