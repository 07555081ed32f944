#include "stochmanifold/reduce.hpp"

#include <algorithm>
#include <cmath>

#include "stochmanifold/error.hpp"

namespace stochmanifold {

namespace {

constexpr int kColdRestartEvery = 100;

void require_same_grid(const Trajectory& a, const Trajectory& b, const char* where) {
    if (std::fabs(a.t0 - b.t0) > 1e-9 * std::max(1.0, std::fabs(a.t0)) || std::fabs(a.dt - b.dt) > 1e-12 * a.dt) {
        throw InvalidArgument(std::string(where) + ": trajectories live on different grids");
    }
}

Trajectory start_trajectory(const OUProcess& ou, std::int64_t k0, std::int64_t k1, const char* scheme) {
    Trajectory t;
    t.t0 = static_cast<double>(k0) * ou.dt();
    t.dt = ou.dt();
    t.seed = ou.seed();
    t.generator_id = ou.generator_id();
    t.scheme_id = scheme;
    t.states.reserve(static_cast<std::size_t>(k1 - k0 + 1));
    return t;
}

// Linear least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

} // namespace

ConeCheck check_cone_condition(double alpha, double beta, double lipschitz, double delta) {
    if (!(delta > 0.0)) {
        throw InvalidArgument("cone aperture delta must be positive");
    }
    ConeCheck c;
    c.margin = alpha - beta + 2.0 * lipschitz + delta * lipschitz + lipschitz / delta;
    c.k_rate = beta - lipschitz - lipschitz / delta;
    c.satisfied = c.margin < 0.0;
    return c;
}

ConeReport cone_monitor(const SpectralModel& model, const Trajectory& differences, double delta, double tol_cone) {
    ConeReport rep;
    rep.inside.reserve(differences.size());
    bool was_inside = false;
    for (std::size_t i = 0; i < differences.size(); ++i) {
        const StateVector& d = differences.states[i];
        const bool in = project_s(model, d).norm() <= delta * project_c(model, d).norm() * (1.0 + tol_cone);
        rep.inside.push_back(in);
        if (in && !rep.entry_time) {
            rep.entry_time = differences.time(i);
        }
        if (!in && was_inside && !rep.violation) {
            rep.violation = differences.time(i);
        }
        was_inside = was_inside || in;
    }
    return rep;
}

Trajectory difference(const Trajectory& a, const Trajectory& b) {
    require_same_grid(a, b, "difference");
    Trajectory d = a;
    d.scheme_id = "difference";
    const std::size_t n = std::min(a.size(), b.size());
    d.states.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.states[i] = a.states[i] - b.states[i];
    }
    return d;
}

ReducedResult integrate_reduced(const ManifoldMap& mm, const StateVector& vc0, double t0, double t1) {
    const SpectralModel& model = mm.model();
    const OUProcess& ou = mm.ou();
    model.check_conforms(vc0, "integrate_reduced");
    if (!(t1 > t0)) {
        throw InvalidArgument("integrate_reduced: need t1 > t0");
    }
    const std::int64_t k0 = mm.fiber_index(t0);
    const std::int64_t k1 = mm.fiber_index(t1);
    const double h = ou.dt();
    const Eigen::ArrayXd cmask = model.center_mask();

    ReducedResult res;
    res.center = start_trajectory(ou, k0, k1, "reduced-exponential-heun");
    res.reconstructed = start_trajectory(ou, k0, k1, "reduced-exponential-heun");

    ManifoldCursor cursor(mm);
    StateVector v = project_c(model, vc0);
    HsResult on_graph = cursor.eval(v, k0, true);
    res.center.states.push_back(v);
    res.reconstructed.states.push_back(v + on_graph.value);

    for (std::int64_t k = k0; k < k1; ++k) {
        const std::int64_t step = k - k0;
        const double growth = std::exp(ou.dZ(k));
        const StateVector g0 = (eval_G(model, ou.z(k), v + on_graph.value).array() * cmask).matrix();
        const StateVector pred = mm.forward().apply(v + h * g0, growth, Part::center);
        const HsResult pred_graph = cursor.eval(pred, k + 1, (step + 1) % kColdRestartEvery == 0);
        const StateVector g1 = (eval_G(model, ou.z(k + 1), pred + pred_graph.value).array() * cmask).matrix();
        v = mm.forward().apply(v + (0.5 * h) * g0, growth, Part::center) + (0.5 * h) * g1;
        if (!v.allFinite()) {
            throw NumericalFailure("integrate_reduced: non-finite state at t = " +
                                       std::to_string(static_cast<double>(k + 1) * h),
                                   static_cast<double>(k + 1) * h);
        }
        on_graph = cursor.eval(v, k + 1, false);
        res.center.states.push_back(v);
        res.reconstructed.states.push_back(v + on_graph.value);
    }
    res.max_iterations = cursor.max_iterations();
    return res;
}

ReducedResult integrate_reduced_sde(const ManifoldMap& mm, const WienerPath& path, const StateVector& uc0,
                                    double t0, double t1) {
    const SpectralModel& model = mm.model();
    const OUProcess& ou = mm.ou();
    model.check_conforms(uc0, "integrate_reduced_sde");
    if (std::fabs(path.dt() - ou.dt()) > 1e-12 * ou.dt() || path.seed() != ou.seed()) {
        throw InvalidArgument("integrate_reduced_sde: path and OU process come from different noise");
    }
    if (!(t1 > t0)) {
        throw InvalidArgument("integrate_reduced_sde: need t1 > t0");
    }
    const std::int64_t k0 = mm.fiber_index(t0);
    const std::int64_t k1 = mm.fiber_index(t1);
    if (!path.contains(k0) || !path.contains(k1)) {
        throw InvalidArgument("integrate_reduced_sde: window is outside the path grid");
    }
    const double h = ou.dt();
    const Eigen::ArrayXd cmask = model.center_mask();

    ManifoldCursor cursor(mm);
    // hbar^s(u) = e^{z} h^s(e^{-z} u) at fiber k
    auto lift = [&](const StateVector& u, std::int64_t k, bool cold) {
        const double z = ou.z(k);
        return StateVector(std::exp(z) * cursor.eval(std::exp(-z) * u, k, cold).value);
    };
    auto drift = [&](const StateVector& u, const StateVector& lifted) {
        return StateVector(((apply_generator(model, u) + eval_F(model, u + lifted)).array() * cmask).matrix());
    };

    ReducedResult res;
    res.center = start_trajectory(ou, k0, k1, "reduced-stratonovich-heun");
    res.reconstructed = start_trajectory(ou, k0, k1, "reduced-stratonovich-heun");

    StateVector u = project_c(model, uc0);
    StateVector lifted = lift(u, k0, true);
    res.center.states.push_back(u);
    res.reconstructed.states.push_back(u + lifted);
    for (std::int64_t k = k0; k < k1; ++k) {
        const std::int64_t step = k - k0;
        const double dw = path.increment(k);
        const StateVector a0 = drift(u, lifted);
        const StateVector pred = u + h * a0 + dw * u;
        const StateVector a1 = drift(pred, lift(pred, k + 1, (step + 1) % kColdRestartEvery == 0));
        u = u + (0.5 * h) * (a0 + a1) + (0.5 * dw) * (u + pred);
        if (!u.allFinite()) {
            throw NumericalFailure("integrate_reduced_sde: non-finite state at t = " +
                                       std::to_string(static_cast<double>(k + 1) * h),
                                   static_cast<double>(k + 1) * h);
        }
        lifted = lift(u, k + 1, false);
        res.center.states.push_back(u);
        res.reconstructed.states.push_back(u + lifted);
    }
    res.max_iterations = cursor.max_iterations();
    return res;
}

TrackingOrbit tracking_orbit(const ManifoldMap& mm, const Trajectory& full_traj, double tau,
                             const std::vector<double>& cauchy_taus) {
    const SpectralModel& model = mm.model();
    const OUProcess& ou = mm.ou();
    if (std::fabs(full_traj.dt - ou.dt()) > 1e-12 * ou.dt()) {
        throw InvalidArgument("tracking_orbit: trajectory is not on the OU grid");
    }
    const double t0 = full_traj.t0;
    if (!(tau > 0.0) || t0 + tau > full_traj.t1() + 1e-9 * std::max(1.0, tau)) {
        throw InvalidArgument("tracking_orbit: tau outside the trajectory window");
    }
    const std::int64_t fiber = mm.fiber_index(t0);

    TrackingOrbit out;
    for (double t : cauchy_taus) {
        const BackwardResult b = backward_solve(mm, project_c(model, full_traj.at(t0 + t)), t, t0);
        out.taus.push_back(t);
        out.tau_centers.push_back(project_c(model, b.trajectory.states.front()));
        if (out.tau_centers.size() > 1) {
            out.cauchy_gaps.push_back((out.tau_centers.back() - out.tau_centers[out.tau_centers.size() - 2]).norm());
        }
    }

    const StateVector target = project_c(model, full_traj.at(t0 + tau));
    const BackwardResult b = backward_solve(mm, target, tau, t0);
    out.backward_center = project_c(model, b.trajectory.states.front());

    // Shooting on the discrete flow: find c with P_c phi(tau)(c + h^s(c)) = target.
    const std::vector<int>& idx = model.center_indices();
    const auto nc = static_cast<Eigen::Index>(idx.size());
    auto residual = [&](const StateVector& c) {
        const StateVector start = c + hs_eval(mm, c, fiber).value;
        const Trajectory run = integrate_random_pde(model, ou, start, t0, t0 + tau);
        Eigen::VectorXd r(nc);
        for (Eigen::Index j = 0; j < nc; ++j) {
            r(j) = run.back()(idx[static_cast<std::size_t>(j)]) - target(idx[static_cast<std::size_t>(j)]);
        }
        return r;
    };
    StateVector c = out.backward_center;
    Eigen::VectorXd r = residual(c);
    const double scale = std::max(1.0, target.norm());
    for (int it = 0; it < 20 && r.norm() > 1e-13 * scale; ++it) {
        Eigen::MatrixXd jac(nc, nc);
        const double eps = 1e-6 * std::max(1.0, c.norm());
        for (Eigen::Index j = 0; j < nc; ++j) {
            StateVector cp = c;
            cp(idx[static_cast<std::size_t>(j)]) += eps;
            jac.col(j) = (residual(cp) - r) / eps;
        }
        const Eigen::VectorXd step = jac.fullPivLu().solve(-r);
        StateVector trial = c;
        for (Eigen::Index j = 0; j < nc; ++j) {
            trial(idx[static_cast<std::size_t>(j)]) += step(j);
        }
        const Eigen::VectorXd rt = residual(trial);
        ++out.shooting_iterations;
        if (!(rt.norm() < r.norm())) {
            break;
        }
        c = trial;
        r = rt;
    }
    out.shooting_residual = r.norm();
    out.initial_center = c;
    out.orbit = integrate_random_pde(model, ou, c + hs_eval(mm, c, fiber).value, t0, full_traj.t1());
    out.orbit.scheme_id = "tracking-orbit";
    return out;
}

TrackingReport verify_completeness(const ManifoldMap& mm, const Trajectory& full_traj, const Trajectory& tracking,
                                   const ConeParams& cone, const CompletenessOptions& options) {
    require_same_grid(full_traj, tracking, "verify_completeness");
    const OUProcess& ou = mm.ou();
    const std::int64_t k0 = ou.index_of(full_traj.t0);
    std::size_t n = std::min(full_traj.size(), tracking.size());
    if (options.horizon > 0.0) {
        n = std::min(n, static_cast<std::size_t>(grid_index(options.horizon, full_traj.dt)) + 1);
    }

    TrackingReport rep;
    rep.k_theoretical = cone.k_rate;
    const double z0 = ou.z(k0);
    const double Z0 = ou.Z(k0);
    std::vector<double> noise_free;
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = k0 + static_cast<std::int64_t>(i);
        const double d = std::exp(ou.z(k)) * (full_traj.states[i] - tracking.states[i]).norm();
        rep.times.push_back(full_traj.time(i));
        rep.distances.push_back(d);
        noise_free.push_back(d * std::exp(-(ou.z(k) - z0) - (ou.Z(k) - Z0)));
    }
    const Trajectory diffs = difference(tracking, full_traj);
    rep.cone_entry_time = cone_monitor(mm.model(), diffs, cone.delta).entry_time;

    const double d0 = rep.distances.front();
    if (!(d0 > 0.0)) {
        rep.degenerate = rep.rate_ok = rep.D_ok = true;
        return rep;
    }
    const double t_start = full_traj.t0;
    const double span = rep.times.back() - t_start;
    std::vector<double> ts, log_nf, log_raw;
    for (std::size_t i = 0; i < n; ++i) {
        const double rel = rep.times[i] - t_start;
        rep.D_estimate = std::max(rep.D_estimate, rep.distances[i] * std::exp(cone.k_rate * rel) / d0);
        if (rel < options.transient_fraction * span || !(rep.distances[i] > options.floor * d0)) {
            continue;
        }
        ts.push_back(rel);
        log_nf.push_back(std::log(noise_free[i]));
        log_raw.push_back(std::log(rep.distances[i]));
    }
    if (ts.size() < 2) {
        rep.degenerate = rep.rate_ok = true;
        rep.D_ok = rep.D_estimate <= options.D_bound;
        return rep;
    }
    rep.fitted_rate = ls_slope(ts, log_nf);
    rep.raw_rate = ls_slope(ts, log_raw);
    rep.rate_ok = rep.fitted_rate <= -cone.k_rate * (1.0 - options.rate_tol);
    rep.D_ok = rep.D_estimate <= options.D_bound;
    return rep;
}

} // namespace stochmanifold
