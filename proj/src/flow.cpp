#include "stochmanifold/flow.hpp"

#include <cmath>

#include "stochmanifold/error.hpp"

namespace stochmanifold {

const StateVector& Trajectory::at(double t) const {
    const std::int64_t i = grid_index(t - t0, dt);
    if (i < 0 || i >= static_cast<std::int64_t>(states.size())) {
        throw InvalidArgument("trajectory has no state at t = " + std::to_string(t));
    }
    return states[static_cast<std::size_t>(i)];
}

StateVector transform_to_v(double z_value, const StateVector& x) {
    return std::exp(-z_value) * x;
}

StateVector transform_to_u(double z_value, const StateVector& x) {
    return std::exp(z_value) * x;
}

Trajectory to_original_coordinates(const Trajectory& v_traj, const OUProcess& ou) {
    if (std::fabs(v_traj.dt - ou.dt()) > 1e-12 * ou.dt()) {
        throw InvalidArgument("to_original_coordinates: trajectory and OU grids differ");
    }
    Trajectory u = v_traj;
    const std::int64_t k0 = ou.index_of(v_traj.t0);
    for (std::size_t i = 0; i < u.states.size(); ++i) {
        u.states[i] = transform_to_u(ou.z(k0 + static_cast<std::int64_t>(i)), v_traj.states[i]);
    }
    return u;
}

namespace {

std::pair<std::int64_t, std::int64_t> window(double t0, double t1, double dt) {
    if (!(t1 > t0)) {
        throw InvalidArgument("integration window needs t1 > t0");
    }
    return {grid_index(t0, dt), grid_index(t1, dt)};
}

} // namespace

Trajectory integrate_random_pde(const SpectralModel& model, const OUProcess& ou, const StateVector& v0, double t0,
                                double t1) {
    model.check_conforms(v0, "integrate_random_pde");
    const double h = ou.dt();
    const auto [k0, k1] = window(t0, t1, h);
    if (!ou.contains(k0) || !ou.contains(k1)) {
        throw InvalidArgument("integrate_random_pde: window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                              "] is outside the OU grid [" + std::to_string(ou.t_min()) + ", " +
                              std::to_string(ou.t_max()) + "]");
    }
    const BlockPropagator prop(model, h);
    const bool linear = model.nonlinearity().is_zero;

    Trajectory traj;
    traj.t0 = static_cast<double>(k0) * h;
    traj.dt = h;
    traj.seed = ou.seed();
    traj.generator_id = ou.generator_id();
    traj.scheme_id = kSchemeExponentialHeun;
    traj.states.reserve(static_cast<std::size_t>(k1 - k0 + 1));
    traj.states.push_back(v0);

    StateVector v = v0;
    for (std::int64_t k = k0; k < k1; ++k) {
        const double growth = std::exp(ou.dZ(k));
        if (linear) {
            prop.apply(v, growth, Part::full, v);
        } else {
            const StateVector g0 = eval_G(model, ou.z(k), v);
            const StateVector pred = prop.apply(v + h * g0, growth);
            const StateVector g1 = eval_G(model, ou.z(k + 1), pred);
            v = prop.apply(v + (0.5 * h) * g0, growth) + (0.5 * h) * g1;
        }
        if (!v.allFinite()) {
            throw NumericalFailure("integrate_random_pde: non-finite state at t = " +
                                       std::to_string(static_cast<double>(k + 1) * h),
                                   static_cast<double>(k + 1) * h);
        }
        traj.states.push_back(v);
    }
    return traj;
}

Trajectory integrate_spde_stratonovich(const SpectralModel& model, const WienerPath& path, const StateVector& u0,
                                       double t0, double t1) {
    model.check_conforms(u0, "integrate_spde_stratonovich");
    const double h = path.dt();
    const auto [k0, k1] = window(t0, t1, h);
    if (!path.contains(k0) || !path.contains(k1)) {
        throw InvalidArgument("integrate_spde_stratonovich: window is outside the path grid");
    }
    auto drift = [&](const StateVector& u) { return StateVector(apply_generator(model, u) + eval_F(model, u)); };

    Trajectory traj;
    traj.t0 = static_cast<double>(k0) * h;
    traj.dt = h;
    traj.seed = path.seed();
    traj.generator_id = path.generator_id();
    traj.scheme_id = kSchemeStratonovichHeun;
    traj.states.reserve(static_cast<std::size_t>(k1 - k0 + 1));
    traj.states.push_back(u0);

    StateVector u = u0;
    for (std::int64_t k = k0; k < k1; ++k) {
        const double dw = path.increment(k);
        const StateVector a0 = drift(u);
        const StateVector pred = u + h * a0 + dw * u;
        u = u + (0.5 * h) * (a0 + drift(pred)) + (0.5 * dw) * (u + pred);
        if (!u.allFinite()) {
            throw NumericalFailure("integrate_spde_stratonovich: non-finite state at t = " +
                                       std::to_string(static_cast<double>(k + 1) * h),
                                   static_cast<double>(k + 1) * h);
        }
        traj.states.push_back(u);
    }
    return traj;
}

} // namespace stochmanifold
