#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stochmanifold/model.hpp"
#include "stochmanifold/noise.hpp"

namespace stochmanifold {

inline constexpr const char* kSchemeExponentialHeun = "exponential-heun";
inline constexpr const char* kSchemeStratonovichHeun = "stratonovich-heun";

struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<StateVector> states;
    std::uint64_t seed = 0;
    std::string generator_id;
    std::string scheme_id;

    double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    double t1() const noexcept { return time(states.size() - 1); }
    std::size_t size() const noexcept { return states.size(); }
    const StateVector& back() const { return states.back(); }

    // State at a grid time inside the recorded window.
    const StateVector& at(double t) const;
};

// T(w, x) = x e^{-z} and its inverse.
StateVector transform_to_v(double z_value, const StateVector& x);
StateVector transform_to_u(double z_value, const StateVector& x);

// Applies transform_to_u(z(t), .) along a trajectory recorded on the OU grid.
Trajectory to_original_coordinates(const Trajectory& v_traj, const OUProcess& ou);

/// v' = A v + G(z(theta_t w), v) + z v with the exponential Heun rule
///   E  = e^{hA + Z(t+h) - Z(t)},
///   v1 = E (v + h G(z_k, v)),
///   v' = E (v + h/2 G(z_k, v)) + h/2 G(z_{k+1}, v1).
/// Exact for F = 0. Step size is the OU grid spacing.
Trajectory integrate_random_pde(const SpectralModel& model, const OUProcess& ou, const StateVector& v0, double t0,
                                double t1);

/// du = (A u + F(u)) dt + u o dW, stochastic Heun on the path grid.
Trajectory integrate_spde_stratonovich(const SpectralModel& model, const WienerPath& path, const StateVector& u0,
                                       double t0, double t1);

} // namespace stochmanifold
