#pragma once

#include <optional>
#include <vector>

#include "stochmanifold/flow.hpp"
#include "stochmanifold/manifold.hpp"

namespace stochmanifold {

struct ConeParams {
    double delta = 1.0;
    double k_rate = 0.0;
};

struct ConeCheck {
    bool satisfied = false;
    double margin = 0.0;  // alpha - beta + 2 L_F + delta L_F + L_F / delta
    double k_rate = 0.0;  // beta - L_F - L_F / delta
};

ConeCheck check_cone_condition(double alpha, double beta, double lipschitz, double delta);

struct ConeReport {
    std::vector<bool> inside;
    std::optional<double> violation;   // first exit after having been inside
    std::optional<double> entry_time;  // first time inside
};

// Flags |P_s d| <= delta |P_c d| (1 + tol_cone) along a trajectory of differences.
ConeReport cone_monitor(const SpectralModel& model, const Trajectory& differences, double delta,
                        double tol_cone = 1e-3);

// Componentwise a - b on a shared grid.
Trajectory difference(const Trajectory& a, const Trajectory& b);

struct ReducedResult {
    Trajectory center;         // stable coefficients zero
    Trajectory reconstructed;  // center + manifold stable part
    int max_iterations = 0;    // worst fixed-point iteration count along the way
};

/// Center equation v_c' = A_c v_c + z v_c + g_c(v_c + h^s(v_c, theta_t w)) with
/// the exponential Heun rule of the full flow. Fixed points are warm-started
/// from the previous step and cold-started every 100 steps.
ReducedResult integrate_reduced(const ManifoldMap& mm, const StateVector& vc0, double t0, double t1);

/// du_c = (A_c u_c + F_c(u_c + hbar^s(u_c))) dt + u_c o dW with
/// hbar^s(u_c) = e^{z} h^s(e^{-z} u_c, theta_t w); stochastic Heun.
ReducedResult integrate_reduced_sde(const ManifoldMap& mm, const WienerPath& path, const StateVector& uc0,
                                    double t0, double t1);

struct TrackingOrbit {
    Trajectory orbit;  // on-manifold solution of the random PDE
    StateVector initial_center;
    StateVector backward_center;   // center value from the backward solve, before shooting
    int shooting_iterations = 0;
    double shooting_residual = 0.0;
    std::vector<double> taus;
    std::vector<StateVector> tau_centers;  // v_c(0; tau) for each tau
    std::vector<double> cauchy_gaps;       // |v_c(0; tau_{m+1}) - v_c(0; tau_m)|
};

/// On-manifold orbit through the full solution's center value at t0 + tau.
/// The backward solve gives the starting center value; a shooting correction
/// makes the discrete forward orbit hit the target exactly. `cauchy_taus`
/// (each <= tau) are solved as well for the convergence diagnostics.
TrackingOrbit tracking_orbit(const ManifoldMap& mm, const Trajectory& full_traj, double tau,
                             const std::vector<double>& cauchy_taus = {});

struct CompletenessOptions {
    double rate_tol = 0.15;
    double transient_fraction = 0.05;
    double floor = 1e-12;
    double D_bound = 1e3;
    double horizon = 0.0;  // 0: full common window
};

struct TrackingReport {
    std::vector<double> times;
    std::vector<double> distances;  // |u - U| in the original coordinates
    double fitted_rate = 0.0;       // slope of log distance with the noise factor removed
    double raw_rate = 0.0;          // slope of log distance as measured
    double k_theoretical = 0.0;
    double D_estimate = 1.0;
    std::optional<double> cone_entry_time;
    bool degenerate = false;
    bool rate_ok = false;
    bool D_ok = false;

    bool passed() const noexcept { return rate_ok && D_ok; }
};

/// Compares a full random-PDE trajectory with its tracking orbit (both in
/// transformed coordinates on the OU grid of `mm`).
TrackingReport verify_completeness(const ManifoldMap& mm, const Trajectory& full_traj, const Trajectory& tracking,
                                   const ConeParams& cone, const CompletenessOptions& options = {});

} // namespace stochmanifold
