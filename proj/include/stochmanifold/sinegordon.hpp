#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stochmanifold/manifold.hpp"
#include "stochmanifold/model.hpp"
#include "stochmanifold/noise.hpp"

namespace stochmanifold {

/// Damped wave equation u_tt + a u_t = nu u_xx + b u + f(u) + u o dW/dt on
/// (0, 2 pi) with Dirichlet data, truncated to the sine modes 1..K.
struct HyperbolicModel {
    double a = 2.0;
    double nu = 1.0;
    double b = 4.0;
    std::string f_name = "sin";
    double f_scale = 1.0;
    int K = 16;
    int grid_size = 0;  // 0: ceil(1.5 K)

    void validate() const;
    ScalarFunction f() const;
    double lipschitz_f() const;
    int collocation_points() const;
    // b = 4 nu and nu = a^2 / 4
    bool special_case(double rel_tol = 1e-12) const;
    // nu k^2 - b: the coefficient of u_k in the second-order equation
    double stiffness(int k) const;
};

// Sine coefficients of both components, mode k at index k - 1.
struct HyperbolicState {
    Eigen::VectorXd u;
    Eigen::VectorXd v;
};

HyperbolicState zero_state(const HyperbolicModel& model);

struct ModeSpectrum {
    int k = 1;
    bool complex_pair = false;
    std::complex<double> delta_minus;
    std::complex<double> delta_plus;
};

// Roots a/2 -+ sqrt(a^2/4 + b - nu k^2) of the mode operator.
ModeSpectrum anu_spectrum(const HyperbolicModel& model, int k);

// Mode operator [[0, -1], [nu k^2 - b, a]] applied to (x, y), complex arithmetic.
std::array<std::complex<double>, 2> anu_apply(const HyperbolicModel& model, int k,
                                              const std::array<std::complex<double>, 2>& w);

// Eigenvector (1, -delta) of the mode operator.
std::array<std::complex<double>, 2> anu_eigenvector(const HyperbolicModel& model, int k, std::complex<double> delta);

// |A w - delta w| for the eigenpair of root delta.
double eigen_residual(const HyperbolicModel& model, int k, std::complex<double> delta);

enum class EnergyForm { low_modes, high_modes, full };

/// Energy inner product. Modes 1 and 2 use
///   2 pi [(a^2/4 - (nu k^2 - b)) x x' + (a x/2 + y)(a x'/2 + y')],
/// modes k >= 3 use the coefficient (nu k^2 - b) - a^2/4 instead. `low_modes`
/// and `high_modes` require their inputs to live on those modes.
double energy_inner_product(const HyperbolicModel& model, const HyperbolicState& U1, const HyperbolicState& U2,
                            EnergyForm form = EnergyForm::full);
double energy_norm(const HyperbolicModel& model, const HyperbolicState& U);

// H_0^1 x L^2 norm: pi sum (k^2 u_k^2 + v_k^2), square-rooted.
double standard_norm(const HyperbolicModel& model, const HyperbolicState& U);
double l2_norm(const Eigen::VectorXd& sine_coeffs);

struct NormEquivalence {
    double lower = 0.0;  // min ||U||_E / ||U||_std
    double upper = 0.0;
};

// Exact bounds over the truncation, mode by mode.
NormEquivalence norm_equivalence(const HyperbolicModel& model);

/// Spectral form of the special case for the generic pipeline. Blocks:
/// [mode 1 growing, mode 2 neutral | mode 1 decaying, mode 2 decaying, modes 3..K pairs].
struct SineGordonSystem {
    HyperbolicModel physical;
    SpectralModel model;
    std::vector<Eigen::Matrix2d> basis;          // columns: energy-orthonormal vectors of mode k in (u_k, v_k)
    std::vector<Eigen::Matrix2d> basis_inverse;
    std::vector<std::array<int, 2>> index;       // spectral indices of the two basis vectors of mode k
    double smallness_published = 0.0;                       // 8 L_f / a^2
    double smallness_derived = 0.0;                     // 16 L_f / a^2
    double projection_mode1 = 0.0;                // amplitude gain of P_c (0, w sin x)
    double projection_mode2 = 0.0;

    StateVector to_spectral(const HyperbolicState& U) const;
    HyperbolicState to_physical(const StateVector& c) const;
    // center coordinates of u1 sin x (growing) and u2 sin 2x (neutral) on the center directions
    StateVector center_from_amplitudes(double u1, double u2) const;
    std::array<double, 2> amplitudes_from_center(const StateVector& c) const;
};

inline constexpr double kPublishedMode1Coefficient = 1.2649110640673518;  // 2 sqrt(10) / 5

SineGordonSystem build_spectral_model(const HyperbolicModel& model);

// (u, v) -> (u, v - u z) and back.
HyperbolicState doob_transform(const HyperbolicState& state, double z_value);
HyperbolicState doob_inverse(const HyperbolicState& state, double z_value);

struct HyperbolicTrajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<HyperbolicState> states;
};

// du = v dt, dv = (-(nu k^2 - b) u - a v + P f(u)) dt + u o dW: stochastic Heun.
HyperbolicTrajectory integrate_hyperbolic_stratonovich(const HyperbolicModel& model, const WienerPath& path,
                                                       const HyperbolicState& U0, double t0, double t1);

/// Transformed system for (u, v - u z):
///   u' = v + z u,  v' = -(nu k^2 - b) u - a v + P f(u) + (z - a z - z^2) u - z v,
/// Heun with z taken at both ends of each step. Returned in transformed coordinates.
HyperbolicTrajectory integrate_hyperbolic_random(const HyperbolicModel& model, const OUProcess& ou,
                                                 const HyperbolicState& Phi0, double t0, double t1);

struct ReducedSgResult {
    Trajectory amplitudes;  // (u1, u2)
    bool blew_up = false;
    std::optional<double> blowup_time;
};

/// Two-dimensional reduced equation for the amplitudes of sin x and sin 2x:
///   du1 = ((a/2) u1 + c1 P_1 f(U)) dt + u1 o dW,  du2 = c2 P_2 f(U) dt + u2 o dW,
/// U = u1 sin x + u2 sin 2x + hbar^s(u1, u2), hbar^s from `mm` (built on sys.model).
/// Stops when |(u1, u2)| exceeds `blowup`.
ReducedSgResult integrate_reduced_sg(const SineGordonSystem& sys, const ManifoldMap& mm, const WienerPath& path,
                                     double u1_0, double u2_0, double t0, double t1, double blowup = 1e6);

struct StationaryOptions {
    double T = 200.0;
    double dt = 0.01;
    int n_paths = 64;
    std::uint64_t master_seed = 1;
    std::array<double, 2> first_start{0.01, 0.5};
    std::array<double, 2> second_start{-0.01, -0.5};
    double blowup = 1e6;
    double sync_ratio = 1e-6;
    int histogram_bins = 20;
    ManifoldOptions manifold;
};

struct PathStationarity {
    std::uint64_t seed = 0;
    bool blew_up = false;
    std::optional<double> blowup_time;
    double initial_gap = 0.0;
    double final_gap = 0.0;
    bool synchronized = false;
    std::array<double, 2> ks{0.0, 0.0};
    double ks_critical = 0.0;
    bool ks_pass = false;
    std::array<std::vector<double>, 2> histogram_edges;
    std::array<std::vector<int>, 2> histogram_counts;
};

struct StationaryReport {
    double growth_rate_linear = 0.0;      // largest center real part
    bool linearization_contracting = false;
    std::vector<PathStationarity> paths;  // by path index
    double ks_pass_fraction = 0.0;
    double sync_pass_fraction = 0.0;
    int blowups = 0;
};

// Two-sample Kolmogorov-Smirnov statistic and the 1% critical value.
double ks_statistic(std::vector<double> x, std::vector<double> y);
double ks_critical_1pct(std::size_t n, std::size_t m);

StationaryReport detect_stationary(const SineGordonSystem& sys, const StationaryOptions& options);

// Center-coordinate comparison used for the reduction check.
struct ReductionGap {
    double sup_gap = 0.0;       // sup_t |amplitudes_full - amplitudes_reduced|
    double sup_scale = 0.0;     // sup_t |amplitudes_full|
    double relative() const noexcept { return sup_scale > 0.0 ? sup_gap / sup_scale : 0.0; }
};

/// Starts on the manifold at (u1, u2) and compares the full spectral
/// simulation with the reduced equation over [0, T] on one path.
ReductionGap reduction_gap(const SineGordonSystem& sys, const WienerPath& path, double u1, double u2, double T,
                           const ManifoldOptions& options = {});

} // namespace stochmanifold
