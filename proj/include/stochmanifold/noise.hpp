#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace stochmanifold {

// Counter-based generator (Random123 Philox4x32 with 10 rounds). Output for a
// given (key, counter) pair is identical on every platform.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key) noexcept;

    Block operator()(std::uint64_t counter_lo, std::uint64_t counter_hi = 0) const noexcept;

    // Standard normal from the block at `counter` (Box-Muller, cosine branch).
    double normal(std::uint64_t counter) const noexcept;

private:
    std::array<std::uint32_t, 2> key_;
};

inline constexpr const char* kGeneratorId = "philox4x32-10/box-muller";

// Maximum number of grid points a single path may hold.
inline constexpr std::int64_t kMaxGridPoints = 50'000'000;

class WienerPath;
class OUProcess;

// sample_wiener: independent N(0, dt) increments from Philox keyed by `seed`;
// the increment over [k dt, (k+1) dt] depends only on (seed, k, dt), so
// overlapping windows agree. Values are re-anchored so that W(0) = 0.
//
// make_path: builds a path from explicit grid values (e.g. the zero path in
// tests), re-anchored at t = 0 when 0 is on the grid.
//
// shift: theta_t, s -> w(s + t) - w(t).
// refine: integer refinement with linear interpolation between grid values.
// coarsen: keeps every `factor`-th grid point, aligned to the time origin.
WienerPath sample_wiener(std::uint64_t seed, double t_min, double t_max, double dt);
WienerPath make_path(std::vector<double> values, double t_min, double dt, std::uint64_t seed = 0,
                     std::string generator_id = "explicit");
WienerPath shift(const WienerPath& path, double t);
WienerPath refine(const WienerPath& path, int factor);
WienerPath coarsen(const WienerPath& path, int factor);
inline constexpr double kDefaultBurnIn = 20.0;
// ou_stationary: z starts from 0 at t_min (the history integral with no samples before the
// window) and follows the exact one-step recursion for piecewise linear W.
// Output covers [t_min + burn_in, t_max].
OUProcess ou_stationary(const WienerPath& path, double burn_in = kDefaultBurnIn);

// Converts a time to a grid index; throws if `t` is not a multiple of `dt`.
std::int64_t grid_index(double t, double dt);

/// Brownian sample path on a uniform grid.
///
/// The cumulative values live in a shared immutable buffer. Shifting only
/// moves the time origin and the anchor, so shift(shift(w, s), t) and
/// shift(w, s + t) read the same numbers.
class WienerPath {
public:
    double dt() const noexcept { return dt_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& generator_id() const noexcept { return generator_id_; }

    // Grid indices are relative to the path's own time origin: t = k * dt.
    std::int64_t k_min() const noexcept { return begin_ - origin_; }
    std::int64_t k_max() const noexcept { return end_ - origin_; }
    double t_min() const noexcept { return static_cast<double>(k_min()) * dt_; }
    double t_max() const noexcept { return static_cast<double>(k_max()) * dt_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(end_ - begin_ + 1); }

    double value(std::int64_t k) const;
    // W(t_{k+1}) - W(t_k), independent of the anchor.
    double increment(std::int64_t k) const;
    std::vector<double> values() const;

    bool contains(std::int64_t k) const noexcept { return k >= k_min() && k <= k_max(); }

    // Same underlying samples and window; origin may differ.
    bool same_source(const WienerPath& other) const noexcept { return raw_ == other.raw_; }

private:
    friend WienerPath sample_wiener(std::uint64_t, double, double, double);
    friend WienerPath shift(const WienerPath&, double);
    friend WienerPath refine(const WienerPath&, int);
    friend WienerPath coarsen(const WienerPath&, int);
    friend WienerPath make_path(std::vector<double>, double, double, std::uint64_t, std::string);

    std::shared_ptr<const std::vector<double>> raw_;
    std::int64_t raw_k0_ = 0;  // generation index of raw_[0]
    std::int64_t begin_ = 0;   // window, generation indices
    std::int64_t end_ = 0;
    std::int64_t origin_ = 0;  // generation index at path time 0
    std::int64_t anchor_ = 0;  // generation index where value() is 0
    double dt_ = 0.0;
    std::uint64_t seed_ = 0;
    std::string generator_id_;
};


/// Stationary Ornstein-Uhlenbeck process z(theta_t w) solving dz + z dt = dW,
/// with its running integral Z(t) = int_0^t z ds (trapezoidal).
class OUProcess {
public:
    double dt() const noexcept { return dt_; }
    std::int64_t k_min() const noexcept { return k_begin_; }
    std::int64_t k_max() const noexcept { return k_begin_ + static_cast<std::int64_t>(z_.size()) - 1; }
    double t_min() const noexcept { return static_cast<double>(k_min()) * dt_; }
    double t_max() const noexcept { return static_cast<double>(k_max()) * dt_; }
    bool contains(std::int64_t k) const noexcept { return k >= k_min() && k <= k_max(); }
    std::int64_t index_of(double t) const;

    double z(std::int64_t k) const { return z_[offset(k)]; }
    double Z(std::int64_t k) const { return Z_[offset(k)]; }
    // Trapezoidal integral of z over [t_k, t_{k+1}].
    double dZ(std::int64_t k) const;

    const std::vector<double>& z_values() const noexcept { return z_; }
    const std::vector<double>& Z_values() const noexcept { return Z_; }

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& generator_id() const noexcept { return generator_id_; }
    double burn_in() const noexcept { return burn_in_; }

private:
    friend OUProcess ou_stationary(const WienerPath&, double);

    std::size_t offset(std::int64_t k) const;

    std::int64_t k_begin_ = 0;
    double dt_ = 0.0;
    double burn_in_ = 0.0;
    std::vector<double> z_;
    std::vector<double> Z_;
    std::uint64_t seed_ = 0;
    std::string generator_id_;
};


// Cumulative left-point residual of dz + z dt = dW,
//   R_n = z_n - z_0 + dt * sum_{j<n} z_j - (W_n - W_0),
// maximised over the OU grid. Scales linearly with dt on a fixed path.
double ou_residual(const WienerPath& path, const OUProcess& ou);

// Per-path seed for ensemble member `index`.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

} // namespace stochmanifold
