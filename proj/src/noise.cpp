#include "stochmanifold/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stochmanifold/error.hpp"

namespace stochmanifold {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// Uniform on (0, 1] with 53 random bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

Philox4x32::Philox4x32(std::uint64_t key) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

Philox4x32::Block Philox4x32::operator()(std::uint64_t counter_lo,
                                         std::uint64_t counter_hi) const noexcept {
    Block ctr{static_cast<std::uint32_t>(counter_lo), static_cast<std::uint32_t>(counter_lo >> 32),
              static_cast<std::uint32_t>(counter_hi), static_cast<std::uint32_t>(counter_hi >> 32)};
    std::uint32_t k0 = key_[0];
    std::uint32_t k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return ctr;
}

double Philox4x32::normal(std::uint64_t counter) const noexcept {
    const Block b = (*this)(counter);
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t grid_index(double t, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InvalidArgument("time step must be positive and finite");
    }
    const double q = t / dt;
    if (!std::isfinite(q) || std::fabs(q) > 9.0e15) {
        throw InvalidArgument("time out of representable grid range");
    }
    const double k = std::nearbyint(q);
    if (std::fabs(q - k) > 1e-6) {
        throw InvalidArgument("time " + std::to_string(t) + " is not a multiple of dt = " +
                              std::to_string(dt));
    }
    return static_cast<std::int64_t>(k);
}

// ---------------------------------------------------------------------------
// WienerPath

double WienerPath::value(std::int64_t k) const {
    if (!contains(k)) {
        throw InvalidArgument("grid index outside path window");
    }
    const auto& r = *raw_;
    return r[static_cast<std::size_t>(k + origin_ - raw_k0_)] -
           r[static_cast<std::size_t>(anchor_ - raw_k0_)];
}

double WienerPath::increment(std::int64_t k) const {
    if (!contains(k) || !contains(k + 1)) {
        throw InvalidArgument("increment outside path window");
    }
    const auto& r = *raw_;
    const auto j = static_cast<std::size_t>(k + origin_ - raw_k0_);
    return r[j + 1] - r[j];
}

std::vector<double> WienerPath::values() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::int64_t k = k_min(); k <= k_max(); ++k) {
        out.push_back(value(k));
    }
    return out;
}

WienerPath sample_wiener(std::uint64_t seed, double t_min, double t_max, double dt) {
    if (!(dt > 0.0)) {
        throw InvalidArgument("sample_wiener: dt must be positive");
    }
    if (!(t_min < t_max)) {
        throw InvalidArgument("sample_wiener: t_min must be below t_max");
    }
    const std::int64_t lo = grid_index(t_min, dt);
    const std::int64_t hi = grid_index(t_max, dt);
    if (hi - lo + 1 > kMaxGridPoints) {
        throw InvalidArgument("sample_wiener: grid exceeds budget of " +
                              std::to_string(kMaxGridPoints) + " points");
    }
    const Philox4x32 rng(seed);
    const double sd = std::sqrt(dt);
    auto raw = std::make_shared<std::vector<double>>(static_cast<std::size_t>(hi - lo + 1));
    (*raw)[0] = 0.0;
    for (std::int64_t k = lo; k < hi; ++k) {
        const auto j = static_cast<std::size_t>(k - lo);
        (*raw)[j + 1] = (*raw)[j] + sd * rng.normal(static_cast<std::uint64_t>(k));
    }
    WienerPath p;
    p.raw_ = std::move(raw);
    p.raw_k0_ = lo;
    p.begin_ = lo;
    p.end_ = hi;
    p.origin_ = 0;
    p.anchor_ = std::clamp<std::int64_t>(0, lo, hi);
    p.dt_ = dt;
    p.seed_ = seed;
    p.generator_id_ = kGeneratorId;
    return p;
}

WienerPath make_path(std::vector<double> values, double t_min, double dt, std::uint64_t seed,
                     std::string generator_id) {
    if (values.size() < 2) {
        throw InvalidArgument("make_path: need at least two grid values");
    }
    const std::int64_t lo = grid_index(t_min, dt);
    const std::int64_t hi = lo + static_cast<std::int64_t>(values.size()) - 1;
    WienerPath p;
    p.raw_ = std::make_shared<std::vector<double>>(std::move(values));
    p.raw_k0_ = lo;
    p.begin_ = lo;
    p.end_ = hi;
    p.origin_ = 0;
    p.anchor_ = std::clamp<std::int64_t>(0, lo, hi);
    p.dt_ = dt;
    p.seed_ = seed;
    p.generator_id_ = std::move(generator_id);
    return p;
}

WienerPath shift(const WienerPath& path, double t) {
    const std::int64_t m = grid_index(t, path.dt_);
    const std::int64_t origin = path.origin_ + m;
    if (origin < path.begin_ || origin > path.end_) {
        throw InvalidArgument("shift: new time origin falls outside the path window");
    }
    WienerPath p = path;
    p.origin_ = origin;
    p.anchor_ = origin;
    return p;
}

WienerPath refine(const WienerPath& path, int factor) {
    if (factor < 1) {
        throw InvalidArgument("refine: factor must be >= 1");
    }
    if (factor == 1) {
        return path;
    }
    const std::int64_t n = path.end_ - path.begin_;
    if (n * factor + 1 > kMaxGridPoints) {
        throw InvalidArgument("refine: grid exceeds budget");
    }
    const auto& r = *path.raw_;
    auto raw = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * factor + 1));
    for (std::int64_t j = 0; j < n; ++j) {
        const double a = r[static_cast<std::size_t>(path.begin_ + j - path.raw_k0_)];
        const double b = r[static_cast<std::size_t>(path.begin_ + j + 1 - path.raw_k0_)];
        for (int i = 0; i < factor; ++i) {
            (*raw)[static_cast<std::size_t>(j * factor + i)] =
                a + (static_cast<double>(i) / factor) * (b - a);
        }
    }
    (*raw)[static_cast<std::size_t>(n * factor)] = r[static_cast<std::size_t>(path.end_ - path.raw_k0_)];

    WienerPath p;
    p.raw_ = std::move(raw);
    p.raw_k0_ = path.begin_ * factor;
    p.begin_ = path.begin_ * factor;
    p.end_ = path.end_ * factor;
    p.origin_ = path.origin_ * factor;
    p.anchor_ = path.anchor_ * factor;
    p.dt_ = path.dt_ / factor;
    p.seed_ = path.seed_;
    p.generator_id_ = path.generator_id_ + "|refine:" + std::to_string(factor);
    return p;
}

WienerPath coarsen(const WienerPath& path, int factor) {
    if (factor < 1) {
        throw InvalidArgument("coarsen: factor must be >= 1");
    }
    if (factor == 1) {
        return path;
    }
    if ((path.anchor_ - path.origin_) % factor != 0) {
        throw InvalidArgument("coarsen: anchor is not on the coarse grid");
    }
    const auto floor_div = [](std::int64_t a, std::int64_t b) {
        return a >= 0 ? a / b : -((-a + b - 1) / b);
    };
    const std::int64_t lo = -floor_div(-(path.begin_ - path.origin_), factor);
    const std::int64_t hi = floor_div(path.end_ - path.origin_, factor);
    if (hi - lo < 1) {
        throw InvalidArgument("coarsen: window too short for factor");
    }
    const auto& r = *path.raw_;
    auto raw = std::make_shared<std::vector<double>>(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t k = lo; k <= hi; ++k) {
        (*raw)[static_cast<std::size_t>(k - lo)] =
            r[static_cast<std::size_t>(path.origin_ + k * factor - path.raw_k0_)];
    }
    WienerPath p;
    p.raw_ = std::move(raw);
    p.raw_k0_ = lo;
    p.begin_ = lo;
    p.end_ = hi;
    p.origin_ = 0;
    p.anchor_ = (path.anchor_ - path.origin_) / factor;
    p.dt_ = path.dt_ * factor;
    p.seed_ = path.seed_;
    p.generator_id_ = path.generator_id_ + "|coarsen:" + std::to_string(factor);
    return p;
}

// ---------------------------------------------------------------------------
// OUProcess

std::size_t OUProcess::offset(std::int64_t k) const {
    if (!contains(k)) {
        throw InvalidArgument("OU grid index " + std::to_string(k) + " outside [" +
                              std::to_string(k_min()) + ", " + std::to_string(k_max()) + "]");
    }
    return static_cast<std::size_t>(k - k_begin_);
}

std::int64_t OUProcess::index_of(double t) const {
    const std::int64_t k = grid_index(t, dt_);
    if (!contains(k)) {
        throw InvalidArgument("time " + std::to_string(t) + " outside the OU window");
    }
    return k;
}

double OUProcess::dZ(std::int64_t k) const {
    const std::size_t j = offset(k);
    if (!contains(k + 1)) {
        throw InvalidArgument("OU step outside window");
    }
    return 0.5 * dt_ * (z_[j] + z_[j + 1]);
}

OUProcess ou_stationary(const WienerPath& path, double burn_in) {
    if (burn_in < 0.0) {
        throw InvalidArgument("ou_stationary: negative burn-in");
    }
    const double h = path.dt();
    const auto burn_steps = static_cast<std::int64_t>(std::ceil(burn_in / h - 1e-9));
    if (path.k_max() - path.k_min() <= burn_steps) {
        throw InvalidArgument("ou_stationary: path window shorter than the burn-in of " +
                              std::to_string(burn_in));
    }
    const double decay = std::exp(-h);
    const double gain = -std::expm1(-h) / h;  // (1 - e^{-h}) / h

    OUProcess ou;
    ou.dt_ = h;
    ou.burn_in_ = burn_in;
    ou.k_begin_ = path.k_min() + burn_steps;
    ou.seed_ = path.seed();
    ou.generator_id_ = path.generator_id();

    double z = 0.0;
    for (std::int64_t k = path.k_min(); k < ou.k_begin_; ++k) {
        z = decay * z + gain * path.increment(k);
    }
    const auto n = static_cast<std::size_t>(path.k_max() - ou.k_begin_ + 1);
    ou.z_.resize(n);
    ou.z_[0] = z;
    for (std::size_t j = 1; j < n; ++j) {
        const auto k = ou.k_begin_ + static_cast<std::int64_t>(j) - 1;
        z = decay * z + gain * path.increment(k);
        ou.z_[j] = z;
    }

    ou.Z_.resize(n);
    ou.Z_[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        ou.Z_[j] = ou.Z_[j - 1] + 0.5 * h * (ou.z_[j - 1] + ou.z_[j]);
    }
    if (ou.contains(0)) {
        const double base = ou.Z_[ou.offset(0)];
        for (double& v : ou.Z_) {
            v -= base;
        }
        ou.Z_[ou.offset(0)] = 0.0;
    }
    return ou;
}

double ou_residual(const WienerPath& path, const OUProcess& ou) {
    const double h = ou.dt();
    double sum = 0.0;
    double worst = 0.0;
    const double z0 = ou.z(ou.k_min());
    const double w0 = path.value(ou.k_min());
    for (std::int64_t k = ou.k_min() + 1; k <= ou.k_max(); ++k) {
        sum += ou.z(k - 1);
        const double r = ou.z(k) - z0 + h * sum - (path.value(k) - w0);
        worst = std::max(worst, std::fabs(r));
    }
    return worst;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

} // namespace stochmanifold
