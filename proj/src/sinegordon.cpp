#include "stochmanifold/sinegordon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stochmanifold/error.hpp"
#include "stochmanifold/flow.hpp"

namespace stochmanifold {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Energy form of mode k as a symmetric 2x2 matrix in (u_k, v_k).
Eigen::Matrix2d mode_form(const HyperbolicModel& m, int k) {
    const double q = m.a * m.a / 4.0;
    const double mu = m.stiffness(k);
    const double coef = k <= 2 ? q - mu : mu - q;
    Eigen::Matrix2d Q;
    Q << coef + q, m.a / 2.0, m.a / 2.0, 1.0;
    return 2.0 * kPi * Q;
}

// Generator of mode k for the first-order flow d(u, v)/dt = M (u, v).
Eigen::Matrix2d mode_generator(const HyperbolicModel& m, int k) {
    Eigen::Matrix2d M;
    M << 0.0, 1.0, -m.stiffness(k), -m.a;
    return M;
}

void require_state(const HyperbolicModel& m, const HyperbolicState& U, const char* where) {
    if (U.u.size() != m.K || U.v.size() != m.K) {
        throw InvalidArgument(std::string(where) + ": state does not have " + std::to_string(m.K) + " modes");
    }
}

struct Nemytskii {
    SineTransform transform;
    std::function<double(double)> f;

    Eigen::VectorXd operator()(const Eigen::VectorXd& u) const { return transform.project(f, u); }
};

Nemytskii make_nemytskii(const HyperbolicModel& m) {
    return {SineTransform(m.K, m.collocation_points()), m.f().f};
}

} // namespace

// ---------------------------------------------------------------------------
// HyperbolicModel

void HyperbolicModel::validate() const {
    if (!(a > 0.0) || !(nu > 0.0) || !std::isfinite(b)) {
        throw InvalidArgument("sine-gordon: need a > 0, nu > 0 and finite b");
    }
    if (K < 2) {
        throw InvalidArgument("sine-gordon: need at least two modes");
    }
    if (!std::isfinite(f_scale)) {
        throw InvalidArgument("sine-gordon: non-finite nonlinearity scale");
    }
    if (grid_size != 0 && grid_size < (3 * K + 1) / 2) {
        throw InvalidArgument("sine-gordon: collocation grid of " + std::to_string(grid_size) +
                              " points is below the dealiasing requirement of " + std::to_string((3 * K + 1) / 2));
    }
    builtin_function(f_name);
}

ScalarFunction HyperbolicModel::f() const {
    ScalarFunction base = builtin_function(f_name);
    const double c = f_scale;
    auto g = base.f;
    return {f_name, [g, c](double u) { return c * g(u); }, std::fabs(c) * base.lipschitz};
}

double HyperbolicModel::lipschitz_f() const {
    return std::fabs(f_scale) * builtin_function(f_name).lipschitz;
}

int HyperbolicModel::collocation_points() const {
    return grid_size != 0 ? grid_size : (3 * K + 1) / 2;
}

bool HyperbolicModel::special_case(double rel_tol) const {
    return std::fabs(b - 4.0 * nu) <= rel_tol * std::max(1.0, std::fabs(b)) &&
           std::fabs(nu - a * a / 4.0) <= rel_tol * std::max(1.0, nu);
}

double HyperbolicModel::stiffness(int k) const {
    return nu * static_cast<double>(k) * static_cast<double>(k) - b;
}

HyperbolicState zero_state(const HyperbolicModel& model) {
    return {Eigen::VectorXd::Zero(model.K), Eigen::VectorXd::Zero(model.K)};
}

// ---------------------------------------------------------------------------
// spectrum

ModeSpectrum anu_spectrum(const HyperbolicModel& model, int k) {
    if (k < 1) {
        throw InvalidArgument("anu_spectrum: mode index must be >= 1");
    }
    ModeSpectrum s;
    s.k = k;
    const double half = model.a / 2.0;
    const double disc = model.a * model.a / 4.0 + model.b - model.nu * static_cast<double>(k) * k;
    if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        s.delta_minus = half - r;
        s.delta_plus = half + r;
    } else {
        const double r = std::sqrt(-disc);
        s.complex_pair = true;
        s.delta_minus = cplx(half, -r);
        s.delta_plus = cplx(half, r);
    }
    return s;
}

std::array<cplx, 2> anu_apply(const HyperbolicModel& model, int k, const std::array<cplx, 2>& w) {
    return {-w[1], model.stiffness(k) * w[0] + model.a * w[1]};
}

std::array<cplx, 2> anu_eigenvector(const HyperbolicModel&, int, cplx delta) {
    return {cplx(1.0, 0.0), -delta};
}

double eigen_residual(const HyperbolicModel& model, int k, cplx delta) {
    const auto w = anu_eigenvector(model, k, delta);
    const auto aw = anu_apply(model, k, w);
    return std::sqrt(std::norm(aw[0] - delta * w[0]) + std::norm(aw[1] - delta * w[1]));
}

// ---------------------------------------------------------------------------
// energy geometry

double energy_inner_product(const HyperbolicModel& model, const HyperbolicState& U1, const HyperbolicState& U2,
                            EnergyForm form) {
    require_state(model, U1, "energy_inner_product");
    require_state(model, U2, "energy_inner_product");
    auto check_support = [&](const HyperbolicState& U, int lo, int hi) {
        for (int k = 1; k <= model.K; ++k) {
            if ((k < lo || k > hi) && (U.u(k - 1) != 0.0 || U.v(k - 1) != 0.0)) {
                throw InvalidArgument("energy_inner_product: input has components outside the requested modes");
            }
        }
    };
    int lo = 1;
    int hi = model.K;
    if (form == EnergyForm::low_modes) {
        hi = std::min(2, model.K);
    } else if (form == EnergyForm::high_modes) {
        lo = 3;
    }
    if (form != EnergyForm::full) {
        check_support(U1, lo, hi);
        check_support(U2, lo, hi);
    }
    double sum = 0.0;
    for (int k = lo; k <= hi; ++k) {
        const Eigen::Vector2d x(U1.u(k - 1), U1.v(k - 1));
        const Eigen::Vector2d y(U2.u(k - 1), U2.v(k - 1));
        sum += x.dot(mode_form(model, k) * y);
    }
    return sum;
}

double energy_norm(const HyperbolicModel& model, const HyperbolicState& U) {
    return std::sqrt(std::max(0.0, energy_inner_product(model, U, U)));
}

double standard_norm(const HyperbolicModel& model, const HyperbolicState& U) {
    require_state(model, U, "standard_norm");
    double sum = 0.0;
    for (int k = 1; k <= model.K; ++k) {
        sum += static_cast<double>(k) * k * U.u(k - 1) * U.u(k - 1) + U.v(k - 1) * U.v(k - 1);
    }
    return std::sqrt(kPi * sum);
}

double l2_norm(const Eigen::VectorXd& sine_coeffs) {
    return std::sqrt(kPi) * sine_coeffs.norm();
}

NormEquivalence norm_equivalence(const HyperbolicModel& model) {
    NormEquivalence eq{std::numeric_limits<double>::infinity(), 0.0};
    for (int k = 1; k <= model.K; ++k) {
        const Eigen::Vector2d s(1.0 / std::sqrt(kPi * k * k), 1.0 / std::sqrt(kPi));
        const Eigen::Matrix2d scaled = s.asDiagonal() * mode_form(model, k) * s.asDiagonal();
        const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(scaled).eigenvalues();
        eq.lower = std::min(eq.lower, std::sqrt(std::max(0.0, ev(0))));
        eq.upper = std::max(eq.upper, std::sqrt(std::max(0.0, ev(1))));
    }
    return eq;
}

// ---------------------------------------------------------------------------
// spectral form

StateVector SineGordonSystem::to_spectral(const HyperbolicState& U) const {
    require_state(physical, U, "to_spectral");
    StateVector c(model.n_total());
    for (int k = 1; k <= physical.K; ++k) {
        const Eigen::Vector2d x = basis_inverse[k - 1] * Eigen::Vector2d(U.u(k - 1), U.v(k - 1));
        c(index[k - 1][0]) = x(0);
        c(index[k - 1][1]) = x(1);
    }
    return c;
}

HyperbolicState SineGordonSystem::to_physical(const StateVector& c) const {
    model.check_conforms(c, "to_physical");
    HyperbolicState U = zero_state(physical);
    for (int k = 1; k <= physical.K; ++k) {
        const Eigen::Vector2d x = basis[k - 1] * Eigen::Vector2d(c(index[k - 1][0]), c(index[k - 1][1]));
        U.u(k - 1) = x(0);
        U.v(k - 1) = x(1);
    }
    return U;
}

StateVector SineGordonSystem::center_from_amplitudes(double u1, double u2) const {
    StateVector c = StateVector::Zero(model.n_total());
    c(index[0][0]) = u1 / basis[0](0, 0);
    c(index[1][0]) = u2 / basis[1](0, 0);
    return c;
}

std::array<double, 2> SineGordonSystem::amplitudes_from_center(const StateVector& c) const {
    return {basis[0](0, 0) * c(index[0][0]), basis[1](0, 0) * c(index[1][0])};
}

SineGordonSystem build_spectral_model(const HyperbolicModel& physical) {
    physical.validate();
    if (!physical.special_case()) {
        throw InvalidArgument("build_spectral_model: needs b = 4 nu and nu = a^2/4 (got a = " +
                              std::to_string(physical.a) + ", nu = " + std::to_string(physical.nu) +
                              ", b = " + std::to_string(physical.b) + ")");
    }
    const int K = physical.K;
    const double a = physical.a;
    SineGordonSystem sys{physical, two_mode_model(1.0, 0.0), {}, {}, {}, 0.0, 0.0, 0.0, 0.0};
    sys.basis.resize(K);
    sys.basis_inverse.resize(K);
    sys.index.resize(K);

    std::vector<SpectralBlock> center_blocks;
    std::vector<SpectralBlock> stable_blocks;
    for (int k = 1; k <= K; ++k) {
        const Eigen::Matrix2d Q = mode_form(physical, k);
        const ModeSpectrum s = anu_spectrum(physical, k);
        Eigen::Matrix2d E;
        if (k <= 2) {
            Eigen::Vector2d wm(1.0, -s.delta_minus.real());
            Eigen::Vector2d wp(1.0, -s.delta_plus.real());
            wm /= std::sqrt(wm.dot(Q * wm));
            wp /= std::sqrt(wp.dot(Q * wp));
            const double cross = wm.dot(Q * wp);
            if (std::fabs(cross) > 1e-10) {
                throw NumericalFailure("build_spectral_model: eigenvectors of mode " + std::to_string(k) +
                                           " are not energy-orthogonal",
                                       cross);
            }
            E.col(0) = wm;
            E.col(1) = wp;
            center_blocks.push_back({-s.delta_minus.real(), 0.0, Split::center});
            stable_blocks.push_back({-s.delta_plus.real(), 0.0, Split::stable});
        } else {
            // real invariant plane spanned by Re w and Im w, w = (1, -delta)
            Eigen::Vector2d e0(1.0, -s.delta_minus.real());
            Eigen::Vector2d e1(0.0, -s.delta_minus.imag());
            e0 /= std::sqrt(e0.dot(Q * e0));
            e1 -= e1.dot(Q * e0) * e0;
            e1 /= std::sqrt(e1.dot(Q * e1));
            E.col(0) = e0;
            E.col(1) = e1;
            const Eigen::Matrix2d B = E.inverse() * mode_generator(physical, k) * E;
            const double scale = B.norm();
            if (std::fabs(B(0, 0) - B(1, 1)) > 1e-10 * scale || std::fabs(B(1, 0) + B(0, 1)) > 1e-10 * scale) {
                throw NumericalFailure("build_spectral_model: mode " + std::to_string(k) +
                                           " is not a rotation-scaling block in energy coordinates",
                                       std::fabs(B(0, 0) - B(1, 1)));
            }
            // exact real part -a/2 for the special case
            stable_blocks.push_back({-a / 2.0, 0.5 * (B(1, 0) - B(0, 1)), Split::stable});
        }
        sys.basis[k - 1] = E;
        sys.basis_inverse[k - 1] = E.inverse();
    }
    sys.index[0] = {0, 2};
    if (K >= 2) {
        sys.index[1] = {1, 3};
    }
    for (int k = 3; k <= K; ++k) {
        sys.index[k - 1] = {4 + 2 * (k - 3), 5 + 2 * (k - 3)};
    }
    std::vector<SpectralBlock> blocks = center_blocks;
    blocks.insert(blocks.end(), stable_blocks.begin(), stable_blocks.end());

    const double lf = physical.lipschitz_f();
    Nonlinearity nl;
    if (lf == 0.0) {
        nl = Nonlinearity::zero();
    } else {
        auto nem = std::make_shared<const Nemytskii>(make_nemytskii(physical));
        auto basis = sys.basis;
        auto inverse = sys.basis_inverse;
        auto index = sys.index;
        const int n = 2 * K;
        nl = Nonlinearity::custom(
            [nem, basis, inverse, index, K, n](const StateVector& c) {
                Eigen::VectorXd u(K);
                for (int k = 0; k < K; ++k) {
                    u(k) = basis[k](0, 0) * c(index[k][0]) + basis[k](0, 1) * c(index[k][1]);
                }
                const Eigen::VectorXd w = (*nem)(u);
                StateVector out(n);
                for (int k = 0; k < K; ++k) {
                    out(index[k][0]) = inverse[k](0, 1) * w(k);
                    out(index[k][1]) = inverse[k](1, 1) * w(k);
                }
                return out;
            },
            2.0 * lf / a, "sine-gordon:" + physical.f_name);
    }
    sys.model = SpectralModel(std::move(blocks), 0.0, a / 2.0, std::move(nl));
    sys.smallness_published = 8.0 * lf / (a * a);
    sys.smallness_derived = 16.0 * lf / (a * a);
    sys.projection_mode1 = sys.basis[0](0, 0) * sys.basis_inverse[0](0, 1);
    sys.projection_mode2 = sys.basis[1](0, 0) * sys.basis_inverse[1](0, 1);
    return sys;
}

// ---------------------------------------------------------------------------
// transforms and direct integrators

HyperbolicState doob_transform(const HyperbolicState& state, double z_value) {
    return {state.u, state.v - z_value * state.u};
}

HyperbolicState doob_inverse(const HyperbolicState& state, double z_value) {
    return {state.u, state.v + z_value * state.u};
}

namespace {

std::pair<std::int64_t, std::int64_t> grid_window(double t0, double t1, double dt) {
    if (!(t1 > t0)) {
        throw InvalidArgument("integration window needs t1 > t0");
    }
    return {grid_index(t0, dt), grid_index(t1, dt)};
}

Eigen::ArrayXd stiffness_array(const HyperbolicModel& m) {
    Eigen::ArrayXd mu(m.K);
    for (int k = 1; k <= m.K; ++k) {
        mu(k - 1) = m.stiffness(k);
    }
    return mu;
}

void require_finite(const HyperbolicState& U, double t, const char* where) {
    if (!U.u.allFinite() || !U.v.allFinite()) {
        throw NumericalFailure(std::string(where) + ": non-finite state at t = " + std::to_string(t), t);
    }
}

} // namespace

HyperbolicTrajectory integrate_hyperbolic_stratonovich(const HyperbolicModel& model, const WienerPath& path,
                                                       const HyperbolicState& U0, double t0, double t1) {
    model.validate();
    require_state(model, U0, "integrate_hyperbolic_stratonovich");
    const double h = path.dt();
    const auto [k0, k1] = grid_window(t0, t1, h);
    if (!path.contains(k0) || !path.contains(k1)) {
        throw InvalidArgument("integrate_hyperbolic_stratonovich: window is outside the path grid");
    }
    const Nemytskii nem = make_nemytskii(model);
    const Eigen::ArrayXd mu = stiffness_array(model);
    auto drift = [&](const HyperbolicState& U) {
        return HyperbolicState{U.v, (-mu * U.u.array() - model.a * U.v.array()).matrix() + nem(U.u)};
    };
    HyperbolicTrajectory traj{static_cast<double>(k0) * h, h, {U0}};
    HyperbolicState U = U0;
    for (std::int64_t k = k0; k < k1; ++k) {
        const double dw = path.increment(k);
        const HyperbolicState d0 = drift(U);
        const HyperbolicState pred{U.u + h * d0.u, U.v + h * d0.v + dw * U.u};
        const HyperbolicState d1 = drift(pred);
        U = {U.u + (0.5 * h) * (d0.u + d1.u), U.v + (0.5 * h) * (d0.v + d1.v) + (0.5 * dw) * (U.u + pred.u)};
        require_finite(U, static_cast<double>(k + 1) * h, "integrate_hyperbolic_stratonovich");
        traj.states.push_back(U);
    }
    return traj;
}

HyperbolicTrajectory integrate_hyperbolic_random(const HyperbolicModel& model, const OUProcess& ou,
                                                 const HyperbolicState& Phi0, double t0, double t1) {
    model.validate();
    require_state(model, Phi0, "integrate_hyperbolic_random");
    const double h = ou.dt();
    const auto [k0, k1] = grid_window(t0, t1, h);
    if (!ou.contains(k0) || !ou.contains(k1)) {
        throw InvalidArgument("integrate_hyperbolic_random: window is outside the OU grid");
    }
    const Nemytskii nem = make_nemytskii(model);
    const Eigen::ArrayXd mu = stiffness_array(model);
    const double a = model.a;
    auto rhs = [&](const HyperbolicState& P, double z) {
        return HyperbolicState{
            P.v + z * P.u,
            (-mu * P.u.array() - a * P.v.array()).matrix() + nem(P.u) + (z - a * z - z * z) * P.u - z * P.v};
    };
    HyperbolicTrajectory traj{static_cast<double>(k0) * h, h, {Phi0}};
    HyperbolicState P = Phi0;
    for (std::int64_t k = k0; k < k1; ++k) {
        const HyperbolicState d0 = rhs(P, ou.z(k));
        const HyperbolicState pred{P.u + h * d0.u, P.v + h * d0.v};
        const HyperbolicState d1 = rhs(pred, ou.z(k + 1));
        P = {P.u + (0.5 * h) * (d0.u + d1.u), P.v + (0.5 * h) * (d0.v + d1.v)};
        require_finite(P, static_cast<double>(k + 1) * h, "integrate_hyperbolic_random");
        traj.states.push_back(P);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// reduced equation

ReducedSgResult integrate_reduced_sg(const SineGordonSystem& sys, const ManifoldMap& mm, const WienerPath& path,
                                     double u1_0, double u2_0, double t0, double t1, double blowup) {
    const OUProcess& ou = mm.ou();
    if (mm.model().n_total() != sys.model.n_total() || mm.model().model_hash() != sys.model.model_hash()) {
        throw InvalidArgument("integrate_reduced_sg: manifold map was not built on this system");
    }
    if (std::fabs(path.dt() - ou.dt()) > 1e-12 * ou.dt() || path.seed() != ou.seed()) {
        throw InvalidArgument("integrate_reduced_sg: path and OU process come from different noise");
    }
    if (!(t1 > t0)) {
        throw InvalidArgument("integrate_reduced_sg: need t1 > t0");
    }
    const std::int64_t k0 = mm.fiber_index(t0);
    const std::int64_t k1 = mm.fiber_index(t1);
    if (!path.contains(k0) || !path.contains(k1)) {
        throw InvalidArgument("integrate_reduced_sg: window is outside the path grid");
    }
    const double h = ou.dt();
    const Nemytskii nem = make_nemytskii(sys.physical);
    const double grow1 = sys.model.blocks()[0].re;
    const double grow2 = sys.model.blocks()[1].re;
    const bool linear = sys.model.nonlinearity().is_zero;
    ManifoldCursor cursor(mm);

    auto drift = [&](const Eigen::Vector2d& amp, std::int64_t k, bool cold) {
        Eigen::Vector2d d(grow1 * amp(0), grow2 * amp(1));
        if (linear) {
            return d;
        }
        const StateVector c = sys.center_from_amplitudes(amp(0), amp(1));
        const double z = ou.z(k);
        const StateVector lifted = std::exp(z) * cursor.eval(std::exp(-z) * c, k, cold).value;
        const Eigen::VectorXd w = nem(sys.to_physical(c + lifted).u);
        d(0) += sys.projection_mode1 * w(0);
        d(1) += sys.projection_mode2 * w(1);
        return d;
    };

    ReducedSgResult res;
    Trajectory& tr = res.amplitudes;
    tr.t0 = static_cast<double>(k0) * h;
    tr.dt = h;
    tr.seed = path.seed();
    tr.generator_id = path.generator_id();
    tr.scheme_id = "reduced-sine-gordon-heun";
    Eigen::Vector2d amp(u1_0, u2_0);
    tr.states.push_back(amp);
    Eigen::Vector2d a0 = drift(amp, k0, true);
    for (std::int64_t k = k0; k < k1; ++k) {
        const double dw = path.increment(k);
        const Eigen::Vector2d pred = amp + h * a0 + dw * amp;
        const Eigen::Vector2d a1 = drift(pred, k + 1, (k + 1 - k0) % 100 == 0);
        amp = amp + (0.5 * h) * (a0 + a1) + (0.5 * dw) * (amp + pred);
        if (!amp.allFinite() || amp.norm() > blowup) {
            res.blew_up = true;
            res.blowup_time = static_cast<double>(k + 1) * h;
            break;
        }
        tr.states.push_back(amp);
        a0 = drift(amp, k + 1, false);
    }
    return res;
}

// ---------------------------------------------------------------------------
// stationarity

double ks_statistic(std::vector<double> x, std::vector<double> y) {
    if (x.empty() || y.empty()) {
        throw InvalidArgument("ks_statistic: empty sample");
    }
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t) {
            ++i;
        }
        while (j < y.size() && y[j] <= t) {
            ++j;
        }
        d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

double ks_critical_1pct(std::size_t n, std::size_t m) {
    const double dn = static_cast<double>(n);
    const double dm = static_cast<double>(m);
    return 1.628 * std::sqrt((dn + dm) / (dn * dm));
}

namespace {

void fill_histogram(const std::vector<double>& xs, int bins, std::vector<double>& edges, std::vector<int>& counts) {
    double lo = *std::min_element(xs.begin(), xs.end());
    double hi = *std::max_element(xs.begin(), xs.end());
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) {
        edges[b] = lo + (hi - lo) * b / bins;
    }
    counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : xs) {
        int b = static_cast<int>((x - lo) / (hi - lo) * bins);
        counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1;
    }
}

} // namespace

StationaryReport detect_stationary(const SineGordonSystem& sys, const StationaryOptions& options) {
    if (options.n_paths < 1 || !(options.T > 0.0) || !(options.dt > 0.0)) {
        throw InvalidArgument("detect_stationary: need n_paths >= 1, T > 0 and dt > 0");
    }
    StationaryReport report;
    for (const auto& b : sys.model.blocks()) {
        if (b.split == Split::center) {
            report.growth_rate_linear = std::max(report.growth_rate_linear, b.re);
        }
    }
    report.linearization_contracting = report.growth_rate_linear < 0.0;

    const double history = history_length(sys.model, options.manifold) + kDefaultBurnIn + 1.0;
    const double t_min = -std::ceil(history / options.dt) * options.dt;
    const std::int64_t steps_per_unit = std::max<std::int64_t>(1, std::llround(1.0 / options.dt));
    int synced = 0;
    int ks_ok = 0;
    for (int p = 0; p < options.n_paths; ++p) {
        PathStationarity ps;
        ps.seed = derive_seed(options.master_seed, static_cast<std::uint64_t>(p));
        const WienerPath path = sample_wiener(ps.seed, t_min, options.T, options.dt);
        const auto ou = std::make_shared<const OUProcess>(ou_stationary(path));
        const ManifoldMap mm(sys.model, ou, options.manifold);
        const auto& s1 = options.first_start;
        const auto& s2 = options.second_start;
        ps.initial_gap = std::hypot(s1[0] - s2[0], s1[1] - s2[1]);
        const ReducedSgResult A = integrate_reduced_sg(sys, mm, path, s1[0], s1[1], 0.0, options.T, options.blowup);
        ReducedSgResult B;
        if (!A.blew_up) {
            B = integrate_reduced_sg(sys, mm, path, s2[0], s2[1], 0.0, options.T, options.blowup);
        }
        if (A.blew_up || B.blew_up) {
            ps.blew_up = true;
            ps.blowup_time = A.blew_up ? A.blowup_time : B.blowup_time;
            ++report.blowups;
            report.paths.push_back(std::move(ps));
            continue;
        }
        ps.final_gap = (A.amplitudes.back() - B.amplitudes.back()).norm();
        ps.synchronized = ps.final_gap < options.sync_ratio * ps.initial_gap;

        std::array<std::vector<double>, 2> early, late, pooled;
        const auto n = static_cast<std::int64_t>(A.amplitudes.size());
        for (std::int64_t i = 0; i < n; i += steps_per_unit) {
            const double t = A.amplitudes.time(static_cast<std::size_t>(i));
            if (t < options.T / 2.0) {
                continue;
            }
            for (int c = 0; c < 2; ++c) {
                const double x = A.amplitudes.states[static_cast<std::size_t>(i)](c);
                (t < 0.75 * options.T ? early : late)[c].push_back(x);
                pooled[c].push_back(x);
            }
        }
        ps.ks_critical = ks_critical_1pct(early[0].size(), late[0].size());
        ps.ks_pass = true;
        for (int c = 0; c < 2; ++c) {
            ps.ks[c] = ks_statistic(early[c], late[c]);
            ps.ks_pass = ps.ks_pass && ps.ks[c] < ps.ks_critical;
            fill_histogram(pooled[c], options.histogram_bins, ps.histogram_edges[c], ps.histogram_counts[c]);
        }
        synced += ps.synchronized ? 1 : 0;
        ks_ok += ps.ks_pass ? 1 : 0;
        report.paths.push_back(std::move(ps));
    }
    report.ks_pass_fraction = static_cast<double>(ks_ok) / options.n_paths;
    report.sync_pass_fraction = static_cast<double>(synced) / options.n_paths;
    return report;
}

ReductionGap reduction_gap(const SineGordonSystem& sys, const WienerPath& path, double u1, double u2, double T,
                           const ManifoldOptions& options) {
    const auto ou = std::make_shared<const OUProcess>(ou_stationary(path));
    const ManifoldMap mm(sys.model, ou, options);
    const double z0 = ou->z(0);
    const StateVector xi = std::exp(-z0) * sys.center_from_amplitudes(u1, u2);
    const StateVector u0 = std::exp(z0) * (xi + hs_eval(mm, xi, 0).value);
    const Trajectory full = integrate_spde_stratonovich(sys.model, path, u0, 0.0, T);
    const ReducedSgResult red = integrate_reduced_sg(sys, mm, path, u1, u2, 0.0, T,
                                                     std::numeric_limits<double>::max());
    if (red.blew_up) {
        throw NumericalFailure("reduction_gap: reduced solution left the bounded range", *red.blowup_time);
    }
    ReductionGap gap;
    for (std::size_t i = 0; i < full.size(); ++i) {
        const auto amp = sys.amplitudes_from_center(full.states[i]);
        const Eigen::Vector2d f(amp[0], amp[1]);
        gap.sup_gap = std::max(gap.sup_gap, (f - red.amplitudes.states[i]).norm());
        gap.sup_scale = std::max(gap.sup_scale, f.norm());
    }
    return gap;
}

} // namespace stochmanifold
