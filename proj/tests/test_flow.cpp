#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stochmanifold/error.hpp"
#include "stochmanifold/flow.hpp"

using namespace stochmanifold;

namespace {

SpectralModel linear_model() {
    return SpectralModel({{0.2, 0.0, Split::center}, {-1.0, 0.0, Split::stable}, {-2.0, 1.5, Split::stable}}, 0.2,
                         1.0, Nonlinearity::zero());
}

WienerPath zero_path(double t_min, double t_max, double dt) {
    const auto n = static_cast<std::size_t>(std::lround((t_max - t_min) / dt)) + 1;
    return make_path(std::vector<double>(n, 0.0), t_min, dt);
}

double relative_sup_gap(const Trajectory& a, const Trajectory& b, std::size_t stride_a, std::size_t stride_b) {
    double gap = 0.0;
    for (std::size_t i = 0, j = 0; i < a.size() && j < b.size(); i += stride_a, j += stride_b) {
        gap = std::max(gap, (a.states[i] - b.states[j]).norm() / std::max(1.0, b.states[j].norm()));
    }
    return gap;
}

// sup over [0, T] of |T^{-1} o random PDE o T - Stratonovich| on one path
double conjugacy_gap(const SpectralModel& m, const WienerPath& p, double T) {
    const OUProcess ou = ou_stationary(p);
    StateVector u0(2);
    u0 << 1.0, -0.5;
    const Trajectory v = integrate_random_pde(m, ou, transform_to_v(ou.z(0), u0), 0.0, T);
    const Trajectory u = to_original_coordinates(v, ou);
    const Trajectory s = integrate_spde_stratonovich(m, p, u0, 0.0, T);
    return relative_sup_gap(u, s, 1, 1);
}

} // namespace

TEST(Transform, Examples) {
    StateVector x(3);
    x << 1.0, -2.0, 0.5;
    EXPECT_EQ(transform_to_v(0.0, x), x);
    EXPECT_EQ(transform_to_u(0.0, x), x);
    EXPECT_LE((transform_to_u(0.7, transform_to_v(0.7, x)) - x).norm(), 1e-15 * x.norm());
    const StateVector v = transform_to_v(1.0, StateVector::Ones(3));
    for (int i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(v(i), std::exp(-1.0));
    }
}

TEST(RandomPde, LinearZeroNoiseIsExact) {
    const OUProcess ou = ou_stationary(zero_path(-25.0, 2.0, 0.01));
    const SpectralModel m = linear_model();
    StateVector v0 = StateVector::Zero(4);
    v0(1) = 1.0;
    const Trajectory tr = integrate_random_pde(m, ou, v0, 0.0, 1.0);
    EXPECT_EQ(tr.size(), 101u);
    EXPECT_NEAR(tr.back()(1), std::exp(-1.0), 1e-13);
    EXPECT_EQ(tr.scheme_id, kSchemeExponentialHeun);
}

TEST(RandomPde, LinearClosedFormWithNoise) {
    const WienerPath p = sample_wiener(3, -25.0, 4.0, 0.01);
    const OUProcess ou = ou_stationary(p);
    const SpectralModel m = linear_model();
    StateVector v0(4);
    v0 << 0.3, -1.0, 0.5, 0.25;
    const double t0 = -1.0;
    const double t1 = 3.0;
    const Trajectory tr = integrate_random_pde(m, ou, v0, t0, t1);
    const double dZ = ou.Z(ou.index_of(t1)) - ou.Z(ou.index_of(t0));
    const double T = t1 - t0;
    StateVector expected(4);
    expected(0) = std::exp(0.2 * T + dZ) * v0(0);
    expected(1) = std::exp(-1.0 * T + dZ) * v0(1);
    const double g = std::exp(-2.0 * T + dZ);
    expected(2) = g * (std::cos(1.5 * T) * v0(2) - std::sin(1.5 * T) * v0(3));
    expected(3) = g * (std::sin(1.5 * T) * v0(2) + std::cos(1.5 * T) * v0(3));
    EXPECT_LE((tr.back() - expected).norm(), 1e-12 * expected.norm());
}

TEST(RandomPde, CocycleOnAlignedGrid) {
    const WienerPath p = sample_wiener(5, -30.0, 10.0, 0.01);
    const SpectralModel m = two_mode_model(1.0, 0.05);
    const OUProcess ou = ou_stationary(p);
    const double s = 1.5;
    const double t = 2.25;
    StateVector v0(2);
    v0 << 1.0, 2.0;
    const StateVector direct = integrate_random_pde(m, ou, v0, 0.0, s + t).back();
    const StateVector mid = integrate_random_pde(m, ou, v0, 0.0, s).back();
    const OUProcess shifted = ou_stationary(shift(p, s));
    const StateVector composed = integrate_random_pde(m, shifted, mid, 0.0, t).back();
    EXPECT_LE((direct - composed).norm(), 1e-10);
}

TEST(RandomPde, NormGrowthBound) {
    const SpectralModel m = two_mode_model(1.0, 0.2);
    for (int path = 0; path < 8; ++path) {
        const OUProcess ou = ou_stationary(sample_wiener(derive_seed(9, path), -25.0, 5.0, 0.01));
        StateVector v0(2);
        v0 << 1.0, -1.0;
        const Trajectory tr = integrate_random_pde(m, ou, v0, 0.0, 5.0);
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const double t = tr.time(i);
            const double bound = v0.norm() * std::exp((0.0 + 0.2) * t + ou.Z(ou.index_of(t)) - ou.Z(0)) *
                                 (1.0 + 10.0 * ou.dt());
            EXPECT_LE(tr.states[i].norm(), bound);
        }
    }
}

TEST(RandomPde, RejectsWindowOutsideGrid) {
    const OUProcess ou = ou_stationary(sample_wiener(3, -25.0, 4.0, 0.01));
    EXPECT_THROW(integrate_random_pde(linear_model(), ou, StateVector::Zero(4), 0.0, 5.0), InvalidArgument);
    EXPECT_THROW(integrate_random_pde(linear_model(), ou, StateVector::Zero(4), 1.0, 1.0), InvalidArgument);
}

TEST(Stratonovich, ZeroNoiseIsDeterministicHeun) {
    const SpectralModel m = two_mode_model(1.0, 0.3);
    const WienerPath p = zero_path(-1.0, 2.0, 0.01);
    StateVector u0(2);
    u0 << 0.8, -0.4;
    const Trajectory tr = integrate_spde_stratonovich(m, p, u0, 0.0, 2.0);
    const Eigen::Vector2d lambda(0.0, -1.0);
    auto f = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
        return lambda.cwiseProduct(u) + oracle::ridge_sin(0.3, u);
    };
    Eigen::VectorXd u = u0;
    const double h = 0.01;
    for (int k = 0; k < 200; ++k) {
        const Eigen::VectorXd a = f(u);
        const Eigen::VectorXd pred = u + h * a;
        u = u + 0.5 * h * (a + f(pred));
    }
    EXPECT_LE((tr.back() - u).norm(), 1e-13);
    EXPECT_EQ(tr.scheme_id, kSchemeStratonovichHeun);
}

TEST(Stratonovich, GeometricFirstOrder) {
    const SpectralModel m({{0.0, 0.0, Split::center}, {-1.0, 0.0, Split::stable}}, 0.0, 1.0, Nonlinearity::zero());
    double coarse_err = 0.0;
    double fine_err = 0.0;
    for (int path = 0; path < 8; ++path) {
        const WienerPath fine = sample_wiener(derive_seed(5, path), -1.0, 5.0, 0.0025);
        for (int level = 0; level < 2; ++level) {
            const WienerPath p = level == 0 ? coarsen(fine, 2) : fine;
            StateVector u0(2);
            u0 << 1.0, 0.0;
            const Trajectory tr = integrate_spde_stratonovich(m, p, u0, 0.0, 5.0);
            double err = 0.0;
            for (std::size_t i = 0; i < tr.size(); ++i) {
                const double w = p.value(static_cast<std::int64_t>(i));
                err = std::max(err, std::abs(tr.states[i](0) - oracle::geometric(0.0, 1.0, tr.time(i), w)));
            }
            (level == 0 ? coarse_err : fine_err) += err;
        }
    }
    EXPECT_GE(fine_err / coarse_err, 0.4);
    EXPECT_LE(fine_err / coarse_err, 0.6);
}

TEST(Conjugacy, GapShrinksWithRefinement) {
    const SpectralModel m = two_mode_model(1.0, 0.05);
    double coarse = 0.0;
    double fine = 0.0;
    for (int path = 0; path < 8; ++path) {
        const WienerPath base = sample_wiener(derive_seed(3, path), -40.0, 5.0, 0.01);
        coarse += conjugacy_gap(m, base, 5.0);
        fine += conjugacy_gap(m, refine(base, 2), 5.0);
    }
    EXPECT_LT(coarse / 8.0, 0.05);
    EXPECT_LE(fine / coarse, 0.5);
}

TEST(Trajectory, Access) {
    const OUProcess ou = ou_stationary(zero_path(-25.0, 2.0, 0.01));
    const Trajectory tr = integrate_random_pde(linear_model(), ou, StateVector::Ones(4), 0.5, 1.5);
    EXPECT_DOUBLE_EQ(tr.t1(), 1.5);
    EXPECT_EQ(&tr.at(1.0), &tr.states[50]);
    EXPECT_THROW(tr.at(2.0), InvalidArgument);
    const Trajectory u = to_original_coordinates(tr, ou);
    EXPECT_EQ(u.states[10], tr.states[10]);
}
