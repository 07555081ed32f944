#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stochmanifold/error.hpp"
#include "stochmanifold/sinegordon.hpp"

using namespace stochmanifold;

namespace {

HyperbolicModel special(double a, int K = 16) {
    HyperbolicModel m;
    m.a = a;
    m.nu = a * a / 4.0;
    m.b = a * a;
    m.K = K;
    return m;
}

HyperbolicState random_state(const HyperbolicModel& m, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    HyperbolicState U = zero_state(m);
    for (int k = 0; k < m.K; ++k) {
        U.u(k) = g(rng) / (k + 1);
        U.v(k) = g(rng);
    }
    return U;
}

HyperbolicState restrict_modes(const HyperbolicState& U, int first, int last) {
    HyperbolicState out = U;
    for (int k = 0; k < U.u.size(); ++k) {
        if (k + 1 < first || k + 1 > last) {
            out.u(k) = 0.0;
            out.v(k) = 0.0;
        }
    }
    return out;
}

} // namespace

TEST(Spectrum, MatchesEigenSolver) {
    const HyperbolicModel m = special(2.0);
    for (int k = 1; k <= m.K; ++k) {
        const ModeSpectrum s = anu_spectrum(m, k);
        const auto [lo, hi] = oracle::mode_eigenvalues(m.a, m.nu, m.b, k);
        EXPECT_LE(std::abs(s.delta_minus - lo), 1e-10) << k;
        EXPECT_LE(std::abs(s.delta_plus - hi), 1e-10) << k;
        EXPECT_LE(eigen_residual(m, k, s.delta_minus), 1e-10);
        EXPECT_LE(eigen_residual(m, k, s.delta_plus), 1e-10);
        EXPECT_EQ(s.complex_pair, k >= 3);
    }
}

TEST(Spectrum, WorkedValues) {
    const HyperbolicModel m = special(2.0);
    EXPECT_TRUE(m.special_case());
    EXPECT_EQ(anu_spectrum(m, 2).delta_minus, 0.0);
    EXPECT_EQ(anu_spectrum(m, 1).delta_minus, -1.0);
    EXPECT_EQ(anu_spectrum(m, 1).delta_plus, 3.0);
    EXPECT_LE(std::abs(anu_spectrum(m, 3).delta_minus - std::complex<double>(1.0, -2.0)), 1e-15);
    EXPECT_LE(std::abs(anu_spectrum(m, 3).delta_plus - std::complex<double>(1.0, 2.0)), 1e-15);
    const auto w = anu_eigenvector(m, 1, -1.0);
    EXPECT_EQ(w[0], 1.0);
    EXPECT_EQ(w[1], 1.0);
}

TEST(Energy, VelocityOnlyIsRootTwoL2) {
    const HyperbolicModel m = special(2.0);
    std::mt19937_64 rng(1);
    HyperbolicState U = random_state(m, rng);
    U.u.setZero();
    const double l2 = std::sqrt(oracle::l2_squared_quadrature(U.v));
    EXPECT_NEAR(l2_norm(U.v), l2, 1e-12 * l2);
    EXPECT_NEAR(energy_norm(m, U), std::sqrt(2.0) * l2, 1e-12 * l2);
}

TEST(Energy, DominatesDisplacement) {
    for (double a : {2.0, 10.0}) {
        const HyperbolicModel m = special(a);
        std::mt19937_64 rng(2);
        for (int i = 0; i < 50; ++i) {
            const HyperbolicState U = random_state(m, rng);
            EXPECT_GE(energy_norm(m, U), std::sqrt(2.0) * a / 2.0 * l2_norm(U.u) * (1.0 - 1e-12));
        }
    }
}

TEST(Energy, LowAndHighModesOrthogonal) {
    const HyperbolicModel m = special(2.0);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const HyperbolicState U = random_state(m, rng);
        const HyperbolicState low = restrict_modes(U, 1, 2);
        const HyperbolicState high = restrict_modes(U, 3, m.K);
        EXPECT_LE(std::abs(energy_inner_product(m, low, high)), 1e-12 * energy_norm(m, U) * energy_norm(m, U));
        const double split = energy_inner_product(m, low, low, EnergyForm::low_modes) +
                             energy_inner_product(m, high, high, EnergyForm::high_modes);
        EXPECT_NEAR(energy_norm(m, U) * energy_norm(m, U), split, 1e-12 * split);
    }
}

TEST(Energy, EquivalentToStandardNorm) {
    const HyperbolicModel m = special(2.0);
    const NormEquivalence eq = norm_equivalence(m);
    EXPECT_GT(eq.lower, 0.0);
    EXPECT_GE(eq.upper, eq.lower);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        const HyperbolicState U = random_state(m, rng);
        const double r = energy_norm(m, U) / standard_norm(m, U);
        EXPECT_GE(r, eq.lower * (1.0 - 1e-12));
        EXPECT_LE(r, eq.upper * (1.0 + 1e-12));
    }
}

TEST(Doob, RoundTrip) {
    const HyperbolicModel m = special(2.0);
    std::mt19937_64 rng(5);
    const HyperbolicState U = random_state(m, rng);
    const HyperbolicState back = doob_inverse(doob_transform(U, 0.7), 0.7);
    EXPECT_LE((back.u - U.u).norm(), 1e-15);
    EXPECT_LE((back.v - U.v).norm(), 1e-14);
    EXPECT_EQ(doob_transform(U, 0.0).v, U.v);
}

TEST(SpectralModel, SmallnessAndProjections) {
    const SineGordonSystem sys = build_spectral_model(special(10.0));
    EXPECT_DOUBLE_EQ(sys.smallness_published, 0.08);
    EXPECT_DOUBLE_EQ(sys.smallness_derived, 0.16);
    EXPECT_DOUBLE_EQ(sys.model.alpha(), 0.0);
    EXPECT_DOUBLE_EQ(sys.model.beta(), 5.0);
    // gain of the spectral projection of (0, 1) onto the (1, -delta_minus) direction
    for (int k : {1, 2}) {
        const auto [lo, hi] = oracle::mode_eigenvalues(10.0, 25.0, 100.0, k);
        Eigen::Matrix2d V;
        V << 1.0, 1.0, -lo.real(), -hi.real();
        const double gain = V.colPivHouseholderQr().solve(Eigen::Vector2d(0.0, 1.0))(0);
        EXPECT_NEAR(k == 1 ? sys.projection_mode1 : sys.projection_mode2, gain, 1e-14);
    }
    EXPECT_GT(std::abs(sys.projection_mode1 - kPublishedMode1Coefficient), 1.0);
}

TEST(SpectralModel, CoordinatesRoundTrip) {
    const SineGordonSystem sys = build_spectral_model(special(2.0, 8));
    std::mt19937_64 rng(6);
    const HyperbolicState U = random_state(sys.physical, rng);
    const HyperbolicState back = sys.to_physical(sys.to_spectral(U));
    EXPECT_LE((back.u - U.u).norm() + (back.v - U.v).norm(), 1e-12);
    const auto amp = sys.amplitudes_from_center(sys.center_from_amplitudes(0.3, -0.2));
    EXPECT_NEAR(amp[0], 0.3, 1e-14);
    EXPECT_NEAR(amp[1], -0.2, 1e-14);
}

TEST(SpectralModel, RejectsGenericParameters) {
    HyperbolicModel m = special(2.0);
    m.b = 3.0;
    EXPECT_THROW(build_spectral_model(m), InvalidArgument);
}

TEST(Reduced, LinearClosedForm) {
    HyperbolicModel hm = special(2.0, 4);
    hm.f_scale = 0.0;
    const SineGordonSystem sys = build_spectral_model(hm);
    const WienerPath path = sample_wiener(7, -80.0, 2.0, 0.001);
    const ManifoldMap mm(sys.model, std::make_shared<const OUProcess>(ou_stationary(path)));
    const ReducedSgResult r = integrate_reduced_sg(sys, mm, path, 0.1, 0.5, 0.0, 1.0);
    ASSERT_FALSE(r.blew_up);
    const double w = path.value(1000);
    EXPECT_NEAR(r.amplitudes.back()(0), oracle::geometric(1.0, 0.1, 1.0, w), 1e-3 * 0.1 * std::exp(1.0 + w));
    EXPECT_NEAR(r.amplitudes.back()(1), oracle::geometric(0.0, 0.5, 1.0, w), 1e-3 * 0.5 * std::exp(w));
}

TEST(Reduced, FlagsBlowup) {
    const SineGordonSystem sys = build_spectral_model(special(10.0, 4));
    const WienerPath path = sample_wiener(8, -40.0, 10.0, 0.01);
    const ManifoldMap mm(sys.model, std::make_shared<const OUProcess>(ou_stationary(path)));
    const ReducedSgResult r = integrate_reduced_sg(sys, mm, path, 1.0, 0.0, 0.0, 10.0, 1e3);
    EXPECT_TRUE(r.blew_up);
    ASSERT_TRUE(r.blowup_time.has_value());
    EXPECT_LT(*r.blowup_time, 10.0);
}

TEST(Reduced, TracksFullSimulation) {
    const SineGordonSystem sys = build_spectral_model(special(10.0, 8));
    const WienerPath path = sample_wiener(9, -40.0, 2.0, 0.005);
    const ReductionGap gap = reduction_gap(sys, path, 1e-6, 0.5, 1.0);
    EXPECT_LT(gap.relative(), 1e-4);
}

TEST(Ks, MatchesBruteForce) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(40 + trial);
        std::vector<double> y(55);
        for (double& v : x) {
            v = g(rng);
        }
        for (double& v : y) {
            v = 0.3 * trial + g(rng);
        }
        EXPECT_NEAR(ks_statistic(x, y), oracle::ks_brute(x, y), 1e-15);
    }
    EXPECT_EQ(ks_statistic({1.0, 2.0}, {1.0, 2.0}), 0.0);
    EXPECT_NEAR(ks_critical_1pct(100, 100), 1.628 * std::sqrt(0.02), 1e-15);
}
