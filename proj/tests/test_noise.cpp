#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "stochmanifold/error.hpp"
#include "stochmanifold/noise.hpp"

using namespace stochmanifold;

TEST(Philox, KnownAnswerVectors) {
    const Philox4x32 zero(0);
    const auto a = zero(0, 0);
    EXPECT_EQ(a[0], 0x6627e8d5u);
    EXPECT_EQ(a[1], 0xe169c58du);
    EXPECT_EQ(a[2], 0xbc57ac4cu);
    EXPECT_EQ(a[3], 0x9b00dbd8u);

    const Philox4x32 ones(~0ull);
    const auto b = ones(~0ull, ~0ull);
    EXPECT_EQ(b[0], 0x408f276du);
    EXPECT_EQ(b[1], 0x41c83b0eu);
    EXPECT_EQ(b[2], 0xa20bc7c6u);
    EXPECT_EQ(b[3], 0x6d5451fdu);
}

TEST(WienerPath, AnchoredAtZero) {
    for (std::uint64_t seed : {1ull, 99ull, 123456789ull}) {
        for (double dt : {0.1, 0.01, 0.004}) {
            const WienerPath w = sample_wiener(seed, -3.0, 2.0, dt);
            EXPECT_EQ(w.value(0), 0.0);
        }
    }
}

TEST(WienerPath, GridSize) {
    const WienerPath w = sample_wiener(3, -1.0, 2.0, 0.01);
    EXPECT_EQ(w.size(), 301u);
    EXPECT_DOUBLE_EQ(w.t_min(), -1.0);
    EXPECT_DOUBLE_EQ(w.t_max(), 2.0);
}

TEST(WienerPath, Deterministic) {
    const WienerPath a = sample_wiener(42, -5.0, 5.0, 0.01);
    const WienerPath b = sample_wiener(42, -5.0, 5.0, 0.01);
    EXPECT_EQ(a.values(), b.values());
    const WienerPath c = sample_wiener(43, -5.0, 5.0, 0.01);
    EXPECT_NE(a.values(), c.values());
}

TEST(WienerPath, OverlappingWindowsShareIncrements) {
    const WienerPath a = sample_wiener(5, -4.0, 4.0, 0.01);
    const WienerPath b = sample_wiener(5, -1.0, 6.0, 0.01);
    for (std::int64_t k = -100; k < 400; ++k) {
        EXPECT_NEAR(a.increment(k), b.increment(k), 1e-12);
    }
}

TEST(WienerPath, IncrementVariance) {
    const double dt = 0.01;
    const WienerPath w = sample_wiener(11, 0.0, 100.0, dt);
    double sum = 0.0;
    double sq = 0.0;
    const auto n = static_cast<double>(w.k_max() - w.k_min());
    for (std::int64_t k = w.k_min(); k < w.k_max(); ++k) {
        sum += w.increment(k);
        sq += w.increment(k) * w.increment(k);
    }
    const double var = (sq - sum * sum / n) / (n - 1.0);
    EXPECT_GE(var, 0.8 * dt);
    EXPECT_LE(var, 1.2 * dt);
}

TEST(WienerPath, RejectsBadGrids) {
    EXPECT_THROW(sample_wiener(1, 0.0, 1.0, 0.0), InvalidArgument);
    EXPECT_THROW(sample_wiener(1, 0.0, 1.0, -0.1), InvalidArgument);
    EXPECT_THROW(sample_wiener(1, 1.0, 0.0, 0.1), InvalidArgument);
    EXPECT_THROW(sample_wiener(1, 0.0, 1e6, 1e-3), InvalidArgument);
}

TEST(Shift, IdentityAtZero) {
    const WienerPath w = sample_wiener(8, -2.0, 2.0, 0.01);
    EXPECT_EQ(shift(w, 0.0).values(), w.values());
}

TEST(Shift, CompositionIsBitwiseExact) {
    const WienerPath w = sample_wiener(8, -10.0, 10.0, 0.01);
    const WienerPath ab = shift(shift(w, 1.5), 2.25);
    const WienerPath c = shift(w, 3.75);
    ASSERT_EQ(ab.k_min(), c.k_min());
    ASSERT_EQ(ab.k_max(), c.k_max());
    for (std::int64_t k = c.k_min(); k <= c.k_max(); ++k) {
        EXPECT_EQ(ab.value(k), c.value(k));
    }
    EXPECT_EQ(c.value(0), 0.0);
}

TEST(Shift, ZeroPathStaysZero) {
    const WienerPath w = make_path(std::vector<double>(201, 0.0), -1.0, 0.01);
    for (double v : shift(w, 0.5).values()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Shift, RejectsMisalignedTime) {
    const WienerPath w = sample_wiener(8, -2.0, 2.0, 0.01);
    EXPECT_THROW(shift(w, 0.005), InvalidArgument);
}

TEST(Refine, KeepsCoarseValues) {
    const WienerPath w = sample_wiener(2, -1.0, 1.0, 0.02);
    const WienerPath r = refine(w, 4);
    EXPECT_DOUBLE_EQ(r.dt(), 0.005);
    for (std::int64_t k = w.k_min(); k <= w.k_max(); ++k) {
        EXPECT_EQ(r.value(4 * k), w.value(k));
    }
    const WienerPath back = coarsen(r, 4);
    EXPECT_EQ(back.values(), w.values());
}

TEST(OU, ZeroPathGivesZero) {
    const WienerPath w = make_path(std::vector<double>(4001, 0.0), -30.0, 0.01);
    const OUProcess ou = ou_stationary(w);
    for (double z : ou.z_values()) {
        EXPECT_EQ(z, 0.0);
    }
    for (double Z : ou.Z_values()) {
        EXPECT_EQ(Z, 0.0);
    }
}

TEST(OU, CumulativeIntegralAnchoredAtZero) {
    const OUProcess ou = ou_stationary(sample_wiener(4, -30.0, 10.0, 0.01));
    EXPECT_EQ(ou.Z(0), 0.0);
    EXPECT_DOUBLE_EQ(ou.t_min(), -10.0);
}

TEST(OU, NeedsBurnIn) {
    EXPECT_THROW(ou_stationary(sample_wiener(4, -10.0, 10.0, 0.01), 25.0), InvalidArgument);
}

TEST(OU, StationaryMoments) {
    const int n = 10000;
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i) {
        const OUProcess ou = ou_stationary(sample_wiener(derive_seed(17, i), -20.0, 0.5, 0.01));
        z[i] = ou.z(0);
    }
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
    double var = 0.0;
    for (double v : z) {
        var += (v - mean) * (v - mean);
    }
    var /= n - 1;
    EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(0.5 / n));
    EXPECT_NEAR(var, 0.5, 0.05);
}

TEST(OU, ResidualIsFirstOrder) {
    const WienerPath fine = sample_wiener(23, -40.0, 20.0, 0.0025);
    const WienerPath coarse = coarsen(fine, 2);
    const double rf = ou_residual(fine, ou_stationary(fine));
    const double rc = ou_residual(coarse, ou_stationary(coarse));
    EXPECT_GE(rf / rc, 0.4);
    EXPECT_LE(rf / rc, 0.6);
}

TEST(OU, SublinearGrowth) {
    // max_{t in [T/2, T]} |z(t)| / t, averaged over 10 paths, decreases in T
    double previous = std::numeric_limits<double>::infinity();
    for (double T : {10.0, 100.0, 1000.0}) {
        double avg = 0.0;
        for (int p = 0; p < 10; ++p) {
            const OUProcess ou = ou_stationary(sample_wiener(derive_seed(31, p), -20.0, T, 0.01));
            double worst = 0.0;
            for (std::int64_t k = ou.index_of(T / 2); k <= ou.k_max(); ++k) {
                worst = std::max(worst, std::abs(ou.z(k)) / (static_cast<double>(k) * ou.dt()));
            }
            avg += worst / 10.0;
        }
        EXPECT_LT(avg, previous);
        previous = avg;
    }
}

TEST(OU, TimeAverageVanishes) {
    const double T = 200.0;
    double avg = 0.0;
    for (int p = 0; p < 32; ++p) {
        const OUProcess ou = ou_stationary(sample_wiener(derive_seed(37, p), -20.0, T, 0.01));
        avg += std::abs(ou.Z(ou.k_max()) / T) / 32.0;
    }
    EXPECT_LT(avg, 5.0 / std::sqrt(T));
}

TEST(Seeds, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(9, 4), derive_seed(9, 4));
}
