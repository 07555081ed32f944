#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stochmanifold/error.hpp"
#include "stochmanifold/model.hpp"

using namespace stochmanifold;

namespace {

// center: 0.5 and the pair 0.7 +- 2i; stable: -1.5, -2 +- 3i, -4
SpectralModel mixed_model(Nonlinearity nl = Nonlinearity::zero()) {
    return SpectralModel({{0.5, 0.0, Split::center},
                          {0.7, 2.0, Split::center},
                          {-1.5, 0.0, Split::stable},
                          {-2.0, 3.0, Split::stable},
                          {-4.0, 0.0, Split::stable}},
                         0.5, 1.5, std::move(nl));
}

StateVector random_state(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    StateVector x(n);
    for (int i = 0; i < n; ++i) {
        x(i) = u(rng);
    }
    return x;
}

} // namespace

TEST(Model, Dimensions) {
    const SpectralModel m = mixed_model();
    EXPECT_EQ(m.n_total(), 7);
    EXPECT_EQ(m.n_c(), 3);
    EXPECT_EQ(m.n_s(), 4);
    EXPECT_DOUBLE_EQ(m.tightest_alpha(), 0.5);
    EXPECT_DOUBLE_EQ(m.tightest_beta(), 1.5);
}

TEST(Model, RejectsBrokenDichotomy) {
    EXPECT_THROW(SpectralModel({{-0.1, 0.0, Split::center}, {-1.0, 0.0, Split::stable}}, 0.0, 1.0,
                               Nonlinearity::zero()),
                 InvalidArgument);
    EXPECT_THROW(SpectralModel({{0.0, 0.0, Split::center}, {-0.5, 0.0, Split::stable}}, 0.0, 1.0,
                               Nonlinearity::zero()),
                 InvalidArgument);
    EXPECT_THROW(SpectralModel({{0.0, 0.0, Split::center}, {-2.0, 0.0, Split::stable}}, 1.0, 1.0,
                               Nonlinearity::zero()),
                 InvalidArgument);
    EXPECT_THROW(SpectralModel({{-2.0, 0.0, Split::stable}}, 0.0, 1.0, Nonlinearity::zero()), InvalidArgument);
}

TEST(Model, RejectsUnderstatedLipschitz) {
    EXPECT_THROW(Nonlinearity::ridge("sin", 0.5), InvalidArgument);
    EXPECT_THROW(Nonlinearity::ridge("scaled_sin:x", 1.0), InvalidArgument);
    EXPECT_THROW(Nonlinearity::ridge("cube", 1.0), InvalidArgument);
}

TEST(Projection, Algebra) {
    const SpectralModel m = mixed_model();
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const StateVector x = random_state(m.n_total(), rng);
        const StateVector c = project_c(m, x);
        const StateVector s = project_s(m, x);
        EXPECT_EQ(c + s, x);
        EXPECT_EQ(project_c(m, c), c);
        EXPECT_EQ(project_s(m, s), s);
        EXPECT_TRUE(project_c(m, s).isZero(0.0));
        EXPECT_TRUE(project_s(m, c).isZero(0.0));
    }
}

TEST(Projection, CenterOnlyState) {
    const SpectralModel m = mixed_model();
    StateVector x = StateVector::Zero(7);
    x.head(3) << 1.0, 2.0, 3.0;
    EXPECT_EQ(project_c(m, x), x);
    EXPECT_TRUE(project_s(m, x).isZero(0.0));
}

TEST(Projection, DimensionMismatch) {
    const SpectralModel m = mixed_model();
    EXPECT_THROW(project_c(m, StateVector::Zero(3)), InvalidArgument);
}

TEST(Semigroup, Examples) {
    const SpectralModel m(
        {{0.5, 0.0, Split::center}, {-1.0, 0.0, Split::stable}}, 0.5, 1.0, Nonlinearity::zero());
    StateVector x(2);
    x << 1.0, 1.0;
    EXPECT_EQ(semigroup_apply(m, Part::full, 0.0, x), x);
    EXPECT_NEAR(semigroup_apply(m, Part::stable, 1.0, x)(1), std::exp(-1.0), 1e-15);
    const StateVector back = semigroup_apply(m, Part::center, -2.0, x);
    EXPECT_NEAR(back(0), std::exp(-1.0), 1e-15);
    EXPECT_LE(std::abs(back(0)), std::exp(0.5 * -2.0) * (1.0 + 1e-15));
    EXPECT_EQ(back(1), 0.0);
}

TEST(Semigroup, DichotomyBounds) {
    const SpectralModel m = mixed_model();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> times(0.0, 5.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const StateVector x = random_state(m.n_total(), rng);
        const double t = times(rng);
        const StateVector xc = project_c(m, x);
        const StateVector xs = project_s(m, x);
        EXPECT_LE(semigroup_apply(m, Part::center, -t, x).norm(), std::exp(-m.alpha() * t) * xc.norm() * (1 + 1e-14));
        EXPECT_LE(semigroup_apply(m, Part::stable, t, x).norm(), std::exp(-m.beta() * t) * xs.norm() * (1 + 1e-14));
    }
    // equality on the extremal blocks
    StateVector e0 = StateVector::Zero(7);
    e0(0) = 1.0;
    EXPECT_NEAR(semigroup_apply(m, Part::center, -3.0, e0).norm(), std::exp(-1.5), 1e-15);
    StateVector e3 = StateVector::Zero(7);
    e3(3) = 1.0;
    EXPECT_NEAR(semigroup_apply(m, Part::stable, 2.0, e3).norm(), std::exp(-3.0), 1e-15);
}

TEST(Semigroup, Composition) {
    const SpectralModel m = mixed_model();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> times(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const StateVector x = random_state(m.n_total(), rng);
        const double s = times(rng);
        const double t = times(rng);
        const StateVector two = semigroup_apply(m, Part::full, t, semigroup_apply(m, Part::full, s, x));
        const StateVector one = semigroup_apply(m, Part::full, s + t, x);
        EXPECT_LE((two - one).norm(), 1e-12 * one.norm());
    }
}

TEST(Semigroup, CommutesWithProjections) {
    const SpectralModel m = mixed_model();
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const StateVector x = random_state(m.n_total(), rng);
        const StateVector a = project_c(m, semigroup_apply(m, Part::full, 0.7, x));
        const StateVector b = semigroup_apply(m, Part::full, 0.7, project_c(m, x));
        EXPECT_EQ(a, b);
        EXPECT_EQ(project_s(m, semigroup_apply(m, Part::full, 0.7, x)),
                  semigroup_apply(m, Part::full, 0.7, project_s(m, x)));
    }
}

TEST(Semigroup, BlockPropagatorMatches) {
    const SpectralModel m = mixed_model();
    const BlockPropagator prop(m, 0.01);
    std::mt19937_64 rng(5);
    const StateVector x = random_state(m.n_total(), rng);
    const StateVector a = prop.apply(x, 2.0, Part::full);
    const StateVector b = 2.0 * semigroup_apply(m, Part::full, 0.01, x);
    EXPECT_LE((a - b).norm(), 1e-14 * b.norm());
}

TEST(Generator, MatchesBlocks) {
    const SpectralModel m = mixed_model();
    StateVector x = StateVector::Zero(7);
    x(1) = 1.0;  // first component of the 0.7 +- 2i pair
    const StateVector ax = apply_generator(m, x);
    EXPECT_DOUBLE_EQ(ax(1), 0.7);
    EXPECT_DOUBLE_EQ(ax(2), 2.0);
}

TEST(Nonlinearity, ZeroMap) {
    const SpectralModel m = mixed_model();
    std::mt19937_64 rng(6);
    EXPECT_TRUE(eval_F(m, random_state(7, rng)).isZero(0.0));
}

TEST(Nonlinearity, VanishesAtOrigin) {
    for (const auto& nl : {Nonlinearity::ridge("sin", 1.0), Nonlinearity::ridge("tanh", 1.0),
                           Nonlinearity::pointwise("sin", 1.0, 12)}) {
        const SpectralModel m = mixed_model(nl);
        EXPECT_EQ(eval_F(m, StateVector::Zero(7)).norm(), 0.0);
    }
}

TEST(Nonlinearity, SineTransformRoundTrip) {
    const SineTransform tr(8, 12);
    std::mt19937_64 rng(7);
    const StateVector c = random_state(8, rng);
    const StateVector back = tr.project([](double u) { return u; }, c);
    EXPECT_LE((back - c).norm(), 1e-12);
    EXPECT_LE((tr.analyze(tr.synthesize(c)) - c).norm(), 1e-12);
}

TEST(Nonlinearity, SineTransformMatchesCollocation) {
    const SineTransform tr(3, 5);
    StateVector c(3);
    c << 0.3, -0.2, 0.1;
    const Eigen::VectorXd u = tr.synthesize(c);
    for (int j = 0; j < 5; ++j) {
        const double x = (j + 1) * std::acos(-1.0) / 6.0;
        EXPECT_NEAR(u(j), 0.3 * std::sin(x) - 0.2 * std::sin(2 * x) + 0.1 * std::sin(3 * x), 1e-15);
    }
}

TEST(Nonlinearity, DealiasingGridEnforced) {
    // N = 7 needs at least 11 collocation points
    EXPECT_THROW(eval_F(mixed_model(Nonlinearity::pointwise("sin", 1.0, 8)), StateVector::Ones(7)),
                 InvalidArgument);
}

TEST(Nonlinearity, SampledLipschitzBelowDeclared) {
    for (const auto& nl : {Nonlinearity::ridge("scaled_sin:0.3", 0.3), Nonlinearity::ridge("tanh", 1.0),
                           Nonlinearity::pointwise("sin", 1.0, 11)}) {
        const SpectralModel m = mixed_model(nl);
        EXPECT_LE(sampled_lipschitz(m, 10000, 8), m.lipschitz() * (1 + 1e-6)) << nl.fn_name;
        EXPECT_LE(sampled_lipschitz(m, 1000, 9, 3.0, 0.8), m.lipschitz() * (1 + 1e-6)) << nl.fn_name;
    }
}

TEST(GParts, ReduceToFAtZeroNoise) {
    const SpectralModel m = mixed_model(Nonlinearity::ridge("sin", 1.0));
    std::mt19937_64 rng(10);
    const StateVector x = random_state(7, rng);
    const auto [gc, gs] = eval_g_parts(m, 0.0, x);
    const StateVector F = eval_F(m, x);
    EXPECT_EQ(gc, project_c(m, F));
    EXPECT_EQ(gs, project_s(m, F));
    const auto [zc, zs] = eval_g_parts(m, 0.4, StateVector::Zero(7));
    EXPECT_EQ(zc.norm(), 0.0);
    EXPECT_EQ(zs.norm(), 0.0);
}

TEST(GParts, ScalingDefinition) {
    const SpectralModel m = mixed_model(Nonlinearity::ridge("sin", 1.0));
    std::mt19937_64 rng(11);
    const StateVector x = random_state(7, rng);
    const double z = -0.6;
    const StateVector expected = std::exp(-z) * eval_F(m, std::exp(z) * x);
    EXPECT_LE((eval_G(m, z, x) - expected).norm(), 1e-15);
}

TEST(CenterF, Identities) {
    const SpectralModel m = mixed_model(Nonlinearity::ridge("sin", 1.0));
    std::mt19937_64 rng(12);
    const StateVector xc = project_c(m, random_state(7, rng));
    EXPECT_EQ(eval_F_c(m, xc), project_c(m, eval_F(m, xc)));
    EXPECT_EQ(eval_F_c(m, StateVector::Zero(7)).norm(), 0.0);
    EXPECT_EQ(eval_F_c(mixed_model(), xc).norm(), 0.0);
    EXPECT_THROW(eval_F_c(m, StateVector::Ones(7)), InvalidArgument);
}

TEST(ModelJson, RoundTrip) {
    const SpectralModel m = mixed_model(Nonlinearity::pointwise("tanh", 1.0, 11));
    const SpectralModel back = model_from_json(model_to_json(m));
    EXPECT_EQ(back.n_total(), m.n_total());
    EXPECT_EQ(back.model_hash(), m.model_hash());
    EXPECT_EQ(model_to_json(back), model_to_json(m));
    EXPECT_NE(two_mode_model(1.0, 0.05).model_hash(), two_mode_model(1.0, 0.1).model_hash());
}

TEST(ModelJson, RejectsBadDocuments) {
    EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"alpha":0,"beta":1})")), InvalidArgument);
    EXPECT_THROW(model_from_json(nlohmann::json::parse(
                     R"({"eigenvalues":[{"re":0,"split":"middle"}],"alpha":0,"beta":1})")),
                 InvalidArgument);
}

TEST(TwoMode, Structure) {
    const SpectralModel m = two_mode_model(1.0, 0.05);
    EXPECT_EQ(m.n_c(), 1);
    EXPECT_EQ(m.n_s(), 1);
    EXPECT_DOUBLE_EQ(m.lipschitz(), 0.05);
    StateVector x(2);
    x << 0.3, -0.1;
    const double w = 1.0 / std::sqrt(2.0);
    const StateVector F = eval_F(m, x);
    EXPECT_NEAR(F(0), 0.05 * std::sin(w * 0.2) * w, 1e-16);
    EXPECT_NEAR(F(1), F(0), 0.0);
}
