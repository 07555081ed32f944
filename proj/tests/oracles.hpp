#pragma once

// Reference computations used by the tests. Nothing here calls the library's
// integrators or manifold solver; only the sampled noise is shared.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stochmanifold/noise.hpp"

namespace oracle {

// F(x) = L sin(w.x) w with w = (1, ..., 1)/sqrt(N).
inline Eigen::VectorXd ridge_sin(double L, const Eigen::VectorXd& x) {
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    return Eigen::VectorXd::Constant(x.size(), L * std::sin(s * x.sum()) * s);
}

// Diagonal random ODE v' = diag(lambda) v + z(t) v + e^{-z} F(e^{z} v) with z
// linear between OU grid points, classical RK4 with `substeps` per grid step.
struct RandomOde {
    Eigen::VectorXd lambda;
    double L = 0.0;
    const stochmanifold::OUProcess* ou = nullptr;

    double z_at(std::int64_t k, double frac) const { return (1.0 - frac) * ou->z(k) + frac * ou->z(k + 1); }

    Eigen::VectorXd rhs(double z, const Eigen::VectorXd& v) const {
        return lambda.cwiseProduct(v) + z * v + std::exp(-z) * ridge_sin(L, std::exp(z) * v);
    }

    Eigen::VectorXd integrate(Eigen::VectorXd v, std::int64_t k0, std::int64_t k1, int substeps) const {
        const double h = ou->dt() / substeps;
        for (std::int64_t k = k0; k < k1; ++k) {
            for (int j = 0; j < substeps; ++j) {
                const double f0 = static_cast<double>(j) / substeps;
                const double fm = (j + 0.5) / substeps;
                const double f1 = static_cast<double>(j + 1) / substeps;
                const Eigen::VectorXd a = rhs(z_at(k, f0), v);
                const Eigen::VectorXd b = rhs(z_at(k, fm), v + 0.5 * h * a);
                const Eigen::VectorXd c = rhs(z_at(k, fm), v + 0.5 * h * b);
                const Eigen::VectorXd d = rhs(z_at(k, f1), v + h * c);
                v += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
            }
        }
        return v;
    }
};

// Pullback oracle for a model with one center coordinate (index 0): start at
// fiber - n_pull steps with stable data `stable0`, shoot on the initial center
// value so the center coordinate hits `xi` at the fiber, return the stable
// coordinates there.
inline Eigen::VectorXd pullback_stable(const RandomOde& ode, double xi, std::int64_t fiber, std::int64_t n_pull,
                                       const Eigen::VectorXd& stable0, int substeps) {
    const auto n = ode.lambda.size();
    auto shoot = [&](double c) {
        Eigen::VectorXd v0(n);
        v0(0) = c;
        v0.tail(n - 1) = stable0;
        return ode.integrate(v0, fiber - n_pull, fiber, substeps);
    };
    // secant on c -> center(0) - xi
    double c0 = xi;
    double c1 = xi * 1.1 + 1e-3;
    double r0 = shoot(c0)(0) - xi;
    Eigen::VectorXd end = shoot(c1);
    double r1 = end(0) - xi;
    for (int it = 0; it < 60 && std::abs(r1) > 1e-13 * std::max(1.0, std::abs(xi)); ++it) {
        const double c2 = c1 - r1 * (c1 - c0) / (r1 - r0);
        c0 = c1;
        r0 = r1;
        c1 = c2;
        end = shoot(c1);
        r1 = end(0) - xi;
    }
    return end.tail(n - 1);
}

// Stratonovich geometric solution of du = lambda u dt + u o dW.
inline double geometric(double lambda, double u0, double elapsed, double dW) {
    return u0 * std::exp(lambda * elapsed + dW);
}

// Roots of det(M - d I) for the mode-k block M = [[0, -1], [nu k^2 - b, a]].
inline std::pair<std::complex<double>, std::complex<double>> mode_eigenvalues(double a, double nu, double b, int k) {
    Eigen::Matrix2d M;
    M << 0.0, -1.0, nu * k * k - b, a;
    Eigen::EigenSolver<Eigen::Matrix2d> es(M);
    auto e0 = es.eigenvalues()(0);
    auto e1 = es.eigenvalues()(1);
    if (e0.real() > e1.real() || (e0.real() == e1.real() && e0.imag() > e1.imag())) {
        std::swap(e0, e1);
    }
    return {e0, e1};
}

// Squared L2 norm over (0, 2 pi) of sum_k c_k sin(k x), by the midpoint rule.
inline double l2_squared_quadrature(const Eigen::VectorXd& c, int points = 8192) {
    const double h = 2.0 * std::numbers::pi / points;
    double acc = 0.0;
    for (int j = 0; j < points; ++j) {
        const double x = (j + 0.5) * h;
        double u = 0.0;
        for (int k = 0; k < c.size(); ++k) {
            u += c(k) * std::sin((k + 1) * x);
        }
        acc += u * u;
    }
    return acc * h;
}

// Two-sample KS statistic by brute force over the pooled sample.
inline double ks_brute(const std::vector<double>& x, const std::vector<double>& y) {
    double best = 0.0;
    auto cdf = [](const std::vector<double>& s, double t) {
        double c = 0.0;
        for (double v : s) {
            c += v <= t ? 1.0 : 0.0;
        }
        return c / static_cast<double>(s.size());
    };
    for (const auto* s : {&x, &y}) {
        for (double t : *s) {
            best = std::max(best, std::abs(cdf(x, t) - cdf(y, t)));
        }
    }
    return best;
}

} // namespace oracle
