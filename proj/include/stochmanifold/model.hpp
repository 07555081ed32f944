#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace stochmanifold {

// Coefficients in the eigenbasis of the model, in block order.
using StateVector = Eigen::VectorXd;

enum class Split { center, stable };
enum class Part { center, stable, full };

/// One spectral block: a real eigenvalue (im == 0) or a complex-conjugate pair
/// re +- i im stored as the real 2x2 block [[re, -im], [im, re]].
struct SpectralBlock {
    double re = 0.0;
    double im = 0.0;
    Split split = Split::stable;

    int size() const noexcept { return im == 0.0 ? 1 : 2; }
};

/// Sine-basis collocation on (0, 2*pi) for u(x) = sum_k c_k sin(k x).
///
/// Functions in this span are odd about x = pi, so projections over (0, 2*pi)
/// reduce to a type-I DST on the half interval applied to the odd part of
/// f(u). Collocation points are x_j = j*pi/(G+1), j = 1..G.
class SineTransform {
public:
    SineTransform(int n_modes, int grid_size);

    int n_modes() const noexcept { return n_modes_; }
    int grid_size() const noexcept { return grid_size_; }

    Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const;
    Eigen::VectorXd analyze(const Eigen::VectorXd& values) const;

    // Galerkin projection of f(u): sine coefficients of f(sum_k c_k sin kx).
    Eigen::VectorXd project(const std::function<double(double)>& f, const Eigen::VectorXd& coeffs) const;

private:
    int n_modes_;
    int grid_size_;
    Eigen::MatrixXd synth_;  // grid_size x n_modes, entries sin(k x_j)
};

// Scalar built-ins: "zero", "sin", "scaled_sin:<c>", "tanh".
struct ScalarFunction {
    std::string name;
    std::function<double(double)> f;
    double lipschitz = 0.0;
};

ScalarFunction builtin_function(const std::string& fn_name);

struct Nonlinearity {
    enum class Kind { coefficient_map, pointwise_sine_basis };

    Kind kind = Kind::coefficient_map;
    std::string fn_name = "zero";
    // coefficient_map with a custom map; when empty, the built-in scalar
    // function acts along the unit diagonal: F(x) = f(w.x) w, w = 1/sqrt(N).
    std::function<StateVector(const StateVector&)> map;
    std::function<double(double)> scalar;
    int grid_size = 0;
    double lipschitz = 0.0;
    bool satisfies_F0 = true;
    bool is_zero = false;

    static Nonlinearity zero();
    static Nonlinearity ridge(const std::string& fn_name, double lipschitz);
    static Nonlinearity pointwise(const std::string& fn_name, double lipschitz, int grid_size);
    static Nonlinearity custom(std::function<StateVector(const StateVector&)> map, double lipschitz,
                               std::string label = "custom");
};

/// Truncated linear operator with a center/stable split, dichotomy constants
/// and a globally Lipschitz nonlinearity.
class SpectralModel {
public:
    SpectralModel(std::vector<SpectralBlock> blocks, double alpha, double beta, Nonlinearity nonlinearity);

    const std::vector<SpectralBlock>& blocks() const noexcept { return blocks_; }
    int block_offset(std::size_t b) const { return offsets_.at(b); }
    int n_total() const noexcept { return n_total_; }
    int n_c() const noexcept { return n_c_; }
    int n_s() const noexcept { return n_total_ - n_c_; }
    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    double lipschitz() const noexcept { return nonlinearity_.lipschitz; }

    // Tightest constants the block spectrum admits.
    double tightest_alpha() const noexcept { return tightest_alpha_; }
    double tightest_beta() const noexcept { return tightest_beta_; }
    double max_real_part() const noexcept;

    bool is_center(int i) const { return center_mask_(i) != 0.0; }
    const Eigen::ArrayXd& center_mask() const noexcept { return center_mask_; }
    const std::vector<int>& center_indices() const noexcept { return center_idx_; }
    const std::vector<int>& stable_indices() const noexcept { return stable_idx_; }

    const Nonlinearity& nonlinearity() const noexcept { return nonlinearity_; }
    const SineTransform* sine_transform() const noexcept { return sine_.get(); }

    void check_conforms(const StateVector& x, const char* where) const;

    // Stable hash of the model description (not of custom callables).
    std::string model_hash() const;

private:
    std::vector<SpectralBlock> blocks_;
    std::vector<int> offsets_;
    int n_total_ = 0;
    int n_c_ = 0;
    double alpha_;
    double beta_;
    double tightest_alpha_ = 0.0;
    double tightest_beta_ = 0.0;
    Eigen::ArrayXd center_mask_;
    std::vector<int> center_idx_;
    std::vector<int> stable_idx_;
    Nonlinearity nonlinearity_;
    std::shared_ptr<const SineTransform> sine_;
};

StateVector project_c(const SpectralModel& model, const StateVector& x);
StateVector project_s(const SpectralModel& model, const StateVector& x);

// Exact block exponential e^{tA} restricted to `part` (the other part is zeroed).
StateVector semigroup_apply(const SpectralModel& model, Part part, double t, const StateVector& x);

// A x, block by block.
StateVector apply_generator(const SpectralModel& model, const StateVector& x);

StateVector eval_F(const SpectralModel& model, const StateVector& x);

// G(z, x) = e^{-z} F(e^{z} x).
StateVector eval_G(const SpectralModel& model, double z, const StateVector& x);

std::pair<StateVector, StateVector> eval_g_parts(const SpectralModel& model, double z, const StateVector& x);

// Pi_c F(xc + 0); xc must be purely center.
StateVector eval_F_c(const SpectralModel& model, const StateVector& xc);

/// Precomputed e^{hA} (times a scalar) for a fixed step h.
class BlockPropagator {
public:
    BlockPropagator(const SpectralModel& model, double h);

    // out = scale * e^{hA} x on `part`, zero elsewhere. `out` may alias `x`.
    void apply(const StateVector& x, double scale, Part part, StateVector& out) const;
    StateVector apply(const StateVector& x, double scale, Part part = Part::full) const;

private:
    struct Entry {
        int offset;
        int size;
        bool center;
        double growth;
        double c;
        double s;
    };
    std::vector<Entry> entries_;
    int n_;
};

// Largest difference quotient |F(x)-F(y)|/|x-y| (or of G at fixed z) over
// random pairs drawn with entries in [-scale, scale].
double sampled_lipschitz(const SpectralModel& model, int n_pairs, std::uint64_t seed, double scale = 3.0,
                         double z = 0.0);

// {eigenvalues:[{re,im,split}], alpha, beta, nonlinearity:{kind, lipschitz, grid_size, fn_name}}
SpectralModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const SpectralModel& model);

// Two-mode test model: center eigenvalue 0, stable eigenvalue -beta, alpha = 0,
// coefficient-map nonlinearity lipschitz*sin(w.x) w.
SpectralModel two_mode_model(double beta, double lipschitz);

} // namespace stochmanifold
