#include "stochmanifold/model.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "stochmanifold/error.hpp"
#include "stochmanifold/noise.hpp"

namespace stochmanifold {

// ---------------------------------------------------------------------------
// SineTransform

SineTransform::SineTransform(int n_modes, int grid_size) : n_modes_(n_modes), grid_size_(grid_size) {
    if (n_modes < 1 || grid_size < n_modes) {
        throw InvalidArgument("SineTransform: need grid_size >= n_modes >= 1");
    }
    synth_.resize(grid_size, n_modes);
    const double spacing = std::numbers::pi / (grid_size + 1);
    for (int j = 0; j < grid_size; ++j) {
        for (int k = 0; k < n_modes; ++k) {
            synth_(j, k) = std::sin((k + 1) * (j + 1) * spacing);
        }
    }
}

Eigen::VectorXd SineTransform::synthesize(const Eigen::VectorXd& coeffs) const {
    return synth_ * coeffs;
}

Eigen::VectorXd SineTransform::analyze(const Eigen::VectorXd& values) const {
    return (2.0 / (grid_size_ + 1)) * (synth_.transpose() * values);
}

Eigen::VectorXd SineTransform::project(const std::function<double(double)>& f,
                                       const Eigen::VectorXd& coeffs) const {
    Eigen::VectorXd u = synthesize(coeffs);
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        // odd part: only it survives the projection over (0, 2*pi)
        u(j) = 0.5 * (f(u(j)) - f(-u(j)));
    }
    return analyze(u);
}

// ---------------------------------------------------------------------------
// Nonlinearity

ScalarFunction builtin_function(const std::string& fn_name) {
    if (fn_name == "zero") {
        return {fn_name, [](double) { return 0.0; }, 0.0};
    }
    if (fn_name == "sin") {
        return {fn_name, [](double u) { return std::sin(u); }, 1.0};
    }
    if (fn_name == "tanh") {
        return {fn_name, [](double u) { return std::tanh(u); }, 1.0};
    }
    const std::string prefix = "scaled_sin:";
    if (fn_name.rfind(prefix, 0) == 0) {
        const std::string arg = fn_name.substr(prefix.size());
        std::size_t used = 0;
        double c = 0.0;
        try {
            c = std::stod(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != arg.size() || !std::isfinite(c)) {
            throw InvalidArgument("bad scale in nonlinearity name '" + fn_name + "'");
        }
        return {fn_name, [c](double u) { return c * std::sin(u); }, std::fabs(c)};
    }
    throw InvalidArgument("unknown nonlinearity '" + fn_name + "'");
}

namespace {

void require_declared_bound(const ScalarFunction& sf, double lipschitz) {
    if (!(lipschitz >= 0.0) || lipschitz + 1e-12 < sf.lipschitz) {
        throw InvalidArgument("declared lipschitz " + std::to_string(lipschitz) + " is below the constant " +
                              std::to_string(sf.lipschitz) + " of '" + sf.name + "'");
    }
}

} // namespace

Nonlinearity Nonlinearity::zero() {
    Nonlinearity nl;
    nl.kind = Kind::coefficient_map;
    nl.fn_name = "zero";
    nl.scalar = builtin_function("zero").f;
    nl.lipschitz = 0.0;
    nl.is_zero = true;
    return nl;
}

Nonlinearity Nonlinearity::ridge(const std::string& fn_name, double lipschitz) {
    const ScalarFunction sf = builtin_function(fn_name);
    require_declared_bound(sf, lipschitz);
    Nonlinearity nl;
    nl.kind = Kind::coefficient_map;
    nl.fn_name = fn_name;
    nl.scalar = sf.f;
    nl.lipschitz = lipschitz;
    nl.is_zero = fn_name == "zero";
    return nl;
}

Nonlinearity Nonlinearity::pointwise(const std::string& fn_name, double lipschitz, int grid_size) {
    const ScalarFunction sf = builtin_function(fn_name);
    require_declared_bound(sf, lipschitz);
    Nonlinearity nl;
    nl.kind = Kind::pointwise_sine_basis;
    nl.fn_name = fn_name;
    nl.scalar = sf.f;
    nl.grid_size = grid_size;
    nl.lipschitz = lipschitz;
    nl.is_zero = fn_name == "zero";
    return nl;
}

Nonlinearity Nonlinearity::custom(std::function<StateVector(const StateVector&)> map, double lipschitz,
                                  std::string label) {
    if (!(lipschitz >= 0.0)) {
        throw InvalidArgument("lipschitz constant must be non-negative");
    }
    Nonlinearity nl;
    nl.kind = Kind::coefficient_map;
    nl.fn_name = std::move(label);
    nl.map = std::move(map);
    nl.lipschitz = lipschitz;
    return nl;
}

// ---------------------------------------------------------------------------
// SpectralModel

SpectralModel::SpectralModel(std::vector<SpectralBlock> blocks, double alpha, double beta,
                             Nonlinearity nonlinearity)
    : blocks_(std::move(blocks)), alpha_(alpha), beta_(beta), nonlinearity_(std::move(nonlinearity)) {
    if (!(alpha >= 0.0) || !(alpha < beta)) {
        throw InvalidArgument("dichotomy constants must satisfy 0 <= alpha < beta");
    }
    bool any_center = false;
    bool any_stable = false;
    tightest_alpha_ = std::numeric_limits<double>::infinity();
    tightest_beta_ = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_) {
        if (!std::isfinite(b.re) || !std::isfinite(b.im)) {
            throw InvalidArgument("non-finite eigenvalue");
        }
        offsets_.push_back(n_total_);
        for (int i = 0; i < b.size(); ++i) {
            (b.split == Split::center ? center_idx_ : stable_idx_).push_back(n_total_ + i);
        }
        n_total_ += b.size();
        if (b.split == Split::center) {
            any_center = true;
            n_c_ += b.size();
            if (b.re < alpha - 1e-12) {
                throw InvalidArgument("center block with real part " + std::to_string(b.re) +
                                      " below alpha = " + std::to_string(alpha));
            }
            tightest_alpha_ = std::min(tightest_alpha_, b.re);
        } else {
            any_stable = true;
            if (b.re > -beta + 1e-12) {
                throw InvalidArgument("stable block with real part " + std::to_string(b.re) +
                                      " above -beta = " + std::to_string(-beta));
            }
            tightest_beta_ = std::min(tightest_beta_, -b.re);
        }
    }
    if (!any_center || !any_stable) {
        throw InvalidArgument("both the center and the stable spectrum must be nonempty");
    }
    center_mask_ = Eigen::ArrayXd::Zero(n_total_);
    for (int i : center_idx_) {
        center_mask_(i) = 1.0;
    }
    if (nonlinearity_.kind == Nonlinearity::Kind::pointwise_sine_basis) {
        if (nonlinearity_.grid_size >= n_total_) {
            sine_ = std::make_shared<SineTransform>(n_total_, nonlinearity_.grid_size);
        }
    } else if (!nonlinearity_.map && !nonlinearity_.scalar) {
        throw InvalidArgument("coefficient map nonlinearity without a map");
    }
    if (!(nonlinearity_.lipschitz >= 0.0)) {
        throw InvalidArgument("lipschitz constant must be non-negative");
    }
    if (nonlinearity_.satisfies_F0 && (sine_ || nonlinearity_.kind == Nonlinearity::Kind::coefficient_map)) {
        const StateVector f0 = eval_F(*this, StateVector::Zero(n_total_));
        if (f0.lpNorm<Eigen::Infinity>() > 1e-14) {
            throw InvalidArgument("nonlinearity flagged F(0) = 0 but F(0) != 0");
        }
    }
}

double SpectralModel::max_real_part() const noexcept {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks_) {
        m = std::max(m, b.re);
    }
    return m;
}

void SpectralModel::check_conforms(const StateVector& x, const char* where) const {
    if (x.size() != n_total_) {
        throw InvalidArgument(std::string(where) + ": state has dimension " + std::to_string(x.size()) +
                              ", model has " + std::to_string(n_total_));
    }
}

std::string SpectralModel::model_hash() const {
    const std::string text = model_to_json(*this).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// operations

StateVector project_c(const SpectralModel& model, const StateVector& x) {
    model.check_conforms(x, "project_c");
    return (x.array() * model.center_mask()).matrix();
}

StateVector project_s(const SpectralModel& model, const StateVector& x) {
    model.check_conforms(x, "project_s");
    return (x.array() * (1.0 - model.center_mask())).matrix();
}

namespace {

bool in_part(Split split, Part part) {
    return part == Part::full || (part == Part::center) == (split == Split::center);
}

} // namespace

StateVector semigroup_apply(const SpectralModel& model, Part part, double t, const StateVector& x) {
    model.check_conforms(x, "semigroup_apply");
    StateVector out = StateVector::Zero(x.size());
    const auto& blocks = model.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (!in_part(blocks[b].split, part)) {
            continue;
        }
        const int o = model.block_offset(b);
        const double g = std::exp(blocks[b].re * t);
        if (blocks[b].size() == 1) {
            out(o) = g * x(o);
        } else {
            const double c = std::cos(blocks[b].im * t);
            const double s = std::sin(blocks[b].im * t);
            out(o) = g * (c * x(o) - s * x(o + 1));
            out(o + 1) = g * (s * x(o) + c * x(o + 1));
        }
    }
    return out;
}

StateVector apply_generator(const SpectralModel& model, const StateVector& x) {
    model.check_conforms(x, "apply_generator");
    StateVector out(x.size());
    const auto& blocks = model.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const int o = model.block_offset(b);
        if (blocks[b].size() == 1) {
            out(o) = blocks[b].re * x(o);
        } else {
            out(o) = blocks[b].re * x(o) - blocks[b].im * x(o + 1);
            out(o + 1) = blocks[b].im * x(o) + blocks[b].re * x(o + 1);
        }
    }
    return out;
}

StateVector eval_F(const SpectralModel& model, const StateVector& x) {
    model.check_conforms(x, "eval_F");
    const Nonlinearity& nl = model.nonlinearity();
    if (nl.is_zero) {
        return StateVector::Zero(x.size());
    }
    if (nl.kind == Nonlinearity::Kind::pointwise_sine_basis) {
        const int needed = (3 * model.n_total() + 1) / 2;
        if (nl.grid_size < needed || model.sine_transform() == nullptr) {
            throw InvalidArgument("eval_F: collocation grid of " + std::to_string(nl.grid_size) +
                                  " points is below the dealiasing requirement of " + std::to_string(needed));
        }
        return model.sine_transform()->project(nl.scalar, x);
    }
    if (nl.map) {
        StateVector out = nl.map(x);
        model.check_conforms(out, "eval_F (map output)");
        return out;
    }
    const double w = 1.0 / std::sqrt(static_cast<double>(x.size()));
    return StateVector::Constant(x.size(), w * nl.scalar(w * x.sum()));
}

StateVector eval_G(const SpectralModel& model, double z, const StateVector& x) {
    if (model.nonlinearity().is_zero) {
        model.check_conforms(x, "eval_G");
        return StateVector::Zero(x.size());
    }
    return std::exp(-z) * eval_F(model, std::exp(z) * x);
}

std::pair<StateVector, StateVector> eval_g_parts(const SpectralModel& model, double z, const StateVector& x) {
    const StateVector g = eval_G(model, z, x);
    return {project_c(model, g), project_s(model, g)};
}

StateVector eval_F_c(const SpectralModel& model, const StateVector& xc) {
    model.check_conforms(xc, "eval_F_c");
    for (int i : model.stable_indices()) {
        if (xc(i) != 0.0) {
            throw InvalidArgument("eval_F_c: argument has a nonzero stable coefficient");
        }
    }
    return project_c(model, eval_F(model, xc));
}

// ---------------------------------------------------------------------------
// BlockPropagator

BlockPropagator::BlockPropagator(const SpectralModel& model, double h) : n_(model.n_total()) {
    const auto& blocks = model.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        entries_.push_back({model.block_offset(b), blocks[b].size(), blocks[b].split == Split::center,
                            std::exp(blocks[b].re * h), std::cos(blocks[b].im * h),
                            std::sin(blocks[b].im * h)});
    }
}

void BlockPropagator::apply(const StateVector& x, double scale, Part part, StateVector& out) const {
    if (x.size() != n_) {
        throw InvalidArgument("BlockPropagator: dimension mismatch");
    }
    if (out.size() != n_) {
        out.resize(n_);
    }
    for (const auto& e : entries_) {
        const bool keep = part == Part::full || (part == Part::center) == e.center;
        if (e.size == 1) {
            out(e.offset) = keep ? scale * e.growth * x(e.offset) : 0.0;
        } else if (keep) {
            const double a = x(e.offset);
            const double b = x(e.offset + 1);
            const double g = scale * e.growth;
            out(e.offset) = g * (e.c * a - e.s * b);
            out(e.offset + 1) = g * (e.s * a + e.c * b);
        } else {
            out(e.offset) = 0.0;
            out(e.offset + 1) = 0.0;
        }
    }
}

StateVector BlockPropagator::apply(const StateVector& x, double scale, Part part) const {
    StateVector out(n_);
    apply(x, scale, part, out);
    return out;
}

// ---------------------------------------------------------------------------

double sampled_lipschitz(const SpectralModel& model, int n_pairs, std::uint64_t seed, double scale, double z) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uni(-scale, scale);
    const int n = model.n_total();
    double worst = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
        StateVector x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x(i) = uni(gen);
            y(i) = uni(gen);
        }
        // every few pairs probe close points as well
        if (p % 4 == 3) {
            y = x + 1e-3 * (y - x);
        }
        const double d = (x - y).norm();
        if (d == 0.0) {
            continue;
        }
        const double q = (eval_G(model, z, x) - eval_G(model, z, y)).norm() / d;
        worst = std::max(worst, q);
    }
    return worst;
}

SpectralModel model_from_json(const nlohmann::json& doc) {
    try {
        std::vector<SpectralBlock> blocks;
        for (const auto& e : doc.at("eigenvalues")) {
            SpectralBlock b;
            b.re = e.at("re").get<double>();
            b.im = e.value("im", 0.0);
            const std::string split = e.at("split").get<std::string>();
            if (split == "center") {
                b.split = Split::center;
            } else if (split == "stable") {
                b.split = Split::stable;
            } else {
                throw InvalidArgument("eigenvalue split must be 'center' or 'stable', got '" + split + "'");
            }
            blocks.push_back(b);
        }
        const double alpha = doc.at("alpha").get<double>();
        const double beta = doc.at("beta").get<double>();
        Nonlinearity nl = Nonlinearity::zero();
        if (doc.contains("nonlinearity")) {
            const auto& n = doc.at("nonlinearity");
            const std::string kind = n.value("kind", "coefficient_map");
            const std::string fn = n.value("fn_name", "zero");
            const double lip = n.value("lipschitz", builtin_function(fn).lipschitz);
            if (kind == "coefficient_map") {
                nl = Nonlinearity::ridge(fn, lip);
            } else if (kind == "pointwise_sine_basis") {
                int n_total = 0;
                for (const auto& b : blocks) {
                    n_total += b.size();
                }
                nl = Nonlinearity::pointwise(fn, lip, n.value("grid_size", (3 * n_total + 1) / 2));
            } else {
                throw InvalidArgument("unknown nonlinearity kind '" + kind + "'");
            }
        }
        return SpectralModel(std::move(blocks), alpha, beta, std::move(nl));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("model JSON: ") + e.what());
    }
}

nlohmann::json model_to_json(const SpectralModel& model) {
    nlohmann::json eig = nlohmann::json::array();
    for (const auto& b : model.blocks()) {
        eig.push_back({{"re", b.re}, {"im", b.im}, {"split", b.split == Split::center ? "center" : "stable"}});
    }
    const Nonlinearity& nl = model.nonlinearity();
    nlohmann::json n = {{"kind", nl.kind == Nonlinearity::Kind::coefficient_map ? "coefficient_map"
                                                                                 : "pointwise_sine_basis"},
                        {"fn_name", nl.fn_name},
                        {"lipschitz", nl.lipschitz}};
    if (nl.kind == Nonlinearity::Kind::pointwise_sine_basis) {
        n["grid_size"] = nl.grid_size;
    }
    return {{"eigenvalues", eig}, {"alpha", model.alpha()}, {"beta", model.beta()}, {"nonlinearity", n}};
}

SpectralModel two_mode_model(double beta, double lipschitz) {
    Nonlinearity nl = lipschitz == 0.0 ? Nonlinearity::zero()
                                       : Nonlinearity::ridge("scaled_sin:" + std::to_string(lipschitz), lipschitz);
    return SpectralModel({{0.0, 0.0, Split::center}, {-beta, 0.0, Split::stable}}, 0.0, beta, std::move(nl));
}

} // namespace stochmanifold
