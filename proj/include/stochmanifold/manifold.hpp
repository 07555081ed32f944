#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>

#include "stochmanifold/flow.hpp"
#include "stochmanifold/model.hpp"
#include "stochmanifold/noise.hpp"

namespace stochmanifold {

struct C1Check {
    bool satisfied = false;
    double factor = 0.0;
};

// factor = L_F (1/(eta + beta) - 1/(alpha + eta)); requires -beta < eta < -alpha.
C1Check check_c1(double lipschitz, double alpha, double beta, double eta);

// -(alpha + beta) / 2
double default_eta(double alpha, double beta) noexcept;

struct ManifoldOptions {
    double eta = std::numeric_limits<double>::quiet_NaN();  // NaN: default_eta
    double tol_fixed_point = 1e-8;
    int max_iters = 200;
    double T_hist = 0.0;  // 0: chosen from the tail bound
    bool require_contraction = true;
};

/// Discretised history on the grid t_i = -T_hist + i*dt, i = 0..m, of the
/// fiber whose time origin sits at OU index `fiber_index`. Column i of
/// `values` is the state at t_i.
struct HistorySegment {
    std::shared_ptr<const OUProcess> ou;
    std::int64_t fiber_index = 0;
    int m = 0;
    double dt = 0.0;
    double eta = 0.0;
    Eigen::MatrixXd values;

    double time(int i) const noexcept { return static_cast<double>(i - m) * dt; }
    StateVector at_origin() const { return values.col(m); }
};

// History length the tail bound asks for (grid alignment not applied).
double history_length(const SpectralModel& model, const ManifoldOptions& options);

class ManifoldMap {
public:
    ManifoldMap(SpectralModel model, std::shared_ptr<const OUProcess> ou, ManifoldOptions options = {});

    const SpectralModel& model() const noexcept { return model_; }
    const OUProcess& ou() const noexcept { return *ou_; }
    const std::shared_ptr<const OUProcess>& ou_ptr() const noexcept { return ou_; }
    double eta() const noexcept { return eta_; }
    double T_hist() const noexcept { return static_cast<double>(m_) * ou_->dt(); }
    int history_steps() const noexcept { return m_; }
    double tol() const noexcept { return options_.tol_fixed_point; }
    int max_iters() const noexcept { return options_.max_iters; }
    const ManifoldOptions& options() const noexcept { return options_; }
    const C1Check& contraction() const noexcept { return c1_; }

    // Bound on |h^s(xi) - h^s(xi')| / |xi - xi'| from the contraction bookkeeping: factor / (1 - factor).
    double lipschitz_bound() const noexcept;

    // Earliest and latest fiber times whose history fits in the OU window.
    double first_fiber_time() const noexcept;
    double last_fiber_time() const noexcept { return ou_->t_max(); }
    std::int64_t fiber_index(double t) const;

    const BlockPropagator& forward() const noexcept { return forward_; }
    const BlockPropagator& backward() const noexcept { return backward_; }

private:
    SpectralModel model_;
    std::shared_ptr<const OUProcess> ou_;
    ManifoldOptions options_;
    double eta_;
    int m_ = 0;
    C1Check c1_;
    BlockPropagator forward_;   // e^{hA}
    BlockPropagator backward_;  // e^{-hA}
};

HistorySegment make_segment(const ManifoldMap& mm, std::int64_t fiber_index);

// e^{A_c t + Z(t)} xi on the history grid.
HistorySegment linear_history(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index);

// max_i e^{-eta t_i - (Z(t_i) - Z(0))} |v(t_i)|, with Z relative to the fiber.
double weighted_norm(const HistorySegment& seg);

// Weighted norm of a - b without forming the difference segment.
double weighted_distance(const HistorySegment& a, const HistorySegment& b);

// L_F |v| e^{-(beta + eta) T_hist} / (beta + eta): size of the dropped stable tail at t = 0.
// Tolerances (tail, fixed-point updates) are applied relative to max(1, |v|).
double tail_bound(const ManifoldMap& mm, double segment_norm);

/// One application of the Lyapunov-Perron operator with exponential
/// trapezoid quadrature. Throws when the dropped stable tail exceeds tol/10.
HistorySegment lp_apply(const ManifoldMap& mm, const HistorySegment& seg, const StateVector& xi);

// Warm start for the fiber `steps` grid points later: drops the oldest columns, repeats the newest.
HistorySegment advance_segment(const HistorySegment& seg, int steps);

struct FixedPointResult {
    HistorySegment segment;
    int iterations = 0;
    double last_update = 0.0;
    double last_ratio = 0.0;
    double tail_bound = 0.0;
};

FixedPointResult solve_fixed_point(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index,
                                   const HistorySegment* warm = nullptr);
FixedPointResult solve_fixed_point(const ManifoldMap& mm, const StateVector& xi, double fiber_time = 0.0);

struct HsResult {
    StateVector value;  // stable-only
    FixedPointResult fixed_point;
    double form_gap = 0.0;  // |recursion - history integral|
};

HsResult hs_eval(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index,
                 const HistorySegment* warm = nullptr);

// Stable coordinate of the manifold over xi in the fiber theta_t w.
StateVector hs(const ManifoldMap& mm, const StateVector& xi, double fiber_time = 0.0);

/// Evaluates h^s along a run of nearby fibers, warm-starting each fixed point
/// from the previous one.
class ManifoldCursor {
public:
    explicit ManifoldCursor(const ManifoldMap& mm) : mm_(mm) {}

    HsResult eval(const StateVector& xi, std::int64_t fiber_index, bool cold = false);
    int max_iterations() const noexcept { return max_iterations_; }

private:
    const ManifoldMap& mm_;
    std::optional<HistorySegment> last_;
    int max_iterations_ = 0;
};

struct BackwardResult {
    Trajectory trajectory;  // on [fiber_time, fiber_time + T_f]
    int iterations = 0;
    double residual = 0.0;
};

/// Two-point problem: center part pinned to xi at T_f, stable part starting on
/// the manifold at 0. Picard iteration in the weighted norm of the fiber.
BackwardResult backward_solve(const ManifoldMap& mm, const StateVector& xi_final, double T_f,
                              double fiber_time = 0.0);

} // namespace stochmanifold
