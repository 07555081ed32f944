#include "stochmanifold/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "stochmanifold/error.hpp"

namespace stochmanifold {

C1Check check_c1(double lipschitz, double alpha, double beta, double eta) {
    if (!(eta > -beta && eta < -alpha)) {
        throw InvalidArgument("eta = " + std::to_string(eta) + " outside the admissible interval (" +
                              std::to_string(-beta) + ", " + std::to_string(-alpha) + ")");
    }
    const double factor = lipschitz * (1.0 / (eta + beta) - 1.0 / (alpha + eta));
    return {factor < 1.0, factor};
}

double default_eta(double alpha, double beta) noexcept {
    return -0.5 * (alpha + beta);
}

namespace {

const OUProcess& require_ou(const std::shared_ptr<const OUProcess>& ou) {
    if (!ou) {
        throw InvalidArgument("ManifoldMap needs an OU process");
    }
    return *ou;
}

void require_center_only(const SpectralModel& model, const StateVector& xi, const char* where) {
    model.check_conforms(xi, where);
    for (int i : model.stable_indices()) {
        if (xi(i) != 0.0) {
            throw InvalidArgument(std::string(where) + ": xi has a nonzero stable coefficient");
        }
    }
}

// e^{-eta t_i - (Z(t_i) - Z(0))} for t_i = (i - origin) h, i = 0..count-1, starting at OU index k_start.
Eigen::ArrayXd fiber_weights(const OUProcess& ou, std::int64_t k_start, int count, int origin, double eta) {
    Eigen::ArrayXd w(count);
    const double z0 = ou.Z(k_start + origin);
    const double h = ou.dt();
    for (int i = 0; i < count; ++i) {
        const double t = static_cast<double>(i - origin) * h;
        w(i) = std::exp(-eta * t - (ou.Z(k_start + i) - z0));
    }
    return w;
}

Eigen::MatrixXd eval_G_columns(const SpectralModel& model, const OUProcess& ou, std::int64_t k_start,
                               const Eigen::MatrixXd& v) {
    Eigen::MatrixXd g(v.rows(), v.cols());
    if (model.nonlinearity().is_zero) {
        g.setZero();
        return g;
    }
    for (Eigen::Index i = 0; i < v.cols(); ++i) {
        g.col(i) = eval_G(model, ou.z(k_start + i), v.col(i));
    }
    return g;
}

// Lyapunov-Perron map on raw columns.
Eigen::MatrixXd lp_core(const ManifoldMap& mm, const Eigen::MatrixXd& v, const StateVector& xi,
                        std::int64_t fiber_index) {
    const SpectralModel& model = mm.model();
    const OUProcess& ou = mm.ou();
    const int m = mm.history_steps();
    const double half_h = 0.5 * ou.dt();
    const std::int64_t k_start = fiber_index - m;
    const Eigen::MatrixXd g = eval_G_columns(model, ou, k_start, v);
    const Eigen::ArrayXd cmask = model.center_mask();
    const Eigen::ArrayXd smask = 1.0 - cmask;

    Eigen::MatrixXd out(v.rows(), v.cols());
    StateVector s = StateVector::Zero(v.rows());
    StateVector tmp(v.rows());
    out.col(0) = s;
    for (int i = 0; i < m; ++i) {
        tmp = s + half_h * g.col(i);
        mm.forward().apply(tmp, std::exp(ou.dZ(k_start + i)), Part::stable, s);
        s += half_h * (g.col(i + 1).array() * smask).matrix();
        out.col(i + 1) = s;
    }
    StateVector p = xi;
    out.col(m) += p;
    for (int i = m; i > 0; --i) {
        tmp = p - half_h * g.col(i);
        mm.backward().apply(tmp, std::exp(-ou.dZ(k_start + i - 1)), Part::center, p);
        p -= half_h * (g.col(i - 1).array() * cmask).matrix();
        out.col(i - 1) += p;
    }
    return out;
}

double weighted_max(const Eigen::MatrixXd& d, const Eigen::ArrayXd& w) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d.cols(); ++i) {
        worst = std::max(worst, w(i) * d.col(i).norm());
    }
    return worst;
}

void check_segment(const ManifoldMap& mm, const HistorySegment& seg) {
    if (seg.m != mm.history_steps() || seg.values.cols() != seg.m + 1 ||
        seg.values.rows() != mm.model().n_total() || std::fabs(seg.dt - mm.ou().dt()) > 1e-12 * seg.dt) {
        throw InvalidArgument("history segment grid does not match the manifold map");
    }
}

} // namespace

// ---------------------------------------------------------------------------

double history_length(const SpectralModel& model, const ManifoldOptions& options) {
    if (options.T_hist > 0.0) {
        return options.T_hist;
    }
    const double eta = std::isnan(options.eta) ? default_eta(model.alpha(), model.beta()) : options.eta;
    const C1Check c1 = check_c1(model.lipschitz(), model.alpha(), model.beta(), eta);
    const double gap = model.beta() + eta;
    const double lip = model.lipschitz();
    double T = 1.0;
    if (lip > 0.0) {
        const double contraction = std::max(1.0 - c1.factor, 0.1);
        const double need =
            std::log(10.0 * lip / (contraction * options.tol_fixed_point * gap)) / gap;
        T = std::max(T, need + 1.0);
    }
    return T;
}

ManifoldMap::ManifoldMap(SpectralModel model, std::shared_ptr<const OUProcess> ou, ManifoldOptions options)
    : model_(std::move(model)),
      ou_(std::move(ou)),
      options_(options),
      eta_(std::isnan(options.eta) ? default_eta(model_.alpha(), model_.beta()) : options.eta),
      c1_(check_c1(model_.lipschitz(), model_.alpha(), model_.beta(), eta_)),
      forward_(model_, require_ou(ou_).dt()),
      backward_(model_, -ou_->dt()) {
    if (options_.require_contraction && !c1_.satisfied) {
        throw InvalidArgument("contraction condition violated: L_F(1/(eta+beta) - 1/(alpha+eta)) = " +
                              std::to_string(c1_.factor) + " >= 1");
    }
    if (!(options_.tol_fixed_point > 0.0) || options_.max_iters < 1) {
        throw InvalidArgument("fixed-point tolerance must be positive and max_iters >= 1");
    }
    const double T = history_length(model_, options_);
    m_ = static_cast<int>(std::ceil(T / ou_->dt() - 1e-9));
    if (m_ < 1) {
        m_ = 1;
    }
}

double ManifoldMap::lipschitz_bound() const noexcept {
    return c1_.factor < 1.0 ? c1_.factor / (1.0 - c1_.factor) : std::numeric_limits<double>::infinity();
}

double ManifoldMap::first_fiber_time() const noexcept {
    return static_cast<double>(ou_->k_min() + m_) * ou_->dt();
}

std::int64_t ManifoldMap::fiber_index(double t) const {
    const std::int64_t k = grid_index(t, ou_->dt());
    if (k - m_ < ou_->k_min() || k > ou_->k_max()) {
        throw InvalidArgument("fiber at t = " + std::to_string(t) + " needs OU history back to " +
                              std::to_string(t - T_hist()) + ", available window is [" +
                              std::to_string(ou_->t_min()) + ", " + std::to_string(ou_->t_max()) + "]");
    }
    return k;
}

HistorySegment make_segment(const ManifoldMap& mm, std::int64_t fiber_index) {
    mm.fiber_index(static_cast<double>(fiber_index) * mm.ou().dt());
    HistorySegment seg;
    seg.ou = mm.ou_ptr();
    seg.fiber_index = fiber_index;
    seg.m = mm.history_steps();
    seg.dt = mm.ou().dt();
    seg.eta = mm.eta();
    seg.values = Eigen::MatrixXd::Zero(mm.model().n_total(), seg.m + 1);
    return seg;
}

HistorySegment linear_history(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index) {
    HistorySegment seg = make_segment(mm, fiber_index);
    const std::int64_t k_start = fiber_index - seg.m;
    StateVector p = project_c(mm.model(), xi);
    seg.values.col(seg.m) = p;
    for (int i = seg.m; i > 0; --i) {
        mm.backward().apply(p, std::exp(-mm.ou().dZ(k_start + i - 1)), Part::center, p);
        seg.values.col(i - 1) = p;
    }
    return seg;
}

double weighted_norm(const HistorySegment& seg) {
    if (!seg.ou || seg.values.cols() != seg.m + 1) {
        throw InvalidArgument("weighted_norm: malformed segment");
    }
    const double norm =
        weighted_max(seg.values, fiber_weights(*seg.ou, seg.fiber_index - seg.m, seg.m + 1, seg.m, seg.eta));
    if (std::isnan(norm)) {
        throw NumericalFailure("weighted_norm: NaN in segment", norm);
    }
    return norm;
}

double weighted_distance(const HistorySegment& a, const HistorySegment& b) {
    if (a.fiber_index != b.fiber_index || a.m != b.m || a.ou != b.ou || a.eta != b.eta ||
        a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
        throw InvalidArgument("weighted_distance: segments live on different grids");
    }
    return weighted_max(a.values - b.values, fiber_weights(*a.ou, a.fiber_index - a.m, a.m + 1, a.m, a.eta));
}

double tail_bound(const ManifoldMap& mm, double segment_norm) {
    const double gap = mm.model().beta() + mm.eta();
    return mm.model().lipschitz() * segment_norm * std::exp(-gap * mm.T_hist()) / gap;
}

HistorySegment lp_apply(const ManifoldMap& mm, const HistorySegment& seg, const StateVector& xi) {
    check_segment(mm, seg);
    require_center_only(mm.model(), xi, "lp_apply");
    const double norm = weighted_norm(seg);
    const double tail = tail_bound(mm, norm);
    if (!(tail < mm.tol() / 10.0 * std::max(1.0, norm))) {
        throw NumericalFailure("lp_apply: truncated history tail " + std::to_string(tail) +
                                   " exceeds tol/10; increase T_hist",
                               tail);
    }
    HistorySegment out = seg;
    out.values = lp_core(mm, seg.values, xi, seg.fiber_index);
    return out;
}

HistorySegment advance_segment(const HistorySegment& seg, int steps) {
    if (steps < 0 || steps > seg.m) {
        throw InvalidArgument("advance_segment: step count out of range");
    }
    HistorySegment out = seg;
    out.fiber_index += steps;
    const int keep = seg.m + 1 - steps;
    out.values.leftCols(keep) = seg.values.rightCols(keep);
    for (int i = keep; i <= seg.m; ++i) {
        out.values.col(i) = seg.values.col(seg.m);
    }
    return out;
}

FixedPointResult solve_fixed_point(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index,
                                   const HistorySegment* warm) {
    require_center_only(mm.model(), xi, "solve_fixed_point");
    FixedPointResult res;
    if (warm != nullptr && warm->fiber_index == fiber_index && warm->ou == mm.ou_ptr() &&
        warm->m == mm.history_steps() && warm->eta == mm.eta()) {
        res.segment = *warm;
        res.segment.values.col(res.segment.m) = xi + project_s(mm.model(), warm->values.col(warm->m));
    } else {
        res.segment = linear_history(mm, xi, fiber_index);
    }
    const OUProcess& ou = mm.ou();
    const Eigen::ArrayXd w = fiber_weights(ou, fiber_index - res.segment.m, res.segment.m + 1, res.segment.m,
                                           mm.eta());
    double previous = 0.0;
    for (;;) {
        Eigen::MatrixXd next = lp_core(mm, res.segment.values, xi, fiber_index);
        const double update = weighted_max(next - res.segment.values, w);
        if (!std::isfinite(update)) {
            throw NumericalFailure("solve_fixed_point: iteration diverged", update);
        }
        res.segment.values = std::move(next);
        ++res.iterations;
        res.last_ratio = previous > 0.0 ? update / previous : 0.0;
        res.last_update = update;
        previous = update;
        if (update < mm.tol() * std::max(1.0, weighted_max(res.segment.values, w))) {
            break;
        }
        if (res.iterations >= mm.max_iters()) {
            throw NumericalFailure("solve_fixed_point: no convergence in " + std::to_string(res.iterations) +
                                       " iterations, last contraction ratio " + std::to_string(res.last_ratio),
                                   res.last_ratio);
        }
    }
    const double norm = weighted_max(res.segment.values, w);
    res.tail_bound = tail_bound(mm, norm);
    if (!(res.tail_bound < mm.tol() / 10.0 * std::max(1.0, norm))) {
        throw NumericalFailure("solve_fixed_point: truncated history tail " + std::to_string(res.tail_bound) +
                                   " exceeds tol/10; increase T_hist",
                               res.tail_bound);
    }
    return res;
}

FixedPointResult solve_fixed_point(const ManifoldMap& mm, const StateVector& xi, double fiber_time) {
    return solve_fixed_point(mm, xi, mm.fiber_index(fiber_time));
}

HsResult hs_eval(const ManifoldMap& mm, const StateVector& xi, std::int64_t fiber_index,
                 const HistorySegment* warm) {
    mm.fiber_index(static_cast<double>(fiber_index) * mm.ou().dt());
    HsResult res;
    res.fixed_point = solve_fixed_point(mm, xi, fiber_index, warm);
    const HistorySegment& seg = res.fixed_point.segment;
    res.value = project_s(mm.model(), seg.values.col(seg.m));

    if (!mm.model().nonlinearity().is_zero) {
        // history-integral form: int_{-T}^0 e^{-A_s t - (Z(t) - Z(0))} g_s(v*(t)) dt
        const OUProcess& ou = mm.ou();
        const std::int64_t k_start = fiber_index - seg.m;
        const double h = ou.dt();
        const double z0 = ou.Z(fiber_index);
        StateVector direct = StateVector::Zero(res.value.size());
        for (int i = 0; i <= seg.m; ++i) {
            const double weight = (i == 0 || i == seg.m) ? 0.5 * h : h;
            const StateVector g = eval_G(mm.model(), ou.z(k_start + i), seg.values.col(i));
            direct += weight * std::exp(-(ou.Z(k_start + i) - z0)) *
                      semigroup_apply(mm.model(), Part::stable, static_cast<double>(seg.m - i) * h, g);
        }
        res.form_gap = (direct - res.value).norm();
        if (!(res.form_gap < 10.0 * mm.tol() * std::max(1.0, seg.values.col(seg.m).norm()))) {
            throw NumericalFailure("hs: fixed point and history-integral forms differ by " +
                                       std::to_string(res.form_gap),
                                   res.form_gap);
        }
    }
    return res;
}

StateVector hs(const ManifoldMap& mm, const StateVector& xi, double fiber_time) {
    return hs_eval(mm, xi, mm.fiber_index(fiber_time)).value;
}

HsResult ManifoldCursor::eval(const StateVector& xi, std::int64_t fiber_index, bool cold) {
    std::optional<HistorySegment> guess;
    if (!cold && last_) {
        const auto steps = fiber_index - last_->fiber_index;
        if (steps >= 0 && steps <= last_->m) {
            guess = steps == 0 ? *last_ : advance_segment(*last_, static_cast<int>(steps));
        }
    }
    HsResult r = hs_eval(mm_, xi, fiber_index, guess ? &*guess : nullptr);
    max_iterations_ = std::max(max_iterations_, r.fixed_point.iterations);
    last_ = r.fixed_point.segment;
    return r;
}

BackwardResult backward_solve(const ManifoldMap& mm, const StateVector& xi_final, double T_f, double fiber_time) {
    const SpectralModel& model = mm.model();
    require_center_only(model, xi_final, "backward_solve");
    const OUProcess& ou = mm.ou();
    const double h = ou.dt();
    const std::int64_t k0 = mm.fiber_index(fiber_time);
    const std::int64_t steps = grid_index(T_f, h);
    if (steps < 1) {
        throw InvalidArgument("backward_solve: T_f must be a positive grid multiple");
    }
    if (!ou.contains(k0 + steps)) {
        throw InvalidArgument("backward_solve: [t, t + T_f] leaves the OU window");
    }
    const int n = static_cast<int>(steps);
    const double half_h = 0.5 * h;
    const Eigen::ArrayXd cmask = model.center_mask();
    const Eigen::ArrayXd smask = 1.0 - cmask;
    const Eigen::ArrayXd w = fiber_weights(ou, k0, n + 1, 0, mm.eta());

    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(model.n_total(), n + 1);
    StateVector p = xi_final;
    v.col(n) = p;
    for (int j = n; j > 0; --j) {
        mm.backward().apply(p, std::exp(-ou.dZ(k0 + j - 1)), Part::center, p);
        v.col(j - 1) = p;
    }

    BackwardResult res;
    std::optional<HistorySegment> warm;
    StateVector tmp(model.n_total());
    for (;;) {
        const Eigen::MatrixXd g = eval_G_columns(model, ou, k0, v);
        Eigen::MatrixXd next(v.rows(), v.cols());
        p = xi_final;
        next.col(n) = p;
        for (int j = n; j > 0; --j) {
            tmp = p - half_h * g.col(j);
            mm.backward().apply(tmp, std::exp(-ou.dZ(k0 + j - 1)), Part::center, p);
            p -= half_h * (g.col(j - 1).array() * cmask).matrix();
            next.col(j - 1) = p;
        }
        HsResult base = hs_eval(mm, StateVector(next.col(0)), k0, warm ? &*warm : nullptr);
        warm = std::move(base.fixed_point.segment);
        StateVector s = base.value;
        next.col(0) += s;
        for (int j = 0; j < n; ++j) {
            tmp = s + half_h * g.col(j);
            mm.forward().apply(tmp, std::exp(ou.dZ(k0 + j)), Part::stable, s);
            s += half_h * (g.col(j + 1).array() * smask).matrix();
            next.col(j + 1) += s;
        }
        const double update = weighted_max(next - v, w);
        if (!std::isfinite(update)) {
            throw NumericalFailure("backward_solve: iteration diverged", update);
        }
        v = std::move(next);
        ++res.iterations;
        res.residual = update;
        if (update < mm.tol() * std::max(1.0, weighted_max(v, w))) {
            break;
        }
        if (res.iterations >= mm.max_iters()) {
            throw NumericalFailure("backward_solve: no convergence, residual " + std::to_string(update), update);
        }
    }
    res.trajectory.t0 = static_cast<double>(k0) * h;
    res.trajectory.dt = h;
    res.trajectory.seed = ou.seed();
    res.trajectory.generator_id = ou.generator_id();
    res.trajectory.scheme_id = "lyapunov-perron-backward";
    res.trajectory.states.reserve(static_cast<std::size_t>(n + 1));
    for (int j = 0; j <= n; ++j) {
        res.trajectory.states.emplace_back(v.col(j));
    }
    return res;
}

} // namespace stochmanifold
