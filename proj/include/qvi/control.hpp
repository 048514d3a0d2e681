#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qvi/discretize.hpp"
#include "qvi/error.hpp"
#include "qvi/grid.hpp"
#include "qvi/matrixkit.hpp"

namespace qvi {

/// Impulse-control problem on a sub-domain D with frozen values w off D:
///
///   max{ L~ v + f~, M~ v - v } = 0 on D,   v = w on D^c,
///
/// where L~ = L_DD, f~ = f_D + L_{DD^c} w_{D^c} and M~ evaluates the loss
/// operator on the full vector (v on D, w elsewhere). Vectors indexed by D use
/// the ascending order of D ("local" order); L~ stays tridiagonal in it.
class RestrictedQVI {
public:
    RestrictedQVI(const DiscreteOperators& ops, const Grid& grid, const ImpulseSets& sets, const CostSpec& cost,
                  const Vector& w, const Region& domain, ArgmaxPolicy policy)
        : grid_(grid), sets_(sets), cost_(cost), policy_(policy), w_(w) {
        const int n = static_cast<int>(grid.size());
        if (w.size() != n || static_cast<int>(domain.size()) != n || static_cast<int>(ops.size()) != n)
            throw invalid_input("restrict: size mismatch between grid, operators, w and D");
        const bool symmetric = sets.mode() != ImpulseMode::AllTargets;
        local_of_.assign(n, -1);
        for (int p = 0; p < n; ++p) {
            if (!domain[p]) {
                if (symmetric && grid.index(p) <= 0)
                    throw invalid_input("restrict: D must contain every nonpositive node (missing x = " +
                                        std::to_string(grid.x(p)) + ")");
                continue;
            }
            local_of_[p] = static_cast<int>(nodes_.size());
            nodes_.push_back(p);
        }
        const int m = static_cast<int>(nodes_.size());
        L_ = Tridiagonal(m);
        f_ = Vector(m);
        allowed_.assign(m, false);
        for (int j = 0; j < m; ++j) {
            const int p = nodes_[j];
            double f = ops.f_adj[p];
            L_.diag[j] = ops.L.diag[p];
            if (p > 0) {
                if (local_of_[p - 1] >= 0) L_.lower[j] = ops.L.lower[p];
                else f += ops.L.lower[p] * w[p - 1];
            }
            if (p + 1 < n) {
                if (local_of_[p + 1] >= 0) L_.upper[j] = ops.L.upper[p];
                else f += ops.L.upper[p] * w[p + 1];
            }
            f_[j] = f;
            const auto r = sets.range(p);
            allowed_[j] = r.hi > r.lo;
        }
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<int>& nodes() const { return nodes_; }
    /// Local index of grid position p, or -1 when p is outside D.
    int local_of(int p) const { return local_of_[p]; }
    const Tridiagonal& L() const { return L_; }
    const Vector& f() const { return f_; }
    const Vector& w() const { return w_; }
    const Grid& grid() const { return grid_; }
    const ImpulseSets& sets() const { return sets_; }
    const CostSpec& cost() const { return cost_; }
    ArgmaxPolicy policy() const { return policy_; }
    /// Nodes of D where a nonzero impulse is admissible.
    const Region& allowed() const { return allowed_; }

    Vector restrict_vector(const Vector& full) const {
        Vector out(size());
        for (int j = 0; j < size(); ++j) out[j] = full[nodes_[j]];
        return out;
    }

    /// Full-grid vector equal to v on D and to w elsewhere.
    Vector extend(const Vector& v) const {
        Vector full = w_;
        for (int j = 0; j < size(); ++j) full[nodes_[j]] = v[j];
        return full;
    }

    /// M~ v and its maximizers (grid offsets), in local order.
    LossResult loss(const Vector& v) const {
        const LossResult full = apply_M(extend(v), grid_, sets_, cost_, policy_);
        LossResult out{Vector(size()), ImpulseVector(size())};
        for (int j = 0; j < size(); ++j) {
            out.value[j] = full.value[nodes_[j]];
            out.delta[j] = full.delta[nodes_[j]];
        }
        return out;
    }

    /// B~(d) = B(d)_DD for local impulses d.
    Matrix B(const ImpulseVector& delta) const {
        const int m = size(), n = static_cast<int>(grid_.size());
        Matrix b = Matrix::Zero(m, m);
        for (int j = 0; j < m; ++j) {
            const int t = local_of_[std::clamp(nodes_[j] + delta[j], 0, n - 1)];
            if (t >= 0) b(j, t) = 1.0;
        }
        return b;
    }

    /// c~(d) = c(d) - B(d)_{DD^c} w_{D^c} for local impulses d.
    Vector c(const ImpulseVector& delta) const {
        const int m = size(), n = static_cast<int>(grid_.size());
        const CostTable table(cost_, grid_.step(), sets_.max_span());
        Vector out(m);
        for (int j = 0; j < m; ++j) {
            const int target = std::clamp(nodes_[j] + delta[j], 0, n - 1);
            out[j] = table(delta[j]) - (local_of_[target] >= 0 ? 0.0 : w_[target]);
        }
        return out;
    }

    /// Pointwise |max{L~ v + f~, lambda (M~ v - v)}|.
    Vector residual(const Vector& v, double lambda = 1.0) const {
        const Vector cont = L_.multiply(v) + f_;
        const Vector loss_v = loss(v).value;
        Vector out(size());
        for (int j = 0; j < size(); ++j) out[j] = std::abs(std::max(cont[j], lambda * (loss_v[j] - v[j])));
        return out;
    }

private:
    Grid grid_;
    ImpulseSets sets_;
    CostSpec cost_;
    ArgmaxPolicy policy_;
    Vector w_;
    std::vector<int> nodes_;
    std::vector<int> local_of_;
    Tridiagonal L_;
    Vector f_;
    Region allowed_;
};

inline RestrictedQVI restrict(const DiscreteOperators& ops, const Grid& grid, const ImpulseSets& sets,
                              const CostSpec& cost, const Vector& w, const Region& domain,
                              ArgmaxPolicy policy = ArgmaxPolicy::Largest) {
    return RestrictedQVI(ops, grid, sets, cost, w, domain, policy);
}

enum class ControlEngine { Fppi, Howard };

struct ControlOptions {
    ControlEngine engine = ControlEngine::Fppi;
    double lambda = 1.0;
    double tol = 1e-15;
    double scale = 1.0;
    int max_iters = 10000;
    /// Start from the region induced by w_D instead of the empty one.
    bool warm_start = false;
    /// Iterations without a new smallest Diff before giving up.
    int stagnation_window = 50;
    /// Check policy matrices for the WCDD L0 property (slow).
    bool check_matrices = false;
};

struct ControlSolution {
    /// Full grid: solved on D, frozen w on D^c.
    Vector payoff;
    Region region;
    /// delta*(payoff) on the full grid.
    ImpulseVector impulse;
    int iterations = 0;
    bool exact = false;
    bool stagnated = false;
    double last_diff = 0.0;
    /// Smallest entry of v^{k+1} - v^k over k >= 1 (FPPI only; +inf if none).
    double min_increment = std::numeric_limits<double>::infinity();
};

/// ||(a - b) / max(|a|, scale)||_inf.
inline double relative_change(const Vector& a, const Vector& b, double scale) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), scale));
    return d;
}

namespace detail {

inline Region induced_region(const RestrictedQVI& rq, const Vector& v, const Vector& loss_v, double lambda) {
    const Vector cont = rq.L().multiply(v) + rq.f();
    Region r(rq.size(), false);
    for (int j = 0; j < rq.size(); ++j) r[j] = rq.allowed()[j] && cont[j] <= lambda * (loss_v[j] - v[j]);
    return r;
}

inline ControlSolution finish(const RestrictedQVI& rq, const Vector& v, const Region& local_region) {
    ControlSolution sol;
    sol.payoff = rq.extend(v);
    sol.region.assign(rq.grid().size(), false);
    for (int j = 0; j < rq.size(); ++j) sol.region[rq.nodes()[j]] = local_region[j];
    sol.impulse = apply_M(sol.payoff, rq.grid(), rq.sets(), rq.cost(), rq.policy()).delta;
    return sol;
}

inline void check_policy_matrix(const Matrix& a) {
    if (!is_l0_matrix(a) || !classify_dominance(a).wcdd)
        throw error("control: policy matrix is not a WCDD L0-matrix");
}

}  // namespace detail

/// Fixed-point policy iteration: pinned rows v = M~ v^k on I^k, L~ rows
/// elsewhere, so every step is a single tridiagonal solve.
inline ControlSolution solve_fppi(const RestrictedQVI& rq, const ControlOptions& opt = {}) {
    if (!(opt.lambda > 0.0)) throw invalid_input("solve_fppi: lambda must be positive");
    const int m = rq.size();
    Vector v = rq.restrict_vector(rq.w());
    LossResult loss_v = rq.loss(v);
    Region region = opt.warm_start ? detail::induced_region(rq, v, loss_v.value, opt.lambda) : Region(m, false);

    double best_diff = std::numeric_limits<double>::infinity();
    Vector best_v = v;
    Region best_region = region;
    int since_best = 0;
    double min_inc = std::numeric_limits<double>::infinity();
    double diff = std::numeric_limits<double>::infinity();

    for (int k = 0; k < opt.max_iters; ++k) {
        Tridiagonal sys = rq.L();
        Vector rhs = -rq.f();
        for (int j = 0; j < m; ++j) {
            if (!region[j]) continue;
            sys.lower[j] = 0.0;
            sys.upper[j] = 0.0;
            sys.diag[j] = 1.0;
            rhs[j] = loss_v.value[j];
        }
        if (opt.check_matrices) detail::check_policy_matrix(-sys.dense());
        const Vector next = solve_tridiagonal(sys, rhs);
        if (!next.allFinite()) throw singular_matrix("solve_fppi: non-finite iterate");
        if (k >= 1) min_inc = std::min(min_inc, (next - v).minCoeff());

        diff = relative_change(next, v, opt.scale);
        const bool same = (next.array() == v.array()).all();
        v = next;
        loss_v = rq.loss(v);
        region = detail::induced_region(rq, v, loss_v.value, opt.lambda);

        if ((k >= 1 && diff < opt.tol) || same) {
            ControlSolution sol = detail::finish(rq, v, region);
            sol.iterations = k + 1;
            sol.exact = same;
            sol.last_diff = diff;
            sol.min_increment = min_inc;
            return sol;
        }
        if (diff < best_diff) {
            best_diff = diff;
            best_v = v;
            best_region = region;
            since_best = 0;
        } else if (++since_best >= opt.stagnation_window) {
            ControlSolution sol = detail::finish(rq, best_v, best_region);
            sol.iterations = k + 1;
            sol.stagnated = true;
            sol.last_diff = best_diff;
            sol.min_increment = min_inc;
            return sol;
        }
    }
    throw not_converged("solve_fppi: iteration limit reached", diff);
}

/// Howard policy iteration on max_phi{-A(phi) v + b(phi)} = 0 with
/// A(phi) = -(Id - Psi) L~ + lambda Psi (Id - B~(d)), b(phi) = (Id - Psi) f~ - lambda Psi c~(d).
/// Ties in the policy update favour intervention.
inline ControlSolution solve_howard(const RestrictedQVI& rq, const ControlOptions& opt = {}) {
    if (!(opt.lambda > 0.0)) throw invalid_input("solve_howard: lambda must be positive");
    const int m = rq.size();
    const double lam = opt.lambda;
    Vector v = rq.restrict_vector(rq.w());
    LossResult loss_v = rq.loss(v);
    // Start from the never-intervene policy, which is always nonsingular.
    Region region(m, false);
    ImpulseVector delta = loss_v.delta;
    const Matrix L = rq.L().dense();
    double diff = std::numeric_limits<double>::infinity();

    for (int k = 0; k < opt.max_iters; ++k) {
        Matrix a = -L;
        Vector b = rq.f();
        const Matrix bmat = rq.B(delta);
        const Vector cvec = rq.c(delta);
        for (int j = 0; j < m; ++j) {
            if (!region[j]) continue;
            a.row(j) = -lam * bmat.row(j);
            a(j, j) += lam;
            b[j] = -lam * cvec[j];
        }
        if (opt.check_matrices) detail::check_policy_matrix(a);
        const Vector next = solve_linear(a, b);
        diff = relative_change(next, v, opt.scale);
        v = next;
        loss_v = rq.loss(v);
        Region new_region = detail::induced_region(rq, v, loss_v.value, lam);
        // A null impulse only pays the fixed cost and would make A(phi) singular.
        for (int j = 0; j < m; ++j)
            if (loss_v.delta[j] == 0) new_region[j] = false;
        // Impulses only matter inside the region; outside they are kept fixed
        // so that policy equality reflects the Bellman policy.
        ImpulseVector new_delta = delta;
        for (int j = 0; j < m; ++j)
            if (new_region[j]) new_delta[j] = loss_v.delta[j];
        if (new_region == region && new_delta == delta) {
            ControlSolution sol = detail::finish(rq, v, region);
            sol.iterations = k + 1;
            sol.exact = true;
            sol.last_diff = diff;
            return sol;
        }
        region = new_region;
        delta = new_delta;
    }
    throw not_converged("solve_howard: iteration limit reached", diff);
}

inline ControlSolution solve_control(const RestrictedQVI& rq, const ControlOptions& opt = {}) {
    return opt.engine == ControlEngine::Howard ? solve_howard(rq, opt) : solve_fppi(rq, opt);
}

}  // namespace qvi
