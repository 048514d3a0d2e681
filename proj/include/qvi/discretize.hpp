#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "qvi/functions.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"
#include "qvi/matrixkit.hpp"

namespace qvi {

/// Generator L of the uncontrolled state (upwind scheme, Neumann closure) and
/// the running payoff with the boundary contributions folded in, so that the
/// continuation equation reads L v + f_adj = 0.
struct DiscreteOperators {
    Tridiagonal L;
    Vector f_adj;
    double lbc = 0.0;
    double rbc = 0.0;

    Matrix dense_L() const { return L.dense(); }
    std::size_t size() const { return static_cast<std::size_t>(f_adj.size()); }
};

/// Which maximizer of the loss operator is reported when several tie.
enum class ArgmaxPolicy { Largest, Smallest };

/// Discrete strategy: intervention indicator and per-node impulse.
struct Strategy {
    Region region;
    ImpulseVector impulse;
};

inline DiscreteOperators build_generator(const Dynamics& dyn, double rho, const Function& payoff, const Grid& grid,
                                         double lbc, double rbc) {
    if (!(rho > 0.0)) throw invalid_input("build_generator: rho must be positive");
    const int n = static_cast<int>(grid.size());
    const double h = grid.step();
    DiscreteOperators ops;
    ops.L = Tridiagonal(n);
    ops.f_adj = Vector(n);
    ops.lbc = lbc;
    ops.rbc = rbc;
    for (int p = 0; p < n; ++p) {
        const double x = grid.x(p);
        const double sig = dyn.sigma(x);
        const double mu = dyn.mu(x);
        const double diff = 0.5 * sig * sig / (h * h);
        double lower = diff, upper = diff;
        if (mu >= 0.0) upper += mu / h;
        else lower += -mu / h;
        double diag = -(lower + upper) - rho;
        double f = payoff(x);
        // Ghost nodes x_{-N} - h and x_N + h eliminated through the Neumann
        // conditions V(x_{-N} - h) = V(x_{-N}) - lbc h, V(x_N + h) = V(x_N) + rbc h.
        if (p == 0) {
            diag += lower;
            f -= lower * lbc * h;
            lower = 0.0;
        }
        if (p == n - 1) {
            diag += upper;
            f += upper * rbc * h;
            upper = 0.0;
        }
        ops.L.lower[p] = lower;
        ops.L.diag[p] = diag;
        ops.L.upper[p] = upper;
        ops.f_adj[p] = f;
    }
    return ops;
}

inline DiscreteOperators build_generator(const GameSpec& spec, const Grid& grid) {
    return build_generator(spec.dynamics, spec.player.rho, spec.player.payoff, grid, spec.lbc(), spec.rbc());
}

inline DiscreteOperators build_generator(const TwoPlayerSpec& spec, int player, const Grid& grid) {
    const auto& p = spec.players[player];
    return build_generator(spec.dynamics, p.rho, p.payoff, grid, spec.lbc(player), spec.rbc(player));
}

inline void check_admissible(const ImpulseSets& sets, const ImpulseVector& delta) {
    if (delta.size() != sets.size()) throw invalid_input("impulse vector has the wrong size");
    for (std::size_t p = 0; p < delta.size(); ++p)
        if (!sets.admissible(static_cast<int>(p), delta[p]))
            throw invalid_input("inadmissible impulse at node position " + std::to_string(p));
}

/// B(delta): row p has a single 1 at the column of x_p + delta(x_p), clamped to
/// the grid.
inline Matrix impulse_matrix(const Grid& grid, const ImpulseSets& sets, const ImpulseVector& delta) {
    check_admissible(sets, delta);
    const int n = static_cast<int>(grid.size());
    Matrix b = Matrix::Zero(n, n);
    for (int p = 0; p < n; ++p) b(p, std::clamp(p + delta[p], 0, n - 1)) = 1.0;
    return b;
}

/// Cost of every offset in [-span, span], indexed by offset + span.
class CostTable {
public:
    CostTable(const CostSpec& cost, double step, int span) : span_(span), values_(2 * span + 1) {
        for (int k = -span; k <= span; ++k) values_[k + span] = cost(0.0, k * step);
    }
    double operator()(int offset) const { return values_[offset + span_]; }

private:
    int span_;
    std::vector<double> values_;
};

struct LossResult {
    Vector value;
    ImpulseVector delta;
};

/// M v(x) = max_{d in Z(x)} { v(x + d) - c(x, d) } and its maximizer. Ties are
/// resolved by exact comparison in ascending order of d: keep-last for the
/// largest maximizer, keep-first for the smallest.
inline LossResult apply_M(const Vector& v, const Grid& grid, const ImpulseSets& sets, const CostSpec& cost,
                          ArgmaxPolicy policy = ArgmaxPolicy::Largest) {
    const int n = static_cast<int>(grid.size());
    const CostTable table(cost, grid.step(), sets.max_span());
    LossResult out{Vector(n), ImpulseVector(n, 0)};
    for (int p = 0; p < n; ++p) {
        const auto r = sets.range(p);
        double best = -std::numeric_limits<double>::infinity();
        int arg = r.lo;
        for (int k = r.lo; k <= r.hi; ++k) {
            const double val = v[std::clamp(p + k, 0, n - 1)] - table(k);
            if (policy == ArgmaxPolicy::Largest ? val >= best : val > best) {
                best = val;
                arg = k;
            }
        }
        out.value[p] = best;
        out.delta[p] = arg;
    }
    return out;
}

/// Gain operator for a mover whose opponent applies `opponent_delta`:
/// v(x + d_opp(x)) + g(x, d_opp(x)).
inline Vector apply_gain(const Vector& v, const ImpulseVector& opponent_delta, const Grid& grid, const GainSpec& gain) {
    const int n = static_cast<int>(grid.size());
    Vector out(n);
    for (int p = 0; p < n; ++p) {
        const int k = opponent_delta[p];
        out[p] = v[std::clamp(p + k, 0, n - 1)] + gain(grid.x(p), k * grid.step());
    }
    return out;
}

/// Opponent's impulse in a symmetric game: d_opp(x) = -d(-x).
inline ImpulseVector mirror_impulse(const ImpulseVector& delta) {
    ImpulseVector out(delta.size());
    const std::size_t n = delta.size();
    for (std::size_t p = 0; p < n; ++p) out[p] = -delta[n - 1 - p];
    return out;
}

/// Symmetric-game gain operator H v(x) = v(x - d(-x)) + g(x, d(-x)), i.e.
/// S B(d) S v + g(S d).
inline Vector apply_H(const Vector& v, const ImpulseVector& delta, const Grid& grid, const GainSpec& gain) {
    return apply_gain(v, mirror_impulse(delta), grid, gain);
}

/// Follows x -> x + d(x) from `start` while inside `region`; returns the number
/// of impulses before leaving it, or -1 if the walk revisits a node.
inline int intervention_chain_length(const Region& region, const ImpulseVector& delta, int start) {
    const int n = static_cast<int>(region.size());
    std::vector<bool> seen(n, false);
    int p = start, steps = 0;
    while (region[p]) {
        if (seen[p]) return -1;
        seen[p] = true;
        p = std::clamp(p + delta[p], 0, n - 1);
        ++steps;
    }
    return steps;
}

}  // namespace qvi
