#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "qvi/control.hpp"
#include "qvi/discretize.hpp"
#include "qvi/error.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"

namespace qvi {

/// Options of the relaxation algorithm for general two-player games. The
/// argmax tie-break is always the smallest maximizer.
struct GenSolveOptions {
    double tol = 1e-8;
    /// Relaxation decay, in (0, 1).
    double alpha = 0.8;
    /// Initial relaxation radius.
    double r0 = 1.0;
    int max_iters = 1000;
    ControlOptions control;
    std::function<void(int, double)> on_iterate;
};

struct GenSolveReport {
    std::array<Vector, 2> payoffs;
    /// Regions {M_i v_i - v_i >= -r} at the last relaxation radius used.
    std::array<Region, 2> regions;
    /// Regions {M_i v_i - v_i >= -tol}; these define the equilibrium strategies.
    std::array<Region, 2> tol_regions;
    std::array<ImpulseVector, 2> impulses;
    int iterations = 0;
    std::vector<double> r_history;
    std::vector<double> residual_history;
    double R_infinity = std::numeric_limits<double>::infinity();
    Vector residual_by_node;
    bool converged = false;
    /// Whether R^{k+1} > R^k happened at some iteration.
    bool residual_increased = false;
};

/// Per-player discrete data of a two-player game on a common grid.
class GeneralGame {
public:
    GeneralGame(const TwoPlayerSpec& spec, const Grid& grid)
        : spec_(spec), grid_(grid), sets_(grid, ImpulseMode::AllTargets),
          ops_{build_generator(spec, 0, grid), build_generator(spec, 1, grid)} {
        validate_two_player(spec);
    }

    const TwoPlayerSpec& spec() const { return spec_; }
    const Grid& grid() const { return grid_; }
    const ImpulseSets& sets() const { return sets_; }
    const DiscreteOperators& ops(int i) const { return ops_[i]; }
    const CostSpec& cost(int i) const { return spec_.players[i].cost; }
    const GainSpec& gain(int i) const { return spec_.players[i].gain; }

    /// M_i v and the smallest maximizers delta*_i(v).
    LossResult loss(int i, const Vector& v) const {
        return apply_M(v, grid_, sets_, cost(i), ArgmaxPolicy::Smallest);
    }

private:
    TwoPlayerSpec spec_;
    Grid grid_;
    ImpulseSets sets_;
    std::array<DiscreteOperators, 2> ops_;
};

struct GeneralResidual {
    double R = 0.0;
    /// Largest residual over both players at every node.
    Vector by_node;
};

/// Largest pointwise residual of the system of QVIs, with the opponent's
/// region thresholded at -tol:
///   max_i max{ (M_i v_i - v_i)^+, |H_i(v_j) v_i - v_i| on I_j^tol,
///              |max{L_i v_i + f_i, M_i v_i - v_i}| off I_j^tol }.
inline GeneralResidual residual_general(const GeneralGame& game, const Vector& v1, const Vector& v2, double tol) {
    const int n = static_cast<int>(game.grid().size());
    const std::array<const Vector*, 2> v{&v1, &v2};
    const std::array<LossResult, 2> loss{game.loss(0, v1), game.loss(1, v2)};
    GeneralResidual out{0.0, Vector::Zero(n)};
    for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        const Vector& vi = *v[i];
        const Vector& vj = *v[j];
        const Vector cont = game.ops(i).L.multiply(vi) + game.ops(i).f_adj;
        const Vector gain = apply_gain(vi, loss[j].delta, game.grid(), game.gain(i));
        for (int p = 0; p < n; ++p) {
            const double own = loss[i].value[p] - vi[p];
            double r = std::max(own, 0.0);
            if (loss[j].value[p] - vj[p] >= -tol) r = std::max(r, std::abs(gain[p] - vi[p]));
            else r = std::max(r, std::abs(std::max(cont[p], own)));
            out.by_node[p] = std::max(out.by_node[p], r);
        }
    }
    out.R = out.by_node.maxCoeff();
    return out;
}

/// Solves one player's impulse-control problem with the opponent removed, on
/// the full grid. Requires a running payoff bounded above.
inline Vector single_player_guess(const GeneralGame& game, int player, const ControlOptions& opt = {}) {
    const auto& payoff = game.spec().players[player].payoff;
    if (!payoff.bounded_above())
        throw invalid_input(
            "single_player_guess: running payoff is unbounded above, so the single-player problem is ill-posed; "
            "use the capped family (min(a (x - s), K)) to build the guess");
    const int n = static_cast<int>(game.grid().size());
    const RestrictedQVI rq(game.ops(player), game.grid(), game.sets(), game.cost(player), Vector::Zero(n),
                           Region(n, true), ArgmaxPolicy::Smallest);
    return solve_control(rq, opt).payoff;
}

/// Relaxation algorithm for general two-player games. Each iteration updates
/// both players from the iterate-k data (Jacobi style): the gain is applied on
/// the opponent's relaxed region and an impulse-control problem is solved on
/// its complement.
inline GenSolveReport solve_general(const GeneralGame& game, const std::array<Vector, 2>& guess,
                                    const GenSolveOptions& opt = {}) {
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw invalid_input("solve_general: alpha must lie in (0, 1)");
    if (!(opt.r0 > 0.0)) throw invalid_input("solve_general: r0 must be positive");
    if (!(opt.tol > 0.0)) throw invalid_input("solve_general: tol must be positive");
    const int n = static_cast<int>(game.grid().size());
    if (guess[0].size() != n || guess[1].size() != n) throw invalid_input("solve_general: guess has the wrong size");

    GenSolveReport rep;
    std::array<Vector, 2> v = guess;
    double r = opt.r0;
    double prev_R = std::numeric_limits<double>::infinity();

    for (int k = 0; k < opt.max_iters; ++k) {
        const std::array<LossResult, 2> loss{game.loss(0, v[0]), game.loss(1, v[1])};
        std::array<Region, 2> relaxed;
        for (int j = 0; j < 2; ++j) {
            relaxed[j].assign(n, false);
            for (int p = 0; p < n; ++p) relaxed[j][p] = loss[j].value[p] - v[j][p] >= -r;
        }
        std::array<Vector, 2> next;
        for (int i = 0; i < 2; ++i) {
            const int j = 1 - i;
            const Vector gain = apply_gain(v[i], loss[j].delta, game.grid(), game.gain(i));
            Vector w = v[i];
            Region domain(n, true);
            bool any = false;
            for (int p = 0; p < n; ++p) {
                if (relaxed[j][p]) {
                    w[p] = gain[p];
                    domain[p] = false;
                } else {
                    any = true;
                }
            }
            if (!any) {
                next[i] = w;
                continue;
            }
            const RestrictedQVI rq(game.ops(i), game.grid(), game.sets(), game.cost(i), w, domain,
                                   ArgmaxPolicy::Smallest);
            next[i] = solve_control(rq, opt.control).payoff;
        }
        v = next;
        rep.r_history.push_back(r);
        r *= opt.alpha;

        const GeneralResidual res = residual_general(game, v[0], v[1], opt.tol);
        rep.residual_history.push_back(res.R);
        if (res.R > prev_R) rep.residual_increased = true;
        prev_R = res.R;
        rep.R_infinity = res.R;
        rep.residual_by_node = res.by_node;
        rep.iterations = k + 1;
        if (opt.on_iterate) opt.on_iterate(k + 1, res.R);
        if (res.R < opt.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.payoffs = v;
    const double r_last = rep.r_history.empty() ? opt.r0 : rep.r_history.back();
    for (int i = 0; i < 2; ++i) {
        const LossResult l = game.loss(i, v[i]);
        rep.impulses[i] = l.delta;
        rep.regions[i].assign(n, false);
        rep.tol_regions[i].assign(n, false);
        for (int p = 0; p < n; ++p) {
            rep.regions[i][p] = l.value[p] - v[i][p] >= -r_last;
            rep.tol_regions[i][p] = l.value[p] - v[i][p] >= -opt.tol;
        }
    }
    return rep;
}

/// Zero initial guess.
inline GenSolveReport solve_general(const GeneralGame& game, const GenSolveOptions& opt = {}) {
    const int n = static_cast<int>(game.grid().size());
    return solve_general(game, {Vector::Zero(n), Vector::Zero(n)}, opt);
}

/// Warm start from the single-player value functions.
inline GenSolveReport solve_general_single_player_start(const GeneralGame& game, const GenSolveOptions& opt = {}) {
    return solve_general(game, {single_player_guess(game, 0, opt.control), single_player_guess(game, 1, opt.control)},
                         opt);
}

/// Replaces affine running payoffs a0 + a1 x (a1 != 0) with min(a1 (x - s), K),
/// s = -a0 / a1. Other families are kept.
inline TwoPlayerSpec capped_variant(const TwoPlayerSpec& spec, double cap = 5.0) {
    TwoPlayerSpec out = spec;
    for (auto& pl : out.players) {
        const auto c = pl.payoff.polynomial_coeffs();
        bool affine = c.size() >= 2 && c[1] != 0.0;
        for (std::size_t k = 2; k < c.size(); ++k) affine = affine && c[k] == 0.0;
        if (affine) pl.payoff = Function::capped_linear(c[1], -c[0] / c[1], cap);
    }
    return out;
}

/// Educated guess for games with unbounded payoffs: solve the capped game
/// from its single-player value functions and use its equilibrium payoffs.
inline std::array<Vector, 2> capped_game_guess(const TwoPlayerSpec& spec, const Grid& grid, double cap = 5.0,
                                               const GenSolveOptions& opt = {}) {
    const GeneralGame capped(capped_variant(spec, cap), grid);
    return solve_general_single_player_start(capped, opt).payoffs;
}

/// Maximal runs of consecutive region nodes, as [first, last] coordinates.
struct Interval {
    double lo;
    double hi;
};

inline std::vector<Interval> region_intervals(const Grid& grid, const Region& region) {
    std::vector<Interval> out;
    const int n = static_cast<int>(region.size());
    for (int p = 0; p < n; ++p) {
        if (!region[p]) continue;
        int q = p;
        while (q + 1 < n && region[q + 1]) ++q;
        out.push_back({grid.x(p), grid.x(q)});
        p = q;
    }
    return out;
}

}  // namespace qvi
