#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "qvi/control.hpp"
#include "qvi/discretize.hpp"
#include "qvi/error.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"
#include "qvi/matrixkit.hpp"

namespace qvi {

struct SymSolveOptions {
    /// Stop once Diff drops below this (0 runs until exact convergence, a
    /// cycle or max_iters).
    double tol = 1e-8;
    double scale = 1.0;
    int max_iters = 500;
    /// Iterates kept for cycle detection.
    int cycle_window = 20;
    /// Without convergence, iterates whose maxResQVIs is within this relative
    /// margin of the smallest one are equally accurate; the earliest is reported.
    double select_rtol = 5e-3;
    /// Check the one-step fixed-point identity at every iteration (slow).
    bool check_identity = false;
    /// Initial payoff; zero when empty.
    std::optional<Vector> initial;
    ControlOptions control;
    /// Called with (k + 1, v^{k+1}, phi^{k+1}) after every iteration.
    std::function<void(int, const Vector&, const Strategy&)> on_iterate;
};

/// Node-wise residual of the symmetric QVI system.
struct ResidualReport {
    Vector by_node;
    double max = 0.0;
    int argmax = -1;
    /// Largest residual outside the opponent-border node pairs.
    double max_off_border = 0.0;
    int argmax_off_border = -1;
};

struct SymIterate {
    double diff = 0.0;
    double max_res_qvis = 0.0;
    double identity_error = 0.0;
    bool control_exact = false;
};

struct SymSolveReport {
    /// Selected iterate: the last one on convergence, otherwise the earliest
    /// one with (nearly) the smallest maxResQVIs.
    Vector payoff;
    Region region;
    ImpulseVector impulse;
    /// Index k of the selected iterate v^k.
    int iterations = 0;
    /// Number of iterations performed.
    int iterations_run = 0;
    /// Diff and maxResQVIs of v^{k+1}, per iteration k.
    std::vector<SymIterate> history;
    std::vector<double> diff_history;
    bool converged = false;
    bool converged_exactly = false;
    bool cycle_detected = false;
    double max_res_qvis = 0.0;
    ResidualReport residual;
    /// Largest one-step identity error seen (only with check_identity).
    double max_identity_error = 0.0;
};

/// ||(v_new - v_old) / max(|v_new|, scale)||_inf.
inline double diff_metric(const Vector& v_new, const Vector& v_old, double scale) {
    if (v_new.size() != v_old.size()) throw invalid_input("diff_metric: size mismatch");
    if (!(scale > 0.0)) throw invalid_input("diff_metric: scale must be positive");
    return relative_change(v_new, v_old, scale);
}

/// Discrete symmetric game: operators and impulse data on one grid.
class SymmetricGame {
public:
    SymmetricGame(const GameSpec& spec, const Grid& grid, ImpulseMode mode)
        : spec_(spec), grid_(grid), sets_(grid, mode), ops_(build_generator(spec, grid)) {
        validate_symmetric(spec, grid.x_max());
        if (mode == ImpulseMode::AllTargets)
            throw invalid_input("symmetric game: impulse sets must be {0} at nonnegative nodes");
    }

    const GameSpec& spec() const { return spec_; }
    const Grid& grid() const { return grid_; }
    const ImpulseSets& sets() const { return sets_; }
    const DiscreteOperators& ops() const { return ops_; }
    const CostSpec& cost() const { return spec_.player.cost; }
    const GainSpec& gain() const { return spec_.player.gain; }
    int size() const { return static_cast<int>(grid_.size()); }

    Vector continuation(const Vector& v) const { return ops_.L.multiply(v) + ops_.f_adj; }
    LossResult loss(const Vector& v) const { return apply_M(v, grid_, sets_, cost(), ArgmaxPolicy::Largest); }

    /// Strategy induced by v: I = {Lv + f <= Mv - v} on G_{<0}, delta = delta*(v).
    Strategy induced_strategy(const Vector& v) const {
        const Vector cont = continuation(v);
        const LossResult lv = loss(v);
        Strategy s{Region(size(), false), lv.delta};
        for (int p = 0; p < size(); ++p)
            s.region[p] = grid_.index(p) < 0 && cont[p] <= lv.value[p] - v[p];
        return s;
    }

private:
    GameSpec spec_;
    Grid grid_;
    ImpulseSets sets_;
    DiscreteOperators ops_;
};

/// Positions paired across the opponent's region border: for every switch
/// between I and I^c at (p, p+1), the mirrored pair.
inline std::vector<int> opponent_border_nodes(const Grid& grid, const Region& region) {
    std::vector<int> out;
    for (int p = 0; p + 1 < static_cast<int>(region.size()); ++p)
        if (region[p] != region[p + 1]) {
            out.push_back(grid.mirror(p));
            out.push_back(grid.mirror(p + 1));
        }
    return out;
}

/// Residual of the symmetric QVI system at v: |max{Lv + f, Mv - v}| on -C and
/// |Hv - v| on -I, with I = {Lv + f <= Mv - v} on G_{<0} and C = I^c.
inline ResidualReport max_res_qvis(const SymmetricGame& game, const Vector& v) {
    const Grid& grid = game.grid();
    const int n = game.size();
    const Vector cont = game.continuation(v);
    const LossResult lv = game.loss(v);
    Region region(n, false);
    for (int p = 0; p < n; ++p) region[p] = grid.index(p) < 0 && cont[p] <= lv.value[p] - v[p];
    const Vector hv = apply_H(v, lv.delta, grid, game.gain());

    ResidualReport rep;
    rep.by_node = Vector(n);
    for (int p = 0; p < n; ++p) {
        const bool opp_intervenes = region[grid.mirror(p)];
        rep.by_node[p] = opp_intervenes ? std::abs(hv[p] - v[p]) : std::abs(std::max(cont[p], lv.value[p] - v[p]));
    }
    std::vector<bool> border(n, false);
    for (int p : opponent_border_nodes(grid, region)) border[p] = true;
    for (int p = 0; p < n; ++p) {
        const double r = rep.by_node[p];
        if (rep.argmax < 0 || r > rep.max) {
            rep.max = r;
            rep.argmax = p;
        }
        if (!border[p] && (rep.argmax_off_border < 0 || r > rep.max_off_border)) {
            rep.max_off_border = r;
            rep.argmax_off_border = p;
        }
    }
    return rep;
}

struct FixedPointMatrices {
    Matrix A;
    Matrix B;
    Vector C;
};

/// A(phi, phi_bar) = Id - (Id - Psi_bar - S Psi S)(Id + L) - Psi_bar B(delta_bar),
/// B(phi) = S Psi B(delta) S,
/// C(phi, phi_bar) = (Id - Psi_bar - S Psi S) f - Psi_bar c(delta_bar) + S Psi S g(S delta).
inline FixedPointMatrices fixed_point_matrices(const SymmetricGame& game, const Strategy& phi,
                                               const Strategy& phi_bar) {
    const Grid& grid = game.grid();
    const int n = game.size();
    for (const Strategy* s : {&phi, &phi_bar}) {
        if (static_cast<int>(s->region.size()) != n) throw invalid_input("fixed_point_matrices: size mismatch");
        for (int p = 0; p < n; ++p)
            if (s->region[p] && grid.index(p) >= 0)
                throw invalid_input("fixed_point_matrices: intervention at a nonnegative node");
    }
    const Matrix L = game.ops().dense_L();
    const Matrix Bd = impulse_matrix(grid, game.sets(), phi.impulse);
    const Matrix Bbar = impulse_matrix(grid, game.sets(), phi_bar.impulse);
    const CostTable table(game.cost(), grid.step(), game.sets().max_span());

    FixedPointMatrices out{Matrix::Zero(n, n), Matrix::Zero(n, n), Vector::Zero(n)};
    for (int p = 0; p < n; ++p) {
        const int q = grid.mirror(p);
        if (phi.region[q]) {
            // Row of S Psi S: the opponent intervenes at p.
            out.A(p, p) = 1.0;
            out.B.row(p) = Bd.row(q).reverse();
            out.C[p] = game.gain()(grid.x(p), phi.impulse[q] * grid.step());
        } else if (phi_bar.region[p]) {
            out.A.row(p) = -Bbar.row(p);
            out.A(p, p) += 1.0;
            out.C[p] = -table(phi_bar.impulse[p]);
        } else {
            out.A.row(p) = -L.row(p);
            out.C[p] = game.ops().f_adj[p];
        }
    }
    return out;
}

/// ||A(phi, phi_bar) v_new - B(phi) v_old - C(phi, phi_bar)||_inf.
inline double fixed_point_identity_error(const SymmetricGame& game, const Strategy& phi, const Strategy& phi_bar,
                                         const Vector& v_old, const Vector& v_new) {
    const auto m = fixed_point_matrices(game, phi, phi_bar);
    return (m.A * v_new - m.B * v_old - m.C).cwiseAbs().maxCoeff();
}

namespace detail {

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

/// Hash of the region and the exact bit pattern of the payoff.
inline std::uint64_t iterate_key(const Region& region, const Vector& v) {
    std::uint64_t h = 0;
    for (bool b : region) h = hash_combine(h, b ? 1 : 0);
    for (Eigen::Index i = 0; i < v.size(); ++i) h = hash_combine(h, std::hash<double>{}(v[i]));
    return h;
}

}  // namespace detail

/// Iterative solver for symmetric games: the opponent's symmetric response
/// fixes the payoff on -I^k, then the player re-solves her impulse-control
/// problem on the complement.
inline SymSolveReport solve_symmetric(const SymmetricGame& game, const SymSolveOptions& opt = {}) {
    if (!(opt.tol >= 0.0) || !(opt.scale > 0.0) || opt.max_iters < 1)
        throw invalid_input("solve_symmetric: tol >= 0, scale > 0 and max_iters >= 1 required");
    const Grid& grid = game.grid();
    const int n = game.size();
    Vector v = opt.initial ? *opt.initial : Vector(Vector::Zero(n));
    if (v.size() != n) throw invalid_input("solve_symmetric: initial guess has the wrong size");
    Strategy phi = game.induced_strategy(v);

    SymSolveReport rep;
    std::deque<std::uint64_t> recent;
    std::vector<std::pair<Vector, Strategy>> iterates;

    for (int k = 0; k < opt.max_iters; ++k) {
        // Opponent's symmetric response on -I^k.
        const Vector hv = apply_H(v, phi.impulse, grid, game.gain());
        Vector w = v;
        Region domain(n, true);
        for (int p = 0; p < n; ++p)
            if (phi.region[grid.mirror(p)]) {
                w[p] = hv[p];
                domain[p] = false;
            }
        const RestrictedQVI rq = restrict(game.ops(), grid, game.sets(), game.cost(), w, domain);
        const ControlSolution sol = solve_control(rq, opt.control);
        Strategy next{sol.region, sol.impulse};

        SymIterate it;
        it.control_exact = sol.exact;
        if (opt.check_identity) {
            it.identity_error = fixed_point_identity_error(game, phi, next, v, sol.payoff);
            rep.max_identity_error = std::max(rep.max_identity_error, it.identity_error);
        }
        it.diff = diff_metric(sol.payoff, v, opt.scale);
        const bool exact = (sol.payoff.array() == v.array()).all();
        v = sol.payoff;
        phi = std::move(next);
        it.max_res_qvis = max_res_qvis(game, v).max;
        rep.history.push_back(it);
        rep.diff_history.push_back(it.diff);
        rep.iterations_run = k + 1;
        iterates.emplace_back(v, phi);
        if (opt.on_iterate) opt.on_iterate(k + 1, v, phi);

        if (exact || it.diff < opt.tol) {
            rep.converged = true;
            rep.converged_exactly = exact;
            break;
        }
        const std::uint64_t key = detail::iterate_key(phi.region, v);
        if (std::find(recent.begin(), recent.end(), key) != recent.end()) {
            rep.cycle_detected = true;
            break;
        }
        recent.push_back(key);
        if (static_cast<int>(recent.size()) > opt.cycle_window) recent.pop_front();
    }

    // Without convergence, report the earliest iterate whose maxResQVIs is
    // within select_rtol of the smallest one seen.
    std::size_t pick = iterates.size() - 1;
    if (!rep.converged) {
        double least = std::numeric_limits<double>::infinity();
        for (const auto& it : rep.history) least = std::min(least, it.max_res_qvis);
        for (std::size_t k = 0; k < rep.history.size(); ++k)
            if (rep.history[k].max_res_qvis <= least * (1.0 + opt.select_rtol)) {
                pick = k;
                break;
            }
    }
    rep.payoff = iterates[pick].first;
    rep.region = iterates[pick].second.region;
    rep.impulse = iterates[pick].second.impulse;
    rep.iterations = static_cast<int>(pick) + 1;
    rep.residual = max_res_qvis(game, rep.payoff);
    rep.max_res_qvis = rep.residual.max;
    return rep;
}

inline SymSolveReport solve_symmetric(const GameSpec& spec, const Grid& grid,
                                      ImpulseMode mode = ImpulseMode::SymmetryConstrained,
                                      const SymSolveOptions& opt = {}) {
    return solve_symmetric(SymmetricGame(spec, grid, mode), opt);
}

/// Right end of the first intervention interval plus half a step, or nullopt
/// when the region is empty.
inline std::optional<double> region_threshold(const Grid& grid, const Region& region) {
    int last = -1;
    for (int p = 0; p < static_cast<int>(region.size()); ++p) {
        if (region[p]) last = p;
        else if (last >= 0) break;
    }
    if (last < 0) return std::nullopt;
    return grid.x(last) + 0.5 * grid.step();
}

}  // namespace qvi
