#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "qvi/error.hpp"
#include "qvi/functions.hpp"

namespace qvi {

/// Uncontrolled dynamics dX = mu(X) dt + sigma(X) dW.
struct Dynamics {
    Function mu = Function::constant(0.0);
    Function sigma = Function::constant(0.0);
};

/// Data of one player: discount rate, running payoff, own intervention cost
/// and gain from the opponent's interventions. The Neumann slopes are only
/// used by the discretization.
struct PlayerSpec {
    double rho = 0.0;
    Function payoff;
    CostSpec cost;
    GainSpec gain;
    std::optional<double> lbc;
    std::optional<double> rbc;
};

/// Symmetric game, described through player 1 ("the player"); the opponent's
/// data is obtained by reflection x -> -x.
struct GameSpec {
    Dynamics dynamics;
    PlayerSpec player;

    /// Left Neumann slope; defaults to the linear cost slope.
    double lbc() const { return player.lbc.value_or(player.cost.c1); }
    /// Right Neumann slope; defaults to the linear gain slope.
    double rbc() const { return player.rbc.value_or(player.gain.g1); }
};

/// General two-player game.
struct TwoPlayerSpec {
    Dynamics dynamics;
    std::array<PlayerSpec, 2> players;

    /// Neumann slopes of player i. Defaults follow the convention that player 1
    /// intervenes at low states and player 2 at high states with linear
    /// costs/gains.
    double lbc(int i) const {
        const auto& p = players[i];
        return p.lbc.value_or(i == 0 ? p.cost.c1 : -p.gain.g1);
    }
    double rbc(int i) const {
        const auto& p = players[i];
        return p.rbc.value_or(i == 0 ? p.gain.g1 : -p.cost.c1);
    }
};

inline void validate_player(const PlayerSpec& p, const std::string& who) {
    if (!(p.rho > 0.0)) throw invalid_input(who + ": discount rate must be positive");
    if (!(p.cost.c0 > 0.0)) throw invalid_input(who + ": fixed cost c0 must be positive");
    if (p.cost.c1 < 0.0 || p.cost.c2 < 0.0 || p.cost.cr < 0.0)
        throw invalid_input(who + ": cost coefficients must be nonnegative");
}

/// Checks the symmetry requirements (mu odd, sigma even) on sample points
/// spanning [-x_span, x_span], plus positivity of rho and the fixed cost.
inline void validate_symmetric(const GameSpec& spec, double x_span = 10.0) {
    validate_player(spec.player, "player");
    constexpr int samples = 64;
    for (int k = 0; k <= samples; ++k) {
        const double x = x_span * k / samples;
        const double mu_p = spec.dynamics.mu(x), mu_m = spec.dynamics.mu(-x);
        const double s_p = spec.dynamics.sigma(x), s_m = spec.dynamics.sigma(-x);
        if (std::abs(mu_p + mu_m) > 1e-12 * (1.0 + std::abs(mu_p)))
            throw invalid_input("symmetric game: drift must be odd");
        if (std::abs(s_p - s_m) > 1e-12 * (1.0 + std::abs(s_p)))
            throw invalid_input("symmetric game: volatility must be even");
    }
}

inline void validate_two_player(const TwoPlayerSpec& spec) {
    validate_player(spec.players[0], "player 1");
    validate_player(spec.players[1], "player 2");
}

/// Two-player form of a symmetric game: f2(x) = f1(-x), identical costs and
/// gains on impulse magnitudes, mirrored Neumann slopes.
inline TwoPlayerSpec to_two_player(const GameSpec& spec) {
    TwoPlayerSpec out;
    out.dynamics = spec.dynamics;
    out.players[0] = spec.player;
    out.players[0].lbc = spec.lbc();
    out.players[0].rbc = spec.rbc();
    out.players[1] = spec.player;
    out.players[1].payoff = spec.player.payoff.reflected();
    out.players[1].lbc = -spec.rbc();
    out.players[1].rbc = -spec.lbc();
    return out;
}

}  // namespace qvi
