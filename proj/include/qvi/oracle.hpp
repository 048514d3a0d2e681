#pragma once

#include <cmath>
#include <string>

#include "qvi/error.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"

namespace qvi {

/// Linear game: dX = sigma dW, running payoffs X - s1 and s2 - X, intervention
/// cost c + lambda |d| and gain c_tilde + lambda_tilde |d| for the opponent.
struct LinearGameParams {
    double sigma = 0.0;
    double rho = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double c = 0.0;
    double c_tilde = 0.0;
    double lambda = 0.0;
    double lambda_tilde = 0.0;
};

/// Closed-form Nash equilibrium of the linear game.
struct LinearGameSolution {
    LinearGameParams params;
    double s_tilde = 0.0;
    double theta = 0.0;
    double eta = 0.0;
    double xi = 0.0;
    double gamma = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    /// Intervention thresholds: player 1 acts on (-inf, x_bar1], player 2 on [x_bar2, inf).
    double x_bar1 = 0.0;
    double x_bar2 = 0.0;
    /// Impulse targets.
    double x_star1 = 0.0;
    double x_star2 = 0.0;

    /// phi(x) = A1 e^{theta x} + A2 e^{-theta x} + (s2 - x) / rho.
    double phi(double x) const {
        return a1 * std::exp(theta * x) + a2 * std::exp(-theta * x) + (params.s2 - x) / params.rho;
    }

    double v2(double x) const {
        const auto& p = params;
        if (x <= x_bar1) return phi(x_star1) + p.c_tilde + p.lambda_tilde * (x_star1 - x);
        if (x >= x_bar2) return phi(x_star2) - p.c - p.lambda * (x - x_star2);
        return phi(x);
    }

    double v1(double x) const { return v2(2.0 * s_tilde - x); }

    /// Equilibrium payoff of player 1 (player = 0) or 2 (player = 1).
    double value(int player, double x) const { return player == 0 ? v1(x) : v2(x); }
};

/// F(y) = 2y - eta log((eta + y)/(eta - y)) + theta c.
inline double xi_equation(double y, double eta, double theta, double c) {
    return 2.0 * y - eta * std::log((eta + y) / (eta - y)) + theta * c;
}

/// Root of F on [0, eta) by bisection. F(0) = theta c >= 0 and F -> -inf as
/// y -> eta, so the bracket [0, eta (1 - 1e-15)] always holds a sign change.
inline double solve_xi(double eta, double theta, double c) {
    if (!(eta > 0.0)) throw degenerate_game("solve_xi: eta must be positive (requires 1 - lambda rho > 0)");
    if (c < 0.0) throw invalid_input("solve_xi: c must be nonnegative");
    if (c == 0.0) return 0.0;
    double lo = 0.0, hi = eta * (1.0 - 1e-15);
    if (xi_equation(hi, eta, theta, c) > 0.0)
        throw degenerate_game("solve_xi: no sign change below eta");
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (xi_equation(mid, eta, theta, c) > 0.0) lo = mid;
        else hi = mid;
    }
    const double flo = std::abs(xi_equation(lo, eta, theta, c));
    const double fhi = std::abs(xi_equation(hi, eta, theta, c));
    return flo <= fhi ? lo : hi;
}

inline void validate_linear_game(const LinearGameParams& p) {
    if (!(p.sigma > 0.0)) throw invalid_input("linear game: sigma must be positive");
    if (!(p.rho > 0.0)) throw invalid_input("linear game: rho must be positive");
    if (!(p.s1 < p.s2)) throw invalid_input("linear game: s1 must be smaller than s2");
    if (p.c_tilde < 0.0) throw invalid_input("linear game: c_tilde must be nonnegative");
    if (p.lambda_tilde < 0.0) throw invalid_input("linear game: lambda_tilde must be nonnegative");
    if (p.c_tilde > p.c) throw invalid_input("linear game: c_tilde must not exceed c");
    if (p.lambda_tilde > p.lambda) throw invalid_input("linear game: lambda_tilde must not exceed lambda");
    if (p.c == p.c_tilde && p.lambda == p.lambda_tilde)
        throw degenerate_game("linear game: costs equal gains, no Nash equilibrium of threshold type");
    if (!(1.0 - p.lambda * p.rho > 0.0))
        throw degenerate_game("linear game: 1 - lambda rho must be positive");
    if (!(p.c > 0.0)) throw degenerate_game("linear game: fixed cost c must be positive");
}

inline LinearGameSolution solve_linear_game(const LinearGameParams& p) {
    validate_linear_game(p);
    LinearGameSolution s;
    s.params = p;
    s.s_tilde = 0.5 * (p.s1 + p.s2);
    s.theta = std::sqrt(2.0 * p.rho / (p.sigma * p.sigma));
    s.eta = (1.0 - p.lambda * p.rho) / p.rho;
    s.xi = solve_xi(s.eta, s.theta, p.c);
    const double th = s.theta, eta = s.eta, xi = s.xi;
    s.gamma = th * (p.c - p.c_tilde) / (4.0 * xi) + th * p.c * (p.lambda - p.lambda_tilde) / (4.0 * eta * xi) +
              (p.lambda - p.lambda_tilde) / (2.0 * eta);
    const double g1 = std::sqrt(s.gamma + 1.0), g0 = std::sqrt(s.gamma);
    const double ratio = std::sqrt((eta + xi) / (eta - xi));
    const double l_bar = std::log(ratio * (g1 + g0)) / th;
    const double l_star = std::log((g1 + g0) / ratio) / th;
    s.x_bar1 = s.s_tilde - l_bar;
    s.x_bar2 = s.s_tilde + l_bar;
    s.x_star1 = s.s_tilde - l_star;
    s.x_star2 = s.s_tilde + l_star;
    const double amp = std::sqrt(eta * eta - xi * xi) / (2.0 * th);
    s.a1 = std::exp(-th * s.s_tilde) * amp * (g1 - g0);
    s.a2 = std::exp(th * s.s_tilde) * amp * (-g1 - g0);
    return s;
}

/// Closed-form payoff of `player` (0 or 1) at every grid node.
inline Vector sample_on_grid(const LinearGameSolution& sol, const Grid& grid, int player) {
    Vector out(grid.size());
    for (int p = 0; p < static_cast<int>(grid.size()); ++p) out[p] = sol.value(player, grid.x(p));
    return out;
}

/// Recognizes the linear game in a symmetric spec: zero drift, constant
/// volatility, payoff x - s1, cost c0 + c1 |d|, gain g0 + g1 |d|.
inline LinearGameParams linear_game_params_from(const GameSpec& spec) {
    const auto mu = spec.dynamics.mu.polynomial_coeffs();
    const auto sig = spec.dynamics.sigma.polynomial_coeffs();
    const auto f = spec.player.payoff.polynomial_coeffs();
    auto all_zero_from = [](const std::vector<double>& v, std::size_t k) {
        for (std::size_t i = k; i < v.size(); ++i)
            if (v[i] != 0.0) return false;
        return true;
    };
    if (mu.empty() || !all_zero_from(mu, 0)) throw invalid_input("oracle: drift must be zero");
    if (sig.empty() || !all_zero_from(sig, 1)) throw invalid_input("oracle: volatility must be constant");
    if (f.size() < 2 || f[1] != 1.0 || !all_zero_from(f, 2))
        throw invalid_input("oracle: running payoff must be x - s");
    const auto& cost = spec.player.cost;
    if (cost.c2 != 0.0 || cost.cr != 0.0) throw invalid_input("oracle: cost must be affine in |d|");
    LinearGameParams p;
    p.sigma = sig[0];
    p.rho = spec.player.rho;
    p.s1 = -f[0];
    p.s2 = f[0];
    p.c = cost.c0;
    p.lambda = cost.c1;
    p.c_tilde = spec.player.gain.g0;
    p.lambda_tilde = spec.player.gain.g1;
    return p;
}

}  // namespace qvi
