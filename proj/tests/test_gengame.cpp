#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qvi/gengame.hpp"

using namespace qvi;

namespace {

TwoPlayerSpec parabolic_game() {
    const double pi = std::numbers::pi;
    TwoPlayerSpec s;
    s.dynamics.sigma = Function::constant(0.25);
    for (auto& p : s.players) {
        p.rho = 0.03;
        p.cost = CostSpec{100.0, 0.0, 0.0, 0.0};
        p.gain = GainSpec{30.0, 0.0};
    }
    s.players[0].payoff = Function::polynomial({4.5, -3.5, -1.0});
    s.players[1].payoff = Function::polynomial({2.7 * pi, -(pi - 2.7), -1.0});
    return s;
}

/// Mirror-symmetric game with concave payoffs peaked at x = 1 and x = -1.
TwoPlayerSpec mirrored_game() {
    GameSpec g;
    g.dynamics.sigma = Function::constant(0.5);
    g.player.rho = 0.05;
    g.player.payoff = Function::polynomial({-1.0, 2.0, -1.0});
    g.player.cost = CostSpec{2.0, 0.5, 0.0, 0.0};
    g.player.gain = GainSpec{0.5, 0.0};
    return to_two_player(g);
}

}  // namespace

TEST(GeneralGame, RelaxationRadiusDecaysGeometrically) {
    const GeneralGame game(parabolic_game(), Grid(5.0, 30));
    GenSolveOptions o;
    o.max_iters = 12;
    o.r0 = 2.0;
    o.alpha = 0.5;
    const auto rep = solve_general(game, o);
    for (std::size_t k = 0; k < rep.r_history.size(); ++k)
        EXPECT_DOUBLE_EQ(rep.r_history[k], 2.0 * std::pow(0.5, static_cast<double>(k)));
    EXPECT_EQ(rep.residual_history.size(), rep.r_history.size());
}

TEST(GeneralGame, ResidualOfTheZeroPayoffIsTheRunningPayoff) {
    const TwoPlayerSpec spec = parabolic_game();
    const GeneralGame game(spec, Grid(5.0, 20));
    const int n = static_cast<int>(game.grid().size());
    const Vector zero = Vector::Zero(n);
    const auto res = residual_general(game, zero, zero, 1e-8);
    // Nobody intervenes at v = 0 (M v - v = -c0), so only |max{f_i, -c0}| remains.
    for (int p = 1; p + 1 < n; ++p) {
        const double x = game.grid().x(p);
        double expect = 0.0;
        for (int i = 0; i < 2; ++i)
            expect = std::max(expect, std::abs(std::max(spec.players[i].payoff(x), -spec.players[i].cost.c0)));
        EXPECT_NEAR(res.by_node[p], expect, 1e-12) << "x = " << x;
    }
    EXPECT_EQ(res.R, res.by_node.maxCoeff());
}

TEST(GeneralGame, ResidualUsesTheGainWhereTheOpponentIntervenes) {
    const TwoPlayerSpec spec = parabolic_game();
    const GeneralGame game(spec, Grid(5.0, 20));
    const int n = static_cast<int>(game.grid().size());
    // Player 2's payoff drops by exactly c0 at node 0, so M_2 v_2 - v_2 = 0 there
    // through the jump to node 1, and player 1 is judged by |v1(x_1) + g - v1(x_0)|.
    Vector v1 = Vector::Zero(n), v2 = Vector::Zero(n);
    v2[0] = -100.0;
    v1[0] = -1000.0;
    const auto res = residual_general(game, v1, v2, 1e-8);
    EXPECT_NEAR(res.by_node[0], 1030.0, 1e-9);
}

TEST(GeneralGame, ParabolicGameConverges) {
    const GeneralGame game(parabolic_game(), Grid(5.0, 150));
    const auto rep = solve_general(game);
    ASSERT_TRUE(rep.converged);
    EXPECT_LT(rep.R_infinity, 1e-8);
    EXPECT_LE(rep.iterations, 110);
    const auto r1 = region_intervals(game.grid(), rep.tol_regions[0]);
    const auto r2 = region_intervals(game.grid(), rep.tol_regions[1]);
    ASSERT_EQ(r1.size(), 1u);
    ASSERT_EQ(r2.size(), 1u);
    // Player 1 acts on high states, player 2 on low states.
    EXPECT_EQ(r1[0].hi, 5.0);
    EXPECT_EQ(r2[0].lo, -5.0);
    EXPECT_NEAR(r1[0].lo, 1.068, 0.1);
    EXPECT_NEAR(r2[0].hi, -3.048, 0.1);
}

TEST(GeneralGame, WarmStartFromSinglePlayerValues) {
    const GeneralGame game(parabolic_game(), Grid(5.0, 150));
    const auto zero = solve_general(game);
    const auto warm = solve_general_single_player_start(game);
    ASSERT_TRUE(warm.converged);
    EXPECT_LE(warm.iterations, 1.5 * zero.iterations);
    EXPECT_LT((warm.payoffs[0] - zero.payoffs[0]).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((warm.payoffs[1] - zero.payoffs[1]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GeneralGame, SinglePlayerGuessDominatesTheContinuationValue) {
    const GeneralGame game(parabolic_game(), Grid(5.0, 50));
    for (int i = 0; i < 2; ++i) {
        const Vector v = single_player_guess(game, i);
        const Vector cont = solve_tridiagonal(game.ops(i).L, -game.ops(i).f_adj);
        EXPECT_GE((v - cont).minCoeff(), -1e-9);
        EXPECT_GE((v - game.loss(i, v).value).minCoeff(), -1e-9);
    }
}

TEST(GeneralGame, MirroredGameHasMirroredPayoffs) {
    const GeneralGame game(mirrored_game(), Grid(4.0, 50));
    GenSolveOptions o;
    o.tol = 1e-9;
    const auto rep = solve_general(game, o);
    ASSERT_TRUE(rep.converged);
    EXPECT_LT((rep.payoffs[1] - reflect(rep.payoffs[0])).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(GeneralGame, UnboundedPayoffsNeedTheCappedFamily) {
    TwoPlayerSpec spec = parabolic_game();
    spec.players[0].payoff = Function::polynomial({3.0, 1.0});
    spec.players[1].payoff = Function::polynomial({3.0, -1.0});
    const GeneralGame game(spec, Grid(5.0, 10));
    EXPECT_THROW(single_player_guess(game, 0), invalid_input);
    const TwoPlayerSpec capped = capped_variant(spec, 5.0);
    EXPECT_EQ(capped.players[0].payoff.family(), "capped");
    EXPECT_EQ(capped.players[0].payoff.params(), (std::vector<double>{1.0, -3.0, 5.0}));
    EXPECT_EQ(capped.players[1].payoff.params(), (std::vector<double>{-1.0, 3.0, 5.0}));
    EXPECT_NO_THROW(single_player_guess(GeneralGame(capped, Grid(5.0, 10)), 0));
    // Non-affine payoffs are left alone.
    EXPECT_EQ(capped_variant(parabolic_game()).players[0].payoff.family(), "poly");
}

TEST(GeneralGame, RejectsBadOptions) {
    const GeneralGame game(parabolic_game(), Grid(5.0, 10));
    GenSolveOptions o;
    o.alpha = 1.0;
    EXPECT_THROW(solve_general(game, o), invalid_input);
    o = {};
    o.tol = 0.0;
    EXPECT_THROW(solve_general(game, o), invalid_input);
    EXPECT_THROW(solve_general(game, {Vector::Zero(3), Vector::Zero(3)}), invalid_input);
}

TEST(GeneralGame, RegionIntervals) {
    const Grid g(1.0, 4);
    const Region r{true, true, false, false, true, false, false, true, true};
    const auto iv = region_intervals(g, r);
    ASSERT_EQ(iv.size(), 3u);
    EXPECT_EQ(iv[0].lo, -1.0);
    EXPECT_EQ(iv[0].hi, -0.75);
    EXPECT_EQ(iv[1].lo, 0.0);
    EXPECT_EQ(iv[1].hi, 0.0);
    EXPECT_EQ(iv[2].hi, 1.0);
}
