#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qvi/simulate.hpp"

using namespace qvi;

namespace {

TwoPlayerSpec constant_game(double sigma, double f1, double f2) {
    TwoPlayerSpec s;
    s.dynamics.sigma = Function::constant(sigma);
    for (auto& p : s.players) {
        p.rho = 0.1;
        p.cost = CostSpec{2.0, 1.0, 0.0, 0.0};
        p.gain = GainSpec{0.5, 0.25};
    }
    s.players[0].payoff = Function::constant(f1);
    s.players[1].payoff = Function::constant(f2);
    return s;
}

TwoPlayerSpec mirrored_game() {
    GameSpec g;
    g.dynamics.sigma = Function::constant(0.8);
    g.player.rho = 0.1;
    g.player.payoff = Function::polynomial({-1.0, 2.0, -1.0});
    g.player.cost = CostSpec{2.0, 0.5, 0.0, 0.0};
    g.player.gain = GainSpec{0.5, 0.0};
    return to_two_player(g);
}

SimConfig short_run(int paths = 50) {
    SimConfig c;
    c.horizon = 5.0;
    c.dt = 1e-2;
    c.n_paths = paths;
    return c;
}

}  // namespace

TEST(Simulate, DeterministicRunningPayoffIsALeftRiemannSum) {
    const auto spec = constant_game(0.0, 1.0, -2.0);
    SimConfig c = short_run(3);
    const auto est = estimate_payoff(spec, {ThresholdStrategy::never(), ThresholdStrategy::never()}, c);
    const double q = std::exp(-0.1 * c.dt);
    const int n = static_cast<int>(std::llround(c.horizon / c.dt));
    const double riemann = c.dt * (1.0 - std::pow(q, n)) / (1.0 - q);
    EXPECT_NEAR(est.mean[0], riemann, 1e-10);
    EXPECT_NEAR(est.mean[1], -2.0 * riemann, 1e-10);
    EXPECT_NEAR(est.mean[0], (1.0 - std::exp(-0.1 * c.horizon)) / 0.1, 0.1 * c.dt * c.horizon);
    EXPECT_LT(est.std_error[0], 1e-12);
    EXPECT_FALSE(est.degenerate);
}

TEST(Simulate, ImpulseAtTimeZeroPaysCostAndGain) {
    const auto spec = constant_game(0.0, 0.0, 0.0);
    SimConfig c = short_run(1);
    c.x0 = -2.0;
    auto rng = path_stream(1, 0);
    const auto rec = simulate_path(spec, {ThresholdStrategy::below(-1.0, 0.5), ThresholdStrategy::never()}, c, rng);
    ASSERT_EQ(rec.events.size(), 1u);
    EXPECT_EQ(rec.events[0].player, 1);
    EXPECT_EQ(rec.events[0].time, 0.0);
    EXPECT_DOUBLE_EQ(rec.events[0].impulse, 2.5);
    EXPECT_DOUBLE_EQ(rec.payoff[0], -(2.0 + 2.5));
    EXPECT_DOUBLE_EQ(rec.payoff[1], 0.5 + 0.25 * 2.5);
}

TEST(Simulate, EstimatesAreReproducibleAndSeedDependent) {
    const auto spec = mirrored_game();
    const std::array<ThresholdStrategy, 2> phi{ThresholdStrategy::below(-1.5, 0.5),
                                               ThresholdStrategy::above(1.5, -0.5)};
    const auto a = estimate_payoff(spec, phi, short_run());
    const auto b = estimate_payoff(spec, phi, short_run());
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
    SimConfig other = short_run();
    other.seed = 2;
    EXPECT_NE(estimate_payoff(spec, phi, other).mean[0], a.mean[0]);
}

TEST(Simulate, StandardErrorShrinksLikeOneOverRootN) {
    const auto spec = mirrored_game();
    const std::array<ThresholdStrategy, 2> phi{ThresholdStrategy::below(-1.5, 0.5),
                                               ThresholdStrategy::above(1.5, -0.5)};
    const auto small = estimate_payoff(spec, phi, short_run(100));
    const auto large = estimate_payoff(spec, phi, short_run(400));
    const double ratio = small.std_error[0] / large.std_error[0];
    EXPECT_GT(ratio, 1.5);
    EXPECT_LT(ratio, 2.7);
}

TEST(Simulate, MirroredGameWithNegatedNoiseSwapsThePlayers) {
    const auto spec = mirrored_game();
    const std::array<ThresholdStrategy, 2> phi{ThresholdStrategy::below(-1.5, 0.5),
                                               ThresholdStrategy::above(1.5, -0.5)};
    // Reflecting x -> -x maps player 1's strategy onto player 2's and back,
    // so the same pair is played on the mirrored path.
    SimConfig c = short_run(20);
    c.x0 = 0.7;
    SimConfig m = c;
    m.x0 = -0.7;
    m.negate_noise = true;
    const auto a = estimate_payoff(spec, phi, c);
    const auto b = estimate_payoff(spec, phi, m);
    EXPECT_NEAR(a.mean[0], b.mean[1], 1e-9 * (1.0 + std::abs(a.mean[0])));
    EXPECT_NEAR(a.mean[1], b.mean[0], 1e-9 * (1.0 + std::abs(a.mean[1])));
}

TEST(Simulate, AlternatingStrategiesHitTheImpulseCap) {
    const auto spec = constant_game(0.3, 0.0, 0.0);
    // Each player pushes the state into the other's region.
    const std::array<ThresholdStrategy, 2> phi{ThresholdStrategy::below(1.0, 2.0),
                                               ThresholdStrategy::above(1.5, 0.0)};
    SimConfig c = short_run(4);
    c.impulse_cap = 1000;
    const auto est = estimate_payoff(spec, phi, c);
    EXPECT_TRUE(est.degenerate);
    EXPECT_EQ(est.degenerate_paths, 4);
    EXPECT_TRUE(std::isnan(est.mean[0]));
    auto rng = path_stream(1, 0);
    const auto rec = simulate_path(spec, phi, c, rng);
    EXPECT_TRUE(rec.degenerate);
    EXPECT_EQ(rec.n_impulses, 1000);
}

TEST(Simulate, ZeroPerturbationIsTheIdentity) {
    std::mt19937_64 rng(3);
    const auto phi = ThresholdStrategy::below(-1.25, 0.75);
    const auto same = perturb_strategy(phi, 0.0, rng);
    EXPECT_EQ(same.threshold, phi.threshold);
    EXPECT_EQ(same.target, phi.target);
    for (int k = 0; k < 100; ++k) {
        const auto p = perturb_strategy(phi, 0.25, rng);
        EXPECT_LE(std::abs(p.threshold / phi.threshold - 1.0), 0.25 + 1e-15);
        EXPECT_LE(std::abs(p.target / phi.target - 1.0), 0.25 + 1e-15);
        EXPECT_EQ(p.side, phi.side);
    }
}

TEST(Simulate, ThresholdStrategyFromADiscreteRegion) {
    const Grid g(1.0, 4);
    Region below(9, false);
    ImpulseVector d(9, 0);
    for (int p = 0; p <= 2; ++p) {
        below[p] = true;
        d[p] = 6 - p;  // every node jumps to x = 0.5
    }
    const auto s = threshold_strategy(g, below, d);
    EXPECT_EQ(s.side, ThresholdStrategy::Side::Below);
    EXPECT_DOUBLE_EQ(s.threshold, -0.5 + 0.125);
    EXPECT_DOUBLE_EQ(s.slope, -1.0);
    EXPECT_DOUBLE_EQ(s.target, 0.5);

    Region above(9, false);
    above[7] = above[8] = true;
    ImpulseVector e(9, 0);
    e[7] = -4;
    e[8] = -5;
    const auto t = threshold_strategy(g, above, e);
    EXPECT_EQ(t.side, ThresholdStrategy::Side::Above);
    EXPECT_DOUBLE_EQ(t.threshold, 0.75 - 0.125);
    EXPECT_DOUBLE_EQ(t.impulse(0.75), -1.0);

    EXPECT_EQ(threshold_strategy(g, Region(9, false), e).side, ThresholdStrategy::Side::Never);
    Region middle(9, false);
    middle[4] = true;
    EXPECT_THROW(threshold_strategy(g, middle, e), invalid_input);
}

TEST(Simulate, StrategyCsvRoundTrip) {
    const std::array<ThresholdStrategy, 2> phi{ThresholdStrategy::below(-1.0 / 3.0, 0.1),
                                               ThresholdStrategy::never()};
    std::stringstream ss;
    write_strategy_csv(ss, phi);
    const auto back = read_strategy_csv(ss);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].side, phi[i].side);
        EXPECT_EQ(back[i].threshold, phi[i].threshold);
        EXPECT_EQ(back[i].target, phi[i].target);
        EXPECT_EQ(back[i].slope, phi[i].slope);
    }
    std::stringstream bad("# qvi-strategy v1\nplayer,side,threshold,target,slope\n1,sideways,0,0,-1\n");
    EXPECT_THROW(read_strategy_csv(bad), invalid_input);
}

TEST(Simulate, PathRecordAndCsv) {
    const auto spec = mirrored_game();
    SimConfig c = short_run(1);
    c.record_stride = 10;
    c.x0 = -2.0;
    auto rng = path_stream(5, 0);
    const auto rec = simulate_path(spec, {ThresholdStrategy::below(-1.5, 0.5), ThresholdStrategy::never()}, c, rng);
    EXPECT_EQ(rec.times.size(), 51u);
    EXPECT_GE(rec.events.size(), 1u);
    std::stringstream ss;
    write_path_csv(ss, rec);
    const CsvTable t = read_csv(ss);
    EXPECT_EQ(t.kind, "path");
    EXPECT_EQ(t.rows.size(), rec.times.size() + rec.events.size());
    EXPECT_EQ(t.number(0, "event_player"), 1.0);
}

TEST(Simulate, RejectsBadConfigs) {
    SimConfig c;
    c.dt = 0.0;
    EXPECT_THROW(validate_sim_config(c), invalid_input);
    c = {};
    c.n_paths = 0;
    EXPECT_THROW(validate_sim_config(c), invalid_input);
    c = {};
    c.horizon = -1.0;
    EXPECT_THROW(validate_sim_config(c), invalid_input);
}
