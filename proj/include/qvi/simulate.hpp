#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qvi/csv.hpp"
#include "qvi/discretize.hpp"
#include "qvi/error.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"

namespace qvi {

struct SimConfig {
    double horizon = 1000.0;
    double dt = 1e-3;
    int n_paths = 200;
    std::uint64_t seed = 1;
    double x0 = 0.0;
    /// Use -zeta instead of zeta for every normal draw.
    bool negate_noise = false;
    /// Paths with more impulses than this are aborted and flagged.
    std::int64_t impulse_cap = 1'000'000;
    /// Keep every n-th state in the path record (0 keeps none).
    int record_stride = 0;
};

inline void validate_sim_config(const SimConfig& cfg) {
    if (!(cfg.horizon > 0.0)) throw invalid_input("simulate: horizon must be positive");
    if (!(cfg.dt > 0.0) || cfg.dt > cfg.horizon) throw invalid_input("simulate: dt must lie in (0, horizon]");
    if (cfg.n_paths < 1) throw invalid_input("simulate: n_paths must be >= 1");
    if (cfg.impulse_cap < 1) throw invalid_input("simulate: impulse_cap must be >= 1");
}

/// Threshold strategy: intervene on (-inf, threshold] (Below) or on
/// [threshold, inf) (Above) with impulse delta(x) = target + slope x.
struct ThresholdStrategy {
    enum class Side { Never, Below, Above };
    Side side = Side::Never;
    double threshold = 0.0;
    double target = 0.0;
    double slope = -1.0;

    bool triggers(double x) const {
        switch (side) {
            case Side::Below: return x <= threshold;
            case Side::Above: return x >= threshold;
            default: return false;
        }
    }
    double impulse(double x) const { return target + slope * x; }

    static ThresholdStrategy never() { return {}; }
    static ThresholdStrategy below(double threshold, double target) {
        return {Side::Below, threshold, target, -1.0};
    }
    static ThresholdStrategy above(double threshold, double target) {
        return {Side::Above, threshold, target, -1.0};
    }
};

/// Threshold strategy of a discrete solution. The region must be empty or a
/// single run of nodes touching one end of the grid; the analytical threshold
/// sits half a step outside the last region node. The impulse is the affine
/// interpolant of the discrete impulse at the two innermost region nodes.
inline ThresholdStrategy threshold_strategy(const Grid& grid, const Region& region, const ImpulseVector& impulse) {
    const int n = static_cast<int>(grid.size());
    if (static_cast<int>(region.size()) != n || static_cast<int>(impulse.size()) != n)
        throw invalid_input("threshold_strategy: size mismatch");
    int first = -1, last = -1, runs = 0;
    for (int p = 0; p < n; ++p) {
        if (!region[p]) continue;
        if (p == 0 || !region[p - 1]) ++runs;
        if (first < 0) first = p;
        last = p;
    }
    if (runs == 0) return ThresholdStrategy::never();
    if (runs > 1 || (first != 0 && last != n - 1) || (first == 0 && last == n - 1))
        throw invalid_input("threshold_strategy: region is not a one-sided interval");
    const double h = grid.step();
    ThresholdStrategy s;
    int inner, next;
    if (first == 0) {
        s.side = ThresholdStrategy::Side::Below;
        s.threshold = grid.x(last) + 0.5 * h;
        inner = last;
        next = last > 0 ? last - 1 : last;
    } else {
        s.side = ThresholdStrategy::Side::Above;
        s.threshold = grid.x(first) - 0.5 * h;
        inner = first;
        next = first < n - 1 ? first + 1 : first;
    }
    const double d_inner = impulse[inner] * h;
    if (next != inner) {
        const double d_next = impulse[next] * h;
        s.slope = (d_next - d_inner) / (grid.x(next) - grid.x(inner));
    } else {
        s.slope = -1.0;
    }
    s.target = d_inner - s.slope * grid.x(inner);
    return s;
}

/// Multiplies the threshold and the impulse intercept by (1 +- magnitude U),
/// U ~ Uniform[0, 1], with an independent fair sign per parameter.
template <class Rng>
ThresholdStrategy perturb_strategy(const ThresholdStrategy& phi, double magnitude, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto factor = [&] {
        const double sign = coin(rng) ? 1.0 : -1.0;
        return 1.0 + sign * magnitude * unif(rng);
    };
    ThresholdStrategy out = phi;
    out.threshold *= factor();
    out.target *= factor();
    return out;
}

struct ImpulseEvent {
    double time;
    /// 1 or 2.
    int player;
    double pre_state;
    double impulse;
};

struct PathRecord {
    std::vector<double> times;
    std::vector<double> states;
    std::vector<ImpulseEvent> events;
    std::array<double, 2> payoff{0.0, 0.0};
    std::int64_t n_impulses = 0;
    bool degenerate = false;
};

/// SplitMix64 finalizer, used to derive independent per-path seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Random stream of path `index`: depends only on (seed, index).
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

/// One Euler-Maruyama path on [0, T] with immediate threshold-triggered
/// impulses (player 1 first) after every step and at time 0.
template <class Rng>
PathRecord simulate_path(const TwoPlayerSpec& spec, const std::array<ThresholdStrategy, 2>& phi,
                         const SimConfig& cfg, Rng& rng) {
    validate_sim_config(cfg);
    PathRecord rec;
    const std::int64_t steps = std::max<std::int64_t>(1, std::llround(cfg.horizon / cfg.dt));
    const double dt = cfg.dt, sq = std::sqrt(dt);
    const std::array<double, 2> step_disc{std::exp(-spec.players[0].rho * dt), std::exp(-spec.players[1].rho * dt)};
    std::array<double, 2> disc{1.0, 1.0};
    std::normal_distribution<double> normal(0.0, 1.0);
    double x = cfg.x0, t = 0.0;

    auto intervene = [&]() {
        while (true) {
            int who = -1;
            if (phi[0].triggers(x)) who = 0;
            else if (phi[1].triggers(x)) who = 1;
            if (who < 0) return true;
            if (rec.n_impulses >= cfg.impulse_cap) {
                rec.degenerate = true;
                return false;
            }
            const int other = 1 - who;
            const double d = phi[who].impulse(x);
            rec.payoff[who] -= disc[who] * spec.players[who].cost(x, d);
            rec.payoff[other] += disc[other] * spec.players[other].gain(x, d);
            rec.events.push_back({t, who + 1, x, d});
            ++rec.n_impulses;
            x += d;
        }
    };
    auto record = [&](std::int64_t k) {
        if (cfg.record_stride > 0 && k % cfg.record_stride == 0) {
            rec.times.push_back(t);
            rec.states.push_back(x);
        }
    };

    if (!intervene()) return rec;
    record(0);
    for (std::int64_t k = 1; k <= steps; ++k) {
        for (int i = 0; i < 2; ++i) rec.payoff[i] += disc[i] * spec.players[i].payoff(x) * dt;
        double z = normal(rng);
        if (cfg.negate_noise) z = -z;
        x += spec.dynamics.mu(x) * dt + spec.dynamics.sigma(x) * sq * z;
        t = k * dt;
        disc[0] *= step_disc[0];
        disc[1] *= step_disc[1];
        if (!intervene()) return rec;
        record(k);
    }
    return rec;
}

/// Sum by recursive halving; the result depends only on the sequence.
inline double pairwise_sum(const double* a, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t m = n / 2;
    return pairwise_sum(a, m) + pairwise_sum(a + m, n - m);
}

struct PayoffEstimate {
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> std_error{0.0, 0.0};
    int n_paths = 0;
    int degenerate_paths = 0;
    /// True when any path hit the impulse cap; the means are then meaningless.
    bool degenerate = false;
};

/// Monte Carlo estimate of the finite-horizon payoffs of both players.
inline PayoffEstimate estimate_payoff(const TwoPlayerSpec& spec, const std::array<ThresholdStrategy, 2>& phi,
                                      const SimConfig& cfg) {
    validate_sim_config(cfg);
    SimConfig path_cfg = cfg;
    path_cfg.record_stride = 0;
    std::array<std::vector<double>, 2> samples;
    PayoffEstimate est;
    est.n_paths = cfg.n_paths;
    for (int k = 0; k < cfg.n_paths; ++k) {
        auto rng = path_stream(cfg.seed, static_cast<std::uint64_t>(k));
        const PathRecord rec = simulate_path(spec, phi, path_cfg, rng);
        if (rec.degenerate) ++est.degenerate_paths;
        for (int i = 0; i < 2; ++i) samples[i].push_back(rec.payoff[i]);
    }
    est.degenerate = est.degenerate_paths > 0;
    const double n = cfg.n_paths;
    for (int i = 0; i < 2; ++i) {
        const double mean = pairwise_sum(samples[i].data(), samples[i].size()) / n;
        std::vector<double> sq(samples[i].size());
        for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = (samples[i][k] - mean) * (samples[i][k] - mean);
        const double var = cfg.n_paths > 1 ? pairwise_sum(sq.data(), sq.size()) / (n - 1.0) : 0.0;
        est.mean[i] = mean;
        est.std_error[i] = std::sqrt(var / n);
    }
    if (est.degenerate) {
        est.mean = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    return est;
}

/// Writes a path as CSV: t, x, event_player (0 none, 1, 2), impulse. Event
/// rows carry the pre-intervention state and precede the state sample of the
/// same time.
inline void write_path_csv(std::ostream& os, const PathRecord& rec) {
    CsvWriter csv(os, "path", {"t", "x", "event_player", "impulse"});
    std::size_t e = 0;
    auto flush_events = [&](double until) {
        for (; e < rec.events.size() && rec.events[e].time <= until; ++e) {
            const auto& ev = rec.events[e];
            csv.row({ev.time, ev.pre_state, static_cast<double>(ev.player), ev.impulse});
        }
    };
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
        flush_events(rec.times[k]);
        csv.row({rec.times[k], rec.states[k], 0.0, 0.0});
    }
    flush_events(std::numeric_limits<double>::infinity());
}

inline std::string side_name(ThresholdStrategy::Side side) {
    switch (side) {
        case ThresholdStrategy::Side::Below: return "below";
        case ThresholdStrategy::Side::Above: return "above";
        default: return "never";
    }
}

inline ThresholdStrategy::Side parse_side(const std::string& s) {
    if (s == "below") return ThresholdStrategy::Side::Below;
    if (s == "above") return ThresholdStrategy::Side::Above;
    if (s == "never") return ThresholdStrategy::Side::Never;
    throw invalid_input("unknown strategy side '" + s + "' (expected below, above or never)");
}

/// Strategy pair as CSV: player, side, threshold, target, slope.
inline void write_strategy_csv(std::ostream& os, const std::array<ThresholdStrategy, 2>& phi) {
    CsvWriter csv(os, "strategy", {"player", "side", "threshold", "target", "slope"});
    for (int i = 0; i < 2; ++i)
        csv.text_row({std::to_string(i + 1), side_name(phi[i].side), format_double(phi[i].threshold),
                      format_double(phi[i].target), format_double(phi[i].slope)});
}

inline std::array<ThresholdStrategy, 2> read_strategy_csv(std::istream& is) {
    const CsvTable t = read_csv(is);
    if (t.kind != "strategy") throw invalid_input("strategy file: expected a qvi-strategy table");
    std::array<ThresholdStrategy, 2> out;
    std::array<bool, 2> seen{false, false};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long long who = parse_integer(t.rows[r][t.column("player")]);
        if (who != 1 && who != 2) throw invalid_input("strategy file: player must be 1 or 2");
        auto& s = out[who - 1];
        if (seen[who - 1]) throw invalid_input("strategy file: duplicate player " + std::to_string(who));
        seen[who - 1] = true;
        s.side = parse_side(t.rows[r][t.column("side")]);
        s.threshold = t.number(r, "threshold");
        s.target = t.number(r, "target");
        s.slope = t.number(r, "slope");
    }
    if (!seen[0] || !seen[1]) throw invalid_input("strategy file: both players are required");
    return out;
}

}  // namespace qvi
