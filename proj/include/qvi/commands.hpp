#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qvi/control.hpp"
#include "qvi/csv.hpp"
#include "qvi/error.hpp"
#include "qvi/gengame.hpp"
#include "qvi/oracle.hpp"
#include "qvi/simulate.hpp"
#include "qvi/specfile.hpp"
#include "qvi/symgame.hpp"

namespace qvi::cli {

/// Exit codes shared by all subcommands.
inline constexpr int exit_converged = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_not_converged = 2;

/// Environment variable naming the directory for relative output paths.
inline constexpr const char* output_dir_env = "QVI_OUTPUT_DIR";

/// Output file: `given` (or `fallback` when empty); relative paths are placed
/// under $QVI_OUTPUT_DIR when it is set. Parent directories are created.
inline std::filesystem::path resolve_output(const std::string& given, const std::string& fallback) {
    std::filesystem::path p = given.empty() ? fallback : given;
    if (p.is_relative()) {
        if (const char* dir = std::getenv(output_dir_env); dir && *dir) p = std::filesystem::path(dir) / p;
    }
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw invalid_input("cannot write '" + p.string() + "'");
    return out;
}

inline ControlOptions control_options(const SpecFile& spec) {
    ControlOptions o;
    if (spec.solver.engine) o.engine = *spec.solver.engine;
    if (spec.solver.lambda) o.lambda = *spec.solver.lambda;
    return o;
}

inline SymSolveOptions sym_options(const SpecFile& spec) {
    SymSolveOptions o;
    if (spec.solver.tol) o.tol = *spec.solver.tol;
    if (spec.solver.scale) o.scale = *spec.solver.scale;
    if (spec.solver.max_iters) o.max_iters = *spec.solver.max_iters;
    o.control = control_options(spec);
    return o;
}

inline GenSolveOptions gen_options(const SpecFile& spec) {
    GenSolveOptions o;
    if (spec.solver.tol) o.tol = *spec.solver.tol;
    if (spec.solver.alpha) o.alpha = *spec.solver.alpha;
    if (spec.solver.r0) o.r0 = *spec.solver.r0;
    if (spec.solver.max_iters) o.max_iters = *spec.solver.max_iters;
    o.control = control_options(spec);
    return o;
}

inline const GameSpec& require_symmetric(const SpecFile& spec, const char* cmd) {
    if (!spec.symmetric) throw invalid_input(std::string(cmd) + ": needs a [symmetric] spec");
    return *spec.symmetric;
}

/// Linear-game oracle when the symmetric spec is a linear game, else nullopt.
inline std::optional<LinearGameSolution> try_oracle(const SpecFile& spec) {
    if (!spec.symmetric) return std::nullopt;
    try {
        return solve_linear_game(linear_game_params_from(*spec.symmetric));
    } catch (const invalid_input&) {
        return std::nullopt;
    }
}

inline double relative_sup_error(const Vector& v, const Vector& exact) {
    return (v - exact).lpNorm<Eigen::Infinity>() / exact.lpNorm<Eigen::Infinity>();
}

/// Symmetric solve: payoff CSV (x, v, in_region, delta, res_qvis) and a
/// summary line.
inline int cmd_solve_sym(const std::string& spec_path, const std::string& out_path, std::optional<double> h,
                         std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const Grid grid = grid_from_spec(spec, h);
    const SymSolveReport rep =
        solve_symmetric(require_symmetric(spec, "solve-sym"), grid, spec.grid.mode, sym_options(spec));
    const auto path = resolve_output(out_path, "solve_sym.csv");
    auto out = open_output(path);
    CsvWriter csv(out, "solve-sym", {"x", "v", "in_region", "delta", "res_qvis"});
    for (int p = 0; p < static_cast<int>(grid.size()); ++p)
        csv.row({grid.x(p), rep.payoff[p], rep.region[p] ? 1.0 : 0.0, rep.impulse[p] * grid.step(),
                 rep.residual.by_node[p]});
    const double diff = rep.diff_history.empty() ? 0.0 : rep.diff_history[rep.iterations - 1];
    log << "solve-sym: iterations=" << rep.iterations << " iterations_run=" << rep.iterations_run
        << " diff=" << format_double(diff) << " max_res_qvis=" << format_double(rep.max_res_qvis)
        << " max_res_qvis_off_border=" << format_double(rep.residual.max_off_border)
        << " exact=" << (rep.converged_exactly ? 1 : 0) << " converged=" << (rep.converged ? 1 : 0);
    if (const auto thr = region_threshold(grid, rep.region)) log << " threshold=" << format_double(*thr);
    log << " output=" << path.string() << '\n';
    return rep.converged ? exit_converged : exit_not_converged;
}

/// Grid refinement study. Symmetric specs take a list of steps h (rows h,
/// sup_error_pct, iterations, max_res_qvis, ...); general specs take a list of
/// interval counts m and report both the zero and the single-player guess.
inline int cmd_refine(const std::string& spec_path, const std::vector<double>& h_list, const std::vector<int>& m_list,
                      const std::string& out_path, std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const auto path = resolve_output(out_path, "refine.csv");
    bool all_converged = true;
    if (spec.is_symmetric()) {
        if (h_list.empty()) throw invalid_input("refine: a symmetric spec needs a non-empty --h list");
        const auto oracle = try_oracle(spec);
        auto out = open_output(path);
        CsvWriter csv(out, "refine-sym",
                      {"h", "sup_error_pct", "iterations", "max_res_qvis", "max_res_qvis_off_border", "converged"});
        for (double h : h_list) {
            const Grid grid = grid_from_spec(spec, h);
            const SymSolveReport rep = solve_symmetric(*spec.symmetric, grid, spec.grid.mode, sym_options(spec));
            all_converged = all_converged && rep.converged;
            std::string err;
            if (oracle) err = format_double(100.0 * relative_sup_error(rep.payoff, sample_on_grid(*oracle, grid, 0)));
            csv.text_row({format_double(h), err, std::to_string(rep.iterations), format_double(rep.max_res_qvis),
                          format_double(rep.residual.max_off_border), rep.converged ? "1" : "0"});
            log << "refine: h=" << format_double(h) << " iterations=" << rep.iterations
                << " max_res_qvis=" << format_double(rep.max_res_qvis);
            if (!err.empty()) log << " sup_error_pct=" << err;
            log << '\n';
        }
    } else {
        if (m_list.empty()) throw invalid_input("refine: a two-player spec needs a non-empty --m list");
        const TwoPlayerSpec& g2 = *spec.two_player;
        const GenSolveOptions opt = gen_options(spec);
        auto out = open_output(path);
        CsvWriter csv(out, "refine-gen", {"m", "R_infinity", "its_zero", "converged_zero", "its_single",
                                           "converged_single"});
        const bool single_ok = g2.players[0].payoff.bounded_above() && g2.players[1].payoff.bounded_above();
        for (int m : m_list) {
            const GeneralGame game(g2, grid_from_spec(spec, std::nullopt, m));
            const GenSolveReport zero = solve_general(game, opt);
            all_converged = all_converged && zero.converged;
            std::string its_single, conv_single;
            if (single_ok) {
                const GenSolveReport warm = solve_general_single_player_start(game, opt);
                all_converged = all_converged && warm.converged;
                its_single = std::to_string(warm.iterations);
                conv_single = warm.converged ? "1" : "0";
            }
            csv.text_row({std::to_string(m), format_double(zero.R_infinity), std::to_string(zero.iterations),
                          zero.converged ? "1" : "0", its_single, conv_single});
            log << "refine: m=" << m << " R_infinity=" << format_double(zero.R_infinity)
                << " its_zero=" << zero.iterations;
            if (single_ok) log << " its_single=" << its_single;
            log << '\n';
        }
    }
    log << "refine: output=" << path.string() << '\n';
    return all_converged ? exit_converged : exit_not_converged;
}

/// Closed-form linear game: prints the constants and writes x, V1, V2.
inline int cmd_oracle(const std::string& spec_path, std::optional<double> h, const std::string& out_path,
                      std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const LinearGameSolution sol = solve_linear_game(linear_game_params_from(require_symmetric(spec, "oracle")));
    log << "oracle: x_bar1=" << format_double(sol.x_bar1) << " x_star1=" << format_double(sol.x_star1)
        << " x_bar2=" << format_double(sol.x_bar2) << " x_star2=" << format_double(sol.x_star2)
        << " xi=" << format_double(sol.xi) << " theta=" << format_double(sol.theta)
        << " eta=" << format_double(sol.eta) << " gamma=" << format_double(sol.gamma)
        << " a1=" << format_double(sol.a1) << " a2=" << format_double(sol.a2) << '\n';
    if (spec.grid.x_max) {
        const Grid grid = grid_from_spec(spec, h);
        const auto path = resolve_output(out_path, "oracle.csv");
        auto out = open_output(path);
        CsvWriter csv(out, "oracle", {"x", "V1", "V2"});
        for (int p = 0; p < static_cast<int>(grid.size()); ++p)
            csv.row({grid.x(p), sol.v1(grid.x(p)), sol.v2(grid.x(p))});
        log << "oracle: output=" << path.string() << '\n';
    }
    return exit_converged;
}

/// General two-player solve: payoff CSV, summary and optionally the
/// extracted threshold strategies.
inline int cmd_solve_gen(const std::string& spec_path, std::optional<int> m, const std::string& guess_override,
                         const std::string& out_path, const std::string& strategy_out, std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const TwoPlayerSpec g2 = spec.as_two_player();
    const Grid grid = grid_from_spec(spec, std::nullopt, m);
    const GeneralGame game(g2, grid);
    const GenSolveOptions opt = gen_options(spec);
    const std::string guess = guess_override.empty() ? spec.solver.guess : guess_override;
    GenSolveReport rep;
    if (guess == "zero") rep = solve_general(game, opt);
    else if (guess == "single") rep = solve_general_single_player_start(game, opt);
    else if (guess == "capped") rep = solve_general(game, capped_game_guess(g2, grid, spec.solver.cap, opt), opt);
    else throw invalid_input("solve-gen: guess must be zero, single or capped");

    const auto path = resolve_output(out_path, "solve_gen.csv");
    auto out = open_output(path);
    CsvWriter csv(out, "solve-gen", {"x", "v1", "v2", "in_region1", "in_region2", "delta1", "delta2", "residual"});
    for (int p = 0; p < static_cast<int>(grid.size()); ++p)
        csv.row({grid.x(p), rep.payoffs[0][p], rep.payoffs[1][p], rep.tol_regions[0][p] ? 1.0 : 0.0,
                 rep.tol_regions[1][p] ? 1.0 : 0.0, rep.impulses[0][p] * grid.step(),
                 rep.impulses[1][p] * grid.step(), rep.residual_by_node[p]});
    log << "solve-gen: iterations=" << rep.iterations << " R_infinity=" << format_double(rep.R_infinity)
        << " converged=" << (rep.converged ? 1 : 0) << " residual_increased=" << (rep.residual_increased ? 1 : 0);
    for (int i = 0; i < 2; ++i)
        for (const auto& iv : region_intervals(grid, rep.tol_regions[i]))
            log << " region" << i + 1 << "=[" << format_double(iv.lo) << "," << format_double(iv.hi) << "]";
    log << " output=" << path.string() << '\n';
    if (!strategy_out.empty()) {
        const std::array<ThresholdStrategy, 2> phi{threshold_strategy(grid, rep.tol_regions[0], rep.impulses[0]),
                                                   threshold_strategy(grid, rep.tol_regions[1], rep.impulses[1])};
        const auto spath = resolve_output(strategy_out, "strategy.csv");
        auto sout = open_output(spath);
        write_strategy_csv(sout, phi);
        log << "solve-gen: strategy=" << spath.string() << '\n';
    }
    return rep.converged ? exit_converged : exit_not_converged;
}

/// Single-player impulse control on the whole grid: the symmetric player,
/// or player `player` (1 or 2) of a two-player spec with the opponent removed.
inline int cmd_control(const std::string& spec_path, std::optional<double> h, std::optional<int> m, int player,
                       const std::string& out_path, std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const Grid grid = grid_from_spec(spec, h, m);
    const int n = static_cast<int>(grid.size());
    DiscreteOperators ops;
    CostSpec cost;
    ImpulseMode mode = spec.grid.mode;
    if (spec.symmetric) {
        ops = build_generator(*spec.symmetric, grid);
        cost = spec.symmetric->player.cost;
    } else {
        if (player != 1 && player != 2) throw invalid_input("control: --player must be 1 or 2");
        ops = build_generator(*spec.two_player, player - 1, grid);
        cost = spec.two_player->players[player - 1].cost;
        mode = ImpulseMode::AllTargets;
    }
    const ImpulseSets sets(grid, mode);
    const RestrictedQVI rq(ops, grid, sets, cost, Vector::Zero(n), Region(n, true),
                           spec.symmetric ? ArgmaxPolicy::Largest : ArgmaxPolicy::Smallest);
    ControlOptions copt = control_options(spec);
    if (spec.solver.max_iters) copt.max_iters = *spec.solver.max_iters;
    ControlSolution sol;
    try {
        sol = solve_control(rq, copt);
    } catch (const not_converged& e) {
        log << "control: not converged: " << e.what() << '\n';
        return exit_not_converged;
    }
    const Vector res = rq.residual(rq.restrict_vector(sol.payoff), copt.lambda);
    const auto path = resolve_output(out_path, "control.csv");
    auto out = open_output(path);
    CsvWriter csv(out, "control", {"x", "v", "in_region", "delta", "residual"});
    for (int p = 0; p < n; ++p)
        csv.row({grid.x(p), sol.payoff[p], sol.region[p] ? 1.0 : 0.0, sol.impulse[p] * grid.step(), res[p]});
    log << "control: iterations=" << sol.iterations << " exact=" << (sol.exact ? 1 : 0)
        << " stagnated=" << (sol.stagnated ? 1 : 0) << " max_residual=" << format_double(res.maxCoeff())
        << " output=" << path.string() << '\n';
    return sol.stagnated ? exit_not_converged : exit_converged;
}

struct SimulateArgs {
    std::vector<double> x0{0.0};
    int n_paths = 200;
    double dt = 1e-3;
    double horizon = 1000.0;
    std::uint64_t seed = 1;
    double perturb = 0.0;
    /// Deviating player (1 or 2) when perturbing.
    int perturb_player = 1;
    std::uint64_t perturb_seed = 7;
    /// Number of perturbed strategies to draw.
    int perturb_runs = 1;
    /// Optional CSV dump of one path from the first x0.
    std::string path_out;
    int path_stride = 100;
};

/// Monte Carlo estimate of both players' payoffs under the strategies in
/// `strategy_path`; with a perturbation magnitude, the deviating player's
/// strategy is redrawn `perturb_runs` times.
inline int cmd_simulate(const std::string& spec_path, const std::string& strategy_path, const SimulateArgs& args,
                        const std::string& out_path, std::ostream& log) {
    const SpecFile spec = load_spec(spec_path);
    const TwoPlayerSpec g2 = spec.as_two_player();
    std::ifstream sin(strategy_path);
    if (!sin) throw invalid_input("cannot open strategy file '" + strategy_path + "'");
    const auto phi = read_strategy_csv(sin);
    if (args.perturb < 0.0) throw invalid_input("simulate: --perturb must be nonnegative");
    if (args.perturb_player != 1 && args.perturb_player != 2)
        throw invalid_input("simulate: --perturb-player must be 1 or 2");
    if (args.x0.empty()) throw invalid_input("simulate: at least one x0 is required");

    std::vector<std::array<ThresholdStrategy, 2>> variants;
    if (args.perturb == 0.0) {
        variants.push_back(phi);
    } else {
        std::mt19937_64 rng(args.perturb_seed);
        for (int r = 0; r < args.perturb_runs; ++r) {
            auto v = phi;
            v[args.perturb_player - 1] = perturb_strategy(phi[args.perturb_player - 1], args.perturb, rng);
            variants.push_back(v);
        }
    }

    const auto path = resolve_output(out_path, "simulate.csv");
    auto out = open_output(path);
    CsvWriter csv(out, "simulate", {"run", "x0", "threshold1", "target1", "threshold2", "target2", "J1", "se1", "J2",
                                    "se2", "n_paths", "degenerate"});
    bool any_degenerate = false;
    for (std::size_t r = 0; r < variants.size(); ++r) {
        for (double x0 : args.x0) {
            SimConfig cfg;
            cfg.x0 = x0;
            cfg.n_paths = args.n_paths;
            cfg.dt = args.dt;
            cfg.horizon = args.horizon;
            cfg.seed = args.seed;
            const PayoffEstimate est = estimate_payoff(g2, variants[r], cfg);
            any_degenerate = any_degenerate || est.degenerate;
            const auto& v = variants[r];
            csv.row({static_cast<double>(r), x0, v[0].threshold, v[0].target, v[1].threshold, v[1].target,
                     est.mean[0], est.std_error[0], est.mean[1], est.std_error[1], static_cast<double>(est.n_paths),
                     est.degenerate ? 1.0 : 0.0});
            log << "simulate: run=" << r << " x0=" << format_double(x0) << " J1=" << format_double(est.mean[0])
                << " se1=" << format_double(est.std_error[0]) << " J2=" << format_double(est.mean[1])
                << " se2=" << format_double(est.std_error[1]) << (est.degenerate ? " degenerate" : "") << '\n';
        }
    }
    if (!args.path_out.empty()) {
        SimConfig cfg;
        cfg.x0 = args.x0.front();
        cfg.dt = args.dt;
        cfg.horizon = args.horizon;
        cfg.seed = args.seed;
        cfg.record_stride = args.path_stride;
        auto rng = path_stream(cfg.seed, 0);
        const PathRecord rec = simulate_path(g2, variants.front(), cfg, rng);
        const auto ppath = resolve_output(args.path_out, "path.csv");
        auto pout = open_output(ppath);
        write_path_csv(pout, rec);
        log << "simulate: path=" << ppath.string() << '\n';
    }
    log << "simulate: output=" << path.string() << '\n';
    return any_degenerate ? exit_not_converged : exit_converged;
}

}  // namespace qvi::cli
