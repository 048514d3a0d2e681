#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qvi/commands.hpp"

namespace {

template <class T>
std::optional<T> opt_if(const CLI::Option* opt, const T& value) {
    return opt->count() ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace qvi::cli;
    CLI::App app{"Solvers for discrete QVI systems of one-dimensional stochastic impulse games"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);
    int status = exit_converged;

    std::string spec_path, out_path;

    auto* sym = app.add_subcommand("solve-sym", "Solve a symmetric game");
    double sym_h = 0.0;
    sym->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    sym->add_option("-o,--out", out_path, "Payoff CSV (default solve_sym.csv)");
    auto* sym_h_opt = sym->add_option("--h", sym_h, "Grid step, overrides the spec");
    sym->callback([&] { status = cmd_solve_sym(spec_path, out_path, opt_if(sym_h_opt, sym_h), std::cout); });

    auto* refine = app.add_subcommand("refine", "Grid refinement study");
    std::vector<double> h_list;
    std::vector<int> m_list;
    refine->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    refine->add_option("--h", h_list, "Grid steps (symmetric specs)")->delimiter(',');
    refine->add_option("--m", m_list, "Numbers of grid intervals (two-player specs)")->delimiter(',');
    refine->add_option("-o,--out", out_path, "Refinement CSV (default refine.csv)");
    refine->callback([&] { status = cmd_refine(spec_path, h_list, m_list, out_path, std::cout); });

    auto* oracle = app.add_subcommand("oracle", "Closed-form solution of the linear game");
    double oracle_h = 0.0;
    oracle->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    oracle->add_option("-o,--out", out_path, "Oracle CSV (default oracle.csv)");
    auto* oracle_h_opt = oracle->add_option("--h", oracle_h, "Grid step, overrides the spec");
    oracle->callback([&] { status = cmd_oracle(spec_path, opt_if(oracle_h_opt, oracle_h), out_path, std::cout); });

    auto* gen = app.add_subcommand("solve-gen", "Solve a general two-player game");
    int gen_m = 0;
    std::string guess, strategy_out;
    gen->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    auto* gen_m_opt = gen->add_option("--m", gen_m, "Number of grid intervals, overrides the spec");
    gen->add_option("--guess", guess, "Initial guess: zero, single or capped")
        ->check(CLI::IsMember({"zero", "single", "capped"}));
    gen->add_option("-o,--out", out_path, "Payoff CSV (default solve_gen.csv)");
    gen->add_option("--strategy-out", strategy_out, "Write the extracted threshold strategies here");
    gen->callback(
        [&] { status = cmd_solve_gen(spec_path, opt_if(gen_m_opt, gen_m), guess, out_path, strategy_out, std::cout); });

    auto* control = app.add_subcommand("control", "Single-player impulse control on the whole grid");
    double control_h = 0.0;
    int control_m = 0, player = 1;
    control->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    auto* control_h_opt = control->add_option("--h", control_h, "Grid step, overrides the spec");
    auto* control_m_opt = control->add_option("--m", control_m, "Number of grid intervals, overrides the spec");
    control->add_option("--player", player, "Player of a two-player spec (1 or 2)")->check(CLI::Range(1, 2));
    control->add_option("-o,--out", out_path, "Payoff CSV (default control.csv)");
    control->callback([&] {
        status = cmd_control(spec_path, opt_if(control_h_opt, control_h), opt_if(control_m_opt, control_m), player,
                             out_path, std::cout);
    });

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo payoffs of threshold strategies");
    std::string strategy_path;
    SimulateArgs sim;
    simulate->add_option("spec", spec_path, "Game spec file")->required()->check(CLI::ExistingFile);
    simulate->add_option("strategy", strategy_path, "Strategy CSV (from solve-gen --strategy-out)")
        ->required()
        ->check(CLI::ExistingFile);
    simulate->add_option("--x0", sim.x0, "Initial states")->delimiter(',');
    simulate->add_option("--paths", sim.n_paths, "Paths per estimate")->check(CLI::PositiveNumber);
    simulate->add_option("--dt", sim.dt, "Euler time step")->check(CLI::PositiveNumber);
    simulate->add_option("--horizon", sim.horizon, "Time horizon")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "Seed of the path streams");
    simulate->add_option("--perturb", sim.perturb, "Perturbation magnitude of the deviating player")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--perturb-player", sim.perturb_player, "Deviating player (1 or 2)")->check(CLI::Range(1, 2));
    simulate->add_option("--perturb-seed", sim.perturb_seed, "Seed of the perturbation draws");
    simulate->add_option("--perturb-runs", sim.perturb_runs, "Number of perturbed strategies")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--path-out", sim.path_out, "Dump one sampled path from the first x0");
    simulate->add_option("--path-stride", sim.path_stride, "Keep every n-th step in the path dump")
        ->check(CLI::PositiveNumber);
    simulate->add_option("-o,--out", out_path, "Estimates CSV (default simulate.csv)");
    simulate->callback([&] { status = cmd_simulate(spec_path, strategy_path, sim, out_path, std::cout); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_error;
    }
    return status;
}
