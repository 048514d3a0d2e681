#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "qvi/commands.hpp"

using namespace qvi;
namespace fs = std::filesystem;

namespace {

const std::string games_dir = QVI_GAMES_DIR;

std::string game(const std::string& name) { return games_dir + "/" + name; }

/// Fresh scratch directory per test.
class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("qvi_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    static CsvTable read(const std::string& p) {
        std::ifstream in(p);
        return read_csv(in);
    }

    fs::path dir_;
};

std::string expect_spec_error(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_spec(in, "game.ini");
    } catch (const spec_error& e) {
        return e.what();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return {};
}

const char* symmetric_text = R"(# comment line
[dynamics]
sigma_params = 0.15   ; trailing comment

[symmetric]
rho = 0.02
payoff_family = poly
payoff_params = 3 1
cost = 100 15
gain = 0 15

[grid]
x_max = 4
h = 0.5
)";

int run_binary(const std::string& args) {
    const int status = std::system((std::string(QVI_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(SpecFile, ParsesASymmetricGame) {
    std::istringstream in(symmetric_text);
    const SpecFile s = parse_spec(in);
    ASSERT_TRUE(s.is_symmetric());
    EXPECT_EQ(s.symmetric->player.cost.c0, 100.0);
    EXPECT_EQ(s.symmetric->player.cost.c1, 15.0);
    EXPECT_EQ(s.symmetric->player.gain.g1, 15.0);
    EXPECT_EQ(s.symmetric->player.payoff(2.0), 5.0);
    EXPECT_EQ(s.grid.mode, ImpulseMode::SymmetryConstrained);
    EXPECT_EQ(grid_from_spec(s).size(), 17u);
    EXPECT_EQ(grid_from_spec(s, 1.0).size(), 9u);
    EXPECT_EQ(grid_from_spec(s, std::nullopt, 10).size(), 11u);
    EXPECT_THROW(grid_from_spec(s, std::nullopt, 7), invalid_input);
    EXPECT_THROW(grid_from_spec(s, 0.3), invalid_input);
}

TEST(SpecFile, ParsesTheShippedGames) {
    for (const char* name : {"table31_linear.ini", "cash.ini", "parabolic.ini", "capped.ini", "linear_general.ini"}) {
        const SpecFile s = load_spec(game(name));
        EXPECT_NO_THROW(grid_from_spec(s)) << name;
    }
    const SpecFile p = load_spec(game("parabolic.ini"));
    ASSERT_FALSE(p.is_symmetric());
    EXPECT_EQ(p.grid.mode, ImpulseMode::AllTargets);
    EXPECT_EQ(*p.grid.m, 1000);
}

TEST(SpecFile, ErrorsCarryTheLineNumber) {
    EXPECT_EQ(expect_spec_error("[dynamics]\nsigma_params = 1\nfoo = 2\n"),
              "game.ini:3: unknown key 'foo' in [dynamics]");
    EXPECT_EQ(expect_spec_error("\n[players]\n"), "game.ini:2: unknown section [players]");
    EXPECT_EQ(expect_spec_error("[dynamics]\nsigma_params = 1\nsigma_params = 2\n"),
              "game.ini:3: duplicate key 'sigma_params'");
    EXPECT_EQ(expect_spec_error("sigma_params = 1\n"), "game.ini:1: entry outside of any section");
    EXPECT_EQ(expect_spec_error("[dynamics\n"), "game.ini:1: malformed section header");
    const std::string bad_number = std::string(symmetric_text) + "[solver]\ntol = 1e-8x\n";
    EXPECT_NE(expect_spec_error(bad_number).find("game.ini:16:"), std::string::npos);
    std::string bad_rho = symmetric_text;
    bad_rho.replace(bad_rho.find("rho = 0.02"), 10, "rho = abc");
    EXPECT_NE(expect_spec_error(bad_rho).find("game.ini:6:"), std::string::npos);
    EXPECT_NE(expect_spec_error("[dynamics]\nsigma_params = 1\n").find("[symmetric]"), std::string::npos);
}

TEST(Csv, DoublesRoundTripExactly) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const double x = u(rng) * std::pow(10.0, static_cast<double>(k % 40) - 20.0);
        EXPECT_EQ(parse_double(format_double(x)), x);
    }
    EXPECT_THROW(parse_double("1.5x"), invalid_input);
    EXPECT_THROW(parse_double(""), invalid_input);
    EXPECT_THROW(parse_integer("2.0"), invalid_input);
}

TEST(Csv, TablesCarryKindAndColumns) {
    std::stringstream ss;
    {
        CsvWriter w(ss, "demo", {"a", "b"});
        w.row({1.0, 0.1});
        w.text_row({"x", ""});
    }
    const CsvTable t = read_csv(ss);
    EXPECT_EQ(t.kind, "demo");
    EXPECT_EQ(t.version, 1);
    EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.number(0, "b"), 0.1);
    EXPECT_EQ(t.rows[1][0], "x");
    EXPECT_THROW(t.column("c"), invalid_input);
}

TEST_F(CliTest, SolveSymWritesThePayoffTable) {
    std::ostringstream log;
    EXPECT_EQ(cli::cmd_solve_sym(game("table31_linear.ini"), path("v.csv"), 1.0, log), cli::exit_converged);
    const CsvTable t = read(path("v.csv"));
    EXPECT_EQ(t.kind, "solve-sym");
    EXPECT_EQ(t.rows.size(), 9u);
    EXPECT_NE(log.str().find("iterations=17"), std::string::npos);
    EXPECT_NE(log.str().find("exact=1"), std::string::npos);
}

TEST_F(CliTest, RefineAndOracle) {
    std::ostringstream log;
    EXPECT_EQ(cli::cmd_refine(game("table31_linear.ini"), {1.0, 0.5}, {}, path("r.csv"), log), cli::exit_converged);
    const CsvTable t = read(path("r.csv"));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.number(0, "iterations"), 17.0);
    EXPECT_NEAR(t.number(1, "sup_error_pct"), 8.33, 0.01);
    EXPECT_THROW(cli::cmd_refine(game("table31_linear.ini"), {}, {}, path("r.csv"), log), invalid_input);

    EXPECT_EQ(cli::cmd_oracle(game("table31_linear.ini"), 1.0, path("o.csv"), log), cli::exit_converged);
    EXPECT_NE(log.str().find("x_bar1=-2.8237953421536"), std::string::npos);
    const CsvTable o = read(path("o.csv"));
    EXPECT_EQ(o.rows.size(), 9u);
    EXPECT_THROW(cli::cmd_oracle(game("parabolic.ini"), std::nullopt, path("o.csv"), log), invalid_input);
}

TEST_F(CliTest, SolveGenThenSimulate) {
    std::ostringstream log;
    EXPECT_EQ(cli::cmd_solve_gen(game("parabolic.ini"), 100, "", path("g.csv"), path("s.csv"), log),
              cli::exit_converged);
    const CsvTable g = read(path("g.csv"));
    EXPECT_EQ(g.rows.size(), 101u);
    std::ifstream sin(path("s.csv"));
    const auto phi = read_strategy_csv(sin);
    EXPECT_EQ(phi[0].side, ThresholdStrategy::Side::Above);
    EXPECT_EQ(phi[1].side, ThresholdStrategy::Side::Below);

    cli::SimulateArgs args;
    args.x0 = {0.0, -1.0};
    args.n_paths = 8;
    args.dt = 1e-2;
    args.horizon = 5.0;
    args.path_out = path("p.csv");
    args.path_stride = 10;
    EXPECT_EQ(cli::cmd_simulate(game("parabolic.ini"), path("s.csv"), args, path("m.csv"), log), cli::exit_converged);
    const CsvTable m = read(path("m.csv"));
    ASSERT_EQ(m.rows.size(), 2u);
    EXPECT_EQ(m.number(1, "x0"), -1.0);
    EXPECT_EQ(read(path("p.csv")).kind, "path");

    args.perturb = 0.25;
    args.perturb_runs = 3;
    args.x0 = {0.0};
    args.path_out.clear();
    EXPECT_EQ(cli::cmd_simulate(game("parabolic.ini"), path("s.csv"), args, path("m.csv"), log), cli::exit_converged);
    EXPECT_EQ(read(path("m.csv")).rows.size(), 3u);
}

TEST_F(CliTest, DegenerateStrategiesExitWithTwo) {
    const std::string strat = write("alt.csv",
                                    "# qvi-strategy v1\nplayer,side,threshold,target,slope\n"
                                    "1,below,1,2,-1\n2,above,1.5,0,-1\n");
    cli::SimulateArgs args;
    args.n_paths = 2;
    args.dt = 1e-2;
    args.horizon = 0.1;
    std::ostringstream log;
    EXPECT_EQ(cli::cmd_simulate(game("parabolic.ini"), strat, args, path("m.csv"), log), cli::exit_not_converged);
    EXPECT_NE(log.str().find("degenerate"), std::string::npos);
}

TEST_F(CliTest, ControlCommand) {
    std::ostringstream log;
    EXPECT_EQ(cli::cmd_control(game("parabolic.ini"), std::nullopt, 60, 2, path("c.csv"), log), cli::exit_converged);
    EXPECT_EQ(read(path("c.csv")).rows.size(), 61u);
    EXPECT_THROW(cli::cmd_control(game("parabolic.ini"), std::nullopt, 60, 3, path("c.csv"), log), invalid_input);
}

TEST_F(CliTest, RelativeOutputsFollowTheEnvironment) {
    ::setenv(cli::output_dir_env, dir_.c_str(), 1);
    const auto p = cli::resolve_output("sub/out.csv", "x.csv");
    ::unsetenv(cli::output_dir_env);
    EXPECT_EQ(p, dir_ / "sub" / "out.csv");
    EXPECT_TRUE(fs::is_directory(dir_ / "sub"));
    EXPECT_EQ(cli::resolve_output("", "x.csv"), fs::path("x.csv"));
    EXPECT_EQ(cli::resolve_output("/tmp/abs.csv", "x.csv"), fs::path("/tmp/abs.csv"));
}

TEST_F(CliTest, BinaryExitCodes) {
    EXPECT_EQ(run_binary("--help"), 0);
    EXPECT_EQ(run_binary(""), cli::exit_error);
    EXPECT_EQ(run_binary("solve-sym /nonexistent.ini"), cli::exit_error);
    const std::string bad = write("bad.ini", "[dynamics]\nfoo = 1\n");
    EXPECT_EQ(run_binary("solve-sym " + bad), cli::exit_error);
    EXPECT_EQ(run_binary("solve-sym " + game("table31_linear.ini") + " --h 1 -o " + path("v.csv")),
              cli::exit_converged);
    EXPECT_TRUE(fs::exists(path("v.csv")));
    EXPECT_EQ(run_binary("refine " + game("table31_linear.ini") + " -o " + path("r.csv")), cli::exit_error);
    // A symmetric solve capped at one iteration does not converge.
    std::ifstream in(game("table31_linear.ini"));
    std::stringstream text;
    text << in.rdbuf();
    std::string capped = text.str();
    capped.replace(capped.find("max_iters = 500"), 15, "max_iters = 1");
    const std::string one = write("one.ini", capped);
    EXPECT_EQ(run_binary("solve-sym " + one + " --h 1 -o " + path("w.csv")), cli::exit_not_converged);
    const std::string env = "QVI_OUTPUT_DIR=" + dir_.string() + " ";
    const int status = std::system((env + QVI_CLI_PATH + " oracle " + game("table31_linear.ini") +
                                    " --h 1 -o env.csv > /dev/null 2>&1")
                                       .c_str());
    EXPECT_EQ(WEXITSTATUS(status), 0);
    EXPECT_TRUE(fs::exists(dir_ / "env.csv"));
}
