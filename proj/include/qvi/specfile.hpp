#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qvi/control.hpp"
#include "qvi/csv.hpp"
#include "qvi/error.hpp"
#include "qvi/game.hpp"
#include "qvi/grid.hpp"

namespace qvi {

/// Spec-file diagnostic carrying "<file>:<line>: " in its message.
class spec_error : public invalid_input {
public:
    using invalid_input::invalid_input;
};

struct GridSettings {
    std::optional<double> x_max;
    std::optional<int> n_half;
    std::optional<double> h;
    /// Number of grid intervals (general games); must be even.
    std::optional<int> m;
    ImpulseMode mode = ImpulseMode::SymmetryConstrained;
};

struct SolverSettings {
    std::optional<ControlEngine> engine;
    std::optional<double> tol;
    std::optional<double> scale;
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<double> r0;
    std::optional<int> max_iters;
    /// zero, single or capped (general games).
    std::string guess = "zero";
    double cap = 5.0;
};

/// Parsed game-spec file: either a symmetric game or a general two-player one.
struct SpecFile {
    std::string source;
    std::optional<GameSpec> symmetric;
    std::optional<TwoPlayerSpec> two_player;
    GridSettings grid;
    SolverSettings solver;

    bool is_symmetric() const { return symmetric.has_value(); }

    /// Two-player view of the game (reflected opponent for symmetric specs).
    TwoPlayerSpec as_two_player() const { return symmetric ? to_two_player(*symmetric) : *two_player; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

struct Entry {
    std::string value;
    int line;
};

using Section = std::map<std::string, Entry>;

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"dynamics", {"mu_family", "mu_params", "sigma_family", "sigma_params"}},
        {"symmetric", {"rho", "payoff_family", "payoff_params", "cost", "gain"}},
        {"player1", {"rho", "payoff_family", "payoff_params", "cost", "gain"}},
        {"player2", {"rho", "payoff_family", "payoff_params", "cost", "gain"}},
        {"grid", {"x_max", "n_half", "h", "m", "impulse_mode"}},
        {"solver", {"engine", "tol", "scale", "lambda", "alpha", "r0", "max_iters", "guess", "cap"}},
        {"boundary", {"lbc", "rbc", "lbc1", "rbc1", "lbc2", "rbc2"}},
    };
    return keys;
}

class SpecReader {
public:
    SpecReader(std::map<std::string, Section> sections, std::string source)
        : sections_(std::move(sections)), source_(std::move(source)) {}

    bool has(const std::string& sec) const { return sections_.count(sec) > 0; }
    bool has(const std::string& sec, const std::string& key) const {
        auto it = sections_.find(sec);
        return it != sections_.end() && it->second.count(key) > 0;
    }

    [[noreturn]] void fail(const std::string& sec, const std::string& key, const std::string& msg) const {
        int line = 0;
        if (has(sec, key)) line = sections_.at(sec).at(key).line;
        throw spec_error(source_ + ":" + std::to_string(line) + ": [" + sec + "] " + key + ": " + msg);
    }

    const std::string& raw(const std::string& sec, const std::string& key) const {
        if (!has(sec, key)) throw spec_error(source_ + ": [" + sec + "] missing required key '" + key + "'");
        return sections_.at(sec).at(key).value;
    }

    std::vector<double> numbers(const std::string& sec, const std::string& key) const {
        std::vector<double> out;
        try {
            for (const auto& w : words(raw(sec, key))) out.push_back(parse_double(w));
        } catch (const spec_error&) {
            throw;
        } catch (const invalid_input& e) {
            fail(sec, key, e.what());
        }
        if (out.empty()) fail(sec, key, "expected at least one number");
        return out;
    }

    double number(const std::string& sec, const std::string& key) const {
        const auto v = numbers(sec, key);
        if (v.size() != 1) fail(sec, key, "expected a single number");
        return v[0];
    }

    std::optional<double> opt_number(const std::string& sec, const std::string& key) const {
        if (!has(sec, key)) return std::nullopt;
        return number(sec, key);
    }

    std::optional<int> opt_integer(const std::string& sec, const std::string& key) const {
        if (!has(sec, key)) return std::nullopt;
        const double v = number(sec, key);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(sec, key, "expected an integer");
        return static_cast<int>(v);
    }

    std::string word(const std::string& sec, const std::string& key) const {
        const auto w = words(raw(sec, key));
        if (w.size() != 1) fail(sec, key, "expected a single word");
        return w[0];
    }

    Function function(const std::string& sec, const std::string& prefix) const {
        const std::string fam = has(sec, prefix + "_family") ? word(sec, prefix + "_family") : "poly";
        try {
            return Function::from_params(fam, numbers(sec, prefix + "_params"));
        } catch (const spec_error&) {
            throw;
        } catch (const invalid_input& e) {
            fail(sec, prefix + "_params", e.what());
        }
    }

    PlayerSpec player(const std::string& sec) const {
        PlayerSpec p;
        p.rho = number(sec, "rho");
        p.payoff = function(sec, "payoff");
        const auto c = numbers(sec, "cost");
        if (c.size() > 4) fail(sec, "cost", "expected c0 [c1 [c2 [cr]]]");
        p.cost.c0 = c[0];
        p.cost.c1 = c.size() > 1 ? c[1] : 0.0;
        p.cost.c2 = c.size() > 2 ? c[2] : 0.0;
        p.cost.cr = c.size() > 3 ? c[3] : 0.0;
        if (has(sec, "gain")) {
            const auto g = numbers(sec, "gain");
            if (g.size() > 2) fail(sec, "gain", "expected g0 [g1]");
            p.gain.g0 = g[0];
            p.gain.g1 = g.size() > 1 ? g[1] : 0.0;
        }
        return p;
    }

private:
    std::map<std::string, Section> sections_;
    std::string source_;
};

inline ImpulseMode parse_impulse_mode(const std::string& s) {
    if (s == "constrained") return ImpulseMode::SymmetryConstrained;
    if (s == "unconstrained") return ImpulseMode::Unconstrained;
    if (s == "all") return ImpulseMode::AllTargets;
    throw invalid_input("expected constrained, unconstrained or all");
}

}  // namespace detail

/// Parses the INI-like spec format:
///
///   [section]
///   key = value    # comment
///
/// Unknown sections, unknown keys and duplicates are rejected with the line
/// number of the offending entry.
inline SpecFile parse_spec(std::istream& is, const std::string& source = "<spec>") {
    using detail::trim;
    std::map<std::string, detail::Section> sections;
    std::string line, current;
    int lineno = 0;
    const auto& allowed = detail::allowed_keys();
    auto fail = [&](const std::string& msg) { throw spec_error(source + ":" + std::to_string(lineno) + ": " + msg); };

    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            current = trim(line.substr(1, line.size() - 2));
            if (!allowed.count(current)) fail("unknown section [" + current + "]");
            if (sections.count(current)) fail("duplicate section [" + current + "]");
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        if (current.empty()) fail("entry outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!allowed.at(current).count(key)) fail("unknown key '" + key + "' in [" + current + "]");
        if (sections[current].count(key)) fail("duplicate key '" + key + "'");
        if (value.empty()) fail("empty value for '" + key + "'");
        sections[current][key] = {value, lineno};
    }

    const detail::SpecReader rd(sections, source);
    SpecFile spec;
    spec.source = source;
    const bool sym = rd.has("symmetric");
    const bool p1 = rd.has("player1"), p2 = rd.has("player2");
    if (sym == (p1 || p2) || p1 != p2)
        throw spec_error(source + ": expected either [symmetric] or both [player1] and [player2]");

    Dynamics dyn;
    if (!rd.has("dynamics")) throw spec_error(source + ": missing section [dynamics]");
    dyn.mu = rd.has("dynamics", "mu_params") ? rd.function("dynamics", "mu") : Function::constant(0.0);
    dyn.sigma = rd.function("dynamics", "sigma");

    if (sym) {
        GameSpec g;
        g.dynamics = dyn;
        g.player = rd.player("symmetric");
        for (const char* k : {"lbc1", "rbc1", "lbc2", "rbc2"})
            if (rd.has("boundary", k)) rd.fail("boundary", k, "per-player slopes need a two-player spec");
        g.player.lbc = rd.opt_number("boundary", "lbc");
        g.player.rbc = rd.opt_number("boundary", "rbc");
        spec.symmetric = g;
    } else {
        TwoPlayerSpec g;
        g.dynamics = dyn;
        g.players[0] = rd.player("player1");
        g.players[1] = rd.player("player2");
        for (const char* k : {"lbc", "rbc"})
            if (rd.has("boundary", k)) rd.fail("boundary", k, "use lbc1/rbc1/lbc2/rbc2 in a two-player spec");
        g.players[0].lbc = rd.opt_number("boundary", "lbc1");
        g.players[0].rbc = rd.opt_number("boundary", "rbc1");
        g.players[1].lbc = rd.opt_number("boundary", "lbc2");
        g.players[1].rbc = rd.opt_number("boundary", "rbc2");
        spec.two_player = g;
    }

    spec.grid.x_max = rd.opt_number("grid", "x_max");
    spec.grid.n_half = rd.opt_integer("grid", "n_half");
    spec.grid.h = rd.opt_number("grid", "h");
    spec.grid.m = rd.opt_integer("grid", "m");
    spec.grid.mode = sym ? ImpulseMode::SymmetryConstrained : ImpulseMode::AllTargets;
    if (rd.has("grid", "impulse_mode")) {
        try {
            spec.grid.mode = detail::parse_impulse_mode(rd.word("grid", "impulse_mode"));
        } catch (const spec_error&) {
            throw;
        } catch (const invalid_input& e) {
            rd.fail("grid", "impulse_mode", e.what());
        }
    }

    auto& sv = spec.solver;
    if (rd.has("solver", "engine")) {
        const std::string e = rd.word("solver", "engine");
        if (e == "fppi") sv.engine = ControlEngine::Fppi;
        else if (e == "howard") sv.engine = ControlEngine::Howard;
        else rd.fail("solver", "engine", "expected fppi or howard");
    }
    sv.tol = rd.opt_number("solver", "tol");
    sv.scale = rd.opt_number("solver", "scale");
    sv.lambda = rd.opt_number("solver", "lambda");
    sv.alpha = rd.opt_number("solver", "alpha");
    sv.r0 = rd.opt_number("solver", "r0");
    sv.max_iters = rd.opt_integer("solver", "max_iters");
    if (rd.has("solver", "guess")) {
        sv.guess = rd.word("solver", "guess");
        if (sv.guess != "zero" && sv.guess != "single" && sv.guess != "capped")
            rd.fail("solver", "guess", "expected zero, single or capped");
    }
    if (auto c = rd.opt_number("solver", "cap")) sv.cap = *c;
    return spec;
}

inline SpecFile load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open spec file '" + path + "'");
    return parse_spec(in, path);
}

/// Symmetric grid from the spec, with optional overrides of h or the number
/// of intervals m = 2 n_half.
inline Grid grid_from_spec(const SpecFile& spec, std::optional<double> h = std::nullopt,
                           std::optional<int> m = std::nullopt) {
    if (!spec.grid.x_max) throw invalid_input(spec.source + ": [grid] x_max is required");
    const double x_max = *spec.grid.x_max;
    int n_half = 0;
    if (m) {
        if (*m < 2 || *m % 2) throw invalid_input("grid: the number of intervals m must be even and >= 2");
        n_half = *m / 2;
    } else if (h) {
        if (!(*h > 0.0)) throw invalid_input("grid: h must be positive");
        const double q = x_max / *h;
        n_half = static_cast<int>(std::llround(q));
        if (std::abs(q - n_half) > 1e-9 * q) throw invalid_input("grid: x_max must be a multiple of h");
    } else if (spec.grid.m) {
        return grid_from_spec(spec, std::nullopt, spec.grid.m);
    } else if (spec.grid.h) {
        return grid_from_spec(spec, spec.grid.h, std::nullopt);
    } else if (spec.grid.n_half) {
        n_half = *spec.grid.n_half;
    } else {
        throw invalid_input(spec.source + ": [grid] needs one of n_half, h or m");
    }
    return Grid(x_max, n_half);
}

}  // namespace qvi
