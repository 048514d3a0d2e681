#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "qvi/error.hpp"

namespace qvi {

/// a0 + a1 x + ... + a4 x^4.
struct Polynomial {
    std::vector<double> coeffs;
};

/// a |x - s| + b.
struct AbsLinear {
    double a = 0.0;
    double s = 0.0;
    double b = 0.0;
};

/// min(a (x - s), K).
struct CappedLinear {
    double a = 0.0;
    double s = 0.0;
    double cap = 5.0;
};

/// Closed parametric function family used for drift, volatility and running
/// payoffs.
class Function {
public:
    using Form = std::variant<Polynomial, AbsLinear, CappedLinear>;

    Function() : form_(Polynomial{{0.0}}) {}
    Function(Form form) : form_(std::move(form)) { validate(); }

    static Function constant(double c) { return Function(Polynomial{{c}}); }
    static Function polynomial(std::vector<double> coeffs) { return Function(Polynomial{std::move(coeffs)}); }
    static Function abs_linear(double a, double s, double b) { return Function(AbsLinear{a, s, b}); }
    static Function capped_linear(double a, double s, double cap) { return Function(CappedLinear{a, s, cap}); }

    /// Builds a family from its name ("poly", "abs", "capped") and parameter list.
    static Function from_params(const std::string& family, const std::vector<double>& p) {
        if (family == "poly") return polynomial(p);
        if (family == "abs") {
            if (p.size() != 3) throw invalid_input("abs family takes 3 parameters: a s b");
            return abs_linear(p[0], p[1], p[2]);
        }
        if (family == "capped") {
            if (p.size() != 3) throw invalid_input("capped family takes 3 parameters: a s K");
            return capped_linear(p[0], p[1], p[2]);
        }
        throw invalid_input("unknown function family '" + family + "'");
    }

    double operator()(double x) const {
        return std::visit(
            [x](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Polynomial>) {
                    double acc = 0.0;
                    for (auto it = f.coeffs.rbegin(); it != f.coeffs.rend(); ++it) acc = acc * x + *it;
                    return acc;
                } else if constexpr (std::is_same_v<T, AbsLinear>) {
                    return f.a * std::abs(x - f.s) + f.b;
                } else {
                    return std::min(f.a * (x - f.s), f.cap);
                }
            },
            form_);
    }

    /// g(x) = f(-x), in the same family.
    Function reflected() const {
        return std::visit(
            [](const auto& f) -> Function {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Polynomial>) {
                    Polynomial g = f;
                    for (std::size_t k = 1; k < g.coeffs.size(); k += 2) g.coeffs[k] = -g.coeffs[k];
                    return Function(g);
                } else if constexpr (std::is_same_v<T, AbsLinear>) {
                    return Function(AbsLinear{f.a, -f.s, f.b});
                } else {
                    return Function(CappedLinear{-f.a, -f.s, f.cap});
                }
            },
            form_);
    }

    /// Whether the function attains a finite supremum over the real line.
    bool bounded_above() const {
        return std::visit(
            [](const auto& f) -> bool {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Polynomial>) {
                    std::size_t deg = f.coeffs.size();
                    while (deg > 0 && f.coeffs[deg - 1] == 0.0) --deg;
                    if (deg <= 1) return true;
                    const std::size_t d = deg - 1;
                    return d % 2 == 0 && f.coeffs[d] < 0.0;
                } else if constexpr (std::is_same_v<T, AbsLinear>) {
                    return f.a <= 0.0;
                } else {
                    return true;
                }
            },
            form_);
    }

    /// Polynomial coefficients, or empty when the family is not polynomial.
    std::vector<double> polynomial_coeffs() const {
        if (auto* p = std::get_if<Polynomial>(&form_)) return p->coeffs;
        return {};
    }

    const Form& form() const { return form_; }

    std::string family() const {
        switch (form_.index()) {
            case 0: return "poly";
            case 1: return "abs";
            default: return "capped";
        }
    }

    std::vector<double> params() const {
        return std::visit(
            [](const auto& f) -> std::vector<double> {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, Polynomial>) return f.coeffs;
                else if constexpr (std::is_same_v<T, AbsLinear>) return {f.a, f.s, f.b};
                else return {f.a, f.s, f.cap};
            },
            form_);
    }

private:
    void validate() const {
        if (auto* p = std::get_if<Polynomial>(&form_)) {
            if (p->coeffs.empty() || p->coeffs.size() > 5)
                throw invalid_input("polynomial family takes 1 to 5 coefficients");
        }
        if (auto* c = std::get_if<CappedLinear>(&form_)) {
            if (!(c->cap > 0.0)) throw invalid_input("capped family needs K > 0");
        }
    }

    Form form_;
};

/// Intervention cost c(x, d) = c0 + c1 |d| + c2 d^2 + cr sqrt|d|.
struct CostSpec {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double cr = 0.0;

    double operator()(double /*x*/, double d) const {
        const double a = std::abs(d);
        return c0 + c1 * a + c2 * d * d + cr * std::sqrt(a);
    }
};

/// Gain from the opponent's intervention g(x, d) = g0 + g1 |d|, with d the
/// opponent's impulse.
struct GainSpec {
    double g0 = 0.0;
    double g1 = 0.0;

    double operator()(double /*x*/, double d) const { return g0 + g1 * std::abs(d); }
};

}  // namespace qvi
