#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qvi/error.hpp"

namespace qvi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Entries with magnitude at or below this are not edges of graph(A).
inline constexpr double edge_threshold = 1e-14;

/// Index of connectivity/contraction: a nonnegative integer or +infinity.
class ChainIndex {
public:
    static ChainIndex infinite() { return ChainIndex(); }
    explicit ChainIndex(std::size_t n) : value_(n) {}

    bool is_finite() const { return value_.has_value(); }
    /// Only valid when finite.
    std::size_t value() const { return *value_; }

    friend bool operator==(const ChainIndex&, const ChainIndex&) = default;
    friend std::strong_ordering operator<=>(const ChainIndex& a, const ChainIndex& b) {
        if (a.is_finite() && b.is_finite()) return a.value() <=> b.value();
        if (a.is_finite()) return std::strong_ordering::less;
        if (b.is_finite()) return std::strong_ordering::greater;
        return std::strong_ordering::equal;
    }

    std::string str() const { return is_finite() ? std::to_string(*value_) : std::string("inf"); }

private:
    ChainIndex() = default;
    std::optional<std::size_t> value_;
};

struct DominanceReport {
    bool wdd = false;
    /// J[A]: rows with |A_ii| > sum_{j != i} |A_ij|.
    std::vector<std::size_t> sdd_rows;
    ChainIndex con = ChainIndex::infinite();
    bool wcdd = false;
    /// Shortest walk length from each row to an SDD row (0 for SDD rows,
    /// nullopt if unreachable).
    std::vector<std::optional<std::size_t>> distance;
};

inline double inf_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Row dominance, SDD set and index of connectivity via multi-source reverse
/// BFS over graph(A) from the SDD rows.
inline DominanceReport classify_dominance(const Matrix& a) {
    if (a.rows() != a.cols()) throw invalid_input("classify_dominance: matrix is not square");
    const auto n = static_cast<std::size_t>(a.rows());
    DominanceReport rep;
    rep.wdd = true;
    std::vector<std::vector<std::size_t>> reverse_edges(n);
    std::vector<bool> sdd(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double aij = a(i, j);
            off += std::abs(aij);
            if (std::abs(aij) > edge_threshold) reverse_edges[j].push_back(i);
        }
        const double d = std::abs(a(i, i));
        if (d < off) rep.wdd = false;
        if (d > off) {
            sdd[i] = true;
            rep.sdd_rows.push_back(i);
        }
    }

    rep.distance.assign(n, std::nullopt);
    std::deque<std::size_t> queue;
    for (std::size_t i : rep.sdd_rows) {
        rep.distance[i] = 0;
        queue.push_back(i);
    }
    while (!queue.empty()) {
        const std::size_t j = queue.front();
        queue.pop_front();
        for (std::size_t i : reverse_edges[j]) {
            if (rep.distance[i]) continue;
            rep.distance[i] = *rep.distance[j] + 1;
            queue.push_back(i);
        }
    }

    std::size_t con = 0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (sdd[i]) continue;
        if (!rep.distance[i]) {
            finite = false;
            break;
        }
        con = std::max(con, *rep.distance[i]);
    }
    rep.con = finite ? ChainIndex(con) : ChainIndex::infinite();
    rep.wcdd = rep.wdd && finite;
    return rep;
}

/// Z-matrix with nonnegative diagonal.
inline bool is_l0_matrix(const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (i == j && a(i, j) < 0.0) return false;
            if (i != j && a(i, j) > 0.0) return false;
        }
    return true;
}

/// Row index violating substochasticity (negative entry or row sum above
/// 1 + slack), or nullopt.
inline std::optional<Eigen::Index> substochastic_violation(const Matrix& a, double slack = 1e-12) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (a(i, j) < 0.0) return i;
            sum += a(i, j);
        }
        if (sum > 1.0 + slack) return i;
    }
    return std::nullopt;
}

inline bool is_substochastic(const Matrix& a) { return !substochastic_violation(a).has_value(); }

/// Index of contraction of a substochastic matrix, computed as con[Id - A].
inline ChainIndex index_of_contraction(const Matrix& a) {
    if (a.rows() != a.cols()) throw invalid_input("index_of_contraction: matrix is not square");
    if (auto row = substochastic_violation(a))
        throw invalid_input("index_of_contraction: matrix is not substochastic (row " +
                            std::to_string(*row) + ")");
    const Matrix id_minus = Matrix::Identity(a.rows(), a.cols()) - a;
    return classify_dominance(id_minus).con;
}

/// Dense monotonicity test (A nonsingular and A^{-1} >= 0). Intended as a test
/// oracle; refuses matrices larger than `cap`. Throws singular_matrix when A is
/// singular.
inline bool is_monotone_small(const Matrix& a, Eigen::Index cap = 200) {
    if (a.rows() != a.cols()) throw invalid_input("is_monotone_small: matrix is not square");
    if (a.rows() > cap) throw invalid_input("is_monotone_small: order exceeds cap");
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw singular_matrix("is_monotone_small: matrix is singular");
    const Matrix inv = lu.inverse();
    return inv.minCoeff() >= -1e-12;
}

/// Tridiagonal matrix; lower[0] and upper[n-1] are unused.
struct Tridiagonal {
    Vector lower;
    Vector diag;
    Vector upper;

    Tridiagonal() = default;
    explicit Tridiagonal(Eigen::Index n)
        : lower(Vector::Zero(n)), diag(Vector::Zero(n)), upper(Vector::Zero(n)) {}

    Eigen::Index size() const { return diag.size(); }

    Vector multiply(const Vector& v) const {
        const Eigen::Index n = size();
        Vector out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = diag[i] * v[i];
            if (i > 0) s += lower[i] * v[i - 1];
            if (i + 1 < n) s += upper[i] * v[i + 1];
            out[i] = s;
        }
        return out;
    }

    Matrix dense() const {
        const Eigen::Index n = size();
        Matrix m = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            m(i, i) = diag[i];
            if (i > 0) m(i, i - 1) = lower[i];
            if (i + 1 < n) m(i, i + 1) = upper[i];
        }
        return m;
    }

    bool is_sdd() const {
        const Eigen::Index n = size();
        for (Eigen::Index i = 0; i < n; ++i) {
            double off = 0.0;
            if (i > 0) off += std::abs(lower[i]);
            if (i + 1 < n) off += std::abs(upper[i]);
            if (!(std::abs(diag[i]) > off)) return false;
        }
        return true;
    }
};

/// Thomas algorithm. Stable without pivoting for SDD input.
inline Vector solve_tridiagonal(const Tridiagonal& t, const Vector& rhs) {
    const Eigen::Index n = t.size();
    if (rhs.size() != n) throw invalid_input("solve_tridiagonal: size mismatch");
    if (n == 0) return Vector(0);
    Vector c_star(n), d_star(n), x(n);
    double m = t.diag[0];
    if (m == 0.0) throw singular_matrix("solve_tridiagonal: zero pivot");
    c_star[0] = n > 1 ? t.upper[0] / m : 0.0;
    d_star[0] = rhs[0] / m;
    for (Eigen::Index i = 1; i < n; ++i) {
        m = t.diag[i] - t.lower[i] * c_star[i - 1];
        if (m == 0.0) throw singular_matrix("solve_tridiagonal: zero pivot");
        c_star[i] = i + 1 < n ? t.upper[i] / m : 0.0;
        d_star[i] = (rhs[i] - t.lower[i] * d_star[i - 1]) / m;
    }
    x[n - 1] = d_star[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d_star[i] - c_star[i] * x[i + 1];
    return x;
}

/// Dense LU with partial pivoting; rejects numerically singular input.
inline Vector solve_dense(const Matrix& a, const Vector& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) throw invalid_input("solve_dense: size mismatch");
    if (a.rows() == 0) return Vector(0);
    Eigen::PartialPivLU<Matrix> lu(a);
    if (!(lu.rcond() > 1e-14)) throw singular_matrix("solve_dense: matrix is singular or ill-conditioned");
    return lu.solve(b);
}

inline bool is_tridiagonal(const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (std::abs(i - j) > 1 && a(i, j) != 0.0) return false;
    return true;
}

inline Tridiagonal tridiagonal_of(const Matrix& a) {
    Tridiagonal t(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        t.diag[i] = a(i, i);
        if (i > 0) t.lower[i] = a(i, i - 1);
        if (i + 1 < a.rows()) t.upper[i] = a(i, i + 1);
    }
    return t;
}

/// Solves A x = b, taking the Thomas path when A is tridiagonal and SDD.
inline Vector solve_linear(const Matrix& a, const Vector& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) throw invalid_input("solve_linear: size mismatch");
    Vector x;
    if (is_tridiagonal(a)) {
        const Tridiagonal t = tridiagonal_of(a);
        if (t.is_sdd()) x = solve_tridiagonal(t, b);
    }
    if (x.size() != b.size()) x = solve_dense(a, b);
    const double res = b.size() ? (a * x - b).cwiseAbs().maxCoeff() : 0.0;
    const double bnorm = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(res) || res > 1e-10 * (1.0 + bnorm))
        throw singular_matrix("solve_linear: residual too large, matrix is ill-conditioned");
    return x;
}

}  // namespace qvi
