#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qvi/error.hpp"

namespace qvi {

using Vector = Eigen::VectorXd;

/// Symmetric equispaced grid x_{-N} < ... < x_0 = 0 < ... < x_N.
///
/// Nodes are addressed either by their signed index i in [-N, N] or by their
/// storage position p = i + N in [0, 2N]. Coordinates are computed as i*h on
/// demand, so x_{-i} == -x_i holds bit-exactly.
class Grid {
public:
    Grid(double x_max, int n_half) : n_half_(n_half) {
        if (!(x_max > 0.0) || !std::isfinite(x_max))
            throw invalid_input("grid: x_max must be positive and finite");
        if (n_half < 1) throw invalid_input("grid: n_half must be >= 1");
        step_ = x_max / n_half;
    }

    int n_half() const { return n_half_; }
    double step() const { return step_; }
    std::size_t size() const { return static_cast<std::size_t>(2 * n_half_ + 1); }
    double x_max() const { return n_half_ * step_; }

    /// Storage position of signed index i.
    int pos(int i) const { return i + n_half_; }
    /// Signed index of storage position p.
    int index(int p) const { return p - n_half_; }

    /// Coordinate of the node at storage position p.
    double x(int p) const { return index(p) * step_; }

    /// Storage position of the node reflected through 0.
    int mirror(int p) const { return static_cast<int>(size()) - 1 - p; }

    bool contains_pos(int p) const { return p >= 0 && p < static_cast<int>(size()); }

    Vector nodes() const {
        Vector out(size());
        for (int p = 0; p < static_cast<int>(size()); ++p) out[p] = x(p);
        return out;
    }

    /// Linear interpolation of v at y; clamps to the endpoint values outside
    /// [x_{-N}, x_N] ("no extrapolation").
    double interpolate(const Vector& v, double y) const {
        const int last = static_cast<int>(size()) - 1;
        if (y <= x(0)) return v[0];
        if (y >= x(last)) return v[last];
        const double s = y / step_ + n_half_;
        int lo = static_cast<int>(std::floor(s));
        lo = std::clamp(lo, 0, last - 1);
        const double t = s - lo;
        if (t == 0.0) return v[lo];
        return (1.0 - t) * v[lo] + t * v[lo + 1];
    }

    /// Position of the node nearest to y (clamped to the grid).
    int nearest_pos(double y) const {
        const double s = std::round(y / step_) + n_half_;
        return std::clamp(static_cast<int>(s), 0, static_cast<int>(size()) - 1);
    }

private:
    int n_half_;
    double step_;
};

inline Grid make_symmetric_grid(double x_max, int n_half) { return Grid(x_max, n_half); }

/// Symmetry permutation (S v)(x) = v(-x).
inline Vector reflect(const Vector& v) { return v.reverse(); }

enum class ImpulseMode {
    /// Z(x_i) = {0, h, ..., x_{-i-1} - x_i} for i < 0: a target never reaches
    /// the mirrored node.
    SymmetryConstrained,
    /// Z(x_i) = {0, h, ..., x_N - x_i} for i < 0.
    Unconstrained,
    /// Z(x) = G - x at every node (two-sided; used by the general game).
    AllTargets,
};

/// Per-node admissible impulses, stored as contiguous ranges of grid offsets.
/// The impulse with offset k at position p moves the state to position p + k,
/// i.e. a displacement of k*h.
class ImpulseSets {
public:
    struct Range {
        int lo;
        int hi;
    };

    ImpulseSets(const Grid& grid, ImpulseMode mode) : mode_(mode), step_(grid.step()) {
        const int n = grid.n_half();
        ranges_.resize(grid.size());
        for (int p = 0; p < static_cast<int>(grid.size()); ++p) {
            const int i = grid.index(p);
            Range r{0, 0};
            switch (mode) {
                case ImpulseMode::SymmetryConstrained:
                    if (i < 0) r.hi = -2 * i - 1;
                    break;
                case ImpulseMode::Unconstrained:
                    if (i < 0) r.hi = n - i;
                    break;
                case ImpulseMode::AllTargets:
                    r.lo = -n - i;
                    r.hi = n - i;
                    break;
            }
            ranges_[p] = r;
        }
    }

    ImpulseMode mode() const { return mode_; }
    std::size_t size() const { return ranges_.size(); }
    const Range& range(int p) const { return ranges_[p]; }

    bool admissible(int p, int offset) const {
        return offset >= ranges_[p].lo && offset <= ranges_[p].hi;
    }

    /// Largest absolute offset over all nodes.
    int max_span() const {
        int m = 0;
        for (const auto& r : ranges_) m = std::max({m, -r.lo, r.hi});
        return m;
    }

    /// Z(x_p) as real displacements, ascending.
    std::vector<double> values(int p) const {
        std::vector<double> out;
        for (int k = ranges_[p].lo; k <= ranges_[p].hi; ++k) out.push_back(k * step_);
        return out;
    }

private:
    ImpulseMode mode_;
    double step_;
    std::vector<Range> ranges_;
};

inline ImpulseSets impulse_sets(const Grid& grid, ImpulseMode mode) { return ImpulseSets(grid, mode); }

/// Impulse choice per node, as grid offsets.
using ImpulseVector = std::vector<int>;

/// Intervention indicator per node.
using Region = std::vector<bool>;

}  // namespace qvi
