#pragma once

#include <stdexcept>
#include <string>

namespace qvi {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violation on user-supplied data.
class invalid_input : public error {
public:
    using error::error;
};

/// Linear system could not be solved (singular or numerically singular).
class singular_matrix : public error {
public:
    using error::error;
};

/// Game parameters outside the region where the closed form exists.
class degenerate_game : public error {
public:
    using error::error;
};

/// An iterative solver ran out of iterations.
class not_converged : public error {
public:
    not_converged(const std::string& what, double last_diff)
        : error(what + " (last Diff = " + std::to_string(last_diff) + ")"), last_diff_(last_diff) {}
    double last_diff() const { return last_diff_; }

private:
    double last_diff_;
};

}  // namespace qvi
