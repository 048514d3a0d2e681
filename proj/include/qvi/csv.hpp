#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qvi/error.hpp"

namespace qvi {

/// Parses a whole token as a double (round-trip exact); throws on junk.
inline double parse_double(std::string_view s) {
    double out = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (s.empty() || ec != std::errc() || ptr != end)
        throw invalid_input("not a number: '" + std::string(s) + "'");
    return out;
}

inline long long parse_integer(std::string_view s) {
    long long out = 0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    if (s.empty() || ec != std::errc() || ptr != end)
        throw invalid_input("not an integer: '" + std::string(s) + "'");
    return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

/// CSV with a versioned comment line "# qvi-<kind> v<version>" followed by a
/// header row.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::string& kind, const std::vector<std::string>& columns, int version = 1)
        : os_(os), ncols_(columns.size()) {
        os_ << "# qvi-" << kind << " v" << version << '\n';
        for (std::size_t k = 0; k < columns.size(); ++k) os_ << (k ? "," : "") << columns[k];
        os_ << '\n';
    }

    /// Numeric row.
    void row(const std::vector<double>& values) {
        check(values.size());
        for (std::size_t k = 0; k < values.size(); ++k) os_ << (k ? "," : "") << format_double(values[k]);
        os_ << '\n';
    }

    /// Row of preformatted cells.
    void text_row(const std::vector<std::string>& cells) {
        check(cells.size());
        for (std::size_t k = 0; k < cells.size(); ++k) os_ << (k ? "," : "") << cells[k];
        os_ << '\n';
    }

private:
    void check(std::size_t n) const {
        if (n != ncols_) throw invalid_input("csv: row width does not match the header");
    }

    std::ostream& os_;
    std::size_t ncols_;
};

struct CsvTable {
    std::string kind;
    int version = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return static_cast<int>(k);
        throw invalid_input("csv: no column '" + name + "'");
    }
    double number(std::size_t row, const std::string& name) const { return parse_double(rows[row][column(name)]); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Reads a file written by CsvWriter. Further comment lines are skipped.
inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (lineno == 1) {
                std::istringstream ls(line.substr(1));
                std::string tag, ver;
                ls >> tag >> ver;
                if (tag.rfind("qvi-", 0) != 0 || ver.size() < 2 || ver[0] != 'v')
                    throw invalid_input("csv: line 1: malformed version line");
                t.kind = tag.substr(4);
                t.version = static_cast<int>(parse_integer(ver.substr(1)));
            }
            continue;
        }
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.columns = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw invalid_input("csv: line " + std::to_string(lineno) + ": expected " +
                                std::to_string(t.columns.size()) + " cells");
        t.rows.push_back(std::move(cells));
    }
    if (t.kind.empty()) throw invalid_input("csv: missing version line");
    if (!have_header) throw invalid_input("csv: missing header row");
    return t;
}

}  // namespace qvi
