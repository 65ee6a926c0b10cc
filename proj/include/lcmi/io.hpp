#pragma once

#include "lcmi/core.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lcmi {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(Errc::InvalidArgument, "cannot parse number '" + std::string(s) + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != '\n') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            require(cells.size() == t.header.size(), Errc::InvalidArgument,
                    "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    require(!first, Errc::InvalidArgument, "CSV input is empty");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::InvalidArgument, "cannot open '" + path + "'");
    return read_csv(in);
}

class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    CsvWriter& cell(double v) { return raw(format_double(v)); }
    CsvWriter& cell(const std::string& s) { return raw(s); }
    CsvWriter& cell(const char* s) { return raw(s); }
    CsvWriter& cell(int v) { return raw(std::to_string(v)); }
    CsvWriter& cell(long v) { return raw(std::to_string(v)); }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }

    std::ostream& out_;
    bool first_ = true;
};

// "a:b:step" -> a, a+step, ..., b (inclusive within 1e-9 of a step).
inline std::vector<double> parse_range(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(parse_double(item));
    require(parts.size() == 3 && parts[2] > 0.0 && parts[1] >= parts[0], Errc::InvalidArgument,
            "range must be lo:hi:step with step > 0");
    std::vector<double> out;
    const long n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
}

inline std::vector<double> parse_list(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    require(!out.empty(), Errc::InvalidArgument, "empty list");
    return out;
}

// "lo:hi"
inline std::pair<double, double> parse_interval(const std::string& spec) {
    const auto p = spec.find(':', spec.empty() ? 0 : 1);
    require(p != std::string::npos, Errc::InvalidArgument, "interval must be lo:hi");
    const double lo = parse_double(spec.substr(0, p)), hi = parse_double(spec.substr(p + 1));
    require(hi > lo, Errc::InvalidArgument, "interval must have hi > lo");
    return {lo, hi};
}

}  // namespace lcmi
