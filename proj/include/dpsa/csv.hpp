#pragma once

#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpsa/frontier.hpp"

namespace dpsa {

// Frontier CSV layout is a stable interchange contract:
//   gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy
// Floats carry 12 significant digits, lambda is empty for non-Med rows,
// lines end with '\n'.
inline constexpr const char* kFrontierCsvHeader =
    "gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy";

inline std::string format_double12(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::string frontier_to_csv(const std::vector<FrontierPoint>& points) {
    std::string out(kFrontierCsvHeader);
    out.push_back('\n');
    for (const FrontierPoint& p : points) {
        out += format_double12(p.gain);
        out.push_back(',');
        out += format_double12(p.qber);
        out.push_back(',');
        out += format_double12(p.dc);
        out.push_back(',');
        out += std::to_string(p.block_len);
        out.push_back(',');
        out += std::to_string(p.min_run);
        out.push_back(',');
        out += format_double12(p.send_prob);
        out.push_back(',');
        out += format_double12(p.mu_beta);
        out.push_back(',');
        if (p.lambda) out += format_double12(*p.lambda);
        out.push_back(',');
        out += strategy_name(p.kind);
        out.push_back('\n');
    }
    return out;
}

struct CsvError : std::runtime_error {
    int line;
    CsvError(int line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
          line(line_no) {}
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_csv_double(const std::string& s, int line_no, const char* what) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw CsvError(line_no, std::string("bad ") + what + " value '" + s + "'");
    }
}

inline int parse_csv_int(const std::string& s, int line_no, const char* what) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw CsvError(line_no, std::string("bad ") + what + " value '" + s + "'");
    }
}

}  // namespace detail

inline std::vector<FrontierPoint> parse_frontier_csv(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw CsvError(1, "empty file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kFrontierCsvHeader)
        throw CsvError(line_no, std::string("expected header '") + kFrontierCsvHeader +
                                    "', got '" + line + "'");

    std::vector<FrontierPoint> points;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 9)
            throw CsvError(line_no, "expected 9 fields, got " + std::to_string(f.size()));
        FrontierPoint p;
        p.gain = detail::parse_csv_double(f[0], line_no, "gain");
        p.qber = detail::parse_csv_double(f[1], line_no, "qber");
        p.dc = detail::parse_csv_double(f[2], line_no, "dc");
        p.block_len = detail::parse_csv_int(f[3], line_no, "M");
        p.min_run = detail::parse_csv_int(f[4], line_no, "M_min");
        p.send_prob = detail::parse_csv_double(f[5], line_no, "q");
        p.mu_beta = detail::parse_csv_double(f[6], line_no, "mu_beta");
        if (!f[7].empty()) p.lambda = detail::parse_csv_double(f[7], line_no, "lambda");
        if (f[8] == "usd") p.kind = StrategyKind::Usd;
        else if (f[8] == "med") p.kind = StrategyKind::Med;
        else if (f[8] == "bob_device") p.kind = StrategyKind::BobDevice;
        else throw CsvError(line_no, "unknown strategy '" + f[8] + "'");
        if (p.kind == StrategyKind::Med && !p.lambda)
            throw CsvError(line_no, "med row without lambda");
        points.push_back(p);
    }
    return points;
}

}  // namespace dpsa
