#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpsa {

// Integer power by repeated squaring. Stays exact-ish for the large block
// lengths used in minimum-gain scenarios where std::pow could underflow to
// subnormals; anything below 1e-300 is clamped to zero (reported through
// *underflowed when given).
inline double pow_uint(double base, unsigned n, bool* underflowed = nullptr) {
    if (underflowed) *underflowed = false;
    double acc = 1.0;
    double b = base;
    while (n > 0) {
        if (n & 1u) acc *= b;
        n >>= 1u;
        if (n) b *= b;
    }
    if (acc != 0.0 && std::abs(acc) < 1e-300) {
        if (underflowed) *underflowed = true;
        return 0.0;
    }
    return acc;
}

// n log-spaced points covering [lo, hi], endpoints included.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
        throw std::invalid_argument("log_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> g(static_cast<size_t>(n));
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
        g[static_cast<size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

inline double rel_diff(double a, double b) {
    if (a == b) return 0.0;
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

}  // namespace dpsa
