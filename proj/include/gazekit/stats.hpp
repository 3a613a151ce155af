#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gazekit/errors.hpp"

namespace gazekit {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw InvalidArgument("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Midpoint-of-two-middles median.
inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sample standard deviation (divide by n-1).
inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) throw InvalidArgument("sample_std needs at least 2 values");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidArgument("pearson: size mismatch");
    if (a.size() < 2) throw InvalidArgument("pearson: need at least 2 pairs");
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 1e-30 || sbb <= 1e-30)
        throw ValidationError("pearson: zero variance in one of the variables");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace gazekit
