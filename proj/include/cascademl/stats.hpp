#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/matrix.hpp"

namespace cml {

inline std::vector<double> column_means(const Matrix& x) {
    std::vector<double> mean(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row_ptr(r);
        for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= double(x.rows());
    return mean;
}

/// Population variance (divide by n) per column. A column whose min and max
/// coincide is reported as exactly 0, so constant features are not polluted
/// by round-off from the mean subtraction.
inline std::vector<double> column_variance(const Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> mean = column_means(x);
    std::vector<double> lo(d, 0.0), hi(d, 0.0), var(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) lo[c] = hi[c] = x(0, c);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x.row_ptr(r);
        for (std::size_t c = 0; c < d; ++c) {
            lo[c] = std::min(lo[c], row[c]);
            hi[c] = std::max(hi[c], row[c]);
            const double diff = row[c] - mean[c];
            var[c] += diff * diff;
        }
    }
    for (std::size_t c = 0; c < d; ++c) var[c] = (lo[c] == hi[c]) ? 0.0 : var[c] / double(n);
    return var;
}

/// Population standard deviation per column.
inline std::vector<double> column_stddevs(const Matrix& x) {
    std::vector<double> out = column_variance(x);
    for (double& v : out) v = std::sqrt(v);
    return out;
}

/// Percentile with linear interpolation: sort ascending, evaluate at
/// position p/100 * (n-1) between the bracketing order statistics.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw validation_error("empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw validation_error("percentile out of [0,100]");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * double(values.size() - 1);
    const std::size_t lower = static_cast<std::size_t>(pos);
    if (lower + 1 >= values.size()) return values.back();
    const double frac = pos - double(lower);
    return values[lower] + frac * (values[lower + 1] - values[lower]);
}

} // namespace cml
