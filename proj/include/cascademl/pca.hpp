#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/stats.hpp"

namespace cml {

/// Principal components of column-centered data.
///
/// `components[i]` is the i-th direction (length = feature count); rows are
/// orthonormal and ordered by decreasing explained variance. Directions whose
/// singular value falls below 1e-12 * s_max are treated as numerical rank
/// deficiency and dropped, so the model may hold fewer than min(rows-1, cols)
/// components, and none at all for constant data.
struct PCAModel {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;
    std::vector<double> explained_variance_ratio;

    std::size_t n_components() const { return components.size(); }
    std::size_t n_features() const { return mean.size(); }
};

namespace detail {

/// One-sided cyclic Jacobi SVD. Rotates column pairs of `a` until all pairs
/// are orthogonal; on exit the columns of `a` are U*S and `v` holds the right
/// singular vectors as columns. Deterministic: fixed sweep order, fixed
/// convergence test.
inline void jacobi_svd_inplace(Matrix& a, Matrix& v) {
    const std::size_t n = a.rows();
    const std::size_t d = a.cols();
    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double* row = a.row_ptr(i);
                    app += row[p] * row[p];
                    aqq += row[q] * row[q];
                    apq += row[p] * row[q];
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    double* row = a.row_ptr(i);
                    const double xp = row[p], xq = row[q];
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    double* row = v.row_ptr(i);
                    const double xp = row[p], xq = row[q];
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }
}

} // namespace detail

/// Fit principal components on the column-centered input.
/// explained_variance_ratio_i = s_i^2 / sum_j s_j^2.
inline PCAModel fit_pca(const Matrix& x) {
    if (x.rows() < 2) throw validation_error("insufficient samples for PCA");
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();

    PCAModel model;
    model.mean = column_means(x);

    Matrix centered(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - model.mean[c];

    Matrix v(d, d);
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;
    detail::jacobi_svd_inplace(centered, v);

    std::vector<double> sigma(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double sq = 0.0;
        for (std::size_t r = 0; r < n; ++r) sq += centered(r, c) * centered(r, c);
        sigma[c] = std::sqrt(sq);
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    const double total = std::accumulate(sigma.begin(), sigma.end(), 0.0,
                                         [](double acc, double s) { return acc + s * s; });
    const double s_max = sigma[order.front()];
    const std::size_t limit = std::min(n - 1, d);

    for (std::size_t i = 0; i < limit; ++i) {
        const double s = sigma[order[i]];
        if (s < 1e-12 * s_max || s == 0.0) break;
        std::vector<double> direction = v.column(order[i]);
        // Fix the sign: largest-magnitude entry made nonnegative.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(direction[j]) > std::abs(direction[arg])) arg = j;
        if (direction[arg] < 0.0)
            for (double& e : direction) e = -e;
        model.components.push_back(std::move(direction));
        model.explained_variance_ratio.push_back(s * s / total);
    }
    return model;
}

/// Smallest k whose cumulative explained-variance ratio reaches `threshold`.
/// Clamped to [1, n_components]; a model with no components (constant data)
/// yields 1 so that downstream layer sizing stays total.
inline std::size_t n_components_for_variance(const PCAModel& model, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw validation_error("variance threshold out of range");
    if (model.n_components() == 0) return 1;
    double cum = 0.0;
    for (std::size_t k = 0; k < model.n_components(); ++k) {
        cum += model.explained_variance_ratio[k];
        if (cum >= threshold - 1e-12) return k + 1;
    }
    return model.n_components();
}

/// Project rows of `x` onto the first k components of the fitted model.
inline Matrix transform_pca(const PCAModel& model, const Matrix& x, std::size_t k) {
    if (k == 0 || k > model.n_components())
        throw validation_error("component count out of range");
    if (x.cols() != model.n_features())
        throw validation_error("feature count does not match fitted PCA");
    Matrix out(x.rows(), k);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row_ptr(r);
        for (std::size_t j = 0; j < k; ++j) {
            const std::vector<double>& comp = model.components[j];
            double acc = 0.0;
            for (std::size_t f = 0; f < model.n_features(); ++f)
                acc += (row[f] - model.mean[f]) * comp[f];
            out(r, j) = acc;
        }
    }
    return out;
}

} // namespace cml
