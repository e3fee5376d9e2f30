#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "cascademl/pca.hpp"
#include "cascademl/stats.hpp"
#include "support/oracles.hpp"

using namespace cml;

TEST_CASE("rank-1 data yields a single component explaining everything") {
    // feature 0 varies along a line, the rest are constant
    Matrix x(5, 4);
    for (std::size_t r = 0; r < 5; ++r) {
        x(r, 0) = double(r) * 2.0 - 1.0;
        x(r, 1) = 3.0;
        x(r, 2) = -7.5;
        x(r, 3) = 0.0;
    }
    const PCAModel model = fit_pca(x);
    REQUIRE(model.n_components() == 1);
    CHECK(model.explained_variance_ratio[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(model.components[0][0]) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("uncorrelated features with variances 3 and 1 split 0.75/0.25") {
    const double s = std::sqrt(3.0);
    const Matrix x(4, 2, {s, 1, -s, 1, s, -1, -s, -1});
    const PCAModel model = fit_pca(x);
    REQUIRE(model.n_components() == 2);
    CHECK(model.explained_variance_ratio[0] == Catch::Approx(0.75).margin(1e-12));
    CHECK(model.explained_variance_ratio[1] == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("fitting centered data leaves a near-zero mean vector") {
    Rng rng(5);
    Matrix x = oracle::random_matrix(rng, 10, 4);
    const auto mean = column_means(x);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) -= mean[c];
    const PCAModel model = fit_pca(x);
    for (double m : model.mean) CHECK(std::abs(m) < 1e-12);
}

TEST_CASE("PCA requires at least two rows") {
    CHECK_THROWS_WITH(fit_pca(Matrix(1, 3, {1, 2, 3})),
                      Catch::Matchers::ContainsSubstring("insufficient samples for PCA"));
}

TEST_CASE("component rows are orthonormal and ratios nonincreasing") {
    Rng rng(6);
    for (int it = 0; it < 10; ++it) {
        const Matrix x = oracle::random_matrix(rng, 4 + rng.below(20), 2 + rng.below(8));
        const PCAModel model = fit_pca(x);
        for (std::size_t i = 0; i < model.n_components(); ++i) {
            for (std::size_t j = i; j < model.n_components(); ++j) {
                double dot = 0.0;
                for (std::size_t f = 0; f < model.n_features(); ++f)
                    dot += model.components[i][f] * model.components[j][f];
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-8);
            }
            if (i > 0)
                CHECK(model.explained_variance_ratio[i] <=
                      model.explained_variance_ratio[i - 1] + 1e-12);
        }
        const double total = std::accumulate(model.explained_variance_ratio.begin(),
                                             model.explained_variance_ratio.end(), 0.0);
        CHECK(total <= 1.0 + 1e-9);
    }
}

TEST_CASE("explained variance matches the covariance-eigendecomposition oracle") {
    Rng rng(7);
    for (int it = 0; it < 20; ++it) {
        const std::size_t rows = 5 + rng.below(46), cols = 2 + rng.below(19);
        const Matrix x = oracle::random_matrix(rng, rows, cols);
        const PCAModel model = fit_pca(x);
        const auto eig = oracle::symmetric_eigenvalues(oracle::covariance(x));
        const double eig_total = std::accumulate(eig.begin(), eig.end(), 0.0);
        for (std::size_t i = 0; i < model.n_components(); ++i) {
            const double oracle_ratio = eig[i] / eig_total;
            CHECK(std::abs(model.explained_variance_ratio[i] - oracle_ratio) <=
                  1e-8 * std::max(1.0, std::abs(oracle_ratio)));
        }
    }
}

TEST_CASE("component count for a variance threshold follows the cumulative sum") {
    PCAModel single;
    single.mean = {0.0};
    single.components = {{1.0}};
    single.explained_variance_ratio = {1.0};
    CHECK(n_components_for_variance(single, 0.95) == 1);

    PCAModel pair;
    pair.mean = {0.0, 0.0};
    pair.components = {{1.0, 0.0}, {0.0, 1.0}};
    pair.explained_variance_ratio = {0.75, 0.25};
    CHECK(n_components_for_variance(pair, 0.75) == 1);
    CHECK(n_components_for_variance(pair, 0.76) == 2);
    CHECK(n_components_for_variance(pair, 1.0) == 2);

    CHECK_THROWS_WITH(n_components_for_variance(pair, 0.0),
                      Catch::Matchers::ContainsSubstring("variance threshold out of range"));
    CHECK_THROWS_AS(n_components_for_variance(pair, 1.5), validation_error);
}

TEST_CASE("component count is nondecreasing in the threshold") {
    Rng rng(9);
    const Matrix x = oracle::random_matrix(rng, 30, 10);
    const PCAModel model = fit_pca(x);
    std::size_t prev = 1;
    for (double t = 0.05; t <= 1.0; t += 0.05) {
        const std::size_t k = n_components_for_variance(model, t);
        CHECK(k >= prev);
        prev = k;
    }
}

TEST_CASE("projecting onto all components reconstructs the data") {
    Rng rng(11);
    const Matrix x = oracle::random_matrix(rng, 12, 5);
    const PCAModel model = fit_pca(x);
    const Matrix z = transform_pca(model, x, model.n_components());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            double rec = model.mean[f];
            for (std::size_t k = 0; k < model.n_components(); ++k)
                rec += z(r, k) * model.components[k][f];
            CHECK(std::abs(rec - x(r, f)) < 1e-8);
        }
    }
}

TEST_CASE("one component preserves pairwise distances of rank-1 data") {
    Rng rng(13);
    Matrix x(8, 4);
    std::vector<double> dir{0.5, -0.25, 1.0, 0.33};
    for (std::size_t r = 0; r < 8; ++r) {
        const double t = rng.normal();
        for (std::size_t c = 0; c < 4; ++c) x(r, c) = t * dir[c];
    }
    const PCAModel model = fit_pca(x);
    REQUIRE(model.n_components() == 1);
    const Matrix z = transform_pca(model, x, 1);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = i + 1; j < 8; ++j) {
            double orig = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                orig += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
            const double proj = (z(i, 0) - z(j, 0)) * (z(i, 0) - z(j, 0));
            CHECK(std::abs(std::sqrt(orig) - std::abs(z(i, 0) - z(j, 0))) < 1e-8);
            CHECK(std::abs(orig - proj) < 1e-8);
        }
    }
}

TEST_CASE("the mean row transforms to the zero vector") {
    Rng rng(15);
    const Matrix x = oracle::random_matrix(rng, 9, 3);
    const PCAModel model = fit_pca(x);
    const Matrix mean_row(1, 3, {model.mean[0], model.mean[1], model.mean[2]});
    const Matrix z = transform_pca(model, mean_row, model.n_components());
    for (double v : z.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("transform validates its arguments") {
    Rng rng(16);
    const Matrix x = oracle::random_matrix(rng, 6, 3);
    const PCAModel model = fit_pca(x);
    CHECK_THROWS_AS(transform_pca(model, x, model.n_components() + 1), validation_error);
    CHECK_THROWS_AS(transform_pca(model, Matrix(2, 2), 1), validation_error);
}

TEST_CASE("constant data produces a component-free model sized as one layer unit") {
    Matrix x(4, 3);
    for (double& v : x.data()) v = 2.5;
    const PCAModel model = fit_pca(x);
    CHECK(model.n_components() == 0);
    CHECK(n_components_for_variance(model, 0.95) == 1);
}
