// Sizes a small network on synthetic data: five informative directions
// hidden in a 30-dimensional cloud, so the first stage should pick a
// five-unit layer at a 0.95 variance threshold.

#include <cstddef>
#include <iostream>
#include <vector>

#include "cascademl/cascademl.hpp"

int main() {
    cml::Rng rng(7);
    const std::size_t n = 300, dims = 30, informative = 5;

    cml::Matrix x(n, dims);
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> coeff(informative);
        for (double& c : coeff) c = rng.normal();
        labels[i] = coeff[0] > 0.0 ? 1 : 0;
        for (std::size_t d = 0; d < dims; ++d) {
            double v = rng.normal(0.0, 1e-3);
            if (d < informative) v += coeff[d];
            x(i, d) = v;
        }
    }

    cml::Matrix y = cml::binary_targets(labels);
    const std::size_t n_train = 240;
    cml::Matrix x_train(n_train, dims), x_val(n - n_train, dims);
    cml::Matrix y_train(n_train, 1), y_val(n - n_train, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dims; ++d)
            (i < n_train ? x_train : x_val)(i < n_train ? i : i - n_train, d) = x(i, d);
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? y_train : y_val)(i < n_train ? i : i - n_train, 0) = y(i, 0);

    cml::SearchConfig search;
    search.layers = 2;
    search.pca_variance = {0.95};
    search.hidden.activation = cml::Activation::tanh;
    search.hidden.dropout_rate = 0.0;
    search.train.epochs = 15;
    search.train.learn_rate = 0.01;
    search.train.es_patience = 15;
    search.train.seed = 42;
    search.train.metrics = {"accuracy"};

    // center only: per-column standardization would blow the tiny noise
    // directions back up to unit variance and hide the low-rank structure
    const cml::PreparedData data = cml::data_init(x_train, y_train, x_val, y_val, true, false);
    const cml::SearchResult result = cml::build(search, data);

    std::cout << cml::widths_table(result);
    std::cout << "final val accuracy: "
              << result.final_history.at("val_accuracy")[result.final_history.best_epoch]
              << "\n";
    return 0;
}
