// Chains an adaptive variance threshold with rank-aggregated top-k selection
// on synthetic data where only the first three features carry signal.

#include <cstddef>
#include <iostream>
#include <vector>

#include "cascademl/cascademl.hpp"

int main() {
    cml::Rng rng(11);
    const std::size_t n = 400, dims = 12;

    cml::Matrix x(n, dims);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = int(rng.below(2));
        for (std::size_t d = 0; d < dims; ++d) {
            double v = rng.normal();
            if (d < 3) v += y[i] ? 2.0 : -2.0; // informative
            if (d >= 10) v *= 1e-4;            // nearly constant
            x(i, d) = v;
        }
    }

    std::vector<cml::AnySelector> chain;
    chain.emplace_back(cml::SelectorSpec::adaptive_variance(10.0));
    cml::RankAggregatedSpec agg;
    agg.methods = {cml::SelectorSpec::select_k_best(cml::ScoreFn::f_classif, 3),
                   cml::SelectorSpec::select_k_best(cml::ScoreFn::mutual_info, 3)};
    agg.k = 3;
    chain.emplace_back(agg);

    const cml::FeatureSelection sel = cml::fit_pipeline(x, &y, chain);
    std::cout << "selected features:";
    for (std::size_t idx : sel.selected) std::cout << " " << idx;
    std::cout << "\n";
    return 0;
}
