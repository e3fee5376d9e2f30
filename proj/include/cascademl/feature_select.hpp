#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/stats.hpp"

namespace cml {

enum class ScoreFn { f_classif, mutual_info };

inline std::string to_string(ScoreFn fn) {
    return fn == ScoreFn::f_classif ? "f_classif" : "mutual_info";
}

/// Description of one basic selector. Exactly the fields of its kind matter.
struct SelectorSpec {
    enum class Kind { variance_threshold, adaptive_variance, select_k_best };

    Kind kind = Kind::variance_threshold;
    double threshold = 0.0;              // variance_threshold
    double percentile = 0.0;             // adaptive_variance
    std::size_t k = 1;                   // select_k_best
    ScoreFn score_fn = ScoreFn::f_classif;
    std::size_t mi_bins = 10;

    static SelectorSpec variance_threshold(double threshold) {
        SelectorSpec s;
        s.kind = Kind::variance_threshold;
        s.threshold = threshold;
        return s;
    }
    static SelectorSpec adaptive_variance(double percentile) {
        SelectorSpec s;
        s.kind = Kind::adaptive_variance;
        s.percentile = percentile;
        return s;
    }
    static SelectorSpec select_k_best(ScoreFn fn, std::size_t k, std::size_t mi_bins = 10) {
        SelectorSpec s;
        s.kind = Kind::select_k_best;
        s.score_fn = fn;
        s.k = k;
        s.mi_bins = mi_bins;
        return s;
    }
};

inline std::string to_string(SelectorSpec::Kind kind) {
    switch (kind) {
        case SelectorSpec::Kind::variance_threshold: return "variance_threshold";
        case SelectorSpec::Kind::adaptive_variance: return "adaptive_variance";
        case SelectorSpec::Kind::select_k_best: return "select_k_best";
    }
    return "unknown";
}

/// Fitted selector state: surviving original indices (strictly increasing)
/// plus optional per-feature scores and the realized variance threshold.
struct FeatureSelection {
    std::size_t input_dim = 0;
    std::vector<std::size_t> selected;
    std::optional<std::vector<double>> scores;
    std::optional<double> fitted_threshold;

    FeatureSelection(std::size_t input_dim_, std::vector<std::size_t> selected_)
        : input_dim(input_dim_), selected(std::move(selected_)) {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (selected[i] >= input_dim)
                throw validation_error("selected index out of range");
            if (i > 0 && selected[i] <= selected[i - 1])
                throw validation_error("selected indices must be strictly increasing");
        }
    }
};

/// Keep the columns named by the fitted selection, original order preserved.
inline Matrix transform(const FeatureSelection& sel, const Matrix& x) {
    if (x.cols() != sel.input_dim)
        throw validation_error("fitted on different width");
    if (sel.selected.empty())
        throw no_features_error("no features survive");
    Matrix out(x.rows(), sel.selected.size());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row_ptr(r);
        for (std::size_t j = 0; j < sel.selected.size(); ++j)
            out(r, j) = row[sel.selected[j]];
    }
    return out;
}

/// Keep features whose variance is strictly above the threshold; at
/// threshold 0 this drops exact constants.
inline FeatureSelection fit_variance_threshold(const Matrix& x, double threshold) {
    if (threshold < 0.0) throw validation_error("variance threshold must be >= 0");
    std::vector<double> var = column_variance(x);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < var.size(); ++j)
        if (var[j] > threshold) keep.push_back(j);
    FeatureSelection sel(x.cols(), std::move(keep));
    sel.scores = std::move(var);
    sel.fitted_threshold = threshold;
    return sel;
}

/// Threshold = the given percentile of the feature-variance distribution;
/// features with variance >= threshold survive, so the maximum-variance
/// feature always does.
inline FeatureSelection fit_adaptive_variance(const Matrix& x, double pct) {
    std::vector<double> var = column_variance(x);
    const double threshold = percentile(var, pct);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < var.size(); ++j)
        if (var[j] >= threshold) keep.push_back(j);
    FeatureSelection sel(x.cols(), std::move(keep));
    sel.scores = std::move(var);
    sel.fitted_threshold = threshold;
    return sel;
}

namespace detail {

inline std::map<int, std::vector<std::size_t>> group_by_class(const std::vector<int>& y) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
    return groups;
}

} // namespace detail

/// One-way ANOVA F statistic per feature. A feature that separates classes
/// perfectly (within-class mean square 0, between > 0) receives the sentinel
/// 1e12 instead of infinity.
inline std::vector<double> score_f_classif(const Matrix& x, const std::vector<int>& y) {
    if (y.size() != x.rows()) throw validation_error("label count must equal row count");
    const auto groups = detail::group_by_class(y);
    if (groups.size() < 2) throw validation_error("f_classif requires >=2 classes");
    const std::size_t n = x.rows();
    const std::size_t n_classes = groups.size();
    const double sentinel = 1e12;

    std::vector<double> scores(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double grand = 0.0;
        for (std::size_t i = 0; i < n; ++i) grand += x(i, j);
        grand /= double(n);

        double ss_between = 0.0, ss_within = 0.0;
        for (const auto& [label, idx] : groups) {
            double mean = 0.0;
            for (std::size_t i : idx) mean += x(i, j);
            mean /= double(idx.size());
            ss_between += double(idx.size()) * (mean - grand) * (mean - grand);
            for (std::size_t i : idx) {
                const double diff = x(i, j) - mean;
                ss_within += diff * diff;
            }
        }
        const double df_between = double(n_classes - 1);
        const double df_within = double(n - n_classes);
        const double ms_between = ss_between / df_between;
        if (ms_between == 0.0) {
            scores[j] = 0.0;
        } else if (df_within == 0.0 || ss_within == 0.0) {
            scores[j] = sentinel;
        } else {
            scores[j] = ms_between / (ss_within / df_within);
        }
    }
    return scores;
}

/// Mutual information between each feature and the labels, estimated from a
/// joint histogram with equal-width feature bins. Natural log; constant
/// features score 0. This is the plug-in estimator, not ground-truth MI.
inline std::vector<double> score_mutual_info(const Matrix& x, const std::vector<int>& y,
                                             std::size_t bins = 10) {
    if (y.size() != x.rows()) throw validation_error("label count must equal row count");
    if (bins == 0) throw validation_error("mutual_info needs at least one bin");
    const auto groups = detail::group_by_class(y);
    if (groups.size() < 2) throw validation_error("mutual_info requires >=2 classes");
    const std::size_t n = x.rows();

    // Dense class ids in label order.
    std::map<int, std::size_t> class_id;
    for (const auto& [label, idx] : groups) class_id.emplace(label, class_id.size());
    const std::size_t n_classes = groups.size();

    std::vector<double> scores(x.cols(), 0.0);
    std::vector<double> joint(bins * n_classes);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double lo = x(0, j), hi = x(0, j);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, x(i, j));
            hi = std::max(hi, x(i, j));
        }
        if (lo == hi) {
            scores[j] = 0.0;
            continue;
        }
        std::fill(joint.begin(), joint.end(), 0.0);
        const double width = (hi - lo) / double(bins);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t b = static_cast<std::size_t>((x(i, j) - lo) / width);
            b = std::min(b, bins - 1);
            joint[b * n_classes + class_id.at(y[i])] += 1.0;
        }
        std::vector<double> p_bin(bins, 0.0), p_class(n_classes, 0.0);
        for (std::size_t b = 0; b < bins; ++b)
            for (std::size_t c = 0; c < n_classes; ++c) {
                joint[b * n_classes + c] /= double(n);
                p_bin[b] += joint[b * n_classes + c];
                p_class[c] += joint[b * n_classes + c];
            }
        double mi = 0.0;
        for (std::size_t b = 0; b < bins; ++b)
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double pbc = joint[b * n_classes + c];
                if (pbc > 0.0) mi += pbc * std::log(pbc / (p_bin[b] * p_class[c]));
            }
        scores[j] = std::max(mi, 0.0);
    }
    return scores;
}

inline std::vector<double> compute_scores(const Matrix& x, const std::vector<int>& y,
                                          ScoreFn fn, std::size_t mi_bins = 10) {
    return fn == ScoreFn::f_classif ? score_f_classif(x, y)
                                    : score_mutual_info(x, y, mi_bins);
}

/// Top-k features by score, ties broken toward the lower original index.
inline FeatureSelection fit_select_k_best(const Matrix& x, const std::vector<int>& y,
                                          ScoreFn fn, std::size_t k,
                                          std::size_t mi_bins = 10) {
    if (k == 0) throw validation_error("k must be >= 1");
    if (k > x.cols()) throw validation_error("k exceeds feature count");
    std::vector<double> scores = compute_scores(x, y, fn, mi_bins);

    std::vector<std::size_t> order(x.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> keep(order.begin(), order.begin() + k);
    std::sort(keep.begin(), keep.end());

    FeatureSelection sel(x.cols(), std::move(keep));
    sel.scores = std::move(scores);
    return sel;
}

/// Fractional ranks for descending scores: the best score gets rank 1, tied
/// scores share the mean of the ranks they span.
inline std::vector<double> fractional_ranks(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mean_rank = (double(i + 1) + double(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

/// Rank aggregation over raw per-method score vectors: mean fractional rank
/// per feature, then the k smallest aggregate ranks (ties toward lower index).
inline FeatureSelection fit_rank_aggregated_scores(
    std::size_t input_dim, const std::vector<std::vector<double>>& method_scores,
    std::size_t k) {
    if (method_scores.empty()) throw validation_error("rank aggregation needs >=1 method");
    if (k == 0) throw validation_error("k must be >= 1");
    if (k > input_dim) throw validation_error("k exceeds feature count");
    std::vector<double> aggregate(input_dim, 0.0);
    for (const auto& scores : method_scores) {
        if (scores.size() != input_dim)
            throw validation_error("method score length must equal feature count");
        const std::vector<double> ranks = fractional_ranks(scores);
        for (std::size_t j = 0; j < input_dim; ++j) aggregate[j] += ranks[j];
    }
    for (double& a : aggregate) a /= double(method_scores.size());

    std::vector<std::size_t> order(input_dim);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return aggregate[a] < aggregate[b];
    });
    std::vector<std::size_t> keep(order.begin(), order.begin() + k);
    std::sort(keep.begin(), keep.end());

    FeatureSelection sel(input_dim, std::move(keep));
    sel.scores = std::move(aggregate); // aggregate mean rank, lower is better
    return sel;
}

/// Rank-aggregated selection across several score-bearing selectors.
/// Only select_k_best methods carry scores; pure-threshold selectors are
/// rejected.
inline FeatureSelection fit_rank_aggregated(const Matrix& x, const std::vector<int>& y,
                                            const std::vector<SelectorSpec>& methods,
                                            std::size_t k) {
    if (methods.empty()) throw validation_error("rank aggregation needs >=1 method");
    std::vector<std::vector<double>> method_scores;
    method_scores.reserve(methods.size());
    for (const SelectorSpec& m : methods) {
        if (m.kind != SelectorSpec::Kind::select_k_best)
            throw validation_error("method does not expose scores: " + to_string(m.kind));
        method_scores.push_back(compute_scores(x, y, m.score_fn, m.mi_bins));
    }
    return fit_rank_aggregated_scores(x.cols(), method_scores, k);
}

/// A rank-aggregation stage for pipelines.
struct RankAggregatedSpec {
    std::vector<SelectorSpec> methods;
    std::size_t k = 1;
};

/// One pipeline stage: a basic selector or a rank-aggregation stage.
using AnySelector = std::variant<SelectorSpec, RankAggregatedSpec>;

inline std::string stage_name(const AnySelector& stage) {
    if (std::holds_alternative<SelectorSpec>(stage))
        return to_string(std::get<SelectorSpec>(stage).kind);
    return "rank_aggregated";
}

/// Fit one basic selector. `y` may be null for the variance selectors.
inline FeatureSelection fit_selector(const SelectorSpec& spec, const Matrix& x,
                                     const std::vector<int>* y) {
    switch (spec.kind) {
        case SelectorSpec::Kind::variance_threshold:
            return fit_variance_threshold(x, spec.threshold);
        case SelectorSpec::Kind::adaptive_variance:
            return fit_adaptive_variance(x, spec.percentile);
        case SelectorSpec::Kind::select_k_best:
            if (y == nullptr)
                throw validation_error("select_k_best requires labels");
            return fit_select_k_best(x, *y, spec.score_fn, spec.k, spec.mi_bins);
    }
    throw validation_error("unknown selector kind");
}

inline FeatureSelection fit_any(const AnySelector& stage, const Matrix& x,
                                const std::vector<int>* y) {
    if (std::holds_alternative<SelectorSpec>(stage))
        return fit_selector(std::get<SelectorSpec>(stage), x, y);
    const auto& agg = std::get<RankAggregatedSpec>(stage);
    if (y == nullptr) throw validation_error("rank_aggregated requires labels");
    return fit_rank_aggregated(x, *y, agg.methods, agg.k);
}

/// Sequential composition: each stage is fitted on the previous stage's
/// output and the final selection is reported in original-index space.
inline FeatureSelection fit_pipeline(const Matrix& x, const std::vector<int>* y,
                                     const std::vector<AnySelector>& stages) {
    if (stages.empty()) throw validation_error("chain must contain >=1 selector");
    std::vector<std::size_t> current(x.cols());
    std::iota(current.begin(), current.end(), 0);
    Matrix working = x;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        FeatureSelection fitted = fit_any(stages[s], working, y);
        if (fitted.selected.empty())
            throw no_features_error("chain stage " + std::to_string(s + 1) + " (" +
                                    stage_name(stages[s]) + "): no features survive");
        std::vector<std::size_t> composed;
        composed.reserve(fitted.selected.size());
        for (std::size_t local : fitted.selected) composed.push_back(current[local]);
        current = std::move(composed);
        working = transform(fitted, working);
    }
    return FeatureSelection(x.cols(), std::move(current));
}

/// Chain of basic selectors, output of one feeding the next.
inline FeatureSelection fit_chained(const Matrix& x, const std::vector<int>* y,
                                    const std::vector<SelectorSpec>& specs) {
    std::vector<AnySelector> stages(specs.begin(), specs.end());
    return fit_pipeline(x, y, stages);
}

} // namespace cml
