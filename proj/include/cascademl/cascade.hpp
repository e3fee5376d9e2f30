#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/format.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/network.hpp"
#include "cascademl/pca.hpp"
#include "cascademl/stats.hpp"
#include "cascademl/train.hpp"

namespace cml {

/// Train-fitted column scaler: optionally center, optionally also divide by
/// the per-column standard deviation (zero-std columns stay centered only).
struct Scaler {
    bool normalize = false;
    bool unit = false;
    std::vector<double> mean;
    std::vector<double> stddev;

    Matrix apply(const Matrix& x) const {
        if (!normalize) return x;
        if (x.cols() != mean.size())
            throw validation_error("scaler fitted on different width");
        Matrix out = x;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            double* row = out.row_ptr(r);
            for (std::size_t c = 0; c < out.cols(); ++c) {
                row[c] -= mean[c];
                if (unit && stddev[c] > 0.0) row[c] /= stddev[c];
            }
        }
        return out;
    }
};

struct PreparedData {
    Matrix x_train;
    Matrix y_train;
    Matrix x_val;
    Matrix y_val;
    Scaler scaler;
};

/// Absorb a fitted scaler into the first layer's affine transform so the
/// network accepts unscaled inputs:
///   ((x - mu) / sigma) W + b  ==  x (W / sigma) + (b - sum_f mu_f/sigma_f W_f).
/// Makes an exported model self-contained; predictions match the scaled
/// pipeline up to rounding.
inline void fold_scaler_into_input_layer(DenseNetwork& net, const Scaler& scaler) {
    if (!scaler.normalize) return;
    if (net.n_layers() == 0) throw validation_error("network has no layers");
    Layer& first = net.layers().front();
    if (first.in_dim() != scaler.mean.size())
        throw validation_error("scaler fitted on different width");
    for (std::size_t f = 0; f < first.in_dim(); ++f) {
        const double divisor = (scaler.unit && scaler.stddev[f] > 0.0) ? scaler.stddev[f] : 1.0;
        for (std::size_t j = 0; j < first.units(); ++j) {
            first.weights(f, j) /= divisor;
            first.bias[j] -= scaler.mean[f] * first.weights(f, j);
        }
    }
}

/// Center/scale the training data and apply the same train-fitted scaler to
/// the validation split. `unit` only matters when `normalize` is set.
inline PreparedData data_init(const Matrix& x_train, const Matrix& y_train,
                              const Matrix& x_val, const Matrix& y_val,
                              bool normalize, bool unit) {
    if (x_val.cols() != x_train.cols())
        throw validation_error("validation width mismatch");
    if (x_train.rows() != y_train.rows() || x_val.rows() != y_val.rows())
        throw validation_error("inputs and targets disagree on rows");

    Scaler scaler;
    scaler.normalize = normalize;
    scaler.unit = normalize && unit;
    if (scaler.normalize) {
        scaler.mean = column_means(x_train);
        scaler.stddev = column_stddevs(x_train);
    }
    return PreparedData{scaler.apply(x_train), y_train, scaler.apply(x_val), y_val, scaler};
}

/// Hyperparameters of the cascade search. The hidden-layer template fixes
/// everything about a hidden layer except its width, which the per-stage PCA
/// chooses. `pca_variance` holds one threshold per layer, or a single value
/// broadcast to every layer.
struct SearchConfig {
    std::size_t layers = 1;
    std::vector<double> pca_variance{0.95};
    LayerSpec hidden; // units ignored
    std::size_t output_neurons = 1;
    Activation out_activation = Activation::sigmoid;
    TrainConfig train;
};

struct StageDiagnostics {
    std::vector<double> explained_variance; // full ratio curve of the stage PCA
    std::size_t chosen_k = 0;
    bool degenerate = false; // PCA saw (near-)constant activations
    TrainingHistory history; // empty for stage 1 (no training precedes it)
};

struct SearchResult {
    DenseNetwork model;
    std::vector<std::size_t> widths;
    std::vector<StageDiagnostics> per_stage;
    TrainingHistory final_history;
};

namespace detail {

inline std::vector<double> stage_thresholds(const SearchConfig& cfg) {
    if (cfg.layers == 0) throw validation_error("layers must be >= 1");
    std::vector<double> thresholds = cfg.pca_variance;
    if (thresholds.size() == 1) thresholds.assign(cfg.layers, thresholds.front());
    if (thresholds.size() != cfg.layers)
        throw validation_error("pca_variance needs 1 value or one per layer");
    for (double t : thresholds)
        if (!(t > 0.0 && t <= 1.0))
            throw validation_error("variance threshold out of range");
    return thresholds;
}

inline LayerSpec output_spec(const SearchConfig& cfg) {
    LayerSpec spec;
    spec.units = cfg.output_neurons;
    spec.activation = cfg.out_activation;
    spec.dropout_rate = 0.0;
    spec.batch_norm = false;
    spec.l2 = cfg.hidden.l2;
    spec.init = cfg.hidden.init;
    return spec;
}

} // namespace detail

/// PCA-driven layer sizing. Stage 1 sizes the first hidden layer from a PCA
/// of the prepared training data; each later stage trains the network built
/// so far (with a fresh output head), runs PCA on the last hidden layer's
/// inference-mode activations, and sizes the next layer from the component
/// count that reaches that stage's variance threshold. Hidden weights warm
/// start across stages; only the new layer and the head are re-initialized.
/// One final training runs after the last layer is added.
///
/// `on_training` is called before every training pass with the 1-based stage
/// number (cfg.layers + 1 marks the final pass).
inline SearchResult build(const SearchConfig& cfg, const PreparedData& data,
                          const std::function<void(std::size_t)>& on_training = {}) {
    const std::vector<double> thresholds = detail::stage_thresholds(cfg);
    if (cfg.output_neurons == 0) throw validation_error("output_neurons must be >= 1");
    if (data.y_train.cols() != cfg.output_neurons)
        throw validation_error("target width does not match output_neurons");

    DenseNetwork hidden_stack(data.x_train.cols(), cfg.train.seed);
    std::vector<std::size_t> widths;
    std::vector<StageDiagnostics> per_stage;

    auto train_with_head = [&](std::size_t stage) {
        DenseNetwork candidate = hidden_stack;
        candidate.add_layer(detail::output_spec(cfg));
        if (on_training) on_training(stage);
        TrainingHistory history;
        try {
            history = train(candidate, data.x_train, data.y_train, data.x_val, data.y_val,
                            cfg.train);
        } catch (const divergence_error& e) {
            throw divergence_error("stage " + std::to_string(stage) + ": " + e.what());
        }
        return std::pair<DenseNetwork, TrainingHistory>(std::move(candidate),
                                                        std::move(history));
    };

    for (std::size_t stage = 1; stage <= cfg.layers; ++stage) {
        StageDiagnostics diag;
        PCAModel pca;
        if (stage == 1) {
            pca = fit_pca(data.x_train);
        } else {
            auto [trained, history] = train_with_head(stage);
            diag.history = std::move(history);
            // Keep the trained hidden layers; the head is dropped.
            trained.layers().pop_back();
            hidden_stack = std::move(trained);
            const std::vector<Matrix> acts = forward(hidden_stack, data.x_train, Mode::infer);
            pca = fit_pca(acts.back());
        }
        const std::size_t k = n_components_for_variance(pca, thresholds[stage - 1]);
        diag.explained_variance = pca.explained_variance_ratio;
        diag.chosen_k = k;
        diag.degenerate = pca.n_components() == 0;

        LayerSpec layer = cfg.hidden;
        layer.units = k;
        hidden_stack.add_layer(layer);
        widths.push_back(k);
        per_stage.push_back(std::move(diag));
    }

    auto [final_model, final_history] = train_with_head(cfg.layers + 1);
    return SearchResult{std::move(final_model), std::move(widths), std::move(per_stage),
                        std::move(final_history)};
}

/// Chosen widths, one row per stage.
inline std::string widths_table(const SearchResult& result) {
    std::string out = "stage\twidth\n";
    for (std::size_t i = 0; i < result.widths.size(); ++i)
        out += std::to_string(i + 1) + "\t" + std::to_string(result.widths[i]) + "\n";
    return out;
}

/// Per-stage explained-variance curves with cumulative sums.
inline std::string variance_curves_table(const SearchResult& result) {
    std::string out = "stage\tcomponent\texplained_variance_ratio\tcumulative\n";
    for (std::size_t s = 0; s < result.per_stage.size(); ++s) {
        double cum = 0.0;
        const auto& curve = result.per_stage[s].explained_variance;
        for (std::size_t c = 0; c < curve.size(); ++c) {
            cum += curve[c];
            out += std::to_string(s + 1) + "\t" + std::to_string(c + 1) + "\t" +
                   format_double(curve[c]) + "\t" + format_double(cum) + "\n";
        }
    }
    return out;
}

} // namespace cml
