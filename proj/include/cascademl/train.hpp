#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/format.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/network.hpp"
#include "cascademl/rng.hpp"

namespace cml {

enum class Optimizer { adam, sgd };
enum class EsMode { min, max };

inline std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }
inline std::string to_string(EsMode m) { return m == EsMode::min ? "min" : "max"; }

inline Optimizer optimizer_from_string(const std::string& name) {
    if (name == "adam") return Optimizer::adam;
    if (name == "sgd") return Optimizer::sgd;
    throw validation_error("unknown optimizer: " + name);
}

inline EsMode es_mode_from_string(const std::string& name) {
    if (name == "min") return EsMode::min;
    if (name == "max") return EsMode::max;
    throw validation_error("unknown es_mode: " + name);
}

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    Loss loss = Loss::binary_crossentropy;
    Optimizer optimizer = Optimizer::adam;
    double learn_rate = 0.001;
    std::string stop_criteria = "val_loss";
    EsMode es_mode = EsMode::min;
    std::size_t es_patience = 5;
    std::vector<std::string> metrics; // subset of {"accuracy"}
    int verbose = 0;
    std::uint64_t seed = 0;
};

/// Per-epoch metric series keyed by name ("loss", "val_loss", "accuracy",
/// "val_accuracy"). best_epoch is the 0-based index of the epoch whose
/// snapshot the trainer restored.
struct TrainingHistory {
    std::map<std::string, std::vector<double>> series;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    std::size_t epochs() const {
        return series.empty() ? 0 : series.begin()->second.size();
    }
    bool has(const std::string& name) const { return series.count(name) > 0; }
    const std::vector<double>& at(const std::string& name) const {
        auto it = series.find(name);
        if (it == series.end())
            throw validation_error("unknown metric: " + name);
        return it->second;
    }
};

/// Tracks a metric across epochs. Improvement is strict (no min-delta);
/// training stops once the metric has failed to improve for
/// max(1, patience) consecutive epochs.
class EarlyStopper {
public:
    EarlyStopper(EsMode mode, std::size_t patience)
        : mode_(mode), patience_(std::max<std::size_t>(1, patience)) {}

    /// Feed the next epoch's value; returns true when it improved.
    bool observe(double value) {
        const bool improved =
            epochs_seen_ == 0 ||
            (mode_ == EsMode::min ? value < best_ : value > best_);
        if (improved) {
            best_ = value;
            best_epoch_ = epochs_seen_;
            bad_streak_ = 0;
        } else {
            ++bad_streak_;
        }
        ++epochs_seen_;
        return improved;
    }

    bool should_stop() const { return bad_streak_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    EsMode mode_;
    std::size_t patience_;
    double best_ = 0.0;
    std::size_t best_epoch_ = 0;
    std::size_t bad_streak_ = 0;
    std::size_t epochs_seen_ = 0;
};

namespace detail {

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::uint64_t step = 0;
};

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v,
                        double lr, std::uint64_t step) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(beta1, double(step));
    const double c2 = 1.0 - std::pow(beta2, double(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

inline void sgd_update(std::vector<double>& param, const std::vector<double>& grad,
                       double lr) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

inline Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end) {
    Matrix out(end - begin, x.cols());
    for (std::size_t i = begin; i < end; ++i) {
        const double* src = x.row_ptr(order[i]);
        double* dst = out.row_ptr(i - begin);
        std::copy(src, src + x.cols(), dst);
    }
    return out;
}

} // namespace detail

/// Evaluate loss (with L2 penalty) and the configured metrics on a dataset,
/// inference mode.
inline std::map<std::string, double> evaluate(const DenseNetwork& net, const Matrix& x,
                                              const Matrix& targets, Loss loss,
                                              const std::vector<std::string>& metrics) {
    const Matrix out = predict(net, x);
    std::map<std::string, double> values;
    values["loss"] = loss_value(loss, out, targets, net.l2_penalty());
    for (const std::string& name : metrics) {
        if (name == "accuracy")
            values["accuracy"] = accuracy(out, targets);
        else
            throw validation_error("unknown metric: " + name);
    }
    return values;
}

namespace detail {

/// Mini-batch training core; validation data may be absent.
inline TrainingHistory train_impl(DenseNetwork& net, const Matrix& x_train,
                                  const Matrix& y_train, const Matrix* x_val,
                                  const Matrix* y_val, const TrainConfig& cfg) {
    if (cfg.epochs == 0) throw validation_error("epochs must be >= 1");
    if (cfg.batch_size == 0) throw validation_error("batch_size must be >= 1");
    if (!(cfg.learn_rate > 0.0) && cfg.learn_rate != 0.0)
        throw validation_error("learn_rate must be >= 0");
    if (cfg.es_patience > cfg.epochs)
        throw validation_error("es_patience must not exceed epochs");
    if (net.n_layers() == 0) throw validation_error("network has no layers");
    if (x_train.rows() != y_train.rows())
        throw validation_error("training inputs and targets disagree on rows");
    if (x_val && x_val->rows() != y_val->rows())
        throw validation_error("validation inputs and targets disagree on rows");
    if (y_train.cols() != net.output_dim())
        throw validation_error("target width does not match network output");
    for (const std::string& m : cfg.metrics)
        if (m != "accuracy") throw validation_error("unknown metric: " + m);

    // stop_criteria must name loss or a configured metric, optionally val_-prefixed.
    {
        std::string base = cfg.stop_criteria;
        const bool is_val = base.rfind("val_", 0) == 0;
        if (is_val) base = base.substr(4);
        const bool known = base == "loss" ||
            std::find(cfg.metrics.begin(), cfg.metrics.end(), base) != cfg.metrics.end();
        if (!known)
            throw validation_error("stop_criteria names an untracked metric: " + cfg.stop_criteria);
        if (is_val && x_val == nullptr)
            throw validation_error("stop_criteria needs validation data: " + cfg.stop_criteria);
    }

    Rng rng(cfg.seed);
    detail::AdamState adam;
    const bool use_adam = cfg.optimizer == Optimizer::adam;
    if (use_adam) {
        for (const Layer& layer : net.layers()) {
            adam.m.emplace_back(layer.weights.data().size(), 0.0);
            adam.v.emplace_back(layer.weights.data().size(), 0.0);
            adam.m.emplace_back(layer.bias.size(), 0.0);
            adam.v.emplace_back(layer.bias.size(), 0.0);
            adam.m.emplace_back(layer.bn_gamma.size(), 0.0);
            adam.v.emplace_back(layer.bn_gamma.size(), 0.0);
            adam.m.emplace_back(layer.bn_beta.size(), 0.0);
            adam.v.emplace_back(layer.bn_beta.size(), 0.0);
        }
    }

    TrainingHistory history;
    EarlyStopper stopper(cfg.es_mode, cfg.es_patience);
    std::vector<Layer> best_layers = net.layers();

    std::vector<std::size_t> order(x_train.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Matrix xb = detail::take_rows(x_train, order, start, stop);
            const Matrix yb = detail::take_rows(y_train, order, start, stop);

            detail::ForwardCache cache;
            std::vector<detail::BnBatchStats> bn_stats;
            detail::forward_engine(net, xb, Mode::train, &rng, &cache, &bn_stats);
            for (const auto& stats : bn_stats) {
                Layer& layer = net.layers()[stats.layer];
                for (std::size_t c = 0; c < stats.mean.size(); ++c) {
                    layer.bn_running_mean[c] = kBatchNormMomentum * layer.bn_running_mean[c] +
                                               (1.0 - kBatchNormMomentum) * stats.mean[c];
                    layer.bn_running_var[c] = kBatchNormMomentum * layer.bn_running_var[c] +
                                              (1.0 - kBatchNormMomentum) * stats.var[c];
                }
            }
            const detail::Gradients grads = detail::backward(net, cache, yb, cfg.loss);

            if (use_adam) ++adam.step;
            std::size_t slot = 0;
            for (std::size_t li = 0; li < net.n_layers(); ++li) {
                Layer& layer = net.layers()[li];
                if (use_adam) {
                    detail::adam_update(layer.weights.data(), grads.d_weights[li].data(),
                                        adam.m[slot], adam.v[slot], cfg.learn_rate, adam.step);
                    detail::adam_update(layer.bias, grads.d_bias[li], adam.m[slot + 1],
                                        adam.v[slot + 1], cfg.learn_rate, adam.step);
                    if (layer.spec.batch_norm) {
                        detail::adam_update(layer.bn_gamma, grads.d_gamma[li], adam.m[slot + 2],
                                            adam.v[slot + 2], cfg.learn_rate, adam.step);
                        detail::adam_update(layer.bn_beta, grads.d_beta[li], adam.m[slot + 3],
                                            adam.v[slot + 3], cfg.learn_rate, adam.step);
                    }
                } else {
                    detail::sgd_update(layer.weights.data(), grads.d_weights[li].data(),
                                       cfg.learn_rate);
                    detail::sgd_update(layer.bias, grads.d_bias[li], cfg.learn_rate);
                    if (layer.spec.batch_norm) {
                        detail::sgd_update(layer.bn_gamma, grads.d_gamma[li], cfg.learn_rate);
                        detail::sgd_update(layer.bn_beta, grads.d_beta[li], cfg.learn_rate);
                    }
                }
                slot += 4;
            }
        }

        const auto train_vals = evaluate(net, x_train, y_train, cfg.loss, cfg.metrics);
        for (const auto& [name, value] : train_vals) history.series[name].push_back(value);
        bool finite = std::isfinite(train_vals.at("loss"));
        if (x_val) {
            const auto val_vals = evaluate(net, *x_val, *y_val, cfg.loss, cfg.metrics);
            for (const auto& [name, value] : val_vals)
                history.series["val_" + name].push_back(value);
            finite = finite && std::isfinite(val_vals.at("loss"));
        }
        if (!finite)
            throw divergence_error("divergence detected at epoch " + std::to_string(epoch + 1));

        if (cfg.verbose >= 1) {
            std::string line = "epoch " + std::to_string(epoch + 1) + "/" +
                               std::to_string(cfg.epochs);
            for (const auto& [name, series] : history.series)
                line += " - " + name + " " + format_fixed(series.back(), 4);
            std::cout << line << "\n";
        }

        const double criterion = history.at(cfg.stop_criteria).back();
        if (stopper.observe(criterion)) best_layers = net.layers();
        if (stopper.should_stop()) {
            history.stopped_early = true;
            break;
        }
    }

    net.layers() = best_layers;
    history.best_epoch = stopper.best_epoch();
    return history;
}

} // namespace detail

/// Mini-batch training with seeded shuffling, Adam or SGD, early stopping on
/// the configured criterion, and best-weights restoration. Per-epoch series
/// come from a full inference-mode evaluation after the epoch's updates.
/// Deterministic: identical seeds and inputs give bit-identical histories.
inline TrainingHistory train(DenseNetwork& net, const Matrix& x_train, const Matrix& y_train,
                             const Matrix& x_val, const Matrix& y_val,
                             const TrainConfig& cfg) {
    return detail::train_impl(net, x_train, y_train, &x_val, &y_val, cfg);
}

/// Training without a validation set; stop_criteria must not be val_-prefixed.
inline TrainingHistory train(DenseNetwork& net, const Matrix& x_train, const Matrix& y_train,
                             const TrainConfig& cfg) {
    return detail::train_impl(net, x_train, y_train, nullptr, nullptr, cfg);
}

/// Tab-separated history table, one row per epoch, columns sorted by name.
inline std::string history_to_tsv(const TrainingHistory& history) {
    std::string out = "epoch";
    for (const auto& [name, series] : history.series) out += "\t" + name;
    out += "\n";
    for (std::size_t e = 0; e < history.epochs(); ++e) {
        out += std::to_string(e + 1);
        for (const auto& [name, series] : history.series)
            out += "\t" + format_double(series[e]);
        out += "\n";
    }
    out += "# best_epoch\t" + std::to_string(history.best_epoch + 1) + "\n";
    out += "# stopped_early\t" + std::string(history.stopped_early ? "1" : "0") + "\n";
    return out;
}

inline void save_history(const TrainingHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write history file: " + path);
    out << history_to_tsv(history);
    if (!out) throw io_error("failed writing history file: " + path);
}

inline TrainingHistory load_history(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read history file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw io_error("empty history file: " + path);
    std::vector<std::string> names;
    {
        std::istringstream hs(header);
        std::string cell;
        while (std::getline(hs, cell, '\t')) names.push_back(cell);
    }
    if (names.empty() || names.front() != "epoch")
        throw io_error("malformed history header: " + path);

    TrainingHistory history;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# best_epoch", 0) == 0) {
            history.best_epoch = std::stoul(line.substr(line.find('\t') + 1)) - 1;
            continue;
        }
        if (line.rfind("# stopped_early", 0) == 0) {
            history.stopped_early = line.substr(line.find('\t') + 1) == "1";
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ls, cell, '\t')) {
            if (col >= names.size()) throw io_error("ragged history row: " + path);
            if (col > 0) history.series[names[col]].push_back(parse_double(cell));
            ++col;
        }
        if (col != names.size()) throw io_error("ragged history row: " + path);
    }
    return history;
}

} // namespace cml
