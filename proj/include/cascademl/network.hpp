#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/rng.hpp"

namespace cml {

enum class Activation { relu, sigmoid, tanh, softmax, linear };
enum class WeightInit { he_normal, glorot_uniform };
enum class Loss { binary_crossentropy, categorical_crossentropy, mse };
enum class Task { binary, categorical };
enum class Mode { train, infer };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::softmax: return "softmax";
        case Activation::linear: return "linear";
    }
    return "unknown";
}

inline std::string to_string(WeightInit w) {
    return w == WeightInit::he_normal ? "he_normal" : "glorot_uniform";
}

inline std::string to_string(Loss l) {
    switch (l) {
        case Loss::binary_crossentropy: return "binary_crossentropy";
        case Loss::categorical_crossentropy: return "categorical_crossentropy";
        case Loss::mse: return "mse";
    }
    return "unknown";
}

inline Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "softmax") return Activation::softmax;
    if (name == "linear") return Activation::linear;
    throw validation_error("unknown activation: " + name);
}

inline WeightInit init_from_string(const std::string& name) {
    if (name == "he_normal") return WeightInit::he_normal;
    if (name == "glorot_uniform") return WeightInit::glorot_uniform;
    throw validation_error("unknown weight init: " + name);
}

inline Loss loss_from_string(const std::string& name) {
    if (name == "binary_crossentropy") return Loss::binary_crossentropy;
    if (name == "categorical_crossentropy") return Loss::categorical_crossentropy;
    if (name == "mse") return Loss::mse;
    throw validation_error("unknown loss: " + name);
}

/// One dense layer: units, activation, inverted dropout, optional batch norm
/// (after the affine transform, before the activation), L2 penalty, init.
struct LayerSpec {
    std::size_t units = 1;
    Activation activation = Activation::relu;
    double dropout_rate = 0.0;
    bool batch_norm = false;
    double l2 = 0.0;
    WeightInit init = WeightInit::he_normal;
};

struct Layer {
    LayerSpec spec;
    Matrix weights;          // in_dim x units
    std::vector<double> bias;
    // batch-norm state (empty unless spec.batch_norm)
    std::vector<double> bn_gamma, bn_beta, bn_running_mean, bn_running_var;

    std::size_t in_dim() const { return weights.rows(); }
    std::size_t units() const { return weights.cols(); }
};

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.9;
constexpr double kProbClamp = 1e-7;

/// Feed-forward dense network. Layers are appended with `add_layer`; weights
/// are drawn from the network's own deterministic generator, so a fixed seed
/// gives identical parameters everywhere.
class DenseNetwork {
public:
    DenseNetwork(std::size_t input_dim, std::uint64_t seed)
        : input_dim_(input_dim), rng_(seed) {
        if (input_dim == 0) throw validation_error("input_dim must be >= 1");
    }

    void add_layer(const LayerSpec& spec) {
        if (spec.units == 0) throw validation_error("layer units must be >= 1");
        if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0))
            throw validation_error("dropout_rate must be in [0,1)");
        if (spec.l2 < 0.0) throw validation_error("l2 must be >= 0");
        if (!layers_.empty() && layers_.back().spec.activation == Activation::softmax)
            throw validation_error("softmax is only allowed on the output layer");

        const std::size_t fan_in = output_dim();
        const std::size_t fan_out = spec.units;
        Layer layer{spec, Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0),
                    {}, {}, {}, {}};
        if (spec.init == WeightInit::he_normal) {
            const double stddev = std::sqrt(2.0 / double(fan_in));
            for (double& w : layer.weights.data()) w = rng_.normal(0.0, stddev);
        } else {
            const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
            for (double& w : layer.weights.data()) w = rng_.uniform(-limit, limit);
        }
        if (spec.batch_norm) {
            layer.bn_gamma.assign(fan_out, 1.0);
            layer.bn_beta.assign(fan_out, 0.0);
            layer.bn_running_mean.assign(fan_out, 0.0);
            layer.bn_running_var.assign(fan_out, 1.0);
        }
        layers_.push_back(std::move(layer));
    }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const {
        return layers_.empty() ? input_dim_ : layers_.back().units();
    }
    std::size_t n_layers() const { return layers_.size(); }

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Rng& rng() { return rng_; }
    std::uint64_t seed() const { return rng_.seed(); }

    double l2_penalty() const {
        double acc = 0.0;
        for (const Layer& layer : layers_) {
            if (layer.spec.l2 == 0.0) continue;
            double sq = 0.0;
            for (double w : layer.weights.data()) sq += w * w;
            acc += layer.spec.l2 * sq;
        }
        return acc;
    }

private:
    std::size_t input_dim_;
    std::vector<Layer> layers_;
    Rng rng_;
};

namespace detail {

inline void apply_activation(Activation act, Matrix& m) {
    switch (act) {
        case Activation::relu:
            for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::sigmoid:
            for (double& v : m.data()) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Activation::tanh:
            for (double& v : m.data()) v = std::tanh(v);
            break;
        case Activation::linear:
            break;
        case Activation::softmax:
            for (std::size_t r = 0; r < m.rows(); ++r) {
                double* row = m.row_ptr(r);
                double peak = row[0];
                for (std::size_t c = 1; c < m.cols(); ++c) peak = std::max(peak, row[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < m.cols(); ++c) {
                    row[c] = std::exp(row[c] - peak);
                    sum += row[c];
                }
                for (std::size_t c = 0; c < m.cols(); ++c) row[c] /= sum;
            }
            break;
    }
}

/// Values cached by a training-mode forward pass for backpropagation.
struct ForwardCache {
    std::vector<Matrix> inputs;               // inputs[l] feeds layer l; back() is the output
    std::vector<Matrix> preact;               // post-norm, pre-activation
    std::vector<Matrix> activations;          // post-activation, pre-dropout
    std::vector<std::optional<Matrix>> xhat;  // batch-norm normalized values
    std::vector<std::vector<double>> bn_inv_std;
    std::vector<std::optional<Matrix>> dropout_masks; // scaled by 1/keep
};

struct BnBatchStats {
    std::size_t layer;
    std::vector<double> mean;
    std::vector<double> var;
};

/// Forward pass engine. Train mode normalizes with batch statistics and
/// applies inverted dropout (which needs `rng`); infer mode uses running
/// statistics and no dropout. Batch-norm batch statistics are reported via
/// `bn_stats` so the caller decides whether running averages move.
inline Matrix forward_engine(const DenseNetwork& net, const Matrix& x, Mode mode,
                             Rng* rng, ForwardCache* cache,
                             std::vector<BnBatchStats>* bn_stats) {
    if (x.cols() != net.input_dim())
        throw validation_error("input width does not match network input_dim");
    if (cache) {
        cache->inputs.clear();
        cache->preact.clear();
        cache->activations.clear();
        cache->xhat.clear();
        cache->bn_inv_std.clear();
        cache->dropout_masks.clear();
        cache->inputs.push_back(x);
    }

    Matrix current = x;
    const std::size_t n = x.rows();
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        const Layer& layer = net.layers()[l];
        Matrix z = matmul(current, layer.weights);
        for (std::size_t r = 0; r < n; ++r) {
            double* row = z.row_ptr(r);
            for (std::size_t c = 0; c < layer.units(); ++c) row[c] += layer.bias[c];
        }

        if (layer.spec.batch_norm) {
            const std::size_t u = layer.units();
            std::vector<double> mean(u, 0.0), var(u, 0.0);
            if (mode == Mode::train) {
                for (std::size_t r = 0; r < n; ++r) {
                    const double* row = z.row_ptr(r);
                    for (std::size_t c = 0; c < u; ++c) mean[c] += row[c];
                }
                for (double& m : mean) m /= double(n);
                for (std::size_t r = 0; r < n; ++r) {
                    const double* row = z.row_ptr(r);
                    for (std::size_t c = 0; c < u; ++c) {
                        const double d = row[c] - mean[c];
                        var[c] += d * d;
                    }
                }
                for (double& v : var) v /= double(n);
                if (bn_stats) bn_stats->push_back({l, mean, var});
            } else {
                mean = layer.bn_running_mean;
                var = layer.bn_running_var;
            }
            std::vector<double> inv_std(u);
            for (std::size_t c = 0; c < u; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
            Matrix xhat(n, u);
            for (std::size_t r = 0; r < n; ++r) {
                const double* zr = z.row_ptr(r);
                double* xr = xhat.row_ptr(r);
                double* out = z.row_ptr(r);
                for (std::size_t c = 0; c < u; ++c) {
                    xr[c] = (zr[c] - mean[c]) * inv_std[c];
                    out[c] = layer.bn_gamma[c] * xr[c] + layer.bn_beta[c];
                }
            }
            if (cache) {
                cache->xhat.push_back(std::move(xhat));
                cache->bn_inv_std.push_back(std::move(inv_std));
            }
        } else if (cache) {
            cache->xhat.push_back(std::nullopt);
            cache->bn_inv_std.push_back({});
        }

        if (cache) cache->preact.push_back(z);
        apply_activation(layer.spec.activation, z);
        if (cache) cache->activations.push_back(z);

        if (mode == Mode::train && layer.spec.dropout_rate > 0.0) {
            if (!rng)
                throw validation_error("train-mode forward with dropout needs an rng");
            const double keep = 1.0 - layer.spec.dropout_rate;
            Matrix mask(z.rows(), z.cols());
            for (double& m : mask.data()) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
            for (std::size_t i = 0; i < z.data().size(); ++i) z.data()[i] *= mask.data()[i];
            if (cache) cache->dropout_masks.push_back(std::move(mask));
        } else if (cache) {
            cache->dropout_masks.push_back(std::nullopt);
        }

        if (cache) cache->inputs.push_back(z);
        current = std::move(z);
    }
    return current;
}

} // namespace detail

/// All per-layer post-activation outputs. Train mode uses batch statistics
/// and inverted dropout; infer mode uses running statistics and no dropout.
/// Running statistics are never modified here.
inline std::vector<Matrix> forward(const DenseNetwork& net, const Matrix& x,
                                   Mode mode = Mode::infer, Rng* rng = nullptr) {
    detail::ForwardCache cache;
    detail::forward_engine(net, x, mode, rng, &cache, nullptr);
    // inputs[1..] are the post-dropout layer outputs
    return std::vector<Matrix>(cache.inputs.begin() + 1, cache.inputs.end());
}

/// Inference-mode network output.
inline Matrix predict(const DenseNetwork& net, const Matrix& x) {
    return detail::forward_engine(net, x, Mode::infer, nullptr, nullptr, nullptr);
}

/// Mean loss over the batch plus the caller's L2 penalty. Probabilities are
/// clamped to [1e-7, 1 - 1e-7] before any log.
inline double loss_value(Loss loss, const Matrix& pred, const Matrix& target,
                         double l2_penalty = 0.0) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw validation_error("prediction and target shapes differ");
    const double lo = kProbClamp, hi = 1.0 - kProbClamp;
    const std::size_t n = pred.rows();
    double acc = 0.0;
    switch (loss) {
        case Loss::binary_crossentropy: {
            for (std::size_t i = 0; i < pred.data().size(); ++i) {
                const double p = std::clamp(pred.data()[i], lo, hi);
                const double y = target.data()[i];
                acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            }
            acc /= double(pred.data().size());
            break;
        }
        case Loss::categorical_crossentropy: {
            for (std::size_t i = 0; i < pred.data().size(); ++i) {
                const double p = std::clamp(pred.data()[i], lo, hi);
                acc += -target.data()[i] * std::log(p);
            }
            acc /= double(n);
            break;
        }
        case Loss::mse: {
            for (std::size_t i = 0; i < pred.data().size(); ++i) {
                const double d = pred.data()[i] - target.data()[i];
                acc += d * d;
            }
            acc /= double(pred.data().size());
            break;
        }
    }
    return acc + l2_penalty;
}

/// Classification accuracy against targets shaped like the network output:
/// a single column is thresholded at 0.5, wider targets use argmax.
inline double accuracy(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw validation_error("prediction and target shapes differ");
    std::size_t hits = 0;
    if (pred.cols() == 1) {
        for (std::size_t r = 0; r < pred.rows(); ++r)
            hits += (pred(r, 0) >= 0.5) == (target(r, 0) >= 0.5);
    } else {
        for (std::size_t r = 0; r < pred.rows(); ++r) {
            std::size_t ap = 0, at = 0;
            for (std::size_t c = 1; c < pred.cols(); ++c) {
                if (pred(r, c) > pred(r, ap)) ap = c;
                if (target(r, c) > target(r, at)) at = c;
            }
            hits += ap == at;
        }
    }
    return double(hits) / double(pred.rows());
}

/// Integer class labels from network outputs. Binary expects exactly one
/// output unit and maps p >= 0.5 to 1; categorical expects >= 2 units and
/// takes the argmax, ties toward the lower class index.
inline std::vector<int> predict_classes(const DenseNetwork& net, const Matrix& x, Task task) {
    if (task == Task::binary && net.output_dim() != 1)
        throw validation_error("binary task requires exactly 1 output unit");
    if (task == Task::categorical && net.output_dim() < 2)
        throw validation_error("categorical task requires >=2 output units");
    const Matrix out = predict(net, x);
    std::vector<int> labels(out.rows(), 0);
    if (task == Task::binary) {
        for (std::size_t r = 0; r < out.rows(); ++r) labels[r] = out(r, 0) >= 0.5 ? 1 : 0;
    } else {
        for (std::size_t r = 0; r < out.rows(); ++r) {
            std::size_t arg = 0;
            for (std::size_t c = 1; c < out.cols(); ++c)
                if (out(r, c) > out(r, arg)) arg = c;
            labels[r] = int(arg);
        }
    }
    return labels;
}

namespace detail {

struct Gradients {
    std::vector<Matrix> d_weights;
    std::vector<std::vector<double>> d_bias;
    std::vector<std::vector<double>> d_gamma;
    std::vector<std::vector<double>> d_beta;
};

inline Matrix loss_gradient(Loss loss, const Matrix& pred, const Matrix& target) {
    const double lo = kProbClamp, hi = 1.0 - kProbClamp;
    const std::size_t n = pred.rows();
    Matrix g(pred.rows(), pred.cols());
    switch (loss) {
        case Loss::binary_crossentropy: {
            const double scale = 1.0 / double(pred.data().size());
            for (std::size_t i = 0; i < pred.data().size(); ++i) {
                const double raw = pred.data()[i];
                if (raw < lo || raw > hi) { g.data()[i] = 0.0; continue; }
                const double y = target.data()[i];
                g.data()[i] = scale * (-y / raw + (1.0 - y) / (1.0 - raw));
            }
            break;
        }
        case Loss::categorical_crossentropy: {
            const double scale = 1.0 / double(n);
            for (std::size_t i = 0; i < pred.data().size(); ++i) {
                const double raw = pred.data()[i];
                if (raw < lo || raw > hi) { g.data()[i] = 0.0; continue; }
                g.data()[i] = scale * (-target.data()[i] / raw);
            }
            break;
        }
        case Loss::mse: {
            const double scale = 2.0 / double(pred.data().size());
            for (std::size_t i = 0; i < pred.data().size(); ++i)
                g.data()[i] = scale * (pred.data()[i] - target.data()[i]);
            break;
        }
    }
    return g;
}

/// Backpropagation through the cached forward pass. Returns gradients of the
/// batch loss (including L2 terms) for every trainable parameter.
inline Gradients backward(const DenseNetwork& net, const ForwardCache& cache,
                          const Matrix& target, Loss loss) {
    const std::size_t n_layers = net.n_layers();
    Gradients grads;
    grads.d_weights.reserve(n_layers);
    for (const Layer& layer : net.layers()) {
        grads.d_weights.emplace_back(layer.in_dim(), layer.units());
        grads.d_bias.emplace_back(layer.units(), 0.0);
        grads.d_gamma.emplace_back(layer.spec.batch_norm ? layer.units() : 0, 0.0);
        grads.d_beta.emplace_back(layer.spec.batch_norm ? layer.units() : 0, 0.0);
    }

    Matrix grad = loss_gradient(loss, cache.inputs.back(), target);
    for (std::size_t li = n_layers; li-- > 0;) {
        const Layer& layer = net.layers()[li];
        const std::size_t n = grad.rows();
        const std::size_t u = layer.units();

        if (cache.dropout_masks[li]) {
            const Matrix& mask = *cache.dropout_masks[li];
            for (std::size_t i = 0; i < grad.data().size(); ++i)
                grad.data()[i] *= mask.data()[i];
        }

        const Matrix& act = cache.activations[li];
        switch (layer.spec.activation) {
            case Activation::relu:
                for (std::size_t i = 0; i < grad.data().size(); ++i)
                    if (act.data()[i] <= 0.0) grad.data()[i] = 0.0;
                break;
            case Activation::sigmoid:
                for (std::size_t i = 0; i < grad.data().size(); ++i) {
                    const double a = act.data()[i];
                    grad.data()[i] *= a * (1.0 - a);
                }
                break;
            case Activation::tanh:
                for (std::size_t i = 0; i < grad.data().size(); ++i) {
                    const double a = act.data()[i];
                    grad.data()[i] *= 1.0 - a * a;
                }
                break;
            case Activation::linear:
                break;
            case Activation::softmax:
                for (std::size_t r = 0; r < n; ++r) {
                    double* grow = grad.row_ptr(r);
                    const double* arow = act.row_ptr(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < u; ++c) dot += grow[c] * arow[c];
                    for (std::size_t c = 0; c < u; ++c) grow[c] = arow[c] * (grow[c] - dot);
                }
                break;
        }

        if (layer.spec.batch_norm) {
            const Matrix& xhat = *cache.xhat[li];
            const std::vector<double>& inv_std = cache.bn_inv_std[li];
            std::vector<double> sum_dy(u, 0.0), sum_dy_xhat(u, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                const double* grow = grad.row_ptr(r);
                const double* xrow = xhat.row_ptr(r);
                for (std::size_t c = 0; c < u; ++c) {
                    sum_dy[c] += grow[c];
                    sum_dy_xhat[c] += grow[c] * xrow[c];
                }
            }
            for (std::size_t c = 0; c < u; ++c) {
                grads.d_gamma[li][c] = sum_dy_xhat[c];
                grads.d_beta[li][c] = sum_dy[c];
            }
            const double m = double(n);
            for (std::size_t r = 0; r < n; ++r) {
                double* grow = grad.row_ptr(r);
                const double* xrow = xhat.row_ptr(r);
                for (std::size_t c = 0; c < u; ++c) {
                    const double dxhat = grow[c] * layer.bn_gamma[c];
                    const double term = m * dxhat - sum_dy[c] * layer.bn_gamma[c] -
                                        xrow[c] * sum_dy_xhat[c] * layer.bn_gamma[c];
                    grow[c] = inv_std[c] / m * term;
                }
            }
        }

        Matrix dw = matmul_at_b(cache.inputs[li], grad);
        if (layer.spec.l2 > 0.0) {
            for (std::size_t i = 0; i < dw.data().size(); ++i)
                dw.data()[i] += 2.0 * layer.spec.l2 * layer.weights.data()[i];
        }
        grads.d_weights[li] = std::move(dw);
        for (std::size_t r = 0; r < n; ++r) {
            const double* grow = grad.row_ptr(r);
            for (std::size_t c = 0; c < u; ++c) grads.d_bias[li][c] += grow[c];
        }
        if (li > 0) grad = matmul_a_bt(grad, layer.weights);
    }
    return grads;
}

} // namespace detail

} // namespace cml
