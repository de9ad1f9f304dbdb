#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "esprd/core.hpp"
#include "esprd/rng.hpp"

namespace esprd {

struct FnnArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden{1000, 500, 300};
    std::size_t output_dim = 0;

    void validate() const {
        if (input_dim < 1 || output_dim < 1) throw config_error("fnn: zero-width layer");
        for (std::size_t h : hidden)
            if (h < 1) throw config_error("fnn: zero-width hidden layer");
    }

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims{input_dim};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(output_dim);
        return dims;
    }
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 256;
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t shuffle_seed = 0;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (epochs < 1) throw config_error("fnn: epochs must be >= 1");
        if (batch_size < 1) throw config_error("fnn: batch_size must be >= 1");
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw config_error("fnn: betas must be in (0,1)");
    }
};

struct FnnModel {
    FnnArchitecture arch;
    std::vector<Matrix> weights;             // weights[l]: dims[l] x dims[l+1]
    std::vector<std::vector<double>> biases; // biases[l]: dims[l+1]
    std::vector<std::pair<double, double>> history;  // per-epoch (train, validation) loss
};

struct FnnGradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    std::int64_t step = 0;

    static AdamState zeros_like(const FnnModel& model) {
        AdamState s;
        for (const Matrix& w : model.weights) {
            s.m_w.emplace_back(w.rows(), w.cols());
            s.v_w.emplace_back(w.rows(), w.cols());
        }
        for (const auto& b : model.biases) {
            s.m_b.emplace_back(b.size(), 0.0);
            s.v_b.emplace_back(b.size(), 0.0);
        }
        return s;
    }
};

// He-style initialization: weights ~ N(0, 2/fan_in), biases zero.
inline FnnModel fnn_init(const FnnArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    FnnModel model;
    model.arch = arch;
    const auto dims = arch.layer_dims();
    ShotStream rng(mix64(seed) ^ 0x666e6e2d696e6974ULL);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l], dims[l + 1]);
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (double& v : w.data()) v = scale * rng.gaussian();
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(dims[l + 1], 0.0);
    }
    return model;
}

namespace detail {

// out = a (BxN) * w (NxK), ikj loop order
inline void matmul(const Matrix& a, const Matrix& w, Matrix& out) {
    out = Matrix(a.rows(), w.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = ar[k];
            if (av == 0.0) continue;
            const double* wr = w.row_ptr(k);
            for (std::size_t j = 0; j < w.cols(); ++j) orow[j] += av * wr[j];
        }
    }
}

inline void softmax_rows(Matrix& z) {
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double* row = z.row_ptr(r);
        const double hi = *std::max_element(row, row + z.cols());
        double sum = 0.0;
        for (std::size_t c = 0; c < z.cols(); ++c) {
            row[c] = std::exp(row[c] - hi);
            sum += row[c];
        }
        for (std::size_t c = 0; c < z.cols(); ++c) row[c] /= sum;
    }
}

}  // namespace detail

// Forward pass: ReLU hidden layers, softmax output (max-subtracted).
// Optionally captures post-activation values per layer for backprop.
inline Matrix fnn_forward(const FnnModel& model, const Matrix& batch,
                          std::vector<Matrix>* activations = nullptr) {
    if (batch.cols() != model.arch.input_dim) throw data_error("fnn_forward: dimension mismatch");
    if (!batch.all_finite()) throw data_error("fnn_forward: non-finite input");
    Matrix a = batch;
    if (activations) {
        activations->clear();
        activations->push_back(a);
    }
    const std::size_t n_layers = model.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix z;
        detail::matmul(a, model.weights[l], z);
        const auto& b = model.biases[l];
        for (std::size_t r = 0; r < z.rows(); ++r) {
            double* row = z.row_ptr(r);
            for (std::size_t c = 0; c < z.cols(); ++c) row[c] += b[c];
        }
        if (l + 1 < n_layers) {
            for (double& v : z.data()) v = std::max(v, 0.0);
        } else {
            detail::softmax_rows(z);
        }
        a = std::move(z);
        if (activations) activations->push_back(a);
    }
    return a;
}

// Mean categorical cross-entropy and its gradient via backpropagation through
// the combined softmax/cross-entropy output, ReLU masks, and affine layers.
inline double fnn_loss_and_grad(const FnnModel& model, const Matrix& batch,
                                const Matrix& one_hot_targets, FnnGradient& grad) {
    if (one_hot_targets.rows() != batch.rows() || one_hot_targets.cols() != model.arch.output_dim)
        throw data_error("fnn_loss_and_grad: target shape mismatch");

    std::vector<Matrix> acts;
    const Matrix probs = fnn_forward(model, batch, &acts);
    const std::size_t b = batch.rows();
    const std::size_t n_layers = model.weights.size();

    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < probs.cols(); ++c)
            if (one_hot_targets(r, c) != 0.0)
                loss -= one_hot_targets(r, c) * std::log(std::max(probs(r, c), 1e-300));
    loss /= static_cast<double>(b);
    if (!std::isfinite(loss)) throw fit_error("fnn: non-finite loss");

    grad.weights.assign(n_layers, Matrix());
    grad.biases.assign(n_layers, {});

    // delta at the output: (p - y) / B
    Matrix delta(b, probs.cols());
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < probs.cols(); ++c)
            delta(r, c) = (probs(r, c) - one_hot_targets(r, c)) / static_cast<double>(b);

    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& a_in = acts[l];
        Matrix& gw = grad.weights[l];
        gw = Matrix(model.weights[l].rows(), model.weights[l].cols());
        for (std::size_t r = 0; r < b; ++r) {
            const double* ar = a_in.row_ptr(r);
            const double* dr = delta.row_ptr(r);
            for (std::size_t i = 0; i < gw.rows(); ++i) {
                if (ar[i] == 0.0) continue;
                double* gr = gw.row_ptr(i);
                for (std::size_t j = 0; j < gw.cols(); ++j) gr[j] += ar[i] * dr[j];
            }
        }
        auto& gb = grad.biases[l];
        gb.assign(model.biases[l].size(), 0.0);
        for (std::size_t r = 0; r < b; ++r) {
            const double* dr = delta.row_ptr(r);
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += dr[j];
        }
        if (l == 0) break;

        // propagate: delta_prev = (delta * W^T) .* relu'(a_prev)
        const Matrix& w = model.weights[l];
        Matrix prev(b, w.rows());
        for (std::size_t r = 0; r < b; ++r) {
            const double* dr = delta.row_ptr(r);
            double* pr = prev.row_ptr(r);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                double s = 0.0;
                const double* wr = w.row_ptr(i);
                for (std::size_t j = 0; j < w.cols(); ++j) s += wr[j] * dr[j];
                pr[i] = acts[l](r, i) > 0.0 ? s : 0.0;
            }
        }
        delta = std::move(prev);
    }
    return loss;
}

// One Adam update. Moments are bias-corrected by (1 - beta^t).
inline void fnn_adam_step(FnnModel& model, const FnnGradient& grad, AdamState& state,
                          const TrainConfig& cfg) {
    state.step++;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        auto& w = model.weights[l].data();
        const auto& g = grad.weights[l].data();
        auto& mw = state.m_w[l].data();
        auto& vw = state.v_w[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            mw[i] = cfg.beta1 * mw[i] + (1.0 - cfg.beta1) * g[i];
            vw[i] = cfg.beta2 * vw[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            w[i] -= cfg.alpha * (mw[i] / bc1) / (std::sqrt(vw[i] / bc2) + cfg.eps);
        }
        auto& b = model.biases[l];
        const auto& gb = grad.biases[l];
        auto& mb = state.m_b[l];
        auto& vb = state.v_b[l];
        for (std::size_t i = 0; i < b.size(); ++i) {
            mb[i] = cfg.beta1 * mb[i] + (1.0 - cfg.beta1) * gb[i];
            vb[i] = cfg.beta2 * vb[i] + (1.0 - cfg.beta2) * gb[i] * gb[i];
            b[i] -= cfg.alpha * (mb[i] / bc1) / (std::sqrt(vb[i] / bc2) + cfg.eps);
        }
    }
}

struct FnnTrainResult {
    FnnModel model;
    double fit_seconds = 0.0;
};

// Fixed-epoch training over seeded-shuffled mini-batches; no early stopping.
// Records per-epoch (mean train batch loss, validation loss).
inline FnnTrainResult fnn_train(const FnnArchitecture& arch, const Matrix& train_x,
                                const std::vector<std::uint64_t>& train_y, const Matrix& val_x,
                                const std::vector<std::uint64_t>& val_y, const TrainConfig& cfg) {
    cfg.validate();
    for (std::uint64_t y : train_y)
        if (y >= arch.output_dim) throw fit_error("fnn: label outside output dimension");
    for (std::uint64_t y : val_y)
        if (y >= arch.output_dim) throw fit_error("fnn: validation label outside output dimension");

    const auto t0 = std::chrono::steady_clock::now();
    FnnModel model = fnn_init(arch, cfg.init_seed);
    AdamState adam = AdamState::zeros_like(model);
    FnnGradient grad;

    const std::size_t n = train_x.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        deterministic_shuffle(order, mix64(cfg.shuffle_seed) ^ mix64(static_cast<std::uint64_t>(epoch) + 1));
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bsz = stop - start;
            Matrix bx(bsz, train_x.cols());
            Matrix by(bsz, arch.output_dim);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t src = order[start + i];
                std::copy(train_x.row_ptr(src), train_x.row_ptr(src) + train_x.cols(), bx.row_ptr(i));
                by(i, train_y[src]) = 1.0;
            }
            epoch_loss += fnn_loss_and_grad(model, bx, by, grad);
            fnn_adam_step(model, grad, adam, cfg);
            n_batches++;
        }
        double val_loss = 0.0;
        if (val_x.rows() > 0) {
            const Matrix probs = fnn_forward(model, val_x);
            for (std::size_t r = 0; r < val_x.rows(); ++r)
                val_loss -= std::log(std::max(probs(r, val_y[r]), 1e-300));
            val_loss /= static_cast<double>(val_x.rows());
        }
        model.history.emplace_back(epoch_loss / static_cast<double>(n_batches), val_loss);
    }
    return FnnTrainResult{std::move(model),
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
}

// Argmax prediction; ties resolve to the smallest class index.
inline std::vector<std::uint64_t> fnn_predict(const FnnModel& model, const Matrix& x) {
    const Matrix probs = fnn_forward(model, x);
    std::vector<std::uint64_t> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = probs.row_ptr(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (row[c] > row[best]) best = c;
        out[r] = best;
    }
    return out;
}

// --- checkpoint format (version 1): architecture + parameters + history ---

inline nlohmann::json fnn_to_json(const FnnModel& model) {
    nlohmann::json j{{"format_version", 1},
                     {"arch",
                      {{"input_dim", model.arch.input_dim},
                       {"hidden", model.arch.hidden},
                       {"output_dim", model.arch.output_dim}}}};
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        nlohmann::json rows = nlohmann::json::array();
        const Matrix& w = model.weights[l];
        for (std::size_t r = 0; r < w.rows(); ++r)
            rows.push_back(std::vector<double>(w.row_ptr(r), w.row_ptr(r) + w.cols()));
        weights.push_back(std::move(rows));
        biases.push_back(model.biases[l]);
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [tr, va] : model.history) hist.push_back({{"train", tr}, {"validation", va}});
    j["history"] = std::move(hist);
    return j;
}

inline FnnModel fnn_from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1) throw data_error("fnn checkpoint: unsupported version");
    FnnModel model;
    const auto& a = j.at("arch");
    model.arch.input_dim = a.at("input_dim").get<std::size_t>();
    model.arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    model.arch.output_dim = a.at("output_dim").get<std::size_t>();
    model.arch.validate();
    const auto dims = model.arch.layer_dims();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != dims.size() - 1 || biases.size() != dims.size() - 1)
        throw data_error("fnn checkpoint: layer count mismatch");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l], dims[l + 1]);
        const auto& jw = weights[l];
        if (jw.size() != dims[l]) throw data_error("fnn checkpoint: weight shape mismatch");
        for (std::size_t r = 0; r < dims[l]; ++r) {
            const auto row = jw[r].get<std::vector<double>>();
            if (row.size() != dims[l + 1]) throw data_error("fnn checkpoint: weight shape mismatch");
            std::copy(row.begin(), row.end(), w.row_ptr(r));
        }
        model.weights.push_back(std::move(w));
        auto b = biases[l].get<std::vector<double>>();
        if (b.size() != dims[l + 1]) throw data_error("fnn checkpoint: bias shape mismatch");
        model.biases.push_back(std::move(b));
    }
    for (const auto& h : j.at("history"))
        model.history.emplace_back(h.at("train").get<double>(), h.at("validation").get<double>());
    return model;
}

}  // namespace esprd
