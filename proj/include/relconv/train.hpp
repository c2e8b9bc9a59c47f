#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "relconv/graph.hpp"
#include "relconv/metrics.hpp"
#include "relconv/model.hpp"

namespace relconv {

struct TrainConfig {
    std::size_t k = 2;
    std::size_t window = 2;
    std::size_t filters = 64;
    std::size_t hidden = 256;
    std::size_t depth = 3;
    double learning_rate = 1.5e-3;
    std::size_t max_epochs = 200;
    std::size_t patience = 50;
    double train_ratio = 0.2;
    double val_ratio = 0.1;
    double test_ratio = 0.7;
    std::uint64_t seed = 0;
    bool ablation = false;
    bool self_feature = false;

    ModelDims dims(std::size_t classes) const {
        ModelDims d;
        d.k = k;
        d.window = window;
        d.filters = filters;
        d.hidden = hidden;
        d.depth = depth;
        d.classes = classes;
        d.ablation = ablation;
        d.self_feature = self_feature;
        return d;
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_f1_micro = 0.0;
    double val_f1_macro = 0.0;
    double wall_ms = 0.0;  // informational; excluded from determinism claims
};

/// Adam with bias correction; one moment pair per parameter tensor.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<std::pair<std::string, Tensor>>& params) {
        ++t_;
        if (m_.empty()) {
            for (auto& [name, p] : params) {
                m_.emplace_back(p.numel(), 0.0);
                v_.emplace_back(p.numel(), 0.0);
            }
        }
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = params[i].second;
            const std::vector<double>* g = p.grad();
            if (!g) continue;  // parameter untouched by this loss
            for (std::size_t j = 0; j < p.numel(); ++j) {
                if (!std::isfinite((*g)[j]))
                    throw numeric_error("adam: non-finite gradient in parameter " + params[i].first);
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * (*g)[j];
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * (*g)[j] * (*g)[j];
                const double mhat = m_[i][j] / c1;
                const double vhat = v_[i][j] / c2;
                p.values()[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    std::size_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Scalar-parameter convenience used by tests and the optimizer examples.
inline double adam_scalar_step(double param, double grad, double& m, double& v, std::size_t t, double lr,
                               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
}

struct EvalResult {
    double loss = 0.0;
    F1Scores f1;
    std::vector<std::size_t> predictions;  // over the evaluated ids, in order
};

inline std::vector<std::size_t> argmax_rows(const Tensor& logits) {
    const std::size_t n = logits.extent(0), c = logits.extent(1);
    std::vector<std::size_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 1; j < c; ++j)
            if (logits.at(i, j) > logits.at(i, out[i])) out[i] = j;
    }
    return out;
}

inline EvalResult evaluate(const HeteroGraph& g, const ModelParams& params,
                           const std::vector<std::size_t>& ids) {
    if (ids.empty()) throw std::invalid_argument("evaluate: empty id set");
    Tensor logits = model_logits(g, params);
    Tensor rows = gather_rows(logits, ids);
    std::vector<std::size_t> truth;
    for (std::size_t v : ids) truth.push_back(static_cast<std::size_t>(g.labels[v]));
    EvalResult r;
    r.loss = softmax_cross_entropy(rows, truth).value();
    r.predictions = argmax_rows(rows);
    r.f1 = f1_scores(r.predictions, truth, params.dims.classes);
    return r;
}

struct TrainResult {
    ModelParams model;  // snapshot from the best validation epoch
    std::vector<EpochRecord> history;
    Splits splits;
    std::size_t best_epoch = 0;
    double best_val_f1 = -1.0;
};

/// Projection vectors must keep a usable norm; a vector that collapses during
/// optimization is redrawn (extremely rare in practice).
inline void reinit_degenerate_projections(ModelParams& params, std::uint64_t seed, std::size_t epoch) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t r = 0; r < params.layers[l].pooling.projections.size(); ++r) {
            Tensor& v = params.layers[l].pooling.projections[r];
            double sq = 0.0;
            for (double x : v.data()) sq += x * x;
            if (std::sqrt(sq) >= 1e-12) continue;
            Rng rng(splitmix64(seed ^ (epoch * 1315423911ULL) ^ (l << 8) ^ r));
            const double a = std::sqrt(6.0 / static_cast<double>(v.numel() + 1));
            for (double& x : v.values()) x = rng.uniform(-a, a);
        }
    }
}

/// Full-batch training with Adam and early stopping on validation F1-micro:
/// training halts once the metric has not strictly improved for `patience`
/// consecutive epochs, and the returned model is the snapshot of the best
/// epoch (ties keep the earliest).
inline TrainResult train(const HeteroGraph& g, const TrainConfig& cfg) {
    if (g.labeled_ids().empty()) throw data_error("train: no labeled nodes");
    if (g.class_count < 2) throw data_error("train: need at least 2 classes");

    TrainResult result;
    result.splits = split(g, cfg.train_ratio, cfg.val_ratio, cfg.test_ratio, cfg.seed);
    ModelParams params = init_params(cfg.dims(g.class_count), g, splitmix64(cfg.seed ^ 0x1a2b3c4dULL));
    auto named = params.named_parameters();
    Adam adam(cfg.learning_rate);

    std::vector<std::size_t> train_labels;
    for (std::size_t v : result.splits.train) train_labels.push_back(static_cast<std::size_t>(g.labels[v]));

    std::size_t bad_epochs = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (auto& [name, p] : named) p.clear_grad();
        Tape tape;
        Tensor logits = model_logits(g, params, &tape);
        Tensor loss = softmax_cross_entropy(gather_rows(logits, result.splits.train, &tape), train_labels, &tape);
        if (!std::isfinite(loss.value()))
            throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch));
        tape.backward(loss);
        try {
            adam.step(named);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " at epoch " + std::to_string(epoch));
        }
        reinit_degenerate_projections(params, cfg.seed, epoch);

        EvalResult val = evaluate(g, params, result.splits.val);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss.value();
        rec.val_loss = val.loss;
        rec.val_f1_micro = val.f1.micro;
        rec.val_f1_macro = val.f1.macro;
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        if (val.f1.micro > result.best_val_f1) {
            result.best_val_f1 = val.f1.micro;
            result.best_epoch = epoch;
            result.model = params.clone();
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            break;
        }
    }
    return result;
}

}  // namespace relconv
