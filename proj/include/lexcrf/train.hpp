#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lexcrf/data.hpp"
#include "lexcrf/eval.hpp"
#include "lexcrf/losses.hpp"
#include "lexcrf/model.hpp"
#include "lexcrf/params.hpp"
#include "lexcrf/scorer.hpp"
#include "lexcrf/types.hpp"

namespace lexcrf {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 5e-3;
    int warmup_epochs = 2;
    double penalty_c = 0.4;
    uint64_t seed = 1;
    double clip_norm = 5.0;
    int threads = 2;

    LabelScheme scheme = LabelScheme::ZeroOne;
    bool lexicalized = true;
    bool use_reg = true;
    bool use_head_aware = true;
    bool joint_head_grads = true;
    double w_tree = 1.0, w_label = 1.0, w_reg = 1.0;

    int d_emb = 64;
    int d_hidden = 64;
    int window = 2;
    int k_span = 100;
    int k_arc = 100;
    int k_label = 100;

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw InvalidInput("epochs and batch size >= 1");
        if (warmup_epochs < 0 || warmup_epochs > epochs)
            throw InvalidInput("need 0 <= warmup epochs <= epochs");
        if (lr <= 0) throw InvalidInput("learning rate must be positive");
        if (penalty_c < 0) throw InvalidInput("penalty constant must be >= 0");
        if (threads < 1) throw InvalidInput("threads >= 1");
    }

    LossConfig loss_config() const {
        LossConfig c;
        c.scheme = scheme;
        c.lexicalized = lexicalized;
        c.use_reg = use_reg;
        c.penalty_c = penalty_c;
        c.use_head_aware = use_head_aware;
        c.joint_head_grads = joint_head_grads;
        c.w_tree = w_tree;
        c.w_label = w_label;
        c.w_reg = w_reg;
        return c;
    }
};

// Linear warmup then linear decay to zero, both endpoints pinned.
inline double lr_schedule(long step, long total, long warmup) {
    if (step < 0 || step > total) throw InvalidInput("schedule step out of range");
    if (step <= warmup)
        return warmup == 0 ? 1.0 : static_cast<double>(step) / static_cast<double>(warmup);
    if (total == warmup) return 0.0;
    return static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    static AdamState like(const ParamStore& p) {
        AdamState s;
        s.m.assign(p.size(), 0.0);
        s.v.assign(p.size(), 0.0);
        return s;
    }
};

inline void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw UsageError("adam: shape mismatch");
    for (double g : grads.flat)
        if (std::isnan(g))
            throw InvalidScore("NaN gradient reached the optimizer; aborting");
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t k = 0; k < params.flat.size(); ++k) {
        double g = grads.flat[k];
        state.m[k] = beta1 * state.m[k] + (1 - beta1) * g;
        state.v[k] = beta2 * state.v[k] + (1 - beta2) * g * g;
        double m_hat = state.m[k] / bc1;
        double v_hat = state.v[k] / bc2;
        params.flat[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

inline double clip_gradients(ParamStore& grads, double max_norm) {
    double sq = 0.0;
    for (double g : grads.flat) sq += g * g;
    double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        double scale = max_norm / norm;
        for (double& g : grads.flat) g *= scale;
    }
    return norm;
}

struct Checkpoint {
    TrainedModel model;
    AdamState optimizer;
    int epoch = 0;
    double dev_f1 = 0.0;
};

struct EpochMetrics {
    int epoch = 0;
    double l_tree = 0.0, l_label = 0.0, l_reg = 0.0, total = 0.0;
    double dev_precision = 0.0, dev_recall = 0.0, dev_f1 = 0.0;
    double lr = 0.0;
    bool best = false;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochMetrics> history;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

inline TrainResult train(const TrainConfig& cfg, const Dataset& train_set,
                         const Dataset& dev_set, const MetricsSink& sink = {}) {
    cfg.validate();
    if (train_set.empty()) throw InvalidInput("empty training set");
    for (size_t s = 0; s < train_set.size(); ++s)
        validate_record(train_set[s], "train[" + std::to_string(s) + "]");

    TrainedModel model;
    model.labels = collect_labels(train_set);
    if (model.labels.empty()) throw InvalidInput("training set contains no entity labels");
    model.vocab = Vocab::build(train_set);
    model.loss_cfg = cfg.loss_config();
    model.cfg.vocab_size = model.vocab.size();
    model.cfg.label_count = static_cast<int>(model.labels.size());
    model.cfg.scheme = cfg.scheme;
    model.cfg.lexicalized = cfg.lexicalized;
    model.cfg.d_emb = cfg.d_emb;
    model.cfg.d_hidden = cfg.d_hidden;
    model.cfg.window = cfg.window;
    model.cfg.k_span = cfg.k_span;
    model.cfg.k_arc = cfg.k_arc;
    model.cfg.k_label = cfg.k_label;
    model.params = build_params(model.cfg);
    init_params(model.params, cfg.seed);

    auto label_index = model.label_index();
    struct Example {
        std::vector<int> ids;
        EntitySet gold;
    };
    std::vector<Example> examples;
    examples.reserve(train_set.size());
    for (const auto& r : train_set)
        examples.push_back({model.vocab.ids(r.tokens), to_entity_set(r, label_index)});

    // group by length to balance chart work across batches
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return examples[a].ids.size() < examples[b].ids.size();
    });
    std::vector<std::vector<size_t>> batches;
    for (size_t k = 0; k < order.size(); k += cfg.batch_size) {
        std::vector<size_t> b(order.begin() + k,
                              order.begin() + std::min(order.size(), k + cfg.batch_size));
        batches.push_back(std::move(b));
    }

    const long steps_total = static_cast<long>(batches.size()) * cfg.epochs;
    const long warmup_steps = static_cast<long>(batches.size()) * cfg.warmup_epochs;
    AdamState adam = AdamState::like(model.params);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const LossConfig loss_cfg = cfg.loss_config();

    TrainResult result;
    result.best.model = model;
    result.best.optimizer = adam;
    result.best.epoch = 0;
    result.best.dev_f1 = -1.0;

    const int n_threads = std::max(1, cfg.threads);
    long step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<size_t> batch_order(batches.size());
        std::iota(batch_order.begin(), batch_order.end(), 0);
        deterministic_shuffle(batch_order, rng);

        double ep_tree = 0, ep_label = 0, ep_reg = 0, ep_total = 0;
        double last_lr = 0;
        for (size_t bo : batch_order) {
            const auto& batch = batches[bo];
            ++step;
            last_lr = cfg.lr * lr_schedule(step, steps_total, warmup_steps);

            std::vector<ParamStore> thread_grads(n_threads, model.params.zeros_like());
            std::vector<double> thread_tree(n_threads, 0), thread_label(n_threads, 0),
                thread_reg(n_threads, 0);
            std::vector<std::string> thread_err(n_threads);
            auto worker = [&](int t) {
                try {
                    for (size_t k = t; k < batch.size(); k += n_threads) {
                        const Example& ex = examples[batch[k]];
                        Scorer scorer(model.cfg, model.params);
                        ScoreSet scores = scorer.score(ex.ids);
                        LossReport rep = sentence_loss(scores, ex.gold, loss_cfg, &scorer);
                        if (!std::isfinite(rep.total))
                            throw InvalidScore("non-finite loss on a training sentence");
                        scorer.backward(rep.grads, rep.label_grads, thread_grads[t]);
                        thread_tree[t] += rep.l_tree;
                        thread_label[t] += rep.l_label;
                        thread_reg[t] += rep.l_reg;
                    }
                } catch (const std::exception& e) {
                    thread_err[t] = e.what();
                }
            };
            if (n_threads == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
                for (auto& th : pool) th.join();
            }
            for (const auto& err : thread_err)
                if (!err.empty()) throw InvalidScore(err);

            ParamStore grads = std::move(thread_grads[0]);
            for (int t = 1; t < n_threads; ++t)
                for (size_t k = 0; k < grads.flat.size(); ++k)
                    grads.flat[k] += thread_grads[t].flat[k];
            const double inv = 1.0 / static_cast<double>(batch.size());
            for (double& g : grads.flat) g *= inv;
            clip_gradients(grads, cfg.clip_norm);
            adam_step(model.params, grads, adam, last_lr);

            for (int t = 0; t < n_threads; ++t) {
                ep_tree += thread_tree[t];
                ep_label += thread_label[t];
                ep_reg += thread_reg[t];
            }
        }
        ep_total = ep_tree + ep_label + ep_reg;

        // dev-set model selection
        Dataset dev_pred(dev_set.size());
        {
            std::vector<std::string> thread_err(n_threads);
            auto worker = [&](int t) {
                try {
                    for (size_t k = t; k < dev_set.size(); k += n_threads)
                        dev_pred[k] = predict_record(model, dev_set[k]);
                } catch (const std::exception& e) {
                    thread_err[t] = e.what();
                }
            };
            if (n_threads == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
                for (auto& th : pool) th.join();
            }
            for (const auto& err : thread_err)
                if (!err.empty()) throw InvalidScore(err);
        }
        EvalReport dev = dev_set.empty() ? EvalReport{} : metrics_f1(dev_pred, dev_set);

        EpochMetrics em;
        em.epoch = epoch;
        em.l_tree = ep_tree;
        em.l_label = ep_label;
        em.l_reg = ep_reg;
        em.total = ep_total;
        em.dev_precision = dev.precision;
        em.dev_recall = dev.recall;
        em.dev_f1 = dev.f1;
        em.lr = last_lr;
        if (dev.f1 > result.best.dev_f1) {
            result.best.model = model;
            result.best.optimizer = adam;
            result.best.epoch = epoch;
            result.best.dev_f1 = dev.f1;
            em.best = true;
        }
        result.history.push_back(em);
        if (sink) sink(em);
    }
    if (result.best.dev_f1 < 0) {
        result.best.model = model;
        result.best.dev_f1 = 0.0;
    }
    return result;
}

}  // namespace lexcrf
