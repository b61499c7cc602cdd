#include "pde/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "pde/common.hpp"

namespace pde {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (lr <= 0.0) throw ValidationError("learning rate must be > 0");
    if (!unsafe_lr && (lr < 1e-4 || lr > 5e-4)) {
        throw ValidationError("learning rate " + std::to_string(lr) +
                              " outside [1e-4, 5e-4]; pass --unsafe-lr to override");
    }
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
}

json TrainConfig::to_json() const {
    return json{{"batch_size", batch_size}, {"lr", lr},           {"beta1", beta1},
                {"beta2", beta2},           {"eps", eps},         {"max_epochs", max_epochs},
                {"patience", patience},     {"seed", seed},       {"unsafe_lr", unsafe_lr}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig cfg;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.unsafe_lr = j.value("unsafe_lr", cfg.unsafe_lr);
    return cfg;
}

void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               const TrainConfig& cfg, const std::vector<std::pair<Tensor, int>>& pinned_rows) {
    if (state.m.empty()) {
        for (auto& [name, t] : params) {
            state.m.emplace_back(t.size(), 0.0);
            state.v.emplace_back(t.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw ValidationError("adam state does not match parameter list");
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p].second;
        const auto& g = t.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        auto& x = t.data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            x[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
    for (const auto& [table, row] : pinned_rows) {
        Tensor t = table;
        int d = t.shape()[1];
        std::fill(t.data().begin() + row * d, t.data().begin() + (row + 1) * d, 0.0);
    }
}

std::vector<WindowedExample> window_split(const std::vector<MentionRecord>& split,
                                          const EncoderConfig& cfg, const Vocab& vocab) {
    std::vector<WindowedExample> out;
    out.reserve(split.size());
    for (const auto& rec : split) {
        out.push_back(window(rec, cfg.window, cfg.mention_cap, vocab, cfg.channels()));
    }
    return out;
}

EvalReport evaluate(Model& model, const std::vector<MentionRecord>& split, const Taxonomy& tax,
                    const Vocab& vocab) {
    if (split.empty()) throw ValidationError("evaluate: empty split");
    auto examples = window_split(split, model.config(), vocab);
    std::vector<LabelSet> preds, golds;
    preds.reserve(examples.size());
    golds.reserve(examples.size());
    for (const auto& ex : examples) {
        auto scores = model.infer(ex);
        preds.push_back(tax.close_ancestors(predict_labels(scores)));
        golds.push_back(ex.target);
    }
    return score(preds, golds, tax);
}

json EpochLog::to_json() const {
    return json{{"epoch", epoch},           {"train_loss", train_loss},
                {"strict", dev.strict},     {"macro_f1", dev.macro_f1},
                {"micro_f1", dev.micro_f1}, {"gmean", dev.gmean}};
}

TrainResult train_model(Model& model, const std::vector<MentionRecord>& train_split,
                        const std::vector<MentionRecord>& dev_split, const Taxonomy& tax,
                        const Vocab& vocab, const TrainConfig& cfg) {
    cfg.validate();
    if (train_split.empty()) throw ValidationError("train split is empty");
    if (dev_split.empty()) throw ValidationError("dev split is empty");

    auto train_examples = window_split(train_split, model.config(), vocab);
    AdamState adam;
    auto pinned = model.pad_rows();
    auto dropout_rng = make_rng(cfg.seed, 11);

    TrainResult result;
    int stale = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order(train_examples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto shuffle_rng = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
        shuffle_vec(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        int batch_index = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size, ++batch_index) {
            std::size_t stop = std::min(order.size(), at + cfg.batch_size);
            std::vector<WindowedExample> batch;
            batch.reserve(stop - at);
            for (std::size_t i = at; i < stop; ++i) batch.push_back(train_examples[order[i]]);

            Tensor loss = model.batch_loss(batch, true, &dropout_rng);
            double loss_val = loss.value();
            if (!std::isfinite(loss_val)) {
                throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
            }
            model.tape().zero_grad();
            model.tape().backward(loss);

            double grad_sq = 0.0;
            for (auto& [name, t] : model.named_params()) {
                for (double g : t.grad()) grad_sq += g * g;
            }
            if (std::sqrt(grad_sq) > 1e3) {
                ++result.grad_norm_warnings;
                std::cerr << "warning: gradient norm " << std::sqrt(grad_sq) << " in epoch "
                          << epoch << ", batch " << batch_index << "\n";
            }

            adam_step(model.named_params(), adam, cfg, pinned);
            loss_sum += loss_val * static_cast<double>(batch.size());
            seen += batch.size();
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(seen);
        entry.dev = evaluate(model, dev_split, tax, vocab);
        result.log_jsonl += entry.to_json().dump() + "\n";
        result.log.push_back(entry);

        if (entry.dev.gmean > result.best_gmean) {
            result.best_gmean = entry.dev.gmean;
            result.best_epoch = epoch;
            result.best_checkpoint = model.to_checkpoint();
            stale = 0;
        } else {
            ++stale;
            if (stale >= cfg.patience) break;
        }
    }
    if (result.best_epoch < 0) throw std::runtime_error("training produced no checkpoint");
    return result;
}

}  // namespace pde
