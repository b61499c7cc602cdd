#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pde/corpus.hpp"
#include "pde/metrics.hpp"
#include "pde/model.hpp"

namespace pde {

struct TrainConfig {
    int batch_size = 512;
    double lr = 5e-4;  // must lie in [1e-4, 5e-4] unless unsafe_lr
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int max_epochs = 100;
    int patience = 10;  // dev evaluations without GMean improvement before stopping
    std::uint64_t seed = 1;
    bool unsafe_lr = false;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
    std::vector<std::vector<double>> m, v;  // aligned with the parameter list
    long step = 0;
};

// One Adam update with bias-corrected moments; `pinned_rows` (table, row)
// pairs are re-zeroed afterwards so PAD embeddings never move.
void adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               const TrainConfig& cfg,
               const std::vector<std::pair<Tensor, int>>& pinned_rows = {});

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    EvalReport dev;

    nlohmann::json to_json() const;
};

struct TrainResult {
    nlohmann::json best_checkpoint;
    std::vector<EpochLog> log;
    std::string log_jsonl;  // the exact bytes written to the log file
    double best_gmean = -1.0;
    int best_epoch = -1;
    int grad_norm_warnings = 0;  // batches whose gradient magnitude exceeded 1e3
};

// Mini-batch training with per-epoch shuffling keyed by (seed, epoch),
// dropout in training passes only, a dev evaluation per epoch, and the
// best-dev-GMean checkpoint retained.
TrainResult train_model(Model& model, const std::vector<MentionRecord>& train_split,
                        const std::vector<MentionRecord>& dev_split, const Taxonomy& tax,
                        const Vocab& vocab, const TrainConfig& cfg);

// Deterministic eval-mode scoring; predictions are ancestor-closed first.
EvalReport evaluate(Model& model, const std::vector<MentionRecord>& split, const Taxonomy& tax,
                    const Vocab& vocab);

std::vector<WindowedExample> window_split(const std::vector<MentionRecord>& split,
                                          const EncoderConfig& cfg, const Vocab& vocab);

}  // namespace pde
