#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pde/corpus.hpp"
#include "pde/taxonomy.hpp"
#include "pde/tensor.hpp"

namespace pde {

enum class EncoderKind { Avg, Rnn, Att };

EncoderKind encoder_kind_from_string(const std::string& s);
std::string encoder_kind_to_string(EncoderKind k);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::Avg;
    int hidden = 100;
    double dropout_p = 0.5;
    bool use_pos = false;
    bool use_ner = false;
    bool use_typ = false;
    int word_dim = 300;
    int feat_dim = 16;
    int att_dim = 0;  // 0 -> same as hidden
    int window = 10;
    int mention_cap = 10;

    std::vector<Channel> channels() const;
    int embed_dim() const;  // word_dim + feat_dim * |channels|
    int side_dim() const;   // per-context representation width
    int clf_input_dim() const { return 2 * side_dim() + embed_dim(); }
    int effective_att_dim() const { return att_dim > 0 ? att_dim : hidden; }
    void validate() const;

    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

// Probabilities are clamped to [eps, 1-eps] inside the loss.
inline constexpr double kProbEps = 1e-12;

// Sum over labels of -t*log(y) - (1-t)*log(1-y) for one example.
Tensor bce_loss(Tape& tape, Tensor y, const LabelSet& gold);

// Inference rule: the argmax label (ties -> lowest index) plus every label
// with score strictly above the threshold. Pre-closure.
LabelSet predict_labels(const std::vector<double>& scores, double threshold = 0.5);

// Standard LSTM recurrence from a zero initial state. Gates are packed
// row-wise as [input; forget; cell; output] in wx [4H,In], wh [4H,H],
// b [4H]; the cell candidate uses tanh, the gates sigmoid. Returns the
// hidden state after each step.
std::vector<Tensor> lstm_states(Tape& tape, Tensor wx, Tensor wh, Tensor b, int hidden,
                                const std::vector<Tensor>& xs);

// The mention classifier: augmented embedding lookup, mention averaging,
// one of three context encoders, and a bias-free per-label sigmoid head.
class Model {
public:
    Model(const Taxonomy& tax, const Vocab& vocab, const EncoderConfig& cfg,
          const Embeddings* pretrained, std::uint64_t init_seed);

    const EncoderConfig& config() const { return cfg_; }
    int n_labels() const { return k_; }
    Tape& tape() { return tape_; }

    // Builds the graph for one example; returns per-label scores y in (0,1)^K.
    Tensor forward(const WindowedExample& ex, bool train, std::mt19937_64* dropout_rng);
    // Mean over the batch of per-example BCE losses. Resets the tape first.
    Tensor batch_loss(const std::vector<WindowedExample>& batch, bool train,
                      std::mt19937_64* dropout_rng);
    // Eval-mode scores as plain doubles.
    std::vector<double> infer(const WindowedExample& ex);
    // Eval-mode concatenated [v_left, v_right, v_entity].
    std::vector<double> feature_vector(const WindowedExample& ex);

    std::vector<std::pair<std::string, Tensor>>& named_params() { return params_; }
    // (table, row) pairs whose data is pinned to zero (the PAD rows).
    std::vector<std::pair<Tensor, int>> pad_rows() const;
    void zero_pad_rows();

    nlohmann::json to_checkpoint() const;
    static Model from_checkpoint(const nlohmann::json& doc, const Taxonomy& tax,
                                 const Vocab& vocab);
    static Model load_checkpoint_file(const std::string& path, const Taxonomy& tax,
                                      const Vocab& vocab);

private:
    struct LstmCell {
        Tensor wx, wh, b;
        int hidden = 0;
    };

    Tensor embed_slot(int word_id, const std::array<int, 3>& tag_ids, bool is_pad);
    std::vector<Tensor> side_vectors(const std::vector<int>& words,
                                     const std::array<std::vector<int>, 3>& tags,
                                     const std::vector<std::uint8_t>& mask);
    // Builds v = [v_left, v_right, v_entity] for one example.
    Tensor features(const WindowedExample& ex, bool train, std::mt19937_64* dropout_rng);
    Tensor encode_avg(const std::vector<Tensor>& slots, const std::vector<std::uint8_t>& mask);
    Tensor encode_rnn(const LstmCell& cell, std::vector<Tensor> real_slots);
    Tensor encode_att(const LstmCell& fwd, const LstmCell& bwd,
                      const std::vector<Tensor>& real_slots);
    LstmCell make_lstm(const std::string& prefix, int input_dim, std::mt19937_64& rng);
    Tensor add_param(const std::string& name, Shape shape);
    void init_uniform(Tensor t, double lo, double hi, std::mt19937_64& rng);
    void init_fan_in(Tensor t, std::mt19937_64& rng);
    Tensor table_for(Channel c) const;

    EncoderConfig cfg_;
    int k_ = 0;
    std::uint64_t taxonomy_hash_ = 0;
    std::uint64_t word_hash_ = 0;
    std::array<std::uint64_t, 3> tag_hashes_{};
    int n_words_ = 0;
    std::array<int, 3> n_tags_{};

    Tape tape_;
    std::vector<std::pair<std::string, Tensor>> params_;
    Tensor word_table_;
    std::array<std::optional<Tensor>, 3> feat_tables_;
    std::optional<LstmCell> rnn_left_, rnn_right_;
    std::optional<LstmCell> att_left_fwd_, att_left_bwd_, att_right_fwd_, att_right_bwd_;
    Tensor att_w1_, att_v_;
    Tensor w_y_;
};

}  // namespace pde
