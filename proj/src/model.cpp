#include "pde/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pde/common.hpp"

namespace pde {

using nlohmann::json;

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "avg") return EncoderKind::Avg;
    if (s == "rnn") return EncoderKind::Rnn;
    if (s == "att") return EncoderKind::Att;
    throw ValidationError("unknown encoder kind \"" + s + "\" (expected avg|rnn|att)");
}

std::string encoder_kind_to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::Avg: return "avg";
        case EncoderKind::Rnn: return "rnn";
        case EncoderKind::Att: return "att";
    }
    return "?";
}

std::vector<Channel> EncoderConfig::channels() const {
    std::vector<Channel> out;
    if (use_pos) out.push_back(Channel::Pos);
    if (use_ner) out.push_back(Channel::Ner);
    if (use_typ) out.push_back(Channel::Typ);
    return out;
}

int EncoderConfig::embed_dim() const {
    return word_dim + feat_dim * static_cast<int>(channels().size());
}

int EncoderConfig::side_dim() const {
    switch (kind) {
        case EncoderKind::Avg: return embed_dim();
        case EncoderKind::Rnn: return hidden;
        case EncoderKind::Att: return 2 * hidden;
    }
    return 0;
}

void EncoderConfig::validate() const {
    if (hidden < 1) throw ValidationError("encoder hidden size must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw ValidationError("encoder dropout must lie in [0,1)");
    }
    if (word_dim < 1 || feat_dim < 1) throw ValidationError("embedding dims must be >= 1");
    if (window < 1) throw ValidationError("window size must be >= 1");
    if (mention_cap < 1) throw ValidationError("mention cap must be >= 1");
}

json EncoderConfig::to_json() const {
    json ch = json::array();
    for (Channel c : channels()) ch.push_back(channel_name(c));
    return json{{"kind", encoder_kind_to_string(kind)},
                {"hidden", hidden},
                {"dropout", dropout_p},
                {"channels", ch},
                {"word_dim", word_dim},
                {"feat_dim", feat_dim},
                {"att_dim", att_dim},
                {"window", window},
                {"mention_cap", mention_cap}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig cfg;
    cfg.kind = encoder_kind_from_string(j.value("kind", "avg"));
    cfg.hidden = j.value("hidden", 100);
    cfg.dropout_p = j.value("dropout", 0.5);
    cfg.word_dim = j.value("word_dim", 300);
    cfg.feat_dim = j.value("feat_dim", 16);
    cfg.att_dim = j.value("att_dim", 0);
    cfg.window = j.value("window", 10);
    cfg.mention_cap = j.value("mention_cap", 10);
    if (j.contains("channels")) {
        for (const auto& el : j.at("channels")) {
            std::string name = el.get<std::string>();
            if (name == "pos") cfg.use_pos = true;
            else if (name == "ner") cfg.use_ner = true;
            else if (name == "typ") cfg.use_typ = true;
            else throw ValidationError("unknown channel \"" + name + "\"");
        }
    }
    cfg.validate();
    return cfg;
}

Tensor bce_loss(Tape& tape, Tensor y, const LabelSet& gold) {
    if (static_cast<std::size_t>(y.size()) != gold.size()) {
        throw ValidationError("bce_loss: " + std::to_string(y.size()) + " scores vs " +
                              std::to_string(gold.size()) + " labels");
    }
    std::vector<double> t(gold.size()), one_minus_t(gold.size());
    for (std::size_t k = 0; k < gold.size(); ++k) {
        t[k] = gold.test(k) ? 1.0 : 0.0;
        one_minus_t[k] = 1.0 - t[k];
    }
    Tensor yc = tape.clamp(y, kProbEps, 1.0 - kProbEps);
    Tensor pos = tape.mul_const(tape.log(yc), t);
    Tensor neg = tape.mul_const(tape.log(tape.affine(yc, -1.0, 1.0)), one_minus_t);
    return tape.scale(tape.sum(tape.add(pos, neg)), -1.0);
}

LabelSet predict_labels(const std::vector<double>& scores, double threshold) {
    if (scores.empty()) throw ValidationError("predict: empty score vector");
    LabelSet out(scores.size());
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) best = k;  // ties keep the lowest index
    }
    out.set(best);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k] > threshold) out.set(k);
    }
    return out;
}

Tensor Model::add_param(const std::string& name, Shape shape) {
    Tensor t = tape_.param(std::move(shape));
    params_.emplace_back(name, t);
    return t;
}

void Model::init_uniform(Tensor t, double lo, double hi, std::mt19937_64& rng) {
    for (auto& v : t.data()) v = rand_uniform(rng, lo, hi);
}

void Model::init_fan_in(Tensor t, std::mt19937_64& rng) {
    int fan_in = t.shape().size() == 2 ? t.shape()[1] : t.shape()[0];
    double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    init_uniform(t, -r, r, rng);
}

Model::LstmCell Model::make_lstm(const std::string& prefix, int input_dim,
                                 std::mt19937_64& rng) {
    LstmCell cell;
    cell.hidden = cfg_.hidden;
    cell.wx = add_param(prefix + ".wx", {4 * cfg_.hidden, input_dim});
    cell.wh = add_param(prefix + ".wh", {4 * cfg_.hidden, cfg_.hidden});
    cell.b = add_param(prefix + ".b", {4 * cfg_.hidden});
    init_fan_in(cell.wx, rng);
    init_fan_in(cell.wh, rng);
    // biases start at zero
    return cell;
}

Model::Model(const Taxonomy& tax, const Vocab& vocab, const EncoderConfig& cfg,
             const Embeddings* pretrained, std::uint64_t init_seed)
    : cfg_(cfg), k_(tax.size()) {
    cfg_.validate();
    if (k_ < 1) throw ValidationError("taxonomy is empty");
    if (pretrained && pretrained->dim != cfg_.word_dim) {
        throw ValidationError("embeddings dim " + std::to_string(pretrained->dim) +
                              " does not match configured word dim " +
                              std::to_string(cfg_.word_dim));
    }
    taxonomy_hash_ = tax.hash();
    word_hash_ = vocab.word_hash();
    n_words_ = vocab.n_words();
    for (Channel c : {Channel::Pos, Channel::Ner, Channel::Typ}) {
        tag_hashes_[static_cast<int>(c)] = vocab.tag_hash(c);
        n_tags_[static_cast<int>(c)] = vocab.tags(c).size();
    }

    auto rng = make_rng(init_seed, 7);

    word_table_ = add_param("word_table", {n_words_, cfg_.word_dim});
    for (int w = 1; w < n_words_; ++w) {  // row 0 is PAD, pinned to zero
        const std::vector<double>* vec =
            (pretrained && vocab.pretrained[w]) ? pretrained->find(vocab.words[w]) : nullptr;
        for (int j = 0; j < cfg_.word_dim; ++j) {
            word_table_.data()[w * cfg_.word_dim + j] =
                vec ? (*vec)[j] : rand_uniform(rng, -0.01, 0.01);
        }
    }

    for (Channel c : cfg_.channels()) {
        int ci = static_cast<int>(c);
        Tensor t = add_param(std::string(channel_name(c)) + "_table",
                             {n_tags_[ci], cfg_.feat_dim});
        feat_tables_[ci] = t;
        for (int r = 1; r < n_tags_[ci]; ++r) {
            for (int j = 0; j < cfg_.feat_dim; ++j) {
                t.data()[r * cfg_.feat_dim + j] = rand_uniform(rng, -0.01, 0.01);
            }
        }
    }

    int e = cfg_.embed_dim();
    if (cfg_.kind == EncoderKind::Rnn) {
        rnn_left_ = make_lstm("lstm_left", e, rng);
        rnn_right_ = make_lstm("lstm_right", e, rng);
    } else if (cfg_.kind == EncoderKind::Att) {
        att_left_fwd_ = make_lstm("lstm_left_fwd", e, rng);
        att_left_bwd_ = make_lstm("lstm_left_bwd", e, rng);
        att_right_fwd_ = make_lstm("lstm_right_fwd", e, rng);
        att_right_bwd_ = make_lstm("lstm_right_bwd", e, rng);
        int da = cfg_.effective_att_dim();
        att_w1_ = add_param("att_w1", {da, 2 * cfg_.hidden});
        att_v_ = add_param("att_v", {da});
        init_fan_in(att_w1_, rng);
        init_fan_in(att_v_, rng);
    }

    w_y_ = add_param("Wy", {k_, cfg_.clf_input_dim()});
    init_fan_in(w_y_, rng);
}

Tensor Model::table_for(Channel c) const {
    const auto& t = feat_tables_[static_cast<int>(c)];
    if (!t) throw ValidationError(std::string("channel ") + channel_name(c) + " not enabled");
    return *t;
}

Tensor Model::embed_slot(int word_id, const std::array<int, 3>& tag_ids, bool is_pad) {
    if (is_pad) return tape_.zeros({cfg_.embed_dim()});
    if (word_id < 0 || word_id >= n_words_) {
        throw ValidationError("word id " + std::to_string(word_id) + " out of range");
    }
    std::vector<Tensor> parts{tape_.row(word_table_, word_id)};
    for (Channel c : cfg_.channels()) {
        int ci = static_cast<int>(c);
        if (tag_ids[ci] < 0 || tag_ids[ci] >= n_tags_[ci]) {
            throw ValidationError("tag id out of range for channel " +
                                  std::string(channel_name(c)));
        }
        parts.push_back(tape_.row(table_for(c), tag_ids[ci]));
    }
    return parts.size() == 1 ? parts[0] : tape_.concat(parts);
}

std::vector<Tensor> Model::side_vectors(const std::vector<int>& words,
                                        const std::array<std::vector<int>, 3>& tags,
                                        const std::vector<std::uint8_t>& mask) {
    std::vector<Tensor> out;
    out.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        std::array<int, 3> tag_ids{0, 0, 0};
        for (Channel c : cfg_.channels()) {
            int ci = static_cast<int>(c);
            tag_ids[ci] = tags[ci].empty() ? Vocab::kPad : tags[ci][i];
        }
        out.push_back(embed_slot(words[i], tag_ids, mask[i] == 0));
    }
    return out;
}

Tensor Model::encode_avg(const std::vector<Tensor>& slots,
                         const std::vector<std::uint8_t>& mask) {
    return tape_.masked_mean(tape_.stack_rows(slots), mask);
}

std::vector<Tensor> lstm_states(Tape& tape, Tensor wx, Tensor wh, Tensor b, int hidden,
                                const std::vector<Tensor>& xs) {
    Tensor h = tape.zeros({hidden});
    Tensor c = tape.zeros({hidden});
    std::vector<Tensor> states;
    states.reserve(xs.size());
    for (const Tensor& x : xs) {
        Tensor z = tape.add(tape.add(tape.matvec(wx, x), tape.matvec(wh, h)), b);
        Tensor i = tape.sigmoid(tape.slice(z, 0, hidden));
        Tensor f = tape.sigmoid(tape.slice(z, hidden, hidden));
        Tensor g = tape.tanh(tape.slice(z, 2 * hidden, hidden));
        Tensor o = tape.sigmoid(tape.slice(z, 3 * hidden, hidden));
        c = tape.add(tape.mul(f, c), tape.mul(i, g));
        h = tape.mul(o, tape.tanh(c));
        states.push_back(h);
    }
    return states;
}

Tensor Model::encode_rnn(const LstmCell& cell, std::vector<Tensor> real_slots) {
    if (real_slots.empty()) return tape_.zeros({cell.hidden});
    auto states = lstm_states(tape_, cell.wx, cell.wh, cell.b, cell.hidden, real_slots);
    return states.back();
}

Tensor Model::encode_att(const LstmCell& fwd, const LstmCell& bwd,
                         const std::vector<Tensor>& real_slots) {
    if (real_slots.empty()) return tape_.zeros({2 * cfg_.hidden});
    auto fwd_states = lstm_states(tape_, fwd.wx, fwd.wh, fwd.b, fwd.hidden, real_slots);
    std::vector<Tensor> rev(real_slots.rbegin(), real_slots.rend());
    auto bwd_states = lstm_states(tape_, bwd.wx, bwd.wh, bwd.b, bwd.hidden, rev);

    int n = static_cast<int>(real_slots.size());
    std::vector<Tensor> bi(n);
    for (int i = 0; i < n; ++i) {
        bi[i] = tape_.concat({fwd_states[i], bwd_states[n - 1 - i]});
    }
    std::vector<Tensor> scores(n);
    for (int i = 0; i < n; ++i) {
        scores[i] = tape_.sum(tape_.mul(att_v_, tape_.tanh(tape_.matvec(att_w1_, bi[i]))));
    }
    Tensor alpha = tape_.softmax(tape_.concat(scores));
    return tape_.matvec_t(tape_.stack_rows(bi), alpha);
}

Tensor Model::features(const WindowedExample& ex, bool train, std::mt19937_64* dropout_rng) {
    if (ex.mention_words.empty()) throw ValidationError("example has no mention tokens");
    if (train && !dropout_rng) throw ValidationError("training forward needs a dropout rng");

    auto left = side_vectors(ex.left_words, ex.left_tags, ex.left_mask);
    auto right = side_vectors(ex.right_words, ex.right_tags, ex.right_mask);
    std::vector<std::uint8_t> mention_mask(ex.mention_words.size(), 1);
    auto mention = side_vectors(ex.mention_words, ex.mention_tags, mention_mask);

    Tensor v_entity = encode_avg(mention, mention_mask);

    auto compact = [](const std::vector<Tensor>& slots, const std::vector<std::uint8_t>& mask) {
        std::vector<Tensor> out;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (mask[i]) out.push_back(slots[i]);
        }
        return out;
    };

    Tensor v_left, v_right;
    switch (cfg_.kind) {
        case EncoderKind::Avg:
            v_left = encode_avg(left, ex.left_mask);
            v_right = encode_avg(right, ex.right_mask);
            break;
        case EncoderKind::Rnn:
            // Both sides consumed toward the mention: left runs
            // left-to-right, right runs right-to-left.
            v_left = encode_rnn(*rnn_left_, compact(left, ex.left_mask));
            {
                auto r = compact(right, ex.right_mask);
                std::reverse(r.begin(), r.end());
                v_right = encode_rnn(*rnn_right_, std::move(r));
            }
            break;
        case EncoderKind::Att:
            v_left = encode_att(*att_left_fwd_, *att_left_bwd_, compact(left, ex.left_mask));
            v_right =
                encode_att(*att_right_fwd_, *att_right_bwd_, compact(right, ex.right_mask));
            break;
    }

    if (train && cfg_.dropout_p > 0.0) {
        v_left = tape_.dropout(v_left, cfg_.dropout_p, true, *dropout_rng);
        v_right = tape_.dropout(v_right, cfg_.dropout_p, true, *dropout_rng);
        v_entity = tape_.dropout(v_entity, cfg_.dropout_p, true, *dropout_rng);
    }

    return tape_.concat({v_left, v_right, v_entity});
}

Tensor Model::forward(const WindowedExample& ex, bool train, std::mt19937_64* dropout_rng) {
    return tape_.sigmoid(tape_.matvec(w_y_, features(ex, train, dropout_rng)));
}

Tensor Model::batch_loss(const std::vector<WindowedExample>& batch, bool train,
                         std::mt19937_64* dropout_rng) {
    if (batch.empty()) throw ValidationError("empty batch");
    tape_.start_batch();
    std::vector<Tensor> losses;
    losses.reserve(batch.size());
    for (const auto& ex : batch) {
        Tensor y = forward(ex, train, dropout_rng);
        losses.push_back(bce_loss(tape_, y, ex.target));
    }
    Tensor total = tape_.sum(tape_.concat(losses));
    return tape_.scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::vector<double> Model::infer(const WindowedExample& ex) {
    tape_.start_batch();
    Tensor y = forward(ex, false, nullptr);
    std::vector<double> out = y.data();
    tape_.start_batch();
    return out;
}

std::vector<double> Model::feature_vector(const WindowedExample& ex) {
    tape_.start_batch();
    std::vector<double> out = features(ex, false, nullptr).data();
    tape_.start_batch();
    return out;
}

std::vector<std::pair<Tensor, int>> Model::pad_rows() const {
    std::vector<std::pair<Tensor, int>> out{{word_table_, 0}};
    for (const auto& t : feat_tables_) {
        if (t) out.emplace_back(*t, 0);
    }
    return out;
}

void Model::zero_pad_rows() {
    for (auto& [table, row] : pad_rows()) {
        int d = table.shape()[1];
        std::fill(table.data().begin() + row * d, table.data().begin() + (row + 1) * d, 0.0);
    }
}

json Model::to_checkpoint() const {
    json params = json::object();
    for (const auto& [name, t] : params_) {
        json arr;
        if (t.shape().size() == 2) {
            int rows = t.shape()[0], cols = t.shape()[1];
            arr = json::array();
            for (int i = 0; i < rows; ++i) {
                json row = json::array();
                for (int j = 0; j < cols; ++j) row.push_back(t.data()[i * cols + j]);
                arr.push_back(std::move(row));
            }
        } else {
            arr = t.data();
        }
        params[name] = std::move(arr);
    }
    return json{{"format_version", 1},
                {"encoder", cfg_.to_json()},
                {"k", k_},
                {"taxonomy_hash", to_hex(taxonomy_hash_)},
                {"vocab_hash",
                 {{"word", to_hex(word_hash_)},
                  {"pos", to_hex(tag_hashes_[0])},
                  {"ner", to_hex(tag_hashes_[1])},
                  {"typ", to_hex(tag_hashes_[2])}}},
                {"params", std::move(params)}};
}

Model Model::from_checkpoint(const json& doc, const Taxonomy& tax, const Vocab& vocab) {
    if (doc.value("format_version", 0) != 1) {
        throw ValidationError("checkpoint: unsupported format_version");
    }
    EncoderConfig cfg = EncoderConfig::from_json(doc.at("encoder"));
    Model model(tax, vocab, cfg, nullptr, 0);
    if (doc.value("k", -1) != model.k_) {
        throw ValidationError("checkpoint: label count mismatch with taxonomy");
    }
    if (doc.value("taxonomy_hash", "") != to_hex(model.taxonomy_hash_)) {
        throw ValidationError("checkpoint: taxonomy hash mismatch");
    }
    const auto& vh = doc.at("vocab_hash");
    if (vh.value("word", "") != to_hex(model.word_hash_) ||
        vh.value("pos", "") != to_hex(model.tag_hashes_[0]) ||
        vh.value("ner", "") != to_hex(model.tag_hashes_[1]) ||
        vh.value("typ", "") != to_hex(model.tag_hashes_[2])) {
        throw ValidationError("checkpoint: vocab hash mismatch");
    }
    const auto& params = doc.at("params");
    for (auto& [name, t] : model.params_) {
        if (!params.contains(name)) {
            throw ValidationError("checkpoint: missing parameter " + name);
        }
        const json& arr = params.at(name);
        if (t.shape().size() == 2) {
            int rows = t.shape()[0], cols = t.shape()[1];
            if (static_cast<int>(arr.size()) != rows) {
                throw ValidationError("checkpoint: shape mismatch for " + name);
            }
            for (int i = 0; i < rows; ++i) {
                if (static_cast<int>(arr[i].size()) != cols) {
                    throw ValidationError("checkpoint: shape mismatch for " + name);
                }
                for (int j = 0; j < cols; ++j) t.data()[i * cols + j] = arr[i][j].get<double>();
            }
        } else {
            if (static_cast<int>(arr.size()) != t.size()) {
                throw ValidationError("checkpoint: shape mismatch for " + name);
            }
            for (int i = 0; i < t.size(); ++i) t.data()[i] = arr[i].get<double>();
        }
    }
    return model;
}

Model Model::load_checkpoint_file(const std::string& path, const Taxonomy& tax,
                                  const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return from_checkpoint(doc, tax, vocab);
}

}  // namespace pde
