#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pde/annotate.hpp"
#include "pde/taxonomy.hpp"

namespace pde {

// One labeled entity mention: the sentence tokens, the mention span
// [start,end), the gold label set (ancestor-closed), and optional
// per-token tag channels.
struct MentionRecord {
    std::vector<std::string> tokens;
    int start = 0;
    int end = 0;
    LabelSet labels;
    std::optional<std::vector<std::string>> pos;
    std::optional<std::vector<std::string>> ner;
    std::optional<std::vector<std::string>> typ;

    int n_tokens() const { return static_cast<int>(tokens.size()); }
};

// JSONL corpus: one {"tokens":..,"start":..,"end":..,"labels":[..],
// "pos"?:.., "ner"?:.., "typ"?:..} object per line. Validation errors
// carry the 1-based line number.
std::vector<MentionRecord> load_jsonl(const std::string& path, const Taxonomy& tax);
void save_jsonl(const std::string& path, const std::vector<MentionRecord>& records,
                const Taxonomy& tax);

// Fills pos (pos_lite), typ (resolved annotator spans), and ner (coarsened
// typ) channels on every record. With overwrite=false, any record that
// already carries a channel is an error.
void auto_annotate(std::vector<MentionRecord>& records, const std::vector<RegexRule>& rules,
                   const std::vector<Gazetteer>& gazetteers, bool overwrite = false);

// GloVe-style text embeddings: one line per token, token then dim floats.
struct Embeddings {
    int dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;

    const std::vector<double>* find(const std::string& word) const {
        auto it = vectors.find(word);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

Embeddings load_embeddings(const std::string& path, int expected_dim);

enum class Channel : int { Pos = 0, Ner = 1, Typ = 2 };
inline const char* channel_name(Channel c) {
    switch (c) {
        case Channel::Pos: return "pos";
        case Channel::Ner: return "ner";
        case Channel::Typ: return "typ";
    }
    return "?";
}

// Word and tag vocabularies. PAD=0 and UNK=1 in every map.
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    struct TagMap {
        std::vector<std::string> tags{"<pad>", "<unk>"};
        std::unordered_map<std::string, int> ids{{"<pad>", kPad}, {"<unk>", kUnk}};

        int id(const std::string& tag) const {
            auto it = ids.find(tag);
            return it == ids.end() ? kUnk : it->second;
        }
        int add(const std::string& tag);
        int size() const { return static_cast<int>(tags.size()); }
    };

    std::vector<std::string> words{"<pad>", "<unk>"};
    std::unordered_map<std::string, int> word_ids{{"<pad>", kPad}, {"<unk>", kUnk}};
    std::vector<bool> pretrained{false, false};  // aligned with words
    std::array<TagMap, 3> tag_maps;              // indexed by Channel

    int word_id(const std::string& word) const {
        auto it = word_ids.find(word);
        return it == word_ids.end() ? kUnk : it->second;
    }
    int add_word(const std::string& word, bool is_pretrained);
    int n_words() const { return static_cast<int>(words.size()); }
    const TagMap& tags(Channel c) const { return tag_maps[static_cast<int>(c)]; }
    TagMap& tags(Channel c) { return tag_maps[static_cast<int>(c)]; }

    std::uint64_t word_hash() const;
    std::uint64_t tag_hash(Channel c) const;

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);
};

// Vocabulary = union of corpus tokens, each flagged pretrained when the
// embeddings file has it. Pass nullptr when training without pretrained
// vectors (all rows random-init).
Vocab build_vocab(const std::vector<MentionRecord>& records, const Embeddings* emb);

// Fixed-width context windows around the mention. Left slots are
// pre-padded (PAD first), right slots post-padded; the mention keeps its
// own length, capped at mention_cap by truncating the tail.
struct WindowedExample {
    std::vector<int> left_words, right_words, mention_words;
    std::array<std::vector<int>, 3> left_tags, right_tags, mention_tags;  // by Channel
    std::vector<std::uint8_t> left_mask, right_mask;                      // 1 = real token
    LabelSet target;
};

WindowedExample window(const MentionRecord& rec, int context_width, int mention_cap,
                       const Vocab& vocab, const std::vector<Channel>& channels);

}  // namespace pde
