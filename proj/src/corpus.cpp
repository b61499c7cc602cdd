#include "pde/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pde/common.hpp"

namespace pde {

using nlohmann::json;

namespace {

std::vector<std::string> string_array(const json& j, const char* key, int line) {
    std::vector<std::string> out;
    for (const auto& el : j.at(key)) {
        if (!el.is_string()) {
            throw ValidationError("line " + std::to_string(line) + ": " + key +
                                  " must be an array of strings");
        }
        out.push_back(el.get<std::string>());
    }
    return out;
}

void validate_record(const MentionRecord& rec, int line) {
    std::string at = line > 0 ? "line " + std::to_string(line) + ": " : "";
    if (rec.tokens.empty()) throw ValidationError(at + "no tokens");
    if (rec.start == rec.end) throw ValidationError(at + "empty mention span");
    if (rec.start < 0 || rec.start > rec.end || rec.end > rec.n_tokens()) {
        throw ValidationError(at + "mention span [" + std::to_string(rec.start) + "," +
                              std::to_string(rec.end) + ") out of range for " +
                              std::to_string(rec.n_tokens()) + " tokens");
    }
    auto check_channel = [&](const std::optional<std::vector<std::string>>& ch, const char* name) {
        if (ch && static_cast<int>(ch->size()) != rec.n_tokens()) {
            throw ValidationError(at + std::string(name) + " channel length mismatch: " +
                                  std::to_string(ch->size()) + " tags for " +
                                  std::to_string(rec.n_tokens()) + " tokens");
        }
    };
    check_channel(rec.pos, "pos");
    check_channel(rec.ner, "ner");
    check_channel(rec.typ, "typ");
    if (rec.labels.empty()) throw ValidationError(at + "empty gold label set");
}

}  // namespace

std::vector<MentionRecord> load_jsonl(const std::string& path, const Taxonomy& tax) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus file: " + path);
    std::vector<MentionRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": invalid JSON: " +
                                  e.what());
        }
        MentionRecord rec;
        try {
            rec.tokens = string_array(j, "tokens", line_no);
            rec.start = j.at("start").get<int>();
            rec.end = j.at("end").get<int>();
            auto label_strings = string_array(j, "labels", line_no);
            try {
                rec.labels = tax.encode(label_strings);
            } catch (const ValidationError& e) {
                throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
            }
            if (j.contains("pos")) rec.pos = string_array(j, "pos", line_no);
            if (j.contains("ner")) rec.ner = string_array(j, "ner", line_no);
            if (j.contains("typ")) rec.typ = string_array(j, "typ", line_no);
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        validate_record(rec, line_no);
        records.push_back(std::move(rec));
    }
    return records;
}

void save_jsonl(const std::string& path, const std::vector<MentionRecord>& records,
                const Taxonomy& tax) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write corpus file: " + path);
    for (const auto& rec : records) {
        json j;
        j["tokens"] = rec.tokens;
        j["start"] = rec.start;
        j["end"] = rec.end;
        j["labels"] = tax.decode(rec.labels);
        if (rec.pos) j["pos"] = *rec.pos;
        if (rec.ner) j["ner"] = *rec.ner;
        if (rec.typ) j["typ"] = *rec.typ;
        out << j.dump() << "\n";
    }
}

void auto_annotate(std::vector<MentionRecord>& records, const std::vector<RegexRule>& rules,
                   const std::vector<Gazetteer>& gazetteers, bool overwrite) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& rec = records[i];
        if (!overwrite && (rec.pos || rec.ner || rec.typ)) {
            throw ValidationError("record " + std::to_string(i) +
                                  " already carries tag channels (pass overwrite to replace)");
        }
        auto anns = annotate_regex(rec.tokens, rules);
        auto gaz = annotate_gazetteer(rec.tokens, gazetteers);
        anns.insert(anns.end(), gaz.begin(), gaz.end());
        anns = resolve_overlaps(std::move(anns));

        rec.typ = spans_to_token_tags(anns, rec.tokens.size());
        std::vector<std::string> ner(rec.tokens.size(), "O");
        for (const auto& a : anns) {
            std::string tag = coarse_ner_tag(a.type_name);
            for (int t = a.start; t < a.end; ++t) ner[t] = tag;
        }
        rec.ner = std::move(ner);
        rec.pos = pos_lite(rec.tokens);
    }
}

Embeddings load_embeddings(const std::string& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open embeddings file: " + path);
    Embeddings emb;
    emb.dim = expected_dim;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> vec;
        double v;
        while (ss >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != expected_dim) {
            throw ValidationError("embeddings line " + std::to_string(line_no) + ": got " +
                                  std::to_string(vec.size()) + " dims, expected " +
                                  std::to_string(expected_dim));
        }
        emb.vectors[word] = std::move(vec);
    }
    return emb;
}

int Vocab::TagMap::add(const std::string& tag) {
    auto it = ids.find(tag);
    if (it != ids.end()) return it->second;
    int id = static_cast<int>(tags.size());
    tags.push_back(tag);
    ids[tag] = id;
    return id;
}

int Vocab::add_word(const std::string& word, bool is_pretrained) {
    auto it = word_ids.find(word);
    if (it != word_ids.end()) return it->second;
    int id = static_cast<int>(words.size());
    words.push_back(word);
    word_ids[word] = id;
    pretrained.push_back(is_pretrained);
    return id;
}

std::uint64_t Vocab::word_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& w : words) {
        h = fnv1a64(w, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

std::uint64_t Vocab::tag_hash(Channel c) const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : tags(c).tags) {
        h = fnv1a64(t, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

void Vocab::save(const std::string& path) const {
    json j;
    j["words"] = words;
    j["pretrained"] = std::vector<bool>(pretrained.begin(), pretrained.end());
    j["pos_tags"] = tags(Channel::Pos).tags;
    j["ner_tags"] = tags(Channel::Ner).tags;
    j["typ_tags"] = tags(Channel::Typ).tags;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write vocab file: " + path);
    out << j.dump(2) << "\n";
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocab file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("vocab file " + path + " is not valid JSON: " + e.what());
    }
    Vocab v;
    auto words = j.at("words").get<std::vector<std::string>>();
    auto pre = j.at("pretrained").get<std::vector<bool>>();
    if (words.size() != pre.size() || words.size() < 2) {
        throw ValidationError("vocab file " + path + ": inconsistent word table");
    }
    for (std::size_t i = 2; i < words.size(); ++i) v.add_word(words[i], pre[i]);
    auto load_tags = [&](Channel c, const char* key) {
        for (const auto& t : j.at(key).get<std::vector<std::string>>()) v.tags(c).add(t);
    };
    load_tags(Channel::Pos, "pos_tags");
    load_tags(Channel::Ner, "ner_tags");
    load_tags(Channel::Typ, "typ_tags");
    return v;
}

Vocab build_vocab(const std::vector<MentionRecord>& records, const Embeddings* emb) {
    if (records.empty()) throw ValidationError("empty corpus");
    Vocab v;
    for (const auto& rec : records) {
        for (const auto& tok : rec.tokens) {
            v.add_word(tok, emb != nullptr && emb->find(tok) != nullptr);
        }
        auto collect = [&](const std::optional<std::vector<std::string>>& ch, Channel c) {
            if (!ch) return;
            for (const auto& tag : *ch) v.tags(c).add(tag);
        };
        collect(rec.pos, Channel::Pos);
        collect(rec.ner, Channel::Ner);
        collect(rec.typ, Channel::Typ);
    }
    return v;
}

WindowedExample window(const MentionRecord& rec, int context_width, int mention_cap,
                       const Vocab& vocab, const std::vector<Channel>& channels) {
    if (context_width < 1) throw ValidationError("window size must be >= 1");
    validate_record(rec, 0);
    for (Channel c : channels) {
        const auto* ch = c == Channel::Pos ? &rec.pos : c == Channel::Ner ? &rec.ner : &rec.typ;
        if (!ch->has_value()) {
            throw ValidationError(std::string("record lacks required ") + channel_name(c) +
                                  " channel");
        }
    }

    WindowedExample ex;
    ex.target = rec.labels;
    const int C = context_width;
    const int n = rec.n_tokens();

    auto tag_id = [&](Channel c, int tok) {
        const auto& ch = c == Channel::Pos ? rec.pos : c == Channel::Ner ? rec.ner : rec.typ;
        return vocab.tags(c).id((*ch)[tok]);
    };

    // Left: the C tokens before the mention, PAD-prefixed to length C.
    ex.left_words.assign(C, Vocab::kPad);
    ex.left_mask.assign(C, 0);
    for (Channel c : channels) ex.left_tags[static_cast<int>(c)].assign(C, Vocab::kPad);
    int left_n = std::min(C, rec.start);
    for (int i = 0; i < left_n; ++i) {
        int tok = rec.start - left_n + i;
        int slot = C - left_n + i;
        ex.left_words[slot] = vocab.word_id(rec.tokens[tok]);
        ex.left_mask[slot] = 1;
        for (Channel c : channels) ex.left_tags[static_cast<int>(c)][slot] = tag_id(c, tok);
    }

    // Right: the C tokens after the mention, PAD-suffixed.
    ex.right_words.assign(C, Vocab::kPad);
    ex.right_mask.assign(C, 0);
    for (Channel c : channels) ex.right_tags[static_cast<int>(c)].assign(C, Vocab::kPad);
    int right_n = std::min(C, n - rec.end);
    for (int i = 0; i < right_n; ++i) {
        int tok = rec.end + i;
        ex.right_words[i] = vocab.word_id(rec.tokens[tok]);
        ex.right_mask[i] = 1;
        for (Channel c : channels) ex.right_tags[static_cast<int>(c)][i] = tag_id(c, tok);
    }

    // Mention: own length, tail-truncated at mention_cap.
    int m_n = std::min(rec.end - rec.start, mention_cap);
    for (int i = 0; i < m_n; ++i) {
        int tok = rec.start + i;
        ex.mention_words.push_back(vocab.word_id(rec.tokens[tok]));
        for (Channel c : channels) ex.mention_tags[static_cast<int>(c)].push_back(tag_id(c, tok));
    }
    return ex;
}

}  // namespace pde
