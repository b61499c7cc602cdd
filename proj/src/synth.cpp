#include "pde/synth.hpp"

#include <algorithm>

#include "pde/common.hpp"

namespace pde {

void SynthConfig::validate() const {
    if (n_classes < 2) throw ValidationError("synth: need at least 2 classes");
    if (n_train < n_classes || n_dev < 1 || n_test < 1) {
        throw ValidationError("synth: split sizes too small");
    }
    if (!leaf_labels.empty() && static_cast<int>(leaf_labels.size()) != n_classes) {
        throw ValidationError("synth: leaf_labels count does not match n_classes");
    }
    for (const auto& l : leaf_labels) {
        if (!valid_label_path(l)) throw ValidationError("synth: malformed leaf label " + l);
    }
    if (ambiguous_frac_major < 0 || ambiguous_frac_major > 1 || ambiguous_frac_minor < 0 ||
        ambiguous_frac_minor > 1) {
        throw ValidationError("synth: ambiguity fractions must lie in [0,1]");
    }
    if (filler_vocab < 1 || evidence_per_class < 2 || shared_per_pair < 1 ||
        surfaces_per_split < 1 || max_context < 3) {
        throw ValidationError("synth: vocabulary sizes too small");
    }
}

SynthConfig::TypMode typ_mode_from_string(const std::string& s) {
    if (s == "informative") return SynthConfig::TypMode::Informative;
    if (s == "shuffled") return SynthConfig::TypMode::Shuffled;
    if (s == "off") return SynthConfig::TypMode::Off;
    throw ValidationError("synth: unknown typ mode \"" + s + "\"");
}

namespace {

struct Pools {
    std::vector<std::string> filler;
    std::vector<std::vector<std::string>> own;     // per class
    std::vector<std::vector<std::string>> shared;  // per pair id (class/2)
    // surfaces[split] -> mention words, class-independent, disjoint between splits
    std::vector<std::vector<std::string>> surfaces;
};

Pools build_pools(const SynthConfig& cfg) {
    Pools p;
    for (int i = 0; i < cfg.filler_vocab; ++i) p.filler.push_back("w" + std::to_string(i));
    p.own.resize(cfg.n_classes);
    for (int c = 0; c < cfg.n_classes; ++c) {
        for (int i = 0; i < cfg.evidence_per_class; ++i) {
            p.own[c].push_back("ev" + std::to_string(c) + "x" + std::to_string(i));
        }
    }
    int n_pairs = (cfg.n_classes + 1) / 2;
    p.shared.resize(n_pairs);
    for (int q = 0; q < n_pairs; ++q) {
        for (int i = 0; i < cfg.shared_per_pair; ++i) {
            p.shared[q].push_back("sh" + std::to_string(q) + "x" + std::to_string(i));
        }
    }
    p.surfaces.resize(3);
    static const char* split_tag[3] = {"tr", "dv", "te"};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < cfg.surfaces_per_split; ++i) {
            p.surfaces[s].push_back("m" + std::string(split_tag[s]) + "x" + std::to_string(i));
        }
    }
    return p;
}

const std::string& pick(const std::vector<std::string>& pool, std::mt19937_64& rng) {
    return pool[rand_index(rng, pool.size())];
}

MentionRecord make_record(const SynthConfig& cfg, const Pools& pools, int split, int cls,
                          bool ambiguous, std::mt19937_64& rng) {
    int pair = cls / 2;
    bool has_pair = (cls | 1) < cfg.n_classes;

    auto context_word = [&](bool force_own) -> const std::string& {
        if (force_own) return pick(pools.own[cls], rng);
        double u = rand_uniform(rng, 0.0, 1.0);
        if (ambiguous && has_pair) {
            // Context carries pair evidence only: the class within the
            // pair is not recoverable from words.
            if (u < 0.55) return pick(pools.shared[pair], rng);
            return pick(pools.filler, rng);
        }
        if (u < 0.65) return pick(pools.own[cls], rng);
        if (has_pair && u < 0.75) return pick(pools.shared[pair], rng);
        return pick(pools.filler, rng);
    };

    int n_left = 1 + static_cast<int>(rand_index(rng, cfg.max_context));
    int n_right = 1 + static_cast<int>(rand_index(rng, cfg.max_context));
    int n_mention = 1 + static_cast<int>(rand_index(rng, 2));

    MentionRecord rec;
    for (int i = 0; i < n_left; ++i) {
        // Clear records always carry class-own evidence next to the mention.
        bool force_own = !ambiguous && i >= n_left - 2;
        rec.tokens.push_back(context_word(force_own));
    }
    rec.start = n_left;
    for (int i = 0; i < n_mention; ++i) {
        rec.tokens.push_back(pick(pools.surfaces[split], rng));
    }
    rec.end = rec.start + n_mention;
    for (int i = 0; i < n_right; ++i) {
        bool force_own = !ambiguous && i < 2;
        rec.tokens.push_back(context_word(force_own));
    }

    int n = rec.n_tokens();
    std::vector<std::string> typ(n, "O");
    if (cfg.typ_mode != SynthConfig::TypMode::Off) {
        for (int i = rec.start; i < rec.end; ++i) typ[i] = "TYPE" + std::to_string(cls);
    }
    rec.typ = std::move(typ);
    rec.ner = std::vector<std::string>(n, "O");
    rec.pos = pos_lite(rec.tokens);
    return rec;
}

// Decorrelates the TYP channel from the gold label while preserving the
// tag marginals: permute the mention tags across the split's records.
void shuffle_typ(std::vector<MentionRecord>& records, std::mt19937_64& rng) {
    std::vector<std::string> tags;
    tags.reserve(records.size());
    for (const auto& rec : records) tags.push_back((*rec.typ)[rec.start]);
    shuffle_vec(tags, rng);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& rec = records[i];
        for (int t = rec.start; t < rec.end; ++t) (*rec.typ)[t] = tags[i];
    }
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();

    std::vector<std::string> leaves = cfg.leaf_labels;
    if (leaves.empty()) {
        for (int c = 0; c < cfg.n_classes; ++c) {
            leaves.push_back("/g" + std::to_string(c) + "/t" + std::to_string(c));
        }
    }
    SynthCorpus out;
    out.taxonomy = Taxonomy::from_labels(leaves);  // parents auto-inserted

    Pools pools = build_pools(cfg);
    const int sizes[3] = {cfg.n_train, cfg.n_dev, cfg.n_test};
    std::vector<MentionRecord>* splits[3] = {&out.train, &out.dev, &out.test};

    for (int s = 0; s < 3; ++s) {
        auto rng = make_rng(seed, 100 + s);
        for (int i = 0; i < sizes[s]; ++i) {
            int cls = i % cfg.n_classes;  // exact per-class quota
            bool has_pair = (cls | 1) < cfg.n_classes;
            double amb_frac =
                cls % 2 == 0 ? cfg.ambiguous_frac_major : cfg.ambiguous_frac_minor;
            bool ambiguous = has_pair && rand_uniform(rng, 0.0, 1.0) < amb_frac;
            MentionRecord rec = make_record(cfg, pools, s, cls, ambiguous, rng);
            rec.labels = out.taxonomy.encode({leaves[cls]});
            splits[s]->push_back(std::move(rec));
        }
        if (cfg.typ_mode == SynthConfig::TypMode::Shuffled) {
            auto shuffle_rng = make_rng(seed, 200 + s);
            shuffle_typ(*splits[s], shuffle_rng);
        }
    }
    return out;
}

}  // namespace pde
