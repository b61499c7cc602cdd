#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pde/corpus.hpp"
#include "pde/taxonomy.hpp"

namespace pde {

// Desk-scale corpus generator. Leaf classes come in confusable pairs:
// part of each paired class's records draw their context only from the
// pair-shared word pool, so context alone cannot separate them, while the
// TYP tag at the mention does. Mention surface words carry no class signal
// and are disjoint across splits, so models must read context and features
// rather than memorize surfaces.
struct SynthConfig {
    enum class TypMode { Informative, Shuffled, Off };

    int n_classes = 5;  // leaf classes; the taxonomy gets 2*n_classes labels
    int n_train = 500;
    int n_dev = 100;
    int n_test = 100;
    TypMode typ_mode = TypMode::Informative;

    int filler_vocab = 20;
    int evidence_per_class = 8;   // class-own context words
    int shared_per_pair = 8;      // pair-shared context words
    int surfaces_per_split = 150;  // mention surface words per split
    int max_context = 8;          // context tokens per side

    // Fraction of a paired class's records that are context-ambiguous.
    // Asymmetric on purpose: the within-pair prior on ambiguous records
    // is then away from 1/2, so a featureless model has a deterministic
    // best guess instead of a coin flip.
    double ambiguous_frac_major = 0.40;  // even pair member
    double ambiguous_frac_minor = 0.15;  // odd pair member

    // Optional explicit leaf label paths; default "/g<i>/t<i>".
    std::vector<std::string> leaf_labels;

    void validate() const;
};

struct SynthCorpus {
    Taxonomy taxonomy;
    std::vector<MentionRecord> train, dev, test;
};

SynthCorpus synth_corpus(const SynthConfig& cfg, std::uint64_t seed);

SynthConfig::TypMode typ_mode_from_string(const std::string& s);

}  // namespace pde
