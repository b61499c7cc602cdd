#pragma once

#include <regex>
#include <string>
#include <unordered_set>
#include <vector>

namespace pde {

// Token-level stand-ins for external coarse annotators: regex pattern
// detectors plus dictionary (gazetteer) span matchers. They feed three
// consumers: dataset annotation, per-token feature channels, and
// pipeline overrides.

struct RegexRule {
    std::string name;     // coarse type, e.g. EMAIL_ADDRESS
    std::string pattern;  // source text, kept for diagnostics
    int priority = 0;
    std::regex compiled;
};

struct Gazetteer {
    std::string type_name;
    std::unordered_set<std::string> entries;  // case-folded, space-joined token runs
    int max_entry_tokens = 1;
};

enum class AnnSource { Rule, Gazetteer };

struct SpanAnnotation {
    int start = 0;  // token index, inclusive
    int end = 0;    // token index, exclusive
    std::string type_name;
    AnnSource source = AnnSource::Rule;
    int priority = 0;

    bool operator==(const SpanAnnotation&) const = default;
};

// Rules file: JSON array of {name, pattern, priority}. Pattern compile
// errors and duplicate priorities are reported here, not per call.
std::vector<RegexRule> load_rules(const std::string& path);

// Gazetteer directory: one <TYPE>.txt per type, one entry per line.
std::vector<Gazetteer> load_gazetteers(const std::string& dir);
Gazetteer make_gazetteer(const std::string& type_name, const std::vector<std::string>& entries);

// Applies each rule to single tokens and to space-joined runs of up to
// 5 tokens; whole-run matches only. Output sorted by (start, -priority).
std::vector<SpanAnnotation> annotate_regex(const std::vector<std::string>& tokens,
                                           const std::vector<RegexRule>& rules);

// Case-insensitive dictionary lookup; at each start position only the
// longest match survives. Ties across gazetteers at the same start and
// length are all kept (resolve_overlaps arbitrates).
std::vector<SpanAnnotation> annotate_gazetteer(const std::vector<std::string>& tokens,
                                               const std::vector<Gazetteer>& gazetteers);

// Greedy conflict resolution: longer span, then higher priority, then
// lower start, then type name. Output is non-overlapping, sorted by start.
std::vector<SpanAnnotation> resolve_overlaps(std::vector<SpanAnnotation> anns);

// Non-overlapping spans -> per-token tag sequence; uncovered tokens get "O".
std::vector<std::string> spans_to_token_tags(const std::vector<SpanAnnotation>& anns,
                                             std::size_t n_tokens);

// Heuristic coarse POS tagger: closed-class word lists plus suffix rules.
// Tag set: NOUN VERB ADJ NUM PUNCT PROPN OTHER. Deterministic.
std::vector<std::string> pos_lite(const std::vector<std::string>& tokens);

// Maps fine annotator types onto rudimentary NER-style classes
// (CITY -> LOCATION etc.); unmapped types pass through unchanged.
std::string coarse_ner_tag(const std::string& type_name);

std::string casefold(const std::string& s);
std::string join_tokens(const std::vector<std::string>& tokens, std::size_t start, std::size_t end);

}  // namespace pde
