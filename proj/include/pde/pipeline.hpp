#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pde/annotate.hpp"
#include "pde/model.hpp"
#include "pde/taxonomy.hpp"

namespace pde {

// End-to-end classification: annotators find coarse spans, the neural model
// types mentions, and a rule table overrides the model for coarse types the
// annotators already get right (emails, zips, ...).

struct Annotators {
    std::vector<RegexRule> rules;
    std::vector<Gazetteer> gazetteers;
};

// Annotator coarse type -> final fine label path. Override precedence is
// absolute: a listed type never reaches the model.
struct OverrideTable {
    std::unordered_map<std::string, std::string> map;

    void validate(const Taxonomy& tax) const;
    static OverrideTable from_json(const nlohmann::json& j, const Taxonomy& tax);
};

enum class Provenance { Model, Override };
inline const char* provenance_name(Provenance p) {
    return p == Provenance::Model ? "MODEL" : "OVERRIDE";
}

struct PipelineOutput {
    int start = 0;
    int end = 0;
    LabelSet labels;  // ancestor-closed, non-empty
    Provenance provenance = Provenance::Model;
    std::vector<double> scores;  // raw y; empty for overrides
};

// Union of resolved annotator spans, non-overlapping, sorted by start.
std::vector<std::pair<int, int>> discover_mentions(const std::vector<std::string>& tokens,
                                                   const Annotators& annotators);

// Runs the full pipeline over one sentence. Mentions may be supplied
// externally; otherwise the annotators discover them.
std::vector<PipelineOutput> run_pipeline(
    const std::vector<std::string>& tokens,
    const std::optional<std::vector<std::pair<int, int>>>& mentions, Model& model,
    const Annotators& annotators, const OverrideTable& overrides, const Taxonomy& tax,
    const Vocab& vocab);

}  // namespace pde
