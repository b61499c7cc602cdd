#include "pde/pipeline.hpp"

#include <algorithm>

#include "pde/common.hpp"

namespace pde {

void OverrideTable::validate(const Taxonomy& tax) const {
    for (const auto& [coarse, fine] : map) {
        if (coarse.empty()) throw ValidationError("override with empty coarse type");
        if (!tax.contains(fine)) {
            throw ValidationError("override target \"" + fine + "\" is not in the taxonomy");
        }
    }
}

OverrideTable OverrideTable::from_json(const nlohmann::json& j, const Taxonomy& tax) {
    OverrideTable table;
    for (auto it = j.begin(); it != j.end(); ++it) {
        table.map[it.key()] = it.value().get<std::string>();
    }
    table.validate(tax);
    return table;
}

namespace {

std::vector<SpanAnnotation> annotate_sentence(const std::vector<std::string>& tokens,
                                              const Annotators& annotators) {
    auto anns = annotate_regex(tokens, annotators.rules);
    auto gaz = annotate_gazetteer(tokens, annotators.gazetteers);
    anns.insert(anns.end(), gaz.begin(), gaz.end());
    return resolve_overlaps(std::move(anns));
}

}  // namespace

std::vector<std::pair<int, int>> discover_mentions(const std::vector<std::string>& tokens,
                                                   const Annotators& annotators) {
    if (tokens.empty()) throw ValidationError("discover_mentions: no tokens");
    std::vector<std::pair<int, int>> out;
    for (const auto& a : annotate_sentence(tokens, annotators)) {
        out.emplace_back(a.start, a.end);
    }
    return out;  // resolve_overlaps already sorts by start
}

std::vector<PipelineOutput> run_pipeline(
    const std::vector<std::string>& tokens,
    const std::optional<std::vector<std::pair<int, int>>>& mentions, Model& model,
    const Annotators& annotators, const OverrideTable& overrides, const Taxonomy& tax,
    const Vocab& vocab) {
    if (tokens.empty()) throw ValidationError("run_pipeline: no tokens");
    overrides.validate(tax);
    if (model.n_labels() != tax.size()) {
        throw ValidationError("checkpoint label count does not match taxonomy");
    }

    auto anns = annotate_sentence(tokens, annotators);

    std::vector<std::pair<int, int>> spans;
    if (mentions) {
        spans = *mentions;
        for (auto [s, e] : spans) {
            if (s < 0 || s >= e || e > static_cast<int>(tokens.size())) {
                throw ValidationError("mention span [" + std::to_string(s) + "," +
                                      std::to_string(e) + ") out of range");
            }
        }
    } else {
        for (const auto& a : anns) spans.emplace_back(a.start, a.end);
    }

    // Feature channels come from the same annotator pass.
    MentionRecord rec;
    rec.tokens = tokens;
    rec.typ = spans_to_token_tags(anns, tokens.size());
    rec.ner = std::vector<std::string>(tokens.size(), "O");
    for (const auto& a : anns) {
        std::string tag = coarse_ner_tag(a.type_name);
        for (int t = a.start; t < a.end; ++t) (*rec.ner)[t] = tag;
    }
    rec.pos = pos_lite(tokens);
    rec.labels = LabelSet(tax.size());

    std::vector<PipelineOutput> out;
    for (auto [s, e] : spans) {
        PipelineOutput po;
        po.start = s;
        po.end = e;

        const SpanAnnotation* exact = nullptr;
        for (const auto& a : anns) {
            if (a.start == s && a.end == e) {
                exact = &a;
                break;
            }
        }
        auto ov = exact ? overrides.map.find(exact->type_name) : overrides.map.end();
        if (exact && ov != overrides.map.end()) {
            po.provenance = Provenance::Override;
            po.labels = tax.encode({ov->second});
        } else {
            po.provenance = Provenance::Model;
            rec.start = s;
            rec.end = e;
            rec.labels = LabelSet(tax.size());
            rec.labels.set(0);  // placeholder gold; windowing requires non-empty
            auto ex = window(rec, model.config().window, model.config().mention_cap, vocab,
                             model.config().channels());
            po.scores = model.infer(ex);
            po.labels = tax.close_ancestors(predict_labels(po.scores));
        }
        out.push_back(std::move(po));
    }
    return out;
}

}  // namespace pde
