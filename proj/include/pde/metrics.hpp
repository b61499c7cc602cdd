#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pde/taxonomy.hpp"

namespace pde {

// Scoring conventions: strict = exact set match; macro averages per-mention
// precision and recall over mentions, then takes F1 of those means; micro
// pools true-positive/predicted/gold counts over all mentions. An empty
// prediction set contributes precision 0.

struct PerLabelScore {
    double p = 0.0, r = 0.0, f1 = 0.0;
    int support = 0;  // mentions whose gold set carries the label
};

struct EvalReport {
    double strict = 0.0;
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    double micro_p = 0.0, micro_r = 0.0, micro_f1 = 0.0;
    double gmean = 0.0;
    std::vector<std::pair<std::string, PerLabelScore>> per_label;  // taxonomy order

    nlohmann::json to_json() const;
    // Fixed-width row in table order: Accuracy, Macro F1, Micro F1, GMean.
    std::string table_row(const std::string& name) const;
    static std::string table_header();
};

EvalReport score(const std::vector<LabelSet>& pred, const std::vector<LabelSet>& gold,
                 const Taxonomy& tax);

// Cube root of the product; inputs must lie in [0,1].
double gmean(double strict, double macro_f1, double micro_f1);

std::vector<std::pair<std::string, PerLabelScore>> per_label_f1(
    const std::vector<LabelSet>& pred, const std::vector<LabelSet>& gold, const Taxonomy& tax);

}  // namespace pde
