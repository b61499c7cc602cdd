#include "pde/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "pde/common.hpp"

namespace pde {

using nlohmann::json;

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void check_pair(const std::vector<LabelSet>& pred, const std::vector<LabelSet>& gold) {
    if (pred.size() != gold.size()) {
        throw ValidationError("score: " + std::to_string(pred.size()) + " predictions vs " +
                              std::to_string(gold.size()) + " gold sets");
    }
    if (pred.empty()) throw ValidationError("score: empty evaluation set");
}

}  // namespace

double gmean(double strict, double macro_f1, double micro_f1) {
    for (double v : {strict, macro_f1, micro_f1}) {
        if (v < 0.0 || v > 1.0) {
            throw ValidationError("gmean: input " + std::to_string(v) + " outside [0,1]");
        }
    }
    return std::cbrt(strict * macro_f1 * micro_f1);
}

EvalReport score(const std::vector<LabelSet>& pred, const std::vector<LabelSet>& gold,
                 const Taxonomy& tax) {
    check_pair(pred, gold);
    const std::size_t n = pred.size();

    int exact = 0;
    double sum_p = 0.0, sum_r = 0.0;
    long tp_total = 0, pred_total = 0, gold_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred[i].size() != gold[i].size()) {
            throw ValidationError("score: mention " + std::to_string(i) +
                                  " label sets differ in length");
        }
        if (pred[i] == gold[i]) ++exact;
        long tp = 0;
        for (std::size_t k = 0; k < pred[i].size(); ++k) {
            if (pred[i].test(k) && gold[i].test(k)) ++tp;
        }
        long np = static_cast<long>(pred[i].count());
        long ng = static_cast<long>(gold[i].count());
        sum_p += np > 0 ? static_cast<double>(tp) / np : 0.0;
        sum_r += ng > 0 ? static_cast<double>(tp) / ng : 0.0;
        tp_total += tp;
        pred_total += np;
        gold_total += ng;
    }

    EvalReport rep;
    rep.strict = static_cast<double>(exact) / n;
    rep.macro_p = sum_p / n;
    rep.macro_r = sum_r / n;
    rep.macro_f1 = f1_of(rep.macro_p, rep.macro_r);
    rep.micro_p = pred_total > 0 ? static_cast<double>(tp_total) / pred_total : 0.0;
    rep.micro_r = gold_total > 0 ? static_cast<double>(tp_total) / gold_total : 0.0;
    rep.micro_f1 = f1_of(rep.micro_p, rep.micro_r);
    rep.gmean = gmean(rep.strict, rep.macro_f1, rep.micro_f1);
    rep.per_label = per_label_f1(pred, gold, tax);
    return rep;
}

std::vector<std::pair<std::string, PerLabelScore>> per_label_f1(
    const std::vector<LabelSet>& pred, const std::vector<LabelSet>& gold, const Taxonomy& tax) {
    check_pair(pred, gold);
    const int k = tax.size();
    std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
    std::vector<int> support(k, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (int j = 0; j < k; ++j) {
            bool p = pred[i].test(j), g = gold[i].test(j);
            if (p && g) ++tp[j];
            if (p && !g) ++fp[j];
            if (!p && g) ++fn[j];
            if (g) ++support[j];
        }
    }
    std::vector<std::pair<std::string, PerLabelScore>> out;
    out.reserve(k);
    for (int j = 0; j < k; ++j) {
        PerLabelScore s;
        s.support = support[j];
        s.p = tp[j] + fp[j] > 0 ? static_cast<double>(tp[j]) / (tp[j] + fp[j]) : 0.0;
        s.r = tp[j] + fn[j] > 0 ? static_cast<double>(tp[j]) / (tp[j] + fn[j]) : 0.0;
        s.f1 = f1_of(s.p, s.r);
        out.emplace_back(tax.label(j), s);
    }
    return out;
}

json EvalReport::to_json() const {
    json labels = json::object();
    for (const auto& [name, s] : per_label) {
        labels[name] = {{"p", s.p}, {"r", s.r}, {"f1", s.f1}, {"support", s.support}};
    }
    return json{{"strict", strict},     {"macro_p", macro_p}, {"macro_r", macro_r},
                {"macro_f1", macro_f1}, {"micro_p", micro_p}, {"micro_r", micro_r},
                {"micro_f1", micro_f1}, {"gmean", gmean},     {"per_label", labels}};
}

std::string EvalReport::table_header() {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %9s %9s %9s %9s", "Setting", "Accuracy", "Macro F1",
                  "Micro F1", "GMean");
    return buf;
}

std::string EvalReport::table_row(const std::string& name) const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %9.3f %9.3f %9.3f %9.3f", name.c_str(), strict,
                  macro_f1, micro_f1, gmean);
    return buf;
}

}  // namespace pde
