#include "pde/taxonomy.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "pde/common.hpp"

namespace pde {

std::size_t LabelSet::count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

bool LabelSet::is_subset_of(const LabelSet& other) const {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && !other.bits_[i]) return false;
    }
    return true;
}

std::vector<int> LabelSet::indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out.push_back(static_cast<int>(i));
    }
    return out;
}

bool valid_label_path(const std::string& label) {
    if (label.empty() || label.front() != '/' || label.back() == '/') return false;
    std::size_t i = 0;
    while (i < label.size()) {
        if (label[i] != '/') return false;
        std::size_t j = i + 1;
        while (j < label.size() && label[j] != '/') {
            char c = label[j];
            bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
            if (!ok) return false;
            ++j;
        }
        if (j == i + 1) return false;  // empty segment
        i = j;
    }
    return true;
}

static std::string parent_path(const std::string& label) {
    auto pos = label.find_last_of('/');
    if (pos == 0) return "";  // top-level
    return label.substr(0, pos);
}

Taxonomy Taxonomy::from_labels(const std::vector<std::string>& labels) {
    Taxonomy tax;
    std::unordered_map<std::string, int> seen_input;
    for (const auto& raw : labels) {
        if (!valid_label_path(raw)) {
            throw ValidationError("malformed label path: \"" + raw + "\"");
        }
        if (seen_input.count(raw)) {
            throw ValidationError("duplicate label: \"" + raw + "\"");
        }
        seen_input[raw] = 1;
    }

    auto insert = [&tax](const std::string& label) {
        int idx = static_cast<int>(tax.labels_.size());
        tax.labels_.push_back(label);
        tax.index_[label] = idx;
        std::string par = parent_path(label);
        tax.parent_.push_back(par.empty() ? -1 : tax.index_.at(par));
    };

    for (const auto& label : labels) {
        if (tax.index_.count(label)) continue;  // already auto-inserted as an ancestor
        // Insert missing ancestors root-first so parents get lower indices.
        std::vector<std::string> chain;
        for (std::string p = parent_path(label); !p.empty(); p = parent_path(p)) {
            if (tax.index_.count(p)) break;
            chain.push_back(p);
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            insert(*it);
            if (!seen_input.count(*it)) tax.inserted_.push_back(*it);
        }
        insert(label);
    }
    return tax;
}

int Taxonomy::index_of(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? -1 : it->second;
}

LabelSet Taxonomy::close_ancestors(const LabelSet& raw) const {
    if (static_cast<int>(raw.size()) != size()) {
        throw ValidationError("label set length " + std::to_string(raw.size()) +
                              " does not match taxonomy size " + std::to_string(size()));
    }
    LabelSet out = raw;
    // Parents precede children, so a reverse sweep closes transitively.
    for (int i = size() - 1; i >= 0; --i) {
        if (out.test(i) && parent_[i] >= 0) out.set(parent_[i]);
    }
    return out;
}

LabelSet Taxonomy::encode(const std::vector<std::string>& labels) const {
    LabelSet ls(size());
    for (const auto& label : labels) {
        int idx = index_of(label);
        if (idx < 0) throw ValidationError("unknown label: \"" + label + "\"");
        ls.set(idx);
    }
    return close_ancestors(ls);
}

std::vector<std::string> Taxonomy::decode(const LabelSet& ls) const {
    if (static_cast<int>(ls.size()) != size()) {
        throw ValidationError("label set length " + std::to_string(ls.size()) +
                              " does not match taxonomy size " + std::to_string(size()));
    }
    std::vector<std::string> out;
    for (int i = 0; i < size(); ++i) {
        if (ls.test(i)) out.push_back(labels_[i]);
    }
    return out;
}

std::uint64_t Taxonomy::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& label : labels_) {
        h = fnv1a64(label, h);
        h = fnv1a64("\n", h);
    }
    return h;
}

Taxonomy load_taxonomy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open taxonomy file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("taxonomy file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) {
        throw ValidationError("taxonomy file " + path + " must be a JSON array of strings");
    }
    std::vector<std::string> labels;
    for (const auto& el : doc) {
        if (!el.is_string()) {
            throw ValidationError("taxonomy file " + path + ": non-string entry " + el.dump());
        }
        labels.push_back(el.get<std::string>());
    }
    return Taxonomy::from_labels(labels);
}

}  // namespace pde
