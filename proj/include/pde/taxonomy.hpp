#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace pde {

// Fixed-length bit vector over the taxonomy's K labels.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::size_t k) : bits_(k, 0) {}

    std::size_t size() const { return bits_.size(); }
    bool test(std::size_t i) const { return bits_.at(i) != 0; }
    void set(std::size_t i, bool v = true) { bits_.at(i) = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool is_subset_of(const LabelSet& other) const;
    std::vector<int> indices() const;

    bool operator==(const LabelSet&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// Immutable label hierarchy. Labels are slash paths ("/person/artist");
// the parent of a label is the path with its last segment removed.
// Label -> index is a bijection onto 0..K-1, parents always precede
// children in index order.
class Taxonomy {
public:
    // Validates paths, inserts missing ancestors, rejects duplicates.
    static Taxonomy from_labels(const std::vector<std::string>& labels);

    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(int idx) const { return labels_.at(idx); }
    // -1 when absent.
    int index_of(const std::string& label) const;
    bool contains(const std::string& label) const { return index_of(label) >= 0; }
    // -1 for top-level labels.
    int parent_of(int idx) const { return parent_.at(idx); }
    // Ancestors that were not in the input and had to be added.
    const std::vector<std::string>& inserted_ancestors() const { return inserted_; }

    LabelSet close_ancestors(const LabelSet& raw) const;
    LabelSet encode(const std::vector<std::string>& labels) const;
    std::vector<std::string> decode(const LabelSet& ls) const;

    // Content hash over the ordered label list; used to pair checkpoints
    // with the taxonomy they were trained against.
    std::uint64_t hash() const;

private:
    std::vector<std::string> labels_;
    std::vector<int> parent_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> inserted_;
};

// Well-formedness of a slash path: ("/" segment)+, segment = [a-z0-9_]+.
bool valid_label_path(const std::string& label);

// Loads a JSON array of slash-path strings.
Taxonomy load_taxonomy(const std::string& path);

}  // namespace pde
