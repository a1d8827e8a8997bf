#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "injector/autodiff.hpp"
#include "injector/tensor.hpp"

namespace injector {

struct AttributeSpec {
    std::string name;
    int64_t vocab_size = 1;
    bool multi_label = false;
};

// Ordered attribute universe for a task; order fixes the injection sequence.
struct AttributeSchema {
    std::vector<AttributeSpec> attributes;
    int64_t d_z = 0;

    int64_t count() const { return static_cast<int64_t>(attributes.size()); }
    const AttributeSpec& at(int64_t j) const { return attributes[static_cast<size_t>(j)]; }
    int64_t index_of(const std::string& name) const;  // -1 when absent
    void validate() const;
};

// Per-instance attribute values: a possibly-empty label-id set per attribute.
// Missing/unknown attributes are represented by an empty set; there is no
// reserved UNK id.
struct AttributeAssignment {
    std::vector<std::vector<int64_t>> labels;  // sorted, unique, per attribute

    static AttributeAssignment empty_for(const AttributeSchema& schema);
    void set(int64_t attribute, std::vector<int64_t> ids);
    const std::vector<int64_t>& of(int64_t attribute) const {
        return labels[static_cast<size_t>(attribute)];
    }
    void validate(const AttributeSchema& schema) const;
};

// One learned embedding matrix per attribute (vocab_size x d_z each). Tables
// are separate across attributes even if label strings coincide.
struct AttributeEmbeddingTable {
    std::vector<Var> tables;

    const Var& table(int64_t attribute) const { return tables[static_cast<size_t>(attribute)]; }
};

// Embedding rows for each label of attribute j; empty assignment gives an
// empty list.
std::vector<Var> lookup(Tape& tape, const AttributeEmbeddingTable& table,
                        const AttributeAssignment& assignment, int64_t attribute);

// Independently per attribute, with probability r_drop replaces the label set
// with the empty set. Training-time only. When per_label is set, individual
// labels of multi-label attributes are dropped independently instead.
AttributeAssignment apply_attribute_dropout(const AttributeAssignment& assignment, double r_drop,
                                            std::mt19937_64& rng, bool per_label = false);

// Training-frequency table per attribute label plus the share of labels seen
// fewer than `sparse_threshold` times.
struct SparsityProfile {
    std::vector<std::vector<int64_t>> counts;     // [attribute][label id]
    std::vector<double> percent_sparse;           // per attribute, 0..100
    int64_t sparse_threshold = 10;
};

SparsityProfile sparsity_profile(const std::vector<AttributeAssignment>& training_assignments,
                                 const AttributeSchema& schema, int64_t sparse_threshold = 10);

}  // namespace injector
