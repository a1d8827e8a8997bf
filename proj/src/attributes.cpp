#include "injector/attributes.hpp"

#include <algorithm>
#include <set>

#include "injector/errors.hpp"

namespace injector {

int64_t AttributeSchema::index_of(const std::string& name) const {
    for (size_t j = 0; j < attributes.size(); ++j) {
        if (attributes[j].name == name) return static_cast<int64_t>(j);
    }
    return -1;
}

void AttributeSchema::validate() const {
    if (d_z <= 0) throw ConfigError("attribute schema requires d_z > 0");
    std::set<std::string> seen;
    for (const AttributeSpec& a : attributes) {
        if (a.name.empty()) throw ConfigError("attribute with empty name");
        if (!seen.insert(a.name).second) throw ConfigError("duplicate attribute name '" + a.name + "'");
        if (a.vocab_size < 1) {
            throw ConfigError("attribute '" + a.name + "' needs vocab_size >= 1, got " +
                              std::to_string(a.vocab_size));
        }
    }
}

AttributeAssignment AttributeAssignment::empty_for(const AttributeSchema& schema) {
    AttributeAssignment a;
    a.labels.resize(static_cast<size_t>(schema.count()));
    return a;
}

void AttributeAssignment::set(int64_t attribute, std::vector<int64_t> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    labels[static_cast<size_t>(attribute)] = std::move(ids);
}

void AttributeAssignment::validate(const AttributeSchema& schema) const {
    if (static_cast<int64_t>(labels.size()) != schema.count()) {
        throw VocabularyError("assignment has " + std::to_string(labels.size()) +
                              " attributes, schema has " + std::to_string(schema.count()));
    }
    for (int64_t j = 0; j < schema.count(); ++j) {
        const AttributeSpec& spec = schema.at(j);
        const auto& ids = of(j);
        if (!spec.multi_label && ids.size() > 1) {
            throw VocabularyError("attribute '" + spec.name + "' is single-label but carries " +
                                  std::to_string(ids.size()) + " ids");
        }
        for (int64_t id : ids) {
            if (id < 0 || id >= spec.vocab_size) {
                throw VocabularyError("attribute '" + spec.name + "': id " + std::to_string(id) +
                                      " out of range [0," + std::to_string(spec.vocab_size) + ")");
            }
        }
    }
}

std::vector<Var> lookup(Tape& tape, const AttributeEmbeddingTable& table,
                        const AttributeAssignment& assignment, int64_t attribute) {
    const auto& ids = assignment.of(attribute);
    std::vector<Var> rows;
    rows.reserve(ids.size());
    for (int64_t id : ids) {
        rows.push_back(gather_rows(tape, table.table(attribute), {id}));
    }
    return rows;
}

AttributeAssignment apply_attribute_dropout(const AttributeAssignment& assignment, double r_drop,
                                            std::mt19937_64& rng, bool per_label) {
    if (r_drop < 0.0 || r_drop > 1.0) throw ConfigError("attribute dropout rate must be in [0,1]");
    AttributeAssignment out = assignment;
    if (r_drop == 0.0) return out;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& ids : out.labels) {
        if (per_label) {
            std::vector<int64_t> kept;
            for (int64_t id : ids) {
                if (unit(rng) >= r_drop) kept.push_back(id);
            }
            ids = std::move(kept);
        } else {
            if (unit(rng) < r_drop) ids.clear();
        }
    }
    return out;
}

SparsityProfile sparsity_profile(const std::vector<AttributeAssignment>& training_assignments,
                                 const AttributeSchema& schema, int64_t sparse_threshold) {
    SparsityProfile profile;
    profile.sparse_threshold = sparse_threshold;
    profile.counts.resize(static_cast<size_t>(schema.count()));
    for (int64_t j = 0; j < schema.count(); ++j) {
        profile.counts[static_cast<size_t>(j)].assign(static_cast<size_t>(schema.at(j).vocab_size),
                                                      0);
    }
    for (const AttributeAssignment& a : training_assignments) {
        a.validate(schema);
        for (int64_t j = 0; j < schema.count(); ++j) {
            for (int64_t id : a.of(j)) ++profile.counts[static_cast<size_t>(j)][static_cast<size_t>(id)];
        }
    }
    profile.percent_sparse.resize(static_cast<size_t>(schema.count()));
    for (int64_t j = 0; j < schema.count(); ++j) {
        const auto& counts = profile.counts[static_cast<size_t>(j)];
        int64_t sparse = 0;
        for (int64_t c : counts) {
            if (c < sparse_threshold) ++sparse;
        }
        profile.percent_sparse[static_cast<size_t>(j)] =
            counts.empty() ? 0.0 : 100.0 * static_cast<double>(sparse) / static_cast<double>(counts.size());
    }
    return profile;
}

}  // namespace injector
