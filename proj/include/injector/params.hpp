#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "injector/autodiff.hpp"
#include "injector/tensor.hpp"

namespace injector {

enum class ParamCategory {
    Backbone,        // attention/FFN weights of the encoder
    LayerNorm,       // sublayer norms (separately freezable)
    TokenEmbedding,
    PosEmbedding,
    AttrEmbedding,
    InjectorTask,
    InjectorAttr,
    Classifier,
};

std::string param_category_name(ParamCategory c);

enum class InitKind { Zero, Ones, ScaledUniform, Normal002 };

struct ParamPlanEntry {
    std::string name;
    Shape shape;
    ParamCategory category = ParamCategory::Backbone;
    InitKind init = InitKind::Zero;
    // fan-in for ScaledUniform; defaults to shape[0]
    int64_t fan_in = 0;
};

int64_t plan_total_elements(const std::vector<ParamPlanEntry>& plan);

// FNV-1a, used to give every parameter its own deterministic init stream so
// that models sharing a parameter name also share its initial values.
uint64_t name_hash(const std::string& name);

// Ordered, name-addressable set of learned tensors. Materializes a parameter
// plan deterministically from a seed; iteration order is plan order.
class ParamRegistry {
public:
    Var create(const ParamPlanEntry& entry, std::mt19937_64& rng);
    const Var& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    const std::vector<Var>& all() const { return ordered_; }
    ParamCategory category_of(const std::string& name) const;
    std::vector<Var> trainable() const;
    int64_t total_elements() const;

private:
    std::vector<Var> ordered_;
    std::unordered_map<std::string, size_t> index_;
    std::unordered_map<std::string, ParamCategory> categories_;
};

void init_tensor(Tensor& t, InitKind kind, int64_t fan_in, std::mt19937_64& rng);

}  // namespace injector
