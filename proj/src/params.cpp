#include "injector/params.hpp"

#include <cmath>

#include "injector/errors.hpp"

namespace injector {

std::string param_category_name(ParamCategory c) {
    switch (c) {
        case ParamCategory::Backbone: return "backbone";
        case ParamCategory::LayerNorm: return "layer_norm";
        case ParamCategory::TokenEmbedding: return "token_embedding";
        case ParamCategory::PosEmbedding: return "pos_embedding";
        case ParamCategory::AttrEmbedding: return "attr_embedding";
        case ParamCategory::InjectorTask: return "injector_task";
        case ParamCategory::InjectorAttr: return "injector_attr";
        case ParamCategory::Classifier: return "classifier";
    }
    return "unknown";
}

int64_t plan_total_elements(const std::vector<ParamPlanEntry>& plan) {
    int64_t total = 0;
    for (const auto& e : plan) total += shape_numel(e.shape);
    return total;
}

uint64_t name_hash(const std::string& name) {
    uint64_t h = 1469598103934665603ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

void init_tensor(Tensor& t, InitKind kind, int64_t fan_in, std::mt19937_64& rng) {
    switch (kind) {
        case InitKind::Zero:
            t.zero();
            break;
        case InitKind::Ones:
            t.fill(1.0);
            break;
        case InitKind::ScaledUniform: {
            const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
            break;
        }
        case InitKind::Normal002: {
            std::normal_distribution<double> dist(0.0, 0.02);
            for (int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
            break;
        }
    }
}

Var ParamRegistry::create(const ParamPlanEntry& entry, std::mt19937_64& rng) {
    if (index_.count(entry.name) > 0) throw ConfigError("duplicate parameter '" + entry.name + "'");
    Tensor value(entry.shape);
    const int64_t fan_in = entry.fan_in > 0 ? entry.fan_in : entry.shape[0];
    init_tensor(value, entry.init, fan_in, rng);
    Var v = make_variable(std::move(value), true, entry.name);
    index_[entry.name] = ordered_.size();
    categories_[entry.name] = entry.category;
    ordered_.push_back(v);
    return v;
}

const Var& ParamRegistry::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return ordered_[it->second];
}

ParamCategory ParamRegistry::category_of(const std::string& name) const {
    auto it = categories_.find(name);
    if (it == categories_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<Var> ParamRegistry::trainable() const {
    std::vector<Var> out;
    for (const Var& v : ordered_) {
        if (v->requires_grad) out.push_back(v);
    }
    return out;
}

int64_t ParamRegistry::total_elements() const {
    int64_t total = 0;
    for (const Var& v : ordered_) total += v->value.numel();
    return total;
}

}  // namespace injector
