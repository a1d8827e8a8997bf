#include "injector/optim.hpp"

#include <cmath>

#include "injector/errors.hpp"
#include "injector/kernels.hpp"

namespace injector {

FreezePolicy freeze_policy_from_string(const std::string& s) {
    if (s == "none") return FreezePolicy::None;
    if (s == "backbone_frozen") return FreezePolicy::BackboneFrozen;
    if (s == "backbone+attr_adapters_frozen") return FreezePolicy::BackboneAndAttrFrozen;
    throw ConfigError("unknown freeze policy '" + s + "'");
}

std::string freeze_policy_to_string(FreezePolicy p) {
    switch (p) {
        case FreezePolicy::None: return "none";
        case FreezePolicy::BackboneFrozen: return "backbone_frozen";
        case FreezePolicy::BackboneAndAttrFrozen: return "backbone+attr_adapters_frozen";
    }
    return "none";
}

void TrainPlan::validate() const {
    if (total_steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be nonnegative");
    if (warmup_steps > total_steps) throw ConfigError("warmup_steps must be <= total_steps");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (r_drop < 0.0 || r_drop > 1.0) throw ConfigError("r_drop must be in [0,1]");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

double lr_at_step(const TrainPlan& plan, int64_t step) {
    if (step <= 0) return 0.0;
    if (step <= plan.warmup_steps && plan.warmup_steps > 0) {
        return plan.learning_rate * static_cast<double>(step) /
               static_cast<double>(plan.warmup_steps);
    }
    if (plan.decay == LrDecay::Constant) return plan.learning_rate;
    if (plan.total_steps <= plan.warmup_steps) return plan.learning_rate;
    const double remain = static_cast<double>(plan.total_steps - step) /
                          static_cast<double>(plan.total_steps - plan.warmup_steps);
    return plan.learning_rate * std::max(0.0, remain);
}

AdamWState AdamWState::init_for(const std::vector<Var>& params) {
    AdamWState state;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Var& p : params) {
        state.first_moment.push_back(Tensor::zeros(p->value.shape()));
        state.second_moment.push_back(Tensor::zeros(p->value.shape()));
    }
    return state;
}

void adamw_step(std::vector<Var>& params, AdamWState& state, const TrainPlan& plan,
                int64_t step_index) {
    if (state.first_moment.size() != params.size()) {
        throw ContractError("optimizer state does not match parameter set");
    }
    const double lr = lr_at_step(plan, step_index);
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(plan.adam_beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(plan.adam_beta2, static_cast<double>(state.step_count));

    double clip_scale = 1.0;
    if (plan.grad_clip > 0.0) {
        double sq = 0.0;
        for (const Var& p : params) {
            if (!p->has_grad()) continue;
            sq += kernels::active().dot(p->grad.data(), p->grad.data(),
                                        static_cast<int>(p->grad.numel()));
        }
        const double norm = std::sqrt(sq);
        if (norm > plan.grad_clip) clip_scale = plan.grad_clip / norm;
    }

    for (size_t i = 0; i < params.size(); ++i) {
        Var& p = params[i];
        if (!p->has_grad()) p->ensure_grad();
        if (!p->grad.all_finite()) {
            throw NumericError("non-finite gradient in parameter '" + p->name + "' at step " +
                               std::to_string(step_index));
        }
        if (clip_scale != 1.0) {
            kernels::active().scale(p->grad.data(), p->grad.data(), clip_scale,
                                    static_cast<int>(p->grad.numel()));
        }
        kernels::active().adamw(p->value.data(), state.first_moment[i].data(),
                                state.second_moment[i].data(), p->grad.data(),
                                static_cast<int>(p->value.numel()), lr, plan.adam_beta1,
                                plan.adam_beta2, plan.adam_eps, plan.weight_decay, bc1, bc2);
    }
}

bool category_trainable(ParamCategory category, FreezePolicy policy, bool train_layer_norm) {
    switch (policy) {
        case FreezePolicy::None:
            return true;
        case FreezePolicy::BackboneFrozen:
            switch (category) {
                case ParamCategory::InjectorTask:
                case ParamCategory::InjectorAttr:
                case ParamCategory::AttrEmbedding:
                case ParamCategory::Classifier:
                    return true;
                case ParamCategory::LayerNorm:
                    return train_layer_norm;
                default:
                    return false;
            }
        case FreezePolicy::BackboneAndAttrFrozen:
            return category == ParamCategory::InjectorTask || category == ParamCategory::Classifier;
    }
    return true;
}

std::vector<Var> apply_freeze_policy(Model& model, FreezePolicy policy, bool train_layer_norm) {
    std::vector<Var> trainable;
    for (const Var& p : model.params().all()) {
        const bool train =
            category_trainable(model.params().category_of(p->name), policy, train_layer_norm);
        p->requires_grad = train;
        if (train) trainable.push_back(p);
    }
    return trainable;
}

}  // namespace injector
