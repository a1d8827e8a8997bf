#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "injector/autodiff.hpp"
#include "injector/encoder.hpp"

namespace injector {

enum class FreezePolicy { None, BackboneFrozen, BackboneAndAttrFrozen };
FreezePolicy freeze_policy_from_string(const std::string& s);
std::string freeze_policy_to_string(FreezePolicy p);

enum class LrDecay { Linear, Constant };

struct TrainPlan {
    double learning_rate = 3e-4;
    int64_t total_steps = 2000;
    int64_t warmup_steps = 200;
    int64_t batch_size = 16;
    double weight_decay = 0.01;
    uint64_t seed = 1234;
    FreezePolicy freeze_policy = FreezePolicy::None;
    double r_drop = 0.2;
    int64_t eval_every = 200;
    LrDecay decay = LrDecay::Linear;
    double grad_clip = 0.0;  // 0 disables clipping
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Piecewise-linear schedule: 0 at step 0, peak at warmup_steps, then linear
// decay to 0 at total_steps (or constant after warmup).
double lr_at_step(const TrainPlan& plan, int64_t step);

struct AdamWState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    int64_t step_count = 0;

    static AdamWState init_for(const std::vector<Var>& params);
};

// One decoupled-weight-decay Adam step over `params` using their accumulated
// gradients; learning rate comes from the schedule at `step_index`.
// Throws NumericError on non-finite gradients.
void adamw_step(std::vector<Var>& params, AdamWState& state, const TrainPlan& plan,
                int64_t step_index);

// Whether a parameter category trains under the policy. train_layer_norm
// keeps sublayer norms trainable under BackboneFrozen.
bool category_trainable(ParamCategory category, FreezePolicy policy, bool train_layer_norm);

// Marks parameters trainable/frozen per policy via their category and returns
// the trainable set.
std::vector<Var> apply_freeze_policy(Model& model, FreezePolicy policy, bool train_layer_norm);

}  // namespace injector
