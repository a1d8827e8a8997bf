#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "injector/attributes.hpp"
#include "injector/autodiff.hpp"
#include "injector/params.hpp"

namespace injector {

enum class Aggregation { Post, Pre };
enum class InjectionMode { BiasAndWeight, BiasOnly, WeightOnly };
enum class SynthesisMode { Phm, LowRankOnly, Naive };

Aggregation aggregation_from_string(const std::string& s);
InjectionMode injection_from_string(const std::string& s);
SynthesisMode synthesis_from_string(const std::string& s);

struct InjectorConfig {
    int64_t d_h = 0;
    int64_t d_a = 0;
    int64_t d_z = 0;
    int64_t hyper_dims = 4;  // O
    double r_drop = 0.2;
    Aggregation aggregation = Aggregation::Post;
    InjectionMode injection = InjectionMode::BiasAndWeight;
    SynthesisMode synthesis = SynthesisMode::Phm;
    bool task_adapter = true;
    bool per_label_dropout = false;
    Activation activation = Activation::Gelu;

    int64_t kron_cols() const { return d_h / (hyper_dims * hyper_dims); }  // |s_o|
    void validate() const;
};

// Bottleneck feed-forward pair with residual output.
struct TaskAdapter {
    Var down_w;  // [d_h x d_a]
    Var down_b;  // [d_a]
    Var up_w;    // [d_a x d_h]
    Var up_b;    // [d_h]
};

// Learned pieces that synthesize the per-instance down-projection of one
// attribute adapter. Field population depends on the synthesis mode:
//  Phm:         sigma/s/A hold O entries each
//  LowRankOnly: sigma holds 1 projection, s holds 1 vector of length d_h
//  Naive:       naive_w holds the full [d_z x d_h*d_a] projection
struct PhmSynthesizer {
    std::vector<Var> sigma;  // [d_z x d_a] each
    std::vector<Var> s;      // [d_h/O^2] each (or [d_h] in LowRankOnly)
    std::vector<Var> A;      // [O x O] each
    Var naive_w;
    Var C_weight;  // [d_h x d_a]
    Var g_bias;    // [d_z x d_a]
    Var c_bias;    // [d_a]
};

struct AttrAdapter {
    PhmSynthesizer synthesizer;
    Var up_w;  // [d_a x d_h]
    Var up_b;  // [d_h]
};

// One task adapter followed by M attribute adapters in schema order.
struct InjectorBlock {
    std::optional<TaskAdapter> task;
    std::vector<AttrAdapter> attrs;
};

// --- parameter plans ------------------------------------------------------

std::vector<ParamPlanEntry> task_adapter_plan(const std::string& prefix, const InjectorConfig& cfg);
std::vector<ParamPlanEntry> attr_adapter_plan(const std::string& prefix, const InjectorConfig& cfg);
std::vector<ParamPlanEntry> injector_block_plan(const std::string& prefix, const InjectorConfig& cfg,
                                                int64_t n_attributes);

TaskAdapter bind_task_adapter(const ParamRegistry& params, const std::string& prefix);
AttrAdapter bind_attr_adapter(const ParamRegistry& params, const std::string& prefix,
                              const InjectorConfig& cfg);
InjectorBlock bind_injector_block(const ParamRegistry& params, const std::string& prefix,
                                  const InjectorConfig& cfg, int64_t n_attributes);

// --- forward operations ----------------------------------------------------
// Hidden states are [tokens x d_h]; attribute embeddings are [1 x d_z] rows.

Var adapt(Tape& tape, const Var& h, const TaskAdapter& adapter, Activation act);

// [sigma_1(z), ..., sigma_O(z)], each [1 x d_a]
std::vector<Var> hypercomplex_project(Tape& tape, const Var& z, const std::vector<Var>& sigma);

// zhat [1 x d_a] x s_o [len] -> [d_a x len]
Var low_rank_outer(Tape& tape, const Var& zhat, const Var& s);

// reshape(tanh(S_o (x) A_o)) -> [d_h x d_a]
Var kron_expand(Tape& tape, const Var& S, const Var& A, int64_t d_h, int64_t d_a);

// sum over hypercomplex dimensions of kron_expand(low_rank_outer(sigma_o z, s_o), A_o)
Var g_weight_sum(Tape& tape, const Var& z, const PhmSynthesizer& syn, const InjectorConfig& cfg);

// g_weight under the configured synthesis mode
Var g_weight(Tape& tape, const Var& z, const PhmSynthesizer& syn, const InjectorConfig& cfg);

// Label-set bias: post -> sum_k g_bias(z_k) + c_bias; pre -> g_bias(sum_k z_k) + c_bias;
// empty -> c_bias. Returns [d_a].
Var synthesize_bias(Tape& tape, const std::vector<Var>& z_embs, const PhmSynthesizer& syn,
                    Aggregation mode);

// Label-set weight: post -> sum_k g_weight(z_k) + C_weight; pre -> g_weight(sum) + C_weight;
// empty -> C_weight. Returns [d_h x d_a].
Var synthesize_weight(Tape& tape, const std::vector<Var>& z_embs, const PhmSynthesizer& syn,
                      const InjectorConfig& cfg);

Var attr_adapt(Tape& tape, const Var& h, const std::vector<Var>& z_embs, const AttrAdapter& adapter,
               const InjectorConfig& cfg);

Var inject(Tape& tape, const Var& h, const AttributeAssignment& assignment,
           const InjectorBlock& block, const AttributeEmbeddingTable& tables,
           const InjectorConfig& cfg, const AttributeSchema& schema);

// --- parameter accounting ---------------------------------------------------

struct ParamCountReport {
    int64_t naive_weight_synthesis = 0;  // d_z * d_h * d_a
    int64_t phm_weight_synthesis = 0;    // O * (d_z*d_a + d_h/O^2 + O^2)
    double naive_to_phm_ratio = 0.0;
    // full per-component element counts for one injector block position
    std::map<std::string, int64_t> components;
    int64_t task_adapter_total = 0;
    int64_t attr_adapter_total = 0;  // one attribute, synthesis + bias path + up projection
    std::string table() const;
};

ParamCountReport count_parameters(const InjectorConfig& cfg, bool naive = false);

}  // namespace injector
