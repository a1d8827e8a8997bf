#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "injector/data.hpp"
#include "injector/encoder.hpp"
#include "injector/optim.hpp"

namespace injector {

struct MetricPoint {
    int64_t step = 0;
    std::string split;
    double loss = 0.0;
    double score = 0.0;
};

struct TrainResult {
    std::vector<MetricPoint> log;
    int64_t best_step = 0;
    double best_dev_score = 0.0;
    std::map<std::string, Tensor> best_params;
};

struct EvalResult {
    double score = 0.0;
    double mean_loss = 0.0;
    std::vector<std::vector<int64_t>> predictions;  // [instance][task]
};

// Task metric per reporting conventions: F1 for weighted single-task setups,
// mean accuracy for multi-task, accuracy otherwise.
MetricKind default_metric(const ClassifierConfig& cfg);

EvalResult evaluate(Model& model, const Dataset& dataset, MetricKind metric);
EvalResult evaluate_subset(Model& model, const Dataset& dataset, const std::vector<size_t>& indices,
                           MetricKind metric);

// Deterministic training loop: shuffled epochs, attribute dropout at batching
// time, one tape per step, AdamW with the warmup/decay schedule. Restores the
// best-dev parameters before returning.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainPlan& plan);

// Dataset copy with every attribute masked out (cold-start evaluation).
Dataset mask_all_attributes(const Dataset& dataset);
// Dataset copy with labels reduced to the given tasks (in order).
Dataset select_tasks(const Dataset& dataset, const std::vector<int64_t>& tasks);

std::vector<std::pair<std::string, const Tensor*>> model_tensors(const Model& model);
void save_model(const std::string& path, const Model& model);
void load_model(Model& model, const std::map<std::string, Tensor>& tensors);

// Throws AllocationBudgetError when the parameter plan would exceed the budget.
void check_allocation_budget(const ModelConfig& cfg, int64_t max_param_bytes);

struct TransferOutcome {
    double direct = 0.0;
    double transferred = 0.0;
    bool frozen_attr_bit_identical = false;
};

// Trains a multi-task model on the source tasks' share of the training data,
// moves its attribute adapters and attribute embeddings into a fresh
// target-task model where they stay frozen, and compares against direct
// training on the target share.
TransferOutcome transfer_experiment(const ModelConfig& base_cfg, const Dataset& train_set,
                                    const Dataset& dev_set, const Dataset& test_set,
                                    const std::vector<int64_t>& source_tasks, int64_t target_task,
                                    const TrainPlan& plan);

struct AblationRow {
    std::string name;
    double score = 0.0;
    bool oom = false;
};

// Trains and evaluates the standard toggle set with identical seed and data:
// full, -bias injection, -weight injection, -task adapter, -attribute drop,
// -post-aggregation, -low-rank, -PHM.
std::vector<AblationRow> run_ablation(const ModelConfig& base_cfg, const TrainPlan& plan,
                                      const Dataset& train_set, const Dataset& dev_set,
                                      const Dataset& test_set, int64_t max_param_bytes);

}  // namespace injector
