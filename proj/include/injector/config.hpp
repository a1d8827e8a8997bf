#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "injector/data.hpp"
#include "injector/encoder.hpp"
#include "injector/optim.hpp"

namespace injector {

struct AttributeDecl {
    std::string name;
    bool multi_label = false;
};

struct DataConfig {
    std::string dir;
    std::string train_file = "train.jsonl";
    std::string dev_file = "dev.jsonl";
    std::string test_file = "test.jsonl";
    int64_t text_min_count = 1;
    int64_t n_tasks = 0;  // 0 = infer from vocab files, else 1
    int64_t kfold = 0;    // >0 replaces the dev split with k-fold on train
};

// One config file drives model, schedule, and data source. Vocabulary sizes
// and class counts are resolved from the dataset at load time; CLI flags
// (--seed, --out) override config fields.
struct ExperimentConfig {
    ModelKind kind = ModelKind::Injector;
    EncoderConfig encoder;    // vocab_size/classifier resolved at load
    InjectorConfig injector;  // d_h copied from encoder at load
    std::vector<AttributeDecl> attributes;
    std::vector<std::vector<double>> class_weights;  // optional, per task
    TrainPlan plan;
    DataConfig data;
    int64_t max_param_bytes = int64_t{2} * 1024 * 1024 * 1024;
    std::vector<int64_t> transfer_source_tasks;  // transfer subcommand
    int64_t transfer_target_task = 0;
};

ExperimentConfig experiment_config_from_json_file(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// Config plus the ingested corpus and splits.
struct Experiment {
    ExperimentConfig config;
    Corpus corpus;
    Dataset train, dev, test;

    ModelConfig model_config(ModelKind kind) const;
    ModelConfig model_config() const { return model_config(config.kind); }
};

Experiment load_experiment(const ExperimentConfig& cfg);

}  // namespace injector
