#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "injector/data.hpp"

namespace injector {

struct GenAttributeSpec {
    std::string name;
    int64_t vocab_size = 10;
    double zipf_exponent = 1.0;
    bool multi_label = false;
    int64_t min_labels = 1;
    int64_t max_labels = 1;
};

// Generative model: every text token and attribute label carries a known
// class-preference; instance labels are drawn from the softmax of the mixed
// signals with uniform label noise. The exact conditional distribution per
// instance is therefore available, which yields the Bayes-optimal accuracy.
struct GeneratorSpec {
    int64_t n_classes = 2;
    int64_t n_tasks = 1;
    std::vector<GenAttributeSpec> attributes;
    int64_t text_vocab_size = 1000;   // word types, indicative tokens first
    int64_t tokens_per_class = 20;
    double indicative_prob = 0.5;     // chance a token comes from the topic pool
    int64_t len_min = 6;
    int64_t len_max = 20;
    double mix_text = 0.5;            // mixing weights, must sum to 1
    double mix_attr = 0.5;
    double text_gain = 4.0;           // logit magnitude of a fully indicative text
    double attr_gain = 4.0;
    double label_noise = 0.05;
    int64_t n_train = 1000;
    int64_t n_dev = 200;
    int64_t n_test = 200;
    uint64_t seed = 1;

    void validate() const;
};

GeneratorSpec generator_spec_from_json_file(const std::string& path);

struct SyntheticStats {
    double bayes_accuracy = 0.0;        // mean over test of max_c p(c|x,z)
    double majority_class_rate = 0.0;   // max_c mean over test of p(c|x,z)
    std::vector<double> percent_sparse; // per attribute, over the train split
    std::vector<int64_t> train_label_histogram;  // task 0
};

struct SyntheticData {
    Corpus corpus;
    Dataset train, dev, test;
    SyntheticStats stats;
    // exact class posterior for every test instance (task-symmetric)
    std::vector<std::vector<double>> test_posteriors;
};

SyntheticData generate_synthetic(const GeneratorSpec& spec);

// Writes train/dev/test JSONL, vocabulary files, and a stats JSON to out_dir.
void write_synthetic(const SyntheticData& data, const GeneratorSpec& spec,
                     const std::string& out_dir);

}  // namespace injector
