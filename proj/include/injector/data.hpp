#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "injector/attributes.hpp"

namespace injector {

// One training/eval example: token ids (text vocabulary), attribute label
// sets, and one class id per task.
struct Instance {
    std::vector<int64_t> tokens;
    AttributeAssignment attributes;
    std::vector<int64_t> labels;
};

struct Dataset {
    std::vector<Instance> instances;
    size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
};

struct Vocab {
    std::vector<std::string> items;
    std::unordered_map<std::string, int64_t> ids;

    int64_t add(const std::string& s);
    int64_t find(const std::string& s) const;  // -1 when absent
    int64_t size() const { return static_cast<int64_t>(items.size()); }
    const std::string& name_of(int64_t id) const { return items[static_cast<size_t>(id)]; }
};

// Shared vocabularies and attribute layout for a task. Token ids offset text
// word ids by kFirstWordId (0 and 1 are reserved).
struct Corpus {
    std::vector<std::string> attribute_names;
    std::vector<bool> attribute_multi_label;
    Vocab text;
    std::vector<Vocab> attr_vocabs;   // per attribute
    std::vector<Vocab> label_vocabs;  // per task
    int64_t n_tasks = 1;
    int64_t text_min_count = 1;

    int64_t attribute_count() const { return static_cast<int64_t>(attribute_names.size()); }
    int64_t text_vocab_size() const { return 2 + text.size(); }
    AttributeSchema schema(int64_t d_z) const;
};

std::vector<std::string> tokenize(const std::string& text);

// Record format per line:
//   {"text": str, "attributes": {name: str | [str]}, "label": str | [str]}
// In train mode unseen attribute labels and class labels extend the
// vocabularies (the text vocabulary is built from the train file with the
// corpus min-count cutoff); otherwise unknown attribute labels are dropped
// (cold start) and unknown class labels are an error.
Dataset ingest_jsonl(const std::string& path, Corpus& corpus, bool train_mode);
void write_jsonl(const std::string& path, const Dataset& dataset, const Corpus& corpus);

void write_vocab_file(const std::string& path, const Vocab& vocab);
Vocab read_vocab_file(const std::string& path);

// Equal-size partition of test examples ordered by the training frequency of
// their label for `attribute` (multi-label: mean frequency; empty: 0).
// Bin 0 is the sparsest. Ties break on (frequency, first label id, index).
std::vector<std::vector<size_t>> bin_by_sparsity(const Dataset& test_set, int64_t attribute,
                                                 const std::vector<int64_t>& train_counts,
                                                 int64_t n_bins = 10);

// Deterministic k disjoint (train, test) index splits covering the dataset.
std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> kfold_split(size_t dataset_size,
                                                                             int64_t k,
                                                                             uint64_t seed);

enum class MetricKind { Accuracy, F1, MultiTaskMeanAccuracy };
MetricKind metric_kind_from_string(const std::string& s);
std::string metric_kind_to_string(MetricKind m);

// predictions/labels are [instance][task]. F1 is binary F1 on class id 1.
double metric_score(const std::vector<std::vector<int64_t>>& predictions,
                    const std::vector<std::vector<int64_t>>& labels, MetricKind kind);

}  // namespace injector
