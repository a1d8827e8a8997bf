#include "injector/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "injector/encoder.hpp"
#include "injector/errors.hpp"
#include "json.hpp"

namespace injector {

using nlohmann::json;

int64_t Vocab::add(const std::string& s) {
    auto it = ids.find(s);
    if (it != ids.end()) return it->second;
    const int64_t id = size();
    ids.emplace(s, id);
    items.push_back(s);
    return id;
}

int64_t Vocab::find(const std::string& s) const {
    auto it = ids.find(s);
    return it == ids.end() ? -1 : it->second;
}

AttributeSchema Corpus::schema(int64_t d_z) const {
    AttributeSchema schema;
    schema.d_z = d_z;
    for (int64_t j = 0; j < attribute_count(); ++j) {
        schema.attributes.push_back({attribute_names[static_cast<size_t>(j)],
                                     std::max<int64_t>(attr_vocabs[static_cast<size_t>(j)].size(), 1),
                                     attribute_multi_label[static_cast<size_t>(j)]});
    }
    return schema;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) {
                tokens.push_back(current);
                current.clear();
            }
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

namespace {

struct RawRecord {
    std::vector<std::string> tokens;
    std::vector<std::vector<std::string>> attr_labels;  // per corpus attribute
    std::vector<std::string> labels;                    // per task
};

RawRecord parse_record(const json& j, const Corpus& corpus, const std::string& where) {
    RawRecord rec;
    if (!j.is_object() || !j.contains("text") || !j.contains("attributes") || !j.contains("label")) {
        throw ParseError(where + ": record needs text, attributes, label fields");
    }
    if (!j["text"].is_string()) throw ParseError(where + ": text must be a string");
    rec.tokens = tokenize(j["text"].get<std::string>());

    if (!j["attributes"].is_object()) throw ParseError(where + ": attributes must be an object");
    rec.attr_labels.resize(static_cast<size_t>(corpus.attribute_count()));
    for (const auto& [name, value] : j["attributes"].items()) {
        int64_t idx = -1;
        for (int64_t a = 0; a < corpus.attribute_count(); ++a) {
            if (corpus.attribute_names[static_cast<size_t>(a)] == name) {
                idx = a;
                break;
            }
        }
        if (idx < 0) throw ParseError(where + ": unknown attribute '" + name + "'");
        auto& out = rec.attr_labels[static_cast<size_t>(idx)];
        if (value.is_string()) {
            out.push_back(value.get<std::string>());
        } else if (value.is_array()) {
            for (const auto& v : value) {
                if (!v.is_string()) throw ParseError(where + ": attribute labels must be strings");
                out.push_back(v.get<std::string>());
            }
        } else {
            throw ParseError(where + ": attribute '" + name + "' must be a string or string list");
        }
        if (!corpus.attribute_multi_label[static_cast<size_t>(idx)] && out.size() > 1) {
            throw ParseError(where + ": attribute '" + name + "' is single-label");
        }
    }

    const auto& label = j["label"];
    if (label.is_string()) {
        rec.labels.push_back(label.get<std::string>());
    } else if (label.is_array()) {
        for (const auto& v : label) {
            if (!v.is_string()) throw ParseError(where + ": labels must be strings");
            rec.labels.push_back(v.get<std::string>());
        }
    } else {
        throw ParseError(where + ": label must be a string or string list");
    }
    if (static_cast<int64_t>(rec.labels.size()) != corpus.n_tasks) {
        throw ParseError(where + ": expected " + std::to_string(corpus.n_tasks) + " label(s), got " +
                         std::to_string(rec.labels.size()));
    }
    return rec;
}

}  // namespace

Dataset ingest_jsonl(const std::string& path, Corpus& corpus, bool train_mode) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    if (corpus.label_vocabs.empty()) corpus.label_vocabs.resize(static_cast<size_t>(corpus.n_tasks));
    if (corpus.attr_vocabs.empty()) corpus.attr_vocabs.resize(static_cast<size_t>(corpus.attribute_count()));

    std::vector<RawRecord> records;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(parse_record(j, corpus, path + ":" + std::to_string(line_no)));
    }

    if (train_mode && corpus.text.size() == 0) {
        std::unordered_map<std::string, int64_t> counts;
        for (const RawRecord& rec : records) {
            for (const std::string& tok : rec.tokens) ++counts[tok];
        }
        // First-appearance order keeps vocabulary construction deterministic.
        std::unordered_map<std::string, bool> added;
        for (const RawRecord& rec : records) {
            for (const std::string& tok : rec.tokens) {
                if (!added[tok] && counts[tok] >= corpus.text_min_count) {
                    corpus.text.add(tok);
                    added[tok] = true;
                }
            }
        }
    }

    Dataset dataset;
    dataset.instances.reserve(records.size());
    for (const RawRecord& rec : records) {
        Instance inst;
        inst.tokens.reserve(rec.tokens.size());
        for (const std::string& tok : rec.tokens) {
            const int64_t id = corpus.text.find(tok);
            inst.tokens.push_back(id < 0 ? kUnkTokenId : kFirstWordId + id);
        }
        inst.attributes.labels.resize(static_cast<size_t>(corpus.attribute_count()));
        for (int64_t a = 0; a < corpus.attribute_count(); ++a) {
            std::vector<int64_t> ids;
            for (const std::string& label : rec.attr_labels[static_cast<size_t>(a)]) {
                Vocab& vocab = corpus.attr_vocabs[static_cast<size_t>(a)];
                int64_t id = vocab.find(label);
                if (id < 0) {
                    if (!train_mode) continue;  // cold start: unseen labels are dropped
                    id = vocab.add(label);
                }
                ids.push_back(id);
            }
            inst.attributes.set(a, std::move(ids));
        }
        for (int64_t t = 0; t < corpus.n_tasks; ++t) {
            Vocab& vocab = corpus.label_vocabs[static_cast<size_t>(t)];
            const std::string& label = rec.labels[static_cast<size_t>(t)];
            int64_t id = vocab.find(label);
            if (id < 0) {
                if (!train_mode) {
                    throw ParseError(path + ": unknown class label '" + label + "' for task " +
                                     std::to_string(t));
                }
                id = vocab.add(label);
            }
            inst.labels.push_back(id);
        }
        dataset.instances.push_back(std::move(inst));
    }
    return dataset;
}

void write_jsonl(const std::string& path, const Dataset& dataset, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    for (const Instance& inst : dataset.instances) {
        json j;
        std::ostringstream text;
        for (size_t i = 0; i < inst.tokens.size(); ++i) {
            if (i > 0) text << ' ';
            const int64_t id = inst.tokens[i];
            text << (id < kFirstWordId ? "<unk>" : corpus.text.name_of(id - kFirstWordId));
        }
        j["text"] = text.str();
        json attrs = json::object();
        for (int64_t a = 0; a < corpus.attribute_count(); ++a) {
            const auto& ids = inst.attributes.of(a);
            if (ids.empty()) continue;
            const Vocab& vocab = corpus.attr_vocabs[static_cast<size_t>(a)];
            if (corpus.attribute_multi_label[static_cast<size_t>(a)]) {
                json list = json::array();
                for (int64_t id : ids) list.push_back(vocab.name_of(id));
                attrs[corpus.attribute_names[static_cast<size_t>(a)]] = list;
            } else {
                attrs[corpus.attribute_names[static_cast<size_t>(a)]] = vocab.name_of(ids[0]);
            }
        }
        j["attributes"] = attrs;
        if (corpus.n_tasks == 1) {
            j["label"] = corpus.label_vocabs[0].name_of(inst.labels[0]);
        } else {
            json labels = json::array();
            for (int64_t t = 0; t < corpus.n_tasks; ++t) {
                labels.push_back(
                    corpus.label_vocabs[static_cast<size_t>(t)].name_of(inst.labels[static_cast<size_t>(t)]));
            }
            j["label"] = labels;
        }
        out << j.dump() << '\n';
    }
}

void write_vocab_file(const std::string& path, const Vocab& vocab) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    for (const std::string& item : vocab.items) out << item << '\n';
}

Vocab read_vocab_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    Vocab vocab;
    std::string line;
    while (std::getline(in, line)) vocab.add(line);
    return vocab;
}

std::vector<std::vector<size_t>> bin_by_sparsity(const Dataset& test_set, int64_t attribute,
                                                 const std::vector<int64_t>& train_counts,
                                                 int64_t n_bins) {
    const size_t n = test_set.size();
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
    if (static_cast<size_t>(n_bins) > n) {
        throw ConfigError("n_bins=" + std::to_string(n_bins) + " exceeds test size " +
                          std::to_string(n));
    }
    struct Key {
        double freq;
        int64_t first_label;
        size_t index;
    };
    std::vector<Key> keys;
    keys.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& ids = test_set.instances[i].attributes.of(attribute);
        double freq = 0.0;
        if (!ids.empty()) {
            for (int64_t id : ids) freq += static_cast<double>(train_counts[static_cast<size_t>(id)]);
            freq /= static_cast<double>(ids.size());
        }
        keys.push_back({freq, ids.empty() ? -1 : ids[0], i});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        if (a.freq != b.freq) return a.freq < b.freq;
        if (a.first_label != b.first_label) return a.first_label < b.first_label;
        return a.index < b.index;
    });

    std::vector<std::vector<size_t>> bins(static_cast<size_t>(n_bins));
    const size_t base = n / static_cast<size_t>(n_bins);
    const size_t extra = n % static_cast<size_t>(n_bins);
    size_t cursor = 0;
    for (size_t b = 0; b < static_cast<size_t>(n_bins); ++b) {
        const size_t count = base + (b < extra ? 1 : 0);
        for (size_t i = 0; i < count; ++i) bins[b].push_back(keys[cursor++].index);
    }
    return bins;
}

std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> kfold_split(size_t dataset_size,
                                                                             int64_t k,
                                                                             uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold requires k >= 2");
    if (static_cast<size_t>(k) > dataset_size) {
        throw ConfigError("k=" + std::to_string(k) + " exceeds dataset size " +
                          std::to_string(dataset_size));
    }
    std::vector<size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> folds;
    const size_t base = dataset_size / static_cast<size_t>(k);
    const size_t extra = dataset_size % static_cast<size_t>(k);
    size_t cursor = 0;
    for (int64_t f = 0; f < k; ++f) {
        const size_t count = base + (static_cast<size_t>(f) < extra ? 1 : 0);
        std::vector<size_t> test(order.begin() + static_cast<int64_t>(cursor),
                                 order.begin() + static_cast<int64_t>(cursor + count));
        std::vector<size_t> train;
        train.reserve(dataset_size - count);
        for (size_t i = 0; i < dataset_size; ++i) {
            if (i < cursor || i >= cursor + count) train.push_back(order[i]);
        }
        folds.emplace_back(std::move(train), std::move(test));
        cursor += count;
    }
    return folds;
}

MetricKind metric_kind_from_string(const std::string& s) {
    if (s == "accuracy") return MetricKind::Accuracy;
    if (s == "f1") return MetricKind::F1;
    if (s == "multi_task_mean_accuracy") return MetricKind::MultiTaskMeanAccuracy;
    throw ConfigError("unknown metric '" + s + "'");
}

std::string metric_kind_to_string(MetricKind m) {
    switch (m) {
        case MetricKind::Accuracy: return "accuracy";
        case MetricKind::F1: return "f1";
        case MetricKind::MultiTaskMeanAccuracy: return "multi_task_mean_accuracy";
    }
    return "accuracy";
}

double metric_score(const std::vector<std::vector<int64_t>>& predictions,
                    const std::vector<std::vector<int64_t>>& labels, MetricKind kind) {
    if (predictions.size() != labels.size()) {
        throw ContractError("metric_score: " + std::to_string(predictions.size()) +
                            " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) return 0.0;
    const size_t n = predictions.size();
    switch (kind) {
        case MetricKind::Accuracy: {
            size_t hits = 0;
            for (size_t i = 0; i < n; ++i) {
                if (predictions[i][0] == labels[i][0]) ++hits;
            }
            return static_cast<double>(hits) / static_cast<double>(n);
        }
        case MetricKind::F1: {
            // binary F1 on the positive class (id 1)
            int64_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < n; ++i) {
                const bool pred = predictions[i][0] == 1;
                const bool gold = labels[i][0] == 1;
                if (pred && gold) ++tp;
                if (pred && !gold) ++fp;
                if (!pred && gold) ++fn;
            }
            if (tp == 0) return 0.0;
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
            return 2.0 * precision * recall / (precision + recall);
        }
        case MetricKind::MultiTaskMeanAccuracy: {
            const size_t n_tasks = labels[0].size();
            double total = 0.0;
            for (size_t t = 0; t < n_tasks; ++t) {
                size_t hits = 0;
                for (size_t i = 0; i < n; ++i) {
                    if (predictions[i][t] == labels[i][t]) ++hits;
                }
                total += static_cast<double>(hits) / static_cast<double>(n);
            }
            return total / static_cast<double>(n_tasks);
        }
    }
    return 0.0;
}

}  // namespace injector
