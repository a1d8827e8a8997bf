#include "injector/generator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "injector/encoder.hpp"
#include "injector/errors.hpp"
#include "json.hpp"

namespace injector {

using nlohmann::json;

void GeneratorSpec::validate() const {
    if (n_classes < 2) throw ConfigError("generator needs >= 2 classes");
    if (n_tasks < 1) throw ConfigError("generator needs >= 1 task");
    if (attributes.empty() && mix_attr > 0.0) {
        throw ConfigError("nonzero attribute mixing weight with no attributes");
    }
    for (const GenAttributeSpec& a : attributes) {
        if (a.vocab_size < 1) throw ConfigError("attribute '" + a.name + "' needs vocab_size >= 1");
        if (a.zipf_exponent < 0.0) throw ConfigError("zipf exponent must be >= 0");
        const int64_t lo = a.multi_label ? a.min_labels : 1;
        const int64_t hi = a.multi_label ? a.max_labels : 1;
        if (lo < 1 || hi < lo) throw ConfigError("attribute '" + a.name + "' label arity invalid");
        if (hi > a.vocab_size) {
            throw ConfigError("attribute '" + a.name + "' max_labels exceeds vocab_size");
        }
    }
    if (mix_text < 0.0 || mix_attr < 0.0 || std::abs(mix_text + mix_attr - 1.0) > 1e-9) {
        throw ConfigError("mixing weights must be nonnegative and sum to 1");
    }
    if (text_vocab_size < n_classes * tokens_per_class + 1) {
        throw ConfigError("text_vocab_size too small for the indicative token pools");
    }
    if (len_min < 1 || len_max < len_min) throw ConfigError("invalid text length range");
    if (label_noise < 0.0 || label_noise > 1.0) throw ConfigError("label_noise must be in [0,1]");
    if (n_train < 1 || n_dev < 1 || n_test < 1) throw ConfigError("split sizes must be positive");
}

GeneratorSpec generator_spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open generator spec '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    GeneratorSpec spec;
    spec.n_classes = j.value("n_classes", spec.n_classes);
    spec.n_tasks = j.value("n_tasks", spec.n_tasks);
    spec.text_vocab_size = j.value("text_vocab_size", spec.text_vocab_size);
    spec.tokens_per_class = j.value("tokens_per_class", spec.tokens_per_class);
    spec.indicative_prob = j.value("indicative_prob", spec.indicative_prob);
    spec.len_min = j.value("len_min", spec.len_min);
    spec.len_max = j.value("len_max", spec.len_max);
    if (j.contains("mixing")) {
        spec.mix_text = j["mixing"].value("text", spec.mix_text);
        spec.mix_attr = j["mixing"].value("attr", spec.mix_attr);
    }
    spec.text_gain = j.value("text_gain", spec.text_gain);
    spec.attr_gain = j.value("attr_gain", spec.attr_gain);
    spec.label_noise = j.value("label_noise", spec.label_noise);
    spec.n_train = j.value("n_train", spec.n_train);
    spec.n_dev = j.value("n_dev", spec.n_dev);
    spec.n_test = j.value("n_test", spec.n_test);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("attributes")) {
        for (const auto& a : j["attributes"]) {
            GenAttributeSpec g;
            g.name = a.at("name").get<std::string>();
            g.vocab_size = a.value("vocab_size", g.vocab_size);
            g.zipf_exponent = a.value("zipf_exponent", g.zipf_exponent);
            g.multi_label = a.value("multi_label", g.multi_label);
            g.min_labels = a.value("min_labels", g.min_labels);
            g.max_labels = a.value("max_labels", g.max_labels);
            spec.attributes.push_back(std::move(g));
        }
    }
    spec.validate();
    return spec;
}

namespace {

std::vector<double> zipf_weights(int64_t vocab, double exponent) {
    std::vector<double> w(static_cast<size_t>(vocab));
    for (int64_t i = 0; i < vocab; ++i) {
        w[static_cast<size_t>(i)] = std::pow(static_cast<double>(i + 1), -exponent);
    }
    return w;
}

}  // namespace

SyntheticData generate_synthetic(const GeneratorSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    SyntheticData data;
    Corpus& corpus = data.corpus;
    corpus.n_tasks = spec.n_tasks;
    for (const GenAttributeSpec& a : spec.attributes) {
        corpus.attribute_names.push_back(a.name);
        corpus.attribute_multi_label.push_back(a.multi_label);
        Vocab vocab;
        for (int64_t i = 0; i < a.vocab_size; ++i) vocab.add(a.name + "_" + std::to_string(i));
        corpus.attr_vocabs.push_back(std::move(vocab));
    }
    for (int64_t i = 0; i < spec.text_vocab_size; ++i) corpus.text.add("w" + std::to_string(i));
    corpus.label_vocabs.resize(static_cast<size_t>(spec.n_tasks));
    for (int64_t t = 0; t < spec.n_tasks; ++t) {
        for (int64_t c = 0; c < spec.n_classes; ++c) {
            corpus.label_vocabs[static_cast<size_t>(t)].add("c" + std::to_string(c));
        }
    }

    // class preference of every attribute label, fixed at generator init
    std::vector<std::vector<int64_t>> label_pref(spec.attributes.size());
    std::uniform_int_distribution<int64_t> class_dist(0, spec.n_classes - 1);
    for (size_t a = 0; a < spec.attributes.size(); ++a) {
        label_pref[a].resize(static_cast<size_t>(spec.attributes[a].vocab_size));
        for (auto& pref : label_pref[a]) pref = class_dist(rng);
    }

    std::vector<std::discrete_distribution<int64_t>> zipf;
    for (const GenAttributeSpec& a : spec.attributes) {
        auto w = zipf_weights(a.vocab_size, a.zipf_exponent);
        zipf.emplace_back(w.begin(), w.end());
    }

    const int64_t indicative_total = spec.n_classes * spec.tokens_per_class;
    std::uniform_int_distribution<int64_t> topic_dist(0, spec.n_classes - 1);
    std::uniform_int_distribution<int64_t> len_dist(spec.len_min, spec.len_max);
    std::uniform_int_distribution<int64_t> pool_dist(0, spec.tokens_per_class - 1);
    std::uniform_int_distribution<int64_t> neutral_dist(indicative_total, spec.text_vocab_size - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int64_t n_total = spec.n_train + spec.n_dev + spec.n_test;
    std::vector<Instance> all;
    all.reserve(static_cast<size_t>(n_total));
    std::vector<std::vector<double>> posteriors;
    posteriors.reserve(static_cast<size_t>(n_total));

    for (int64_t i = 0; i < n_total; ++i) {
        Instance inst;
        const int64_t topic = topic_dist(rng);
        const int64_t len = len_dist(rng);
        std::vector<double> text_signal(static_cast<size_t>(spec.n_classes), 0.0);
        for (int64_t p = 0; p < len; ++p) {
            int64_t word;
            if (unit(rng) < spec.indicative_prob) {
                word = topic * spec.tokens_per_class + pool_dist(rng);
                text_signal[static_cast<size_t>(word / spec.tokens_per_class)] += 1.0;
            } else {
                word = neutral_dist(rng);
            }
            inst.tokens.push_back(kFirstWordId + word);
        }
        for (auto& v : text_signal) v *= spec.text_gain / static_cast<double>(len);

        inst.attributes.labels.resize(spec.attributes.size());
        std::vector<double> attr_signal(static_cast<size_t>(spec.n_classes), 0.0);
        for (size_t a = 0; a < spec.attributes.size(); ++a) {
            const GenAttributeSpec& aspec = spec.attributes[a];
            int64_t arity = 1;
            if (aspec.multi_label) {
                std::uniform_int_distribution<int64_t> arity_dist(aspec.min_labels, aspec.max_labels);
                arity = arity_dist(rng);
            }
            std::set<int64_t> chosen;
            while (static_cast<int64_t>(chosen.size()) < arity) chosen.insert(zipf[a](rng));
            std::vector<int64_t> ids(chosen.begin(), chosen.end());
            for (int64_t id : ids) {
                attr_signal[static_cast<size_t>(label_pref[a][static_cast<size_t>(id)])] +=
                    1.0 / static_cast<double>(ids.size());
            }
            inst.attributes.set(static_cast<int64_t>(a), std::move(ids));
        }
        if (!spec.attributes.empty()) {
            for (auto& v : attr_signal) v *= spec.attr_gain / static_cast<double>(spec.attributes.size());
        }

        std::vector<double> probs(static_cast<size_t>(spec.n_classes));
        double mx = -1e300;
        for (int64_t c = 0; c < spec.n_classes; ++c) {
            const size_t ci = static_cast<size_t>(c);
            probs[ci] = spec.mix_text * text_signal[ci] + spec.mix_attr * attr_signal[ci];
            mx = std::max(mx, probs[ci]);
        }
        double z = 0.0;
        for (auto& p : probs) {
            p = std::exp(p - mx);
            z += p;
        }
        for (auto& p : probs) {
            p = (1.0 - spec.label_noise) * (p / z) +
                spec.label_noise / static_cast<double>(spec.n_classes);
        }

        std::discrete_distribution<int64_t> label_dist(probs.begin(), probs.end());
        for (int64_t t = 0; t < spec.n_tasks; ++t) inst.labels.push_back(label_dist(rng));

        posteriors.push_back(std::move(probs));
        all.push_back(std::move(inst));
    }

    auto take = [&](int64_t begin, int64_t count) {
        Dataset d;
        d.instances.assign(all.begin() + begin, all.begin() + begin + count);
        return d;
    };
    data.train = take(0, spec.n_train);
    data.dev = take(spec.n_train, spec.n_dev);
    data.test = take(spec.n_train + spec.n_dev, spec.n_test);
    data.test_posteriors.assign(posteriors.begin() + spec.n_train + spec.n_dev, posteriors.end());

    double bayes = 0.0;
    std::vector<double> class_mass(static_cast<size_t>(spec.n_classes), 0.0);
    for (const auto& p : data.test_posteriors) {
        bayes += *std::max_element(p.begin(), p.end());
        for (int64_t c = 0; c < spec.n_classes; ++c) class_mass[static_cast<size_t>(c)] += p[static_cast<size_t>(c)];
    }
    data.stats.bayes_accuracy = bayes / static_cast<double>(spec.n_test);
    data.stats.majority_class_rate =
        *std::max_element(class_mass.begin(), class_mass.end()) / static_cast<double>(spec.n_test);

    std::vector<AttributeAssignment> train_assignments;
    train_assignments.reserve(data.train.size());
    for (const Instance& inst : data.train.instances) train_assignments.push_back(inst.attributes);
    if (!spec.attributes.empty()) {
        const SparsityProfile profile =
            sparsity_profile(train_assignments, corpus.schema(/*d_z=*/1));
        data.stats.percent_sparse = profile.percent_sparse;
    }
    data.stats.train_label_histogram.assign(static_cast<size_t>(spec.n_classes), 0);
    for (const Instance& inst : data.train.instances) {
        ++data.stats.train_label_histogram[static_cast<size_t>(inst.labels[0])];
    }
    return data;
}

void write_synthetic(const SyntheticData& data, const GeneratorSpec& spec,
                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_jsonl(out_dir + "/train.jsonl", data.train, data.corpus);
    write_jsonl(out_dir + "/dev.jsonl", data.dev, data.corpus);
    write_jsonl(out_dir + "/test.jsonl", data.test, data.corpus);
    write_vocab_file(out_dir + "/text.vocab", data.corpus.text);
    for (size_t a = 0; a < data.corpus.attr_vocabs.size(); ++a) {
        write_vocab_file(out_dir + "/attr_" + data.corpus.attribute_names[a] + ".vocab",
                         data.corpus.attr_vocabs[a]);
    }
    for (int64_t t = 0; t < data.corpus.n_tasks; ++t) {
        write_vocab_file(out_dir + "/labels_task" + std::to_string(t) + ".vocab",
                         data.corpus.label_vocabs[static_cast<size_t>(t)]);
    }

    json stats;
    stats["bayes_accuracy"] = data.stats.bayes_accuracy;
    stats["majority_class_rate"] = data.stats.majority_class_rate;
    stats["n_train"] = spec.n_train;
    stats["n_dev"] = spec.n_dev;
    stats["n_test"] = spec.n_test;
    stats["n_classes"] = spec.n_classes;
    stats["n_tasks"] = spec.n_tasks;
    json sparse = json::object();
    for (size_t a = 0; a < data.stats.percent_sparse.size(); ++a) {
        sparse[data.corpus.attribute_names[a]] = data.stats.percent_sparse[a];
    }
    stats["percent_sparse"] = sparse;
    json hist = json::array();
    for (int64_t c : data.stats.train_label_histogram) hist.push_back(c);
    stats["train_label_histogram"] = hist;
    std::ofstream out(out_dir + "/stats.json");
    out << stats.dump(2) << '\n';
}

}  // namespace injector
