#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "injector/data.hpp"
#include "injector/errors.hpp"
#include "injector/generator.hpp"

using namespace injector;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    const std::string dir = (fs::temp_directory_path() / ("injector_test_" + tag)).string();
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Corpus review_corpus() {
    Corpus corpus;
    corpus.attribute_names = {"authors", "areas"};
    corpus.attribute_multi_label = {true, true};
    corpus.n_tasks = 1;
    return corpus;
}

GeneratorSpec small_spec() {
    GeneratorSpec spec;
    spec.n_classes = 3;
    spec.attributes = {{"user", 20, 1.0, false, 1, 1}, {"tags", 30, 1.1, true, 1, 3}};
    spec.text_vocab_size = 120;
    spec.tokens_per_class = 8;
    spec.len_min = 4;
    spec.len_max = 10;
    spec.mix_text = 0.5;
    spec.mix_attr = 0.5;
    spec.n_train = 300;
    spec.n_dev = 60;
    spec.n_test = 60;
    spec.seed = 11;
    return spec;
}

double poisson_cdf_below(double lambda, int64_t threshold) {
    // P(X < threshold) for X ~ Poisson(lambda)
    double term = std::exp(-lambda);
    double total = term;
    for (int64_t k = 1; k < threshold; ++k) {
        term *= lambda / static_cast<double>(k);
        total += term;
    }
    return total;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on whitespace") {
    const auto tokens = tokenize("  The stein\tof BEERS\n ");
    CHECK(tokens == std::vector<std::string>({"the", "stein", "of", "beers"}));
}

TEST_CASE("ingest of an empty file yields an empty dataset") {
    const std::string dir = temp_dir("empty");
    std::ofstream(dir + "/train.jsonl").close();
    Corpus corpus = review_corpus();
    Dataset d = ingest_jsonl(dir + "/train.jsonl", corpus, true);
    CHECK(d.empty());
}

TEST_CASE("ingest resolves multi-label attribute records") {
    const std::string dir = temp_dir("multilabel");
    {
        std::ofstream out(dir + "/train.jsonl");
        out << R"({"text": "maximum agreement forests", "attributes": )"
            << R"({"authors": ["c. whidden", "r. beiko", "n. zeh"], "areas": ["q-bio.PE", "cs.DS"]}, )"
            << R"("label": "accept"})" << "\n";
        out << R"({"text": "fixed parameter algorithms", "attributes": )"
            << R"({"areas": ["cs.DS"]}, "label": "reject"})" << "\n";
    }
    Corpus corpus = review_corpus();
    Dataset d = ingest_jsonl(dir + "/train.jsonl", corpus, true);
    REQUIRE(d.size() == 2);
    CHECK(d.instances[0].attributes.of(0).size() == 3);
    CHECK(d.instances[0].attributes.of(1).size() == 2);
    CHECK(d.instances[1].attributes.of(0).empty());  // missing attribute: empty set
    CHECK(d.instances[1].attributes.of(1) == std::vector<int64_t>({corpus.attr_vocabs[1].find("cs.DS")}));
    CHECK(corpus.label_vocabs[0].size() == 2);
}

TEST_CASE("unknown labels: dropped at eval time, added at train time, class errors") {
    const std::string dir = temp_dir("unknown");
    {
        std::ofstream out(dir + "/train.jsonl");
        out << R"({"text": "a b", "attributes": {"authors": ["x"], "areas": ["m"]}, "label": "pos"})"
            << "\n";
    }
    {
        std::ofstream out(dir + "/test.jsonl");
        out << R"({"text": "a b", "attributes": {"authors": ["never-seen"], "areas": ["m"]}, "label": "pos"})"
            << "\n";
        out << R"({"text": "a", "attributes": {}, "label": "pos"})" << "\n";
    }
    Corpus corpus = review_corpus();
    ingest_jsonl(dir + "/train.jsonl", corpus, true);
    CHECK(corpus.attr_vocabs[0].size() == 1);

    Dataset test = ingest_jsonl(dir + "/test.jsonl", corpus, false);
    CHECK(test.instances[0].attributes.of(0).empty());  // cold start
    CHECK(corpus.attr_vocabs[0].size() == 1);           // vocabulary untouched

    {
        std::ofstream out(dir + "/bad.jsonl");
        out << R"({"text": "a", "attributes": {}, "label": "never-a-class"})" << "\n";
    }
    CHECK_THROWS_AS(ingest_jsonl(dir + "/bad.jsonl", corpus, false), ParseError);
}

TEST_CASE("malformed lines report their line number") {
    const std::string dir = temp_dir("malformed");
    {
        std::ofstream out(dir + "/train.jsonl");
        out << R"({"text": "ok", "attributes": {}, "label": "a"})" << "\n";
        out << "{not json\n";
    }
    Corpus corpus = review_corpus();
    CHECK_THROWS_WITH_AS(ingest_jsonl(dir + "/train.jsonl", corpus, true),
                         doctest::Contains(":2"), ParseError);
}

TEST_CASE("ingest -> serialize -> ingest is the identity on datasets") {
    GeneratorSpec spec = small_spec();
    SyntheticData data = generate_synthetic(spec);
    const std::string dir = temp_dir("roundtrip");
    write_synthetic(data, spec, dir);

    // fresh corpus bootstrapped from the emitted vocabulary files
    Corpus corpus;
    corpus.attribute_names = data.corpus.attribute_names;
    corpus.attribute_multi_label = data.corpus.attribute_multi_label;
    corpus.n_tasks = 1;
    corpus.text = read_vocab_file(dir + "/text.vocab");
    corpus.attr_vocabs.push_back(read_vocab_file(dir + "/attr_user.vocab"));
    corpus.attr_vocabs.push_back(read_vocab_file(dir + "/attr_tags.vocab"));
    corpus.label_vocabs.push_back(read_vocab_file(dir + "/labels_task0.vocab"));

    Dataset first = ingest_jsonl(dir + "/train.jsonl", corpus, true);
    write_jsonl(dir + "/train2.jsonl", first, corpus);
    Dataset second = ingest_jsonl(dir + "/train2.jsonl", corpus, true);

    REQUIRE(first.size() == second.size());
    REQUIRE(first.size() == data.train.size());
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first.instances[i].tokens == second.instances[i].tokens);
        CHECK(first.instances[i].tokens == data.train.instances[i].tokens);
        CHECK(first.instances[i].attributes.labels == second.instances[i].attributes.labels);
        CHECK(first.instances[i].labels == second.instances[i].labels);
    }
}

TEST_CASE("sparsity bins partition the test set into equal bins") {
    Corpus corpus;
    AttributeSchema schema;
    schema.d_z = 2;
    schema.attributes = {{"a", 10, false}};

    Dataset test;
    for (int64_t i = 0; i < 100; ++i) {
        Instance inst;
        inst.tokens = {2};
        inst.attributes = AttributeAssignment::empty_for(schema);
        inst.attributes.set(0, {i % 10});
        inst.labels = {0};
        test.instances.push_back(inst);
    }
    std::vector<int64_t> counts = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto bins = bin_by_sparsity(test, 0, counts, 10);
    REQUIRE(bins.size() == 10);
    std::set<size_t> seen;
    for (const auto& bin : bins) {
        CHECK(bin.size() == 10);
        for (size_t idx : bin) CHECK(seen.insert(idx).second);
    }
    CHECK(seen.size() == 100);

    // frequencies ascend with the label id here, so bin b holds label b
    for (size_t b = 0; b < 10; ++b) {
        for (size_t idx : bins[b]) {
            CHECK(test.instances[idx].attributes.of(0)[0] == static_cast<int64_t>(b));
        }
    }
}

TEST_CASE("uniform frequencies fall back to stable index order") {
    AttributeSchema schema;
    schema.d_z = 2;
    schema.attributes = {{"a", 4, false}};
    Dataset test;
    for (int64_t i = 0; i < 12; ++i) {
        Instance inst;
        inst.attributes = AttributeAssignment::empty_for(schema);
        inst.attributes.set(0, {1});
        inst.labels = {0};
        test.instances.push_back(inst);
    }
    std::vector<int64_t> counts = {5, 5, 5, 5};
    auto bins = bin_by_sparsity(test, 0, counts, 3);
    CHECK(bins[0] == std::vector<size_t>({0, 1, 2, 3}));
    CHECK(bins[1] == std::vector<size_t>({4, 5, 6, 7}));
    CHECK(bins[2] == std::vector<size_t>({8, 9, 10, 11}));
}

TEST_CASE("sparsity bin means are monotone on zipf data") {
    GeneratorSpec spec = small_spec();
    spec.n_test = 200;
    SyntheticData data = generate_synthetic(spec);

    std::vector<AttributeAssignment> assignments;
    for (const Instance& inst : data.train.instances) assignments.push_back(inst.attributes);
    const SparsityProfile profile = sparsity_profile(assignments, data.corpus.schema(2));

    auto bins = bin_by_sparsity(data.test, 0, profile.counts[0], 10);
    double prev = -1.0;
    for (const auto& bin : bins) {
        double mean = 0.0;
        for (size_t idx : bin) {
            const auto& ids = data.test.instances[idx].attributes.of(0);
            double f = 0.0;
            for (int64_t id : ids) f += static_cast<double>(profile.counts[0][static_cast<size_t>(id)]);
            mean += ids.empty() ? 0.0 : f / static_cast<double>(ids.size());
        }
        mean /= static_cast<double>(bin.size());
        CHECK(mean >= prev);
        prev = mean;
    }

    CHECK_THROWS_AS(bin_by_sparsity(data.test, 0, profile.counts[0], 500), ConfigError);
}

TEST_CASE("kfold splits partition the dataset") {
    auto folds = kfold_split(20, 20, 7);  // leave-one-out
    CHECK(folds.size() == 20);
    for (const auto& [train, test] : folds) {
        CHECK(test.size() == 1);
        CHECK(train.size() == 19);
    }

    folds = kfold_split(4500, 10, 7);
    std::set<size_t> covered;
    for (const auto& [train, test] : folds) {
        CHECK(test.size() == 450);
        for (size_t idx : test) CHECK(covered.insert(idx).second);
    }
    CHECK(covered.size() == 4500);

    CHECK_THROWS_AS(kfold_split(10, 1, 7), ConfigError);
    CHECK_THROWS_AS(kfold_split(5, 6, 7), ConfigError);

    // deterministic under seed
    auto again = kfold_split(4500, 10, 7);
    CHECK(again[0].second == folds[0].second);
}

TEST_CASE("metric scores") {
    using P = std::vector<std::vector<int64_t>>;
    const P perfect = {{1}, {0}, {2}};
    CHECK(metric_score(perfect, perfect, MetricKind::Accuracy) == 1.0);
    CHECK(metric_score(perfect, perfect, MetricKind::F1) == 1.0);
    CHECK(metric_score(perfect, perfect, MetricKind::MultiTaskMeanAccuracy) == 1.0);

    // all-negative predictions with positives present
    const P negatives = {{0}, {0}, {0}};
    const P gold_pos = {{1}, {0}, {1}};
    CHECK(metric_score(negatives, gold_pos, MetricKind::F1) == 0.0);

    // hand-computed 3-class confusion
    const P preds = {{0}, {1}, {1}, {2}, {0}, {2}};
    const P gold = {{0}, {1}, {2}, {2}, {1}, {0}};
    CHECK(metric_score(preds, gold, MetricKind::Accuracy) == doctest::Approx(3.0 / 6.0));

    // binary F1 from the confusion matrix: tp=1, fp=1, fn=1
    const P bpred = {{1}, {1}, {0}, {0}};
    const P bgold = {{1}, {0}, {1}, {0}};
    CHECK(metric_score(bpred, bgold, MetricKind::F1) == doctest::Approx(0.5));

    // multi-task mean of per-task accuracies
    const P mt_pred = {{0, 1}, {1, 1}};
    const P mt_gold = {{0, 0}, {1, 1}};
    CHECK(metric_score(mt_pred, mt_gold, MetricKind::MultiTaskMeanAccuracy) ==
          doctest::Approx(0.75));

    CHECK_THROWS_AS(metric_score(negatives, perfect[0].empty() ? gold : P{{1}}, MetricKind::Accuracy),
                    ContractError);
}

TEST_CASE("generator is bit-reproducible under seed") {
    GeneratorSpec spec = small_spec();
    SyntheticData a = generate_synthetic(spec);
    SyntheticData b = generate_synthetic(spec);
    CHECK(a.stats.bayes_accuracy == b.stats.bayes_accuracy);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train.instances[i].tokens == b.train.instances[i].tokens);
        CHECK(a.train.instances[i].attributes.labels == b.train.instances[i].attributes.labels);
        CHECK(a.train.instances[i].labels == b.train.instances[i].labels);
    }
}

TEST_CASE("pure text mixing yields a nontrivial bayes bound") {
    GeneratorSpec spec = small_spec();
    spec.mix_text = 1.0;
    spec.mix_attr = 0.0;
    spec.label_noise = 0.0;
    spec.n_test = 2000;
    SyntheticData data = generate_synthetic(spec);
    CHECK(data.stats.bayes_accuracy > 1.0 / 3.0 + 0.05);
    CHECK(data.stats.bayes_accuracy <= 1.0);
    CHECK(data.stats.bayes_accuracy > data.stats.majority_class_rate);
}

TEST_CASE("pure attribute mixing: text-blind optimum is the majority rate") {
    GeneratorSpec spec = small_spec();
    spec.mix_text = 0.0;
    spec.mix_attr = 1.0;
    spec.n_test = 5000;
    spec.n_train = 100;
    SyntheticData data = generate_synthetic(spec);

    // constant prediction of the majority class on the sampled test labels
    std::vector<double> mass(3, 0.0);
    for (const auto& p : data.test_posteriors) {
        for (size_t c = 0; c < 3; ++c) mass[c] += p[c];
    }
    int64_t best = 0;
    for (size_t c = 1; c < 3; ++c) {
        if (mass[c] > mass[best]) best = static_cast<int64_t>(c);
    }
    size_t hits = 0;
    for (const Instance& inst : data.test.instances) {
        if (inst.labels[0] == best) ++hits;
    }
    const double const_pred_accuracy = static_cast<double>(hits) / static_cast<double>(data.test.size());
    CHECK(std::abs(const_pred_accuracy - data.stats.majority_class_rate) < 0.03);
    CHECK(data.stats.bayes_accuracy > data.stats.majority_class_rate);
}

TEST_CASE("zipf sparsity matches the analytic expectation") {
    GeneratorSpec spec;
    spec.n_classes = 2;
    spec.attributes = {{"user", 5000, 1.5, false, 1, 1}};
    spec.text_vocab_size = 60;
    spec.tokens_per_class = 4;
    spec.len_min = 2;
    spec.len_max = 4;
    spec.mix_text = 0.5;
    spec.mix_attr = 0.5;
    spec.n_train = 50000;
    spec.n_dev = 10;
    spec.n_test = 10;
    spec.seed = 21;
    SyntheticData data = generate_synthetic(spec);

    // expected sparse share: sum over labels of P(count < 10), Poisson model
    double norm = 0.0;
    for (int64_t i = 0; i < 5000; ++i) norm += std::pow(static_cast<double>(i + 1), -1.5);
    double expected = 0.0;
    for (int64_t i = 0; i < 5000; ++i) {
        const double p = std::pow(static_cast<double>(i + 1), -1.5) / norm;
        expected += poisson_cdf_below(50000.0 * p, 10);
    }
    expected *= 100.0 / 5000.0;

    CHECK(std::abs(data.stats.percent_sparse[0] - expected) < 3.0);
}

TEST_CASE("generator spec validation") {
    GeneratorSpec spec = small_spec();
    spec.mix_text = 0.7;  // no longer sums to 1
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = small_spec();
    spec.attributes[0].vocab_size = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = small_spec();
    spec.attributes[1].max_labels = 50;  // exceeds vocab 30? no, it's fine; force error
    spec.attributes[1].vocab_size = 10;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec = small_spec();
    spec.text_vocab_size = 10;  // smaller than the indicative pools
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}
