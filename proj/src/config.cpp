#include "injector/config.hpp"

#include <filesystem>
#include <fstream>

#include "injector/errors.hpp"
#include "json.hpp"

namespace injector {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig experiment_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }

    ExperimentConfig cfg;
    if (j.contains("model")) {
        const auto& m = j["model"];
        cfg.kind = model_kind_from_string(m.value("kind", std::string("injector")));
        cfg.encoder.max_len = m.value("max_len", cfg.encoder.max_len);
        cfg.encoder.d_h = m.value("d_h", cfg.encoder.d_h);
        cfg.encoder.n_layers = m.value("n_layers", cfg.encoder.n_layers);
        cfg.encoder.n_heads = m.value("n_heads", cfg.encoder.n_heads);
        cfg.encoder.d_ff = m.value("d_ff", cfg.encoder.d_ff);
        cfg.encoder.dropout_rate = m.value("dropout_rate", cfg.encoder.dropout_rate);
        cfg.encoder.activation =
            activation_from_string(m.value("activation", std::string("gelu")));
        cfg.encoder.train_layer_norm = m.value("train_layer_norm", cfg.encoder.train_layer_norm);
        if (m.contains("class_weights")) {
            cfg.class_weights = m["class_weights"].get<std::vector<std::vector<double>>>();
        }
    }
    if (j.contains("injector")) {
        const auto& i = j["injector"];
        cfg.injector.d_a = i.value("d_a", cfg.injector.d_a);
        cfg.injector.d_z = i.value("d_z", cfg.injector.d_z);
        cfg.injector.hyper_dims = i.value("hyper_dims", cfg.injector.hyper_dims);
        cfg.injector.r_drop = i.value("r_drop", cfg.injector.r_drop);
        cfg.injector.aggregation =
            aggregation_from_string(i.value("aggregation", std::string("post")));
        cfg.injector.injection =
            injection_from_string(i.value("injection", std::string("bias+weight")));
        cfg.injector.synthesis = synthesis_from_string(i.value("synthesis", std::string("phm")));
        cfg.injector.task_adapter = i.value("task_adapter", cfg.injector.task_adapter);
        cfg.injector.per_label_dropout =
            i.value("per_label_dropout", cfg.injector.per_label_dropout);
        cfg.injector.activation =
            activation_from_string(i.value("activation", std::string("gelu")));
    }
    if (j.contains("attributes")) {
        for (const auto& a : j["attributes"]) {
            cfg.attributes.push_back(
                {a.at("name").get<std::string>(), a.value("multi_label", false)});
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.plan.learning_rate = t.value("learning_rate", cfg.plan.learning_rate);
        cfg.plan.total_steps = t.value("total_steps", cfg.plan.total_steps);
        cfg.plan.warmup_steps = t.value("warmup_steps", cfg.plan.warmup_steps);
        cfg.plan.batch_size = t.value("batch_size", cfg.plan.batch_size);
        cfg.plan.weight_decay = t.value("weight_decay", cfg.plan.weight_decay);
        cfg.plan.seed = t.value("seed", cfg.plan.seed);
        cfg.plan.freeze_policy =
            freeze_policy_from_string(t.value("freeze_policy", std::string("none")));
        cfg.plan.r_drop = t.value("r_drop", cfg.injector.r_drop);
        cfg.plan.eval_every = t.value("eval_every", cfg.plan.eval_every);
        cfg.plan.decay = t.value("lr_decay", std::string("linear")) == "constant"
                             ? LrDecay::Constant
                             : LrDecay::Linear;
        cfg.plan.grad_clip = t.value("grad_clip", cfg.plan.grad_clip);
    } else {
        cfg.plan.r_drop = cfg.injector.r_drop;
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        cfg.data.dir = d.value("dir", cfg.data.dir);
        cfg.data.train_file = d.value("train", cfg.data.train_file);
        cfg.data.dev_file = d.value("dev", cfg.data.dev_file);
        cfg.data.test_file = d.value("test", cfg.data.test_file);
        cfg.data.text_min_count = d.value("text_min_count", cfg.data.text_min_count);
        cfg.data.n_tasks = d.value("n_tasks", cfg.data.n_tasks);
        cfg.data.kfold = d.value("kfold", cfg.data.kfold);
    }
    cfg.max_param_bytes = j.value("max_param_bytes", cfg.max_param_bytes);
    if (j.contains("transfer")) {
        cfg.transfer_source_tasks =
            j["transfer"].value("source_tasks", std::vector<int64_t>{});
        cfg.transfer_target_task = j["transfer"].value("target_task", cfg.transfer_target_task);
    }
    return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["model"] = {{"kind", model_kind_to_string(cfg.kind)},
                  {"max_len", cfg.encoder.max_len},
                  {"d_h", cfg.encoder.d_h},
                  {"n_layers", cfg.encoder.n_layers},
                  {"n_heads", cfg.encoder.n_heads},
                  {"d_ff", cfg.encoder.d_ff},
                  {"dropout_rate", cfg.encoder.dropout_rate},
                  {"activation", activation_to_string(cfg.encoder.activation)},
                  {"train_layer_norm", cfg.encoder.train_layer_norm}};
    if (!cfg.class_weights.empty()) j["model"]["class_weights"] = cfg.class_weights;
    j["injector"] = {{"d_a", cfg.injector.d_a},
                     {"d_z", cfg.injector.d_z},
                     {"hyper_dims", cfg.injector.hyper_dims},
                     {"r_drop", cfg.injector.r_drop},
                     {"aggregation", cfg.injector.aggregation == Aggregation::Post ? "post" : "pre"},
                     {"injection", cfg.injector.injection == InjectionMode::BiasAndWeight
                                       ? "bias+weight"
                                       : (cfg.injector.injection == InjectionMode::BiasOnly
                                              ? "bias_only"
                                              : "weight_only")},
                     {"synthesis", cfg.injector.synthesis == SynthesisMode::Phm
                                       ? "phm"
                                       : (cfg.injector.synthesis == SynthesisMode::LowRankOnly
                                              ? "lowrank_only"
                                              : "naive")},
                     {"task_adapter", cfg.injector.task_adapter},
                     {"per_label_dropout", cfg.injector.per_label_dropout}};
    json attrs = json::array();
    for (const AttributeDecl& a : cfg.attributes) {
        attrs.push_back({{"name", a.name}, {"multi_label", a.multi_label}});
    }
    j["attributes"] = attrs;
    j["train"] = {{"learning_rate", cfg.plan.learning_rate},
                  {"total_steps", cfg.plan.total_steps},
                  {"warmup_steps", cfg.plan.warmup_steps},
                  {"batch_size", cfg.plan.batch_size},
                  {"weight_decay", cfg.plan.weight_decay},
                  {"seed", cfg.plan.seed},
                  {"freeze_policy", freeze_policy_to_string(cfg.plan.freeze_policy)},
                  {"r_drop", cfg.plan.r_drop},
                  {"eval_every", cfg.plan.eval_every},
                  {"lr_decay", cfg.plan.decay == LrDecay::Constant ? "constant" : "linear"},
                  {"grad_clip", cfg.plan.grad_clip}};
    j["data"] = {{"dir", cfg.data.dir},
                 {"train", cfg.data.train_file},
                 {"dev", cfg.data.dev_file},
                 {"test", cfg.data.test_file},
                 {"text_min_count", cfg.data.text_min_count},
                 {"n_tasks", cfg.data.n_tasks},
                 {"kfold", cfg.data.kfold}};
    j["max_param_bytes"] = cfg.max_param_bytes;
    return j.dump(2);
}

Experiment load_experiment(const ExperimentConfig& cfg) {
    if (cfg.data.dir.empty()) throw ConfigError("config.data.dir is required");
    Experiment exp;
    exp.config = cfg;

    Corpus& corpus = exp.corpus;
    corpus.text_min_count = cfg.data.text_min_count;
    for (const AttributeDecl& a : cfg.attributes) {
        corpus.attribute_names.push_back(a.name);
        corpus.attribute_multi_label.push_back(a.multi_label);
    }

    int64_t n_tasks = cfg.data.n_tasks;
    if (n_tasks <= 0) {
        n_tasks = 0;
        while (fs::exists(cfg.data.dir + "/labels_task" + std::to_string(n_tasks) + ".vocab")) {
            ++n_tasks;
        }
        if (n_tasks == 0) n_tasks = 1;
    }
    corpus.n_tasks = n_tasks;

    const std::string text_vocab_path = cfg.data.dir + "/text.vocab";
    if (fs::exists(text_vocab_path)) corpus.text = read_vocab_file(text_vocab_path);
    for (const AttributeDecl& a : cfg.attributes) {
        const std::string p = cfg.data.dir + "/attr_" + a.name + ".vocab";
        corpus.attr_vocabs.push_back(fs::exists(p) ? read_vocab_file(p) : Vocab{});
    }
    for (int64_t t = 0; t < n_tasks; ++t) {
        const std::string p = cfg.data.dir + "/labels_task" + std::to_string(t) + ".vocab";
        corpus.label_vocabs.push_back(fs::exists(p) ? read_vocab_file(p) : Vocab{});
    }

    exp.train = ingest_jsonl(cfg.data.dir + "/" + cfg.data.train_file, corpus, true);
    const std::string dev_path = cfg.data.dir + "/" + cfg.data.dev_file;
    if (fs::exists(dev_path)) exp.dev = ingest_jsonl(dev_path, corpus, false);
    const std::string test_path = cfg.data.dir + "/" + cfg.data.test_file;
    if (fs::exists(test_path)) exp.test = ingest_jsonl(test_path, corpus, false);
    return exp;
}

ModelConfig Experiment::model_config(ModelKind kind) const {
    ModelConfig mc;
    mc.kind = kind;
    mc.encoder = config.encoder;
    mc.encoder.vocab_size = corpus.text_vocab_size();
    mc.encoder.classifier.n_tasks = corpus.n_tasks;
    mc.encoder.classifier.class_counts.clear();
    for (const Vocab& v : corpus.label_vocabs) {
        mc.encoder.classifier.class_counts.push_back(std::max<int64_t>(v.size(), 2));
    }
    mc.encoder.classifier.class_weights = config.class_weights;
    mc.injector = config.injector;
    mc.injector.d_h = mc.encoder.d_h;
    mc.schema = corpus.schema(config.injector.d_z);
    return mc;
}

}  // namespace injector
