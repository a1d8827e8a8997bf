#include "injector/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "injector/checkpoint.hpp"
#include "injector/config.hpp"
#include "injector/errors.hpp"
#include "injector/generator.hpp"
#include "injector/grad_check.hpp"
#include "injector/train.hpp"
#include "json.hpp"

namespace injector {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

std::string new_run_id() {
    static uint64_t counter = 0;
    const auto ticks = static_cast<uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count());
    std::mt19937_64 mix(ticks ^ (++counter * 0x9e3779b97f4a7c15ull));
    std::ostringstream out;
    out << std::hex << mix();
    return out.str().substr(0, 12);
}

std::string output_root() {
    const char* root = std::getenv("INJECTOR_OUT_ROOT");
    return root != nullptr ? root : "runs";
}

std::string prepare_out_dir(const CliOptions& opts, const std::string& command,
                            const std::string& run_id) {
    std::string dir = opts.out_dir.empty() ? output_root() + "/" + command + "-" + run_id
                                           : opts.out_dir;
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& run_id, uint64_t seed, const std::string& config_path,
                    const std::string& started, bool ok) {
    json j;
    j["run_id"] = run_id;
    j["command"] = command;
    j["config"] = config_path;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["started_at"] = started;
    j["finished_at"] = timestamp();
    j["ok"] = ok;
    std::ofstream out(out_dir + "/manifest.json");
    out << j.dump(2) << '\n';
}

ExperimentConfig load_config(const CliOptions& opts) {
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = experiment_config_from_json_file(opts.config_path);
    if (opts.seed) cfg.plan.seed = *opts.seed;
    if (!opts.mode.empty()) cfg.kind = model_kind_from_string(opts.mode);
    return cfg;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricPoint>& log) {
    std::ofstream out(path);
    out << "step,split,loss,score\n";
    for (const MetricPoint& p : log) {
        out << p.step << ',' << p.split << ',' << p.loss << ',' << p.score << '\n';
    }
}

void write_predictions_csv(const std::string& path, const EvalResult& result,
                           const Dataset& dataset) {
    std::ofstream out(path);
    out << "index,task,prediction,label\n";
    for (size_t i = 0; i < result.predictions.size(); ++i) {
        for (size_t t = 0; t < result.predictions[i].size(); ++t) {
            out << i << ',' << t << ',' << result.predictions[i][t] << ','
                << dataset.instances[i].labels[t] << '\n';
        }
    }
}

}  // namespace

int cmd_generate_data(const std::string& spec_path, const std::string& out_dir,
                      std::optional<uint64_t> seed) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    GeneratorSpec spec = generator_spec_from_json_file(spec_path);
    if (seed) spec.seed = *seed;
    SyntheticData data = generate_synthetic(spec);
    write_synthetic(data, spec, out_dir);
    std::cout << "wrote " << spec.n_train << "/" << spec.n_dev << "/" << spec.n_test
              << " train/dev/test instances to " << out_dir << "\n";
    std::cout << "bayes_accuracy " << data.stats.bayes_accuracy << ", majority_class_rate "
              << data.stats.majority_class_rate << "\n";
    for (size_t a = 0; a < data.stats.percent_sparse.size(); ++a) {
        std::cout << "%sparse[" << data.corpus.attribute_names[a]
                  << "] = " << data.stats.percent_sparse[a] << "\n";
    }
    write_manifest(out_dir, "generate-data", run_id, spec.seed, spec_path, started, true);
    return 0;
}

int cmd_train(const CliOptions& opts) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    ExperimentConfig cfg = load_config(opts);
    const std::string out_dir = prepare_out_dir(opts, "train", run_id);
    {
        std::ofstream copy(out_dir + "/config.json");
        copy << experiment_config_to_json(cfg) << '\n';
    }

    Experiment exp = load_experiment(cfg);
    ModelConfig mc = exp.model_config();
    check_allocation_budget(mc, cfg.max_param_bytes);
    Model model(mc, cfg.plan.seed);

    const MetricKind metric = default_metric(mc.encoder.classifier);
    if (cfg.data.kfold > 1) {
        auto folds = kfold_split(exp.train.size(), cfg.data.kfold, cfg.plan.seed);
        double total = 0.0;
        std::vector<MetricPoint> merged_log;
        for (size_t f = 0; f < folds.size(); ++f) {
            Dataset fold_train, fold_test;
            for (size_t i : folds[f].first) fold_train.instances.push_back(exp.train.instances[i]);
            for (size_t i : folds[f].second) fold_test.instances.push_back(exp.train.instances[i]);
            Model fold_model(mc, cfg.plan.seed + f);
            TrainResult r = train(fold_model, fold_train, fold_test, cfg.plan);
            for (MetricPoint p : r.log) {
                p.split = "fold" + std::to_string(f) + "/" + p.split;
                merged_log.push_back(p);
            }
            const double score = evaluate(fold_model, fold_test, metric).score;
            total += score;
            std::cout << "fold " << f << " " << metric_kind_to_string(metric) << " " << score
                      << "\n";
        }
        std::cout << "mean " << metric_kind_to_string(metric) << " over " << folds.size()
                  << " folds: " << total / static_cast<double>(folds.size()) << "\n";
        write_metrics_csv(out_dir + "/metrics.csv", merged_log);
        write_manifest(out_dir, "train", run_id, cfg.plan.seed, opts.config_path, started, true);
        return 0;
    }

    TrainResult result = train(model, exp.train, exp.dev, cfg.plan);
    write_metrics_csv(out_dir + "/metrics.csv", result.log);
    save_model(out_dir + "/model.ckpt", model);

    std::cout << "best dev " << metric_kind_to_string(metric) << " " << result.best_dev_score
              << " at step " << result.best_step << "\n";
    if (!exp.test.empty()) {
        const EvalResult test = evaluate(model, exp.test, metric);
        std::cout << "test " << metric_kind_to_string(metric) << " " << test.score << "\n";
        write_predictions_csv(out_dir + "/test_predictions.csv", test, exp.test);
    }
    std::cout << "checkpoint " << out_dir << "/model.ckpt\n";
    write_manifest(out_dir, "train", run_id, cfg.plan.seed, opts.config_path, started, true);
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const CliOptions& opts) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    ExperimentConfig cfg = load_config(opts);
    if (!fs::exists(checkpoint_path)) throw ParseError("missing checkpoint '" + checkpoint_path + "'");
    const std::string out_dir = prepare_out_dir(opts, "eval", run_id);

    Experiment exp = load_experiment(cfg);
    ModelConfig mc = exp.model_config();
    Model model(mc, cfg.plan.seed);
    load_model(model, load_checkpoint(checkpoint_path));

    const MetricKind metric = default_metric(mc.encoder.classifier);
    const Dataset& dataset = exp.test.empty() ? exp.dev : exp.test;
    if (dataset.empty()) throw ConfigError("no dev or test split to evaluate");
    const EvalResult result = evaluate(model, dataset, metric);
    std::cout << metric_kind_to_string(metric) << " " << result.score << " (mean loss "
              << result.mean_loss << ", " << dataset.size() << " instances)\n";
    write_predictions_csv(out_dir + "/predictions.csv", result, dataset);
    write_manifest(out_dir, "eval", run_id, cfg.plan.seed, opts.config_path, started, true);
    return 0;
}

int cmd_param_count(const CliOptions& opts, bool naive) {
    ExperimentConfig cfg = load_config(opts);
    InjectorConfig icfg = cfg.injector;
    if (icfg.d_h <= 0) icfg.d_h = cfg.encoder.d_h;
    const int64_t o2 = icfg.hyper_dims * icfg.hyper_dims;
    if (icfg.hyper_dims < 1 || icfg.d_h % o2 != 0) {
        throw ConfigError("O^2 must divide d_h: O=" + std::to_string(icfg.hyper_dims) +
                          ", d_h=" + std::to_string(icfg.d_h));
    }
    const ParamCountReport report = count_parameters(icfg, naive);
    std::cout << report.table();
    return 0;
}

int cmd_analyze_sparsity(const std::vector<std::string>& checkpoint_paths, const CliOptions& opts,
                         const std::string& attribute, int64_t n_bins) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    ExperimentConfig cfg = load_config(opts);
    const std::string out_dir = prepare_out_dir(opts, "analyze-sparsity", run_id);

    Experiment exp = load_experiment(cfg);
    const int64_t attr = exp.corpus.schema(cfg.injector.d_z).index_of(attribute);
    if (attr < 0) throw ConfigError("attribute '" + attribute + "' not in schema");

    std::vector<AttributeAssignment> train_assignments;
    for (const Instance& inst : exp.train.instances) train_assignments.push_back(inst.attributes);
    const SparsityProfile profile =
        sparsity_profile(train_assignments, exp.corpus.schema(cfg.injector.d_z));
    const auto bins = bin_by_sparsity(exp.test, attr, profile.counts[static_cast<size_t>(attr)],
                                      n_bins);

    for (const std::string& path : checkpoint_paths) {
        ModelConfig mc = exp.model_config();
        Model model(mc, cfg.plan.seed);
        load_model(model, load_checkpoint(path));
        const MetricKind metric = default_metric(mc.encoder.classifier);
        const std::string csv_path =
            out_dir + "/sparsity_" + fs::path(path).stem().string() + ".csv";
        std::ofstream csv(csv_path);
        csv << "bin_index,n_examples,accuracy\n";
        for (size_t b = 0; b < bins.size(); ++b) {
            const EvalResult r = evaluate_subset(model, exp.test, bins[b], metric);
            csv << b << ',' << bins[b].size() << ',' << r.score << '\n';
        }
        std::cout << "wrote " << csv_path << "\n";
    }
    write_manifest(out_dir, "analyze-sparsity", run_id, cfg.plan.seed, opts.config_path, started,
                   true);
    return 0;
}

int cmd_ablate(const CliOptions& opts) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    ExperimentConfig cfg = load_config(opts);
    const std::string out_dir = prepare_out_dir(opts, "ablate", run_id);

    Experiment exp = load_experiment(cfg);
    const ModelConfig mc = exp.model_config(ModelKind::Injector);
    const auto rows =
        run_ablation(mc, cfg.plan, exp.train, exp.dev, exp.test, cfg.max_param_bytes);

    std::ofstream csv(out_dir + "/ablation.csv");
    csv << "variant,score,status\n";
    for (const AblationRow& row : rows) {
        const std::string status = row.oom ? "OOM" : "ok";
        csv << '"' << row.name << "\"," << (row.oom ? std::string("") : std::to_string(row.score))
            << ',' << status << '\n';
        std::cout << row.name << " : " << (row.oom ? "OOM" : std::to_string(row.score)) << "\n";
    }
    write_manifest(out_dir, "ablate", run_id, cfg.plan.seed, opts.config_path, started, true);
    return 0;
}

int cmd_transfer(const CliOptions& opts) {
    const std::string started = timestamp();
    const std::string run_id = new_run_id();
    ExperimentConfig cfg = load_config(opts);
    const std::string out_dir = prepare_out_dir(opts, "transfer", run_id);

    Experiment exp = load_experiment(cfg);
    std::vector<int64_t> source_tasks = cfg.transfer_source_tasks;
    if (source_tasks.empty()) {
        for (int64_t t = 0; t < exp.corpus.n_tasks; ++t) {
            if (t != cfg.transfer_target_task) source_tasks.push_back(t);
        }
    }
    if (source_tasks.empty()) throw ConfigError("transfer requires at least one source task");

    const ModelConfig mc = exp.model_config(ModelKind::Injector);
    const TransferOutcome outcome = transfer_experiment(
        mc, exp.train, exp.dev, exp.test, source_tasks, cfg.transfer_target_task, cfg.plan);

    const double delta_pct = (outcome.transferred - outcome.direct) * 100.0;
    std::cout << "direct " << outcome.direct << "\n";
    std::cout << "transferred " << outcome.transferred << " (" << (delta_pct >= 0 ? "+" : "")
              << delta_pct << " points)\n";
    std::cout << "frozen attribute tensors unchanged: "
              << (outcome.frozen_attr_bit_identical ? "yes" : "NO") << "\n";

    std::ofstream csv(out_dir + "/transfer.csv");
    csv << "direct,transferred,delta_points,frozen_unchanged\n";
    csv << outcome.direct << ',' << outcome.transferred << ',' << delta_pct << ','
        << (outcome.frozen_attr_bit_identical ? 1 : 0) << '\n';
    write_manifest(out_dir, "transfer", run_id, cfg.plan.seed, opts.config_path, started, true);
    return outcome.frozen_attr_bit_identical ? 0 : 1;
}

int cmd_grad_check(const CliOptions& opts) {
    // Full reverse-mode check of a small injected encoder in 64-bit mode.
    ModelConfig mc;
    mc.kind = ModelKind::Injector;
    mc.encoder.vocab_size = 12;
    mc.encoder.max_len = 8;
    mc.encoder.d_h = 16;
    mc.encoder.n_layers = 1;
    mc.encoder.n_heads = 2;
    mc.encoder.d_ff = 24;
    mc.encoder.dropout_rate = 0.0;
    mc.encoder.classifier.n_tasks = 1;
    mc.encoder.classifier.class_counts = {3};
    mc.injector.d_h = 16;
    mc.injector.d_a = 4;
    mc.injector.d_z = 8;
    mc.injector.hyper_dims = 2;
    mc.schema.d_z = 8;
    mc.schema.attributes = {{"a", 5, false}, {"b", 6, true}};

    uint64_t seed = opts.seed ? *opts.seed : 7;
    Model model(mc, seed);
    // give the zero-initialized up-projections nonzero values so every path
    // carries gradient
    std::mt19937_64 rng(seed + 1);
    for (const Var& p : model.params().all()) {
        bool all_zero = true;
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            if (p->value[i] != 0.0) {
                all_zero = false;
                break;
            }
        }
        if (all_zero) init_tensor(p->value, InitKind::ScaledUniform, p->value.cols(), rng);
    }

    const std::vector<int64_t> tokens = {3, 5, 7, 9};
    AttributeAssignment assignment = AttributeAssignment::empty_for(mc.schema);
    assignment.set(0, {2});
    assignment.set(1, {1, 4});

    auto computation = [&](Tape& tape) {
        std::mt19937_64 unused(0);
        std::vector<Var> logits = model.forward(tape, tokens, assignment, false, unused);
        return cross_entropy(tape, logits[0], 1);
    };
    const GradCheckReport report = grad_check(computation, model.params().all(), 1e-5);
    std::cout << report.summary() << "\n";
    const bool ok = report.pass(1e-4);
    std::cout << (ok ? "PASS" : "FAIL") << " (tolerance 1e-4)\n";
    return ok ? 0 : 1;
}

}  // namespace injector
