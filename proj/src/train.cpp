#include "injector/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "injector/checkpoint.hpp"
#include "injector/errors.hpp"

namespace injector {

MetricKind default_metric(const ClassifierConfig& cfg) {
    if (cfg.n_tasks > 1) return MetricKind::MultiTaskMeanAccuracy;
    if (cfg.weighted(0)) return MetricKind::F1;
    return MetricKind::Accuracy;
}

namespace {

double instance_loss_value(const std::vector<Var>& logits, const std::vector<int64_t>& labels) {
    double total = 0.0;
    for (size_t t = 0; t < logits.size(); ++t) {
        const Tensor& l = logits[t]->value;
        double mx = l[0];
        for (int64_t j = 1; j < l.numel(); ++j) mx = std::max(mx, l[j]);
        double z = 0.0;
        for (int64_t j = 0; j < l.numel(); ++j) z += std::exp(l[j] - mx);
        total += mx + std::log(z) - l[labels[t]];
    }
    return total / static_cast<double>(logits.size());
}

}  // namespace

EvalResult evaluate_subset(Model& model, const Dataset& dataset, const std::vector<size_t>& indices,
                           MetricKind metric) {
    EvalResult result;
    std::vector<std::vector<int64_t>> gold;
    std::mt19937_64 unused(0);
    for (size_t idx : indices) {
        const Instance& inst = dataset.instances[idx];
        Tape tape;
        std::vector<Var> logits = model.forward(tape, inst.tokens, inst.attributes, false, unused);
        std::vector<int64_t> pred;
        for (const Var& l : logits) {
            int64_t best = 0;
            for (int64_t c = 1; c < l->value.numel(); ++c) {
                if (l->value[c] > l->value[best]) best = c;
            }
            pred.push_back(best);
        }
        result.mean_loss += instance_loss_value(logits, inst.labels);
        result.predictions.push_back(std::move(pred));
        gold.push_back(inst.labels);
    }
    if (!indices.empty()) result.mean_loss /= static_cast<double>(indices.size());
    result.score = metric_score(result.predictions, gold, metric);
    return result;
}

EvalResult evaluate(Model& model, const Dataset& dataset, MetricKind metric) {
    std::vector<size_t> indices(dataset.size());
    std::iota(indices.begin(), indices.end(), 0);
    return evaluate_subset(model, dataset, indices, metric);
}

Dataset mask_all_attributes(const Dataset& dataset) {
    Dataset masked = dataset;
    for (Instance& inst : masked.instances) {
        for (auto& ids : inst.attributes.labels) ids.clear();
    }
    return masked;
}

Dataset select_tasks(const Dataset& dataset, const std::vector<int64_t>& tasks) {
    Dataset out = dataset;
    for (Instance& inst : out.instances) {
        std::vector<int64_t> labels;
        labels.reserve(tasks.size());
        for (int64_t t : tasks) labels.push_back(inst.labels[static_cast<size_t>(t)]);
        inst.labels = std::move(labels);
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> model_tensors(const Model& model) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const Var& p : model.params().all()) out.emplace_back(p->name, &p->value);
    return out;
}

void save_model(const std::string& path, const Model& model) {
    save_checkpoint(path, model_tensors(model));
}

void load_model(Model& model, const std::map<std::string, Tensor>& tensors) {
    for (const Var& p : model.params().all()) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) throw ParseError("checkpoint misses tensor '" + p->name + "'");
        if (it->second.shape() != p->value.shape()) {
            throw ShapeError("checkpoint tensor '" + p->name + "' has shape " +
                             shape_str(it->second.shape()) + ", model expects " +
                             shape_str(p->value.shape()));
        }
        p->value = it->second;
    }
}

void check_allocation_budget(const ModelConfig& cfg, int64_t max_param_bytes) {
    const int64_t elements = plan_total_elements(Model::parameter_plan(cfg));
    const int64_t bytes = elements * static_cast<int64_t>(sizeof(double));
    if (max_param_bytes > 0 && bytes > max_param_bytes) {
        throw AllocationBudgetError("model needs " + std::to_string(bytes) +
                                    " parameter bytes, budget is " +
                                    std::to_string(max_param_bytes));
    }
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainPlan& plan) {
    plan.validate();
    if (train_set.empty()) throw ConfigError("empty training set");

    TrainResult result;
    std::vector<Var> trainable =
        apply_freeze_policy(model, plan.freeze_policy, model.config().encoder.train_layer_norm);
    AdamWState state = AdamWState::init_for(trainable);
    std::mt19937_64 rng(plan.seed);

    const MetricKind metric = default_metric(model.config().encoder.classifier);
    const bool drop_attributes =
        model.config().kind == ModelKind::Injector && plan.r_drop > 0.0;

    auto snapshot = [&model] {
        std::map<std::string, Tensor> snap;
        for (const Var& p : model.params().all()) snap.emplace(p->name, p->value);
        return snap;
    };

    result.best_params = snapshot();
    result.best_step = 0;
    if (!dev_set.empty()) {
        result.best_dev_score = evaluate(model, dev_set, metric).score;
        result.log.push_back({0, "dev", 0.0, result.best_dev_score});
    }

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t cursor = 0;

    for (int64_t step = 1; step <= plan.total_steps; ++step) {
        for (const Var& p : trainable) p->zero_grad();

        Tape tape;
        std::vector<std::vector<Var>> logits;
        std::vector<std::vector<int64_t>> labels;
        for (int64_t b = 0; b < plan.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const Instance& inst = train_set.instances[order[cursor++]];
            AttributeAssignment assignment =
                drop_attributes ? apply_attribute_dropout(inst.attributes, plan.r_drop, rng,
                                                          model.config().injector.per_label_dropout)
                                : inst.attributes;
            logits.push_back(model.forward(tape, inst.tokens, assignment, true, rng));
            labels.push_back(inst.labels);
        }
        Var loss = batch_loss(tape, logits, labels, model.config().encoder.classifier);
        const double loss_value = loss->value[0];
        if (!std::isfinite(loss_value)) {
            throw NumericError("training diverged: loss " + std::to_string(loss_value) + " at step " +
                               std::to_string(step));
        }
        tape.backward(loss);
        adamw_step(trainable, state, plan, step);

        if (step % plan.eval_every == 0 || step == plan.total_steps) {
            result.log.push_back({step, "train", loss_value, 0.0});
            if (!dev_set.empty()) {
                const EvalResult dev = evaluate(model, dev_set, metric);
                result.log.push_back({step, "dev", dev.mean_loss, dev.score});
                if (dev.score > result.best_dev_score) {
                    result.best_dev_score = dev.score;
                    result.best_step = step;
                    result.best_params = snapshot();
                }
            }
        }
    }

    if (!dev_set.empty()) {
        load_model(model, result.best_params);
    } else {
        result.best_params = snapshot();
        result.best_step = plan.total_steps;
    }
    return result;
}

TransferOutcome transfer_experiment(const ModelConfig& base_cfg, const Dataset& train_set,
                                    const Dataset& dev_set, const Dataset& test_set,
                                    const std::vector<int64_t>& source_tasks, int64_t target_task,
                                    const TrainPlan& plan) {
    if (base_cfg.kind != ModelKind::Injector) {
        throw ConfigError("transfer experiment requires the injector model");
    }
    const ClassifierConfig& base_cls = base_cfg.encoder.classifier;
    for (int64_t t : source_tasks) {
        if (t < 0 || t >= base_cls.n_tasks) throw ConfigError("source task out of range");
    }
    if (target_task < 0 || target_task >= base_cls.n_tasks) {
        throw ConfigError("target task out of range");
    }

    auto task_config = [&](const std::vector<int64_t>& tasks) {
        ModelConfig cfg = base_cfg;
        cfg.encoder.classifier.n_tasks = static_cast<int64_t>(tasks.size());
        cfg.encoder.classifier.class_counts.clear();
        cfg.encoder.classifier.class_weights.clear();
        for (int64_t t : tasks) {
            cfg.encoder.classifier.class_counts.push_back(
                base_cls.class_counts[static_cast<size_t>(t)]);
            if (!base_cls.class_weights.empty()) {
                cfg.encoder.classifier.class_weights.push_back(
                    base_cls.class_weights[static_cast<size_t>(t)]);
            }
        }
        return cfg;
    };

    // Disjoint training shares per task, as in the modularity protocol.
    std::mt19937_64 rng(plan.seed);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const size_t share = train_set.size() / static_cast<size_t>(base_cls.n_tasks);

    auto share_of = [&](int64_t task) {
        Dataset d;
        const size_t begin = static_cast<size_t>(task) * share;
        for (size_t i = begin; i < begin + share; ++i) {
            d.instances.push_back(train_set.instances[order[i]]);
        }
        return d;
    };

    Dataset source_train;
    for (int64_t t : source_tasks) {
        Dataset s = share_of(t);
        source_train.instances.insert(source_train.instances.end(), s.instances.begin(),
                                      s.instances.end());
    }
    source_train = select_tasks(source_train, source_tasks);
    const Dataset source_dev = select_tasks(dev_set, source_tasks);

    TrainPlan source_plan = plan;
    source_plan.freeze_policy = FreezePolicy::BackboneFrozen;
    Model source_model(task_config(source_tasks), plan.seed);
    train(source_model, source_train, source_dev, source_plan);

    const std::vector<int64_t> target_only{target_task};
    const Dataset target_train = select_tasks(share_of(target_task), target_only);
    const Dataset target_dev = select_tasks(dev_set, target_only);
    const Dataset target_test = select_tasks(test_set, target_only);
    const MetricKind metric = MetricKind::Accuracy;

    TransferOutcome outcome;
    {
        TrainPlan direct_plan = plan;
        direct_plan.freeze_policy = FreezePolicy::BackboneFrozen;
        Model direct_model(task_config(target_only), plan.seed);
        train(direct_model, target_train, target_dev, direct_plan);
        outcome.direct = evaluate(direct_model, target_test, metric).score;
    }
    {
        Model transfer_model(task_config(target_only), plan.seed);
        // move the attribute-specific pieces across, then freeze them
        for (const Var& p : transfer_model.params().all()) {
            const ParamCategory cat = transfer_model.params().category_of(p->name);
            if (cat == ParamCategory::InjectorAttr || cat == ParamCategory::AttrEmbedding) {
                p->value = source_model.params().get(p->name)->value;
            }
        }
        std::map<std::string, Tensor> before;
        for (const Var& p : transfer_model.params().all()) {
            const ParamCategory cat = transfer_model.params().category_of(p->name);
            if (cat == ParamCategory::InjectorAttr || cat == ParamCategory::AttrEmbedding) {
                before.emplace(p->name, p->value);
            }
        }
        TrainPlan transfer_plan = plan;
        transfer_plan.freeze_policy = FreezePolicy::BackboneAndAttrFrozen;
        train(transfer_model, target_train, target_dev, transfer_plan);
        outcome.transferred = evaluate(transfer_model, target_test, metric).score;
        outcome.frozen_attr_bit_identical = true;
        for (const auto& [name, tensor] : before) {
            if (!bitwise_equal(tensor, transfer_model.params().get(name)->value)) {
                outcome.frozen_attr_bit_identical = false;
                break;
            }
        }
    }
    return outcome;
}

std::vector<AblationRow> run_ablation(const ModelConfig& base_cfg, const TrainPlan& plan,
                                      const Dataset& train_set, const Dataset& dev_set,
                                      const Dataset& test_set, int64_t max_param_bytes) {
    struct Variant {
        std::string name;
        std::function<void(ModelConfig&, TrainPlan&)> tweak;
    };
    const std::vector<Variant> variants = {
        {"full", [](ModelConfig&, TrainPlan&) {}},
        {"- bias injection",
         [](ModelConfig& c, TrainPlan&) { c.injector.injection = InjectionMode::WeightOnly; }},
        {"- weight injection",
         [](ModelConfig& c, TrainPlan&) { c.injector.injection = InjectionMode::BiasOnly; }},
        {"- task adapter", [](ModelConfig& c, TrainPlan&) { c.injector.task_adapter = false; }},
        {"- attribute drop",
         [](ModelConfig& c, TrainPlan& p) {
             c.injector.r_drop = 0.0;
             p.r_drop = 0.0;
         }},
        {"- post-aggregation",
         [](ModelConfig& c, TrainPlan&) { c.injector.aggregation = Aggregation::Pre; }},
        {"- low-rank",
         [](ModelConfig& c, TrainPlan&) { c.injector.synthesis = SynthesisMode::Naive; }},
        {"- PHM",
         [](ModelConfig& c, TrainPlan&) { c.injector.synthesis = SynthesisMode::LowRankOnly; }},
    };

    const MetricKind metric = default_metric(base_cfg.encoder.classifier);
    std::vector<AblationRow> rows;
    for (const Variant& variant : variants) {
        ModelConfig cfg = base_cfg;
        TrainPlan vplan = plan;
        variant.tweak(cfg, vplan);
        AblationRow row;
        row.name = variant.name;
        try {
            check_allocation_budget(cfg, max_param_bytes);
            Model model(cfg, vplan.seed);
            train(model, train_set, dev_set, vplan);
            row.score = evaluate(model, test_set, metric).score;
        } catch (const AllocationBudgetError&) {
            row.oom = true;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace injector
