#include "injector/layers.hpp"

#include <sstream>

#include "injector/errors.hpp"

namespace injector {

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "post") return Aggregation::Post;
    if (s == "pre") return Aggregation::Pre;
    throw ConfigError("unknown aggregation mode '" + s + "' (expected post|pre)");
}

InjectionMode injection_from_string(const std::string& s) {
    if (s == "bias+weight") return InjectionMode::BiasAndWeight;
    if (s == "bias_only") return InjectionMode::BiasOnly;
    if (s == "weight_only") return InjectionMode::WeightOnly;
    throw ConfigError("unknown injection mode '" + s + "'");
}

SynthesisMode synthesis_from_string(const std::string& s) {
    if (s == "phm") return SynthesisMode::Phm;
    if (s == "lowrank_only") return SynthesisMode::LowRankOnly;
    if (s == "naive") return SynthesisMode::Naive;
    throw ConfigError("unknown synthesis mode '" + s + "'");
}

void InjectorConfig::validate() const {
    if (d_h <= 0 || d_a <= 0 || d_z <= 0) throw ConfigError("injector dims must be positive");
    if (d_a >= d_h) {
        throw ConfigError("adapter bottleneck d_a=" + std::to_string(d_a) +
                          " must be smaller than d_h=" + std::to_string(d_h));
    }
    if (hyper_dims < 1) throw ConfigError("hypercomplex dimension count must be >= 1");
    if (d_h % (hyper_dims * hyper_dims) != 0) {
        throw ConfigError("O^2 must divide d_h: O=" + std::to_string(hyper_dims) +
                          ", d_h=" + std::to_string(d_h));
    }
    if (r_drop < 0.0 || r_drop > 1.0) throw ConfigError("r_drop must be in [0,1]");
}

std::vector<ParamPlanEntry> task_adapter_plan(const std::string& prefix, const InjectorConfig& cfg) {
    const auto cat = ParamCategory::InjectorTask;
    return {
        {prefix + ".down_w", {cfg.d_h, cfg.d_a}, cat, InitKind::ScaledUniform, cfg.d_h},
        {prefix + ".down_b", {cfg.d_a}, cat, InitKind::Zero},
        {prefix + ".up_w", {cfg.d_a, cfg.d_h}, cat, InitKind::Zero},
        {prefix + ".up_b", {cfg.d_h}, cat, InitKind::Zero},
    };
}

std::vector<ParamPlanEntry> attr_adapter_plan(const std::string& prefix, const InjectorConfig& cfg) {
    const auto cat = ParamCategory::InjectorAttr;
    std::vector<ParamPlanEntry> plan;
    switch (cfg.synthesis) {
        case SynthesisMode::Phm:
            for (int64_t o = 1; o <= cfg.hyper_dims; ++o) {
                plan.push_back({prefix + ".sigma_" + std::to_string(o), {cfg.d_z, cfg.d_a}, cat,
                                InitKind::ScaledUniform, cfg.d_z});
            }
            for (int64_t o = 1; o <= cfg.hyper_dims; ++o) {
                plan.push_back({prefix + ".s_" + std::to_string(o), {cfg.kron_cols()}, cat,
                                InitKind::ScaledUniform, cfg.kron_cols()});
            }
            for (int64_t o = 1; o <= cfg.hyper_dims; ++o) {
                plan.push_back({prefix + ".A_" + std::to_string(o), {cfg.hyper_dims, cfg.hyper_dims},
                                cat, InitKind::ScaledUniform, cfg.hyper_dims});
            }
            break;
        case SynthesisMode::LowRankOnly:
            plan.push_back(
                {prefix + ".sigma_1", {cfg.d_z, cfg.d_a}, cat, InitKind::ScaledUniform, cfg.d_z});
            plan.push_back({prefix + ".s_1", {cfg.d_h}, cat, InitKind::ScaledUniform, cfg.d_h});
            break;
        case SynthesisMode::Naive:
            plan.push_back({prefix + ".naive_w", {cfg.d_z, cfg.d_h * cfg.d_a}, cat,
                            InitKind::ScaledUniform, cfg.d_z});
            break;
    }
    plan.push_back({prefix + ".C_weight", {cfg.d_h, cfg.d_a}, cat, InitKind::ScaledUniform, cfg.d_h});
    plan.push_back({prefix + ".g_bias", {cfg.d_z, cfg.d_a}, cat, InitKind::ScaledUniform, cfg.d_z});
    plan.push_back({prefix + ".c_bias", {cfg.d_a}, cat, InitKind::Zero});
    plan.push_back({prefix + ".up_w", {cfg.d_a, cfg.d_h}, cat, InitKind::Zero});
    plan.push_back({prefix + ".up_b", {cfg.d_h}, cat, InitKind::Zero});
    return plan;
}

std::vector<ParamPlanEntry> injector_block_plan(const std::string& prefix, const InjectorConfig& cfg,
                                                int64_t n_attributes) {
    std::vector<ParamPlanEntry> plan;
    if (cfg.task_adapter) {
        auto task = task_adapter_plan(prefix + ".task", cfg);
        plan.insert(plan.end(), task.begin(), task.end());
    }
    for (int64_t j = 0; j < n_attributes; ++j) {
        auto attr = attr_adapter_plan(prefix + ".attr" + std::to_string(j), cfg);
        plan.insert(plan.end(), attr.begin(), attr.end());
    }
    return plan;
}

TaskAdapter bind_task_adapter(const ParamRegistry& params, const std::string& prefix) {
    return TaskAdapter{params.get(prefix + ".down_w"), params.get(prefix + ".down_b"),
                       params.get(prefix + ".up_w"), params.get(prefix + ".up_b")};
}

AttrAdapter bind_attr_adapter(const ParamRegistry& params, const std::string& prefix,
                              const InjectorConfig& cfg) {
    AttrAdapter adapter;
    switch (cfg.synthesis) {
        case SynthesisMode::Phm:
            for (int64_t o = 1; o <= cfg.hyper_dims; ++o) {
                adapter.synthesizer.sigma.push_back(params.get(prefix + ".sigma_" + std::to_string(o)));
                adapter.synthesizer.s.push_back(params.get(prefix + ".s_" + std::to_string(o)));
                adapter.synthesizer.A.push_back(params.get(prefix + ".A_" + std::to_string(o)));
            }
            break;
        case SynthesisMode::LowRankOnly:
            adapter.synthesizer.sigma.push_back(params.get(prefix + ".sigma_1"));
            adapter.synthesizer.s.push_back(params.get(prefix + ".s_1"));
            break;
        case SynthesisMode::Naive:
            adapter.synthesizer.naive_w = params.get(prefix + ".naive_w");
            break;
    }
    adapter.synthesizer.C_weight = params.get(prefix + ".C_weight");
    adapter.synthesizer.g_bias = params.get(prefix + ".g_bias");
    adapter.synthesizer.c_bias = params.get(prefix + ".c_bias");
    adapter.up_w = params.get(prefix + ".up_w");
    adapter.up_b = params.get(prefix + ".up_b");
    return adapter;
}

InjectorBlock bind_injector_block(const ParamRegistry& params, const std::string& prefix,
                                  const InjectorConfig& cfg, int64_t n_attributes) {
    InjectorBlock block;
    if (cfg.task_adapter) block.task = bind_task_adapter(params, prefix + ".task");
    for (int64_t j = 0; j < n_attributes; ++j) {
        block.attrs.push_back(bind_attr_adapter(params, prefix + ".attr" + std::to_string(j), cfg));
    }
    return block;
}

Var adapt(Tape& tape, const Var& h, const TaskAdapter& adapter, Activation act) {
    Var down = add_bias(tape, matmul(tape, h, adapter.down_w), adapter.down_b);
    Var up = add_bias(tape, matmul(tape, activate(tape, down, act), adapter.up_w), adapter.up_b);
    return add(tape, up, h);
}

std::vector<Var> hypercomplex_project(Tape& tape, const Var& z, const std::vector<Var>& sigma) {
    std::vector<Var> components;
    components.reserve(sigma.size());
    for (const Var& proj : sigma) components.push_back(matmul(tape, z, proj));
    return components;
}

Var low_rank_outer(Tape& tape, const Var& zhat, const Var& s) {
    Var u = zhat->value.is_vector() ? zhat : reshape(tape, zhat, {zhat->value.numel()});
    return outer(tape, u, s);
}

Var kron_expand(Tape& tape, const Var& S, const Var& A, int64_t d_h, int64_t d_a) {
    if (!S->value.is_matrix() || !A->value.is_matrix()) {
        throw ShapeError("kron_expand expects matrices");
    }
    if (S->value.numel() * A->value.numel() != d_h * d_a) {
        throw ShapeError("kron_expand element count " +
                         std::to_string(S->value.numel() * A->value.numel()) +
                         " does not match d_h*d_a = " + std::to_string(d_h * d_a));
    }
    return reshape(tape, tanh_op(tape, kron(tape, S, A)), {d_h, d_a});
}

Var g_weight_sum(Tape& tape, const Var& z, const PhmSynthesizer& syn, const InjectorConfig& cfg) {
    std::vector<Var> zhats = hypercomplex_project(tape, z, syn.sigma);
    Var acc;
    for (size_t o = 0; o < zhats.size(); ++o) {
        Var term = kron_expand(tape, low_rank_outer(tape, zhats[o], syn.s[o]), syn.A[o], cfg.d_h,
                               cfg.d_a);
        acc = acc ? add(tape, acc, term) : term;
    }
    return acc;
}

Var g_weight(Tape& tape, const Var& z, const PhmSynthesizer& syn, const InjectorConfig& cfg) {
    switch (cfg.synthesis) {
        case SynthesisMode::Phm:
            return g_weight_sum(tape, z, syn, cfg);
        case SynthesisMode::LowRankOnly: {
            Var zhat = matmul(tape, z, syn.sigma[0]);
            Var flat = tanh_op(tape, low_rank_outer(tape, zhat, syn.s[0]));
            return reshape(tape, flat, {cfg.d_h, cfg.d_a});
        }
        case SynthesisMode::Naive:
            return reshape(tape, matmul(tape, z, syn.naive_w), {cfg.d_h, cfg.d_a});
    }
    throw ConfigError("unreachable synthesis mode");
}

namespace {
Var sum_embeddings(Tape& tape, const std::vector<Var>& z_embs) {
    Var acc = z_embs[0];
    for (size_t k = 1; k < z_embs.size(); ++k) acc = add(tape, acc, z_embs[k]);
    return acc;
}
}  // namespace

Var synthesize_bias(Tape& tape, const std::vector<Var>& z_embs, const PhmSynthesizer& syn,
                    Aggregation mode) {
    if (z_embs.empty()) return syn.c_bias;
    Var projected;
    if (mode == Aggregation::Post) {
        for (const Var& z : z_embs) {
            Var term = matmul(tape, z, syn.g_bias);
            projected = projected ? add(tape, projected, term) : term;
        }
    } else {
        projected = matmul(tape, sum_embeddings(tape, z_embs), syn.g_bias);
    }
    return add(tape, reshape(tape, projected, {projected->value.numel()}), syn.c_bias);
}

Var synthesize_weight(Tape& tape, const std::vector<Var>& z_embs, const PhmSynthesizer& syn,
                      const InjectorConfig& cfg) {
    if (z_embs.empty()) return syn.C_weight;
    Var synthesized;
    if (cfg.aggregation == Aggregation::Post) {
        for (const Var& z : z_embs) {
            Var term = g_weight(tape, z, syn, cfg);
            synthesized = synthesized ? add(tape, synthesized, term) : term;
        }
    } else {
        synthesized = g_weight(tape, sum_embeddings(tape, z_embs), syn, cfg);
    }
    return add(tape, synthesized, syn.C_weight);
}

Var attr_adapt(Tape& tape, const Var& h, const std::vector<Var>& z_embs, const AttrAdapter& adapter,
               const InjectorConfig& cfg) {
    const PhmSynthesizer& syn = adapter.synthesizer;
    Var weight = cfg.injection == InjectionMode::BiasOnly
                     ? syn.C_weight
                     : synthesize_weight(tape, z_embs, syn, cfg);
    Var bias = cfg.injection == InjectionMode::WeightOnly
                   ? syn.c_bias
                   : synthesize_bias(tape, z_embs, syn, cfg.aggregation);
    Var down = add_bias(tape, matmul(tape, h, weight), bias);
    Var up = add_bias(tape, matmul(tape, activate(tape, down, cfg.activation), adapter.up_w),
                      adapter.up_b);
    return add(tape, up, h);
}

Var inject(Tape& tape, const Var& h, const AttributeAssignment& assignment,
           const InjectorBlock& block, const AttributeEmbeddingTable& tables,
           const InjectorConfig& cfg, const AttributeSchema& schema) {
    assignment.validate(schema);
    if (static_cast<int64_t>(block.attrs.size()) != schema.count()) {
        throw ConfigError("injector block has " + std::to_string(block.attrs.size()) +
                          " attribute adapters, schema has " + std::to_string(schema.count()));
    }
    Var current = block.task ? adapt(tape, h, *block.task, cfg.activation) : h;
    for (int64_t j = 0; j < schema.count(); ++j) {
        std::vector<Var> z_embs = lookup(tape, tables, assignment, j);
        current = attr_adapt(tape, current, z_embs, block.attrs[static_cast<size_t>(j)], cfg);
    }
    return current;
}

ParamCountReport count_parameters(const InjectorConfig& cfg, bool naive) {
    ParamCountReport report;
    const int64_t o = cfg.hyper_dims;
    report.naive_weight_synthesis = cfg.d_z * cfg.d_h * cfg.d_a;
    report.phm_weight_synthesis = o * (cfg.d_z * cfg.d_a + cfg.d_h / (o * o) + o * o);
    report.naive_to_phm_ratio = static_cast<double>(report.naive_weight_synthesis) /
                                static_cast<double>(report.phm_weight_synthesis);

    auto& c = report.components;
    if (naive) {
        c["weight_synthesis(naive_w)"] = report.naive_weight_synthesis;
    } else {
        switch (cfg.synthesis) {
            case SynthesisMode::Phm:
                c["weight_synthesis.sigma"] = o * cfg.d_z * cfg.d_a;
                c["weight_synthesis.s"] = o * (cfg.d_h / (o * o));
                c["weight_synthesis.A"] = o * o * o;
                break;
            case SynthesisMode::LowRankOnly:
                c["weight_synthesis.sigma"] = cfg.d_z * cfg.d_a;
                c["weight_synthesis.s"] = cfg.d_h;
                break;
            case SynthesisMode::Naive:
                c["weight_synthesis(naive_w)"] = report.naive_weight_synthesis;
                break;
        }
    }
    c["C_weight"] = cfg.d_h * cfg.d_a;
    c["bias_path.g_bias"] = cfg.d_z * cfg.d_a;
    c["bias_path.c_bias"] = cfg.d_a;
    c["up_projection"] = cfg.d_a * cfg.d_h + cfg.d_h;
    report.attr_adapter_total = 0;
    for (const auto& [name, count] : c) report.attr_adapter_total += count;
    report.task_adapter_total = cfg.d_h * cfg.d_a + cfg.d_a + cfg.d_a * cfg.d_h + cfg.d_h;
    c["task_adapter"] = report.task_adapter_total;
    return report;
}

std::string ParamCountReport::table() const {
    std::ostringstream out;
    out << "weight-synthesis parameters per attribute\n";
    out << "  naive projection : " << naive_weight_synthesis << "\n";
    out << "  phm synthesis    : " << phm_weight_synthesis << "\n";
    out << "  naive/phm ratio  : " << naive_to_phm_ratio << "\n";
    out << "per-component element counts (one injector position)\n";
    for (const auto& [name, count] : components) {
        out << "  " << name << " : " << count << "\n";
    }
    out << "  attr adapter total (one attribute) : " << attr_adapter_total << "\n";
    return out.str();
}

}  // namespace injector
