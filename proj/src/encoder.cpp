#include "injector/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "injector/errors.hpp"

namespace injector {

void ClassifierConfig::validate() const {
    if (n_tasks < 1) throw ConfigError("classifier needs at least one task");
    if (static_cast<int64_t>(class_counts.size()) != n_tasks) {
        throw ConfigError("class_counts must list one entry per task");
    }
    for (int64_t c : class_counts) {
        if (c < 2) throw ConfigError("every task needs >= 2 classes");
    }
    if (!class_weights.empty() && static_cast<int64_t>(class_weights.size()) != n_tasks) {
        throw ConfigError("class_weights, when given, must list one entry per task");
    }
    for (size_t t = 0; t < class_weights.size(); ++t) {
        if (class_weights[t].empty()) continue;
        if (static_cast<int64_t>(class_weights[t].size()) != class_counts[t]) {
            throw ConfigError("class_weights for task " + std::to_string(t) +
                              " must match its class count");
        }
        for (double w : class_weights[t]) {
            if (w <= 0.0) throw ConfigError("class weights must be positive");
        }
    }
}

void EncoderConfig::validate() const {
    if (vocab_size <= kUnkTokenId) throw ConfigError("vocab_size must exceed the reserved ids");
    if (d_h <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 1) {
        throw ConfigError("encoder dimensions must be positive (max_len > 1)");
    }
    if (d_h % n_heads != 0) {
        throw ConfigError("d_h=" + std::to_string(d_h) + " must be divisible by n_heads=" +
                          std::to_string(n_heads));
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout_rate must be in [0,1)");
    classifier.validate();
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "plain") return ModelKind::Plain;
    if (s == "adapter") return ModelKind::Adapter;
    if (s == "injector") return ModelKind::Injector;
    if (s == "tokens") return ModelKind::TokensBaseline;
    throw ConfigError("unknown model kind '" + s + "' (plain|adapter|injector|tokens)");
}

std::string model_kind_to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Plain: return "plain";
        case ModelKind::Adapter: return "adapter";
        case ModelKind::Injector: return "injector";
        case ModelKind::TokensBaseline: return "tokens";
    }
    return "plain";
}

int64_t ModelConfig::token_table_rows() const {
    int64_t rows = encoder.vocab_size;
    if (kind == ModelKind::TokensBaseline) {
        for (const AttributeSpec& a : schema.attributes) rows += a.vocab_size;
    }
    return rows;
}

void ModelConfig::validate() const {
    encoder.validate();
    if (kind == ModelKind::Injector || kind == ModelKind::TokensBaseline) {
        schema.validate();
    }
    if (has_injector_blocks()) {
        InjectorConfig icfg = injector;
        icfg.validate();
        if (icfg.d_h != encoder.d_h) {
            throw ConfigError("injector d_h must equal encoder d_h");
        }
    }
}

std::vector<ParamPlanEntry> Model::parameter_plan(const ModelConfig& cfg) {
    cfg.validate();
    const EncoderConfig& e = cfg.encoder;
    const int64_t dk = e.head_dim();
    std::vector<ParamPlanEntry> plan;

    plan.push_back({"emb.token", {cfg.token_table_rows(), e.d_h}, ParamCategory::TokenEmbedding,
                    InitKind::Normal002});
    plan.push_back({"emb.pos", {e.max_len, e.d_h}, ParamCategory::PosEmbedding, InitKind::Normal002});
    plan.push_back({"emb.ln_g", {e.d_h}, ParamCategory::TokenEmbedding, InitKind::Ones});
    plan.push_back({"emb.ln_b", {e.d_h}, ParamCategory::TokenEmbedding, InitKind::Zero});

    for (int64_t l = 0; l < e.n_layers; ++l) {
        const std::string lp = "backbone.layer" + std::to_string(l);
        for (int64_t h = 0; h < e.n_heads; ++h) {
            const std::string hp = lp + ".attn.head" + std::to_string(h);
            for (const char* part : {"q", "k", "v"}) {
                plan.push_back({hp + "." + part + "_w", {e.d_h, dk}, ParamCategory::Backbone,
                                InitKind::ScaledUniform, e.d_h});
                plan.push_back({hp + "." + part + "_b", {dk}, ParamCategory::Backbone, InitKind::Zero});
            }
        }
        plan.push_back({lp + ".attn.out_w", {e.d_h, e.d_h}, ParamCategory::Backbone,
                        InitKind::ScaledUniform, e.d_h});
        plan.push_back({lp + ".attn.out_b", {e.d_h}, ParamCategory::Backbone, InitKind::Zero});
        plan.push_back({lp + ".attn.ln_g", {e.d_h}, ParamCategory::LayerNorm, InitKind::Ones});
        plan.push_back({lp + ".attn.ln_b", {e.d_h}, ParamCategory::LayerNorm, InitKind::Zero});
        plan.push_back({lp + ".ffn.w1", {e.d_h, e.d_ff}, ParamCategory::Backbone,
                        InitKind::ScaledUniform, e.d_h});
        plan.push_back({lp + ".ffn.b1", {e.d_ff}, ParamCategory::Backbone, InitKind::Zero});
        plan.push_back({lp + ".ffn.w2", {e.d_ff, e.d_h}, ParamCategory::Backbone,
                        InitKind::ScaledUniform, e.d_ff});
        plan.push_back({lp + ".ffn.b2", {e.d_h}, ParamCategory::Backbone, InitKind::Zero});
        plan.push_back({lp + ".ffn.ln_g", {e.d_h}, ParamCategory::LayerNorm, InitKind::Ones});
        plan.push_back({lp + ".ffn.ln_b", {e.d_h}, ParamCategory::LayerNorm, InitKind::Zero});
    }

    // Injector entries come after the whole backbone so that models which
    // differ only in adapter structure share backbone draws for a given seed.
    if (cfg.has_injector_blocks()) {
        const int64_t n_attrs = cfg.attr_adapter_count();
        for (int64_t l = 0; l < e.n_layers; ++l) {
            for (const char* sub : {"attn", "ffn"}) {
                auto block = injector_block_plan(
                    "injector.layer" + std::to_string(l) + "." + sub, cfg.injector, n_attrs);
                plan.insert(plan.end(), block.begin(), block.end());
            }
        }
    }

    if (cfg.kind == ModelKind::Injector) {
        for (const AttributeSpec& a : cfg.schema.attributes) {
            plan.push_back({"attr_emb." + a.name, {a.vocab_size, cfg.schema.d_z},
                            ParamCategory::AttrEmbedding, InitKind::Normal002});
        }
    }

    for (int64_t t = 0; t < e.classifier.n_tasks; ++t) {
        const std::string tp = "classifier.task" + std::to_string(t);
        plan.push_back({tp + ".w", {e.d_h, e.classifier.class_counts[static_cast<size_t>(t)]},
                        ParamCategory::Classifier, InitKind::ScaledUniform, e.d_h});
        plan.push_back({tp + ".b", {e.classifier.class_counts[static_cast<size_t>(t)]},
                        ParamCategory::Classifier, InitKind::Zero});
    }
    return plan;
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    // per-name streams: two models initialized with the same seed agree on
    // every parameter they share, whatever else differs between them
    for (const ParamPlanEntry& entry : parameter_plan(cfg_)) {
        std::mt19937_64 rng(seed ^ name_hash(entry.name));
        params_.create(entry, rng);
    }

    token_emb_ = params_.get("emb.token");
    pos_emb_ = params_.get("emb.pos");
    emb_ln_g_ = params_.get("emb.ln_g");
    emb_ln_b_ = params_.get("emb.ln_b");

    const EncoderConfig& e = cfg_.encoder;
    for (int64_t l = 0; l < e.n_layers; ++l) {
        const std::string lp = "backbone.layer" + std::to_string(l);
        LayerParams layer;
        for (int64_t h = 0; h < e.n_heads; ++h) {
            const std::string hp = lp + ".attn.head" + std::to_string(h);
            layer.heads.push_back({params_.get(hp + ".q_w"), params_.get(hp + ".q_b"),
                                   params_.get(hp + ".k_w"), params_.get(hp + ".k_b"),
                                   params_.get(hp + ".v_w"), params_.get(hp + ".v_b")});
        }
        layer.attn_out_w = params_.get(lp + ".attn.out_w");
        layer.attn_out_b = params_.get(lp + ".attn.out_b");
        layer.attn_ln_g = params_.get(lp + ".attn.ln_g");
        layer.attn_ln_b = params_.get(lp + ".attn.ln_b");
        layer.ffn_w1 = params_.get(lp + ".ffn.w1");
        layer.ffn_b1 = params_.get(lp + ".ffn.b1");
        layer.ffn_w2 = params_.get(lp + ".ffn.w2");
        layer.ffn_b2 = params_.get(lp + ".ffn.b2");
        layer.ffn_ln_g = params_.get(lp + ".ffn.ln_g");
        layer.ffn_ln_b = params_.get(lp + ".ffn.ln_b");
        if (cfg_.has_injector_blocks()) {
            const int64_t n_attrs = cfg_.attr_adapter_count();
            layer.attn_injector = bind_injector_block(
                params_, "injector.layer" + std::to_string(l) + ".attn", cfg_.injector, n_attrs);
            layer.ffn_injector = bind_injector_block(
                params_, "injector.layer" + std::to_string(l) + ".ffn", cfg_.injector, n_attrs);
        }
        layers_.push_back(std::move(layer));
    }

    if (cfg_.kind == ModelKind::Injector) {
        for (const AttributeSpec& a : cfg_.schema.attributes) {
            attr_tables_.tables.push_back(params_.get("attr_emb." + a.name));
        }
    }
    for (int64_t t = 0; t < e.classifier.n_tasks; ++t) {
        cls_w_.push_back(params_.get("classifier.task" + std::to_string(t) + ".w"));
        cls_b_.push_back(params_.get("classifier.task" + std::to_string(t) + ".b"));
    }
}

std::vector<int64_t> Model::input_ids(const std::vector<int64_t>& tokens,
                                      const AttributeAssignment& assignment) const {
    const EncoderConfig& e = cfg_.encoder;
    std::vector<int64_t> ids;
    ids.push_back(kClsTokenId);

    if (cfg_.kind == ModelKind::TokensBaseline) {
        assignment.validate(cfg_.schema);
        int64_t offset = e.vocab_size;
        for (int64_t j = 0; j < cfg_.schema.count(); ++j) {
            // assignment label sets are kept sorted, giving a deterministic order
            for (int64_t id : assignment.of(j)) ids.push_back(offset + id);
            offset += cfg_.schema.at(j).vocab_size;
        }
    }

    for (int64_t t : tokens) {
        if (t < 0 || t >= e.vocab_size) {
            throw VocabularyError("token id " + std::to_string(t) + " out of range [0," +
                                  std::to_string(e.vocab_size) + ")");
        }
        if (static_cast<int64_t>(ids.size()) >= e.max_len) break;  // keep head, drop tail
        ids.push_back(t);
    }
    if (static_cast<int64_t>(ids.size()) > e.max_len) ids.resize(static_cast<size_t>(e.max_len));
    return ids;
}

Var Model::sublayer_inject(Tape& tape, const Var& sub_out,
                           const std::optional<InjectorBlock>& block,
                           const AttributeAssignment& assignment) {
    if (!block) return sub_out;
    if (cfg_.kind == ModelKind::Adapter) {
        return block->task ? adapt(tape, sub_out, *block->task, cfg_.injector.activation) : sub_out;
    }
    return inject(tape, sub_out, assignment, *block, attr_tables_, cfg_.injector, cfg_.schema);
}

Var Model::encode(Tape& tape, const std::vector<int64_t>& tokens,
                  const AttributeAssignment& assignment, bool training,
                  std::mt19937_64& dropout_rng) {
    if (cfg_.kind == ModelKind::Injector) assignment.validate(cfg_.schema);
    const EncoderConfig& e = cfg_.encoder;
    const std::vector<int64_t> ids = input_ids(tokens, assignment);
    const int64_t len = static_cast<int64_t>(ids.size());

    std::vector<int64_t> positions(static_cast<size_t>(len));
    for (int64_t i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = i;

    Var x = add(tape, gather_rows(tape, token_emb_, ids), gather_rows(tape, pos_emb_, positions));
    x = layer_norm(tape, x, emb_ln_g_, emb_ln_b_);
    if (training && e.dropout_rate > 0.0) x = dropout(tape, x, e.dropout_rate, dropout_rng);

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(e.head_dim()));
    for (LayerParams& layer : layers_) {
        std::vector<Var> head_outputs;
        head_outputs.reserve(layer.heads.size());
        for (const HeadParams& head : layer.heads) {
            Var q = add_bias(tape, matmul(tape, x, head.q_w), head.q_b);
            Var k = add_bias(tape, matmul(tape, x, head.k_w), head.k_b);
            Var v = add_bias(tape, matmul(tape, x, head.v_w), head.v_b);
            Var scores = scale(tape, matmul(tape, q, k, false, true), inv_sqrt_dk);
            head_outputs.push_back(matmul(tape, softmax_rows(tape, scores), v));
        }
        Var attn = concat_cols(tape, head_outputs);
        attn = add_bias(tape, matmul(tape, attn, layer.attn_out_w), layer.attn_out_b);
        if (training && e.dropout_rate > 0.0) attn = dropout(tape, attn, e.dropout_rate, dropout_rng);
        attn = sublayer_inject(tape, attn, layer.attn_injector, assignment);
        x = layer_norm(tape, add(tape, x, attn), layer.attn_ln_g, layer.attn_ln_b);

        Var hidden = add_bias(tape, matmul(tape, x, layer.ffn_w1), layer.ffn_b1);
        Var ff = add_bias(tape, matmul(tape, activate(tape, hidden, e.activation), layer.ffn_w2),
                          layer.ffn_b2);
        if (training && e.dropout_rate > 0.0) ff = dropout(tape, ff, e.dropout_rate, dropout_rng);
        ff = sublayer_inject(tape, ff, layer.ffn_injector, assignment);
        x = layer_norm(tape, add(tape, x, ff), layer.ffn_ln_g, layer.ffn_ln_b);
    }
    return take_row(tape, x, 0);
}

std::vector<Var> Model::forward(Tape& tape, const std::vector<int64_t>& tokens,
                                const AttributeAssignment& assignment, bool training,
                                std::mt19937_64& dropout_rng) {
    Var pooled = encode(tape, tokens, assignment, training, dropout_rng);
    std::vector<Var> logits;
    logits.reserve(cls_w_.size());
    for (size_t t = 0; t < cls_w_.size(); ++t) {
        logits.push_back(add_bias(tape, matmul(tape, pooled, cls_w_[t]), cls_b_[t]));
    }
    return logits;
}

std::vector<int64_t> Model::predict(const std::vector<int64_t>& tokens,
                                    const AttributeAssignment& assignment) {
    Tape tape;
    std::mt19937_64 unused(0);
    std::vector<Var> logits = forward(tape, tokens, assignment, false, unused);
    std::vector<int64_t> preds;
    preds.reserve(logits.size());
    for (const Var& l : logits) {
        int64_t best = 0;
        for (int64_t c = 1; c < l->value.numel(); ++c) {
            if (l->value[c] > l->value[best]) best = c;
        }
        preds.push_back(best);
    }
    return preds;
}

Var batch_loss(Tape& tape, const std::vector<std::vector<Var>>& logits,
               const std::vector<std::vector<int64_t>>& labels, const ClassifierConfig& cfg) {
    if (logits.empty() || logits.size() != labels.size()) {
        throw ContractError("batch_loss: instance count mismatch");
    }
    const size_t n = logits.size();
    Var total;
    for (int64_t t = 0; t < cfg.n_tasks; ++t) {
        Var task_sum;
        double weight_sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const int64_t y = labels[i][static_cast<size_t>(t)];
            const double w =
                cfg.weighted(t) ? cfg.class_weights[static_cast<size_t>(t)][static_cast<size_t>(y)]
                                : 1.0;
            Var ce = cross_entropy(tape, logits[i][static_cast<size_t>(t)], y);
            Var weighted = w == 1.0 ? ce : scale(tape, ce, w);
            task_sum = task_sum ? add(tape, task_sum, weighted) : weighted;
            weight_sum += w;
        }
        Var task_mean = scale(tape, task_sum, 1.0 / weight_sum);
        total = total ? add(tape, total, task_mean) : task_mean;
    }
    return cfg.n_tasks > 1 ? scale(tape, total, 1.0 / static_cast<double>(cfg.n_tasks)) : total;
}

}  // namespace injector
