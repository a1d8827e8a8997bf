#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "injector/attributes.hpp"
#include "injector/autodiff.hpp"
#include "injector/layers.hpp"
#include "injector/params.hpp"

namespace injector {

// Reserved token ids in every text vocabulary.
constexpr int64_t kClsTokenId = 0;
constexpr int64_t kUnkTokenId = 1;
constexpr int64_t kFirstWordId = 2;

struct ClassifierConfig {
    int64_t n_tasks = 1;
    std::vector<int64_t> class_counts;               // one entry per task
    std::vector<std::vector<double>> class_weights;  // optional, per task; empty = unweighted

    bool weighted(int64_t task) const {
        return static_cast<size_t>(task) < class_weights.size() &&
               !class_weights[static_cast<size_t>(task)].empty();
    }
    void validate() const;
};

struct EncoderConfig {
    int64_t vocab_size = 0;
    int64_t max_len = 128;
    int64_t d_h = 0;
    int64_t n_layers = 1;
    int64_t n_heads = 1;
    int64_t d_ff = 0;
    double dropout_rate = 0.1;
    Activation activation = Activation::Gelu;
    ClassifierConfig classifier;
    bool train_layer_norm = true;

    int64_t head_dim() const { return d_h / n_heads; }
    void validate() const;
};

enum class ModelKind { Plain, Adapter, Injector, TokensBaseline };
ModelKind model_kind_from_string(const std::string& s);
std::string model_kind_to_string(ModelKind k);

struct ModelConfig {
    ModelKind kind = ModelKind::Injector;
    EncoderConfig encoder;
    InjectorConfig injector;
    AttributeSchema schema;

    bool has_injector_blocks() const {
        return kind == ModelKind::Adapter || kind == ModelKind::Injector;
    }
    int64_t attr_adapter_count() const {
        return kind == ModelKind::Injector ? schema.count() : 0;
    }
    // Token table rows; the tokens baseline appends one row per attribute label.
    int64_t token_table_rows() const;
    void validate() const;
};

// Transformer encoder with injector insertion points after both sublayers of
// every block. Construction is deterministic in (config, seed).
class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    static std::vector<ParamPlanEntry> parameter_plan(const ModelConfig& cfg);

    // Pooled first-position representation, [1 x d_h].
    Var encode(Tape& tape, const std::vector<int64_t>& tokens,
               const AttributeAssignment& assignment, bool training, std::mt19937_64& dropout_rng);
    // Per-task logits, each [1 x C_t].
    std::vector<Var> forward(Tape& tape, const std::vector<int64_t>& tokens,
                             const AttributeAssignment& assignment, bool training,
                             std::mt19937_64& dropout_rng);
    std::vector<int64_t> predict(const std::vector<int64_t>& tokens,
                                 const AttributeAssignment& assignment);

    // Final id sequence fed to the encoder: CLS, baseline attribute tokens
    // (tokens kind only), then the truncated text.
    std::vector<int64_t> input_ids(const std::vector<int64_t>& tokens,
                                   const AttributeAssignment& assignment) const;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }
    const AttributeEmbeddingTable& attr_tables() const { return attr_tables_; }

private:
    struct HeadParams {
        Var q_w, q_b, k_w, k_b, v_w, v_b;
    };
    struct LayerParams {
        std::vector<HeadParams> heads;
        Var attn_out_w, attn_out_b, attn_ln_g, attn_ln_b;
        Var ffn_w1, ffn_b1, ffn_w2, ffn_b2, ffn_ln_g, ffn_ln_b;
        std::optional<InjectorBlock> attn_injector;
        std::optional<InjectorBlock> ffn_injector;
    };

    Var sublayer_inject(Tape& tape, const Var& sub_out, const std::optional<InjectorBlock>& block,
                        const AttributeAssignment& assignment);

    ModelConfig cfg_;
    ParamRegistry params_;
    Var token_emb_, pos_emb_, emb_ln_g_, emb_ln_b_;
    std::vector<LayerParams> layers_;
    std::vector<Var> cls_w_, cls_b_;
    AttributeEmbeddingTable attr_tables_;
};

// Mean over tasks of the (optionally class-weighted) batch mean cross entropy.
Var batch_loss(Tape& tape, const std::vector<std::vector<Var>>& logits,
               const std::vector<std::vector<int64_t>>& labels, const ClassifierConfig& cfg);

}  // namespace injector
