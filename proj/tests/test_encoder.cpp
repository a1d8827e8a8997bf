#include <cmath>
#include <random>

#include "doctest.h"
#include "injector/encoder.hpp"
#include "injector/errors.hpp"
#include "injector/grad_check.hpp"
#include "support/oracles.hpp"

using namespace injector;

namespace {

ModelConfig toy_model_config(ModelKind kind) {
    ModelConfig mc;
    mc.kind = kind;
    mc.encoder.vocab_size = 12;
    mc.encoder.max_len = 10;
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
    mc.schema.attributes = {{"u", 5, false}, {"t", 6, true}};
    return mc;
}

AttributeAssignment sample_assignment(const AttributeSchema& schema) {
    AttributeAssignment a = AttributeAssignment::empty_for(schema);
    a.set(0, {2});
    a.set(1, {1, 4});
    return a;
}

void copy_params_by_name(const Model& from, Model& to) {
    for (const Var& p : to.params().all()) {
        if (from.params().contains(p->name)) p->value = from.params().get(p->name)->value;
    }
}

Tensor pooled_of(Model& m, const std::vector<int64_t>& tokens, const AttributeAssignment& a) {
    Tape tape;
    std::mt19937_64 unused(0);
    return m.encode(tape, tokens, a, false, unused)->value;
}

}  // namespace

TEST_CASE("identity-at-init: injected logits bit-equal the plain model") {
    ModelConfig injected_cfg = toy_model_config(ModelKind::Injector);
    ModelConfig plain_cfg = toy_model_config(ModelKind::Plain);
    Model injected(injected_cfg, 77);
    Model plain(plain_cfg, 77);  // same seed -> identical backbone draws

    std::mt19937_64 rng(78);
    std::uniform_int_distribution<int64_t> tok(0, 11), len(1, 8), u(0, 4), t(0, 5);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int64_t> tokens;
        const int64_t n = len(rng);
        for (int64_t i = 0; i < n; ++i) tokens.push_back(tok(rng));
        AttributeAssignment a = AttributeAssignment::empty_for(injected_cfg.schema);
        if (trial % 3 != 0) a.set(0, {u(rng)});
        if (trial % 4 != 0) a.set(1, {t(rng), t(rng)});

        Tape tape1, tape2;
        std::mt19937_64 unused(0);
        std::vector<Var> li = injected.forward(tape1, tokens, a, false, unused);
        std::vector<Var> lp =
            plain.forward(tape2, tokens, AttributeAssignment::empty_for({}), false, unused);
        REQUIRE(li.size() == lp.size());
        for (size_t k = 0; k < li.size(); ++k) CHECK(bitwise_equal(li[k]->value, lp[k]->value));
    }
}

TEST_CASE("single-token forward matches a hand-stepped oracle") {
    // 1 layer, 1 head, identity-initialized injectors contribute nothing
    ModelConfig mc = toy_model_config(ModelKind::Injector);
    mc.encoder.d_h = 4;
    mc.encoder.n_heads = 1;
    mc.encoder.d_ff = 6;
    mc.injector.d_h = 4;
    mc.injector.d_a = 2;
    mc.injector.hyper_dims = 1;
    Model model(mc, 5);

    const std::vector<int64_t> tokens = {7};
    AttributeAssignment a = sample_assignment(mc.schema);
    const Tensor pooled = pooled_of(model, tokens, a);

    // oracle: plain loops over the same parameter values
    const auto& P = model.params();
    const int64_t d = 4;
    auto vec_of = [&](const std::string& name) -> const Tensor& { return P.get(name)->value; };
    auto ln = [&](std::vector<double> x, const Tensor& g, const Tensor& b) {
        double mean = 0, var = 0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(x.size());
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.size());
        const double istd = 1.0 / std::sqrt(var + 1e-5);
        std::vector<double> out(x.size());
        for (size_t i = 0; i < x.size(); ++i) out[i] = g[static_cast<int64_t>(i)] * ((x[i] - mean) * istd) + b[static_cast<int64_t>(i)];
        return out;
    };
    auto affine = [&](const std::vector<double>& x, const Tensor& w, const Tensor& b) {
        std::vector<double> out(static_cast<size_t>(w.extent(1)), 0.0);
        for (int64_t j = 0; j < w.extent(1); ++j) {
            double acc = b[j];
            for (int64_t i = 0; i < w.extent(0); ++i) acc += x[static_cast<size_t>(i)] * w.at(i, j);
            out[static_cast<size_t>(j)] = acc;
        }
        return out;
    };
    auto gelu_exact = [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); };

    const Tensor& tok_emb = vec_of("emb.token");
    const Tensor& pos_emb = vec_of("emb.pos");
    // sequence = [CLS, token 7]
    std::vector<std::vector<double>> x;
    for (int64_t pos = 0; pos < 2; ++pos) {
        const int64_t id = pos == 0 ? kClsTokenId : 7;
        std::vector<double> row(static_cast<size_t>(d));
        for (int64_t j = 0; j < d; ++j) {
            row[static_cast<size_t>(j)] = tok_emb.at(id, j) + pos_emb.at(pos, j);
        }
        x.push_back(ln(row, vec_of("emb.ln_g"), vec_of("emb.ln_b")));
    }

    // single-head attention over two positions
    std::vector<std::vector<double>> q, k, v;
    for (const auto& row : x) {
        q.push_back(affine(row, vec_of("backbone.layer0.attn.head0.q_w"),
                           vec_of("backbone.layer0.attn.head0.q_b")));
        k.push_back(affine(row, vec_of("backbone.layer0.attn.head0.k_w"),
                           vec_of("backbone.layer0.attn.head0.k_b")));
        v.push_back(affine(row, vec_of("backbone.layer0.attn.head0.v_w"),
                           vec_of("backbone.layer0.attn.head0.v_b")));
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<std::vector<double>> ctx;
    for (size_t i = 0; i < 2; ++i) {
        double s0 = 0, s1 = 0;
        for (size_t j = 0; j < 4; ++j) {
            s0 += q[i][j] * k[0][j];
            s1 += q[i][j] * k[1][j];
        }
        s0 *= inv_sqrt;
        s1 *= inv_sqrt;
        const double mx = std::max(s0, s1);
        const double e0 = std::exp(s0 - mx), e1 = std::exp(s1 - mx);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        std::vector<double> c(4);
        for (size_t j = 0; j < 4; ++j) c[j] = p0 * v[0][j] + p1 * v[1][j];
        ctx.push_back(c);
    }
    for (size_t i = 0; i < 2; ++i) {
        std::vector<double> attn_out = affine(ctx[i], vec_of("backbone.layer0.attn.out_w"),
                                              vec_of("backbone.layer0.attn.out_b"));
        // injectors are identity at init
        std::vector<double> res(4);
        for (size_t j = 0; j < 4; ++j) res[j] = x[i][j] + attn_out[j];
        x[i] = ln(res, vec_of("backbone.layer0.attn.ln_g"), vec_of("backbone.layer0.attn.ln_b"));
    }
    for (size_t i = 0; i < 2; ++i) {
        std::vector<double> hidden =
            affine(x[i], vec_of("backbone.layer0.ffn.w1"), vec_of("backbone.layer0.ffn.b1"));
        for (double& h : hidden) h = gelu_exact(h);
        std::vector<double> ff =
            affine(hidden, vec_of("backbone.layer0.ffn.w2"), vec_of("backbone.layer0.ffn.b2"));
        std::vector<double> res(4);
        for (size_t j = 0; j < 4; ++j) res[j] = x[i][j] + ff[j];
        x[i] = ln(res, vec_of("backbone.layer0.ffn.ln_g"), vec_of("backbone.layer0.ffn.ln_b"));
    }

    for (int64_t j = 0; j < d; ++j) {
        CHECK(pooled[j] == doctest::Approx(x[0][static_cast<size_t>(j)]).epsilon(1e-12));
    }
}

TEST_CASE("assignments differing in one label give different pooled outputs") {
    ModelConfig mc = toy_model_config(ModelKind::Injector);
    Model model(mc, 9);
    // make the injection live
    std::mt19937_64 rng(10);
    for (const Var& p : model.params().all()) {
        if (p->name.find("up_w") != std::string::npos) {
            init_tensor(p->value, InitKind::ScaledUniform, p->value.extent(0), rng);
        }
    }
    const std::vector<int64_t> tokens = {3, 4, 5};
    AttributeAssignment a1 = sample_assignment(mc.schema);
    AttributeAssignment a2 = a1;
    a2.set(0, {3});  // one label differs

    const Tensor p1 = pooled_of(model, tokens, a1);
    const Tensor p2 = pooled_of(model, tokens, a2);
    CHECK(max_abs_diff(p1, p2) > 1e-12);
}

TEST_CASE("batch loss limits and closed forms") {
    ClassifierConfig cfg;
    cfg.n_tasks = 1;
    cfg.class_counts = {4};

    {
        // near-perfect margin drives the loss toward zero
        Tape tape;
        Tensor big({1, 4});
        big.at(0, 2) = 30.0;
        std::vector<std::vector<Var>> logits = {{constant(big)}};
        Var loss = batch_loss(tape, logits, {{2}}, cfg);
        CHECK(loss->value[0] < 1e-3);
    }
    {
        // uniform logits give ln(n)
        Tape tape;
        std::vector<std::vector<Var>> logits = {{constant(Tensor({1, 4}))}};
        Var loss = batch_loss(tape, logits, {{1}}, cfg);
        CHECK(loss->value[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
}

TEST_CASE("weighted cross entropy matches hand-computed weighted mean") {
    ClassifierConfig cfg;
    cfg.n_tasks = 1;
    cfg.class_counts = {2};
    cfg.class_weights = {{0.5, 1.0}};

    Tensor l0 = Tensor::matrix({{0.2, -0.4}});
    Tensor l1 = Tensor::matrix({{-1.0, 0.7}});
    auto ce = [](const Tensor& l, int64_t y) {
        const double mx = std::max(l[0], l[1]);
        const double lse = mx + std::log(std::exp(l[0] - mx) + std::exp(l[1] - mx));
        return lse - l[y];
    };
    // example 0 has label 0 (weight 0.5), example 1 has label 1 (weight 1.0)
    const double expect = (0.5 * ce(l0, 0) + 1.0 * ce(l1, 1)) / 1.5;

    Tape tape;
    std::vector<std::vector<Var>> logits = {{constant(l0)}, {constant(l1)}};
    Var loss = batch_loss(tape, logits, {{0}, {1}}, cfg);
    CHECK(loss->value[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("multi-task loss equals the mean of per-task losses") {
    ClassifierConfig both;
    both.n_tasks = 2;
    both.class_counts = {3, 4};
    ClassifierConfig first;
    first.n_tasks = 1;
    first.class_counts = {3};
    ClassifierConfig second;
    second.n_tasks = 1;
    second.class_counts = {4};

    std::mt19937_64 rng(11);
    Tensor a0 = oracles::random_tensor({1, 3}, rng);
    Tensor a1 = oracles::random_tensor({1, 3}, rng);
    Tensor b0 = oracles::random_tensor({1, 4}, rng);
    Tensor b1 = oracles::random_tensor({1, 4}, rng);

    Tape tape;
    std::vector<std::vector<Var>> both_logits = {{constant(a0), constant(b0)},
                                                 {constant(a1), constant(b1)}};
    Var joint = batch_loss(tape, both_logits, {{1, 3}, {2, 0}}, both);

    std::vector<std::vector<Var>> first_logits = {{constant(a0)}, {constant(a1)}};
    std::vector<std::vector<Var>> second_logits = {{constant(b0)}, {constant(b1)}};
    Var f = batch_loss(tape, first_logits, {{1}, {2}}, first);
    Var s = batch_loss(tape, second_logits, {{3}, {0}}, second);
    CHECK(joint->value[0] == doctest::Approx(0.5 * (f->value[0] + s->value[0])).epsilon(1e-12));
}

TEST_CASE("tokens baseline prepends sorted per-label special tokens") {
    ModelConfig mc = toy_model_config(ModelKind::TokensBaseline);
    Model model(mc, 12);

    AttributeAssignment empty = AttributeAssignment::empty_for(mc.schema);
    const std::vector<int64_t> text = {4, 7, 9};
    CHECK(model.input_ids(text, empty) == std::vector<int64_t>({kClsTokenId, 4, 7, 9}));

    AttributeAssignment two = AttributeAssignment::empty_for(mc.schema);
    two.set(0, {3});
    two.set(1, {5});
    const auto ids2 = model.input_ids(text, two);
    CHECK(ids2.size() == text.size() + 3);  // CLS + 2 specials + text
    // attribute 0 occupies rows [12, 17), attribute 1 rows [17, 23)
    CHECK(ids2[1] == 12 + 3);
    CHECK(ids2[2] == 17 + 5);

    AttributeAssignment multi = AttributeAssignment::empty_for(mc.schema);
    multi.set(1, {4, 0, 2});
    const auto ids3 = model.input_ids(text, multi);
    const std::vector<int64_t> expect = {kClsTokenId, 17 + 0, 17 + 2, 17 + 4, 4, 7, 9};
    CHECK(ids3 == expect);
}

TEST_CASE("tokens baseline with no attributes equals the plain encoder") {
    ModelConfig tokens_cfg = toy_model_config(ModelKind::TokensBaseline);
    Model tokens_model(tokens_cfg, 13);

    ModelConfig wide_plain = toy_model_config(ModelKind::Plain);
    wide_plain.encoder.vocab_size = tokens_model.config().token_table_rows();
    Model wide(wide_plain, 13);
    copy_params_by_name(tokens_model, wide);

    AttributeAssignment empty = AttributeAssignment::empty_for(tokens_cfg.schema);
    const std::vector<int64_t> text = {2, 5, 8};
    const Tensor a = pooled_of(tokens_model, text, empty);
    const Tensor b = pooled_of(wide, text, AttributeAssignment::empty_for({}));
    CHECK(bitwise_equal(a, b));
}

TEST_CASE("tokens baseline truncates the text tail on overflow") {
    ModelConfig mc = toy_model_config(ModelKind::TokensBaseline);
    mc.encoder.max_len = 6;
    Model model(mc, 14);

    AttributeAssignment a = AttributeAssignment::empty_for(mc.schema);
    a.set(1, {0, 1, 3});
    const std::vector<int64_t> text = {2, 3, 4, 5, 6};
    const auto ids = model.input_ids(text, a);
    CHECK(static_cast<int64_t>(ids.size()) == 6);
    // CLS + three specials survive, text keeps its head
    CHECK(ids[0] == kClsTokenId);
    CHECK(ids[4] == 2);
    CHECK(ids[5] == 3);
}

TEST_CASE("encode truncates long inputs head-first") {
    ModelConfig mc = toy_model_config(ModelKind::Plain);
    mc.encoder.max_len = 5;
    Model model(mc, 15);
    AttributeAssignment none = AttributeAssignment::empty_for({});

    const std::vector<int64_t> longer = {2, 3, 4, 5, 6, 7, 8};
    const std::vector<int64_t> head = {2, 3, 4, 5};  // CLS + 4 = max_len
    CHECK(bitwise_equal(pooled_of(model, longer, none), pooled_of(model, head, none)));
}

TEST_CASE("unknown token ids raise vocabulary errors") {
    ModelConfig mc = toy_model_config(ModelKind::Plain);
    Model model(mc, 16);
    Tape tape;
    std::mt19937_64 unused(0);
    CHECK_THROWS_AS(model.encode(tape, {3, 99}, AttributeAssignment::empty_for({}), false, unused),
                    VocabularyError);
}

TEST_CASE("full injected model gradient at toy dims") {
    ModelConfig mc = toy_model_config(ModelKind::Injector);
    Model model(mc, 17);
    std::mt19937_64 rng(18);
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

    const std::vector<int64_t> tokens = {3, 5, 7};
    AttributeAssignment a = sample_assignment(mc.schema);
    auto computation = [&](Tape& tape) {
        std::mt19937_64 unused(0);
        std::vector<Var> logits = model.forward(tape, tokens, a, false, unused);
        return cross_entropy(tape, logits[0], 1);
    };
    const GradCheckReport report = grad_check(computation, model.params().all(), 1e-5);
    INFO(report.summary());
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("encoder config validation") {
    ModelConfig mc = toy_model_config(ModelKind::Injector);
    mc.validate();
    mc.encoder.n_heads = 3;  // does not divide 16
    CHECK_THROWS_AS(mc.validate(), ConfigError);
    mc = toy_model_config(ModelKind::Injector);
    mc.encoder.classifier.class_counts = {1};
    CHECK_THROWS_AS(mc.validate(), ConfigError);
    mc = toy_model_config(ModelKind::Injector);
    mc.injector.d_h = 32;  // must equal encoder d_h
    CHECK_THROWS_AS(mc.validate(), ConfigError);
}

TEST_CASE("predict returns argmax per task") {
    ModelConfig mc = toy_model_config(ModelKind::Plain);
    mc.encoder.classifier.n_tasks = 2;
    mc.encoder.classifier.class_counts = {3, 4};
    Model model(mc, 19);
    const auto preds = model.predict({2, 3}, AttributeAssignment::empty_for({}));
    REQUIRE(preds.size() == 2);
    CHECK(preds[0] >= 0);
    CHECK(preds[0] < 3);
    CHECK(preds[1] >= 0);
    CHECK(preds[1] < 4);
}
