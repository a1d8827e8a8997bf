#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "injector/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"attribute-conditioned adapter training and analysis"};
    app.require_subcommand(1);

    injector::CliOptions opts;
    uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* config_opt = cmd->add_option("--config", opts.config_path, "experiment config JSON");
        if (needs_config) config_opt->required();
        cmd->add_option("--seed", seed_value, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--out", opts.out_dir,
                        "output directory (default: $INJECTOR_OUT_ROOT/<command>-<id>)");
    };

    std::string spec_path, gen_out;
    auto* generate = app.add_subcommand("generate-data", "sample a synthetic benchmark dataset");
    generate->add_option("spec", spec_path, "generator spec JSON")->required();
    generate->add_option("out", gen_out, "output directory")->required();
    generate->add_option("--seed", seed_value, "override the spec seed")
        ->each([&](const std::string&) { seed_set = true; });

    auto* train = app.add_subcommand("train", "train a model from a config");
    add_common(train, true);
    train->add_option("--mode", opts.mode, "model kind override (plain|adapter|injector|tokens)");

    std::string checkpoint_path;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("checkpoint", checkpoint_path, "model checkpoint")->required();
    add_common(eval, true);
    eval->add_option("--mode", opts.mode, "model kind override");

    bool naive = false;
    auto* param_count = app.add_subcommand("param-count", "parameter accounting report");
    add_common(param_count, true);
    param_count->add_flag("--naive", naive, "report the naive projection instead of the phm path");

    std::vector<std::string> checkpoints;
    std::string attribute;
    int64_t n_bins = 10;
    auto* sparsity = app.add_subcommand("analyze-sparsity", "accuracy per train-frequency bin");
    sparsity->add_option("checkpoints", checkpoints, "model checkpoint(s)")->required();
    sparsity->add_option("--attribute", attribute, "attribute to bin by")->required();
    sparsity->add_option("--bins", n_bins, "bin count (default 10)");
    add_common(sparsity, true);

    auto* ablate = app.add_subcommand("ablate", "train and score the component toggle grid");
    add_common(ablate, true);

    auto* transfer = app.add_subcommand("transfer", "attribute-module transfer experiment");
    add_common(transfer, true);

    auto* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient verification");
    gradcheck->add_option("--seed", seed_value, "probe-point seed")
        ->each([&](const std::string&) { seed_set = true; });

    CLI11_PARSE(app, argc, argv);
    if (seed_set) opts.seed = seed_value;

    try {
        if (generate->parsed()) return injector::cmd_generate_data(spec_path, gen_out, opts.seed);
        if (train->parsed()) return injector::cmd_train(opts);
        if (eval->parsed()) return injector::cmd_eval(checkpoint_path, opts);
        if (param_count->parsed()) return injector::cmd_param_count(opts, naive);
        if (sparsity->parsed()) {
            return injector::cmd_analyze_sparsity(checkpoints, opts, attribute, n_bins);
        }
        if (ablate->parsed()) return injector::cmd_ablate(opts);
        if (transfer->parsed()) return injector::cmd_transfer(opts);
        if (gradcheck->parsed()) return injector::cmd_grad_check(opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
