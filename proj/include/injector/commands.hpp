#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace injector {

struct CliOptions {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out_dir;  // empty = derive from INJECTOR_OUT_ROOT (default ./runs)
    std::string mode;     // optional model-kind override (plain|adapter|injector|tokens)
};

int cmd_generate_data(const std::string& spec_path, const std::string& out_dir,
                      std::optional<uint64_t> seed);
int cmd_train(const CliOptions& opts);
int cmd_eval(const std::string& checkpoint_path, const CliOptions& opts);
int cmd_param_count(const CliOptions& opts, bool naive);
int cmd_analyze_sparsity(const std::vector<std::string>& checkpoint_paths, const CliOptions& opts,
                         const std::string& attribute, int64_t n_bins);
int cmd_ablate(const CliOptions& opts);
int cmd_transfer(const CliOptions& opts);
int cmd_grad_check(const CliOptions& opts);

}  // namespace injector
