#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "odice/grid.hpp"
#include "odice/train.hpp"

namespace odice::config {

// Bad keys, malformed values, out-of-range values. Mapped to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Provenance { def, file, flag };

enum class EvalPolicy { greedy_v, policy_net };

struct RunConfig {
    // grid
    int width = 30;
    int height = 30;
    double step_reward = -1.0;
    double slip_prob = 0.05;
    int max_episode_len = 120;
    double goal_reward_top = 10.0;
    double goal_reward_right = 5.0;
    // training
    train::TrainConfig train;
    // dataset / evaluation / probes
    int n_traj = 20;
    int episodes = 100;
    double sigma = 0.02;
    int n_noise = 10;
    EvalPolicy eval_policy = EvalPolicy::greedy_v;
    // paths
    std::string dataset = "dataset.jsonl";
    std::string checkpoint = "value.ckpt";
    std::string policy_checkpoint = "policy.ckpt";
    std::string metrics = "metrics.csv";
    std::string heatmap_csv = "heatmap.csv";
    std::string heatmap_pgm = "heatmap.pgm";
    std::string probe_dir = ".";
    std::string summary = "sweep.csv";
    std::string eval_out;
    // sweep grid
    std::vector<double> sweep_lambdas = {0.4, 0.6};
    std::vector<double> sweep_etas = {0.2, 1.0};

    std::map<std::string, Provenance> provenance;
};

// Applies the config file text first, then the flag list ("--key value"
// pairs); flag wins over file wins over default. Unknown keys/flags and
// out-of-range values raise UsageError.
RunConfig parse_config(const std::string& file_text, const std::vector<std::string>& flags);

// Goal bands span the middle third of the top and right borders, so the
// default 30x30 grid gets x in [10,19], y=29 and x=29, y in [10,19].
grid::GridSpec grid_spec_from(const RunConfig& config);

// One help line per key: flag form, default, range.
std::string help_text();

}  // namespace odice::config
