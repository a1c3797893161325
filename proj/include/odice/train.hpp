#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "odice/divergence.hpp"
#include "odice/grid.hpp"
#include "odice/net.hpp"

namespace odice::train {

enum class GradMode { true_grad, semi_grad, orthogonal };

struct TrainConfig {
    double lambda = 0.6;  // (0, 1): weight of the conjugate term vs. the linear push-down
    double eta = 1.0;     // strength of the projected backward gradient (orthogonal mode)
    double lr = 1e-4;
    double tau = 5e-3;
    double gamma = 0.99;
    int batch_size = 256;
    int steps = 10000;
    GradMode grad_mode = GradMode::orthogonal;
    divergence::ConjugateMode conjugate_mode = divergence::ConjugateMode::unconstrained;
    bool bc_trick = true;  // drop the "+1" in the BC weight
    net::Activation activation = net::Activation::relu;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

// One dataset transition with encoded states, ready for the nets.
struct Sample {
    std::array<double, 2> s{};
    std::array<double, 2> s_next{};
    double r = 0.0;
    bool done = false;
    int action = 0;
};

using Batch = std::vector<Sample>;

Sample make_sample(const grid::GridSpec& spec, const grid::Transition& tr);
Batch make_batch(const grid::Dataset& dataset, const std::vector<std::size_t>& indices);

struct TrainerState {
    net::Architecture value_arch;
    net::Architecture policy_arch;
    net::ParamVector value_params;
    net::ParamVector value_target;
    net::ParamVector policy_params;
    net::AdamState value_adam;
    net::AdamState policy_adam;
    long long step = 0;
    std::mt19937_64 sampler;
};

TrainerState init_state(const TrainConfig& config, const grid::GridSpec& spec);

// Per-sample forward residual r + gamma * (1 - done) * V_target(s') - V(s).
std::vector<double> residual_forward(const net::Architecture& arch,
                                     const net::ParamVector& params,
                                     const net::ParamVector& target, double gamma,
                                     const Batch& batch);

// Batch-mean forward statistics computed in one pass.
struct ForwardStats {
    net::ParamVector grad_fwd;         // mean gradient of f*(residual_forward) w.r.t. params
    net::ParamVector mean_value_grad;  // mean gradient of V(s)
    std::vector<double> residuals;
    double loss_fwd = 0.0;    // mean f*(residual)
    double loss_value = 0.0;  // mean V(s)
};

ForwardStats forward_stats(const net::Architecture& arch, const net::ParamVector& params,
                           const net::ParamVector& target, const divergence::Spec& div,
                           double gamma, const Batch& batch);

// Batch-mean gradient of f*(residual_forward) w.r.t. params; the target net is
// frozen on s'.
net::ParamVector forward_gradient(const net::Architecture& arch, const net::ParamVector& params,
                                  const net::ParamVector& target, const divergence::Spec& div,
                                  double gamma, const Batch& batch);

// Batch-mean gradient of f*(r + gamma * V(s') - V_target(s)) w.r.t. params; the
// target net is frozen on s. Terminal transitions contribute zero.
net::ParamVector backward_gradient(const net::Architecture& arch, const net::ParamVector& params,
                                   const net::ParamVector& target, const divergence::Spec& div,
                                   double gamma, const Batch& batch);

// g_back minus its component along g_fwd. A forward gradient with squared norm
// below 1e-12 is treated as zero and g_back is returned unchanged.
net::ParamVector project(const net::ParamVector& g_back, const net::ParamVector& g_fwd);

struct ValueUpdateStats {
    double loss_total = 0.0;
    double loss_fwd = 0.0;
    double grad_fwd_norm = 0.0;
    double grad_perp_norm = 0.0;  // zero in semi/true modes
};

// One optimizer step on the value parameters followed by the EMA target update.
ValueUpdateStats value_update(TrainerState& state, const Batch& batch, const TrainConfig& config);

// One ascent step of weighted behavior cloning on the policy parameters.
// Returns the mean BC weight over the batch.
double policy_update(TrainerState& state, const Batch& batch, const TrainConfig& config);

// Emitted every 100 steps during train().
struct DiagnosticsRecord {
    long long step = 0;
    double loss_total = 0.0;
    double loss_fwd = 0.0;
    double psi_mean = 0.0;      // mean <grad V(s), grad V(s')> over the probe subsample
    double cos_phi_mean = 0.0;  // mean cosine of the angle between the pair gradients
    double bc_weight_mean = 0.0;
    double grad_fwd_norm = 0.0;
    double grad_perp_norm = 0.0;
};

struct PairStats {
    double psi_mean = 0.0;
    double cos_mean = 0.0;
};

// Gradient statistics over the given non-terminal transitions.
PairStats gradient_pair_stats(const net::Architecture& arch, const net::ParamVector& params,
                              const grid::Dataset& dataset,
                              const std::vector<std::size_t>& indices);

// Deterministic subsample of at most max_count non-terminal transition indices.
std::vector<std::size_t> probe_indices(const grid::Dataset& dataset, std::size_t max_count,
                                       std::uint64_t seed);

struct TrainResult {
    TrainerState state;
    std::vector<DiagnosticsRecord> records;
};

// Algorithm loop: sample batch with replacement -> value_update -> policy_update,
// with a DiagnosticsRecord every 100 steps. Pure function of (config, dataset).
TrainResult train(const TrainConfig& config, const grid::Dataset& dataset);

// Greedy action over the value of the four border-clipped neighbor cells;
// ties follow grid::kActionOrder.
grid::Action greedy_v_policy(const net::Architecture& arch, const net::ParamVector& params,
                             const grid::GridSpec& spec, grid::Cell s);

// Softmax policy: argmax logit over the policy net (deterministic extraction).
grid::Action policy_net_action(const net::Architecture& arch, const net::ParamVector& params,
                               const grid::GridSpec& spec, grid::Cell s);

struct EvalResult {
    double success_rate = 0.0;
    std::vector<double> returns;  // undiscounted per-episode returns
};

// Rolls episodes from spec.start; chosen actions slip to a uniform random
// action with probability spec.slip_prob. Deterministic per seed.
EvalResult rollout_eval(const std::function<grid::Action(grid::Cell)>& policy,
                        const grid::GridSpec& spec, int episodes, std::uint64_t seed);

std::string metrics_csv(const std::vector<DiagnosticsRecord>& records);

}  // namespace odice::train
