#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odice/train.hpp"

namespace odice::diagnostics {

// Mean <grad V(s), grad V(s')> over all non-terminal transitions.
double feature_dot_mean(const net::Architecture& arch, const net::ParamVector& params,
                        const grid::Dataset& dataset);

enum class ProbeStep { orthogonal, true_grad };

struct ScalingProbeResult {
    double slope = 0.0;              // log-log regression of |delta L1| vs alpha
    bool degenerate = false;         // some difference was exactly zero
    std::vector<double> alphas;
    std::vector<double> deltas;
};

// Two plain gradient steps from the current value parameters: first along the
// forward gradient, then along the (projected or raw) backward gradient. The
// reported quantity is how much the forward loss moved during the second step.
ScalingProbeResult theorem1_scaling_probe(const train::TrainerState& state,
                                          const train::Batch& batch,
                                          const divergence::Spec& div, double gamma,
                                          double eta, ProbeStep step_kind,
                                          const std::vector<double>& alphas);

// Threshold on eta above which a single combined step decreases the per-sample
// loss f*(r + gamma V(s') - V(s)) to first order. Throws when the two state
// gradients are parallel (the bound is undefined).
double theorem2_eta_threshold(const net::Architecture& arch, const net::ParamVector& params,
                              const train::Sample& sample, double gamma);

// Same bound on raw gradient vectors; depends only on the norm ratio and angle.
double eta_threshold_from_gradients(const std::vector<double>& grad_s,
                                    const std::vector<double>& grad_next, double gamma);

struct DescentProbeResult {
    int probes = 0;
    int decreased = 0;
    int skipped = 0;  // parallel-gradient or zero-weight samples
    double fraction_decreased = 0.0;
};

// Over `probes` random (net, sample) draws: set eta 10% above the per-sample
// threshold, take one combined step with learning rate alpha, and test whether
// the loss went down.
DescentProbeResult theorem2_descent_probe(const grid::Dataset& dataset,
                                          const divergence::Spec& div, double gamma,
                                          double alpha, int probes, std::uint64_t seed,
                                          net::Activation activation = net::Activation::relu);

// Fraction of (non-terminal transition, noise draw) pairs where Gaussian noise
// on the encoded s' flips the sign of V(s') - V(s). Ties count as non-flips.
double robustness_sign_flip(const net::Architecture& arch, const net::ParamVector& params,
                            const grid::Dataset& dataset, double sigma, int n_noise,
                            std::uint64_t seed);

// 100 * (mean - min) / |mean|. Throws on zero mean.
double percent_difference(const std::vector<double>& returns);

// V evaluated on every cell, affinely rescaled to [0, 100] (constant fields
// map to 50). Index layout: heat[y * width + x].
std::vector<double> value_heatmap(const net::Architecture& arch, const net::ParamVector& params,
                                  const grid::GridSpec& spec);

// In-support minus out-of-support mean of a normalized heatmap.
double heatmap_support_gap(const std::vector<double>& heat,
                           const std::vector<std::uint8_t>& mask);

// CSV: height rows of width comma-separated values, row 0 = y=0.
std::string heatmap_csv(const std::vector<double>& heat, const grid::GridSpec& spec);

// 8-bit ASCII PGM (P2), entries round(heat * 2.55); the top image row is the
// highest y so goals render at the top.
std::string heatmap_pgm(const std::vector<double>& heat, const grid::GridSpec& spec);

}  // namespace odice::diagnostics
