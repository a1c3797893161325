#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace odice::net {

enum class Activation { relu, tanh };

// Fully connected net: input -> hidden... -> output. Hidden layers apply the
// activation, the output layer is affine. `hidden` may be empty, which gives
// a single affine map (used by tests and the linear-setting probes).
struct Architecture {
    int input_dim = 2;
    std::vector<int> hidden = {128, 128};
    int output_dim = 1;
    Activation activation = Activation::relu;
};

using ParamVector = std::vector<double>;

// Layer l holds a (fan_out x fan_in) row-major weight block followed by
// fan_out biases; blocks are concatenated in layer order.
std::size_t param_count(const Architecture& arch);

void validate(const Architecture& arch);

// He-style uniform init, weights ~ U(+-sqrt(6/fan_in)), biases zero.
ParamVector init_params(const Architecture& arch, std::uint64_t seed);

// Reusable scratch for forward/backward passes. One per thread.
struct Workspace {
    std::vector<std::vector<double>> act;  // act[l]: output of layer l (act[0] = input)
    std::vector<std::vector<double>> pre;  // pre[l]: pre-activation of layer l (l >= 1)
    std::vector<double> delta_hi, delta_lo;
    ParamVector grad;  // per-sample parameter gradient
};

void ensure_workspace(const Architecture& arch, Workspace& ws);

// Runs the net on x (length input_dim); result lives in ws until the next call.
// Returns pointer to output_dim doubles.
const double* forward_ws(const Architecture& arch, const ParamVector& params,
                         const double* x, Workspace& ws);

// Reverse pass over the activations left by the preceding forward_ws call.
// cotangent has length output_dim; the parameter gradient is written to ws.grad.
void backward_ws(const Architecture& arch, const ParamVector& params,
                 const double* cotangent, Workspace& ws);

// Allocating convenience wrappers.
std::vector<double> forward(const Architecture& arch, const ParamVector& params,
                            const std::vector<double>& x);
double forward_scalar(const Architecture& arch, const ParamVector& params,
                      const std::vector<double>& x);

// Exact reverse-mode gradient of the scalar output w.r.t. all parameters.
// Requires output_dim == 1.
ParamVector grad_value(const Architecture& arch, const ParamVector& params,
                       const std::vector<double>& x);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(std::size_t dim);

// In-place Adam update with bias correction. Throws on non-finite gradient
// entries so training aborts with a diagnostic instead of poisoning state.
void adam_step(AdamState& state, ParamVector& params, const ParamVector& grad, double lr);

// target <- tau * online + (1 - tau) * target, tau in [0, 1].
void ema_update(ParamVector& target, const ParamVector& online, double tau);

// Batch-major scratch: activations for `rows` samples at once. The batched
// kernels below are what the training loop runs on; they compute the same
// quantities as the per-sample passes with cache-friendly layer sweeps.
struct BatchWorkspace {
    int rows = 0;
    std::vector<std::vector<double>> act;   // act[l]: rows x dims[l], row-major
    std::vector<std::vector<double>> pre;   // pre[l]: rows x dims[l] (hidden layers)
    std::vector<std::vector<double>> wt;    // per-layer transposed weights
    std::vector<double> delta_hi, delta_lo;
    ParamVector grad;
};

void ensure_batch_workspace(const Architecture& arch, int rows, BatchWorkspace& ws);

// x: rows x input_dim, row-major. Returns rows x output_dim outputs living in ws.
const double* forward_batch(const Architecture& arch, const ParamVector& params,
                            const double* x, int rows, BatchWorkspace& ws);

// cotangent: rows x output_dim. Writes the cotangent-weighted SUM of per-sample
// parameter gradients into ws.grad, over the activations of the last
// forward_batch call. May be invoked repeatedly with different cotangents.
void backward_batch(const Architecture& arch, const ParamVector& params,
                    const double* cotangent, BatchWorkspace& ws);

// Checkpoint file: little-endian header (magic "VCKP", format version,
// architecture dims, parameter count) followed by the flat f64 parameter list.
// Byte layout documented in the README.
void save_checkpoint(const std::string& path, const Architecture& arch,
                     const ParamVector& params);
std::pair<Architecture, ParamVector> load_checkpoint(const std::string& path);

}  // namespace odice::net
