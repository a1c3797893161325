#include "odice/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "odice/common.hpp"

namespace odice::net {

namespace {

std::vector<int> layer_dims(const Architecture& arch) {
    std::vector<int> dims;
    dims.reserve(arch.hidden.size() + 2);
    dims.push_back(arch.input_dim);
    for (int h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.output_dim);
    return dims;
}

// Four accumulator chains keep the dot product off the FMA latency wall.
double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

double activate(Activation act, double z) {
    if (act == Activation::relu) return z > 0.0 ? z : 0.0;
    return std::tanh(z);
}

double activate_prime(Activation act, double z) {
    if (act == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

}  // namespace

void validate(const Architecture& arch) {
    if (arch.input_dim < 1) throw std::invalid_argument("net: input_dim must be >= 1");
    if (arch.output_dim < 1) throw std::invalid_argument("net: output_dim must be >= 1");
    for (int h : arch.hidden)
        if (h < 1) throw std::invalid_argument("net: hidden widths must be >= 1");
}

std::size_t param_count(const Architecture& arch) {
    validate(arch);
    const auto dims = layer_dims(arch);
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += static_cast<std::size_t>(dims[l] + 1) * static_cast<std::size_t>(dims[l + 1]);
    return n;
}

ParamVector init_params(const Architecture& arch, std::uint64_t seed) {
    const auto dims = layer_dims(arch);
    ParamVector params(param_count(arch), 0.0);
    auto gen = substream(seed, 0x6e657469ULL);  // "neti"
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double w_limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (int k = 0; k < fan_out * fan_in; ++k)
            params[off + static_cast<std::size_t>(k)] = (2.0 * uniform01(gen) - 1.0) * w_limit;
        off += static_cast<std::size_t>(fan_out) * fan_in;
        // small nonzero biases keep pre-activations off the relu kinks even
        // for the all-zero input cell
        const double b_limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int k = 0; k < fan_out; ++k)
            params[off + static_cast<std::size_t>(k)] = (2.0 * uniform01(gen) - 1.0) * b_limit;
        off += static_cast<std::size_t>(fan_out);
    }
    return params;
}

void ensure_workspace(const Architecture& arch, Workspace& ws) {
    const auto dims = layer_dims(arch);
    ws.act.resize(dims.size());
    ws.pre.resize(dims.size());
    for (std::size_t l = 0; l < dims.size(); ++l) {
        ws.act[l].resize(static_cast<std::size_t>(dims[l]));
        if (l > 0) ws.pre[l].resize(static_cast<std::size_t>(dims[l]));
    }
    std::size_t widest = 0;
    for (int d : dims) widest = std::max(widest, static_cast<std::size_t>(d));
    ws.delta_hi.resize(widest);
    ws.delta_lo.resize(widest);
    ws.grad.resize(param_count(arch));
}

const double* forward_ws(const Architecture& arch, const ParamVector& params,
                         const double* x, Workspace& ws) {
    const auto dims = layer_dims(arch);
    if (params.size() != param_count(arch))
        throw std::invalid_argument("net: parameter vector length does not match architecture");
    std::memcpy(ws.act[0].data(), x, sizeof(double) * static_cast<std::size_t>(dims[0]));
    const double* p = params.data();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        const double* w = p;
        const double* b = p + static_cast<std::size_t>(out) * in;
        const double* src = ws.act[l].data();
        double* pre = ws.pre[l + 1].data();
        for (int o = 0; o < out; ++o) pre[o] = b[o] + dot(w + static_cast<std::size_t>(o) * in, src, in);
        const bool last = (l + 2 == dims.size());
        double* dst = ws.act[l + 1].data();
        if (last) {
            std::memcpy(dst, pre, sizeof(double) * static_cast<std::size_t>(out));
        } else {
            for (int o = 0; o < out; ++o) dst[o] = activate(arch.activation, pre[o]);
        }
        p += static_cast<std::size_t>(out) * (in + 1);
    }
    return ws.act.back().data();
}

void backward_ws(const Architecture& arch, const ParamVector& params,
                 const double* cotangent, Workspace& ws) {
    const auto dims = layer_dims(arch);
    const std::size_t n_layers = dims.size() - 1;
    // delta_hi holds d(loss)/d(pre-activation) of the layer being processed.
    std::memcpy(ws.delta_hi.data(), cotangent,
                sizeof(double) * static_cast<std::size_t>(dims.back()));

    // Per-layer parameter offsets, walked backwards.
    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(dims[l] + 1) * static_cast<std::size_t>(dims[l + 1]);
    }

    for (std::size_t li = n_layers; li-- > 0;) {
        const int in = dims[li];
        const int out = dims[li + 1];
        const double* w = params.data() + offsets[li];
        double* gw = ws.grad.data() + offsets[li];
        double* gb = gw + static_cast<std::size_t>(out) * in;
        const double* src = ws.act[li].data();
        double* dpre = ws.delta_hi.data();

        // Hidden layers: fold the activation derivative into delta.
        if (li + 1 < n_layers) {
            const double* pre = ws.pre[li + 1].data();
            for (int o = 0; o < out; ++o) dpre[o] *= activate_prime(arch.activation, pre[o]);
        }

        if (li > 0) {
            double* dlo = ws.delta_lo.data();
            std::memset(dlo, 0, sizeof(double) * static_cast<std::size_t>(in));
            for (int o = 0; o < out; ++o) {
                const double d = dpre[o];
                gb[o] = d;
                const double* wrow = w + static_cast<std::size_t>(o) * in;
                double* gwrow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    gwrow[i] = d * src[i];
                    dlo[i] += d * wrow[i];
                }
            }
            std::swap(ws.delta_hi, ws.delta_lo);
        } else {
            for (int o = 0; o < out; ++o) {
                const double d = dpre[o];
                gb[o] = d;
                double* gwrow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) gwrow[i] = d * src[i];
            }
        }
    }
}

void ensure_batch_workspace(const Architecture& arch, int rows, BatchWorkspace& ws) {
    const auto dims = layer_dims(arch);
    const std::size_t n_layers = dims.size() - 1;
    ws.rows = rows;
    ws.act.resize(dims.size());
    ws.pre.resize(dims.size());
    for (std::size_t l = 0; l < dims.size(); ++l) {
        ws.act[l].resize(static_cast<std::size_t>(rows) * dims[l]);
        if (l > 0) ws.pre[l].resize(static_cast<std::size_t>(rows) * dims[l]);
    }
    ws.wt.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l)
        ws.wt[l].resize(static_cast<std::size_t>(dims[l]) * dims[l + 1]);
    std::size_t widest = 0;
    for (int d : dims) widest = std::max(widest, static_cast<std::size_t>(d));
    ws.delta_hi.resize(static_cast<std::size_t>(rows) * widest);
    ws.delta_lo.resize(static_cast<std::size_t>(rows) * widest);
    ws.grad.resize(param_count(arch));
}

const double* forward_batch(const Architecture& arch, const ParamVector& params,
                            const double* x, int rows, BatchWorkspace& ws) {
    const auto dims = layer_dims(arch);
    if (params.size() != param_count(arch))
        throw std::invalid_argument("net: parameter vector length does not match architecture");
    if (rows != ws.rows || ws.grad.size() != params.size())
        ensure_batch_workspace(arch, rows, ws);
    std::memcpy(ws.act[0].data(), x, sizeof(double) * static_cast<std::size_t>(rows) * dims[0]);

    const double* p = params.data();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        const double* w = p;
        const double* bias = p + static_cast<std::size_t>(out) * in;
        // transpose so the output-neuron loop is contiguous
        double* wt = ws.wt[l].data();
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i) wt[static_cast<std::size_t>(i) * out + o] = w[static_cast<std::size_t>(o) * in + i];

        const bool last = (l + 2 == dims.size());
        for (int b = 0; b < rows; ++b) {
            const double* src = ws.act[l].data() + static_cast<std::size_t>(b) * in;
            double* pre = ws.pre[l + 1].data() + static_cast<std::size_t>(b) * out;
            std::memcpy(pre, bias, sizeof(double) * static_cast<std::size_t>(out));
            for (int i = 0; i < in; ++i) {
                const double a = src[i];
                if (a == 0.0) continue;  // relu activations are often zero
                const double* wrow = wt + static_cast<std::size_t>(i) * out;
                for (int o = 0; o < out; ++o) pre[o] += a * wrow[o];
            }
            double* dst = ws.act[l + 1].data() + static_cast<std::size_t>(b) * out;
            if (last) {
                std::memcpy(dst, pre, sizeof(double) * static_cast<std::size_t>(out));
            } else {
                for (int o = 0; o < out; ++o) dst[o] = activate(arch.activation, pre[o]);
            }
        }
        p += static_cast<std::size_t>(out) * (in + 1);
    }
    return ws.act.back().data();
}

void backward_batch(const Architecture& arch, const ParamVector& params,
                    const double* cotangent, BatchWorkspace& ws) {
    const auto dims = layer_dims(arch);
    const std::size_t n_layers = dims.size() - 1;
    const int rows = ws.rows;
    std::fill(ws.grad.begin(), ws.grad.end(), 0.0);
    std::memcpy(ws.delta_hi.data(), cotangent,
                sizeof(double) * static_cast<std::size_t>(rows) * dims.back());

    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(dims[l] + 1) * static_cast<std::size_t>(dims[l + 1]);
    }

    for (std::size_t li = n_layers; li-- > 0;) {
        const int in = dims[li];
        const int out = dims[li + 1];
        const double* w = params.data() + offsets[li];
        double* gw = ws.grad.data() + offsets[li];
        double* gb = gw + static_cast<std::size_t>(out) * in;
        double* dpre = ws.delta_hi.data();

        if (li + 1 < n_layers) {
            const double* pre = ws.pre[li + 1].data();
            for (int b = 0; b < rows; ++b)
                for (int o = 0; o < out; ++o) {
                    const std::size_t k = static_cast<std::size_t>(b) * out + o;
                    dpre[k] *= activate_prime(arch.activation, pre[k]);
                }
        }

        for (int b = 0; b < rows; ++b)
            for (int o = 0; o < out; ++o) gb[o] += dpre[static_cast<std::size_t>(b) * out + o];

        const double* h = ws.act[li].data();
        // weight gradient, four samples per sweep so gw rows stay hot
        int b0 = 0;
        for (; b0 + 4 <= rows; b0 += 4) {
            const double* h0 = h + static_cast<std::size_t>(b0) * in;
            const double* h1 = h0 + in;
            const double* h2 = h1 + in;
            const double* h3 = h2 + in;
            const double* d = dpre + static_cast<std::size_t>(b0) * out;
            for (int o = 0; o < out; ++o) {
                const double d0 = d[o], d1 = d[out + o], d2 = d[2 * out + o], d3 = d[3 * out + o];
                if (d0 == 0.0 && d1 == 0.0 && d2 == 0.0 && d3 == 0.0) continue;
                double* gwrow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i)
                    gwrow[i] += d0 * h0[i] + d1 * h1[i] + d2 * h2[i] + d3 * h3[i];
            }
        }
        for (; b0 < rows; ++b0) {
            const double* hrow = h + static_cast<std::size_t>(b0) * in;
            const double* d = dpre + static_cast<std::size_t>(b0) * out;
            for (int o = 0; o < out; ++o) {
                if (d[o] == 0.0) continue;
                double* gwrow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) gwrow[i] += d[o] * hrow[i];
            }
        }

        if (li > 0) {
            double* dlo = ws.delta_lo.data();
            std::memset(dlo, 0, sizeof(double) * static_cast<std::size_t>(rows) * in);
            int b = 0;
            for (; b + 4 <= rows; b += 4) {
                double* x0 = dlo + static_cast<std::size_t>(b) * in;
                double* x1 = x0 + in;
                double* x2 = x1 + in;
                double* x3 = x2 + in;
                const double* d = dpre + static_cast<std::size_t>(b) * out;
                for (int o = 0; o < out; ++o) {
                    const double d0 = d[o], d1 = d[out + o], d2 = d[2 * out + o], d3 = d[3 * out + o];
                    if (d0 == 0.0 && d1 == 0.0 && d2 == 0.0 && d3 == 0.0) continue;
                    const double* wrow = w + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) {
                        x0[i] += d0 * wrow[i];
                        x1[i] += d1 * wrow[i];
                        x2[i] += d2 * wrow[i];
                        x3[i] += d3 * wrow[i];
                    }
                }
            }
            for (; b < rows; ++b) {
                double* xr = dlo + static_cast<std::size_t>(b) * in;
                const double* d = dpre + static_cast<std::size_t>(b) * out;
                for (int o = 0; o < out; ++o) {
                    if (d[o] == 0.0) continue;
                    const double* wrow = w + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) xr[i] += d[o] * wrow[i];
                }
            }
            std::swap(ws.delta_hi, ws.delta_lo);
        }
    }
}

std::vector<double> forward(const Architecture& arch, const ParamVector& params,
                            const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != arch.input_dim)
        throw std::invalid_argument("net: input length does not match input_dim");
    Workspace ws;
    ensure_workspace(arch, ws);
    const double* out = forward_ws(arch, params, x.data(), ws);
    return std::vector<double>(out, out + arch.output_dim);
}

double forward_scalar(const Architecture& arch, const ParamVector& params,
                      const std::vector<double>& x) {
    if (arch.output_dim != 1)
        throw std::invalid_argument("net: forward_scalar requires output_dim == 1");
    return forward(arch, params, x)[0];
}

ParamVector grad_value(const Architecture& arch, const ParamVector& params,
                       const std::vector<double>& x) {
    if (arch.output_dim != 1)
        throw std::invalid_argument("net: grad_value requires a scalar-output architecture");
    if (static_cast<int>(x.size()) != arch.input_dim)
        throw std::invalid_argument("net: input length does not match input_dim");
    Workspace ws;
    ensure_workspace(arch, ws);
    forward_ws(arch, params, x.data(), ws);
    const double one = 1.0;
    backward_ws(arch, params, &one, ws);
    return ws.grad;
}

AdamState make_adam(std::size_t dim) {
    AdamState s;
    s.m.assign(dim, 0.0);
    s.v.assign(dim, 0.0);
    return s;
}

void adam_step(AdamState& state, ParamVector& params, const ParamVector& grad, double lr) {
    const std::size_t n = params.size();
    if (state.m.size() != n || state.v.size() != n || grad.size() != n)
        throw std::invalid_argument("adam: state/params/grad length mismatch");
    if (lr < 0.0) throw std::invalid_argument("adam: learning rate must be >= 0");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grad[i]))
            throw std::runtime_error("adam: non-finite gradient entry at index " + fmt_int(static_cast<long long>(i)));

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    double* m = state.m.data();
    double* v = state.v.data();
    double* p = params.data();
    const double* g = grad.data();
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

void ema_update(ParamVector& target, const ParamVector& online, double tau) {
    if (target.size() != online.size())
        throw std::invalid_argument("ema: target/online length mismatch");
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("ema: tau must lie in [0, 1]");
    double* t = target.data();
    const double* o = online.data();
    for (std::size_t i = 0; i < target.size(); ++i)
        t[i] = tau * o[i] + (1.0 - tau) * t[i];
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const unsigned char* p;
    const unsigned char* end;
    std::uint32_t u32() {
        if (end - p < 4) throw std::runtime_error("checkpoint: truncated file");
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
        p += 4;
        return v;
    }
    std::uint64_t u64() {
        if (end - p < 8) throw std::runtime_error("checkpoint: truncated file");
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
        p += 8;
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

constexpr std::uint32_t kCheckpointMagic = 0x504b4356u;  // "VCKP" little-endian
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Architecture& arch,
                     const ParamVector& params) {
    if (params.size() != param_count(arch))
        throw std::invalid_argument("checkpoint: parameter vector length does not match architecture");
    std::string out;
    out.reserve(64 + params.size() * 8);
    put_u32(out, kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(arch.input_dim));
    put_u32(out, static_cast<std::uint32_t>(arch.output_dim));
    put_u32(out, arch.activation == Activation::relu ? 0u : 1u);
    put_u32(out, static_cast<std::uint32_t>(arch.hidden.size()));
    for (int h : arch.hidden) put_u32(out, static_cast<std::uint32_t>(h));
    put_u64(out, static_cast<std::uint64_t>(params.size()));
    for (double d : params) put_f64(out, d);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::pair<Architecture, ParamVector> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()),
             reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size()};
    if (r.u32() != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic: " + path);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " + fmt_int(version));
    Architecture arch;
    arch.input_dim = static_cast<int>(r.u32());
    arch.output_dim = static_cast<int>(r.u32());
    arch.activation = r.u32() == 0 ? Activation::relu : Activation::tanh;
    const std::uint32_t n_hidden = r.u32();
    arch.hidden.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i) arch.hidden.push_back(static_cast<int>(r.u32()));
    const std::uint64_t n = r.u64();
    if (n != param_count(arch))
        throw std::runtime_error("checkpoint: parameter count does not match header dims");
    ParamVector params(n);
    for (std::uint64_t i = 0; i < n; ++i) params[i] = r.f64();
    return {arch, params};
}

}  // namespace odice::net
