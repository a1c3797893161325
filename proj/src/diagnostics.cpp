#include "odice/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "odice/common.hpp"

namespace odice::diagnostics {

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(vdot(a, a)); }

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return num / den;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

double eta_threshold_from_gradients(const std::vector<double>& grad_s,
                                    const std::vector<double>& grad_next, double gamma) {
    const double ns = norm(grad_s);
    const double nn = norm(grad_next);
    if (nn == 0.0) throw std::invalid_argument("theorem2: gradient at s' is zero");
    if (ns == 0.0) throw std::invalid_argument("theorem2: gradient at s is zero");
    const double cos_phi = std::clamp(vdot(grad_s, grad_next) / (ns * nn), -1.0, 1.0);
    const double sin2 = 1.0 - cos_phi * cos_phi;
    // below ~1e-6 rad the angle is indistinguishable from zero in double
    if (sin2 <= 1e-12)
        throw std::runtime_error("theorem2: threshold undefined (parallel gradients)");
    const double rho = ns / (gamma * nn);
    return (cos_phi * rho - rho * rho) / sin2;
}

double feature_dot_mean(const net::Architecture& arch, const net::ParamVector& params,
                        const grid::Dataset& dataset) {
    if (dataset.transitions.empty()) throw std::invalid_argument("feature_dot_mean: empty dataset");
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < dataset.transitions.size(); ++i)
        if (!dataset.transitions[i].done) all.push_back(i);
    return train::gradient_pair_stats(arch, params, dataset, all).psi_mean;
}

ScalingProbeResult theorem1_scaling_probe(const train::TrainerState& state,
                                          const train::Batch& batch,
                                          const divergence::Spec& div, double gamma,
                                          double eta, ProbeStep step_kind,
                                          const std::vector<double>& alphas) {
    if (alphas.size() < 2) throw std::invalid_argument("scaling probe: need at least 2 alphas");
    for (double a : alphas)
        if (!(a > 0.0)) throw std::invalid_argument("scaling probe: alphas must be > 0");

    const net::Architecture& arch = state.value_arch;
    const net::ParamVector g1 =
        train::forward_gradient(arch, state.value_params, state.value_target, div, gamma, batch);
    const net::ParamVector g2 =
        train::backward_gradient(arch, state.value_params, state.value_target, div, gamma, batch);

    net::ParamVector step2;
    if (step_kind == ProbeStep::orthogonal) {
        step2 = train::project(g2, g1);
        for (double& v : step2) v *= eta;
    } else {
        step2 = g2;
    }

    auto loss_fwd = [&](const net::ParamVector& p) {
        const auto res = train::residual_forward(arch, p, state.value_target, gamma, batch);
        double acc = 0.0;
        for (double d : res) acc += divergence::conjugate(div, d);
        return acc / static_cast<double>(res.size());
    };

    ScalingProbeResult out;
    out.alphas = alphas;
    for (double alpha : alphas) {
        net::ParamVector theta1 = state.value_params;
        for (std::size_t i = 0; i < theta1.size(); ++i) theta1[i] -= alpha * g1[i];
        net::ParamVector theta2 = theta1;
        for (std::size_t i = 0; i < theta2.size(); ++i) theta2[i] -= alpha * step2[i];
        const double d = std::abs(loss_fwd(theta2) - loss_fwd(theta1));
        out.deltas.push_back(d);
        if (d == 0.0) out.degenerate = true;
    }
    if (out.degenerate) {
        out.slope = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        lx.push_back(std::log(alphas[i]));
        ly.push_back(std::log(out.deltas[i]));
    }
    out.slope = fit_slope(lx, ly);
    return out;
}

double theorem2_eta_threshold(const net::Architecture& arch, const net::ParamVector& params,
                              const train::Sample& sample, double gamma) {
    const std::vector<double> xs(sample.s.begin(), sample.s.end());
    const std::vector<double> xn(sample.s_next.begin(), sample.s_next.end());
    const net::ParamVector gs = net::grad_value(arch, params, xs);
    const net::ParamVector gn = net::grad_value(arch, params, xn);
    return eta_threshold_from_gradients(gs, gn, gamma);
}

DescentProbeResult theorem2_descent_probe(const grid::Dataset& dataset,
                                          const divergence::Spec& div, double gamma,
                                          double alpha, int probes, std::uint64_t seed,
                                          net::Activation activation) {
    std::vector<std::size_t> nonterm;
    for (std::size_t i = 0; i < dataset.transitions.size(); ++i)
        if (!dataset.transitions[i].done) nonterm.push_back(i);
    if (nonterm.empty()) throw std::invalid_argument("descent probe: no non-terminal transitions");

    auto gen = substream(seed, 0x74683264ULL);  // "th2d"
    const net::Architecture arch{2, {128, 128}, 1, activation};
    net::Workspace ws;
    net::ensure_workspace(arch, ws);

    DescentProbeResult out;
    out.probes = probes;
    for (int k = 0; k < probes; ++k) {
        const net::ParamVector params = net::init_params(arch, gen());
        const std::size_t idx = nonterm[uniform_below(gen, nonterm.size())];
        const train::Sample sm = train::make_sample(dataset.spec, dataset.transitions[idx]);

        const std::vector<double> xs(sm.s.begin(), sm.s.end());
        const std::vector<double> xn(sm.s_next.begin(), sm.s_next.end());
        const net::ParamVector gs = net::grad_value(arch, params, xs);
        const net::ParamVector gn = net::grad_value(arch, params, xn);

        double threshold;
        try {
            threshold = eta_threshold_from_gradients(gs, gn, gamma);
        } catch (const std::exception&) {
            ++out.skipped;
            continue;
        }
        const double eta = threshold + 0.1 * std::abs(threshold) + 0.1;

        auto loss_at = [&](const net::ParamVector& p) {
            const double v_s = net::forward_ws(arch, p, sm.s.data(), ws)[0];
            const double v_n = net::forward_ws(arch, p, sm.s_next.data(), ws)[0];
            return divergence::conjugate(div, sm.r + gamma * v_n - v_s);
        };

        const double v_s = net::forward_ws(arch, params, sm.s.data(), ws)[0];
        const double v_n = net::forward_ws(arch, params, sm.s_next.data(), ws)[0];
        const double c = divergence::conjugate_prime(div, sm.r + gamma * v_n - v_s);
        if (c == 0.0) {
            ++out.skipped;
            continue;
        }

        // grad L1 = -c grad V(s); grad L2 = c gamma grad V(s'); the projected
        // part of L2 along the normal plane of L1 equals the projection of
        // grad V(s') off grad V(s), scaled by c gamma.
        std::vector<double> perp = gn;
        const double denom = vdot(gs, gs);
        const double coeff = vdot(gn, gs) / denom;
        for (std::size_t i = 0; i < perp.size(); ++i) perp[i] -= coeff * gs[i];

        net::ParamVector stepped = params;
        for (std::size_t i = 0; i < stepped.size(); ++i) {
            const double dir = -c * gs[i] + eta * c * gamma * perp[i];
            stepped[i] -= alpha * dir;
        }
        if (loss_at(stepped) < loss_at(params)) ++out.decreased;
    }
    const int done = out.probes - out.skipped;
    out.fraction_decreased = done > 0 ? static_cast<double>(out.decreased) / done : 0.0;
    return out;
}

double robustness_sign_flip(const net::Architecture& arch, const net::ParamVector& params,
                            const grid::Dataset& dataset, double sigma, int n_noise,
                            std::uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sign_flip: sigma must be > 0");
    if (n_noise < 1) throw std::invalid_argument("sign_flip: n_noise must be >= 1");
    auto gen = substream(seed, 0x666c6970ULL);  // "flip"
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    long long flips = 0, total = 0;
    for (const auto& tr : dataset.transitions) {
        if (tr.done) continue;
        const auto enc_s = grid::encode(dataset.spec, tr.s);
        const auto enc_n = grid::encode(dataset.spec, tr.s_next);
        const double v_s = net::forward_ws(arch, params, enc_s.data(), ws)[0];
        const double v_n = net::forward_ws(arch, params, enc_n.data(), ws)[0];
        const double base = v_n - v_s;
        for (int k = 0; k < n_noise; ++k) {
            const double u1 = uniform01(gen);
            const double u2 = uniform01(gen);
            const double mag = std::sqrt(-2.0 * std::log1p(-u1));
            const double z0 = mag * std::cos(kTwoPi * u2);
            const double z1 = mag * std::sin(kTwoPi * u2);
            const double noisy[2] = {enc_n[0] + sigma * z0, enc_n[1] + sigma * z1};
            const double v_noisy = net::forward_ws(arch, params, noisy, ws)[0];
            const double pert = v_noisy - v_s;
            if ((base > 0.0 && pert < 0.0) || (base < 0.0 && pert > 0.0)) ++flips;
            ++total;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(flips) / static_cast<double>(total);
}

double percent_difference(const std::vector<double>& returns) {
    if (returns.empty()) throw std::invalid_argument("percent_difference: empty returns");
    double mean = 0.0, worst = returns[0];
    for (double r : returns) {
        mean += r;
        worst = std::min(worst, r);
    }
    mean /= static_cast<double>(returns.size());
    if (mean == 0.0) throw std::invalid_argument("percent_difference: zero mean");
    return 100.0 * (mean - worst) / std::abs(mean);
}

std::vector<double> value_heatmap(const net::Architecture& arch, const net::ParamVector& params,
                                  const grid::GridSpec& spec) {
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    std::vector<double> heat(static_cast<std::size_t>(spec.width) * spec.height);
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const auto enc = grid::encode(spec, {x, y});
            const double v = net::forward_ws(arch, params, enc.data(), ws)[0];
            heat[static_cast<std::size_t>(y) * spec.width + x] = v;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    }
    if (vmax == vmin) {
        std::fill(heat.begin(), heat.end(), 50.0);
        return heat;
    }
    const double scale = 100.0 / (vmax - vmin);
    for (double& v : heat) v = (v - vmin) * scale;
    return heat;
}

double heatmap_support_gap(const std::vector<double>& heat,
                           const std::vector<std::uint8_t>& mask) {
    if (heat.size() != mask.size())
        throw std::invalid_argument("support_gap: heat/mask size mismatch");
    double in_sum = 0.0, out_sum = 0.0;
    long long in_n = 0, out_n = 0;
    for (std::size_t i = 0; i < heat.size(); ++i) {
        if (mask[i]) {
            in_sum += heat[i];
            ++in_n;
        } else {
            out_sum += heat[i];
            ++out_n;
        }
    }
    if (in_n == 0 || out_n == 0)
        throw std::invalid_argument("support_gap: need both in-support and OOD cells");
    return in_sum / in_n - out_sum / out_n;
}

std::string heatmap_csv(const std::vector<double>& heat, const grid::GridSpec& spec) {
    std::string out;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            if (x) out += ',';
            out += fmt_double(heat[static_cast<std::size_t>(y) * spec.width + x]);
        }
        out += '\n';
    }
    return out;
}

std::string heatmap_pgm(const std::vector<double>& heat, const grid::GridSpec& spec) {
    std::string out = "P2\n" + fmt_int(spec.width) + " " + fmt_int(spec.height) + "\n255\n";
    for (int y = spec.height - 1; y >= 0; --y) {
        for (int x = 0; x < spec.width; ++x) {
            if (x) out += ' ';
            long v = std::lround(heat[static_cast<std::size_t>(y) * spec.width + x] * 2.55);
            v = std::clamp(v, 0L, 255L);
            out += fmt_int(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace odice::diagnostics
