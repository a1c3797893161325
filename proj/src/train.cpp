#include "odice/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "odice/common.hpp"

namespace odice::train {

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s0 = 0.0, s1 = 0.0;
    std::size_t i = 0;
    for (; i + 2 <= a.size(); i += 2) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
    }
    if (i < a.size()) s0 += a[i] * b[i];
    return s0 + s1;
}

void axpy(std::vector<double>& y, double c, const std::vector<double>& x) {
    double* yd = y.data();
    const double* xd = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) yd[i] += c * xd[i];
}

double norm(const std::vector<double>& a) {
    return std::sqrt(vdot(a, a));
}

}  // namespace

void validate(const TrainConfig& config) {
    if (!(config.lambda > 0.0 && config.lambda < 1.0))
        throw std::invalid_argument("train: lambda out of range (0,1)");
    if (!(config.eta >= 0.0)) throw std::invalid_argument("train: eta must be >= 0");
    if (!(config.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
    if (!(config.tau >= 0.0 && config.tau <= 1.0))
        throw std::invalid_argument("train: tau out of range [0,1]");
    if (!(config.gamma > 0.0 && config.gamma < 1.0))
        throw std::invalid_argument("train: gamma out of range (0,1)");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (config.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
}

Sample make_sample(const grid::GridSpec& spec, const grid::Transition& tr) {
    Sample s;
    s.s = grid::encode(spec, tr.s);
    s.s_next = grid::encode(spec, tr.s_next);
    s.r = tr.r;
    s.done = tr.done;
    s.action = static_cast<int>(tr.a);
    return s;
}

Batch make_batch(const grid::Dataset& dataset, const std::vector<std::size_t>& indices) {
    Batch batch;
    batch.reserve(indices.size());
    for (std::size_t idx : indices) batch.push_back(make_sample(dataset.spec, dataset.transitions[idx]));
    return batch;
}

TrainerState init_state(const TrainConfig& config, const grid::GridSpec& spec) {
    validate(config);
    grid::validate(spec);
    TrainerState st;
    st.value_arch = {2, {128, 128}, 1, config.activation};
    st.policy_arch = {2, {128, 128}, 4, config.activation};
    st.value_params = net::init_params(st.value_arch, splitmix64(config.seed ^ 0x76616c7565ULL));
    st.value_target = st.value_params;
    st.policy_params = net::init_params(st.policy_arch, splitmix64(config.seed ^ 0x706f6c696379ULL));
    st.value_adam = net::make_adam(st.value_params.size());
    st.policy_adam = net::make_adam(st.policy_params.size());
    st.sampler = substream(config.seed, 0x6261746368ULL);
    return st;
}

std::vector<double> residual_forward(const net::Architecture& arch,
                                     const net::ParamVector& params,
                                     const net::ParamVector& target, double gamma,
                                     const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("train: empty batch");
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    std::vector<double> out;
    out.reserve(batch.size());
    for (const Sample& sm : batch) {
        const double v_s = net::forward_ws(arch, params, sm.s.data(), ws)[0];
        double boot = 0.0;
        if (!sm.done) boot = gamma * net::forward_ws(arch, target, sm.s_next.data(), ws)[0];
        out.push_back(sm.r + boot - v_s);
    }
    return out;
}

namespace {

// Per-thread batch scratch, reused across steps.
struct BatchScratch {
    net::BatchWorkspace main;
    net::BatchWorkspace aux;
    std::vector<double> x_s, x_next;  // rows x 2 inputs
};

BatchScratch& scratch_for(int which) {
    thread_local BatchScratch scratch[3];
    return scratch[which];
}

void fill_inputs(const Batch& batch, std::vector<double>& x_s, std::vector<double>& x_next) {
    x_s.resize(batch.size() * 2);
    x_next.resize(batch.size() * 2);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        x_s[2 * b] = batch[b].s[0];
        x_s[2 * b + 1] = batch[b].s[1];
        x_next[2 * b] = batch[b].s_next[0];
        x_next[2 * b + 1] = batch[b].s_next[1];
    }
}

}  // namespace

ForwardStats forward_stats(const net::Architecture& arch, const net::ParamVector& params,
                           const net::ParamVector& target, const divergence::Spec& div,
                           double gamma, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("train: empty batch");
    BatchScratch& sc = scratch_for(0);
    fill_inputs(batch, sc.x_s, sc.x_next);
    const int rows = static_cast<int>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(rows);

    const double* v_tgt_next = net::forward_batch(arch, target, sc.x_next.data(), rows, sc.aux);
    const double* v_s = net::forward_batch(arch, params, sc.x_s.data(), rows, sc.main);

    ForwardStats fs;
    fs.residuals.resize(batch.size());
    std::vector<double> cot(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double boot = batch[b].done ? 0.0 : gamma * v_tgt_next[b];
        const double delta = batch[b].r + boot - v_s[b];
        fs.residuals[b] = delta;
        fs.loss_fwd += divergence::conjugate(div, delta) * inv_b;
        fs.loss_value += v_s[b] * inv_b;
        cot[b] = inv_b;
    }
    net::backward_batch(arch, params, cot.data(), sc.main);
    fs.mean_value_grad = sc.main.grad;
    for (std::size_t b = 0; b < batch.size(); ++b)
        cot[b] = -divergence::conjugate_prime(div, fs.residuals[b]) * inv_b;
    net::backward_batch(arch, params, cot.data(), sc.main);
    fs.grad_fwd = sc.main.grad;
    return fs;
}

net::ParamVector forward_gradient(const net::Architecture& arch, const net::ParamVector& params,
                                  const net::ParamVector& target, const divergence::Spec& div,
                                  double gamma, const Batch& batch) {
    return forward_stats(arch, params, target, div, gamma, batch).grad_fwd;
}

net::ParamVector backward_gradient(const net::Architecture& arch, const net::ParamVector& params,
                                   const net::ParamVector& target, const divergence::Spec& div,
                                   double gamma, const Batch& batch) {
    if (batch.empty()) throw std::invalid_argument("train: empty batch");
    BatchScratch& sc = scratch_for(1);
    fill_inputs(batch, sc.x_s, sc.x_next);
    const int rows = static_cast<int>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(rows);

    const double* v_tgt_s = net::forward_batch(arch, target, sc.x_s.data(), rows, sc.aux);
    const double* v_next = net::forward_batch(arch, params, sc.x_next.data(), rows, sc.main);

    std::vector<double> cot(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (batch[b].done) {
            cot[b] = 0.0;  // no V(s') term, hence zero gradient
            continue;
        }
        const double delta = batch[b].r + gamma * v_next[b] - v_tgt_s[b];
        cot[b] = gamma * divergence::conjugate_prime(div, delta) * inv_b;
    }
    net::backward_batch(arch, params, cot.data(), sc.main);
    return sc.main.grad;
}

net::ParamVector project(const net::ParamVector& g_back, const net::ParamVector& g_fwd) {
    if (g_back.size() != g_fwd.size())
        throw std::invalid_argument("project: vector length mismatch");
    const double denom = vdot(g_fwd, g_fwd);
    if (denom < 1e-12) return g_back;
    const double coeff = vdot(g_back, g_fwd) / denom;
    net::ParamVector out = g_back;
    axpy(out, -coeff, g_fwd);
    return out;
}

ValueUpdateStats value_update(TrainerState& state, const Batch& batch, const TrainConfig& config) {
    const divergence::Spec div{divergence::Kind::pearson_chi2, config.conjugate_mode};
    ForwardStats fs = forward_stats(state.value_arch, state.value_params, state.value_target, div,
                                    config.gamma, batch);

    const double lam = config.lambda;
    net::ParamVector combined = fs.mean_value_grad;
    for (double& c : combined) c *= (1.0 - lam);
    axpy(combined, lam, fs.grad_fwd);

    ValueUpdateStats stats;
    stats.loss_fwd = fs.loss_fwd;
    stats.loss_total = (1.0 - lam) * fs.loss_value + lam * fs.loss_fwd;
    stats.grad_fwd_norm = norm(fs.grad_fwd);

    if (config.grad_mode == GradMode::true_grad) {
        const net::ParamVector g_back = backward_gradient(state.value_arch, state.value_params,
                                                          state.value_target, div, config.gamma, batch);
        axpy(combined, lam, g_back);
    } else if (config.grad_mode == GradMode::orthogonal) {
        const net::ParamVector g_back = backward_gradient(state.value_arch, state.value_params,
                                                          state.value_target, div, config.gamma, batch);
        const net::ParamVector g_perp = project(g_back, fs.grad_fwd);
        stats.grad_perp_norm = norm(g_perp);
        if (config.eta != 0.0) axpy(combined, lam * config.eta, g_perp);
    }

    net::adam_step(state.value_adam, state.value_params, combined, config.lr);
    net::ema_update(state.value_target, state.value_params, config.tau);
    return stats;
}

double policy_update(TrainerState& state, const Batch& batch, const TrainConfig& config) {
    if (batch.empty()) throw std::invalid_argument("train: empty batch");
    const divergence::Spec div{divergence::Kind::pearson_chi2, config.conjugate_mode};
    BatchScratch& sc = scratch_for(2);
    fill_inputs(batch, sc.x_s, sc.x_next);
    const int rows = static_cast<int>(batch.size());
    const double inv_b = 1.0 / static_cast<double>(rows);
    const int n_actions = state.policy_arch.output_dim;

    const double* v_tgt_next =
        net::forward_batch(state.value_arch, state.value_target, sc.x_next.data(), rows, sc.aux);
    std::vector<double> boot(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b)
        boot[b] = batch[b].done ? 0.0 : config.gamma * v_tgt_next[b];
    const double* v_s =
        net::forward_batch(state.value_arch, state.value_params, sc.x_s.data(), rows, sc.aux);
    std::vector<double> weights(batch.size());
    double weight_sum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double residual = batch[b].r + boot[b] - v_s[b];
        weights[b] = divergence::bc_weight(div, residual, config.bc_trick);
        weight_sum += weights[b];
    }

    const double* logits =
        net::forward_batch(state.policy_arch, state.policy_params, sc.x_s.data(), rows, sc.main);
    std::vector<double> cot(batch.size() * static_cast<std::size_t>(n_actions), 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (weights[b] == 0.0) continue;
        const double* row = logits + b * static_cast<std::size_t>(n_actions);
        double max_logit = row[0];
        for (int k = 1; k < n_actions; ++k) max_logit = std::max(max_logit, row[k]);
        double z = 0.0;
        for (int k = 0; k < n_actions; ++k) z += std::exp(row[k] - max_logit);
        // ascent on w * log pi(a|s): feed the negated logit gradient to Adam
        for (int k = 0; k < n_actions; ++k) {
            const double p = std::exp(row[k] - max_logit) / z;
            const double onehot = (k == batch[b].action) ? 1.0 : 0.0;
            cot[b * static_cast<std::size_t>(n_actions) + k] = -weights[b] * inv_b * (onehot - p);
        }
    }
    net::backward_batch(state.policy_arch, state.policy_params, cot.data(), sc.main);
    net::adam_step(state.policy_adam, state.policy_params, sc.main.grad, config.lr);
    return weight_sum * inv_b;
}

PairStats gradient_pair_stats(const net::Architecture& arch, const net::ParamVector& params,
                              const grid::Dataset& dataset,
                              const std::vector<std::size_t>& indices) {
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    net::ParamVector grad_s(net::param_count(arch));
    PairStats ps;
    std::size_t used = 0;
    for (std::size_t idx : indices) {
        const auto& tr = dataset.transitions[idx];
        if (tr.done) continue;
        const auto enc_s = grid::encode(dataset.spec, tr.s);
        const auto enc_n = grid::encode(dataset.spec, tr.s_next);
        const double one = 1.0;
        net::forward_ws(arch, params, enc_s.data(), ws);
        net::backward_ws(arch, params, &one, ws);
        grad_s = ws.grad;
        net::forward_ws(arch, params, enc_n.data(), ws);
        net::backward_ws(arch, params, &one, ws);
        const double dot_sn = vdot(grad_s, ws.grad);
        ps.psi_mean += dot_sn;
        const double ns = norm(grad_s), nn = norm(ws.grad);
        if (ns > 0.0 && nn > 0.0)
            ps.cos_mean += std::clamp(dot_sn / (ns * nn), -1.0, 1.0);
        ++used;
    }
    if (used == 0) return ps;
    ps.psi_mean /= static_cast<double>(used);
    ps.cos_mean /= static_cast<double>(used);
    return ps;
}

std::vector<std::size_t> probe_indices(const grid::Dataset& dataset, std::size_t max_count,
                                       std::uint64_t seed) {
    std::vector<std::size_t> nonterm;
    for (std::size_t i = 0; i < dataset.transitions.size(); ++i)
        if (!dataset.transitions[i].done) nonterm.push_back(i);
    if (nonterm.size() <= max_count) return nonterm;
    auto gen = substream(seed, 0x70726f6265ULL);  // "probe"
    for (std::size_t i = 0; i < max_count; ++i) {
        const std::size_t j = i + uniform_below(gen, nonterm.size() - i);
        std::swap(nonterm[i], nonterm[j]);
    }
    nonterm.resize(max_count);
    std::sort(nonterm.begin(), nonterm.end());
    return nonterm;
}

TrainResult train(const TrainConfig& config, const grid::Dataset& dataset) {
    validate(config);
    if (dataset.transitions.empty()) throw std::invalid_argument("train: empty dataset");
    TrainResult result;
    result.state = init_state(config, dataset.spec);
    TrainerState& st = result.state;
    const std::vector<std::size_t> probe_idx = probe_indices(dataset, 512, config.seed);
    const std::size_t n = dataset.transitions.size();
    std::vector<std::size_t> indices(static_cast<std::size_t>(config.batch_size));
    for (int t = 1; t <= config.steps; ++t) {
        for (auto& idx : indices) idx = uniform_below(st.sampler, n);
        const Batch batch = make_batch(dataset, indices);
        const ValueUpdateStats vs = value_update(st, batch, config);
        const double bcw = policy_update(st, batch, config);
        st.step = t;
        if (t % 100 == 0) {
            const PairStats ps = gradient_pair_stats(st.value_arch, st.value_params, dataset, probe_idx);
            result.records.push_back({t, vs.loss_total, vs.loss_fwd, ps.psi_mean, ps.cos_mean, bcw,
                                      vs.grad_fwd_norm, vs.grad_perp_norm});
        }
    }
    return result;
}

grid::Action greedy_v_policy(const net::Architecture& arch, const net::ParamVector& params,
                             const grid::GridSpec& spec, grid::Cell s) {
    if (!grid::in_grid(spec, s)) throw std::invalid_argument("greedy_v_policy: cell outside grid");
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    grid::Action best = grid::Action::up;
    double best_v = -std::numeric_limits<double>::infinity();
    for (grid::Action a : grid::kActionOrder) {
        const grid::Cell n = grid::move(spec, s, a);
        const auto enc = grid::encode(spec, n);
        const double v = net::forward_ws(arch, params, enc.data(), ws)[0];
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

grid::Action policy_net_action(const net::Architecture& arch, const net::ParamVector& params,
                               const grid::GridSpec& spec, grid::Cell s) {
    const auto enc = grid::encode(spec, s);
    net::Workspace ws;
    net::ensure_workspace(arch, ws);
    const double* logits = net::forward_ws(arch, params, enc.data(), ws);
    int best = 0;
    for (int k = 1; k < arch.output_dim; ++k)
        if (logits[k] > logits[best]) best = k;
    return static_cast<grid::Action>(best);
}

EvalResult rollout_eval(const std::function<grid::Action(grid::Cell)>& policy,
                        const grid::GridSpec& spec, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("rollout_eval: episodes must be >= 1");
    if (grid::is_goal(spec, spec.start))
        throw std::invalid_argument("rollout_eval: start cell is a goal");
    auto gen = substream(seed, 0x6576616cULL);  // "eval"
    EvalResult res;
    int successes = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        grid::Cell s = spec.start;
        double ret = 0.0;
        for (int t = 0; t < spec.max_episode_len; ++t) {
            grid::Action a = policy(s);
            if (uniform01(gen) < spec.slip_prob)
                a = grid::kActionOrder[static_cast<std::size_t>(gen() % 4)];
            const grid::StepResult sr = grid::step(spec, s, a);
            ret += sr.r;
            if (sr.done) {
                ++successes;
                break;
            }
            s = sr.s_next;
        }
        res.returns.push_back(ret);
    }
    res.success_rate = static_cast<double>(successes) / static_cast<double>(episodes);
    return res;
}

std::string metrics_csv(const std::vector<DiagnosticsRecord>& records) {
    std::string out =
        "step,loss_total,loss_fwd,psi_mean,cos_phi_mean,bc_weight_mean,grad_fwd_norm,grad_perp_norm\n";
    for (const auto& r : records) {
        out += fmt_int(r.step);
        out += ',';
        out += fmt_double(r.loss_total);
        out += ',';
        out += fmt_double(r.loss_fwd);
        out += ',';
        out += fmt_double(r.psi_mean);
        out += ',';
        out += fmt_double(r.cos_phi_mean);
        out += ',';
        out += fmt_double(r.bc_weight_mean);
        out += ',';
        out += fmt_double(r.grad_fwd_norm);
        out += ',';
        out += fmt_double(r.grad_perp_norm);
        out += '\n';
    }
    return out;
}

}  // namespace odice::train
