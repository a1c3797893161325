// Command-line front end: dataset generation, training, evaluation,
// theorem probes, heatmap export, and (lambda, eta) sweeps.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "odice/common.hpp"
#include "odice/config.hpp"
#include "odice/diagnostics.hpp"
#include "odice/divergence.hpp"
#include "odice/grid.hpp"
#include "odice/net.hpp"
#include "odice/train.hpp"

namespace {

using namespace odice;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void print_usage() {
    std::cout << "usage: odice <subcommand> [--config FILE] [--key value ...]\n"
              << "\n"
              << "subcommands:\n"
              << "  gen-data   collect an offline dataset and write it as JSONL\n"
              << "  train      run the training loop; writes metrics CSV and checkpoints\n"
              << "  eval       roll out the extracted policy; prints success rate,\n"
              << "             mean return and percent difference\n"
              << "  diag       run the four theorem probes; writes probe CSVs\n"
              << "  heatmap    export the normalized value heatmap as CSV and PGM\n"
              << "  sweep      train x eval over a (lambda, eta) grid; writes summary CSV\n"
              << "\n"
              << "flags (flag overrides config file overrides default):\n"
              << config::help_text()
              << "\nexit codes: 0 success, 1 usage error, 2 runtime error\n";
}

std::function<grid::Action(grid::Cell)> make_policy(const config::RunConfig& cfg,
                                                    const grid::GridSpec& spec,
                                                    const net::Architecture& varch,
                                                    const net::ParamVector& vparams) {
    if (cfg.eval_policy == config::EvalPolicy::greedy_v) {
        return [&varch, &vparams, spec](grid::Cell s) {
            return train::greedy_v_policy(varch, vparams, spec, s);
        };
    }
    auto [parch, pparams] = net::load_checkpoint(cfg.policy_checkpoint);
    return [parch = std::move(parch), pparams = std::move(pparams), spec](grid::Cell s) {
        return train::policy_net_action(parch, pparams, spec, s);
    };
}

int cmd_gen_data(const config::RunConfig& cfg) {
    const grid::GridSpec spec = config::grid_spec_from(cfg);
    const grid::Dataset ds = grid::generate_dataset(spec, cfg.n_traj, cfg.train.seed);
    grid::save_jsonl(cfg.dataset, ds);
    std::cout << "wrote " << cfg.dataset << " (" << ds.transitions.size() << " transitions, "
              << (ds.traj_offsets.size() - 1) << " trajectories)\n";
    return 0;
}

int cmd_train(const config::RunConfig& cfg) {
    const grid::Dataset ds = grid::load_jsonl(cfg.dataset);
    const train::TrainResult result = train::train(cfg.train, ds);
    write_file(cfg.metrics, train::metrics_csv(result.records));
    net::save_checkpoint(cfg.checkpoint, result.state.value_arch, result.state.value_params);
    net::save_checkpoint(cfg.policy_checkpoint, result.state.policy_arch, result.state.policy_params);
    std::cout << "trained " << cfg.train.steps << " steps; wrote " << cfg.metrics << ", "
              << cfg.checkpoint << ", " << cfg.policy_checkpoint << "\n";
    return 0;
}

int cmd_eval(const config::RunConfig& cfg) {
    const grid::GridSpec spec = config::grid_spec_from(cfg);
    auto [varch, vparams] = net::load_checkpoint(cfg.checkpoint);
    const auto policy = make_policy(cfg, spec, varch, vparams);
    const train::EvalResult res = train::rollout_eval(policy, spec, cfg.episodes, cfg.train.seed);
    double mean = 0.0;
    for (double r : res.returns) mean += r;
    mean /= static_cast<double>(res.returns.size());
    const double pdiff = diagnostics::percent_difference(res.returns);
    std::cout << "success_rate " << fmt_double(res.success_rate) << "\n"
              << "mean_return " << fmt_double(mean) << "\n"
              << "percent_difference " << fmt_double(pdiff) << "\n";
    if (!cfg.eval_out.empty()) {
        write_file(cfg.eval_out, "success_rate,mean_return,percent_difference\n" +
                                     fmt_double(res.success_rate) + "," + fmt_double(mean) + "," +
                                     fmt_double(pdiff) + "\n");
    }
    return 0;
}

int cmd_diag(const config::RunConfig& cfg) {
    const grid::Dataset ds = grid::load_jsonl(cfg.dataset);
    auto [varch, vparams] = net::load_checkpoint(cfg.checkpoint);
    const divergence::Spec div{divergence::Kind::pearson_chi2, cfg.train.conjugate_mode};
    const std::string dir = cfg.probe_dir.empty() ? "." : cfg.probe_dir;
    std::filesystem::create_directories(dir);

    // Theorem 1: the forward loss is first-order blind to the projected step.
    train::TrainerState state;
    state.value_arch = varch;
    state.value_params = vparams;
    state.value_target = vparams;
    auto gen = substream(cfg.train.seed, 0x64696167ULL);  // "diag"
    std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.train.batch_size));
    for (auto& i : idx) i = uniform_below(gen, ds.transitions.size());
    const train::Batch batch = train::make_batch(ds, idx);
    const std::vector<double> alphas = {1e-2, 1e-3, 1e-4, 1e-5};
    const auto orth = diagnostics::theorem1_scaling_probe(state, batch, div, cfg.train.gamma,
                                                          cfg.train.eta,
                                                          diagnostics::ProbeStep::orthogonal, alphas);
    const auto raw = diagnostics::theorem1_scaling_probe(state, batch, div, cfg.train.gamma,
                                                         cfg.train.eta,
                                                         diagnostics::ProbeStep::true_grad, alphas);
    std::string t1 = "step_kind,alpha,abs_delta_l1,slope,degenerate\n";
    for (std::size_t i = 0; i < alphas.size(); ++i)
        t1 += "orthogonal," + fmt_double(orth.alphas[i]) + "," + fmt_double(orth.deltas[i]) + "," +
              fmt_double(orth.slope) + "," + (orth.degenerate ? "true" : "false") + "\n";
    for (std::size_t i = 0; i < alphas.size(); ++i)
        t1 += "true_grad," + fmt_double(raw.alphas[i]) + "," + fmt_double(raw.deltas[i]) + "," +
              fmt_double(raw.slope) + "," + (raw.degenerate ? "true" : "false") + "\n";
    write_file(dir + "/theorem1.csv", t1);

    // Theorem 2: descent frequency with eta just above the per-sample bound.
    const auto descent = diagnostics::theorem2_descent_probe(ds, div, cfg.train.gamma, 1e-5, 1000,
                                                             cfg.train.seed, cfg.train.activation);
    write_file(dir + "/theorem2.csv",
               "alpha,probes,decreased,skipped,fraction_decreased\n1e-05," +
                   fmt_int(descent.probes) + "," + fmt_int(descent.decreased) + "," +
                   fmt_int(descent.skipped) + "," + fmt_double(descent.fraction_decreased) + "\n");

    // Theorem 3: feature dot product over the dataset at the checkpoint.
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < ds.transitions.size(); ++i)
        if (!ds.transitions[i].done) all.push_back(i);
    const train::PairStats ps = train::gradient_pair_stats(varch, vparams, ds, all);
    write_file(dir + "/theorem3.csv", "psi_mean,cos_phi_mean\n" + fmt_double(ps.psi_mean) + "," +
                                          fmt_double(ps.cos_mean) + "\n");

    // Theorem 4: sign-flip robustness under encoded-state noise.
    const double flip = diagnostics::robustness_sign_flip(varch, vparams, ds, cfg.sigma,
                                                          cfg.n_noise, cfg.train.seed);
    write_file(dir + "/theorem4.csv", "sigma,n_noise,flip_fraction\n" + fmt_double(cfg.sigma) +
                                          "," + fmt_int(cfg.n_noise) + "," + fmt_double(flip) + "\n");

    std::cout << "theorem1 slope orthogonal " << fmt_double(orth.slope) << ", true_grad "
              << fmt_double(raw.slope) << "\n"
              << "theorem2 descent fraction " << fmt_double(descent.fraction_decreased) << "\n"
              << "theorem3 psi_mean " << fmt_double(ps.psi_mean) << "\n"
              << "theorem4 flip_fraction " << fmt_double(flip) << "\n"
              << "wrote probe CSVs to " << dir << "\n";
    return 0;
}

int cmd_heatmap(const config::RunConfig& cfg) {
    const grid::GridSpec spec = config::grid_spec_from(cfg);
    auto [varch, vparams] = net::load_checkpoint(cfg.checkpoint);
    const std::vector<double> heat = diagnostics::value_heatmap(varch, vparams, spec);
    write_file(cfg.heatmap_csv, diagnostics::heatmap_csv(heat, spec));
    write_file(cfg.heatmap_pgm, diagnostics::heatmap_pgm(heat, spec));
    std::cout << "wrote " << cfg.heatmap_csv << " and " << cfg.heatmap_pgm << "\n";
    return 0;
}

int cmd_sweep(const config::RunConfig& cfg) {
    const grid::Dataset ds = grid::load_jsonl(cfg.dataset);
    struct Cell {
        double lambda, eta;
        double success = 0.0, mean_return = 0.0, pdiff = 0.0;
    };
    std::vector<Cell> cells;
    for (double lam : cfg.sweep_lambdas)
        for (double eta : cfg.sweep_etas) cells.push_back({lam, eta});

    auto run_cell = [&](Cell cell) {
        train::TrainConfig tc = cfg.train;
        tc.lambda = cell.lambda;
        tc.eta = cell.eta;
        const train::TrainResult result = train::train(tc, ds);
        const auto& st = result.state;
        const auto policy = [&st, &ds](grid::Cell s) {
            return train::greedy_v_policy(st.value_arch, st.value_params, ds.spec, s);
        };
        const train::EvalResult res = train::rollout_eval(policy, ds.spec, cfg.episodes, tc.seed);
        for (double r : res.returns) cell.mean_return += r;
        cell.mean_return /= static_cast<double>(res.returns.size());
        cell.success = res.success_rate;
        cell.pdiff = cell.mean_return == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                             : diagnostics::percent_difference(res.returns);
        return cell;
    };

    // Cells are independent; run them concurrently and join in grid order.
    std::vector<std::future<Cell>> futures;
    futures.reserve(cells.size());
    for (const Cell& c : cells)
        futures.push_back(std::async(std::launch::async, run_cell, c));
    std::string out = "lambda,eta,success_rate,mean_return,percent_difference\n";
    for (auto& fu : futures) {
        const Cell c = fu.get();
        out += fmt_double(c.lambda) + "," + fmt_double(c.eta) + "," + fmt_double(c.success) + "," +
               fmt_double(c.mean_return) + "," + fmt_double(c.pdiff) + "\n";
    }
    write_file(cfg.summary, out);
    std::cout << "wrote " << cfg.summary << " (" << cells.size() << " cells)\n";
    return 0;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) {
        print_usage();
        throw config::UsageError("missing subcommand");
    }
    for (const auto& a : args) {
        if (a == "--help" || a == "-h") {
            print_usage();
            return 0;
        }
    }
    const std::string sub = args[0];
    std::string file_text;
    std::vector<std::string> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw config::UsageError("--config: missing value");
            file_text = read_file(args[i + 1]);
            ++i;
        } else {
            flags.push_back(args[i]);
        }
    }
    const config::RunConfig cfg = config::parse_config(file_text, flags);

    if (sub == "gen-data") return cmd_gen_data(cfg);
    if (sub == "train") return cmd_train(cfg);
    if (sub == "eval") return cmd_eval(cfg);
    if (sub == "diag") return cmd_diag(cfg);
    if (sub == "heatmap") return cmd_heatmap(cfg);
    if (sub == "sweep") return cmd_sweep(cfg);
    throw config::UsageError("unknown subcommand '" + sub + "'");
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const config::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
