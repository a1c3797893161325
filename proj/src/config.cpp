#include "odice/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

#include "odice/common.hpp"

namespace odice::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw UsageError(key + ": expected a real number, got '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw UsageError(key + ": expected an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError(key + ": expected true/false, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw UsageError(key + ": expected a comma-separated list of reals");
    return out;
}

struct KeySpec {
    std::string key;
    std::string range;  // shown in --help; empty for free-form values
    std::string doc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> show;
    std::function<void(const RunConfig&)> check;  // post-merge range validation
};

void require(bool ok, const std::string& key, const std::string& range) {
    if (!ok) throw UsageError(key + " out of range " + range);
}

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = [] {
        std::vector<KeySpec> t;
        auto add = [&t](KeySpec ks) { t.push_back(std::move(ks)); };

        auto dbl = [](std::string key, std::string range, std::string doc, double RunConfig::*field,
                      std::function<bool(double)> ok) {
            return KeySpec{
                key, range, doc,
                [key, field](RunConfig& c, const std::string& v) { c.*field = parse_double(key, v); },
                [field](const RunConfig& c) { return fmt_double(c.*field); },
                [key, range, field, ok](const RunConfig& c) { require(ok(c.*field), key, range); }};
        };
        auto dbl_t = [](std::string key, std::string range, std::string doc,
                        double train::TrainConfig::*field, std::function<bool(double)> ok) {
            return KeySpec{key, range, doc,
                           [key, field](RunConfig& c, const std::string& v) {
                               c.train.*field = parse_double(key, v);
                           },
                           [field](const RunConfig& c) { return fmt_double(c.train.*field); },
                           [key, range, field, ok](const RunConfig& c) {
                               require(ok(c.train.*field), key, range);
                           }};
        };
        auto int_ = [](std::string key, std::string range, std::string doc, int RunConfig::*field,
                       std::function<bool(long long)> ok) {
            return KeySpec{key, range, doc,
                           [key, field](RunConfig& c, const std::string& v) {
                               c.*field = static_cast<int>(parse_int(key, v));
                           },
                           [field](const RunConfig& c) { return fmt_int(c.*field); },
                           [key, range, field, ok](const RunConfig& c) { require(ok(c.*field), key, range); }};
        };
        auto int_t = [](std::string key, std::string range, std::string doc,
                        int train::TrainConfig::*field, std::function<bool(long long)> ok) {
            return KeySpec{key, range, doc,
                           [key, field](RunConfig& c, const std::string& v) {
                               c.train.*field = static_cast<int>(parse_int(key, v));
                           },
                           [field](const RunConfig& c) { return fmt_int(c.train.*field); },
                           [key, range, field, ok](const RunConfig& c) {
                               require(ok(c.train.*field), key, range);
                           }};
        };
        auto path = [](std::string key, std::string doc, std::string RunConfig::*field) {
            return KeySpec{key, "", doc,
                           [field](RunConfig& c, const std::string& v) { c.*field = v; },
                           [field](const RunConfig& c) { return c.*field; },
                           [](const RunConfig&) {}};
        };

        add(int_("width", "[2,inf)", "grid width", &RunConfig::width,
                 [](long long v) { return v >= 2; }));
        add(int_("height", "[2,inf)", "grid height", &RunConfig::height,
                 [](long long v) { return v >= 2; }));
        add(dbl("step_reward", "(-inf,inf)", "reward for a non-goal step", &RunConfig::step_reward,
                [](double) { return true; }));
        add(dbl("slip_prob", "[0,1]", "chance an action is replaced by a random one",
                &RunConfig::slip_prob, [](double v) { return v >= 0.0 && v <= 1.0; }));
        add(int_("max_episode_len", "[1,inf)", "episode step cap", &RunConfig::max_episode_len,
                 [](long long v) { return v >= 1; }));
        add(dbl("goal_reward_top", "(0,inf)", "reward of the top goal band",
                &RunConfig::goal_reward_top, [](double v) { return v > 0.0; }));
        add(dbl("goal_reward_right", "(0,inf)", "reward of the right goal band",
                &RunConfig::goal_reward_right, [](double v) { return v > 0.0; }));

        add(dbl_t("lambda", "(0,1)", "conjugate-loss weight", &train::TrainConfig::lambda,
                  [](double v) { return v > 0.0 && v < 1.0; }));
        add(dbl_t("eta", "[0,inf)", "projected backward gradient strength", &train::TrainConfig::eta,
                  [](double v) { return v >= 0.0; }));
        add(dbl_t("lr", "(0,inf)", "Adam learning rate", &train::TrainConfig::lr,
                  [](double v) { return v > 0.0; }));
        add(dbl_t("tau", "[0,1]", "target EMA weight", &train::TrainConfig::tau,
                  [](double v) { return v >= 0.0 && v <= 1.0; }));
        add(dbl_t("gamma", "(0,1)", "discount factor", &train::TrainConfig::gamma,
                  [](double v) { return v > 0.0 && v < 1.0; }));
        add(int_t("batch_size", "[1,inf)", "transitions per update", &train::TrainConfig::batch_size,
                  [](long long v) { return v >= 1; }));
        add(int_t("steps", "[0,inf)", "training steps", &train::TrainConfig::steps,
                  [](long long v) { return v >= 0; }));
        add(KeySpec{"grad_mode", "{true_grad,semi_grad,orthogonal}", "value update rule",
                    [](RunConfig& c, const std::string& v) {
                        if (v == "true_grad") c.train.grad_mode = train::GradMode::true_grad;
                        else if (v == "semi_grad") c.train.grad_mode = train::GradMode::semi_grad;
                        else if (v == "orthogonal") c.train.grad_mode = train::GradMode::orthogonal;
                        else throw UsageError("grad_mode: unknown value '" + v + "'");
                    },
                    [](const RunConfig& c) {
                        switch (c.train.grad_mode) {
                            case train::GradMode::true_grad: return std::string("true_grad");
                            case train::GradMode::semi_grad: return std::string("semi_grad");
                            default: return std::string("orthogonal");
                        }
                    },
                    [](const RunConfig&) {}});
        add(KeySpec{"conjugate_mode", "{unconstrained,nonneg}", "conjugate used by the value loss",
                    [](RunConfig& c, const std::string& v) {
                        if (v == "unconstrained")
                            c.train.conjugate_mode = divergence::ConjugateMode::unconstrained;
                        else if (v == "nonneg")
                            c.train.conjugate_mode = divergence::ConjugateMode::nonneg;
                        else throw UsageError("conjugate_mode: unknown value '" + v + "'");
                    },
                    [](const RunConfig& c) {
                        return c.train.conjugate_mode == divergence::ConjugateMode::unconstrained
                                   ? std::string("unconstrained")
                                   : std::string("nonneg");
                    },
                    [](const RunConfig&) {}});
        add(KeySpec{"bc_trick", "{true,false}", "drop the +1 in the BC weight",
                    [](RunConfig& c, const std::string& v) { c.train.bc_trick = parse_bool("bc_trick", v); },
                    [](const RunConfig& c) { return std::string(c.train.bc_trick ? "true" : "false"); },
                    [](const RunConfig&) {}});
        add(KeySpec{"activation", "{relu,tanh}", "hidden activation",
                    [](RunConfig& c, const std::string& v) {
                        if (v == "relu") c.train.activation = net::Activation::relu;
                        else if (v == "tanh") c.train.activation = net::Activation::tanh;
                        else throw UsageError("activation: unknown value '" + v + "'");
                    },
                    [](const RunConfig& c) {
                        return std::string(c.train.activation == net::Activation::relu ? "relu" : "tanh");
                    },
                    [](const RunConfig&) {}});
        add(KeySpec{"seed", "[0,2^64)", "master seed",
                    [](RunConfig& c, const std::string& v) {
                        try {
                            std::size_t pos = 0;
                            c.train.seed = std::stoull(v, &pos);
                            if (pos != v.size()) throw std::invalid_argument("trailing");
                        } catch (const std::exception&) {
                            throw UsageError("seed: expected an unsigned integer, got '" + v + "'");
                        }
                    },
                    [](const RunConfig& c) { return fmt_int(static_cast<long long>(c.train.seed)); },
                    [](const RunConfig&) {}});

        add(int_("n_traj", "[1,inf)", "trajectories to collect", &RunConfig::n_traj,
                 [](long long v) { return v >= 1; }));
        add(int_("episodes", "[1,inf)", "evaluation episodes", &RunConfig::episodes,
                 [](long long v) { return v >= 1; }));
        add(dbl("sigma", "(0,inf)", "noise std for the sign-flip probe", &RunConfig::sigma,
                [](double v) { return v > 0.0; }));
        add(int_("n_noise", "[1,inf)", "noise draws per transition", &RunConfig::n_noise,
                 [](long long v) { return v >= 1; }));
        add(KeySpec{"eval_policy", "{greedy_v,policy_net}", "policy used by eval",
                    [](RunConfig& c, const std::string& v) {
                        if (v == "greedy_v") c.eval_policy = EvalPolicy::greedy_v;
                        else if (v == "policy_net") c.eval_policy = EvalPolicy::policy_net;
                        else throw UsageError("eval_policy: unknown value '" + v + "'");
                    },
                    [](const RunConfig& c) {
                        return std::string(c.eval_policy == EvalPolicy::greedy_v ? "greedy_v"
                                                                                 : "policy_net");
                    },
                    [](const RunConfig&) {}});

        add(path("dataset", "dataset JSONL path", &RunConfig::dataset));
        add(path("checkpoint", "value checkpoint path", &RunConfig::checkpoint));
        add(path("policy_checkpoint", "policy checkpoint path", &RunConfig::policy_checkpoint));
        add(path("metrics", "training metrics CSV path", &RunConfig::metrics));
        add(path("heatmap_csv", "heatmap CSV path", &RunConfig::heatmap_csv));
        add(path("heatmap_pgm", "heatmap PGM path", &RunConfig::heatmap_pgm));
        add(path("probe_dir", "directory for diag probe CSVs", &RunConfig::probe_dir));
        add(path("summary", "sweep summary CSV path", &RunConfig::summary));
        add(path("eval_out", "optional eval report path", &RunConfig::eval_out));

        add(KeySpec{"sweep_lambdas", "each in (0,1)", "comma list of lambda values",
                    [](RunConfig& c, const std::string& v) {
                        c.sweep_lambdas = parse_double_list("sweep_lambdas", v);
                    },
                    [](const RunConfig& c) {
                        std::string s;
                        for (std::size_t i = 0; i < c.sweep_lambdas.size(); ++i)
                            s += (i ? "," : "") + fmt_double(c.sweep_lambdas[i]);
                        return s;
                    },
                    [](const RunConfig& c) {
                        for (double v : c.sweep_lambdas)
                            require(v > 0.0 && v < 1.0, "sweep_lambdas", "(0,1)");
                    }});
        add(KeySpec{"sweep_etas", "each >= 0", "comma list of eta values",
                    [](RunConfig& c, const std::string& v) {
                        c.sweep_etas = parse_double_list("sweep_etas", v);
                    },
                    [](const RunConfig& c) {
                        std::string s;
                        for (std::size_t i = 0; i < c.sweep_etas.size(); ++i)
                            s += (i ? "," : "") + fmt_double(c.sweep_etas[i]);
                        return s;
                    },
                    [](const RunConfig& c) {
                        for (double v : c.sweep_etas) require(v >= 0.0, "sweep_etas", "[0,inf)");
                    }});
        return t;
    }();
    return table;
}

const KeySpec* find_key(const std::string& key) {
    for (const auto& ks : key_table())
        if (ks.key == key) return &ks;
    return nullptr;
}

std::string flag_of(const std::string& key) {
    std::string f = "--" + key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

std::string key_of_flag(const std::string& flag) {
    if (flag.size() < 3 || flag[0] != '-' || flag[1] != '-') return "";
    std::string k = flag.substr(2);
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

}  // namespace

RunConfig parse_config(const std::string& file_text, const std::vector<std::string>& flags) {
    RunConfig config;
    for (const auto& ks : key_table()) config.provenance[ks.key] = Provenance::def;

    std::istringstream in(file_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + fmt_int(static_cast<long long>(line_no)) +
                             ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const KeySpec* ks = find_key(key);
        if (!ks)
            throw UsageError("unknown key '" + key + "' (line " +
                             fmt_int(static_cast<long long>(line_no)) + ")");
        ks->set(config, value);
        config.provenance[key] = Provenance::file;
    }

    for (std::size_t i = 0; i < flags.size(); ++i) {
        const std::string key = key_of_flag(flags[i]);
        const KeySpec* ks = key.empty() ? nullptr : find_key(key);
        if (!ks) throw UsageError("unknown flag '" + flags[i] + "'");
        if (i + 1 >= flags.size()) throw UsageError(flags[i] + ": missing value");
        ks->set(config, flags[i + 1]);
        config.provenance[key] = Provenance::flag;
        ++i;
    }

    for (const auto& ks : key_table()) ks.check(config);
    return config;
}

grid::GridSpec grid_spec_from(const RunConfig& config) {
    grid::GridSpec spec;
    spec.width = config.width;
    spec.height = config.height;
    spec.step_reward = config.step_reward;
    spec.slip_prob = config.slip_prob;
    spec.max_episode_len = config.max_episode_len;
    const int x0 = config.width / 3, x1 = 2 * config.width / 3 - 1;
    const int y0 = config.height / 3, y1 = 2 * config.height / 3 - 1;
    for (int x = x0; x <= x1; ++x)
        spec.goal_cells.push_back({{x, config.height - 1}, config.goal_reward_top});
    for (int y = y0; y <= y1; ++y)
        spec.goal_cells.push_back({{config.width - 1, y}, config.goal_reward_right});
    grid::validate(spec);
    return spec;
}

std::string help_text() {
    std::string out;
    for (const auto& ks : key_table()) {
        RunConfig defaults;
        std::string line = "  " + flag_of(ks.key) + " <value>";
        if (line.size() < 34) line.resize(34, ' ');
        line += ks.doc;
        line += " (default: ";
        const std::string d = ks.show(defaults);
        line += d.empty() ? "\"\"" : d;
        if (!ks.range.empty()) line += ", range: " + ks.range;
        line += ")\n";
        out += line;
    }
    return out;
}

}  // namespace odice::config
