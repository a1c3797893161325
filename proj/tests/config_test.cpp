#include <doctest.h>

#include "odice/config.hpp"

using namespace odice;

TEST_CASE("empty file and no flags give the defaults") {
    const auto cfg = config::parse_config("", {});
    CHECK(cfg.width == 30);
    CHECK(cfg.height == 30);
    CHECK(cfg.train.lambda == 0.6);
    CHECK(cfg.train.eta == 1.0);
    CHECK(cfg.train.lr == 1e-4);
    CHECK(cfg.train.steps == 10000);
    CHECK(cfg.train.grad_mode == train::GradMode::orthogonal);
    CHECK(cfg.n_traj == 20);
    CHECK(cfg.provenance.at("lambda") == config::Provenance::def);
}

TEST_CASE("flag overrides file overrides default") {
    const auto cfg = config::parse_config("eta = 0.4\nlr = 2e-4\n", {"--eta", "0.8"});
    CHECK(cfg.train.eta == 0.8);
    CHECK(cfg.train.lr == 2e-4);
    CHECK(cfg.provenance.at("eta") == config::Provenance::flag);
    CHECK(cfg.provenance.at("lr") == config::Provenance::file);
}

TEST_CASE("comments and blank lines are ignored") {
    const auto cfg = config::parse_config("# a comment\n\nlambda = 0.5  # trailing\n", {});
    CHECK(cfg.train.lambda == 0.5);
}

TEST_CASE("out-of-range values are rejected with the key name") {
    CHECK_THROWS_WITH_AS((void)config::parse_config("lambda = 1.5\n", {}),
                         "lambda out of range (0,1)", config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("slip_prob = -0.1\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("", {"--gamma", "1.0"}), config::UsageError);
}

TEST_CASE("unknown keys name the line, unknown flags name the flag") {
    CHECK_THROWS_WITH_AS((void)config::parse_config("nope = 1\n", {}),
                         "unknown key 'nope' (line 1)", config::UsageError);
    CHECK_THROWS_WITH_AS((void)config::parse_config("", {"--nope", "1"}),
                         "unknown flag '--nope'", config::UsageError);
}

TEST_CASE("malformed lines and values are rejected") {
    CHECK_THROWS_AS((void)config::parse_config("just words\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("lambda = abc\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("steps = 1.5\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("bc_trick = maybe\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("grad_mode = sideways\n", {}), config::UsageError);
    CHECK_THROWS_AS((void)config::parse_config("", {"--eta"}), config::UsageError);
}

TEST_CASE("enums and lists parse") {
    const auto cfg = config::parse_config(
        "grad_mode = semi_grad\nconjugate_mode = nonneg\nactivation = tanh\n"
        "sweep_lambdas = 0.4, 0.5\nsweep_etas = 0.2,1.0\n",
        {"--eval-policy", "policy_net", "--bc-trick", "false"});
    CHECK(cfg.train.grad_mode == train::GradMode::semi_grad);
    CHECK(cfg.train.conjugate_mode == divergence::ConjugateMode::nonneg);
    CHECK(cfg.train.activation == net::Activation::tanh);
    CHECK(cfg.eval_policy == config::EvalPolicy::policy_net);
    CHECK_FALSE(cfg.train.bc_trick);
    CHECK(cfg.sweep_lambdas == std::vector<double>{0.4, 0.5});
    CHECK(cfg.sweep_etas == std::vector<double>{0.2, 1.0});
}

TEST_CASE("hyphenated flags map to snake keys") {
    const auto cfg = config::parse_config("", {"--slip-prob", "0.1", "--max-episode-len", "60"});
    CHECK(cfg.slip_prob == 0.1);
    CHECK(cfg.max_episode_len == 60);
}

TEST_CASE("grid spec from config places the goal bands") {
    const auto cfg = config::parse_config("", {});
    const auto spec = config::grid_spec_from(cfg);
    CHECK(spec.goal_cells.size() == 20);
    CHECK(grid::is_goal(spec, {10, 29}));
    CHECK(grid::is_goal(spec, {19, 29}));
    CHECK(grid::is_goal(spec, {29, 10}));
    CHECK(grid::is_goal(spec, {29, 19}));
    CHECK_FALSE(grid::is_goal(spec, {9, 29}));
    CHECK(grid::goal_reward(spec, {12, 29}) == 10.0);
    CHECK(grid::goal_reward(spec, {29, 12}) == 5.0);
}

TEST_CASE("help text lists flags with defaults and ranges") {
    const std::string help = config::help_text();
    CHECK(help.find("--lambda") != std::string::npos);
    CHECK(help.find("(0,1)") != std::string::npos);
    CHECK(help.find("--grad-mode") != std::string::npos);
    CHECK(help.find("default: orthogonal") != std::string::npos);
    CHECK(help.find("--sweep-lambdas") != std::string::npos);
}
