#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "odice/common.hpp"
#include "odice/net.hpp"

using namespace odice;

namespace {

// Second, independent forward pass used as an oracle: plain nested loops over
// an explicit per-layer weight/bias view, no shared code with net::forward.
std::vector<double> reference_forward(const net::Architecture& arch,
                                      const net::ParamVector& params,
                                      const std::vector<double>& x) {
    std::vector<int> dims;
    dims.push_back(arch.input_dim);
    for (int h : arch.hidden) dims.push_back(h);
    dims.push_back(arch.output_dim);
    std::vector<double> cur = x;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        std::vector<double> next(static_cast<std::size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double acc = params[off + static_cast<std::size_t>(out) * in + o];  // bias
            for (int i = 0; i < in; ++i)
                acc += params[off + static_cast<std::size_t>(o) * in + i] * cur[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = acc;
        }
        if (l + 2 < dims.size()) {
            for (double& v : next) {
                if (arch.activation == net::Activation::relu) v = v > 0.0 ? v : 0.0;
                else v = std::tanh(v);
            }
        }
        cur = next;
        off += static_cast<std::size_t>(out) * (in + 1);
    }
    return cur;
}

std::vector<double> random_input(std::mt19937_64& gen, int dim) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& v : x) v = 2.0 * uniform01(gen) - 1.0;
    return x;
}

}  // namespace

TEST_CASE("forward zero params give zero output") {
    net::Architecture arch{2, {8, 8}, 1, net::Activation::relu};
    net::ParamVector zeros(net::param_count(arch), 0.0);
    CHECK(net::forward_scalar(arch, zeros, {0.3, -0.7}) == 0.0);
}

TEST_CASE("forward identity-like single affine layer") {
    net::Architecture arch{1, {}, 1, net::Activation::relu};
    REQUIRE(net::param_count(arch) == 2);
    net::ParamVector params = {1.0, 0.0};  // weight 1, bias 0
    CHECK(net::forward_scalar(arch, params, {3.0}) == 3.0);
}

TEST_CASE("forward matches an independent re-implementation") {
    auto gen = std::mt19937_64(7);
    for (const auto& arch : {net::Architecture{2, {128, 128}, 1, net::Activation::relu},
                             net::Architecture{2, {16, 8}, 4, net::Activation::relu},
                             net::Architecture{3, {5}, 2, net::Activation::tanh}}) {
        const auto params = net::init_params(arch, gen());
        const std::vector<double> x = random_input(gen, arch.input_dim);
        const auto got = net::forward(arch, params, x);
        const auto want = reference_forward(arch, params, x);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("forward is pure") {
    net::Architecture arch{2, {32, 32}, 1, net::Activation::relu};
    const auto params = net::init_params(arch, 11);
    const std::vector<double> x = {0.5, 0.5};
    const double a = net::forward_scalar(arch, params, x);
    const double b = net::forward_scalar(arch, params, x);
    CHECK(a == b);
}

TEST_CASE("forward rejects dimension mismatch") {
    net::Architecture arch{2, {4}, 1, net::Activation::relu};
    const auto params = net::init_params(arch, 1);
    CHECK_THROWS_AS((void)net::forward(arch, params, {1.0}), std::invalid_argument);
    net::ParamVector wrong(net::param_count(arch) + 1, 0.0);
    CHECK_THROWS_AS((void)net::forward(arch, wrong, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("grad of single affine layer at zero input") {
    net::Architecture arch{2, {}, 1, net::Activation::relu};
    net::ParamVector params = {0.4, -0.2, 0.7};
    const auto g = net::grad_value(arch, params, {0.0, 0.0});
    CHECK(g[0] == 0.0);  // weights see the zero input
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);  // bias
}

TEST_CASE("grad_value matches central finite differences") {
    auto gen = std::mt19937_64(3);
    for (const auto& arch : {net::Architecture{2, {8, 8}, 1, net::Activation::relu},
                             net::Architecture{3, {16}, 1, net::Activation::relu},
                             net::Architecture{2, {12, 6}, 1, net::Activation::tanh}}) {
        for (int rep = 0; rep < 20; ++rep) {
            net::ParamVector params = net::init_params(arch, gen());
            const std::vector<double> x = random_input(gen, arch.input_dim);
            const auto g = net::grad_value(arch, params, x);
            const double h = 1e-5;
            for (std::size_t j = 0; j < params.size(); ++j) {
                net::ParamVector p = params;
                p[j] = params[j] + h;
                const double up = net::forward_scalar(arch, p, x);
                p[j] = params[j] - h;
                const double dn = net::forward_scalar(arch, p, x);
                const double fd = (up - dn) / (2.0 * h);
                const double denom = std::max({1.0, std::abs(fd), std::abs(g[j])});
                CHECK(std::abs(g[j] - fd) / denom <= 1e-4);
            }
        }
    }
}

TEST_CASE("relu gradient is locally constant away from kinks") {
    net::Architecture arch{2, {16, 16}, 1, net::Activation::relu};
    auto gen = std::mt19937_64(5);
    const auto params = net::init_params(arch, 17);
    std::vector<double> x = random_input(gen, 2);
    const auto g0 = net::grad_value(arch, params, x);
    std::vector<double> xp = x;
    xp[0] += 1e-9;
    xp[1] -= 1e-9;
    const auto g1 = net::grad_value(arch, params, xp);
    double max_rel = 0.0;
    for (std::size_t j = 0; j < g0.size(); ++j)
        max_rel = std::max(max_rel, std::abs(g0[j] - g1[j]) / std::max(1.0, std::abs(g0[j])));
    CHECK(max_rel <= 1e-6);
}

TEST_CASE("grad_value requires scalar output") {
    net::Architecture arch{2, {4}, 3, net::Activation::relu};
    const auto params = net::init_params(arch, 1);
    CHECK_THROWS_AS((void)net::grad_value(arch, params, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("adam zero gradient is a no-op from fresh state") {
    net::ParamVector params = {1.0, -2.0, 3.0};
    const net::ParamVector before = params;
    auto st = net::make_adam(params.size());
    net::adam_step(st, params, {0.0, 0.0, 0.0}, 1e-3);
    CHECK(params == before);
    CHECK(st.m == net::ParamVector{0.0, 0.0, 0.0});
    CHECK(st.v == net::ParamVector{0.0, 0.0, 0.0});
}

TEST_CASE("first adam step moves by about lr in the gradient sign direction") {
    net::ParamVector params = {0.5};
    auto st = net::make_adam(1);
    net::adam_step(st, params, {3.7}, 1e-2);
    CHECK(params[0] == doctest::Approx(0.5 - 1e-2).epsilon(1e-6));
    params = {0.5};
    st = net::make_adam(1);
    net::adam_step(st, params, {-0.004}, 1e-2);
    CHECK(params[0] == doctest::Approx(0.5 + 1e-2).epsilon(1e-5));
}

TEST_CASE("adam matches an independent reference over 100 steps") {
    // Reference maintains its own accumulators with textbook bias correction.
    const std::size_t dim = 7;
    auto gen = std::mt19937_64(23);
    net::ParamVector params(dim), ref(dim);
    for (std::size_t i = 0; i < dim; ++i) params[i] = ref[i] = 2.0 * uniform01(gen) - 1.0;
    auto st = net::make_adam(dim);
    std::vector<double> m(dim, 0.0), v(dim, 0.0);
    const double lr = 3e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 100; ++t) {
        net::ParamVector grad(dim);
        for (std::size_t i = 0; i < dim; ++i) grad[i] = 2.0 * uniform01(gen) - 1.0;
        net::adam_step(st, params, grad, lr);
        for (std::size_t i = 0; i < dim; ++i) {
            m[i] = b1 * m[i] + (1 - b1) * grad[i];
            v[i] = b2 * v[i] + (1 - b2) * grad[i] * grad[i];
            const double mh = m[i] / (1.0 - std::pow(b1, t));
            const double vh = v[i] / (1.0 - std::pow(b2, t));
            ref[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
    for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(params[i] - ref[i]) <= 1e-10);
}

TEST_CASE("adam with lr zero is the identity on params") {
    net::ParamVector params = {1.0, 2.0};
    const net::ParamVector before = params;
    auto st = net::make_adam(2);
    net::adam_step(st, params, {0.5, -0.25}, 0.0);
    CHECK(params == before);
}

TEST_CASE("adam rejects non-finite gradients") {
    net::ParamVector params = {1.0};
    auto st = net::make_adam(1);
    CHECK_THROWS_AS(net::adam_step(st, params, {std::nan("")}, 1e-3), std::runtime_error);
}

TEST_CASE("ema update") {
    net::ParamVector target = {0.0, 0.0}, online = {1.0, 1.0};
    net::ParamVector t1 = target;
    net::ema_update(t1, online, 1.0);
    CHECK(t1 == online);
    net::ParamVector t2 = target;
    net::ema_update(t2, online, 0.0);
    CHECK(t2 == target);
    net::ParamVector t3 = target;
    net::ema_update(t3, online, 0.005);
    CHECK(t3[0] == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(t3[1] == doctest::Approx(0.005).epsilon(1e-15));
    CHECK_THROWS_AS(net::ema_update(t3, online, 1.5), std::invalid_argument);
}

TEST_CASE("ema is affine in tau") {
    auto gen = std::mt19937_64(9);
    net::ParamVector a(5), b(5);
    for (std::size_t i = 0; i < 5; ++i) {
        a[i] = uniform01(gen);
        b[i] = uniform01(gen);
    }
    const double t1 = 0.3, t2 = 0.8;
    net::ParamVector e1 = a, e2 = a, em = a;
    net::ema_update(e1, b, t1);
    net::ema_update(e2, b, t2);
    net::ema_update(em, b, (t1 + t2) / 2.0);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(e1[i] + e2[i] == doctest::Approx(2.0 * em[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
    net::Architecture arch{2, {6, 4}, 1, net::Activation::relu};
    const auto params = net::init_params(arch, 99);
    const std::string path =
        (std::filesystem::temp_directory_path() / "odice_ckpt_test.bin").string();
    net::save_checkpoint(path, arch, params);
    const auto [arch2, params2] = net::load_checkpoint(path);
    CHECK(arch2.input_dim == arch.input_dim);
    CHECK(arch2.hidden == arch.hidden);
    CHECK(arch2.output_dim == arch.output_dim);
    CHECK(params2 == params);
    std::remove(path.c_str());
}

TEST_CASE("init is deterministic per seed") {
    net::Architecture arch{2, {16}, 1, net::Activation::relu};
    CHECK(net::init_params(arch, 42) == net::init_params(arch, 42));
    CHECK(net::init_params(arch, 42) != net::init_params(arch, 43));
}
