#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "odice/divergence.hpp"

using namespace odice;

namespace {

const divergence::Spec kUnc{divergence::Kind::pearson_chi2,
                            divergence::ConjugateMode::unconstrained};
const divergence::Spec kNonneg{divergence::Kind::pearson_chi2,
                               divergence::ConjugateMode::nonneg};

// Independent oracle: numeric supremum of y*x - f(x) over x >= 0.
double numeric_nonneg_conjugate(double y) {
    double best = -1e300;
    for (double x = 0.0; x <= 100.0; x += 1e-4) {
        const double v = y * x - (x - 1.0) * (x - 1.0);
        if (v > best) best = v;
    }
    return best;
}

double central_diff(double (*fn)(const divergence::Spec&, double), const divergence::Spec& spec,
                    double y, double h = 1e-6) {
    return (fn(spec, y + h) - fn(spec, y - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("pearson chi2 closed forms") {
    CHECK(divergence::f(kUnc, 1.0) == 0.0);
    CHECK(divergence::f(kUnc, 2.0) == 1.0);
    CHECK(divergence::f(kUnc, 0.0) == 1.0);

    CHECK(divergence::conjugate(kUnc, 0.0) == 0.0);
    CHECK(divergence::conjugate(kUnc, 2.0) == doctest::Approx(3.0).epsilon(1e-15));

    CHECK(divergence::f_prime_inverse(kUnc, 0.0) == 1.0);
    CHECK(divergence::f_prime_inverse(kUnc, -2.0) == 0.0);
    CHECK(divergence::f_prime_inverse(kUnc, 2.0) == 2.0);
}

TEST_CASE("nonneg conjugate matches the numeric constrained supremum") {
    CHECK(divergence::conjugate(kNonneg, -4.0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(divergence::conjugate(kNonneg, 2.0) == doctest::Approx(3.0).epsilon(1e-12));
    for (double y = -6.0; y <= 6.0 + 1e-9; y += 0.5) {
        const double expect = numeric_nonneg_conjugate(y);
        CHECK(std::abs(divergence::conjugate(kNonneg, y) - expect) <= 1e-6);
    }
}

TEST_CASE("conjugate derivative") {
    CHECK(divergence::conjugate_prime(kNonneg, -4.0) == 0.0);
    CHECK(divergence::conjugate_prime(kNonneg, 0.0) == 1.0);
    CHECK(divergence::conjugate_prime(kUnc, 2.0) ==
          doctest::Approx(central_diff(&divergence::conjugate, kUnc, 2.0)).epsilon(1e-8));
    // away from the kink at y = -2 the nonneg derivative matches finite differences
    for (double y : {-5.0, -3.0, -1.0, 0.5, 3.0}) {
        CHECK(std::abs(divergence::conjugate_prime(kNonneg, y) -
                       central_diff(&divergence::conjugate, kNonneg, y)) <= 1e-6);
    }
}

TEST_CASE("Fenchel-Young inequality with equality at the inverse") {
    for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.05) {
        for (double y = -6.0; y <= 6.0 + 1e-9; y += 0.05) {
            const double lhs = divergence::f(kUnc, x) + divergence::conjugate(kUnc, y);
            CHECK(lhs >= x * y - 1e-10);
        }
    }
    for (double y = -6.0; y <= 6.0 + 1e-9; y += 0.05) {
        const double xstar = divergence::f_prime_inverse(kUnc, y);
        const double gap = divergence::f(kUnc, xstar) + divergence::conjugate(kUnc, y) - xstar * y;
        CHECK(std::abs(gap) <= 1e-10);
    }
}

TEST_CASE("nonneg conjugate derivative stays nonnegative") {
    for (double y = -6.0; y <= 6.0 + 1e-9; y += 0.05)
        CHECK(divergence::conjugate_prime(kNonneg, y) >= 0.0);
}

TEST_CASE("bc weight") {
    CHECK(divergence::bc_weight(kUnc, -4.0, false) == 0.0);
    CHECK(divergence::bc_weight(kUnc, 2.0, false) == 2.0);
    CHECK(divergence::bc_weight(kUnc, 0.7, true) == 0.7);
    CHECK(divergence::bc_weight(kUnc, -0.3, true) == 0.0);
}
