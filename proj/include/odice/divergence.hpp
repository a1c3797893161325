#pragma once

namespace odice::divergence {

enum class Kind { pearson_chi2 };

// Conjugate used by the value loss. `unconstrained` is the closed form
// y(y/4 + 1); `nonneg` restricts the supremum to ratios >= 0, which clamps
// the conjugate derivative at zero.
enum class ConjugateMode { unconstrained, nonneg };

struct Spec {
    Kind kind = Kind::pearson_chi2;
    ConjugateMode mode = ConjugateMode::unconstrained;
};

// f(x) = (x - 1)^2
double f(const Spec& spec, double x);

// Convex conjugate of f. Unconstrained: y(y/4 + 1).
// Nonneg: w*(y) * y - f(w*(y)) with w*(y) = max(0, f_prime_inverse(y)).
double conjugate(const Spec& spec, double y);

// Derivative of conjugate(). Unconstrained: y/2 + 1. Nonneg: max(0, y/2 + 1);
// at the kink y = -2 the right derivative (0) is used.
double conjugate_prime(const Spec& spec, double y);

// (f')^{-1}(R) = R/2 + 1
double f_prime_inverse(const Spec& spec, double r);

// Behavior-cloning weight for policy extraction. With `drop_plus_one` the
// "+1" of the inverse is removed and the weight becomes max(0, R).
double bc_weight(const Spec& spec, double r, bool drop_plus_one);

}  // namespace odice::divergence
