#include "odice/divergence.hpp"

#include <algorithm>

namespace odice::divergence {

double f(const Spec&, double x) {
    return (x - 1.0) * (x - 1.0);
}

double f_prime_inverse(const Spec&, double r) {
    return r / 2.0 + 1.0;
}

double conjugate(const Spec& spec, double y) {
    if (spec.mode == ConjugateMode::unconstrained) {
        return y * (y / 4.0 + 1.0);
    }
    const double w = std::max(0.0, f_prime_inverse(spec, y));
    return w * y - f(spec, w);
}

double conjugate_prime(const Spec& spec, double y) {
    const double d = y / 2.0 + 1.0;
    if (spec.mode == ConjugateMode::unconstrained) return d;
    return std::max(0.0, d);
}

double bc_weight(const Spec& spec, double r, bool drop_plus_one) {
    if (drop_plus_one) return std::max(0.0, r);
    return std::max(0.0, f_prime_inverse(spec, r));
}

}  // namespace odice::divergence
