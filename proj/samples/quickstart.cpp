// Points of S_q, one Kloosterman sum and the variance of ball counts by
// two independent methods.

#include <cstdio>

#include "modtorus/modtorus.hpp"

int main() {
    using namespace modtorus;
    const Modulus mod = make_modulus(101);
    const PointSet points = generate_s_q(mod);
    std::printf("q = %lld, phi(q) = %lld, %zu points\n", static_cast<long long>(mod.value()),
                static_cast<long long>(mod.phi()), points.size());

    std::printf("S(1,1;101) = %.12f, Weil bound %.6f\n", kloosterman(1, 1, mod), weil_rhs(1, 1, mod));

    const double R = 0.05;
    const auto geo = variance_geometric(points, R);
    const auto spec = variance_spectral(mod, R, 1e-7);
    std::printf("variance at R = %.2f: geometric %.12e (+-%.1e), spectral %.12e (+-%.1e)\n", R, geo.value,
                geo.certified_error, spec.value, spec.certified_error);
    std::printf("random points would give %.12e\n", random_variance_baseline(points.size(), R));
    return 0;
}
