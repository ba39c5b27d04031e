#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "pwsc/io.hpp"
#include "pwsc/system.hpp"

namespace pwsc::test {

inline std::string num(double v) { return format_real(v); }

/// Distance in representable doubles between a and b.
inline std::uint64_t ulp_distance(double a, double b) {
    if (a == b) return 0;
    auto key = [](double v) {
        const auto bits = std::bit_cast<std::int64_t>(v);
        return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
    };
    const auto ka = key(a), kb = key(b);
    return ka > kb ? static_cast<std::uint64_t>(ka) - static_cast<std::uint64_t>(kb)
                   : static_cast<std::uint64_t>(kb) - static_cast<std::uint64_t>(ka);
}

inline SystemDefinition system_from(const std::string& f_minus, const std::string& f_plus, const std::string& g,
                                    double eps, double lambda = 0.0) {
    return parse_system("[functions]\nf_minus = \"" + f_minus + "\"\nf_plus = \"" + f_plus + "\"\ng = \"" + g +
                        "\"\n[parameters]\neps = " + num(eps) + "\nlambda = " + num(lambda) + "\n");
}

/// Random corner system with quadratic/cubic pieces and g = x - lambda + c*y.
///
/// f_minus = a1 x + a2 x^2 with a1 < 0, a2 >= 0; f_plus = b1 x - b2 x^2 + b3 x^3
/// with b1 > 0, b2 > 0, 0 <= b3 small. Then f_plus - f_minus < 0 on x < 0, so
/// the ordering hypothesis holds on the whole left half-line. The slow
/// nullcline slope c is kept small enough for a unique equilibrium near the
/// corner on the default window.
struct RandomSystem {
    SystemDefinition sys;
    double a1, a2, b1, b2, b3, c;
};

inline RandomSystem random_system(std::mt19937_64& rng, bool with_y = true) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        RandomSystem r{};
        r.a1 = -(0.05 + 1.5 * u(rng));
        r.a2 = u(rng);
        r.b1 = 0.05 + 2.0 * u(rng);
        r.b2 = 0.5 + u(rng);
        r.b3 = 0.1 * u(rng);
        r.c = with_y ? 0.3 * (u(rng) - 0.5) : 0.0;
        const double eps = 0.01 + 0.2 * u(rng);
        const std::string fm = num(r.a1) + "*x + " + num(r.a2) + "*x^2";
        const std::string fp = num(r.b1) + "*x - " + num(r.b2) + "*x^2 + " + num(r.b3) + "*x^3";
        const std::string g = "x - lambda + " + num(r.c) + "*y";
        r.sys = system_from(fm, fp, g, eps);
        r.sys.domain = {-3.0, 3.0};
        if (validate(r.sys).passed()) return r;
    }
}

}  // namespace pwsc::test
