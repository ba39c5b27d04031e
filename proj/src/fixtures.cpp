#include "pwsc/fixtures.hpp"

#include "pwsc/error.hpp"

namespace pwsc {

const std::vector<Fixture>& fixtures() {
    static const std::vector<Fixture> all = {
        {"sys_a", "corner with real eigenvalues on both sides: supercritical super-explosion",
         R"ini([functions]
f_minus = "-x"
f_plus = "x*(1.9 - x)"
g = "x - lambda"

[parameters]
eps = 0.1
lambda = 0
)ini"},
        {"sys_b", "complex eigenvalues on both sides: nonsmooth Hopf followed by a canard explosion",
         R"ini([functions]
f_minus = "-0.15*x + x^2"
f_plus = "0.1*x + x^2 - x^3"
g = "x - lambda"

[parameters]
eps = 0.01
lambda = 0
)ini"},
        {"sys_c", "slow nullcline with y-dependence: smooth Hopf on the left branch",
         R"ini([functions]
f_minus = "-0.1*x + x^2"
f_plus = "x - x^2"
g = "x - lambda + 2*y"

[parameters]
eps = 0.1
lambda = 0

# The slow nullcline meets the critical manifold three times on [-10, 10];
# this window keeps the equilibrium near the corner and the fold unique.
[domain]
x_min = -0.2
x_max = 0.8
)ini"},
        {"sys_d", "real eigenvalues on the right, complex on the left: subcritical super-explosion",
         R"ini([functions]
f_minus = "-0.3*x + x^2"
f_plus = "x*(1.9 - x)"
g = "x - lambda"

[parameters]
eps = 0.1
lambda = -0.01
)ini"},
    };
    return all;
}

const Fixture& fixture(const std::string& name) {
    for (const Fixture& f : fixtures())
        if (f.name == name) return f;
    throw NotFoundError("unknown fixture '" + name + "'");
}

SystemDefinition load_fixture(const std::string& name) { return parse_system(fixture(name).ini); }

}  // namespace pwsc
