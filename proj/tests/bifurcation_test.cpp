#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pwsc/bifurcation.hpp"
#include "pwsc/fixtures.hpp"
#include "pwsc/orbits.hpp"
#include "support.hpp"

using namespace pwsc;
using pwsc::test::num;
using pwsc::test::system_from;
using pwsc::test::ulp_distance;

namespace {

std::array<std::complex<double>, 2> sorted(std::array<std::complex<double>, 2> v) {
    std::sort(v.begin(), v.end(), [](auto a, auto b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    return v;
}

std::array<std::complex<double>, 2> oracle_eigen(const Matrix2& j) {
    Eigen::Matrix2d m;
    m << j[0][0], j[0][1], j[1][0], j[1][1];
    const Eigen::EigenSolver<Eigen::Matrix2d> es(m, false);
    return sorted({es.eigenvalues()[0], es.eigenvalues()[1]});
}

bool close(std::complex<double> a, std::complex<double> b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

// Case-(i) system: alpha_minus > 0, unique equilibrium on the domain, Hopf on
// the left branch. Parameters follow the constraints
//   k > max(-a1 c, eps c^2), domain.lo between the monotonicity bound and
//   the trace root, so the equilibrium map is increasing.
SystemDefinition random_case_i(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const double a1 = -(0.05 + 0.3 * u(rng)), a2 = 0.5 + u(rng);
        const double b1 = 0.5 + u(rng), b2 = 0.5 + u(rng);
        const double eps = 0.05 + 0.15 * u(rng);
        const double c = (-a1 + 0.02 + 0.2 * u(rng)) / eps;
        const double k = std::max(-a1 * c, eps * c * c) * (1.5 + 1.5 * u(rng));
        const double alpha = a1 + eps * c;
        const double lo_mono = -(k + c * a1) / (2.0 * c * a2), lo_trace = -alpha / (2.0 * a2);
        const double lo = lo_mono + (lo_trace - lo_mono) * (0.2 + 0.6 * u(rng));
        const double xm = b1 / (2.0 * b2), hi_mono = (k / c + b1) / (2.0 * b2);
        auto s = system_from(num(a1) + "*x + " + num(a2) + "*x^2", num(b1) + "*x - " + num(b2) + "*x^2",
                             num(k) + "*x - lambda + " + num(c) + "*y", eps);
        s.domain = {lo, xm + 0.5 * (hi_mono - xm)};
        if (validate(s).passed()) return s;
    }
}

// Case-(ii) system: alpha_plus < 0 with f_plus' rising above eps |c| before
// the fold; k exceeds |c| max f_plus' so the equilibrium map is monotone.
SystemDefinition random_case_ii(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const double a1 = -(0.05 + u(rng)), a2 = u(rng);
        const double b1 = 0.05 + 0.15 * u(rng), b2 = 0.5 + u(rng), b3 = 0.5 + u(rng);
        const double peak = b1 + b2 * b2 / (3.0 * b3);
        const double eps = 0.01 + 0.09 * u(rng);
        const double c = -(b1 + (0.2 + 0.6 * u(rng)) * (peak - b1)) / eps;
        const double k = -c * peak * (1.2 + u(rng));
        auto s = system_from(num(a1) + "*x + " + num(a2) + "*x^2",
                             num(b1) + "*x + " + num(b2) + "*x^2 - " + num(b3) + "*x^3",
                             num(k) + "*x - lambda + " + num(c) + "*y", eps);
        s.domain = {-1.0, 3.0};
        if (validate(s).passed()) return s;
    }
}

// Same dynamics after t -> c t and y -> c y:
//   x' = -Y + c F(x),  Y' = eps c^2 g(x, Y / c).
SystemDefinition time_rescaled(const std::string& fm, const std::string& fp, const std::string& g_of_y,
                               double eps, double c) {
    const std::string cs = num(c);
    std::string g = g_of_y;
    for (std::size_t p = g.find("Y"); p != std::string::npos; p = g.find("Y", p + 1)) g.replace(p, 1, "(y/" + cs + ")");
    auto s = system_from(cs + "*(" + fm + ")", cs + "*(" + fp + ")", cs + "*" + cs + "*(" + g + ")", eps);
    return s;
}

}  // namespace

TEST_CASE("jacobian and eigenvalues: fixture examples") {
    const auto a = load_fixture("sys_a");
    const auto eq = find_equilibrium(a, 0.2);
    CHECK(eq.x == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(eq.y == doctest::Approx(0.34).epsilon(1e-14));
    CHECK(eq.side == Side::Right);
    CHECK_FALSE(eq.corner);
    CHECK(eq.jacobian[0][0] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(eq.jacobian[0][1] == -1.0);
    CHECK(eq.jacobian[1][0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(eq.jacobian[1][1] == 0.0);
    const auto ev = sorted(eq.eigenvalues);
    const auto orc = oracle_eigen(eq.jacobian);
    CHECK(close(ev[0], orc[0], 1e-10));
    CHECK(close(ev[1], orc[1], 1e-10));
    CHECK(ev[1].real() == doctest::Approx(1.43007).epsilon(1e-5));
    CHECK(ev[0].real() == doctest::Approx(0.06993).epsilon(1e-4));
    CHECK(eq.type == LocalType::UnstableNode);

    const auto q = corner_quantities(a);
    const auto lim = sorted(q.eigen_limits(Side::Left));
    CHECK(lim[0].real() == doctest::Approx(-0.88730).epsilon(1e-5));
    CHECK(lim[1].real() == doctest::Approx(-0.11270).epsilon(1e-4));
    const auto orc_left = oracle_eigen(jacobian_at(a, 0.0, 0.0, Side::Left));
    CHECK(close(lim[0], orc_left[0], 1e-10));
    CHECK(close(lim[1], orc_left[1], 1e-10));

    const auto c = load_fixture("sys_c");
    const auto eh = find_equilibrium(c, -0.035);
    CHECK(eh.x == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(std::abs(eh.trace()) < 1e-12);
    CHECK(eh.det() == doctest::Approx(0.06).epsilon(1e-12));
    const auto ec = sorted(eh.eigenvalues);
    CHECK(std::abs(ec[0].real()) < 1e-12);
    CHECK(ec[1].imag() == doctest::Approx(std::sqrt(0.06)).epsilon(1e-12));
}

TEST_CASE("find_equilibrium: invariants and errors") {
    const auto a = load_fixture("sys_a");
    auto narrow = a;
    narrow.domain = {-1.0, 1.0};
    CHECK_THROWS_AS(find_equilibrium(narrow, 2.0), EquilibriumCountError);
    try {
        find_equilibrium(narrow, 2.0);
    } catch (const EquilibriumCountError& e) {
        CHECK(e.count() == 0);
    }
    // g = x^2 - lambda has two roots for lambda > 0.
    const auto two = system_from("-x", "x*(1.9 - x)", "x^2 - lambda", 0.1);
    try {
        find_equilibrium(two, 0.25);
        FAIL("expected several equilibria");
    } catch (const EquilibriumCountError& e) {
        CHECK(e.count() == 2);
    }
    // Double root: not transverse.
    CHECK_THROWS_AS(find_equilibrium(two, 0.0), NotFoundError);

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> lam(-0.2, 0.2);
    for (int i = 0; i < 50; ++i) {
        const auto s = pwsc::test::random_system(rng).sys;
        const double l = lam(rng);
        Equilibrium eq;
        try {
            eq = find_equilibrium(s, l);
        } catch (const NotFoundError&) {
            continue;
        }
        const auto sl = s.with_lambda(l);
        CHECK(std::abs(sl.g_value(eq.x, sl.F(eq.x))) < 1e-10);
        CHECK(eq.y == sl.F(eq.x));
        const auto j = jacobian_at(sl, eq.x, eq.y, eq.side);
        CHECK(j == eq.jacobian);
    }
}

TEST_CASE("closed-form eigenvalues agree with an independent eigensolver") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lam(-0.3, 0.3);
    int compared = 0;
    for (int i = 0; i < 100; ++i) {
        const auto s = pwsc::test::random_system(rng).sys;
        Equilibrium eq;
        try {
            eq = find_equilibrium(s, lam(rng));
        } catch (const NotFoundError&) {
            continue;
        }
        const auto ev = sorted(jacobian_eigen(eq.jacobian));
        const auto orc = oracle_eigen(eq.jacobian);
        CHECK(close(ev[0], orc[0], 1e-10));
        CHECK(close(ev[1], orc[1], 1e-10));
        ++compared;
    }
    CHECK(compared >= 90);
}

TEST_CASE("corner eigenvalue limits equal (alpha +- sqrt(beta)) / 2") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        const auto s = pwsc::test::random_system(rng).sys;
        const auto q = corner_quantities(s);
        for (Side side : {Side::Left, Side::Right}) {
            const double alpha = side == Side::Left ? q.alpha_minus : q.alpha_plus;
            const double beta = side == Side::Left ? q.beta_minus : q.beta_plus;
            const auto lim = q.eigen_limits(side);
            const auto direct = jacobian_eigen(jacobian_at(s, 0.0, 0.0, side));
            for (int k = 0; k < 2; ++k) {
                CHECK(ulp_distance(lim[k].real(), direct[k].real()) <= 4);
                CHECK(ulp_distance(lim[k].imag(), direct[k].imag()) <= 4);
            }
            // Trace and discriminant of the one-sided Jacobian.
            const auto j = jacobian_at(s, 0.0, 0.0, side);
            const double tr = j[0][0] + j[1][1];
            const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            CHECK(alpha == doctest::Approx(tr).epsilon(1e-14));
            CHECK(beta == doctest::Approx(tr * tr - 4.0 * det).epsilon(1e-12).scale(1.0));
        }
        CHECK(q.alpha_plus > q.alpha_minus);
    }
}

TEST_CASE("corner_quantities: fixture values") {
    const auto qa = corner_quantities(load_fixture("sys_a"));
    CHECK(qa.alpha_plus == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(qa.alpha_minus == -1.0);
    CHECK(qa.beta_plus == doctest::Approx(3.21).epsilon(1e-14));
    CHECK(qa.beta_minus == doctest::Approx(0.6).epsilon(1e-14));
    CHECK_FALSE(qa.Lambda);
    CHECK(qa.det_hypothesis_ok);

    const auto qb = corner_quantities(load_fixture("sys_b"));
    CHECK(qb.beta_plus == doctest::Approx(-0.03).epsilon(1e-13));
    CHECK(qb.beta_minus == doctest::Approx(-0.0175).epsilon(1e-13));
    REQUIRE(qb.Lambda);
    const double expect = 0.1 / std::sqrt(0.03) - 0.15 / std::sqrt(0.0175);
    CHECK(*qb.Lambda == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(*qb.Lambda - (-0.55654)) < 1e-4);

    const auto qc = corner_quantities(load_fixture("sys_c"));
    CHECK(qc.alpha_minus == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("classify_corner: fixtures") {
    const auto ra = classify_corner(load_fixture("sys_a"));
    CHECK(std::string(case_code(ra.tag)) == "iii-c");
    CHECK(ra.criticality == Criticality::Supercritical);
    CHECK(ra.lambda0 == 0.0);
    CHECK_FALSE(ra.marginal);
    CHECK(ra.hypothesis_ok);

    const auto rb = classify_corner(load_fixture("sys_b"));
    CHECK(std::string(case_code(rb.tag)) == "iii-a");
    CHECK(rb.criticality == Criticality::Supercritical);

    const auto rc = classify_corner(load_fixture("sys_c"));
    CHECK(std::string(case_code(rc.tag)) == "i");
    CHECK(std::abs(rc.lambda0 - (-0.035)) < 1e-6);
    REQUIRE(rc.lyapunov);
    CHECK(rc.equilibrium_map_monotone.value_or(false));

    const auto rd = classify_corner(load_fixture("sys_d"));
    CHECK(std::string(case_code(rd.tag)) == "iii-c");
    CHECK(rd.criticality == Criticality::Subcritical);
    REQUIRE(rd.corner);
    CHECK(rd.corner->beta_plus >= 0.0);
    CHECK(rd.corner->beta_minus < 0.0);

    const auto j = ra.to_json();
    for (const char* key : {"case", "lambda0", "alpha", "beta", "Lambda", "l1", "marginal", "hypothesis_ok"})
        CHECK_MESSAGE(j.contains(key), key);
    CHECK(j["Lambda"].is_null());
    CHECK(rb.to_json()["Lambda"].get<double>() == doctest::Approx(-0.5565431498).epsilon(1e-9));
}

TEST_CASE("classify_corner: hypothesis violation and marginal cases") {
    CHECK_THROWS_AS(classify_corner(system_from("-x", "x*(1.9 - x)", "-x - lambda", 0.1)), HypothesisError);

    // alpha_+ = 0 exactly.
    const auto flat = classify_corner(system_from("-x", "x^2 - x^3", "x - lambda", 0.1));
    CHECK(flat.marginal);
    // Lambda = 0 exactly: mirror-image slopes with equal curvature.
    const auto lam0 = classify_corner(system_from("-0.1*x + x^2", "0.1*x + x^2 - x^3", "x - lambda", 0.01));
    CHECK(std::string(case_code(lam0.tag)) == "iii-a");
    CHECK(lam0.marginal);
    CHECK(lam0.criticality == Criticality::Undetermined);
}

TEST_CASE("classify_corner is scale-consistent on SYS-A") {
    const auto base = classify_corner(load_fixture("sys_a"));
    for (double c : {0.5, 2.0}) {
        auto s = load_fixture("sys_a");
        s.g = Expression::parse(num(c) + "*(x - lambda)");
        const auto r = classify_corner(s);
        CHECK(r.tag == base.tag);
        CHECK(r.criticality == base.criticality);
        CHECK_FALSE(r.marginal);
    }
}

TEST_CASE("case (i)/(ii) Hopf parameter lies on the side of the corner its case predicts") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 50; ++i) {
        const auto s = random_case_i(rng);
        const auto r = classify_corner(s);
        CHECK(r.tag == CaseTag::SmoothHopfLeft);
        CHECK(r.lambda0 < 0.0);
        CHECK(r.notes.empty());
    }
    for (int i = 0; i < 50; ++i) {
        const auto s = random_case_ii(rng);
        const auto r = classify_corner(s);
        CHECK(r.tag == CaseTag::SmoothHopfRight);
        CHECK(r.lambda0 > 0.0);
    }
}

TEST_CASE("find_hopf_locus") {
    const auto a = load_fixture("sys_a");
    CHECK(find_hopf_locus(a, Side::Right, {0.5, 1.5}) == doctest::Approx(0.95).epsilon(1e-10));
    CHECK(find_hopf_locus(load_fixture("sys_c"), Side::Left, {-1.0, 0.0}) == doctest::Approx(-0.035).epsilon(1e-9));
    const double xb = (1.0 + std::sqrt(1.3)) / 3.0;
    CHECK(find_hopf_locus(load_fixture("sys_b"), Side::Right, {0.5, 0.9}) == doctest::Approx(xb).epsilon(1e-10));
    CHECK_THROWS_AS(find_hopf_locus(a, Side::Left, {-1.0, 0.0}), NotFoundError);
}

TEST_CASE("first Lyapunov coefficient") {
    // Linear centre x' = -y, y' = x.
    const auto centre = system_from("0", "0", "x", 1.0);
    const auto eq = find_equilibrium(centre, 0.0);
    const auto l = lyapunov_first_coefficient(centre, eq, Side::Right);
    CHECK(l.degenerate);
    CHECK(l.criticality == Criticality::Undetermined);

    // Not at a Hopf point.
    const auto a = load_fixture("sys_a");
    CHECK_THROWS_AS(lyapunov_first_coefficient(a, find_equilibrium(a, 0.2), Side::Right), HypothesisError);

    // Fold of SYS-A: g_y = 0 and f_plus''' = 0 make l1 vanish.
    const auto fa = classify_fold(a);
    CHECK(fa.lambda0 == doctest::Approx(0.95).epsilon(1e-10));
    CHECK(fa.marginal);

    const auto fb = classify_fold(load_fixture("sys_b"));
    REQUIRE(fb.lyapunov);
    CHECK(fb.lyapunov->l1 < 0.0);
    CHECK(fb.criticality == Criticality::Supercritical);

    const auto fc = classify_fold(load_fixture("sys_c"));
    CHECK(fc.lambda0 == doctest::Approx(1.08).epsilon(1e-9));
}

TEST_CASE("sign of l1 is invariant under time rescaling") {
    struct Case {
        const char *fm, *fp, *g;
        double eps;
        Window domain;
    };
    for (const Case& k : {Case{"-0.15*x + x^2", "0.1*x + x^2 - x^3", "x - lambda + 0*Y", 0.01, {-10, 10}},
                          Case{"-0.1*x + x^2", "x - x^2", "x - lambda + 2*Y", 0.1, {-0.2, 0.8}},
                          Case{"-x", "x - x^2 + 0.3*x^3", "x - lambda + 0.5*Y + Y^2", 0.1, {-1.0, 1.2}}}) {
        auto base = time_rescaled(k.fm, k.fp, k.g, k.eps, 1.0);
        base.domain = k.domain;
        const auto r0 = classify_fold(base);
        REQUIRE(r0.lyapunov);
        REQUIRE_FALSE(r0.lyapunov->degenerate);
        for (double c : {0.25, 3.0}) {
            auto s = time_rescaled(k.fm, k.fp, k.g, k.eps, c);
            s.domain = base.domain;
            const auto r = classify_fold(s);
            REQUIRE(r.lyapunov);
            CHECK(r.lambda0 == doctest::Approx(r0.lambda0).epsilon(1e-9));
            CHECK((r.lyapunov->l1 < 0.0) == (r0.lyapunov->l1 < 0.0));
            CHECK(r.criticality == r0.criticality);
        }
    }
}

TEST_CASE("fold criticality matches the onset of small cycles") {
    // Supercritical: small attracting cycles on the side where the
    // equilibrium is unstable, with amplitude growing like sqrt(distance).
    const auto b = load_fixture("sys_b");
    const auto fb = classify_fold(b);
    REQUIRE(fb.criticality == Criticality::Supercritical);
    const auto eq = find_equilibrium(b, fb.lambda0 - 1e-4);
    REQUIRE_FALSE(eq.stable());
    const auto c1 = find_limit_cycle(b, fb.lambda0 - 1e-5);
    const auto c2 = find_limit_cycle(b, fb.lambda0 - 4e-5);
    REQUIRE(c1);
    REQUIRE(c2);
    CHECK(c1->stability == Stability::Attracting);
    CHECK(c1->amplitude < 0.05);
    const double exponent = std::log(c2->amplitude / c1->amplitude) / std::log(4.0);
    CHECK(exponent == doctest::Approx(0.5).epsilon(0.2));
}
