#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pwsc/fixtures.hpp"
#include "pwsc/integrator.hpp"
#include "support.hpp"

using namespace pwsc;
using pwsc::test::system_from;

namespace {

// x' = -y, y' = eps x: F vanishes identically, period 2 pi / sqrt(eps).
SystemDefinition harmonic(double eps = 0.1) { return system_from("0", "0", "x", eps); }

double harmonic_error(double step) {
    const double eps = 0.1;
    const double period = 2.0 * std::numbers::pi / std::sqrt(eps);
    IntegratorConfig cfg;
    cfg.fixed_step = step;
    const auto tr = integrate(harmonic(eps), {1.0, 0.0}, 0.0, period, cfg);
    REQUIRE(tr.ok());
    return std::hypot(tr.back().x - 1.0, tr.back().y);
}

int splitting_count(const Trajectory& tr) {
    int n = 0;
    for (const auto& e : tr.events) n += e.id == kSplittingEvent;
    return n;
}

}  // namespace

TEST_CASE("harmonic surrogate returns after one period") {
    const double period = 2.0 * std::numbers::pi / std::sqrt(0.1);
    IntegratorConfig cfg;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-13;
    const auto tr = integrate(harmonic(), {1.0, 0.0}, 0.0, period, cfg);
    REQUIRE(tr.ok());
    CHECK(tr.back().t == period);
    CHECK(std::abs(tr.back().x - 1.0) < 1e-7);
    CHECK(std::abs(tr.back().y) < 1e-7);
    CHECK(splitting_count(tr) == 2);
}

TEST_CASE("observed order on the harmonic surrogate") {
    const double period = 2.0 * std::numbers::pi / std::sqrt(0.1);
    double prev = harmonic_error(period / 16);
    for (int n : {32, 64}) {
        const double e = harmonic_error(period / n);
        const double order = std::log2(prev / e);
        CHECK_MESSAGE(order >= 4.5, "steps " << n << " order " << order);
        prev = e;
    }
}

TEST_CASE("event residual at the first splitting crossing") {
    const auto a = load_fixture("sys_a").with_lambda(0.01);
    IntegratorConfig cfg;
    const auto tr = integrate(a, {0.0, 0.5}, 0.0, 50.0, cfg);
    REQUIRE(tr.ok());
    REQUIRE(splitting_count(tr) >= 1);
    for (const auto& e : tr.events) {
        if (e.id != kSplittingEvent) continue;
        CHECK(std::abs(e.x) < 1e-10);
        CHECK(std::abs(tr.state_at(e.t).x) < 1e-10);
        break;
    }
}

TEST_CASE("time reversal retraces the forward trajectory") {
    const auto a = load_fixture("sys_a").with_lambda(0.2);
    IntegratorConfig cfg;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-13;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const State s0{u(rng), u(rng)};
        const auto fwd = integrate(a, s0, 0.0, 1.0, cfg);
        REQUIRE(fwd.ok());
        const auto bwd = integrate(a, {fwd.back().x, fwd.back().y}, 1.0, 0.0, cfg, {}, TimeDirection::Backward);
        REQUIRE(bwd.ok());
        CHECK(bwd.back().t == 0.0);
        CHECK(std::hypot(bwd.back().x - s0.x, bwd.back().y - s0.y) < 1e-6);
    }
}

TEST_CASE("samples are strictly monotone in time") {
    const auto a = load_fixture("sys_a").with_lambda(0.01);
    const auto fwd = integrate(a, {0.3, 0.4}, 0.0, 40.0, {});
    for (std::size_t i = 1; i < fwd.samples.size(); ++i) CHECK(fwd.samples[i].t > fwd.samples[i - 1].t);
    const auto bwd = integrate(a, {0.3, 0.4}, 0.0, -40.0, {}, {}, TimeDirection::Backward);
    for (std::size_t i = 1; i < bwd.samples.size(); ++i) CHECK(bwd.samples[i].t < bwd.samples[i - 1].t);
}

TEST_CASE("zero span yields the initial state only") {
    const auto tr = integrate(load_fixture("sys_a"), {0.25, -0.5}, 3.0, 3.0, {});
    REQUIRE(tr.samples.size() == 1);
    CHECK(tr.samples[0].t == 3.0);
    CHECK(tr.samples[0].x == 0.25);
    CHECK(tr.samples[0].y == -0.5);
}

TEST_CASE("argument and failure reporting") {
    const auto a = load_fixture("sys_a");
    IntegratorConfig bad;
    bad.rtol = 0.0;
    CHECK_THROWS_AS(integrate(a, {0, 0}, 0, 1, bad), std::invalid_argument);
    CHECK_THROWS_AS(integrate(a, {NAN, 0}, 0, 1, {}), IntegrationError);
    CHECK_THROWS_AS(integrate(a, {0, 0}, 0, -1, {}), std::invalid_argument);

    // Finite-time blow-up of x' = x^2.
    const auto blow = system_from("-x", "x^2", "0", 0.1);
    const auto tr = integrate(blow, {1.0, 0.0}, 0.0, 2.0, {});
    CHECK_FALSE(tr.ok());
    CHECK_THROWS_AS(tr.throw_if_failed(), IntegrationError);

    IntegratorConfig few;
    few.max_steps = 3;
    CHECK(integrate(a, {0.5, 0.5}, 0, 100, few).termination == Termination::MaxSteps);

    IntegratorConfig box;
    box.escape_radius = 2.0;
    CHECK(integrate(blow, {1.0, 0.0}, 0.0, 2.0, box).termination == Termination::Escaped);
}

TEST_CASE("locate_event on a dense segment") {
    const auto tr = integrate(harmonic(), {1.0, 0.0}, 0.0, 1.0, {});
    REQUIRE(!tr.segments.empty());
    const auto& seg = tr.segments.front();
    const double a = seg.tau0, b = seg.tau0 + seg.h;
    const double ya = seg.at(a).y, yb = seg.at(b).y;
    const double level = 0.5 * (ya + yb);
    const double t = locate_event(seg, a, b, [level](double, const State& s) { return s.y - level; });
    CHECK(std::abs(seg.at(t).y - level) < 1e-12);
    CHECK_THROWS_AS(locate_event(seg, a, b, [](double, const State&) { return 1.0; }), std::logic_error);

    // A linear function of x sweeping from -1 to 1.
    DenseSegment lin;
    lin.tau0 = 0.0;
    lin.h = 1.0;
    lin.r[0] = {-1.0, 0.0};
    lin.r[1] = {2.0, 0.0};
    const double tl = locate_event(lin, 0.0, 1.0, [](double, const State& s) { return s.x; });
    CHECK(std::abs(lin.at(tl).x) < 1e-12);
    CHECK(tl == doctest::Approx(0.5));
}

TEST_CASE("user events: filters, records and termination") {
    const auto a = load_fixture("sys_a").with_lambda(0.01);
    std::vector<EventSpec> ev{
        {"x=0.3 up", [](double, double x, double) { return x - 0.3; }, CrossingFilter::Rising, EventAction::Record},
        {"x=0.3 any", [](double, double x, double) { return x - 0.3; }, CrossingFilter::Both, EventAction::Record},
    };
    const auto tr = integrate(a, {0.0, 0.5}, 0.0, 300.0, {}, ev);
    int up = 0, any = 0;
    for (const auto& e : tr.events) {
        if (e.id == "x=0.3 up") {
            ++up;
            CHECK(e.direction == 1);
        }
        if (e.id == "x=0.3 any") ++any;
        if (e.id != kSplittingEvent) CHECK(std::abs(e.x - 0.3) < 1e-10);
    }
    CHECK(up >= 2);
    CHECK(any >= 2 * up - 1);
    CHECK(any <= 2 * up + 1);

    std::vector<EventSpec> stop{
        {"stop", [](double t, double, double) { return t - 7.5; }, CrossingFilter::Both, EventAction::Terminate}};
    const auto ts = integrate(a, {0.0, 0.5}, 0.0, 300.0, {}, stop);
    CHECK(ts.termination == Termination::TerminalEvent);
    CHECK(ts.back().t == doctest::Approx(7.5).epsilon(1e-12));
}

TEST_CASE("splitting crossings: parity on 100 random SYS-A trajectories") {
    const auto a = load_fixture("sys_a").with_lambda(0.01);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.5, 2.0), dur(1.0, 80.0);
    for (int i = 0; i < 100; ++i) {
        State s0{u(rng), u(rng)};
        if (s0.x == 0.0) s0.x = 1e-3;
        const auto tr = integrate(a, s0, 0.0, dur(rng), {});
        REQUIRE(tr.ok());
        const double xf = tr.back().x;
        if (xf == 0.0) continue;  // ended exactly on the line
        const bool changed = (s0.x < 0.0) != (xf < 0.0);
        CHECK((splitting_count(tr) % 2 == 1) == changed);
        for (const auto& e : tr.events) CHECK(std::abs(e.x) < 1e-10);
    }
}

TEST_CASE("splitting restart keeps accuracy with a larger maximum step") {
    const auto a = load_fixture("sys_a").with_lambda(0.01);
    IntegratorConfig c1;
    c1.rtol = 1e-10;
    c1.atol = 1e-13;
    c1.h_max = 0.05;
    IntegratorConfig c2 = c1;
    c2.h_max = 0.1;
    const double t_max = 100.0;
    const auto t1 = integrate(a, {0.5, 1.0}, 0.0, t_max, c1);
    const auto t2 = integrate(a, {0.5, 1.0}, 0.0, t_max, c2);
    REQUIRE(t1.ok());
    REQUIRE(t2.ok());
    REQUIRE(splitting_count(t1) >= 2);
    CHECK(splitting_count(t1) == splitting_count(t2));
    const double scale = 1.0 + std::hypot(t1.back().x, t1.back().y);
    CHECK(std::hypot(t1.back().x - t2.back().x, t1.back().y - t2.back().y) <= 10.0 * c1.rtol * scale);
}

TEST_CASE("no odd crossing is missed near grazing") {
    // Level x = 0.4 sits close to turning points of many orbits.
    const auto a = load_fixture("sys_a").with_lambda(0.2);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    auto count = [&](const State& s0, double h_max) {
        IntegratorConfig cfg;
        cfg.h_max = h_max;
        std::vector<EventSpec> ev{{"level", [](double, double x, double) { return x - 0.4; }}};
        const auto tr = integrate(a, s0, 0.0, 40.0, cfg, ev);
        int n = 0;
        for (const auto& e : tr.events) n += e.id == "level";
        return std::pair{n, tr.back().x};
    };
    for (int i = 0; i < 30; ++i) {
        const State s0{u(rng), u(rng)};
        const auto [n1, x1] = count(s0, 1.0);
        const auto [n2, x2] = count(s0, 0.1);
        CHECK(n1 % 2 == n2 % 2);
        CHECK((n1 % 2 == 1) == ((s0.x < 0.4) != (x1 < 0.4)));
    }
}

TEST_CASE("time_in_tube") {
    const auto a = load_fixture("sys_a").with_lambda(0.3);
    IntegratorConfig cfg;
    // Entirely in x < 0 for the whole run: nothing in the band.
    const auto left = integrate(a.with_lambda(-0.5), {-0.5, 0.5}, 0.0, 20.0, cfg);
    REQUIRE(left.ok());
    bool stayed_left = true;
    for (const auto& s : left.samples) stayed_left = stayed_left && s.x < 0.0;
    REQUIRE(stayed_left);
    CHECK(time_in_tube(left, a, 1.0, 0.1, 0.85) == 0.0);

    // A horizontal fast jump across the band from far above the manifold
    // never enters a thin tube.
    const auto jump = integrate(a, {0.0, 5.0}, 0.0, 0.5, cfg);
    CHECK(time_in_tube(jump, a, 0.1, 0.1, 0.85) == 0.0);

    // A trajectory sitting exactly on an equilibrium inside the band spends
    // the whole run in the tube.
    const auto rest = integrate(a, {0.3, a.F(0.3)}, 0.0, 10.0, cfg);
    CHECK(time_in_tube(rest, a, 0.01, 0.1, 0.85) == doctest::Approx(10.0 * a.eps).epsilon(1e-9));
}
