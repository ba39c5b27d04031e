#include "pwsc/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pwsc/error.hpp"
#include "pwsc/roots.hpp"

namespace pwsc {

namespace {

using Vec = std::array<double, 2>;

// Dormand-Prince 5(4) tableau with Hairer's dense output coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct Field {
    const SystemDefinition& sys;
    double sign;

    Vec operator()(const Vec& s, Side region) const {
        const Bindings b{s[0], s[1], sys.lambda, sys.eps};
        const double fx = -s[1] + sys.piece(region).evaluate({s[0], 0.0, sys.lambda, sys.eps});
        const double fy = sys.eps * sys.g.evaluate(b);
        return {sign * fx, sign * fy};
    }
};

struct Step {
    Vec y1;
    std::array<Vec, 7> k;
    double err = 0.0;
};

Step dp_step(const Field& f, Side region, const Vec& y, const Vec& k1, double h, double rtol, double atol) {
    Step s;
    auto& k = s.k;
    k[0] = k1;
    auto comb = [&](std::initializer_list<std::pair<int, double>> terms) {
        Vec out = y;
        for (auto [i, a] : terms) {
            out[0] += h * a * k[i][0];
            out[1] += h * a * k[i][1];
        }
        return out;
    };
    k[1] = f(comb({{0, a21}}), region);
    k[2] = f(comb({{0, a31}, {1, a32}}), region);
    k[3] = f(comb({{0, a41}, {1, a42}, {2, a43}}), region);
    k[4] = f(comb({{0, a51}, {1, a52}, {2, a53}, {3, a54}}), region);
    k[5] = f(comb({{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}}), region);
    s.y1 = comb({{0, a71}, {2, a73}, {3, a74}, {4, a75}, {5, a76}});
    k[6] = f(s.y1, region);
    double sum = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double e =
            h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
        const double sk = atol + rtol * std::max(std::abs(y[i]), std::abs(s.y1[i]));
        sum += (e / sk) * (e / sk);
    }
    s.err = std::sqrt(sum / 2.0);
    return s;
}

DenseSegment make_segment(double tau0, double h, Side region, const Vec& y0, const Step& s) {
    DenseSegment seg;
    seg.tau0 = tau0;
    seg.h = h;
    seg.region = region;
    const auto& k = s.k;
    for (int i = 0; i < 2; ++i) {
        const double ydiff = s.y1[i] - y0[i];
        const double bspl = h * k[0][i] - ydiff;
        seg.r[0][i] = y0[i];
        seg.r[1][i] = ydiff;
        seg.r[2][i] = bspl;
        seg.r[3][i] = ydiff - h * k[6][i] - bspl;
        seg.r[4][i] = h * (d1 * k[0][i] + d3 * k[2][i] + d4 * k[3][i] + d5 * k[4][i] + d6 * k[5][i] + d7 * k[6][i]);
    }
    return seg;
}

double initial_step(const Field& f, Side region, const Vec& y0, const Vec& f0, const IntegratorConfig& cfg) {
    double dnf = 0.0, dny = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double sk = cfg.atol + cfg.rtol * std::abs(y0[i]);
        dnf += (f0[i] / sk) * (f0[i] / sk);
        dny += (y0[i] / sk) * (y0[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    h = std::min(h, cfg.h_max);
    Vec y1{y0[0] + h * f0[0], y0[1] + h * f0[1]};
    Vec f1;
    try {
        f1 = f(y1, region);
    } catch (const Error&) {
        return h;
    }
    double der2 = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double sk = cfg.atol + cfg.rtol * std::abs(y0[i]);
        der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
    }
    der2 = std::sqrt(der2 / 2.0) / h;
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf / 2.0));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100.0 * h, h1, cfg.h_max});
}

bool finite(const Vec& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

bool wrong_side(Side region, double x) { return region == Side::Left ? x > 0.0 : x < 0.0; }
bool strictly_inside(Side region, double x) { return region == Side::Left ? x < 0.0 : x > 0.0; }

// Region to continue in from a point on the splitting line: the side x moves to.
Side region_from_line(double y, double sign) { return sign * (-y) < 0.0 ? Side::Left : Side::Right; }

bool passes(CrossingFilter filter, int dir) {
    return filter == CrossingFilter::Both || (filter == CrossingFilter::Rising && dir > 0) ||
           (filter == CrossingFilter::Falling && dir < 0);
}

int crossing_direction(double v0, double v1) {
    if (v0 < 0.0 && v1 >= 0.0) return +1;
    if (v0 > 0.0 && v1 <= 0.0) return -1;
    return 0;
}

}  // namespace

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::TerminalEvent: return "terminal_event";
        case Termination::StepUnderflow: return "step_underflow";
        case Termination::MaxSteps: return "max_steps";
        case Termination::NonFinite: return "non_finite";
        case Termination::Escaped: return "escaped";
    }
    return "?";
}

State DenseSegment::at(double tau) const {
    const double th = h == 0.0 ? 0.0 : (tau - tau0) / h;
    const double th1 = 1.0 - th;
    State s;
    s.x = r[0][0] + th * (r[1][0] + th1 * (r[2][0] + th * (r[3][0] + th1 * r[4][0])));
    s.y = r[0][1] + th * (r[1][1] + th1 * (r[2][1] + th * (r[3][1] + th1 * r[4][1])));
    return s;
}

State Trajectory::state_at(double t) const {
    if (segments.empty()) return {samples.front().x, samples.front().y};
    const double tau = direction == TimeDirection::Forward ? t - t0 : t0 - t;
    auto it = std::upper_bound(segments.begin(), segments.end(), tau,
                               [](double v, const DenseSegment& s) { return v < s.tau0; });
    if (it != segments.begin()) --it;
    return it->at(std::clamp(tau, it->tau0, it->tau0 + it->h));
}

void Trajectory::throw_if_failed() const {
    if (!ok()) throw IntegrationError(std::string(termination_name(termination)) + ": " + message);
}

double locate_event(const DenseSegment& seg, double tau_a, double tau_b,
                    const std::function<double(double, const State&)>& fn) {
    auto g = [&](double tau) { return fn(tau, seg.at(tau)); };
    const double ga = g(tau_a), gb = g(tau_b);
    if ((ga > 0.0) == (gb > 0.0) && ga != 0.0 && gb != 0.0)
        throw std::logic_error("locate_event: no sign change on segment");
    const double width = std::max(1e-14, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(tau_b));
    return solve_bracketed(g, tau_a, tau_b, ga, gb, width, 1e-12);
}

Trajectory integrate(const SystemDefinition& sys, State s0, double t0, double t_end, const IntegratorConfig& cfg,
                     const std::vector<EventSpec>& events, TimeDirection mode) {
    if (!(cfg.rtol > 0.0 && cfg.atol > 0.0)) throw std::invalid_argument("rtol and atol must be positive");
    if (!std::isfinite(s0.x) || !std::isfinite(s0.y)) throw IntegrationError("non-finite initial state");
    double span = mode == TimeDirection::Forward ? t_end - t0 : t0 - t_end;
    if (!(span >= 0.0)) throw std::invalid_argument("time span runs against the integration direction");
    span = std::min(span, cfg.t_max);

    Trajectory tr;
    tr.direction = mode;
    tr.t0 = t0;
    const double sign = mode == TimeDirection::Forward ? 1.0 : -1.0;
    const Field f{sys, sign};
    auto phys = [&](double tau) { return t0 + sign * tau; };

    Vec y{s0.x, s0.y};
    Side region = y[0] == 0.0 ? region_from_line(y[1], sign) : side_of(y[0]);
    auto sample_region = [&](const Vec& v) { return v[0] == 0.0 ? region : side_of(v[0]); };
    tr.samples.push_back({t0, y[0], y[1], sample_region(y)});

    std::vector<double> prev(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) prev[i] = events[i].fn(t0, y[0], y[1]);
    if (span == 0.0) return tr;

    Vec k1;
    try {
        k1 = f(y, region);
    } catch (const Error& e) {
        tr.termination = Termination::NonFinite;
        tr.message = e.what();
        return tr;
    }
    const bool fixed = cfg.fixed_step > 0.0;
    double h = fixed ? cfg.fixed_step : initial_step(f, region, y, k1, cfg);
    double tau = 0.0;
    double facold = 1e-4;
    std::size_t attempts = 0;
    int flips = 0;
    constexpr double kBeta = 0.04, kSafe = 0.9;
    const double expo1 = 0.2 - kBeta * 0.75;

    while (tau < span) {
        if (attempts++ >= cfg.max_steps) {
            tr.termination = Termination::MaxSteps;
            tr.message = "max_steps exceeded at t = " + std::to_string(phys(tau));
            break;
        }
        double hs = std::min(h, cfg.h_max);
        bool last = false;
        if (tau + hs >= span) {
            hs = span - tau;
            last = true;
        }

        Step st;
        bool evaluable = true;
        try {
            st = dp_step(f, region, y, k1, hs, cfg.rtol, cfg.atol);
        } catch (const Error&) {
            evaluable = false;
        }
        if (!evaluable || !finite(st.y1) || !std::isfinite(st.err)) {
            if (fixed || hs < 1e-12 * std::max(1.0, tau)) {
                tr.termination = Termination::NonFinite;
                tr.message = "non-finite state near t = " + std::to_string(phys(tau));
                break;
            }
            h = hs * 0.25;
            continue;
        }
        const double err = fixed ? 0.0 : st.err;
        const double fac11 = std::pow(std::max(err, 1e-30), expo1);
        if (err > 1.0) {
            h = hs / std::min(5.0, fac11 / kSafe);
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, tau)) {
                tr.termination = Termination::StepUnderflow;
                tr.message = "step size underflow at t = " + std::to_string(phys(tau)) + ", x = " +
                             std::to_string(y[0]) + ", y = " + std::to_string(y[1]);
                break;
            }
            continue;
        }

        // Accepted step, possibly cut back to a splitting-line crossing.
        double h_acc = hs;
        Vec y1 = st.y1;
        DenseSegment seg = make_segment(tau, hs, region, y, st);
        Vec k_next = st.k[6];
        bool crossed = false;
        if (wrong_side(region, y1[0])) {
            constexpr int kProbe = 64;
            double a = 0.0, b = hs;
            bool bracket = false;
            double last_inside = -1.0;
            for (int j = 1; j <= kProbe; ++j) {
                const double tj = tau + hs * j / kProbe;
                const double xj = seg.at(tj).x;
                if (wrong_side(region, xj)) {
                    if (last_inside >= 0.0) {
                        a = last_inside;
                        b = tj;
                        bracket = true;
                    }
                    break;
                }
                if (strictly_inside(region, xj)) last_inside = tj;
            }
            if (!bracket && strictly_inside(region, y[0])) {
                a = tau;
                b = tau + hs / kProbe;
                bracket = true;
            }
            if (!bracket) {
                // Leaving the line on the other side: the step used the wrong piece.
                if (++flips <= 2) {
                    region = region == Side::Left ? Side::Right : Side::Left;
                    k1 = f(y, region);
                    continue;
                }
            } else {
                const double tau_star =
                    locate_event(seg, a, b, [](double, const State& s) { return s.x; });
                double hc = tau_star - tau;
                Step sc = st;
                for (int it = 0; it < 3 && hc > 0.0; ++it) {
                    sc = dp_step(f, region, y, k1, hc, cfg.rtol, cfg.atol);
                    const double xdot = f(sc.y1, region)[0];
                    if (std::abs(sc.y1[0]) <= 1e-15 || xdot == 0.0) break;
                    hc = std::min(hs, std::max(0.0, hc - sc.y1[0] / xdot));
                }
                if (hc > 0.0) {
                    h_acc = hc;
                    y1 = sc.y1;
                    seg = make_segment(tau, hc, region, y, sc);
                    crossed = true;
                    last = false;
                }
            }
        }
        flips = 0;

        // User events on the accepted segment.
        struct Hit {
            double tau;
            std::size_t idx;
            int dir;
        };
        std::vector<Hit> hits;
        const double tau_end = tau + h_acc;
        std::vector<double> now(events.size());
        for (std::size_t i = 0; i < events.size(); ++i) {
            now[i] = events[i].fn(phys(tau_end), y1[0], y1[1]);
            const int dir = crossing_direction(prev[i], now[i]);
            if (dir == 0 || !passes(events[i].filter, dir)) continue;
            const auto& fn = events[i].fn;
            auto g = [&](double tt, const State& s) { return fn(phys(tt), s.x, s.y); };
            // The interpolant can disagree in sign with the step end points
            // when the event value is at rounding level; take the nearer end.
            const double ga = g(tau, seg.at(tau)), gb = g(tau_end, seg.at(tau_end));
            double te;
            if ((ga > 0.0 && gb > 0.0) || (ga < 0.0 && gb < 0.0))
                te = std::abs(ga) < std::abs(gb) ? tau : tau_end;
            else
                te = locate_event(seg, tau, tau_end, g);
            hits.push_back({te, i, dir});
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& p, const Hit& q) { return p.tau < q.tau; });
        bool terminal = false;
        for (const Hit& hit : hits) {
            const State s = seg.at(hit.tau);
            tr.events.push_back({events[hit.idx].id, phys(hit.tau), s.x, s.y, hit.dir});
            if (events[hit.idx].action == EventAction::Terminate) {
                seg.h = hit.tau - seg.tau0;
                if (cfg.store_dense) tr.segments.push_back(seg);
                tr.samples.push_back({phys(hit.tau), s.x, s.y, side_of(s.x)});
                tr.termination = Termination::TerminalEvent;
                terminal = true;
                break;
            }
        }
        if (terminal) break;
        if (cfg.store_dense) tr.segments.push_back(seg);

        if (crossed) {
            tr.events.push_back({kSplittingEvent, phys(tau_end), y1[0], y1[1], region == Side::Left ? +1 : -1});
            y1[0] = 0.0;
            region = region_from_line(y1[1], sign);
            k_next = f(y1, region);
        }
        tau = last ? span : tau_end;
        y = y1;
        k1 = k_next;
        tr.samples.push_back({phys(tau), y[0], y[1], sample_region(y)});
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (!crossed) {
                prev[i] = now[i];
                continue;
            }
            // A snapped value of exactly zero keeps the pre-snap sign so a
            // crossing that completes in the next step is still seen.
            const double v = events[i].fn(phys(tau), y[0], y[1]);
            prev[i] = v != 0.0 ? v : (now[i] != 0.0 ? now[i] : prev[i]);
        }

        if (std::abs(y[0]) > cfg.escape_radius || std::abs(y[1]) > cfg.escape_radius) {
            tr.termination = Termination::Escaped;
            tr.message = "left the box |x|,|y| <= " + std::to_string(cfg.escape_radius);
            break;
        }

        if (!fixed) {
            double fac = fac11 / std::pow(facold, kBeta);
            fac = std::clamp(fac / kSafe, 0.1, 5.0);
            h = hs / fac;
            facold = std::max(err, 1e-4);
        }
        if (last) break;
    }
    return tr;
}

double time_in_tube(const Trajectory& traj, const SystemDefinition& sys, double radius, double band_lo,
                    double band_hi) {
    auto inside = [&](const State& s) {
        return s.x >= band_lo && s.x <= band_hi && std::abs(s.y - sys.F(s.x)) < radius;
    };
    constexpr int kSub = 8;
    double total = 0.0;
    for (const DenseSegment& seg : traj.segments) {
        double ta = seg.tau0;
        bool ia = inside(seg.at(ta));
        for (int j = 1; j <= kSub; ++j) {
            const double tb = seg.tau0 + seg.h * j / kSub;
            const bool ib = inside(seg.at(tb));
            if (ia && ib) {
                total += tb - ta;
            } else if (ia != ib) {
                double lo = ta, hi = tb;
                for (int it = 0; it < 60 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (inside(seg.at(mid)) == ia ? lo : hi) = mid;
                }
                total += ia ? lo - ta : tb - hi;
            }
            ta = tb;
            ia = ib;
        }
    }
    return total * sys.eps;
}

}  // namespace pwsc
