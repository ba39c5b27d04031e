#include "pwsc/orbits.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "pwsc/roots.hpp"

namespace pwsc {

const char* cycle_type_name(CycleType t) {
    switch (t) {
        case CycleType::SmallCycle: return "small_cycle";
        case CycleType::CanardNoHead: return "canard_no_head";
        case CycleType::CanardWithHead: return "canard_with_head";
        case CycleType::Relaxation: return "relaxation";
    }
    return "?";
}

const char* stability_name(Stability s) { return s == Stability::Attracting ? "attracting" : "repelling"; }

// ---------------------------------------------------------------------------
// Return map

ReturnMap::ReturnMap(const SystemDefinition& sys, double lambda, OrbitOptions options, TimeDirection direction)
    : sys_(sys.with_lambda(lambda)), options_(options), direction_(direction) {
    eq_ = find_equilibrium(sys_, lambda);
    try {
        const double xm = find_x_max(sys_, sys_.domain.hi);
        height_ = std::max(2.0 * std::abs(sys_.F(xm) - eq_.y) + std::abs(sys_.F(xm)), 1e-6);
    } catch (const NotFoundError&) {
        height_ = 1.0;
    }
}

namespace {

std::vector<EventSpec> section_events(const ReturnMap& map) {
    const Equilibrium& eq = map.equilibrium();
    const Window dom = map.system().domain;
    const double delta = 1e-2 * map.options().min_offset * map.scan_height();
    const double xe = eq.x, ye = eq.y;
    const bool fwd = map.direction() == TimeDirection::Forward;
    return {
        {"section", [xe](double, double x, double) { return x - xe; },
         fwd ? CrossingFilter::Falling : CrossingFilter::Rising, EventAction::Terminate},
        {"converged",
         [xe, ye, delta](double, double x, double y) {
             return (x - xe) * (x - xe) + (y - ye) * (y - ye) - delta * delta;
         },
         CrossingFilter::Falling, EventAction::Terminate},
        {"escape", [dom](double, double x, double) { return x - dom.lo; }, CrossingFilter::Falling,
         EventAction::Terminate},
        {"escape", [dom](double, double x, double) { return x - dom.hi; }, CrossingFilter::Rising,
         EventAction::Terminate},
    };
}

ReturnResult run_map(const ReturnMap& map, double y, bool keep, const std::vector<EventSpec>& extra) {
    const Equilibrium& eq = map.equilibrium();
    if (!(y > eq.y)) throw std::invalid_argument("return map start must lie above the equilibrium");
    const SystemDefinition& sys = map.system();
    std::vector<EventSpec> events = section_events(map);
    events.insert(events.end(), extra.begin(), extra.end());

    IntegratorConfig cfg = map.options().integrator;
    cfg.store_dense = keep;
    cfg.escape_radius = std::min(cfg.escape_radius, 1e3 * (1.0 + std::abs(y) + map.scan_height()));
    const double t_max = map.options().max_return_slow_time / sys.eps;
    const bool fwd = map.direction() == TimeDirection::Forward;
    Trajectory tr = integrate(sys, {eq.x, y}, 0.0, fwd ? t_max : -t_max, cfg, events, map.direction());

    using R = NoReturnError::Reason;
    if (tr.termination == Termination::TerminalEvent) {
        const EventRecord& ev = tr.events.back();
        if (ev.id == "section") {
            if (!(std::abs(ev.y - eq.y) > 1e-10))
                throw NoReturnError("section crossing is not transversal", R::NotTransversal);
            ReturnResult r;
            r.y = ev.y;
            r.period = std::abs(ev.t);
            if (keep) r.trajectory = std::move(tr);
            return r;
        }
        if (ev.id == "converged") throw NoReturnError("trajectory converges to the equilibrium", R::Converged);
        throw NoReturnError("trajectory leaves the domain", R::Escaped);
    }
    if (tr.termination == Termination::Completed)
        throw NoReturnError("no return within the time limit", R::Timeout);
    if (tr.termination == Termination::Escaped) throw NoReturnError(tr.message, R::Escaped);
    throw NoReturnError(std::string(termination_name(tr.termination)) + ": " + tr.message, R::Failed);
}

std::optional<double> displacement(const ReturnMap& map, double y) {
    try {
        return map(y) - y;
    } catch (const NoReturnError&) {
        return std::nullopt;
    } catch (const IntegrationError&) {
        return std::nullopt;
    }
}

std::vector<double> scan_heights(double y_eq, double lo_off, double hi_off, int n) {
    std::vector<double> ys;
    if (!(hi_off > lo_off) || n < 2) return ys;
    if (lo_off > 0.0 && hi_off / lo_off > 4.0) {
        const double r = std::pow(hi_off / lo_off, 1.0 / (n - 1));
        for (int k = 0; k < n; ++k) ys.push_back(y_eq + lo_off * std::pow(r, k));
    } else {
        for (int k = 0; k < n; ++k) ys.push_back(y_eq + lo_off + (hi_off - lo_off) * k / (n - 1));
    }
    return ys;
}

}  // namespace

ReturnResult ReturnMap::run(double y, bool keep_trajectory) const { return run_map(*this, y, keep_trajectory, {}); }

double return_map(const SystemDefinition& sys, double lambda, double y, TimeDirection direction,
                  const OrbitOptions& options) {
    return ReturnMap(sys, lambda, options, direction)(y);
}

// ---------------------------------------------------------------------------
// Cycles

CycleType classify_cycle(const PeriodicOrbit& orbit, const SystemDefinition& sys, const CycleThresholds& t,
                         double* tube_time) {
    const SystemDefinition s = sys.with_lambda(orbit.lambda);
    if (tube_time) *tube_time = 0.0;
    double xm = 0.0;
    try {
        xm = find_x_max(s, s.domain.hi);
    } catch (const NotFoundError&) {
        return CycleType::Relaxation;
    }
    if (orbit.amplitude < t.small_fraction * xm) return CycleType::SmallCycle;

    const double lo = t.band_lo * xm, hi = t.band_hi * xm;
    double curvature = 0.0;
    for (int k = 0; k <= 100; ++k) curvature = std::max(curvature, std::abs(s.piece_jet(Side::Right, lo + (hi - lo) * k / 100).dxx()));
    const double radius = t.radius_factor * std::sqrt(s.eps) * (1.0 + curvature);
    const double tube = time_in_tube(orbit.curve, s, radius, lo, hi);
    if (tube_time) *tube_time = tube;
    if (!(tube > t.min_tube_time)) return CycleType::Relaxation;

    const bool corner = orbit.section_x < t.corner_fraction * xm;
    const bool head = corner ? orbit.x_max > xm : orbit.x_min < -t.head_fraction * xm;
    return head ? CycleType::CanardWithHead : CycleType::CanardNoHead;
}

PeriodicOrbit make_orbit(const ReturnMap& map, double y_star) {
    const SystemDefinition& sys = map.system();
    const Equilibrium& eq = map.equilibrium();
    const std::vector<EventSpec> extrema = {
        {"x_turn", [&sys](double, double x, double y) { return -y + sys.F(x); }},
        {"r_turn",
         [&sys](double, double x, double y) { return x * (-y + sys.F(x)) + sys.eps * y * sys.g_value(x, y); }},
    };
    ReturnResult res = run_map(map, y_star, true, extrema);

    PeriodicOrbit o;
    o.lambda = eq.lambda;
    o.section_x = eq.x;
    o.section_y = y_star;
    o.period = res.period;
    o.residual = std::abs(res.y - y_star);
    o.x_min = o.x_max = eq.x;
    o.r_max = 0.0;
    auto visit = [&](double x, double y) {
        o.x_min = std::min(o.x_min, x);
        o.x_max = std::max(o.x_max, x);
        o.r_max = std::max(o.r_max, 0.5 * (x * x + y * y));
    };
    for (const Sample& s : res.trajectory.samples) visit(s.x, s.y);
    for (const EventRecord& e : res.trajectory.events) visit(e.x, e.y);
    o.amplitude = o.x_max - o.x_min;
    o.curve = std::move(res.trajectory);

    const double off = y_star - eq.y;
    const double h = 1e-5 * off;
    const auto up = displacement(map, y_star + h);
    const auto down = displacement(map, y_star - h);
    double m = std::numeric_limits<double>::quiet_NaN();
    if (up && down) {
        m = 1.0 + (*up - *down) / (2.0 * h);
    } else if (up) {
        m = 1.0 + (*up - (res.y - y_star)) / h;
    } else if (down) {
        m = 1.0 + ((res.y - y_star) - *down) / h;
    }
    if (map.direction() == TimeDirection::Backward)
        m = m == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / m;
    o.multiplier = m;
    o.stability = std::abs(m) < 1.0 ? Stability::Attracting : Stability::Repelling;
    o.type = classify_cycle(o, sys, map.options().thresholds, &o.tube_time);
    return o;
}

std::vector<PeriodicOrbit> find_limit_cycles(const ReturnMap& map, std::optional<std::pair<double, double>> bracket) {
    const OrbitOptions& opt = map.options();
    const double y_eq = map.equilibrium().y;
    double lo_off = opt.min_offset * map.scan_height();
    double hi_off = map.scan_height();
    if (bracket) {
        lo_off = std::max(bracket->first - y_eq, 1e-3 * opt.min_offset * map.scan_height());
        hi_off = bracket->second - y_eq;
    }
    const std::vector<double> ys = scan_heights(y_eq, lo_off, hi_off, opt.scan_points);

    std::vector<std::optional<double>> d(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) d[k] = displacement(map, ys[k]);

    std::vector<PeriodicOrbit> out;
    for (std::size_t k = 1; k < ys.size(); ++k) {
        if (!d[k - 1] || !d[k]) continue;
        const double da = *d[k - 1], db = *d[k];
        if ((da > 0.0) == (db > 0.0) && da != 0.0 && db != 0.0) continue;
        try {
            auto fn = [&](double y) {
                const auto v = displacement(map, y);
                if (!v) throw NotFoundError("return map undefined inside a cycle bracket");
                return *v;
            };
            const double scale = 1.0 + std::abs(ys[k]);
            const double y_star = solve_bracketed(fn, ys[k - 1], ys[k], da, db, 1e-15 * scale, 1e-13 * scale);
            out.push_back(make_orbit(map, y_star));
        } catch (const NotFoundError&) {
        } catch (const IntegrationError&) {
        }
    }
    return out;
}

std::optional<PeriodicOrbit> find_limit_cycle(const ReturnMap& map, std::optional<std::pair<double, double>> bracket) {
    const Stability want =
        map.direction() == TimeDirection::Forward ? Stability::Attracting : Stability::Repelling;
    std::vector<PeriodicOrbit> all = find_limit_cycles(map, bracket);
    for (auto it = all.rbegin(); it != all.rend(); ++it)
        if (it->stability == want) return std::move(*it);
    return std::nullopt;
}

std::optional<PeriodicOrbit> find_limit_cycle(const SystemDefinition& sys, double lambda, TimeDirection direction,
                                              std::optional<std::pair<double, double>> bracket,
                                              const OrbitOptions& options) {
    try {
        return find_limit_cycle(ReturnMap(sys, lambda, options, direction), bracket);
    } catch (const EquilibriumCountError&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

unsigned thread_count(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        n = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("PWSC_THREADS")) {
            const long cap = std::strtol(env, nullptr, 10);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        }
    }
    return std::max(1u, n);
}

SweepPoint sweep_point(const SystemDefinition& sys, double lambda, const OrbitOptions& opt,
                       std::optional<double> warm_offset) {
    SweepPoint p;
    p.lambda = lambda;
    std::optional<PeriodicOrbit> orbit;
    try {
        const ReturnMap map(sys, lambda, opt);
        if (warm_offset && *warm_offset > 0.0) {
            const double y_eq = map.equilibrium().y;
            const double hi = std::min(4.0 * *warm_offset, map.scan_height());
            if (hi > 0.25 * *warm_offset) {
                OrbitOptions narrow = opt;
                narrow.scan_points = 8;
                const ReturnMap warm(sys, lambda, narrow);
                orbit = find_limit_cycle(warm, std::make_pair(y_eq + 0.25 * *warm_offset, y_eq + hi));
            }
        }
        if (!orbit) orbit = find_limit_cycle(map);
    } catch (const NotFoundError&) {
    }
    if (orbit) {
        p.found = true;
        p.amplitude = orbit->amplitude;
        p.period = orbit->period;
        p.type = orbit->type;
        p.multiplier = orbit->multiplier;
        p.section_y = orbit->section_y;
        p.x_min = orbit->x_min;
        p.x_max = orbit->x_max;
        p.r_max = orbit->r_max;
    }
    return p;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class SweepState {
public:
    SweepState(const SystemDefinition& sys, const OrbitOptions& opt) : sys_(sys), opt_(opt) {}

    void add(const SweepPoint& p) { pts_[p.lambda] = p; }

    const SweepPoint& at(double lambda) {
        if (auto it = pts_.find(lambda); it != pts_.end()) return it->second;
        std::optional<double> warm;
        auto it = pts_.lower_bound(lambda);
        const SweepPoint* near = nullptr;
        if (it != pts_.end() && it->second.found) near = &it->second;
        if (it != pts_.begin()) {
            auto pv = std::prev(it);
            if (pv->second.found && (!near || lambda - pv->first < near->lambda - lambda)) near = &pv->second;
        }
        if (near) {
            try {
                warm = near->section_y - find_equilibrium(sys_, lambda).y;
            } catch (const NotFoundError&) {
            }
        }
        return pts_[lambda] = sweep_point(sys_, lambda, opt_, warm);
    }

    // Smallest lambda in (lo, hi] with pred true, given pred(lo) false and
    // pred(hi) true, to width tol.
    template <class Pred>
    std::pair<double, double> bisect(double lo, double hi, double tol, Pred pred) {
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (pred(at(mid)) ? hi : lo) = mid;
        }
        return {lo, hi};
    }

    std::vector<SweepPoint> points() const {
        std::vector<SweepPoint> v;
        for (const auto& [l, p] : pts_) v.push_back(p);
        return v;
    }

private:
    const SystemDefinition& sys_;
    const OrbitOptions& opt_;
    std::map<double, SweepPoint> pts_;
};

}  // namespace

nlohmann::json SweepResult::summary() const {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    std::size_t found = 0;
    for (const auto& p : points) found += p.found;
    return {{"points", points.size()},
            {"found", found},
            {"plateau_amplitude", plateau},
            {"lambda_10", opt(lambda_10)},
            {"lambda_90", opt(lambda_90)},
            {"window_width", opt(window_width())},
            {"onset", opt(onset)},
            {"first_amplitude", opt(first_amplitude)},
            {"super_explosion", super_explosion}};
}

SweepResult sweep_amplitude(const SystemDefinition& sys, double lambda_lo, double lambda_hi, int n_steps, bool refine,
                            const SweepOptions& options) {
    if (!(lambda_lo < lambda_hi)) throw std::invalid_argument("empty lambda range");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be positive");

    std::vector<double> grid(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) grid[k] = lambda_lo + (lambda_hi - lambda_lo) * k / n_steps;
    grid.back() = lambda_hi;

    // Coarse grid: independent cold searches, merged by index.
    std::vector<SweepPoint> coarse(grid.size());
    {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < grid.size();)
                coarse[i] = sweep_point(sys, grid[i], options.orbit, std::nullopt);
        };
        const unsigned n = std::min<unsigned>(thread_count(options.threads), static_cast<unsigned>(grid.size()));
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
        work();
        for (auto& th : pool) th.join();
    }

    SweepResult r;
    SweepState state(sys, options.orbit);
    for (const auto& p : coarse) state.add(p);

    std::vector<double> amps;
    for (const auto& p : coarse)
        if (p.found) amps.push_back(p.amplitude);
    if (!amps.empty()) {
        const std::size_t top = std::max<std::size_t>(1, (amps.size() + 9) / 10);
        r.plateau = median(std::vector<double>(amps.end() - top, amps.end()));
    }

    for (std::size_t i = 1; i < coarse.size(); ++i) {
        if (coarse[i].found && !coarse[i - 1].found) {
            const auto [lo, hi] =
                state.bisect(grid[i - 1], grid[i], options.onset_tol, [](const SweepPoint& p) { return p.found; });
            (void)lo;
            r.onset = hi;
            r.first_amplitude = state.at(hi).amplitude;
            r.super_explosion = r.plateau > 0.0 && *r.first_amplitude >= 0.5 * r.plateau;
            break;
        }
    }

    if (refine && r.plateau > 0.0) {
        auto level_bracket = [&](double level) -> std::optional<std::pair<double, double>> {
            const std::vector<SweepPoint> pts = state.points();
            for (std::size_t i = 1; i < pts.size(); ++i) {
                const bool a = pts[i - 1].found && pts[i - 1].amplitude >= level * r.plateau;
                const bool b = pts[i].found && pts[i].amplitude >= level * r.plateau;
                if (!a && b) return std::make_pair(pts[i - 1].lambda, pts[i].lambda);
            }
            return std::nullopt;
        };
        auto resolve = [&](double level) -> std::optional<double> {
            const auto br = level_bracket(level);
            if (!br) return std::nullopt;
            return state
                .bisect(br->first, br->second, options.refine_tol,
                        [&](const SweepPoint& p) { return p.found && p.amplitude >= level * r.plateau; })
                .second;
        };
        r.lambda_10 = resolve(0.1);
        r.lambda_90 = resolve(0.9);
        for (double level : {0.3, 0.5, 0.7}) resolve(level);
    }
    r.points = state.points();
    return r;
}

// ---------------------------------------------------------------------------
// Bistability

nlohmann::json Bistability::to_json() const {
    using nlohmann::json;
    auto orbit = [](const std::optional<PeriodicOrbit>& o) -> json {
        if (!o) return nullptr;
        return {{"section_y", o->section_y}, {"amplitude", o->amplitude}, {"period", o->period},
                {"multiplier", o->multiplier}, {"cycle_type", cycle_type_name(o->type)}};
    };
    return {{"stable_eq", stable_eq},
            {"attracting_cycle", attracting_cycle},
            {"repelling_cycle", repelling_cycle},
            {"equilibrium", {{"x", equilibrium.x}, {"y", equilibrium.y}, {"type", local_type_name(equilibrium.type)}}},
            {"attracting", orbit(attracting)},
            {"repelling", orbit(repelling)}};
}

Bistability detect_bistability(const SystemDefinition& sys, double lambda, const OrbitOptions& options) {
    Bistability b;
    const ReturnMap fwd(sys, lambda, options);
    b.equilibrium = fwd.equilibrium();
    b.stable_eq = b.equilibrium.stable();
    const double y_eq = b.equilibrium.y;
    const double y_far = y_eq + fwd.scan_height();

    // Attracting cycle: iterate the map from far outside until it settles.
    std::optional<double> settled;
    try {
        double y = y_far;
        for (int k = 0; k < 200; ++k) {
            const double next = fwd(y);
            if (std::abs(next - y) < 1e-9 * (1.0 + std::abs(y))) {
                settled = next;
                break;
            }
            y = next;
        }
    } catch (const NoReturnError&) {
    }
    if (settled) {
        const double off = *settled - y_eq;
        OrbitOptions narrow = options;
        narrow.scan_points = 5;
        const ReturnMap polish(sys, lambda, narrow);
        b.attracting = find_limit_cycle(polish, std::make_pair(y_eq + 0.99 * off, y_eq + 1.01 * off));
        if (!b.attracting) b.attracting = find_limit_cycle(fwd, std::make_pair(y_eq + 0.5 * off, y_far));
    }
    b.attracting_cycle = b.attracting && b.attracting->stability == Stability::Attracting;

    // Repelling cycle: attracting in backward time, inside the attracting one.
    const ReturnMap bwd(sys, lambda, options, TimeDirection::Backward);
    const double top = b.attracting ? b.attracting->section_y - 1e-3 * (b.attracting->section_y - y_eq) : y_far;
    b.repelling = find_limit_cycle(bwd, std::make_pair(y_eq + options.min_offset * bwd.scan_height(), top));
    b.repelling_cycle = b.repelling && b.repelling->stability == Stability::Repelling;
    return b;
}

// ---------------------------------------------------------------------------
// Shadow comparison

nlohmann::json ShadowComparison::summary() const {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"y_c", y_c},
            {"lambda", lambda},
            {"max_violation", max_violation},
            {"reentry_true", opt(reentry_true)},
            {"reentry_shadow", opt(reentry_shadow)},
            {"x_min_true", x_min_true},
            {"x_min_shadow", x_min_shadow},
            {"rows", rows.size()}};
}

namespace {

struct Excursion {
    Trajectory traj;
    double t_end = 0.0;
    std::optional<double> reentry;
    bool escaped = false;
};

Excursion left_excursion(const SystemDefinition& sys, double y_c) {
    IntegratorConfig cfg{1e-11, 1e-14};
    cfg.escape_radius = 1e4;
    const std::vector<EventSpec> events = {
        {"reentry", [](double, double x, double) { return x; }, CrossingFilter::Rising, EventAction::Terminate}};
    Excursion e;
    e.traj = integrate(sys, {0.0, y_c}, 0.0, 200.0 / sys.eps, cfg, events);
    e.t_end = e.traj.back().t;
    if (e.traj.termination == Termination::TerminalEvent) e.reentry = e.traj.events.back().y;
    e.escaped = !e.reentry;
    return e;
}

// Polar angle in [pi/2, 3pi/2] for points of the closed left half-plane.
double left_angle(double x, double y) {
    const double a = std::atan2(y, x);
    return a < 0.0 ? a + 2.0 * M_PI : a;
}

// Points of a trajectory on given rays from the origin. Each query returns
// the crossing farthest from the origin, or none when the ray is not reached.
class RayIndex {
public:
    explicit RayIndex(const Trajectory& tr) : tr_(tr) {
        constexpr int kSub = 16;
        for (const DenseSegment& seg : tr.segments)
            for (int j = 0; j < kSub; ++j) {
                const double ta = seg.tau0 + seg.h * j / kSub, tb = seg.tau0 + seg.h * (j + 1) / kSub;
                const State a = seg.at(ta), b = seg.at(tb);
                if (a.x > 0.0 || b.x > 0.0) continue;
                pieces_.push_back({&seg, ta, tb, left_angle(a.x, a.y), left_angle(b.x, b.y)});
            }
    }

    std::optional<State> farthest(double theta) const {
        std::optional<State> best;
        double best_r = -1.0;
        for (const Piece& p : pieces_) {
            if (std::min(p.ta_angle, p.tb_angle) > theta || std::max(p.ta_angle, p.tb_angle) < theta) continue;
            auto f = [&](double tau) {
                const State s = p.seg->at(tau);
                return left_angle(s.x, s.y) - theta;
            };
            const double fa = p.ta_angle - theta, fb = p.tb_angle - theta;
            const double tau = fa == 0.0 ? p.ta : fb == 0.0 ? p.tb : solve_bracketed(f, p.ta, p.tb, fa, fb, 1e-15, 1e-15);
            const State s = p.seg->at(tau);
            const double r = s.x * s.x + s.y * s.y;
            if (r > best_r) {
                best_r = r;
                best = s;
            }
        }
        return best;
    }

private:
    struct Piece {
        const DenseSegment* seg;
        double ta, tb, ta_angle, tb_angle;
    };
    const Trajectory& tr_;
    std::vector<Piece> pieces_;
};

double radial(const State& s) { return 0.5 * (s.x * s.x + s.y * s.y); }

}  // namespace

ShadowComparison shadow_compare(const SystemDefinition& sys_in, const SystemDefinition& shadow_in, double y_c,
                                double lambda, int grid_points) {
    if (!(y_c > 0.0)) throw std::invalid_argument("entry height y_c must be positive");
    if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
    const SystemDefinition sys = sys_in.with_lambda(lambda);
    const SystemDefinition shadow = shadow_in.with_lambda(lambda);

    const Excursion et = left_excursion(sys, y_c);
    const Excursion es = left_excursion(shadow, y_c);
    const RayIndex rays(es.traj);

    ShadowComparison c;
    c.y_c = y_c;
    c.lambda = lambda;
    c.reentry_true = et.reentry;
    c.reentry_shadow = es.reentry;
    c.rows.reserve(grid_points);
    c.max_violation = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        const double t = k == grid_points - 1 ? et.t_end : et.t_end * k / (grid_points - 1);
        const State a = k == 0 ? State{0.0, y_c} : et.traj.state_at(t);
        if (a.x > 0.0) continue;
        // Both re-entry points lie on the downward ray, which the shadow's dense
        // samples may miss by rounding.
        const bool both_reenter = k == grid_points - 1 && et.reentry && es.reentry;
        const std::optional<State> b = k == 0         ? State{0.0, y_c}
                                       : both_reenter ? State{0.0, *es.reentry}
                                                      : rays.farthest(left_angle(a.x, a.y));
        // A shadow that escapes encloses every ray it never reaches.
        if (!b) {
            if (es.escaped) continue;
            throw IntegrationError("shadow excursion does not reach the ray of the true trajectory at t = " +
                                   std::to_string(t));
        }
        const ShadowRow row{t, a.x, a.y, radial(a), b->x, b->y, radial(*b)};
        c.max_violation = std::max(c.max_violation, row.R_true - row.R_shadow);
        c.x_min_true = std::min(c.x_min_true, a.x);
        c.x_min_shadow = std::min(c.x_min_shadow, b->x);
        c.rows.push_back(row);
    }

    const double lo = std::min(c.x_min_true, c.x_min_shadow);
    if (lo < 0.0) {
        constexpr int kSamples = 1000;
        for (int k = 0; k < kSamples; ++k) {
            const double x = lo * (1.0 - static_cast<double>(k) / kSamples);
            if (!(shadow.piece_value(Side::Left, x) < sys.piece_value(Side::Left, x)))
                throw HypothesisError("shadow left piece is not below f_minus at x = " + std::to_string(x));
        }
    }
    return c;
}

Containment containment(const PeriodicOrbit& inner, const PeriodicOrbit& outer) {
    return {inner.x_min - outer.x_min, outer.r_max - inner.r_max};
}

}  // namespace pwsc
