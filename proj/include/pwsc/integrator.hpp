#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "pwsc/system.hpp"

namespace pwsc {

struct State {
    double x = 0.0;
    double y = 0.0;
};

struct IntegratorConfig {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_max = std::numeric_limits<double>::infinity();
    /// Upper bound on |t - t0|; integrate() stops at min(t_max, |t_end - t0|).
    double t_max = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2'000'000;
    /// When positive, steps have this size and error control is off.
    double fixed_step = 0.0;
    /// Stop with Termination::Escaped when |x| or |y| exceeds this.
    double escape_radius = std::numeric_limits<double>::infinity();
    /// Keep per-step interpolation coefficients (needed for state_at and
    /// time_in_tube).
    bool store_dense = true;
};

enum class TimeDirection { Forward, Backward };

enum class CrossingFilter { Rising, Falling, Both };
enum class EventAction { Record, Terminate };

/// Scalar event function of (t, x, y). A record is produced for every sign
/// change between consecutive step end points that passes the filter.
struct EventSpec {
    std::string id;
    std::function<double(double t, double x, double y)> fn;
    CrossingFilter filter = CrossingFilter::Both;
    EventAction action = EventAction::Record;
};

struct EventRecord {
    std::string id;
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    int direction = 0;  // +1 rising, -1 falling
};

/// Id of the always-armed splitting-line event.
inline constexpr const char* kSplittingEvent = "splitting_line";

enum class Termination { Completed, TerminalEvent, StepUnderflow, MaxSteps, NonFinite, Escaped };
const char* termination_name(Termination t);

struct Sample {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    Side region = Side::Right;
};

/// Continuous extension of one accepted step (4th-order Dormand-Prince
/// interpolant). `t0` and `h` are in integration time, which runs forward
/// even in backward mode.
struct DenseSegment {
    double tau0 = 0.0;
    double h = 0.0;
    Side region = Side::Right;
    std::array<std::array<double, 2>, 5> r{};

    State at(double tau) const;
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<DenseSegment> segments;
    std::vector<EventRecord> events;
    Termination termination = Termination::Completed;
    std::string message;
    TimeDirection direction = TimeDirection::Forward;
    double t0 = 0.0;

    bool ok() const { return termination == Termination::Completed || termination == Termination::TerminalEvent; }
    const Sample& back() const { return samples.back(); }
    /// Dense state at physical time t within the integrated span.
    State state_at(double t) const;
    /// Physical time of integration time tau.
    double physical_time(double tau) const { return direction == TimeDirection::Forward ? t0 + tau : t0 - tau; }
    /// Throws IntegrationError unless ok().
    void throw_if_failed() const;
};

/// Adaptive Dormand-Prince 5(4) integration of the piecewise system from
/// `s0` at `t0` to `t_end` (t_end >= t0 forward, t_end <= t0 backward).
///
/// Each step uses the smooth piece of the half-plane it starts in. A step
/// that ends across x = 0 is cut back to the crossing, a splitting_line event
/// is recorded, and integration restarts on the other piece.
Trajectory integrate(const SystemDefinition& sys, State s0, double t0, double t_end, const IntegratorConfig& config,
                     const std::vector<EventSpec>& events = {}, TimeDirection mode = TimeDirection::Forward);

/// Root of `fn` along a dense segment between integration times tau_a and
/// tau_b (which must bracket a sign change), located to |fn| < 1e-12 or a
/// time width below 1e-14.
double locate_event(const DenseSegment& seg, double tau_a, double tau_b,
                    const std::function<double(double tau, const State&)>& fn);

/// Slow time (fast time times eps) the trajectory spends with
/// |y - F(x)| < radius and band_lo <= x <= band_hi.
double time_in_tube(const Trajectory& traj, const SystemDefinition& sys, double radius, double band_lo,
                    double band_hi);

}  // namespace pwsc
