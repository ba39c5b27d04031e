#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pwsc/bifurcation.hpp"
#include "pwsc/integrator.hpp"
#include "pwsc/system.hpp"

namespace pwsc {

enum class CycleType { SmallCycle, CanardNoHead, CanardWithHead, Relaxation };
enum class Stability { Attracting, Repelling };

const char* cycle_type_name(CycleType t);
const char* stability_name(Stability s);

/// Tunable constants of classify_cycle. Fractions are relative to x_M.
struct CycleThresholds {
    double small_fraction = 0.1;
    double head_fraction = 0.05;
    /// Tube radius is radius_factor * sqrt(eps) * (1 + max |F''| on the band).
    double radius_factor = 0.1;
    double band_lo = 0.05;
    double band_hi = 0.95;
    double min_tube_time = 0.1;  // slow time
    /// Equilibria with x_eq below this fraction of x_M are treated as corner
    /// cycles, whose head is the excursion past the fold.
    double corner_fraction = 0.5;
};

struct OrbitOptions {
    IntegratorConfig integrator{1e-10, 1e-13};
    /// Give up on a return after this much slow time.
    double max_return_slow_time = 50.0;
    /// Points in the sign scan of y -> P(y) - y.
    int scan_points = 40;
    /// Smallest scanned offset above y_eq, relative to the scan height.
    double min_offset = 1e-8;
    CycleThresholds thresholds;
};

/// Raised when a trajectory started on the section does not come back.
class NoReturnError : public NotFoundError {
public:
    enum class Reason { Converged, Timeout, Escaped, Failed, NotTransversal };
    NoReturnError(const std::string& what, Reason r) : NotFoundError(what), reason_(r) {}
    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

struct ReturnResult {
    double y = 0.0;       // next crossing height
    double period = 0.0;  // elapsed fast time (positive in both directions)
    Trajectory trajectory;
};

/// First-return map on the upward ray {x = x_eq, y > y_eq} through the
/// unique equilibrium at a frozen lambda.
class ReturnMap {
public:
    ReturnMap(const SystemDefinition& sys, double lambda, OrbitOptions options = {},
              TimeDirection direction = TimeDirection::Forward);

    double operator()(double y) const { return run(y, false).y; }
    /// Throws NoReturnError when the orbit converges, escapes the domain, or
    /// runs out of time before crossing the section again.
    ReturnResult run(double y, bool keep_trajectory) const;

    const Equilibrium& equilibrium() const { return eq_; }
    const SystemDefinition& system() const { return sys_; }
    TimeDirection direction() const { return direction_; }
    const OrbitOptions& options() const { return options_; }
    /// Default scan height above y_eq.
    double scan_height() const { return height_; }

private:
    SystemDefinition sys_;
    Equilibrium eq_;
    OrbitOptions options_;
    TimeDirection direction_;
    double height_ = 1.0;
};

double return_map(const SystemDefinition& sys, double lambda, double y, TimeDirection direction = TimeDirection::Forward,
                  const OrbitOptions& options = {});

struct PeriodicOrbit {
    double lambda = 0.0;
    double section_x = 0.0;
    double section_y = 0.0;
    double period = 0.0;
    Trajectory curve;  // one revolution, integrated in the direction it attracts
    double x_min = 0.0;
    double x_max = 0.0;
    double amplitude = 0.0;  // x_max - x_min
    double r_max = 0.0;      // max of (x^2 + y^2) / 2 along the curve
    double residual = 0.0;   // |P(y*) - y*|
    double multiplier = 0.0;  // forward-time return-map derivative
    Stability stability = Stability::Attracting;
    CycleType type = CycleType::SmallCycle;
    double tube_time = 0.0;  // slow time near M^m used by the classification
};

/// Every fixed point of the return map found by a sign scan of P(y) - y over
/// `bracket` (absolute heights on the section; default: the full scan height).
std::vector<PeriodicOrbit> find_limit_cycles(const ReturnMap& map, std::optional<std::pair<double, double>> bracket = {});

/// Outermost cycle that attracts in the map's direction, or none.
std::optional<PeriodicOrbit> find_limit_cycle(const ReturnMap& map,
                                              std::optional<std::pair<double, double>> bracket = {});
std::optional<PeriodicOrbit> find_limit_cycle(const SystemDefinition& sys, double lambda,
                                              TimeDirection direction = TimeDirection::Forward,
                                              std::optional<std::pair<double, double>> bracket = {},
                                              const OrbitOptions& options = {});

/// Builds the orbit through (x_eq, y_star) and fills every derived field.
PeriodicOrbit make_orbit(const ReturnMap& map, double y_star);

CycleType classify_cycle(const PeriodicOrbit& orbit, const SystemDefinition& sys, const CycleThresholds& t = {},
                         double* tube_time = nullptr);

struct SweepPoint {
    double lambda = 0.0;
    bool found = false;
    double amplitude = 0.0;
    double period = 0.0;
    CycleType type = CycleType::SmallCycle;
    double multiplier = 0.0;
    double section_y = 0.0;
    double x_min = 0.0;
    double x_max = 0.0;
    double r_max = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;  // strictly increasing lambda
    double plateau = 0.0;
    std::optional<double> lambda_10;
    std::optional<double> lambda_90;
    std::optional<double> onset;  // smallest lambda with a cycle, to 1e-6
    std::optional<double> first_amplitude;  // amplitude just past onset
    bool super_explosion = false;

    std::optional<double> window_width() const {
        if (lambda_10 && lambda_90) return *lambda_90 - *lambda_10;
        return std::nullopt;
    }
    nlohmann::json summary() const;
};

struct SweepOptions {
    OrbitOptions orbit;
    /// Worker threads for the coarse grid; 0 reads PWSC_THREADS, else 1.
    unsigned threads = 0;
    /// Absolute lambda resolution of the refinement bisections.
    double refine_tol = 1e-13;
    double onset_tol = 1e-6;
};

/// Attracting-cycle search at n_steps + 1 evenly spaced lambda values. With
/// `refine`, extra points resolve the 10% and 90% plateau crossings and the
/// levels between them.
SweepResult sweep_amplitude(const SystemDefinition& sys, double lambda_lo, double lambda_hi, int n_steps, bool refine,
                            const SweepOptions& options = {});

struct Bistability {
    bool stable_eq = false;
    bool attracting_cycle = false;
    bool repelling_cycle = false;
    Equilibrium equilibrium;
    std::optional<PeriodicOrbit> attracting;
    std::optional<PeriodicOrbit> repelling;

    nlohmann::json to_json() const;
};

Bistability detect_bistability(const SystemDefinition& sys, double lambda, const OrbitOptions& options = {});

struct ShadowRow {
    double t = 0.0;
    double x_true = 0.0, y_true = 0.0, R_true = 0.0;
    double x_shadow = 0.0, y_shadow = 0.0, R_shadow = 0.0;
};

struct ShadowComparison {
    double y_c = 0.0;
    double lambda = 0.0;
    std::vector<ShadowRow> rows;
    double max_violation = 0.0;  // max over rows of R_true - R_shadow
    std::optional<double> reentry_true;
    std::optional<double> reentry_shadow;
    double x_min_true = 0.0;
    double x_min_shadow = 0.0;

    nlohmann::json summary() const;
};

/// Integrates the true system and `shadow` from (0, y_c) while both stay in
/// x <= 0 and compares R = (x^2 + y^2) / 2 on a shared time grid. Throws
/// std::invalid_argument for y_c <= 0 and HypothesisError when the shadow's
/// left piece is not below f_minus on the visited x range.
ShadowComparison shadow_compare(const SystemDefinition& sys, const SystemDefinition& shadow, double y_c,
                                double lambda, int grid_points = 2001);
inline ShadowComparison shadow_compare(const SystemDefinition& sys, double y_c, double lambda) {
    return shadow_compare(sys, make_shadow(sys), y_c, lambda);
}

/// Margins of inner-inside-outer containment: both are >= -tol when it holds.
struct Containment {
    double x_min_margin = 0.0;  // x_min(inner) - x_min(outer)
    double r_max_margin = 0.0;  // r_max(outer) - r_max(inner)
    bool holds(double tol) const { return x_min_margin >= -tol && r_max_margin >= -tol; }
};
Containment containment(const PeriodicOrbit& inner, const PeriodicOrbit& outer);

}  // namespace pwsc
