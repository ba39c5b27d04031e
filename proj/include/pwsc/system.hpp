#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "pwsc/expr.hpp"

namespace pwsc {

/// Half-plane relative to the splitting line x = 0.
enum class Side { Left, Right };

inline Side side_of(double x) { return x < 0.0 ? Side::Left : Side::Right; }
inline char side_letter(Side s) { return s == Side::Left ? 'L' : 'R'; }

struct Window {
    double lo = -10.0;
    double hi = 10.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Planar piecewise-smooth continuous Lienard system
///
///   x' = -y + F(x),     F = f_minus for x <= 0, f_plus for x >= 0
///   y' = eps * g(x, y; lambda, eps)
///
/// Immutable once built; `with_lambda` produces a copy at another parameter.
struct SystemDefinition {
    Expression f_minus;
    Expression f_plus;
    Expression g;
    double eps = 0.1;
    double lambda = 0.0;
    Window domain;

    const Expression& piece(Side s) const { return s == Side::Left ? f_minus : f_plus; }

    /// F(x) choosing the piece by the sign of x.
    double F(double x) const;
    /// Value of the given piece at x (the piece is treated as a smooth
    /// function on the whole line).
    double piece_value(Side s, double x) const;
    /// Jet of a piece in x (y-partials are zero).
    Jet3 piece_jet(Side s, double x) const;
    /// One-sided derivative F'(x) using the piece on side `s`.
    double dF(Side s, double x) const { return piece_jet(s, x).dx(); }

    double g_value(double x, double y) const;
    Jet3 g_jet(double x, double y) const;

    Bindings bindings(double x, double y) const { return {x, y, lambda, eps}; }

    SystemDefinition with_lambda(double l) const {
        SystemDefinition s = *this;
        s.lambda = l;
        return s;
    }

    /// True when both pieces are the same expression (a shadow system).
    bool is_smooth() const { return f_minus == f_plus; }
};

/// Parses INI-style text with [functions], [parameters] and optional [domain].
SystemDefinition parse_system(std::string_view text);
SystemDefinition load_system(const std::string& path);
std::string to_ini(const SystemDefinition& sys);

/// F(x), selecting f_minus for x < 0 and f_plus for x >= 0.
inline double F(const SystemDefinition& sys, double x) { return sys.F(x); }

/// Smooth comparison system whose F is f_plus on the whole line. When
/// `left_piece` is given the result keeps a corner and uses that expression
/// for x < 0 instead.
SystemDefinition make_shadow(const SystemDefinition& sys, std::optional<Expression> left_piece = std::nullopt);

/// Interior maximum of f_plus: the first root of f_plus' in (0, hi] where the
/// derivative changes sign from + to -. Throws NotFoundError.
double find_x_max(const SystemDefinition& sys, double hi = 10.0);

enum class Branch { Left, Middle, Right };
const char* branch_name(Branch b);

struct CriticalManifold {
    double x_max = 0.0;
    double F_max = 0.0;
    Branch branch_of(double x) const {
        if (x < 0.0) return Branch::Left;
        return x < x_max ? Branch::Middle : Branch::Right;
    }
};

CriticalManifold critical_manifold(const SystemDefinition& sys);

struct HypothesisCheck {
    std::string name;
    bool passed = false;
    bool mandatory = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;
    double f_minus_slope = 0.0;  // f_minus'(0)
    double f_plus_slope = 0.0;   // f_plus'(0)
    std::optional<double> x_max;
    std::optional<double> F_at_x_max;
    bool shadow_ordering = false;  // f_plus < f_minus on sampled x < 0

    bool passed() const;
    const HypothesisCheck* first_failure() const;
    nlohmann::json to_json() const;
};

/// Checks the standing hypotheses on f_minus, f_plus over `window`
/// (window.lo < 0 < window.hi). Never throws for a failed hypothesis.
ValidationReport validate(const SystemDefinition& sys, Window window);
inline ValidationReport validate(const SystemDefinition& sys) { return validate(sys, sys.domain); }

/// Samples f_plus < f_minus on `n` points of [lo, 0).
bool shadow_ordering_holds(const SystemDefinition& sys, double lo, int n = 1000);

}  // namespace pwsc
