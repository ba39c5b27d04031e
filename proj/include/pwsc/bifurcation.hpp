#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pwsc/error.hpp"
#include "pwsc/system.hpp"

namespace pwsc {

using Matrix2 = std::array<std::array<double, 2>, 2>;
using Eigenpair = std::array<std::complex<double>, 2>;

enum class LocalType { StableNode, UnstableNode, StableFocus, UnstableFocus, Saddle, Center, Degenerate };
const char* local_type_name(LocalType t);

/// Equilibrium on the critical manifold, y = F(x), with g(x, y; lambda) = 0.
struct Equilibrium {
    double x = 0.0;
    double y = 0.0;
    double lambda = 0.0;
    Side side = Side::Right;  // piece used for the linearization
    bool corner = false;      // |x| < 1e-10
    Matrix2 jacobian{};
    Eigenpair eigenvalues{};
    LocalType type = LocalType::Degenerate;

    double trace() const { return jacobian[0][0] + jacobian[1][1]; }
    double det() const { return jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0]; }
    bool stable() const { return type == LocalType::StableNode || type == LocalType::StableFocus; }
};

/// Thrown when the scan finds zero or several equilibria.
class EquilibriumCountError : public NotFoundError {
public:
    EquilibriumCountError(const std::string& what, int count) : NotFoundError(what), count_(count) {}
    int count() const noexcept { return count_; }

private:
    int count_;
};

/// [[F'(x), -1], [eps g_x, eps g_y]] at (x, y) using the piece on `side`.
Matrix2 jacobian_at(const SystemDefinition& sys, double x, double y, Side side);

/// Closed-form eigenvalues (tr +- sqrt((a - d)^2 + 4 b c)) / 2.
Eigenpair jacobian_eigen(const Matrix2& j);
LocalType classify_linear(const Matrix2& j);

/// Unique transverse root of x -> g(x, F(x); lambda, eps) in `window`.
/// Throws EquilibriumCountError (zero or several roots) or NotFoundError
/// (root not transverse).
Equilibrium find_equilibrium(const SystemDefinition& sys, double lambda, Window window);
inline Equilibrium find_equilibrium(const SystemDefinition& sys, double lambda) {
    return find_equilibrium(sys, lambda, sys.domain);
}

/// Discriminants of the corner bifurcation, evaluated at the origin.
struct CornerQuantities {
    double lambda0 = 0.0;
    double g_x = 0.0;  // g_x(0, 0; lambda0, eps)
    double g_y = 0.0;
    double alpha_minus = 0.0;  // f_-'(0) + eps g_y
    double alpha_plus = 0.0;
    double beta_minus = 0.0;  // (eps g_y - f_-'(0))^2 - 4 eps g_x
    double beta_plus = 0.0;
    std::optional<double> Lambda;  // only when beta_+ < 0 and beta_- < 0
    bool det_hypothesis_ok = false;  // g_x > max(-f_+'(0) g_y, -f_-'(0) g_y) at lambda = 0

    /// Corner eigenvalue limits (alpha +- sqrt(beta)) / 2 for one side.
    Eigenpair eigen_limits(Side s) const;
};

CornerQuantities corner_quantities(const SystemDefinition& sys, double lambda0 = 0.0);

enum class CaseTag { SmoothHopfLeft, SmoothHopfRight, NonsmoothHopf, HopfLike, SuperExplosion, FoldHopf };
enum class Criticality { Supercritical, Subcritical, Undetermined };

const char* case_code(CaseTag t);  // "i", "ii", "iii-a", "iii-b", "iii-c", "fold"
const char* criticality_name(Criticality c);

struct LyapunovResult {
    double l1 = 0.0;
    bool degenerate = true;
    Criticality criticality = Criticality::Undetermined;
};

struct BifurcationReport {
    CaseTag tag = CaseTag::SuperExplosion;
    Criticality criticality = Criticality::Undetermined;
    double lambda0 = 0.0;
    std::optional<CornerQuantities> corner;
    std::optional<LyapunovResult> lyapunov;
    bool marginal = false;
    bool hypothesis_ok = false;
    std::optional<bool> equilibrium_map_monotone;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

/// Lambda at which Tr J vanishes for an equilibrium on the given side, found
/// by a scan of `lambda_window` and a bracketed solve to |Tr| < 1e-10.
/// Throws NotFoundError (no sign change) or HypothesisError (Det <= 0).
double find_hopf_locus(const SystemDefinition& sys, Side branch, Window lambda_window,
                       std::optional<Window> x_window = std::nullopt);

/// First Lyapunov coefficient of the smooth system using `piece` for F at an
/// equilibrium with Tr J = 0 and Det J > 0. Negative means supercritical.
LyapunovResult lyapunov_first_coefficient(const SystemDefinition& sys, const Equilibrium& eq, Side piece);

/// Decision tree for the bifurcation at the corner. Throws HypothesisError
/// when g_x(0,0;0,eps) > max(-f_+'(0) g_y, -f_-'(0) g_y) fails.
BifurcationReport classify_corner(const SystemDefinition& sys);

/// Hopf bifurcation near the fold x_M of f_plus. Requires g_x > 0 at the fold.
BifurcationReport classify_fold(const SystemDefinition& sys);

}  // namespace pwsc
