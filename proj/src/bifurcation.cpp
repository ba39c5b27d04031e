#include "pwsc/bifurcation.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pwsc/roots.hpp"

namespace pwsc {

namespace {

constexpr double kCornerTol = 1e-10;
constexpr double kMarginalTol = 1e-9;

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

// x -> g(x, F(x); lambda, eps), with one-sided derivative from the jets.
struct NullclineResidual {
    const SystemDefinition& sys;

    double operator()(double x) const { return sys.g_value(x, sys.F(x)); }

    double slope(double x, Side side) const {
        const double y = sys.piece_value(side, x);
        const Jet3 gj = sys.g_jet(x, y);
        return gj.dx() + gj.dy() * sys.dF(side, x);
    }
};

}  // namespace

const char* local_type_name(LocalType t) {
    switch (t) {
        case LocalType::StableNode: return "stable_node";
        case LocalType::UnstableNode: return "unstable_node";
        case LocalType::StableFocus: return "stable_focus";
        case LocalType::UnstableFocus: return "unstable_focus";
        case LocalType::Saddle: return "saddle";
        case LocalType::Center: return "center";
        case LocalType::Degenerate: return "degenerate";
    }
    return "?";
}

Matrix2 jacobian_at(const SystemDefinition& sys, double x, double y, Side side) {
    const Jet3 gj = sys.g_jet(x, y);
    return {{{sys.dF(side, x), -1.0}, {sys.eps * gj.dx(), sys.eps * gj.dy()}}};
}

Eigenpair jacobian_eigen(const Matrix2& j) {
    const double tr = j[0][0] + j[1][1];
    const double disc = (j[0][0] - j[1][1]) * (j[0][0] - j[1][1]) + 4.0 * (j[0][1] * j[1][0]);
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        return {std::complex<double>((tr + s) / 2.0, 0.0), std::complex<double>((tr - s) / 2.0, 0.0)};
    }
    const double s = std::sqrt(-disc);
    return {std::complex<double>(tr / 2.0, s / 2.0), std::complex<double>(tr / 2.0, -s / 2.0)};
}

LocalType classify_linear(const Matrix2& j) {
    const double tr = j[0][0] + j[1][1];
    const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    const double disc = (j[0][0] - j[1][1]) * (j[0][0] - j[1][1]) + 4.0 * (j[0][1] * j[1][0]);
    if (det < 0.0) return LocalType::Saddle;
    if (det == 0.0) return LocalType::Degenerate;
    if (disc < 0.0) {
        if (tr < 0.0) return LocalType::StableFocus;
        if (tr > 0.0) return LocalType::UnstableFocus;
        return LocalType::Center;
    }
    if (tr < 0.0) return LocalType::StableNode;
    if (tr > 0.0) return LocalType::UnstableNode;
    return LocalType::Degenerate;
}

Equilibrium find_equilibrium(const SystemDefinition& sys, double lambda, Window window) {
    const SystemDefinition s = sys.with_lambda(lambda);
    const NullclineResidual h{s};
    constexpr int kCells = 1000;

    std::vector<std::pair<double, double>> brackets;
    double x_prev = window.lo, h_prev = h(window.lo);
    if (h_prev == 0.0) brackets.push_back({x_prev, x_prev});
    for (int k = 1; k <= kCells; ++k) {
        const double x = window.lo + (window.hi - window.lo) * k / kCells;
        const double hx = h(x);
        if (hx == 0.0) {
            brackets.push_back({x, x});
        } else if (h_prev != 0.0 && (hx > 0.0) != (h_prev > 0.0)) {
            brackets.push_back({x_prev, x});
        }
        x_prev = x;
        h_prev = hx;
    }
    if (brackets.size() != 1) {
        throw EquilibriumCountError("expected a unique equilibrium in [" + fmt(window.lo) + ", " + fmt(window.hi) +
                                        "] at lambda = " + fmt(lambda) + ", found " +
                                        std::to_string(brackets.size()),
                                    static_cast<int>(brackets.size()));
    }
    const auto [a, b] = brackets.front();
    const double x = a == b ? a : solve_bracketed(h, a, b, 4e-16, 0.0);

    Equilibrium eq;
    eq.x = x;
    eq.y = s.F(x);
    eq.lambda = lambda;
    eq.corner = std::abs(x) < kCornerTol;
    eq.side = side_of(x);
    const double residual = s.g_value(eq.x, eq.y);
    if (!(std::abs(residual) < 1e-10))
        throw NotFoundError("equilibrium residual " + fmt(residual) + " exceeds 1e-10");
    const double slope = h.slope(x, eq.side);
    if (!(std::abs(slope) > 1e-8))
        throw NotFoundError("equilibrium at x = " + fmt(x) + " is not a transverse intersection");
    eq.jacobian = jacobian_at(s, eq.x, eq.y, eq.side);
    eq.eigenvalues = jacobian_eigen(eq.jacobian);
    eq.type = classify_linear(eq.jacobian);
    return eq;
}

// ---------------------------------------------------------------------------

Eigenpair CornerQuantities::eigen_limits(Side s) const {
    const double alpha = s == Side::Left ? alpha_minus : alpha_plus;
    const double beta = s == Side::Left ? beta_minus : beta_plus;
    if (beta >= 0.0) {
        const double r = std::sqrt(beta);
        return {std::complex<double>((alpha + r) / 2.0, 0.0), std::complex<double>((alpha - r) / 2.0, 0.0)};
    }
    const double r = std::sqrt(-beta);
    return {std::complex<double>(alpha / 2.0, r / 2.0), std::complex<double>(alpha / 2.0, -r / 2.0)};
}

CornerQuantities corner_quantities(const SystemDefinition& sys, double lambda0) {
    CornerQuantities q;
    q.lambda0 = lambda0;
    const SystemDefinition s = sys.with_lambda(lambda0);
    const Jet3 gj = s.g_jet(0.0, 0.0);
    q.g_x = gj.dx();
    q.g_y = gj.dy();
    const double fm = s.dF(Side::Left, 0.0);
    const double fp = s.dF(Side::Right, 0.0);
    const double egx = s.eps * q.g_x;
    const double egy = s.eps * q.g_y;
    // Same operation order as jacobian_eigen so the corner limits agree bitwise.
    q.alpha_minus = fm + egy;
    q.alpha_plus = fp + egy;
    q.beta_minus = (fm - egy) * (fm - egy) + 4.0 * (-1.0 * egx);
    q.beta_plus = (fp - egy) * (fp - egy) + 4.0 * (-1.0 * egx);
    if (q.beta_plus < 0.0 && q.beta_minus < 0.0)
        q.Lambda = q.alpha_plus / std::sqrt(-q.beta_plus) - (-q.alpha_minus) / std::sqrt(-q.beta_minus);

    const Jet3 g0 = sys.with_lambda(0.0).g_jet(0.0, 0.0);
    q.det_hypothesis_ok = g0.dx() > std::max(-fp * g0.dy(), -fm * g0.dy());
    return q;
}

const char* case_code(CaseTag t) {
    switch (t) {
        case CaseTag::SmoothHopfLeft: return "i";
        case CaseTag::SmoothHopfRight: return "ii";
        case CaseTag::NonsmoothHopf: return "iii-a";
        case CaseTag::HopfLike: return "iii-b";
        case CaseTag::SuperExplosion: return "iii-c";
        case CaseTag::FoldHopf: return "fold";
    }
    return "?";
}

const char* criticality_name(Criticality c) {
    switch (c) {
        case Criticality::Supercritical: return "supercritical";
        case Criticality::Subcritical: return "subcritical";
        case Criticality::Undetermined: return "undetermined";
    }
    return "?";
}

nlohmann::json BifurcationReport::to_json() const {
    using nlohmann::json;
    json j;
    j["case"] = case_code(tag);
    j["criticality"] = criticality_name(criticality);
    j["lambda0"] = lambda0;
    if (corner) {
        j["alpha"] = {{"+", corner->alpha_plus}, {"-", corner->alpha_minus}};
        j["beta"] = {{"+", corner->beta_plus}, {"-", corner->beta_minus}};
        j["Lambda"] = corner->Lambda ? json(*corner->Lambda) : json(nullptr);
    } else {
        j["alpha"] = nullptr;
        j["beta"] = nullptr;
        j["Lambda"] = nullptr;
    }
    j["l1"] = (lyapunov && !lyapunov->degenerate) ? json(lyapunov->l1) : json(nullptr);
    j["marginal"] = marginal;
    j["hypothesis_ok"] = hypothesis_ok;
    j["equilibrium_map_monotone"] = equilibrium_map_monotone ? json(*equilibrium_map_monotone) : json(nullptr);
    j["notes"] = notes;
    return j;
}

// ---------------------------------------------------------------------------

double find_hopf_locus(const SystemDefinition& sys, Side branch, Window lambda_window, std::optional<Window> x_window) {
    const Window xw = x_window.value_or(sys.domain);
    constexpr int kScan = 400;
    auto trace = [&](double lambda) -> std::optional<double> {
        try {
            const Equilibrium eq = find_equilibrium(sys, lambda, xw);
            // At the corner the branch's one-sided limit keeps the trace
            // continuous up to the end of the branch.
            if (eq.corner) {
                const Matrix2 j = jacobian_at(sys.with_lambda(lambda), eq.x, eq.y, branch);
                return j[0][0] + j[1][1];
            }
            if (side_of(eq.x) != branch) return std::nullopt;
            return eq.trace();
        } catch (const NotFoundError&) {
            return std::nullopt;
        }
    };

    std::optional<double> prev;
    double l_prev = lambda_window.lo;
    prev = trace(l_prev);
    for (int k = 1; k <= kScan; ++k) {
        const double l = lambda_window.lo + (lambda_window.hi - lambda_window.lo) * k / kScan;
        const std::optional<double> cur = trace(l);
        if (prev && cur && ((*prev > 0.0) != (*cur > 0.0) || *cur == 0.0)) {
            double a = l_prev, b = l, fa = *prev, fb = *cur;
            // Shrink the bracket with plain bisection where the trace is undefined.
            auto tr = [&](double lam) {
                const auto v = trace(lam);
                if (!v) throw NotFoundError("equilibrium left the branch inside the Hopf bracket");
                return *v;
            };
            const double root = solve_bracketed(tr, a, b, fa, fb, 1e-15, 1e-12);
            const Equilibrium eq = find_equilibrium(sys, root, xw);
            if (!(std::abs(eq.trace()) < 1e-10)) {
                // Polish with secant steps; the bracketed solve stops on width.
                double l0 = a, l1 = root;
                double t0 = tr(l0), t1 = eq.trace();
                for (int it = 0; it < 20 && std::abs(t1) >= 1e-10 && t1 != t0; ++it) {
                    const double l2 = l1 - t1 * (l1 - l0) / (t1 - t0);
                    l0 = l1;
                    t0 = t1;
                    l1 = l2;
                    t1 = tr(l1);
                }
                if (!(std::abs(t1) < 1e-10)) throw NotFoundError("Hopf locus did not converge");
                const Equilibrium eq2 = find_equilibrium(sys, l1, xw);
                if (!(eq2.det() > 0.0)) throw HypothesisError("Det J <= 0 at the trace root: not a Hopf point");
                return l1;
            }
            if (!(eq.det() > 0.0)) throw HypothesisError("Det J <= 0 at the trace root: not a Hopf point");
            return root;
        }
        prev = cur;
        l_prev = l;
    }
    throw NotFoundError("trace of the Jacobian does not change sign on the " +
                        std::string(branch == Side::Left ? "left" : "right") + " branch for lambda in [" +
                        fmt(lambda_window.lo) + ", " + fmt(lambda_window.hi) + "]");
}

LyapunovResult lyapunov_first_coefficient(const SystemDefinition& sys, const Equilibrium& eq, Side piece) {
    const SystemDefinition s = sys.with_lambda(eq.lambda);
    // Components of the vector field as jets about the equilibrium.
    const Jet3 v1 = s.piece(piece).evaluate_jet({eq.x, 0.0, s.lambda, s.eps}) - Jet3::variable(eq.y, 1);
    const Jet3 v2 = s.eps * s.g_jet(eq.x, eq.y);
    const Jet3* v[2] = {&v1, &v2};

    double J[2][2], H[2][2][2], D[2][2][2][2];
    for (int k = 0; k < 2; ++k) {
        J[k][0] = v[k]->partial(1, 0);
        J[k][1] = v[k]->partial(0, 1);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                H[k][a][b] = v[k]->partial((a == 0) + (b == 0), (a == 1) + (b == 1));
                for (int c = 0; c < 2; ++c)
                    D[k][a][b][c] =
                        v[k]->partial((a == 0) + (b == 0) + (c == 0), (a == 1) + (b == 1) + (c == 1));
            }
    }
    const double tr = J[0][0] + J[1][1];
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    const double scale = std::abs(J[0][0]) + std::abs(J[0][1]) + std::abs(J[1][0]) + std::abs(J[1][1]);
    if (!(det > 0.0)) throw HypothesisError("Det J <= 0: no Hopf bifurcation at this equilibrium");
    if (!(std::abs(tr) <= 1e-8 * std::max(1.0, scale)))
        throw HypothesisError("Tr J = " + fmt(tr) + " is not zero at this equilibrium");
    const double omega = std::sqrt(det);

    // Columns of T: imaginary and real parts of an eigenvector for i*omega,
    // so that w = T^-1 (x - x_eq) obeys u' = -omega v, v' = omega u.
    double T[2][2];
    if (J[0][1] != 0.0) {
        T[0][0] = 0.0;
        T[1][0] = omega;
        T[0][1] = J[0][1];
        T[1][1] = -J[0][0];
    } else {
        T[0][0] = omega;
        T[1][0] = 0.0;
        T[0][1] = -J[1][1];
        T[1][1] = J[1][0];
    }
    const double tdet = T[0][0] * T[1][1] - T[0][1] * T[1][0];
    const double Ti[2][2] = {{T[1][1] / tdet, -T[0][1] / tdet}, {-T[1][0] / tdet, T[0][0] / tdet}};

    double h2[2][2][2] = {}, h3[2][2][2][2] = {};
    for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 2; ++m)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b) h2[k][i][j] += Ti[k][m] * H[m][a][b] * T[a][i] * T[b][j];
                    for (int l = 0; l < 2; ++l)
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b)
                                for (int c = 0; c < 2; ++c)
                                    h3[k][i][j][l] += Ti[k][m] * D[m][a][b][c] * T[a][i] * T[b][j] * T[c][l];
                }

    // Planar normal-form coefficient for u' = -omega v + f, v' = omega u + g.
    const double fuuu = h3[0][0][0][0], fuvv = h3[0][0][1][1], guuv = h3[1][0][0][1], gvvv = h3[1][1][1][1];
    const double fuu = h2[0][0][0], fuv = h2[0][0][1], fvv = h2[0][1][1];
    const double guu = h2[1][0][0], guv = h2[1][0][1], gvv = h2[1][1][1];
    const double a = (fuuu + fuvv + guuv + gvvv) / 16.0 +
                     (fuv * (fuu + fvv) - guv * (guu + gvv) - fuu * guu + fvv * gvv) / (16.0 * omega);

    LyapunovResult r;
    r.l1 = a;
    r.degenerate = std::abs(a) < 1e-10;
    r.criticality = r.degenerate ? Criticality::Undetermined
                                 : (a < 0.0 ? Criticality::Supercritical : Criticality::Subcritical);
    return r;
}

namespace {

std::optional<bool> map_monotone(const SystemDefinition& sys, double lambda0, Window xw) {
    constexpr double kStep = 1e-4;
    try {
        const double xa = find_equilibrium(sys, lambda0 - kStep, xw).x;
        const double xb = find_equilibrium(sys, lambda0, xw).x;
        const double xc = find_equilibrium(sys, lambda0 + kStep, xw).x;
        return (xa < xb && xb < xc) || (xa > xb && xb > xc);
    } catch (const NotFoundError&) {
        return std::nullopt;
    }
}

}  // namespace

BifurcationReport classify_corner(const SystemDefinition& sys) {
    BifurcationReport r;
    CornerQuantities q = corner_quantities(sys, 0.0);
    r.hypothesis_ok = q.det_hypothesis_ok;
    if (!q.det_hypothesis_ok) {
        throw HypothesisError("classification refused: g_x(0,0;0,eps) = " + fmt(q.g_x) +
                              " must exceed max(-f_+'(0) g_y, -f_-'(0) g_y)");
    }
    auto near_zero = [](double v) { return std::abs(v) < kMarginalTol; };

    if (q.alpha_minus > 0.0 || q.alpha_plus < 0.0) {
        const bool left = q.alpha_minus > 0.0;
        r.tag = left ? CaseTag::SmoothHopfLeft : CaseTag::SmoothHopfRight;
        const Side side = left ? Side::Left : Side::Right;
        // Widen the lambda window by decades until the trace changes sign.
        for (double reach = 1.0;; reach *= 10.0) {
            try {
                r.lambda0 = find_hopf_locus(sys, side, left ? Window{-reach, 0.0} : Window{0.0, reach});
                break;
            } catch (const NotFoundError&) {
                if (reach >= 1e3) throw;
            }
        }
        q = corner_quantities(sys, r.lambda0);
        const Equilibrium eq = find_equilibrium(sys, r.lambda0);
        r.lyapunov = lyapunov_first_coefficient(sys, eq, side);
        r.criticality = r.lyapunov->criticality;
        r.marginal = near_zero(left ? q.alpha_minus : q.alpha_plus) || r.lyapunov->degenerate;
        if (left ? !(r.lambda0 < 0.0) : !(r.lambda0 > 0.0))
            r.notes.push_back("Hopf locus has the wrong sign for this case");
    } else {
        r.lambda0 = 0.0;
        r.marginal = near_zero(q.alpha_minus) || near_zero(q.alpha_plus) || near_zero(q.beta_plus);
        if (q.beta_plus < 0.0 && q.beta_minus < 0.0) {
            r.tag = CaseTag::NonsmoothHopf;
            const double L = *q.Lambda;
            r.criticality = L < 0.0 ? Criticality::Supercritical
                                    : (L > 0.0 ? Criticality::Subcritical : Criticality::Undetermined);
            r.marginal = r.marginal || near_zero(q.beta_minus) || near_zero(L);
        } else if (q.beta_plus < 0.0) {
            r.tag = CaseTag::HopfLike;
            r.criticality = Criticality::Supercritical;
            r.marginal = r.marginal || near_zero(q.beta_minus);
        } else {
            r.tag = CaseTag::SuperExplosion;
            r.criticality = q.beta_minus < 0.0 ? Criticality::Subcritical : Criticality::Supercritical;
            r.marginal = r.marginal || near_zero(q.beta_minus);
        }
    }
    r.corner = q;
    r.equilibrium_map_monotone = map_monotone(sys, r.lambda0, sys.domain);
    if (r.marginal) r.notes.push_back("a decisive quantity is within 1e-9 of zero");
    return r;
}

BifurcationReport classify_fold(const SystemDefinition& sys) {
    BifurcationReport r;
    r.tag = CaseTag::FoldHopf;
    const double xm = find_x_max(sys, sys.domain.hi);
    const SystemDefinition at_fold = sys.with_lambda(xm);
    const double gx = at_fold.g_jet(xm, at_fold.F(xm)).dx();
    r.hypothesis_ok = gx > 0.0;
    if (!r.hypothesis_ok) throw HypothesisError("fold Hopf requires g_x(x_M, F(x_M); x_M, eps) > 0, got " + fmt(gx));

    const Window xw{0.5 * xm, std::min(sys.domain.hi, 2.0 * xm)};
    const double reach = 2.0 * (1.0 + xm);
    r.lambda0 = find_hopf_locus(sys, Side::Right, {xm - reach, xm + reach}, xw);
    const Equilibrium eq = find_equilibrium(sys, r.lambda0, xw);
    r.lyapunov = lyapunov_first_coefficient(sys, eq, Side::Right);
    r.criticality = r.lyapunov->criticality;
    r.marginal = r.lyapunov->degenerate;
    r.equilibrium_map_monotone = map_monotone(sys, r.lambda0, xw);
    if (r.marginal) r.notes.push_back("first Lyapunov coefficient is degenerate (|l1| < 1e-10)");
    return r;
}

}  // namespace pwsc
