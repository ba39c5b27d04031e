#include "pwsc/system.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pwsc/error.hpp"
#include "pwsc/roots.hpp"

namespace pwsc {

double SystemDefinition::F(double x) const { return piece_value(side_of(x), x); }

double SystemDefinition::piece_value(Side s, double x) const { return piece(s).evaluate(bindings(x, 0.0)); }

Jet3 SystemDefinition::piece_jet(Side s, double x) const { return piece(s).evaluate_jet(bindings(x, 0.0)); }

double SystemDefinition::g_value(double x, double y) const { return g.evaluate(bindings(x, y)); }

Jet3 SystemDefinition::g_jet(double x, double y) const { return g.evaluate_jet(bindings(x, y)); }

// ---------------------------------------------------------------------------
// INI input

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view v, std::size_t offset) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw ParseError("expected a finite real number, got '" + std::string(v) + "'", offset);
    return out;
}

}  // namespace

SystemDefinition parse_system(std::string_view text) {
    std::map<std::string, std::pair<std::string, std::size_t>> values;  // "section.key" -> (value, offset)
    std::string section;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        std::string_view line = text.substr(line_start, line_end - line_start);
        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
            // Comments are only recognised outside quoted values.
            const auto quote = line.find('"');
            if (quote == std::string_view::npos || hash < quote) line = line.substr(0, hash);
        }
        line = trim(line);
        if (!line.empty()) {
            if (line.front() == '[') {
                if (line.back() != ']') throw ParseError("unterminated section header", line_start);
                section = std::string(trim(line.substr(1, line.size() - 2)));
            } else {
                const auto eq = line.find('=');
                if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_start);
                const std::string key(trim(line.substr(0, eq)));
                std::string_view value = trim(line.substr(eq + 1));
                if (!value.empty() && value.front() == '"') {
                    if (value.size() < 2 || value.back() != '"')
                        throw ParseError("unterminated quoted value", line_start);
                    value = value.substr(1, value.size() - 2);
                }
                if (section.empty()) throw ParseError("key outside of a section", line_start);
                values[section + "." + key] = {std::string(value), line_start};
            }
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }

    auto take = [&](const std::string& k) -> const std::pair<std::string, std::size_t>& {
        auto it = values.find(k);
        if (it == values.end()) throw ParseError("missing required key " + k, text.size());
        return it->second;
    };
    auto expr = [&](const std::string& k) {
        const auto& [v, off] = take(k);
        try {
            return Expression::parse(v);
        } catch (const ParseError& e) {
            throw ParseError(k + ": " + e.what(), off);
        }
    };

    SystemDefinition sys;
    sys.f_minus = expr("functions.f_minus");
    sys.f_plus = expr("functions.f_plus");
    sys.g = expr("functions.g");
    {
        const auto& [v, off] = take("parameters.eps");
        sys.eps = parse_real(v, off);
        if (!(sys.eps > 0.0)) throw ParseError("eps must be positive", off);
    }
    if (auto it = values.find("parameters.lambda"); it != values.end())
        sys.lambda = parse_real(it->second.first, it->second.second);
    if (auto it = values.find("domain.x_min"); it != values.end())
        sys.domain.lo = parse_real(it->second.first, it->second.second);
    if (auto it = values.find("domain.x_max"); it != values.end())
        sys.domain.hi = parse_real(it->second.first, it->second.second);
    if (!(sys.domain.lo < 0.0 && 0.0 < sys.domain.hi))
        throw ParseError("domain must satisfy x_min < 0 < x_max", text.size());
    return sys;
}

SystemDefinition load_system(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

std::string to_ini(const SystemDefinition& sys) {
    auto real = [](double v) {
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        (void)ec;
        return std::string(buf, p);
    };
    std::ostringstream o;
    o << "[functions]\n"
      << "f_minus = \"" << sys.f_minus.to_string() << "\"\n"
      << "f_plus = \"" << sys.f_plus.to_string() << "\"\n"
      << "g = \"" << sys.g.to_string() << "\"\n\n"
      << "[parameters]\n"
      << "eps = " << real(sys.eps) << "\n"
      << "lambda = " << real(sys.lambda) << "\n\n"
      << "[domain]\n"
      << "x_min = " << real(sys.domain.lo) << "\n"
      << "x_max = " << real(sys.domain.hi) << "\n";
    return o.str();
}

// ---------------------------------------------------------------------------

SystemDefinition make_shadow(const SystemDefinition& sys, std::optional<Expression> left_piece) {
    SystemDefinition s = sys;
    s.f_minus = left_piece ? std::move(*left_piece) : sys.f_plus;
    return s;
}

double find_x_max(const SystemDefinition& sys, double hi) {
    if (!(hi > 0.0)) throw NotFoundError("x_max search window is empty");
    constexpr int kCells = 1000;
    auto slope = [&](double x) { return sys.piece_jet(Side::Right, x).dx(); };
    double x_prev = hi / kCells;
    double s_prev = slope(x_prev);
    for (int k = 2; k <= kCells; ++k) {
        const double x = hi * k / kCells;
        const double s = slope(x);
        if (s_prev > 0.0 && s <= 0.0) {
            const double root = solve_bracketed(slope, x_prev, x, s_prev, s, 1e-15, 1e-14);
            if (sys.piece_jet(Side::Right, root).dxx() >= 0.0) break;
            return root;
        }
        x_prev = x;
        s_prev = s;
    }
    throw NotFoundError("f_plus has no interior maximum in (0, " + std::to_string(hi) + "]");
}

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::Left: return "M^l";
        case Branch::Middle: return "M^m";
        case Branch::Right: return "M^r";
    }
    return "?";
}

CriticalManifold critical_manifold(const SystemDefinition& sys) {
    CriticalManifold m;
    m.x_max = find_x_max(sys, sys.domain.hi);
    m.F_max = sys.F(m.x_max);
    return m;
}

bool shadow_ordering_holds(const SystemDefinition& sys, double lo, int n) {
    for (int k = 0; k < n; ++k) {
        const double x = lo * (1.0 - static_cast<double>(k) / n);
        if (!(sys.piece_value(Side::Right, x) < sys.piece_value(Side::Left, x))) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::passed() const { return first_failure() == nullptr; }

const HypothesisCheck* ValidationReport::first_failure() const {
    for (const auto& c : checks)
        if (c.mandatory && !c.passed) return &c;
    return nullptr;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json j;
    j["pass"] = passed();
    j["f_minus_slope_at_0"] = f_minus_slope;
    j["f_plus_slope_at_0"] = f_plus_slope;
    j["x_max"] = x_max ? nlohmann::json(*x_max) : nlohmann::json(nullptr);
    j["F_at_x_max"] = F_at_x_max ? nlohmann::json(*F_at_x_max) : nlohmann::json(nullptr);
    j["shadow_ordering"] = shadow_ordering;
    auto& arr = j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name}, {"pass", c.passed}, {"mandatory", c.mandatory}, {"detail", c.detail}});
    return j;
}

ValidationReport validate(const SystemDefinition& sys, Window window) {
    constexpr double kZeroTol = 1e-12;
    constexpr int kSamples = 1000;
    ValidationReport r;
    auto add = [&](std::string name, bool ok, std::string detail, bool mandatory = true) {
        r.checks.push_back({std::move(name), ok, mandatory, std::move(detail)});
    };
    auto num = [](double v) {
        std::ostringstream o;
        o.precision(17);
        o << v;
        return o.str();
    };

    if (!(window.lo < 0.0 && 0.0 < window.hi)) {
        add("window", false, "window must satisfy lo < 0 < hi");
        return r;
    }
    const bool x_only = !sys.f_minus.mentions(Var::Y) && !sys.f_plus.mentions(Var::Y);
    add("pieces_independent_of_y", x_only, x_only ? "" : "f_minus and f_plus must not depend on y");
    if (!x_only) return r;

    try {
        const Jet3 jm = sys.piece_jet(Side::Left, 0.0);
        const Jet3 jp = sys.piece_jet(Side::Right, 0.0);
        r.f_minus_slope = jm.dx();
        r.f_plus_slope = jp.dx();
        add("f_minus(0) = 0", std::abs(jm.value()) <= kZeroTol, "f_minus(0) = " + num(jm.value()));
        add("f_plus(0) = 0", std::abs(jp.value()) <= kZeroTol, "f_plus(0) = " + num(jp.value()));
        add("f_minus'(0) <= 0", r.f_minus_slope <= 0.0, "f_minus'(0) = " + num(r.f_minus_slope));
        add("f_plus'(0) >= 0", r.f_plus_slope >= 0.0, "f_plus'(0) = " + num(r.f_plus_slope));
        add("corner", r.f_minus_slope < 0.0 || r.f_plus_slope > 0.0,
            "at least one of f_minus'(0) < 0, f_plus'(0) > 0 must hold");
    } catch (const Error& e) {
        add("pieces_evaluable_at_0", false, e.what());
        return r;
    }

    try {
        r.x_max = find_x_max(sys, window.hi);
        r.F_at_x_max = sys.F(*r.x_max);
        add("f_plus_interior_maximum", true, "x_M = " + num(*r.x_max));
    } catch (const Error& e) {
        add("f_plus_interior_maximum", false, e.what());
    }

    // Branch stability of the fast subsystem, sampled at interior points.
    try {
        bool left_ok = true, mid_ok = true, right_ok = true;
        for (int k = 0; k < kSamples; ++k) {
            const double s = (k + 0.5) / kSamples;
            if (!(sys.dF(Side::Left, window.lo * (1.0 - s)) < 0.0)) left_ok = false;
            if (r.x_max) {
                if (!(sys.dF(Side::Right, *r.x_max * s) > 0.0)) mid_ok = false;
                if (!(sys.dF(Side::Right, *r.x_max + (window.hi - *r.x_max) * s) < 0.0)) right_ok = false;
            }
        }
        add("M^l attracting", left_ok, "F' < 0 sampled on x < 0");
        if (r.x_max) {
            add("M^m repelling", mid_ok, "F' > 0 sampled on 0 < x < x_M");
            add("M^r attracting", right_ok, "F' < 0 sampled on x > x_M");
        }
    } catch (const Error& e) {
        add("branch_stability", false, e.what());
    }

    try {
        r.shadow_ordering = shadow_ordering_holds(sys, window.lo, kSamples);
    } catch (const Error&) {
        r.shadow_ordering = false;
    }
    add("shadow_ordering", r.shadow_ordering, "f_plus < f_minus sampled on [x_lo, 0)", false);
    return r;
}

}  // namespace pwsc
