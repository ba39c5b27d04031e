#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pwsc {

/// Values of the four reserved variables an expression may reference.
struct Bindings {
    double x = 0.0;
    double y = 0.0;
    double lambda = 0.0;
    double eps = 0.0;
};

enum class Var : std::uint8_t { X, Y, Lambda, Eps };

/// Truncated bivariate Taylor polynomial in (dx, dy) of total degree 3.
///
/// Coefficients are stored once per multi-index, so mixed partials are
/// symmetric by construction. Arithmetic on jets is exact up to rounding,
/// which gives derivatives of parsed expressions without finite differences.
class Jet3 {
public:
    static constexpr int kSize = 10;

    Jet3() = default;
    static Jet3 constant(double v);
    /// Seed for the variable x (dx = 1) or y (dy = 1).
    static Jet3 variable(double v, int axis);

    double value() const { return c_[0]; }
    /// Partial derivative d^(nx+ny) / dx^nx dy^ny, nx + ny <= 3.
    double partial(int nx, int ny) const;

    double dx() const { return partial(1, 0); }
    double dy() const { return partial(0, 1); }
    double dxx() const { return partial(2, 0); }
    double dxy() const { return partial(1, 1); }
    double dyy() const { return partial(0, 2); }

    /// Taylor coefficient of dx^nx dy^ny.
    double coeff(int nx, int ny) const { return c_[index(nx, ny)]; }
    double& coeff(int nx, int ny) { return c_[index(nx, ny)]; }

    Jet3 operator-() const;
    Jet3& operator+=(const Jet3& o);
    Jet3& operator-=(const Jet3& o);
    friend Jet3 operator+(Jet3 a, const Jet3& b) { return a += b; }
    friend Jet3 operator-(Jet3 a, const Jet3& b) { return a -= b; }
    friend Jet3 operator*(const Jet3& a, const Jet3& b);
    friend Jet3 operator*(double s, Jet3 a);

    /// f(value + h) given f and its first three derivatives at value.
    Jet3 compose(double f0, double f1, double f2, double f3) const;

    static int index(int nx, int ny);

private:
    std::array<double, kSize> c_{};
};

/// Parsed scalar expression over x, y, lambda, eps.
///
/// Grammar (lowest to highest precedence): `+ -`, `* /`, unary `-`, `^` with a
/// non-negative integer literal exponent. Same-precedence binary operators
/// associate to the left. Functions: sin cos exp tanh sqrt.
///
/// Immutable after construction; evaluation is reentrant.
class Expression {
public:
    enum class Op : std::uint8_t {
        Const, Variable, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Tanh, Sqrt
    };

    struct Node {
        Op op = Op::Const;
        Var var = Var::X;
        double value = 0.0;      // Const
        unsigned exponent = 0;   // Pow
        std::int32_t lhs = -1;   // operand / left child
        std::int32_t rhs = -1;   // right child
        bool operator==(const Node&) const = default;
    };

    /// Throws ParseError (with byte offset) on malformed input.
    static Expression parse(std::string_view source);

    double evaluate(const Bindings& b) const;
    Jet3 evaluate_jet(const Bindings& b) const;

    /// Concrete syntax that parses back to an identical tree.
    std::string to_string() const;

    bool mentions(Var v) const;

    /// Nodes in post-order; the root is the last element.
    const std::vector<Node>& nodes() const { return nodes_; }

    bool operator==(const Expression&) const = default;

private:
    friend class ExpressionParser;
    std::vector<Node> nodes_;
};

/// Reserved identifier for a variable.
std::string_view var_name(Var v);

}  // namespace pwsc
