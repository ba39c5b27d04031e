#include "pwsc/expr.hpp"

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

#include "pwsc/error.hpp"

namespace pwsc {

// ---------------------------------------------------------------------------
// Jet3

namespace {

struct Term {
    int a, b, out;
};

// All (a, b) coefficient pairs whose product stays within total degree 3.
std::vector<Term> make_product_table() {
    std::vector<Term> t;
    for (int ia = 0; ia <= 3; ++ia)
        for (int ja = 0; ia + ja <= 3; ++ja)
            for (int ib = 0; ia + ja + ib <= 3; ++ib)
                for (int jb = 0; ia + ja + ib + jb <= 3; ++jb)
                    t.push_back({Jet3::index(ia, ja), Jet3::index(ib, jb), Jet3::index(ia + ib, ja + jb)});
    return t;
}

const std::vector<Term>& product_table() {
    static const std::vector<Term> table = make_product_table();
    return table;
}

constexpr double kFactorial[4] = {1.0, 1.0, 2.0, 6.0};

}  // namespace

int Jet3::index(int nx, int ny) {
    const int d = nx + ny;
    return d * (d + 1) / 2 + ny;
}

Jet3 Jet3::constant(double v) {
    Jet3 j;
    j.c_[0] = v;
    return j;
}

Jet3 Jet3::variable(double v, int axis) {
    Jet3 j;
    j.c_[0] = v;
    j.c_[axis == 0 ? 1 : 2] = 1.0;
    return j;
}

double Jet3::partial(int nx, int ny) const {
    return c_[index(nx, ny)] * kFactorial[nx] * kFactorial[ny];
}

Jet3 Jet3::operator-() const {
    Jet3 r;
    for (int i = 0; i < kSize; ++i) r.c_[i] = -c_[i];
    return r;
}

Jet3& Jet3::operator+=(const Jet3& o) {
    for (int i = 0; i < kSize; ++i) c_[i] += o.c_[i];
    return *this;
}

Jet3& Jet3::operator-=(const Jet3& o) {
    for (int i = 0; i < kSize; ++i) c_[i] -= o.c_[i];
    return *this;
}

Jet3 operator*(const Jet3& a, const Jet3& b) {
    Jet3 r;
    for (const Term& t : product_table()) r.c_[t.out] += a.c_[t.a] * b.c_[t.b];
    return r;
}

Jet3 operator*(double s, Jet3 a) {
    for (double& c : a.c_) c *= s;
    return a;
}

Jet3 Jet3::compose(double f0, double f1, double f2, double f3) const {
    Jet3 h = *this;
    h.c_[0] = 0.0;
    const Jet3 h2 = h * h;
    const Jet3 h3 = h2 * h;
    Jet3 r = f1 * h + (f2 / 2.0) * h2 + (f3 / 6.0) * h3;
    r.c_[0] = f0;
    return r;
}

// ---------------------------------------------------------------------------
// Parser

std::string_view var_name(Var v) {
    switch (v) {
        case Var::X: return "x";
        case Var::Y: return "y";
        case Var::Lambda: return "lambda";
        case Var::Eps: return "eps";
    }
    return "?";
}

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view src) : src_(src) {}

    Expression run() {
        skip_ws();
        parse_sum();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        Expression e;
        e.nodes_ = std::move(nodes_);
        return e;
    }

private:
    using Op = Expression::Op;
    static constexpr int kMaxDepth = 200;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
    [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                      src_[pos_] == '\r'))
            ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    std::int32_t push(Expression::Node n) {
        nodes_.push_back(n);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    std::int32_t binary(Op op, std::int32_t l, std::int32_t r) {
        Expression::Node n;
        n.op = op;
        n.lhs = l;
        n.rhs = r;
        return push(n);
    }

    std::int32_t unary(Op op, std::int32_t a) {
        Expression::Node n;
        n.op = op;
        n.lhs = a;
        return push(n);
    }

    struct DepthGuard {
        ExpressionParser& p;
        explicit DepthGuard(ExpressionParser& pp) : p(pp) {
            if (++p.depth_ > kMaxDepth) p.fail("expression nested too deeply");
        }
        ~DepthGuard() { --p.depth_; }
    };

    std::int32_t parse_sum() {
        DepthGuard guard(*this);
        std::int32_t lhs = parse_product();
        while (true) {
            if (peek('+')) {
                ++pos_;
                lhs = binary(Op::Add, lhs, parse_product());
            } else if (peek('-')) {
                ++pos_;
                lhs = binary(Op::Sub, lhs, parse_product());
            } else {
                return lhs;
            }
        }
    }

    std::int32_t parse_product() {
        std::int32_t lhs = parse_unary();
        while (true) {
            if (peek('*')) {
                ++pos_;
                lhs = binary(Op::Mul, lhs, parse_unary());
            } else if (peek('/')) {
                ++pos_;
                lhs = binary(Op::Div, lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    std::int32_t parse_unary() {
        DepthGuard guard(*this);
        if (peek('-')) {
            ++pos_;
            return unary(Op::Neg, parse_unary());
        }
        return parse_power();
    }

    std::int32_t parse_power() {
        std::int32_t base = parse_primary();
        while (peek('^')) {
            ++pos_;
            skip_ws();
            const std::size_t at = pos_;
            std::size_t end = pos_;
            while (end < src_.size() && src_[end] >= '0' && src_[end] <= '9') ++end;
            if (end == pos_) fail_at("exponent must be a non-negative integer literal", at);
            if (end < src_.size() && (src_[end] == '.' || src_[end] == 'e' || src_[end] == 'E'))
                fail_at("exponent must be a non-negative integer literal", at);
            unsigned exp = 0;
            auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + end, exp);
            if (ec != std::errc() || ptr != src_.data() + end || exp > 64)
                fail_at("exponent out of range", at);
            pos_ = end;
            Expression::Node n;
            n.op = Op::Pow;
            n.lhs = base;
            n.exponent = exp;
            base = push(n);
        }
        return base;
    }

    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

    std::int32_t parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected operand");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            const std::int32_t inner = parse_sum();
            if (!peek(')')) fail("expected ')'");
            ++pos_;
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (is_ident_start(c)) return parse_identifier();
        fail(std::string("unexpected '") + c + "'");
    }

    std::int32_t parse_number() {
        const std::size_t start = pos_;
        std::size_t end = pos_;
        auto digits = [&] {
            const std::size_t s = end;
            while (end < src_.size() && src_[end] >= '0' && src_[end] <= '9') ++end;
            return end - s;
        };
        std::size_t n = digits();
        if (end < src_.size() && src_[end] == '.') {
            ++end;
            n += digits();
        }
        if (n == 0) fail_at("malformed number", start);
        if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
            std::size_t save = end;
            ++end;
            if (end < src_.size() && (src_[end] == '+' || src_[end] == '-')) ++end;
            if (digits() == 0) end = save;  // not an exponent; leave 'e' for the caller
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + end, v);
        if (ec != std::errc() || ptr != src_.data() + end || !std::isfinite(v))
            fail_at("number out of range", start);
        pos_ = end;
        Expression::Node node;
        node.op = Op::Const;
        node.value = v;
        return push(node);
    }

    std::int32_t parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);

        static constexpr std::pair<std::string_view, Var> kVars[] = {
            {"x", Var::X}, {"y", Var::Y}, {"lambda", Var::Lambda}, {"eps", Var::Eps}};
        for (const auto& [name, v] : kVars) {
            if (id == name) {
                Expression::Node n;
                n.op = Op::Variable;
                n.var = v;
                return push(n);
            }
        }

        static constexpr std::pair<std::string_view, Op> kFuncs[] = {
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"tanh", Op::Tanh}, {"sqrt", Op::Sqrt}};
        for (const auto& [name, op] : kFuncs) {
            if (id == name) {
                if (!peek('(')) fail("expected '(' after " + std::string(name));
                ++pos_;
                const std::int32_t arg = parse_sum();
                if (!peek(')')) fail("expected ')'");
                ++pos_;
                return unary(op, arg);
            }
        }
        fail_at("unknown identifier '" + std::string(id) + "'", start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    std::vector<Expression::Node> nodes_;
};

Expression Expression::parse(std::string_view source) { return ExpressionParser(source).run(); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

inline double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
    return v;
}

inline double var_value(Var v, const Bindings& b) {
    switch (v) {
        case Var::X: return b.x;
        case Var::Y: return b.y;
        case Var::Lambda: return b.lambda;
        case Var::Eps: return b.eps;
    }
    return 0.0;
}

// Separate out-of-line calls keep the compiler from fusing sin and cos into
// sincos, whose results can differ from sin and cos in the last bit.
[[gnu::noinline]] double sin_of(double v) { return std::sin(v); }
[[gnu::noinline]] double cos_of(double v) { return std::cos(v); }

double ipow(double base, unsigned e) {
    double r = 1.0;
    while (e) {
        if (e & 1u) r *= base;
        base *= base;
        e >>= 1u;
    }
    return r;
}

Jet3 ipow(Jet3 base, unsigned e) {
    Jet3 r = Jet3::constant(1.0);
    while (e) {
        if (e & 1u) r = r * base;
        e >>= 1u;
        if (e) base = base * base;
    }
    return r;
}

void check_jet(const Jet3& j, const char* what) {
    for (int nx = 0; nx <= 3; ++nx)
        for (int ny = 0; nx + ny <= 3; ++ny) checked(j.coeff(nx, ny), what);
}

}  // namespace

double Expression::evaluate(const Bindings& b) const {
    constexpr std::size_t kInline = 128;
    double inline_buf[kInline];
    std::vector<double> heap;
    double* v = inline_buf;
    if (nodes_.size() > kInline) {
        heap.resize(nodes_.size());
        v = heap.data();
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::Const: v[i] = n.value; break;
            case Op::Variable: v[i] = var_value(n.var, b); break;
            case Op::Neg: v[i] = -v[n.lhs]; break;
            case Op::Add: v[i] = checked(v[n.lhs] + v[n.rhs], "addition"); break;
            case Op::Sub: v[i] = checked(v[n.lhs] - v[n.rhs], "subtraction"); break;
            case Op::Mul: v[i] = checked(v[n.lhs] * v[n.rhs], "multiplication"); break;
            case Op::Div:
                if (v[n.rhs] == 0.0) throw DomainError("division by zero");
                v[i] = checked(v[n.lhs] / v[n.rhs], "division");
                break;
            case Op::Pow: v[i] = checked(ipow(v[n.lhs], n.exponent), "power"); break;
            case Op::Sin: v[i] = sin_of(v[n.lhs]); break;
            case Op::Cos: v[i] = cos_of(v[n.lhs]); break;
            case Op::Exp: v[i] = checked(std::exp(v[n.lhs]), "exp"); break;
            case Op::Tanh: v[i] = std::tanh(v[n.lhs]); break;
            case Op::Sqrt:
                if (v[n.lhs] < 0.0) throw DomainError("sqrt of negative argument");
                v[i] = std::sqrt(v[n.lhs]);
                break;
        }
    }
    return v[nodes_.size() - 1];
}

Jet3 Expression::evaluate_jet(const Bindings& b) const {
    std::vector<Jet3> v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::Const: v[i] = Jet3::constant(n.value); break;
            case Op::Variable:
                if (n.var == Var::X)
                    v[i] = Jet3::variable(b.x, 0);
                else if (n.var == Var::Y)
                    v[i] = Jet3::variable(b.y, 1);
                else
                    v[i] = Jet3::constant(var_value(n.var, b));
                break;
            case Op::Neg: v[i] = -v[n.lhs]; break;
            case Op::Add: v[i] = v[n.lhs] + v[n.rhs]; break;
            case Op::Sub: v[i] = v[n.lhs] - v[n.rhs]; break;
            case Op::Mul: v[i] = v[n.lhs] * v[n.rhs]; break;
            case Op::Div: {
                const double d = v[n.rhs].value();
                if (d == 0.0) throw DomainError("division by zero");
                const double r = 1.0 / d;
                v[i] = v[n.lhs] * v[n.rhs].compose(r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r);
                // The value must match evaluate() bit for bit.
                v[i].coeff(0, 0) = v[n.lhs].value() / d;
                break;
            }
            case Op::Pow: v[i] = ipow(v[n.lhs], n.exponent); break;
            case Op::Sin: {
                const double s = sin_of(v[n.lhs].value()), c = cos_of(v[n.lhs].value());
                v[i] = v[n.lhs].compose(s, c, -s, -c);
                break;
            }
            case Op::Cos: {
                const double s = sin_of(v[n.lhs].value()), c = cos_of(v[n.lhs].value());
                v[i] = v[n.lhs].compose(c, -s, -c, s);
                break;
            }
            case Op::Exp: {
                const double e = checked(std::exp(v[n.lhs].value()), "exp");
                v[i] = v[n.lhs].compose(e, e, e, e);
                break;
            }
            case Op::Tanh: {
                const double t = std::tanh(v[n.lhs].value());
                const double s = 1.0 - t * t;
                v[i] = v[n.lhs].compose(t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0));
                break;
            }
            case Op::Sqrt: {
                const double a = v[n.lhs].value();
                if (a < 0.0) throw DomainError("sqrt of negative argument");
                if (a == 0.0) throw DomainError("sqrt is not differentiable at 0");
                const double s = std::sqrt(a);
                v[i] = v[n.lhs].compose(s, 0.5 / s, -0.25 / (s * a), 0.375 / (s * a * a));
                break;
            }
        }
        check_jet(v[i], "jet evaluation");
    }
    return v.back();
}

bool Expression::mentions(Var var) const {
    for (const Node& n : nodes_)
        if (n.op == Op::Variable && n.var == var) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

int precedence(Expression::Op op) {
    using Op = Expression::Op;
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        default: return 5;
    }
}

std::string format_literal(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

void emit(const std::vector<Expression::Node>& nodes, std::int32_t i, std::string& out) {
    using Op = Expression::Op;
    const auto& n = nodes[i];
    auto wrapped = [&](std::int32_t child, bool paren) {
        if (paren) out += '(';
        emit(nodes, child, out);
        if (paren) out += ')';
    };
    const int p = precedence(n.op);
    switch (n.op) {
        case Op::Const: out += format_literal(n.value); break;
        case Op::Variable: out += var_name(n.var); break;
        case Op::Neg:
            out += '-';
            wrapped(n.lhs, precedence(nodes[n.lhs].op) < p);
            break;
        case Op::Pow:
            wrapped(n.lhs, precedence(nodes[n.lhs].op) < p);
            out += '^';
            out += std::to_string(n.exponent);
            break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            static constexpr char kSym[] = {'+', '-', '*', '/'};
            wrapped(n.lhs, precedence(nodes[n.lhs].op) < p);
            out += ' ';
            out += kSym[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
            out += ' ';
            wrapped(n.rhs, precedence(nodes[n.rhs].op) <= p);
            break;
        }
        case Op::Sin: out += "sin"; wrapped(n.lhs, true); break;
        case Op::Cos: out += "cos"; wrapped(n.lhs, true); break;
        case Op::Exp: out += "exp"; wrapped(n.lhs, true); break;
        case Op::Tanh: out += "tanh"; wrapped(n.lhs, true); break;
        case Op::Sqrt: out += "sqrt"; wrapped(n.lhs, true); break;
    }
}

}  // namespace

std::string Expression::to_string() const {
    std::string out;
    if (!nodes_.empty()) emit(nodes_, static_cast<std::int32_t>(nodes_.size() - 1), out);
    return out;
}

}  // namespace pwsc
