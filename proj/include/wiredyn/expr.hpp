#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wiredyn/errors.hpp"

namespace wiredyn {

/// Expression parse failure, with a 1-based column into the parsed text.
struct ExprParseError : Error {
    std::size_t column;
    ExprParseError(std::size_t col, const std::string& msg)
        : Error(msg + " (column " + std::to_string(col) + ")"), column(col) {}
};

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression AST: numeric literals, scalar variable
/// references, the arithmetic operators, and a fixed set of functions.
class Expr {
public:
    enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call };

    Kind kind;
    double number = 0.0;  // Kind::Number
    std::string name;     // Kind::Var (slot name) or Kind::Call (function name)
    ExprPtr lhs, rhs;     // children; unary nodes use lhs only

    static ExprPtr make_number(double v) {
        auto e = std::make_shared<Expr>();
        e->kind = Kind::Number;
        e->number = v;
        return e;
    }
    static ExprPtr make_var(std::string n) {
        auto e = std::make_shared<Expr>();
        e->kind = Kind::Var;
        e->name = std::move(n);
        return e;
    }
    static ExprPtr make_unary(Kind k, ExprPtr a) {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->lhs = std::move(a);
        return e;
    }
    static ExprPtr make_binary(Kind k, ExprPtr a, ExprPtr b) {
        auto e = std::make_shared<Expr>();
        e->kind = k;
        e->lhs = std::move(a);
        e->rhs = std::move(b);
        return e;
    }
    static ExprPtr make_call(std::string fn, ExprPtr a) {
        auto e = std::make_shared<Expr>();
        e->kind = Kind::Call;
        e->name = std::move(fn);
        e->lhs = std::move(a);
        return e;
    }

    /// Evaluate against a variable lookup.
    double eval(const std::function<double(const std::string&)>& lookup) const {
        switch (kind) {
        case Kind::Number: return number;
        case Kind::Var: return lookup(name);
        case Kind::Neg: return -lhs->eval(lookup);
        case Kind::Add: return lhs->eval(lookup) + rhs->eval(lookup);
        case Kind::Sub: return lhs->eval(lookup) - rhs->eval(lookup);
        case Kind::Mul: return lhs->eval(lookup) * rhs->eval(lookup);
        case Kind::Div: return lhs->eval(lookup) / rhs->eval(lookup);
        case Kind::Pow: return std::pow(lhs->eval(lookup), rhs->eval(lookup));
        case Kind::Call: return apply_fn(name, lhs->eval(lookup));
        }
        throw Error("corrupt expression node");
    }

    static double apply_fn(const std::string& fn, double x) {
        if (fn == "sin") return std::sin(x);
        if (fn == "cos") return std::cos(x);
        if (fn == "exp") return std::exp(x);
        if (fn == "log") return std::log(x);
        if (fn == "tanh") return std::tanh(x);
        if (fn == "sqrt") return std::sqrt(x);
        if (fn == "abs") return std::abs(x);
        throw Error("unknown function '" + fn + "'");
    }

    static bool is_known_fn(std::string_view fn) {
        return fn == "sin" || fn == "cos" || fn == "exp" || fn == "log" || fn == "tanh" ||
               fn == "sqrt" || fn == "abs";
    }

    friend bool equal(const ExprPtr& a, const ExprPtr& b) {
        if (!a || !b) return !a && !b;
        if (a->kind != b->kind) return false;
        switch (a->kind) {
        case Kind::Number: return a->number == b->number;
        case Kind::Var: return a->name == b->name;
        case Kind::Call:
            return a->name == b->name && equal(a->lhs, b->lhs);
        case Kind::Neg: return equal(a->lhs, b->lhs);
        default: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
        }
    }
};

/// Replace variables by expressions. Variables absent from the map are
/// kept as-is.
inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& subs) {
    switch (e->kind) {
    case Expr::Kind::Number: return e;
    case Expr::Kind::Var: {
        auto it = subs.find(e->name);
        return it == subs.end() ? e : it->second;
    }
    case Expr::Kind::Neg: return Expr::make_unary(e->kind, substitute(e->lhs, subs));
    case Expr::Kind::Call: return Expr::make_call(e->name, substitute(e->lhs, subs));
    default:
        return Expr::make_binary(e->kind, substitute(e->lhs, subs), substitute(e->rhs, subs));
    }
}

/// Collect the variable names referenced by an expression.
inline void collect_vars(const ExprPtr& e, std::vector<std::string>& out) {
    switch (e->kind) {
    case Expr::Kind::Number: return;
    case Expr::Kind::Var: out.push_back(e->name); return;
    case Expr::Kind::Neg:
    case Expr::Kind::Call: collect_vars(e->lhs, out); return;
    default:
        collect_vars(e->lhs, out);
        collect_vars(e->rhs, out);
    }
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

inline int precedence(Expr::Kind k) {
    switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub: return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div: return 2;
    case Expr::Kind::Neg: return 3;
    case Expr::Kind::Pow: return 4;
    default: return 5;
    }
}

} // namespace detail

/// Render with standard precedence, parenthesizing only where reparsing
/// would change the tree.
inline std::string to_string(const ExprPtr& e) {
    using K = Expr::Kind;
    auto wrap = [](const ExprPtr& child, bool parens) {
        return parens ? "(" + to_string(child) + ")" : to_string(child);
    };
    const int p = detail::precedence(e->kind);
    switch (e->kind) {
    case K::Number: return detail::format_double(e->number);
    case K::Var: return e->name;
    case K::Call: return e->name + "(" + to_string(e->lhs) + ")";
    case K::Neg:
        return "-" + wrap(e->lhs, detail::precedence(e->lhs->kind) < p);
    case K::Pow:
        // '^' is right-associative and binds tighter than unary minus;
        // the left operand must be a primary, the right a factor.
        return wrap(e->lhs, detail::precedence(e->lhs->kind) < 5) + "^" +
               wrap(e->rhs, detail::precedence(e->rhs->kind) < 3);
    default: {
        const char* op = e->kind == K::Add ? " + "
                         : e->kind == K::Sub ? " - "
                         : e->kind == K::Mul ? "*"
                                             : "/";
        const int pl = detail::precedence(e->lhs->kind);
        const int pr = detail::precedence(e->rhs->kind);
        // These operators parse left-associatively, so a right child of
        // equal precedence always needs parentheses to survive reparsing.
        return wrap(e->lhs, pl < p) + op + wrap(e->rhs, pr <= p);
    }
    }
}

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view text, const std::vector<std::string>* scope)
        : text_(text), scope_(scope) {}

    ExprPtr parse() {
        ExprPtr e = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            throw ExprParseError(pos_ + 1, "unexpected trailing input");
        return e;
    }

private:
    ExprPtr parse_sum() {
        ExprPtr e = parse_term();
        for (;;) {
            skip_ws();
            if (accept('+'))
                e = Expr::make_binary(Expr::Kind::Add, e, parse_term());
            else if (accept('-'))
                e = Expr::make_binary(Expr::Kind::Sub, e, parse_term());
            else
                return e;
        }
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_factor();
        for (;;) {
            skip_ws();
            if (accept('*'))
                e = Expr::make_binary(Expr::Kind::Mul, e, parse_factor());
            else if (accept('/'))
                e = Expr::make_binary(Expr::Kind::Div, e, parse_factor());
            else
                return e;
        }
    }

    ExprPtr parse_factor() {
        skip_ws();
        if (accept('-')) return Expr::make_unary(Expr::Kind::Neg, parse_factor());
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        skip_ws();
        if (accept('^')) return Expr::make_binary(Expr::Kind::Pow, base, parse_factor());
        return base;
    }

    ExprPtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ExprParseError(pos_ + 1, "unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            ExprPtr e = parse_sum();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        throw ExprParseError(pos_ + 1, std::string("unexpected character '") + c + "'");
    }

    ExprPtr parse_number() {
        const std::size_t start = pos_;
        double v = 0;
        auto [p, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (ec != std::errc())
            throw ExprParseError(start + 1, "malformed number");
        pos_ = static_cast<std::size_t>(p - text_.data());
        return Expr::make_number(v);
    }

    ExprPtr parse_ident() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '.'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            if (!Expr::is_known_fn(name))
                throw ExprParseError(start + 1, "unknown function '" + name + "'");
            ++pos_;
            ExprPtr arg = parse_sum();
            expect(')');
            return Expr::make_call(name, arg);
        }
        if (pos_ < text_.size() && text_[pos_] == '[') {
            ++pos_;
            skip_ws();
            const std::size_t nstart = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == nstart) throw ExprParseError(pos_ + 1, "expected coordinate index");
            name += "[" + std::string(text_.substr(nstart, pos_ - nstart)) + "]";
            skip_ws();
            expect(']');
        }
        if (scope_ && std::find(scope_->begin(), scope_->end(), name) == scope_->end())
            throw ExprParseError(start + 1, "unknown identifier '" + name + "'");
        return Expr::make_var(std::move(name));
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        skip_ws();
        if (!accept(c))
            throw ExprParseError(pos_ + 1, std::string("expected '") + c + "'");
    }

    std::string_view text_;
    const std::vector<std::string>* scope_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parse an expression; every variable must appear in scope.
inline ExprPtr parse_expr(std::string_view text, const std::vector<std::string>& scope) {
    return detail::ExprParser(text, &scope).parse();
}

/// Parse without a scope check (callers resolve variables later).
inline ExprPtr parse_expr_unchecked(std::string_view text) {
    return detail::ExprParser(text, nullptr).parse();
}

/// Resolve variables to slot indices once and return a fast evaluator
/// over a flat value buffer laid out per `scope`.
inline std::function<double(std::span<const double>)>
compile_expr(const ExprPtr& e, const std::vector<std::string>& scope) {
    using Fn = std::function<double(std::span<const double>)>;
    switch (e->kind) {
    case Expr::Kind::Number: {
        const double v = e->number;
        return [v](std::span<const double>) { return v; };
    }
    case Expr::Kind::Var: {
        auto it = std::find(scope.begin(), scope.end(), e->name);
        if (it == scope.end()) throw Error("unresolved variable '" + e->name + "'");
        const std::size_t slot = static_cast<std::size_t>(it - scope.begin());
        return [slot](std::span<const double> v) { return v[slot]; };
    }
    case Expr::Kind::Neg: {
        Fn a = compile_expr(e->lhs, scope);
        return [a](std::span<const double> v) { return -a(v); };
    }
    case Expr::Kind::Call: {
        Fn a = compile_expr(e->lhs, scope);
        const std::string fn = e->name;
        return [a, fn](std::span<const double> v) { return Expr::apply_fn(fn, a(v)); };
    }
    default: {
        Fn a = compile_expr(e->lhs, scope);
        Fn b = compile_expr(e->rhs, scope);
        switch (e->kind) {
        case Expr::Kind::Add: return [a, b](std::span<const double> v) { return a(v) + b(v); };
        case Expr::Kind::Sub: return [a, b](std::span<const double> v) { return a(v) - b(v); };
        case Expr::Kind::Mul: return [a, b](std::span<const double> v) { return a(v) * b(v); };
        case Expr::Kind::Div: return [a, b](std::span<const double> v) { return a(v) / b(v); };
        case Expr::Kind::Pow:
            return [a, b](std::span<const double> v) { return std::pow(a(v), b(v)); };
        default: throw Error("corrupt expression node");
        }
    }
    }
}

} // namespace wiredyn
