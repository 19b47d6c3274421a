#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "funnelctl/core.hpp"

namespace funnelctl::pipeline {

/// Scalar signal expression in the variable t: numbers, pi, + - * / ^(integer),
/// sin, cos, exp, and piecewise(boundary, before, after). Supports symbolic
/// differentiation so configured signals provide exact derivatives.
class Expr {
public:
    using Ptr = std::shared_ptr<const Expr>;

    enum class Kind { kConst, kTime, kAdd, kSub, kMul, kDiv, kPow, kNeg, kSin, kCos, kExp, kPiece };

    static Ptr constant(double v) { return std::make_shared<Expr>(Kind::kConst, v); }
    static Ptr time() { return std::make_shared<Expr>(Kind::kTime, 0.0); }

    static Ptr add(Ptr a, Ptr b) {
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        if (a->kind_ == Kind::kConst && b->kind_ == Kind::kConst)
            return constant(a->value_ + b->value_);
        return node(Kind::kAdd, a, b);
    }
    static Ptr sub(Ptr a, Ptr b) {
        if (is_const(b, 0.0)) return a;
        if (a->kind_ == Kind::kConst && b->kind_ == Kind::kConst)
            return constant(a->value_ - b->value_);
        return node(Kind::kSub, a, b);
    }
    static Ptr mul(Ptr a, Ptr b) {
        if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        if (a->kind_ == Kind::kConst && b->kind_ == Kind::kConst)
            return constant(a->value_ * b->value_);
        return node(Kind::kMul, a, b);
    }
    static Ptr div(Ptr a, Ptr b) {
        if (is_const(a, 0.0)) return constant(0.0);
        if (is_const(b, 1.0)) return a;
        if (a->kind_ == Kind::kConst && b->kind_ == Kind::kConst && b->value_ != 0.0)
            return constant(a->value_ / b->value_);
        return node(Kind::kDiv, a, b);
    }
    static Ptr pow(Ptr a, int n) {
        if (n == 0) return constant(1.0);
        if (n == 1) return a;
        auto p = std::make_shared<Expr>(Kind::kPow, static_cast<double>(n));
        p->a_ = a;
        return p;
    }
    static Ptr neg(Ptr a) {
        if (a->kind_ == Kind::kConst) return constant(-a->value_);
        return node(Kind::kNeg, a, nullptr);
    }
    static Ptr sin(Ptr a) { return node(Kind::kSin, a, nullptr); }
    static Ptr cos(Ptr a) { return node(Kind::kCos, a, nullptr); }
    static Ptr exp(Ptr a) { return node(Kind::kExp, a, nullptr); }
    static Ptr piecewise(double boundary, Ptr before, Ptr after) {
        auto p = std::make_shared<Expr>(Kind::kPiece, boundary);
        p->a_ = before;
        p->b_ = after;
        return p;
    }

    double eval(double t) const {
        switch (kind_) {
            case Kind::kConst: return value_;
            case Kind::kTime: return t;
            case Kind::kAdd: return a_->eval(t) + b_->eval(t);
            case Kind::kSub: return a_->eval(t) - b_->eval(t);
            case Kind::kMul: return a_->eval(t) * b_->eval(t);
            case Kind::kDiv: return a_->eval(t) / b_->eval(t);
            case Kind::kPow: return std::pow(a_->eval(t), value_);
            case Kind::kNeg: return -a_->eval(t);
            case Kind::kSin: return std::sin(a_->eval(t));
            case Kind::kCos: return std::cos(a_->eval(t));
            case Kind::kExp: return std::exp(a_->eval(t));
            case Kind::kPiece: return t < value_ ? a_->eval(t) : b_->eval(t);
        }
        return 0.0;
    }

    Ptr derivative() const {
        switch (kind_) {
            case Kind::kConst: return constant(0.0);
            case Kind::kTime: return constant(1.0);
            case Kind::kAdd: return add(a_->derivative(), b_->derivative());
            case Kind::kSub: return sub(a_->derivative(), b_->derivative());
            case Kind::kMul:
                return add(mul(a_->derivative(), b_), mul(a_, b_->derivative()));
            case Kind::kDiv:
                return div(sub(mul(a_->derivative(), b_), mul(a_, b_->derivative())),
                           pow(b_, 2));
            case Kind::kPow:
                return mul(mul(constant(value_), pow(a_, static_cast<int>(value_) - 1)),
                           a_->derivative());
            case Kind::kNeg: return neg(a_->derivative());
            case Kind::kSin: return mul(cos(a_), a_->derivative());
            case Kind::kCos: return neg(mul(sin(a_), a_->derivative()));
            case Kind::kExp: {
                auto self = node(Kind::kExp, a_, nullptr);
                return mul(self, a_->derivative());
            }
            case Kind::kPiece:
                return piecewise(value_, a_->derivative(), b_->derivative());
        }
        return constant(0.0);
    }

    std::vector<double> piece_boundaries() const {
        std::vector<double> out;
        collect_boundaries(out);
        return out;
    }

    Expr(Kind k, double v) : kind_(k), value_(v) {}

private:
    static bool is_const(const Ptr& p, double v) {
        return p->kind_ == Kind::kConst && p->value_ == v;
    }
    static Ptr node(Kind k, Ptr a, Ptr b) {
        auto p = std::make_shared<Expr>(k, 0.0);
        p->a_ = std::move(a);
        p->b_ = std::move(b);
        return p;
    }
    void collect_boundaries(std::vector<double>& out) const {
        if (kind_ == Kind::kPiece) out.push_back(value_);
        if (a_) a_->collect_boundaries(out);
        if (b_) b_->collect_boundaries(out);
    }

    Kind kind_;
    double value_;
    Ptr a_, b_;
};

/// Recursive-descent parser; errors carry the column of the offending token.
class ExprParser {
public:
    static Expr::Ptr parse(const std::string& text) {
        ExprParser p(text);
        Expr::Ptr e = p.parse_sum();
        p.skip_ws();
        if (p.pos_ != text.size()) p.fail("trailing input");
        return e;
    }

private:
    explicit ExprParser(const std::string& t) : text_(t) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression error at column " + std::to_string(pos_ + 1) + " in \"" +
                          text_ + "\": " + what);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr::Ptr parse_sum() {
        Expr::Ptr e = parse_term();
        for (;;) {
            if (eat('+'))
                e = Expr::add(e, parse_term());
            else if (eat('-'))
                e = Expr::sub(e, parse_term());
            else
                return e;
        }
    }

    Expr::Ptr parse_term() {
        Expr::Ptr e = parse_power();
        for (;;) {
            if (eat('*'))
                e = Expr::mul(e, parse_power());
            else if (eat('/'))
                e = Expr::div(e, parse_power());
            else
                return e;
        }
    }

    Expr::Ptr parse_power() {
        Expr::Ptr base = parse_unary();
        if (eat('^')) {
            skip_ws();
            bool negexp = eat('-');
            size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (start == pos_) fail("integer exponent expected");
            int n = std::stoi(text_.substr(start, pos_ - start));
            if (negexp) return Expr::div(Expr::constant(1.0), Expr::pow(base, n));
            return Expr::pow(base, n);
        }
        return base;
    }

    Expr::Ptr parse_unary() {
        if (eat('-')) return Expr::neg(parse_unary());
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    Expr::Ptr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
        if (eat('(')) {
            Expr::Ptr e = parse_sum();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        fail("unexpected character");
    }

    Expr::Ptr parse_number() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
            ++pos_;
        try {
            return Expr::constant(std::stod(text_.substr(start, pos_ - start)));
        } catch (const std::exception&) {
            fail("malformed number");
        }
    }

    Expr::Ptr parse_name() {
        size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (name == "t") return Expr::time();
        if (name == "pi") return Expr::constant(M_PI);
        if (!eat('(')) fail("'(' expected after function name '" + name + "'");
        if (name == "piecewise") {
            Expr::Ptr b = parse_sum();
            if (!eat(',')) fail("piecewise needs three arguments");
            Expr::Ptr before = parse_sum();
            if (!eat(',')) fail("piecewise needs three arguments");
            Expr::Ptr after = parse_sum();
            if (!eat(')')) fail("missing ')'");
            double boundary = b->eval(0.0);  // boundary must be constant
            return Expr::piecewise(boundary, before, after);
        }
        Expr::Ptr arg = parse_sum();
        if (!eat(')')) fail("missing ')'");
        if (name == "sin") return Expr::sin(arg);
        if (name == "cos") return Expr::cos(arg);
        if (name == "exp") return Expr::exp(arg);
        fail("unknown function '" + name + "'");
    }

    const std::string& text_;
    size_t pos_ = 0;
};

/// A parsed expression together with its derivative chain.
class Signal {
public:
    Signal() = default;
    explicit Signal(const std::string& text) : text_(text) {
        chain_.push_back(ExprParser::parse(text));
    }

    double eval(double t, Index order = 0) const {
        while (static_cast<Index>(chain_.size()) <= order)
            chain_.push_back(chain_.back()->derivative());
        return chain_[static_cast<size_t>(order)]->eval(t);
    }

    std::vector<double> piece_boundaries() const {
        return chain_.empty() ? std::vector<double>{} : chain_.front()->piece_boundaries();
    }

    const std::string& text() const { return text_; }

private:
    std::string text_;
    mutable std::vector<Expr::Ptr> chain_;
};

}  // namespace funnelctl::pipeline
