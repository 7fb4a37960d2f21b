#pragma once

#include <map>
#include <vector>

#include "superholonomy/grassmann.hpp"

namespace shol {

/// Polynomial in the even coordinates with Grassmann coefficients (odd
/// coordinates and external generators live inside the coefficients).  This
/// models functions on S x M over one chart, exactly over Q.
class SuperFunction {
public:
    using Multidegree = std::vector<unsigned>;

    SuperFunction() = default;

    SuperFunction(ContextPtr ctx, unsigned even_vars)
        : ctx_(std::move(ctx)), even_vars_(even_vars) {}

    static SuperFunction constant(const GrassmannElement& g, unsigned even_vars) {
        SuperFunction f(g.context(), even_vars);
        if (!g.is_zero()) f.terms_[Multidegree(even_vars, 0)] = g;
        return f;
    }

    static SuperFunction coordinate(const ContextPtr& ctx, unsigned even_vars, unsigned j) {
        SuperFunction f(ctx, even_vars);
        Multidegree d(even_vars, 0);
        d.at(j) = 1;
        f.terms_[d] = GrassmannElement(ctx, Rational(1));
        return f;
    }

    const ContextPtr& context() const { return ctx_; }
    unsigned even_vars() const { return even_vars_; }
    const std::map<Multidegree, GrassmannElement>& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }

    bool is_constant() const {
        if (terms_.empty()) return true;
        if (terms_.size() != 1) return false;
        for (unsigned d : terms_.begin()->first)
            if (d) return false;
        return true;
    }

    GrassmannElement constant_coefficient() const {
        auto it = terms_.find(Multidegree(even_vars_, 0));
        return it == terms_.end() ? GrassmannElement(ctx_) : it->second;
    }

    std::optional<unsigned> parity() const {
        std::optional<unsigned> p;
        for (const auto& [d, g] : terms_) {
            auto gp = g.parity();
            if (!gp) return std::nullopt;
            if (g.is_zero()) continue;
            if (!p) p = *gp;
            else if (*p != *gp) return std::nullopt;
        }
        return p ? p : std::optional<unsigned>(0);
    }

    bool homogeneous(unsigned p) const {
        for (const auto& [d, g] : terms_)
            if (!g.homogeneous(p)) return false;
        return true;
    }

    SuperFunction parity_part(unsigned p) const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) {
            GrassmannElement gp = g.parity_part(p);
            if (!gp.is_zero()) out.terms_[d] = gp;
        }
        return out;
    }

    void add_term(const Multidegree& d, const GrassmannElement& g) {
        if (g.is_zero()) return;
        auto it = terms_.find(d);
        if (it == terms_.end()) {
            terms_.emplace(d, g);
        } else {
            it->second += g;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    SuperFunction& operator+=(const SuperFunction& o) {
        adopt(o);
        for (const auto& [d, g] : o.terms_) add_term(d, g);
        return *this;
    }
    SuperFunction& operator-=(const SuperFunction& o) {
        adopt(o);
        for (const auto& [d, g] : o.terms_) add_term(d, -g);
        return *this;
    }
    friend SuperFunction operator+(SuperFunction a, const SuperFunction& b) { return a += b; }
    friend SuperFunction operator-(SuperFunction a, const SuperFunction& b) { return a -= b; }

    SuperFunction operator-() const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) out.terms_[d] = -g;
        return out;
    }

    friend SuperFunction operator*(const SuperFunction& a, const SuperFunction& b) {
        SuperFunction out(a.ctx_ ? a.ctx_ : b.ctx_, a.ctx_ ? a.even_vars_ : b.even_vars_);
        for (const auto& [da, ga] : a.terms_)
            for (const auto& [db, gb] : b.terms_) {
                GrassmannElement g = ga * gb;
                if (g.is_zero()) continue;
                Multidegree d = da;
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += db[i];
                out.add_term(d, g);
            }
        return out;
    }
    SuperFunction& operator*=(const SuperFunction& o) { return *this = *this * o; }

    friend SuperFunction operator*(const SuperFunction& a, const GrassmannElement& s) {
        SuperFunction out(a.ctx_, a.even_vars_);
        for (const auto& [d, g] : a.terms_) out.add_term(d, g * s);
        return out;
    }
    friend SuperFunction operator*(const SuperFunction& a, const Rational& s) {
        SuperFunction out(a.ctx_, a.even_vars_);
        if (s != 0)
            for (const auto& [d, g] : a.terms_) out.add_term(d, g * s);
        return out;
    }

    bool operator==(const SuperFunction& o) const { return terms_ == o.terms_; }
    bool operator!=(const SuperFunction& o) const { return !(*this == o); }

    /// Antiderivative in x_j vanishing at 0.
    SuperFunction integrate_even(unsigned j) const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) {
            Multidegree e = d;
            e[j] += 1;
            out.add_term(e, g * Rational(1, e[j]));
        }
        return out;
    }

    /// Evaluate one even variable at a rational value.
    SuperFunction eval_even(unsigned j, const Rational& value) const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) {
            Rational pw(1);
            for (unsigned k = 0; k < d[j]; ++k) pw *= value;
            Multidegree e = d;
            e[j] = 0;
            out.add_term(e, g * pw);
        }
        return out;
    }

    /// Substitute x_j -> a + b x_j (used for path reparametrization).
    SuperFunction affine_substitute(unsigned j, const Rational& a, const Rational& b) const {
        SuperFunction out(ctx_, even_vars_);
        SuperFunction lin = SuperFunction::constant(GrassmannElement(ctx_, a), even_vars_) +
                            SuperFunction::coordinate(ctx_, even_vars_, j) * b;
        for (const auto& [d, g] : terms_) {
            SuperFunction term = SuperFunction::constant(g, even_vars_);
            for (unsigned k = 0; k < d[j]; ++k) term = term * lin;
            Multidegree e = d;
            e[j] = 0;
            SuperFunction shifted(ctx_, even_vars_);
            for (const auto& [dd, gg] : term.terms()) {
                Multidegree f2 = dd;
                for (std::size_t i = 0; i < f2.size(); ++i)
                    if (i != j) f2[i] += e[i];
                shifted.add_term(f2, gg);
            }
            out += shifted;
        }
        return out;
    }

    /// d/dx_j, the plain polynomial derivative.
    SuperFunction d_even(unsigned j) const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) {
            if (d[j] == 0) continue;
            Multidegree e = d;
            e[j] -= 1;
            out.add_term(e, g * Rational(d[j]));
        }
        return out;
    }

    /// Left derivative by an odd generator (global index into the context).
    SuperFunction d_odd(unsigned gen) const {
        SuperFunction out(ctx_, even_vars_);
        for (const auto& [d, g] : terms_) out.add_term(d, g.left_partial(gen));
        return out;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string s;
        for (const auto& [d, g] : terms_) {
            if (!s.empty()) s += " + ";
            s += "(" + g.str() + ")";
            for (std::size_t j = 0; j < d.size(); ++j)
                if (d[j]) {
                    s += "*x" + std::to_string(j + 1);
                    if (d[j] > 1) s += "^" + std::to_string(d[j]);
                }
        }
        return s;
    }

private:
    void adopt(const SuperFunction& o) {
        if (!ctx_) {
            ctx_ = o.ctx_;
            even_vars_ = o.even_vars_;
        }
    }

    ContextPtr ctx_;
    unsigned even_vars_ = 0;
    std::map<Multidegree, GrassmannElement> terms_;
};

} // namespace shol
