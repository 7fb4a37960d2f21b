#pragma once

#include <functional>
#include <string>

#include "superholonomy/superfunction.hpp"

namespace shol {

struct SourcePos {
    unsigned line = 1;
    unsigned column = 1;
};

/// Symbol resolution hook: maps an identifier to a value, or nothing.
using SymbolResolver = std::function<std::optional<SuperFunction>(const std::string&)>;

namespace detail {

struct ExprParser {
    std::string_view text;
    std::size_t pos = 0;
    SourcePos at;
    const SymbolResolver& resolve;

    explicit ExprParser(std::string_view t, const SymbolResolver& r, SourcePos start)
        : text(t), at(start), resolve(r) {}

    [[noreturn]] void syntax(const std::string& what) {
        fail(errc::syntax_error, what + " at line " + std::to_string(at.line) + ", column " +
                                     std::to_string(at.column));
    }

    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (pos < text.size() && text[pos] == '\n') {
                ++at.line;
                at.column = 1;
            } else {
                ++at.column;
            }
            ++pos;
        }
    }

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) advance(1);
    }

    bool peek(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    bool eat(char c) {
        if (!peek(c)) return false;
        advance(1);
        return true;
    }

    SuperFunction parse_expr() {
        SuperFunction acc = parse_term();
        for (;;) {
            if (eat('+')) acc += parse_term();
            else if (eat('-')) acc -= parse_term();
            else return acc;
        }
    }

    SuperFunction parse_term() {
        SuperFunction acc = parse_factor();
        while (peek('*')) {
            eat('*');
            acc = acc * parse_factor();
        }
        return acc;
    }

    SuperFunction parse_factor() {
        skip_ws();
        if (eat('-')) return -parse_factor();
        if (eat('+')) return parse_factor();
        if (eat('(')) {
            SuperFunction inner = parse_expr();
            if (!eat(')')) syntax("expected ')'");
            return inner;
        }
        if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
            return parse_number();
        if (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos])))
            return parse_symbol();
        syntax("expected a factor");
    }

    SuperFunction parse_number() {
        Integer num = parse_integer();
        if (peek('/')) {
            SourcePos slash = at;
            eat('/');
            skip_ws();
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
                at = slash;
                syntax("expected a denominator");
            }
            Integer den = parse_integer();
            if (den == 0) syntax("zero denominator");
            return from_rational(Rational(num, den));
        }
        return from_rational(Rational(num));
    }

    Integer parse_integer() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
            advance(1);
        return Integer(std::string(text.substr(start, pos - start)));
    }

    SuperFunction parse_symbol() {
        SourcePos sym_at = at;
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                                     text[pos] == '_'))
            advance(1);
        std::string name(text.substr(start, pos - start));
        auto value = resolve(name);
        if (!value) {
            fail(errc::unknown_symbol, "unknown symbol '" + name + "' at line " +
                                           std::to_string(sym_at.line) + ", column " +
                                           std::to_string(sym_at.column));
        }
        return *value;
    }

    SuperFunction from_rational(const Rational& r) {
        // context comes from the resolver's values; scalars stay abstract
        // until combined, so produce through the resolver's constant hook
        auto value = resolve("__const__" + to_string(r));
        require(value.has_value(), errc::syntax_error, "resolver lacks a constant hook");
        return *value;
    }

    void expect_end() {
        skip_ws();
        if (pos < text.size())
            syntax(std::string("unexpected '") + text[pos] + "'");
    }
};

} // namespace detail

/// Parse an expression over the resolver's symbols.  The resolver must also
/// answer "__const__<p/q>" with the rational constant in its target space.
inline SuperFunction parse_expression(std::string_view text, const SymbolResolver& resolve,
                                      SourcePos start = {}) {
    detail::ExprParser p(text, resolve, start);
    SuperFunction out = p.parse_expr();
    p.expect_end();
    return out;
}

/// What an expression may reference.
struct ResolverMode {
    unsigned even_vars = 0;   // number of even variables of the result
    bool allow_x = false;     // x<j> as coordinates (even_vars = patch even dim)
    bool allow_t = false;     // path parameter (even_vars = 1, slot 0)
    bool allow_theta = true;  // th<j> odd coordinates as generators
    bool eta_alias = false;   // bare eta<j> means etaT<j> (fppf files)
};

inline ResolverMode field_mode(const PatchPtr& patch) {
    return ResolverMode{patch->even_dim(), true, false, true, false};
}
inline ResolverMode path_mode() { return ResolverMode{1, false, true, false, false}; }
inline ResolverMode constant_mode(bool theta = false, bool eta_alias = false) {
    return ResolverMode{0, false, false, theta, eta_alias};
}

/// Resolver for patch-level expressions plus the constant hook.
inline SymbolResolver patch_resolver(const PatchPtr& patch, ResolverMode mode) {
    return [patch, mode](const std::string& name) -> std::optional<SuperFunction> {
        const ContextPtr& ctx = patch->context();
        auto constant = [&](const GrassmannElement& g) {
            return SuperFunction::constant(g, mode.even_vars);
        };
        if (name.rfind("__const__", 0) == 0) {
            std::string lit = name.substr(9);
            auto slash = lit.find('/');
            Rational r = slash == std::string::npos
                             ? Rational(Integer(lit))
                             : Rational(Integer(lit.substr(0, slash)),
                                        Integer(lit.substr(slash + 1)));
            return constant(GrassmannElement(ctx, r));
        }
        auto indexed = [&](const std::string& prefix) -> std::optional<unsigned> {
            if (name.size() <= prefix.size() || name.rfind(prefix, 0) != 0) return std::nullopt;
            unsigned idx = 0;
            for (std::size_t i = prefix.size(); i < name.size(); ++i) {
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
                idx = idx * 10 + unsigned(name[i] - '0');
            }
            return idx;
        };
        if (mode.allow_t && name == "t") return SuperFunction::coordinate(ctx, 1, 0);
        if (auto j = indexed("etaS")) {
            if (*j >= 1 && *j <= patch->s_dim())
                return constant(GrassmannElement::generator(ctx, "etaS", *j));
            return std::nullopt;
        }
        if (auto j = indexed("etaT")) {
            if (*j >= 1 && *j <= patch->t_capacity())
                return constant(GrassmannElement::generator(ctx, "etaT", *j));
            return std::nullopt;
        }
        if (mode.eta_alias) {
            if (auto j = indexed("eta")) {
                if (*j >= 1 && *j <= patch->t_capacity())
                    return constant(GrassmannElement::generator(ctx, "etaT", *j));
                return std::nullopt;
            }
        }
        if (mode.allow_theta) {
            if (auto j = indexed("th")) {
                if (*j >= 1 && *j <= patch->odd_dim())
                    return constant(GrassmannElement::generator(ctx, "th", *j));
                return std::nullopt;
            }
        }
        if (mode.allow_x) {
            if (auto j = indexed("x")) {
                if (*j >= 1 && *j <= patch->even_dim())
                    return SuperFunction::coordinate(ctx, mode.even_vars, *j - 1);
                return std::nullopt;
            }
        }
        return std::nullopt;
    };
}

} // namespace shol
