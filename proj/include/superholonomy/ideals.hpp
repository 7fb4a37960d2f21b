#pragma once

#include <map>

#include "superholonomy/grassmann.hpp"
#include "superholonomy/linalg.hpp"
#include "superholonomy/morphism.hpp"

namespace shol {

/// Real dimension of the principal ideal (mu), by exact row reduction of the
/// products mu * eta^J over all monomials.
inline std::size_t ideal_dimension(const GrassmannElement& mu) {
    if (mu.is_zero()) return 0;
    const unsigned n = mu.context()->total();
    SpanBasis span;
    const Mask limit = (n >= 64) ? ~Mask(0) : ((Mask(1) << n) - 1);
    for (Mask j = 0;; ++j) {
        GrassmannElement prod = mu * GrassmannElement::monomial(mu.context(), j);
        if (!prod.is_zero()) {
            SparseRow row;
            for (const auto& [m, c] : prod.terms()) row.emplace_back(m, c);
            span.insert(std::move(row));
        }
        if (j == limit) break;
    }
    return span.dim();
}

/// Closed-form ideal dimension for an odd element whose monomials are pairwise
/// generator-disjoint: 2^{L-1} (1 - prod_J (1 - 2^{1-|J|})).
inline std::size_t esin_koc_dimension(const GrassmannElement& mu) {
    if (mu.is_zero()) return 0;
    Mask used = 0;
    for (const auto& [m, c] : mu.terms()) {
        require(!(used & m), errc::precondition, "monomials must be pairwise disjoint");
        used |= m;
    }
    const unsigned L = mu.context()->total();
    Rational prod(1);
    for (const auto& [m, c] : mu.terms()) {
        const unsigned d = mask_degree(m);
        prod *= Rational(1) - Rational(Integer(2), Integer(1) << d);  // 1 - 2^{1-|J|}
    }
    Rational dim = Rational(Integer(1) << (L - 1)) * (Rational(1) - prod);
    require(boost::multiprecision::denominator(dim) == 1, errc::precondition,
            "dimension formula must be integral");
    return static_cast<std::size_t>(boost::multiprecision::numerator(dim));
}

struct ReplacementResult {
    GrassmannElement mu_prime;
    ContextPtr context;                 // algebra of mu_prime
    std::map<Mask, Mask> index_bijection;  // nonzero multiindices of mu -> of mu_prime
    unsigned steps = 0;
};

namespace detail {

/// Lexicographic comparison of sorted index sequences (a strict prefix is
/// smaller than its extensions).
inline bool mask_lex_less(Mask a, Mask b) {
    while (a && b) {
        unsigned ia = static_cast<unsigned>(std::countr_zero(a));
        unsigned ib = static_cast<unsigned>(std::countr_zero(b));
        if (ia != ib) return ia < ib;
        a &= a - 1;
        b &= b - 1;
    }
    return a == 0 && b != 0;
}

} // namespace detail

/// Rewrites an odd mu with dim (mu) >= 2^{L-1} into a mu' with pairwise
/// generator-disjoint monomials, one fresh generator and one substitution
/// per step, keeping a length-preserving bijection of multiindex sets.
inline ReplacementResult replacement_algorithm(const GrassmannElement& mu_in,
                                               bool check_precondition = true) {
    require(mu_in.homogeneous(1), errc::precondition, "mu must be odd");
    if (check_precondition) {
        const unsigned L0 = mu_in.context()->total();
        require(ideal_dimension(mu_in) >= (std::size_t(1) << (L0 - 1)), errc::precondition,
                "dim (mu) >= 2^{L-1} required");
    }

    ReplacementResult res;
    res.context = mu_in.context();
    res.mu_prime = mu_in;
    for (const auto& [m, c] : mu_in.terms()) res.index_bijection[m] = m;

    for (;;) {
        // smallest generator contained in >= 2 monomials
        unsigned j0 = 0;
        bool found = false;
        const unsigned L = res.context->total();
        for (unsigned g = 0; g < L && !found; ++g) {
            unsigned hits = 0;
            for (const auto& [m, c] : res.mu_prime.terms())
                if (m & (Mask(1) << g)) ++hits;
            if (hits >= 2) { j0 = g; found = true; }
        }
        if (!found) break;

        // rewrite the lexicographically largest multiindex containing eta^{j0};
        // any choice is valid, this one reproduces the reference traces
        Mask I = 0;
        bool have = false;
        for (const auto& [m, c] : res.mu_prime.terms()) {
            if (!(m & (Mask(1) << j0))) continue;
            if (!have || detail::mask_lex_less(I, m)) { I = m; have = true; }
        }
        const Rational cI = res.mu_prime.coeff(I);

        ContextPtr bigger = single_family_context(L + 1,
                                                  res.context->families().front().name);
        GrassmannElement mu(bigger);
        for (const auto& [m, c] : res.mu_prime.terms()) mu.add_term(m, c);

        // eta^I = eta^{j0} * r
        GrassmannElement r = GrassmannElement::monomial(bigger, I).left_partial(j0);
        GrassmannElement fresh = GrassmannElement::generator(bigger, L);
        GrassmannElement mu_hat = mu + fresh * (r * cI);

        // automorphism eta^{L+1} -> eta^{L+1} - eta^{j0}
        std::vector<GrassmannElement> images;
        for (unsigned g = 0; g < L; ++g) images.push_back(GrassmannElement::generator(bigger, g));
        images.push_back(fresh - GrassmannElement::generator(bigger, j0));
        GrassmannMorphism phi(bigger, bigger, std::move(images));
        mu = phi.apply(mu_hat);

        // I loses eta^{j0}, gains the fresh generator; everything else is fixed
        Mask I_new = (I & ~(Mask(1) << j0)) | (Mask(1) << L);
        for (auto& [orig, cur] : res.index_bijection)
            if (cur == I) cur = I_new;

        res.context = bigger;
        res.mu_prime = mu;
        ++res.steps;
    }
    return res;
}

/// Brute-force freeness oracle for the target of a Grassmann morphism as a
/// module over the source: the target is free iff the span of the generator
/// images times all monomials has dimension 2^m - 2^{m-n}  (Nakayama count).
inline std::size_t augmentation_ideal_dimension(const GrassmannMorphism& phi) {
    const unsigned m = phi.target()->total();
    SpanBasis span;
    const Mask limit = (m >= 64) ? ~Mask(0) : ((Mask(1) << m) - 1);
    for (unsigned i = 0; i < phi.source()->total(); ++i) {
        const GrassmannElement& im = phi.image(i);
        if (im.is_zero()) continue;
        for (Mask j = 0;; ++j) {
            GrassmannElement prod = im * GrassmannElement::monomial(phi.target(), j);
            if (!prod.is_zero()) {
                SparseRow row;
                for (const auto& [mm, c] : prod.terms()) row.emplace_back(mm, c);
                span.insert(std::move(row));
            }
            if (j == limit) break;
        }
    }
    return span.dim();
}

inline bool module_free_brute_force(const GrassmannMorphism& phi) {
    const unsigned n = phi.source()->total();
    const unsigned m = phi.target()->total();
    if (n > m) return false;
    const std::size_t expect = (std::size_t(1) << m) - (std::size_t(1) << (m - n));
    return augmentation_ideal_dimension(phi) == expect;
}

} // namespace shol
