#pragma once

#include <random>
#include <vector>

#include "superholonomy/grassmann.hpp"
#include "superholonomy/morphism.hpp"
#include "superholonomy/linalg.hpp"

namespace shol::testing {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}

    int uniform(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(eng);
    }

    Rational rational(int lo = -4, int hi = 4) {
        int num = uniform(lo, hi);
        int den = uniform(1, 3);
        return Rational(num, den);
    }

    Rational nonzero_rational(int lo = -4, int hi = 4) {
        Rational r;
        do { r = rational(lo, hi); } while (r == 0);
        return r;
    }
};

/// Random element with a bounded number of terms; parity -1 means mixed.
inline GrassmannElement random_element(Rng& rng, const ContextPtr& ctx, int parity = -1,
                                       int max_terms = 4) {
    GrassmannElement e(ctx);
    const unsigned n = ctx->total();
    const int terms = rng.uniform(0, max_terms);
    for (int i = 0; i < terms; ++i) {
        Mask m = 0;
        for (unsigned g = 0; g < n; ++g)
            if (rng.uniform(0, 2) == 0) m |= Mask(1) << g;
        if (parity >= 0 && mask_parity(m) != unsigned(parity)) continue;
        e.add_term(m, rng.rational());
    }
    return e;
}

inline GrassmannElement random_homogeneous(Rng& rng, const ContextPtr& ctx, unsigned parity,
                                           int max_terms = 4) {
    for (int tries = 0; tries < 64; ++tries) {
        GrassmannElement e = random_element(rng, ctx, int(parity), max_terms);
        if (!e.is_zero()) return e;
    }
    return GrassmannElement(ctx);
}

/// Random Grassmann automorphism: invertible linear part plus odd junk.
inline GrassmannMorphism random_automorphism(Rng& rng, const ContextPtr& ctx) {
    const unsigned n = ctx->total();
    for (;;) {
        DenseMatrix lin(n, std::vector<Rational>(n, 0));
        for (unsigned i = 0; i < n; ++i)
            for (unsigned j = 0; j < n; ++j) lin[i][j] = Rational(rng.uniform(-2, 2));
        if (rank_dense(lin) != n) continue;
        std::vector<GrassmannElement> images;
        for (unsigned i = 0; i < n; ++i) {
            GrassmannElement im(ctx);
            for (unsigned j = 0; j < n; ++j)
                if (lin[j][i] != 0) im += GrassmannElement::generator(ctx, j) * lin[j][i];
            // occasional cubic term keeps the soul nontrivial
            if (n >= 3 && rng.uniform(0, 1) == 0) {
                Mask m = 0;
                while (mask_degree(m) != 3) {
                    m = 0;
                    for (unsigned g = 0; g < n; ++g)
                        if (rng.uniform(0, 1) == 0) m |= Mask(1) << g;
                }
                im += GrassmannElement::monomial(ctx, m, rng.rational());
            }
            images.push_back(im);
        }
        return GrassmannMorphism(ctx, ctx, std::move(images));
    }
}

} // namespace shol::testing
