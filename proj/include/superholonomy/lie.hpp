#pragma once

#include <deque>
#include <vector>

#include "superholonomy/supermatrix.hpp"

namespace shol {

/// Bracket-closed Q-span of supermatrices, kept as the canonical reduced
/// echelon form of the flattened (cell, monomial) coordinates.  Basis rows are
/// parity-homogeneous because inserted members are.
class LieSubalgebra {
public:
    LieSubalgebra() = default;
    LieSubalgebra(Shape shape, ContextPtr ctx) : shape_(shape), ctx_(std::move(ctx)) {}

    const Shape& shape() const { return shape_; }
    const ContextPtr& context() const { return ctx_; }

    std::size_t dim() const { return span_.dim(); }

    /// Inserts the parity parts of `m`; returns true if the span grew.
    bool insert(const GMatrix& m) {
        bool grew = false;
        for (unsigned p : {0u, 1u}) {
            GMatrix part = m.parity_part(p);
            if (part.is_zero()) continue;
            if (span_.insert(flatten(part, ctx_))) {
                members_.push_back(part);
                grew = true;
            }
        }
        return grew;
    }

    bool contains(const GMatrix& m) const { return span_.contains(flatten(m, ctx_)); }

    bool contains_span(const LieSubalgebra& other) const {
        for (const auto& b : other.basis())
            if (!contains(b)) return false;
        return true;
    }

    /// Canonical echelon basis (independent of insertion order).
    std::vector<GMatrix> basis() const {
        std::vector<GMatrix> out;
        out.reserve(span_.rows().size());
        for (const auto& row : span_.rows()) out.push_back(unflatten(row, shape_, ctx_));
        return out;
    }

    std::pair<std::size_t, std::size_t> graded_dims() const {
        std::size_t even = 0, odd = 0;
        for (const auto& b : basis()) {
            auto p = b.parity();
            if (p && *p == 1) ++odd;
            else ++even;
        }
        return {even, odd};
    }

    /// Close under supercommutators (breadth-first over member pairs).
    void close() {
        std::size_t done = 0;
        while (done < members_.size()) {
            const std::size_t upto = members_.size();
            for (std::size_t i = done; i < upto; ++i)
                for (std::size_t j = 0; j <= i; ++j)
                    insert(supercommutator(members_[i], members_[j]));
            done = upto;
        }
    }

    const SpanBasis& span() const { return span_; }

private:
    Shape shape_;
    ContextPtr ctx_;
    SpanBasis span_;
    std::vector<GMatrix> members_;  // homogeneous insertion witnesses
};

inline LieSubalgebra lie_closure(Shape shape, const ContextPtr& ctx,
                                 const std::vector<GMatrix>& generators) {
    LieSubalgebra alg(shape, ctx);
    for (const auto& g : generators) alg.insert(g);
    alg.close();
    return alg;
}

inline bool span_equal(const LieSubalgebra& a, const LieSubalgebra& b) {
    return a.span() == b.span();
}

/// All monomials of a set of families (masks within the given family masks).
inline std::vector<Mask> family_monomials(const ContextPtr& ctx, Mask within,
                                          int parity = -1) {
    std::vector<Mask> out;
    // iterate over submasks of `within`
    Mask sub = 0;
    for (;;) {
        if (parity < 0 || mask_parity(sub) == unsigned(parity)) out.push_back(sub);
        if (sub == within) break;
        sub = (sub - within) & within;
    }
    return out;
}

/// Span of {basis element * monomial} for every monomial within `within`
/// (optionally parity-filtered on the product).  Used for O-module spans.
inline SpanBasis module_span(const std::vector<GMatrix>& basis, const ContextPtr& ctx,
                             Mask within, int product_parity = -1) {
    SpanBasis span;
    const std::vector<Mask> monos = family_monomials(ctx, within);
    for (const auto& b : basis) {
        auto bp = b.parity();
        for (Mask m : monos) {
            if (product_parity >= 0 && bp &&
                ((*bp + mask_parity(m)) & 1u) != unsigned(product_parity))
                continue;
            GMatrix dressed = b.scaled_right(GrassmannElement::monomial(ctx, m));
            if (!dressed.is_zero()) span.insert(flatten(dressed, ctx));
        }
    }
    return span;
}

} // namespace shol
