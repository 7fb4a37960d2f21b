#pragma once

#include <memory>

#include "superholonomy/superfunction.hpp"
#include "superholonomy/supermatrix.hpp"

namespace shol {

/// One coordinate chart R^{p|q} together with the ambient odd generators:
/// etaS (base superpoint S), etaT (functor superpoint capacity), th (odd
/// coordinates of M).  Coordinates are ordered x^1..x^p, th^1..th^q.
class PatchModel {
public:
    PatchModel(unsigned p, unsigned q, unsigned L, unsigned Lcap)
        : p_(p), q_(q), L_(L), Lcap_(Lcap),
          ctx_(make_context({{"etaS", L}, {"etaT", Lcap}, {"th", q}})) {}

    unsigned even_dim() const { return p_; }
    unsigned odd_dim() const { return q_; }
    unsigned coord_count() const { return p_ + q_; }
    unsigned s_dim() const { return L_; }
    unsigned t_capacity() const { return Lcap_; }

    const ContextPtr& context() const { return ctx_; }

    unsigned coord_parity(unsigned a) const { return a < p_ ? 0u : 1u; }

    /// Global generator index of th^{a-p+1} for an odd coordinate a.
    unsigned theta_gen(unsigned a) const {
        require(a >= p_ && a < coord_count(), errc::unknown_symbol, "not an odd coordinate");
        return ctx_->index_of("th", a - p_ + 1);
    }

    std::string coord_name(unsigned a) const {
        return a < p_ ? "x" + std::to_string(a + 1) : "th" + std::to_string(a - p_ + 1);
    }

    Shape tangent_shape() const { return Shape{p_, q_}; }

    Mask s_mask() const { return ctx_->family_mask("etaS"); }
    Mask t_mask() const { return ctx_->family_mask("etaT"); }
    Mask th_mask() const { return ctx_->family_mask("th"); }

    SuperFunction fzero() const { return SuperFunction(ctx_, p_); }
    SuperFunction fconst(const GrassmannElement& g) const {
        return SuperFunction::constant(g, p_);
    }
    SuperFunction fconst(const Rational& r) const {
        return SuperFunction::constant(GrassmannElement(ctx_, r), p_);
    }

    /// x^j (0-based) or th^i as a SuperFunction.
    SuperFunction coord_function(unsigned a) const {
        if (a < p_) return SuperFunction::coordinate(ctx_, p_, a);
        return fconst(GrassmannElement::generator(ctx_, theta_gen(a)));
    }

    /// Coordinate derivative of a function (left derivative for odd ones).
    SuperFunction d_coord(unsigned a, const SuperFunction& f) const {
        return a < p_ ? f.d_even(a) : f.d_odd(theta_gen(a));
    }

private:
    unsigned p_, q_, L_, Lcap_;
    ContextPtr ctx_;
};

using PatchPtr = std::shared_ptr<const PatchModel>;

inline PatchPtr make_patch(unsigned p, unsigned q, unsigned L, unsigned Lcap) {
    return std::make_shared<const PatchModel>(p, q, L, Lcap);
}

using FMatrix = SuperMatrix<SuperFunction>;

inline FMatrix fmatrix_zero(Shape shape, const PatchPtr& patch) {
    return FMatrix(shape, patch->fzero());
}

inline FMatrix fmatrix_identity(Shape shape, const PatchPtr& patch) {
    return FMatrix::identity(shape, patch->fzero(), patch->fconst(Rational(1)));
}

/// Row-parity-signed coordinate derivative of a matrix of functions.
inline FMatrix matrix_partial_fn(const FMatrix& m, unsigned a, const PatchPtr& patch) {
    FMatrix out = fmatrix_zero(m.shape(), patch);
    const bool odd_dir = patch->coord_parity(a) != 0;
    for (unsigned r = 0; r < m.dim(); ++r) {
        bool flip = odd_dir && m.shape().index_parity(r);
        for (unsigned c = 0; c < m.dim(); ++c) {
            SuperFunction d = patch->d_coord(a, m.at(r, c));
            out.at(r, c) = flip ? -d : d;
        }
    }
    return out;
}

} // namespace shol
