#pragma once

#include <map>
#include <vector>

#include "superholonomy/connection.hpp"

namespace shol {

/// S- or SxT-point of the patch: one Grassmann value per coordinate, even
/// coordinates getting even elements with rational body, odd ones odd
/// elements.  Values free of the etaT family describe plain S-points.
struct SPoint {
    PatchPtr patch;
    std::vector<GrassmannElement> images;  // indexed by coordinate

    SPoint() = default;

    explicit SPoint(PatchPtr p) : patch(std::move(p)) {
        images.assign(patch->coord_count(), GrassmannElement(patch->context()));
    }

    static SPoint origin(PatchPtr p) { return SPoint(std::move(p)); }

    void validate() const {
        for (unsigned a = 0; a < images.size(); ++a) {
            require(images[a].homogeneous(patch->coord_parity(a)), errc::parity_error,
                    "point image parity at " + patch->coord_name(a));
            if (patch->coord_parity(a) == 0)
                require(images[a].body() == images[a].coeff(0), errc::parity_error,
                        "even image body");
        }
    }

    bool uses_t() const {
        Mask t = patch->t_mask();
        for (const auto& g : images)
            if (g.involves(t)) return true;
        return false;
    }

    /// Forget the etaT part (the underlying S-point of an SxT-point).
    SPoint underlying_s() const {
        SPoint out = *this;
        Mask t = patch->t_mask();
        for (auto& g : out.images) g = g.project_away(t);
        return out;
    }

    bool operator==(const SPoint& o) const { return images == o.images; }
};

/// Substitute coordinate values into a superfunction.  The odd-coordinate
/// images may depend on a parameter variable (they are SuperFunctions with
/// `param_vars` even variables); the result lives over the same parameters.
/// S/T generators pass through untouched.
inline SuperFunction substitute(const SuperFunction& f,
                                const std::vector<SuperFunction>& even_images,
                                const std::vector<SuperFunction>& odd_images,
                                const PatchPtr& patch, unsigned param_vars) {
    const ContextPtr& ctx = patch->context();
    const Mask th = patch->th_mask();
    SuperFunction out(ctx, param_vars);
    for (const auto& [deg, g] : f.terms()) {
        // even part: product of substituted coordinate powers
        SuperFunction xpart = SuperFunction::constant(GrassmannElement(ctx, Rational(1)),
                                                      param_vars);
        for (unsigned j = 0; j < deg.size(); ++j)
            for (unsigned k = 0; k < deg[j]; ++k) xpart = xpart * even_images[j];
        // Grassmann part: split each monomial as (S/T part) * (theta part)
        for (const auto& [mask, coeff] : g.terms()) {
            Mask st = mask & ~th;
            Mask thpart = mask & th;
            Rational c = coeff;
            if (merge_sign(st, thpart) < 0) c = -c;
            SuperFunction term =
                SuperFunction::constant(GrassmannElement::monomial(ctx, st, c), param_vars);
            Mask rest = thpart;
            while (rest && !term.is_zero()) {
                unsigned pos = static_cast<unsigned>(std::countr_zero(rest));
                rest &= rest - 1;
                const auto& fam = ctx->family("th");
                term = term * odd_images[pos - fam.offset];
            }
            out += xpart * term;
        }
    }
    return out;
}

/// Pull back a function along a point: substitute the coordinate images.
inline GrassmannElement pull_back(const SuperFunction& f, const SPoint& x) {
    const PatchPtr& patch = x.patch;
    std::vector<SuperFunction> even_images, odd_images;
    for (unsigned a = 0; a < patch->coord_count(); ++a) {
        SuperFunction c = SuperFunction::constant(x.images[a], 0);
        if (patch->coord_parity(a) == 0) even_images.push_back(c);
        else odd_images.push_back(c);
    }
    return substitute(f, even_images, odd_images, patch, 0).constant_coefficient();
}

inline GMatrix pull_back(const FMatrix& m, const SPoint& x) {
    GMatrix out = gmatrix_zero(m.shape(), x.patch->context());
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c) out.at(r, c) = pull_back(m.at(r, c), x);
    return out;
}

/// The SxT-point over q whose eta-derivatives realize covariant derivatives:
/// theta^i picks up eta^i, and each x^j a sum of k fresh eta-pairs.
inline SPoint special_point(const SPoint& q, unsigned k) {
    const PatchPtr& patch = q.patch;
    const unsigned d0 = patch->even_dim(), d1 = patch->odd_dim();
    const unsigned need = d1 + k * 2 * d0;
    require(need <= patch->t_capacity(), errc::t_too_small,
            "special point needs T dimension >= " + std::to_string(need));
    const ContextPtr& ctx = patch->context();
    SPoint y = q;
    for (unsigned i = 1; i <= d1; ++i)
        y.images[d0 + i - 1] += GrassmannElement::generator(ctx, "etaT", i);
    for (unsigned j = 1; j <= d0; ++j)
        for (unsigned n = 0; n < k; ++n) {
            unsigned i1 = d1 + n * 2 * d0 + 2 * j - 1;
            y.images[j - 1] += GrassmannElement::generator(ctx, "etaT", i1) *
                               GrassmannElement::generator(ctx, "etaT", i1 + 1);
        }
    return y;
}

/// Product of the second pair members swallowed by k covariant x-derivatives.
inline GrassmannElement special_point_cofactor(const PatchPtr& patch, unsigned k) {
    const unsigned d0 = patch->even_dim(), d1 = patch->odd_dim();
    GrassmannElement out(patch->context(), Rational(1));
    for (unsigned n = 0; n < k; ++n)
        for (unsigned j = 1; j <= d0; ++j)
            out = out * GrassmannElement::generator(patch->context(), "etaT",
                                                    d1 + n * 2 * d0 + 2 * j);
    return out;
}

} // namespace shol
