#pragma once

#include <functional>
#include <vector>

#include "superholonomy/holonomy.hpp"
#include "superholonomy/ideals.hpp"

namespace shol {

// ---------------------------------------------------------------------------
// Appendix-level operations on plain Grassmann-algebra morphisms.
// ---------------------------------------------------------------------------

/// Submersion of superpoints: the linear part at the topological point has
/// full rank (= source dimension).
inline bool is_submersion(const GrassmannMorphism& phi) {
    return rank_dense(phi.linear_part()) == phi.source()->total();
}

/// Freeness of the target over a one-generator source: dim (mu) >= 2^{L-1}
/// with mu the generator image; equality holds whenever the bound does.
inline bool is_free_rank1(const GrassmannMorphism& phi) {
    require(phi.source()->total() == 1, errc::precondition, "source must have one generator");
    const unsigned l = phi.target()->total();
    std::size_t dim = ideal_dimension(phi.image(0));
    if (dim < (std::size_t(1) << (l - 1))) return false;
    require(dim == (std::size_t(1) << (l - 1)), errc::precondition,
            "free rank-1 ideals have dimension exactly 2^{L-1}");
    return true;
}

/// One-generator restrictions phi . pi_{j...}: keep only source generator i.
inline GrassmannMorphism rank1_restriction(const GrassmannMorphism& phi, unsigned i) {
    auto src = single_family_context(1, phi.source()->families().front().name);
    return GrassmannMorphism(src, phi.target(), {phi.image(i)});
}

struct EquivalenceAudit {
    bool submersion = false;
    bool free_module = false;                  // brute-force Nakayama count
    std::vector<bool> restrictions_free;       // per source generator
    bool consistent() const {
        if (submersion != free_module) return false;
        if (free_module)
            for (bool f : restrictions_free)
                if (!f) return false;
        return true;
    }
};

/// Submersion vs freeness, computed independently; multi-generator sources are
/// additionally audited through their rank-1 restrictions.
inline EquivalenceAudit equivalence_audit(const GrassmannMorphism& phi) {
    EquivalenceAudit audit;
    audit.submersion = is_submersion(phi);
    audit.free_module = module_free_brute_force(phi);
    for (unsigned i = 0; i < phi.source()->total(); ++i)
        audit.restrictions_free.push_back(is_free_rank1(rank1_restriction(phi, i)));
    return audit;
}

/// Real matrix of a morphism on the monomial basis of a generator subset.
inline DenseMatrix morphism_matrix_masked(const GrassmannMorphism& phi,
                                          const std::vector<unsigned>& gens) {
    const std::size_t n = std::size_t(1) << gens.size();
    Mask allowed = 0;
    for (unsigned g : gens) allowed |= Mask(1) << g;
    auto pack = [&](Mask m) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < gens.size(); ++k)
            if (m & (Mask(1) << gens[k])) idx |= std::size_t(1) << k;
        return idx;
    };
    DenseMatrix out(n, std::vector<Rational>(n, 0));
    for (std::size_t col = 0; col < n; ++col) {
        Mask m = 0;
        for (std::size_t k = 0; k < gens.size(); ++k)
            if (col & (std::size_t(1) << k)) m |= Mask(1) << gens[k];
        GrassmannElement im = phi.apply(GrassmannElement::monomial(phi.source(), m));
        for (const auto& [mm, c] : im.terms()) {
            require((mm & ~allowed) == 0, errc::precondition, "morphism leaves the block");
            out[pack(mm)][col] += c;
        }
    }
    return out;
}

/// Inverse of an automorphism that fixes everything outside `gens`.
inline GrassmannMorphism invert_automorphism(const GrassmannMorphism& phi,
                                             const std::vector<unsigned>& gens) {
    auto inv = invert_dense(morphism_matrix_masked(phi, gens));
    require(inv.has_value(), errc::not_invertible, "not an automorphism");
    const ContextPtr& ctx = phi.source();
    std::vector<GrassmannElement> images;
    for (unsigned g = 0; g < ctx->total(); ++g)
        images.push_back(GrassmannElement::generator(ctx, g));
    for (std::size_t k = 0; k < gens.size(); ++k) {
        GrassmannElement im(ctx);
        const std::size_t col = std::size_t(1) << k;  // the generator's basis index
        for (std::size_t row = 0; row < inv->size(); ++row) {
            if ((*inv)[row][col] == 0) continue;
            Mask m = 0;
            for (std::size_t kk = 0; kk < gens.size(); ++kk)
                if (row & (std::size_t(1) << kk)) m |= Mask(1) << gens[kk];
            im.add_term(m, (*inv)[row][col]);
        }
        images[gens[k]] = im;
    }
    return GrassmannMorphism(ctx, ctx, std::move(images));
}

/// Straightening data of a submersion: an automorphism beta of the target
/// with beta(gen_k) = phi(gen_k) for the source generators, completed by
/// standard generators.
inline GrassmannMorphism straighten(const GrassmannMorphism& phi) {
    require(is_submersion(phi), errc::not_submersion, "straighten needs a submersion");
    const ContextPtr& tgt = phi.target();
    const unsigned l = phi.source()->total();
    const unsigned m = tgt->total();

    std::vector<GrassmannElement> images;
    DenseMatrix lin;
    for (unsigned i = 0; i < l; ++i) {
        images.push_back(phi.image(i));
        std::vector<Rational> row(m, 0);
        for (const auto& [mask, c] : phi.image(i).terms())
            if (mask_degree(mask) == 1) row[std::countr_zero(mask)] = c;
        lin.push_back(std::move(row));
    }
    for (unsigned g = 0; g < m && images.size() < m; ++g) {
        DenseMatrix trial = lin;
        std::vector<Rational> row(m, 0);
        row[g] = 1;
        trial.push_back(row);
        if (rank_dense(trial) > lin.size()) {
            lin = std::move(trial);
            images.push_back(GrassmannElement::generator(tgt, g));
        }
    }
    require(images.size() == m, errc::not_submersion, "completion failed");
    return GrassmannMorphism(tgt, tgt, std::move(images));
}

struct FibredProduct {
    ContextPtr context;       // product superpoint algebra
    GrassmannMorphism pr1;    // from the target of phi1
    GrassmannMorphism pr2;    // from the target of phi2
};

/// Fibred product of superpoints over the common base, for phi1 a submersion:
/// dimension L1 + L2 - L, with pr2 the plain projection.
inline FibredProduct fibred_product(const GrassmannMorphism& phi1,
                                    const GrassmannMorphism& phi2) {
    require(is_submersion(phi1), errc::not_submersion, "first leg must be a submersion");
    const unsigned l = phi1.source()->total();
    const unsigned l1 = phi1.target()->total();
    const unsigned l2 = phi2.target()->total();
    ContextPtr prod = single_family_context(l2 + l1 - l);

    GrassmannMorphism beta = straighten(phi1);
    std::vector<unsigned> all;
    for (unsigned g = 0; g < l1; ++g) all.push_back(g);
    GrassmannMorphism beta_inv = invert_automorphism(beta, all);

    // embed the second factor on the first l2 product generators
    std::vector<GrassmannElement> emb2;
    for (unsigned g = 0; g < l2; ++g) emb2.push_back(GrassmannElement::generator(prod, g));
    GrassmannMorphism pr2(phi2.target(), prod, emb2);

    // straightened coordinates of the first factor: base part goes through
    // phi2, the fibre part onto fresh product generators
    std::vector<GrassmannElement> prime_images;
    for (unsigned i = 0; i < l1; ++i) {
        if (i < l) prime_images.push_back(pr2.apply(phi2.image(i)));
        else prime_images.push_back(GrassmannElement::generator(prod, l2 + (i - l)));
    }
    GrassmannMorphism pr1_prime(phi1.target(), prod, prime_images);
    GrassmannMorphism pr1 = beta_inv.then(pr1_prime);
    return FibredProduct{prod, pr1, pr2};
}

// ---------------------------------------------------------------------------
// Sheaf gluing for subfunctors of gl^S, over the combined (etaS, etaT)
// context of a patch.
// ---------------------------------------------------------------------------

/// Morphism of superpoints recorded inside the patch context: images of the
/// base etaT generators, etaT-pure and supported on the first `target_dim`
/// etaT generators.
struct PointedMorphism {
    unsigned source_dim = 0;
    unsigned target_dim = 0;
    std::vector<GrassmannElement> images;

    void validate(const PatchPtr& patch) const {
        require(images.size() == source_dim, errc::precondition, "one image per base generator");
        Mask allowed = 0;
        for (unsigned i = 1; i <= target_dim; ++i)
            allowed |= Mask(1) << patch->context()->index_of("etaT", i);
        for (const auto& im : images) {
            require(im.homogeneous(1), errc::parity_error, "images must be odd");
            for (const auto& [m, c] : im.terms())
                require((m & ~allowed) == 0, errc::precondition,
                        "image outside the target block");
        }
    }

    /// Patch-context endomorphism: etaS and th fixed, base etaT generators
    /// mapped to their images, spare etaT generators to zero.
    GrassmannMorphism endo(const PatchPtr& patch) const {
        const ContextPtr& ctx = patch->context();
        std::vector<GrassmannElement> full;
        for (unsigned g = 0; g < ctx->total(); ++g)
            full.push_back(GrassmannElement::generator(ctx, g));
        for (unsigned k = 0; k < patch->t_capacity(); ++k) {
            unsigned g = ctx->index_of("etaT", k + 1);
            full[g] = (k < source_dim) ? images[k] : GrassmannElement(ctx);
        }
        return GrassmannMorphism(ctx, ctx, std::move(full));
    }

    /// Standalone single-family copy for the appendix-level predicates.
    GrassmannMorphism standalone(const PatchPtr& patch) const {
        auto src = single_family_context(source_dim, "th");
        auto dst = single_family_context(target_dim);
        const unsigned offset = patch->context()->family("etaT").offset;
        std::vector<GrassmannElement> ims;
        for (const auto& im : images) {
            GrassmannElement e(dst);
            for (const auto& [m, c] : im.terms()) e.add_term(m >> offset, c);
            ims.push_back(e);
        }
        return GrassmannMorphism(src, dst, std::move(ims));
    }
};

struct SheafCover {
    PatchPtr patch;
    unsigned base_dim = 0;
    std::vector<PointedMorphism> elements;

    void validate() const {
        require(!elements.empty(), errc::precondition, "cover must be nonempty");
        for (const auto& e : elements) {
            require(e.source_dim == base_dim, errc::precondition, "cover base mismatch");
            e.validate(patch);
            require(is_submersion(e.standalone(patch)), errc::not_submersion,
                    "cover morphisms must be submersions");
        }
    }
};

/// Unique descent of a compatible family of sections: each section must be
/// independent of the fibre coordinates of its cover element (NoDescent
/// otherwise, detected on the self-product), and all base candidates must
/// agree (Incompatible otherwise).  The result is verified by pullback and
/// through the membership predicate of the subfunctor.
inline GMatrix glue_sections(
    const SheafCover& cover, const std::vector<GMatrix>& sections,
    const std::function<bool(const GMatrix&, unsigned target_dim)>& member) {
    cover.validate();
    require(sections.size() == cover.elements.size(), errc::precondition,
            "one section per cover element");
    const PatchPtr& patch = cover.patch;
    const ContextPtr& ctx = patch->context();

    std::optional<GMatrix> base;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        const PointedMorphism& pm = cover.elements[i];
        require(member(sections[i], pm.target_dim), errc::precondition,
                "section outside the subfunctor");

        // straighten within the etaT block of the element
        GrassmannMorphism beta = [&] {
            std::vector<GrassmannElement> full;
            for (unsigned g = 0; g < ctx->total(); ++g)
                full.push_back(GrassmannElement::generator(ctx, g));
            DenseMatrix lin;
            std::vector<unsigned> tgens;
            for (unsigned k = 1; k <= pm.target_dim; ++k)
                tgens.push_back(ctx->index_of("etaT", k));
            for (unsigned k = 0; k < pm.source_dim; ++k) {
                std::vector<Rational> row(tgens.size(), 0);
                for (const auto& [m, c] : pm.images[k].terms())
                    if (mask_degree(m) == 1)
                        for (std::size_t g = 0; g < tgens.size(); ++g)
                            if (m == (Mask(1) << tgens[g])) row[g] = c;
                lin.push_back(std::move(row));
                full[tgens[k]] = pm.images[k];
            }
            std::size_t have = pm.source_dim;
            for (std::size_t g = 0; g < tgens.size() && have < tgens.size(); ++g) {
                DenseMatrix trial = lin;
                std::vector<Rational> row(tgens.size(), 0);
                row[g] = 1;
                trial.push_back(row);
                if (rank_dense(trial) > lin.size()) {
                    lin = std::move(trial);
                    full[tgens[have]] = GrassmannElement::generator(ctx, tgens[g]);
                    ++have;
                }
            }
            require(have == tgens.size(), errc::not_submersion, "straightening failed");
            return GrassmannMorphism(ctx, ctx, std::move(full));
        }();

        std::vector<unsigned> tgens;
        for (unsigned k = 1; k <= pm.target_dim; ++k)
            tgens.push_back(ctx->index_of("etaT", k));
        GrassmannMorphism beta_inv = invert_automorphism(beta, tgens);

        // fibre generators in the straightened coordinates
        Mask fibre = 0;
        for (unsigned k = cover.base_dim + 1; k <= pm.target_dim; ++k)
            fibre |= Mask(1) << ctx->index_of("etaT", k);

        GMatrix candidate = gmatrix_zero(sections[i].shape(), ctx);
        for (unsigned r = 0; r < candidate.dim(); ++r)
            for (unsigned c = 0; c < candidate.dim(); ++c) {
                GrassmannElement e = beta_inv.apply(sections[i].at(r, c));
                require(!e.involves(fibre), errc::no_descent,
                        "section depends on the fibre coordinates");
                candidate.at(r, c) = e;
            }
        if (!base) {
            base = candidate;
        } else {
            require(*base == candidate, errc::incompatible,
                    "cover sections do not agree on overlaps");
        }
    }

    // verification by pullback
    for (std::size_t i = 0; i < sections.size(); ++i) {
        GrassmannMorphism phi = cover.elements[i].endo(patch);
        GMatrix back = gmatrix_zero(base->shape(), ctx);
        for (unsigned r = 0; r < back.dim(); ++r)
            for (unsigned c = 0; c < back.dim(); ++c)
                back.at(r, c) = phi.apply(base->at(r, c));
        require(back == sections[i], errc::incompatible, "pullback verification failed");
    }
    require(member(*base, cover.base_dim), errc::incompatible,
            "glued section leaves the subfunctor");
    return *base;
}

struct SheafAuditReport {
    bool holonomy_membership_glues = false;
    bool galaev_span_glues = false;
    bool corrupted_family_rejected = false;
    bool verdict() const {
        return holonomy_membership_glues && galaev_span_glues && corrupted_family_rejected;
    }
};

/// Runs the descent checks for both subfunctors: sampled holonomy transports
/// and the (hol^Gal (x) O_T)-span, over the given cover, plus one corrupted
/// family as a negative control.
inline SheafAuditReport sheaf_audit_holonomy(const HolonomyModel& model, const SampleSpec& spec,
                                             const SheafCover& cover) {
    cover.validate();
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    SheafAuditReport rep;

    // --- Hol_x membership: pulled-back transports glue back to the original.
    {
        PathModel loop = constant_path(model.base);
        // a nontrivial loop over the base superpoint
        for (const auto& path : sample_paths(model, spec, cover.base_dim, model.base))
            if (path.end() == model.base) loop = path;
        TransportOperator p = parallel_transport(model.conn, loop);

        std::vector<GMatrix> sections;
        for (const auto& pm : cover.elements) {
            GrassmannMorphism phi = pm.endo(patch);
            GMatrix a = gmatrix_zero(p.matrix.shape(), ctx);
            for (unsigned r = 0; r < a.dim(); ++r)
                for (unsigned c = 0; c < a.dim(); ++c)
                    a.at(r, c) = phi.apply(p.matrix.at(r, c));
            sections.push_back(std::move(a));
        }

        auto member = [&](const GMatrix& a, unsigned target_dim) {
            // membership in the sampled holonomy: a equals the transport of a
            // pushed sample path (functoriality of Hol_x)
            for (const auto& pm : cover.elements) {
                if (pm.target_dim != target_dim) continue;
                PathModel q = loop;
                GrassmannMorphism e = pm.endo(patch);
                for (auto& seg : q.segments)
                    for (auto& f : seg.coords) {
                        SuperFunction g(ctx, 1);
                        for (const auto& [deg, coeff] : f.terms())
                            g.add_term(deg, e.apply(coeff));
                        f = g;
                    }
                if (parallel_transport(model.conn, q).matrix == a) return true;
            }
            if (target_dim == cover.base_dim &&
                parallel_transport(model.conn, loop).matrix == a)
                return true;
            return false;
        };

        try {
            GMatrix glued = glue_sections(cover, sections, member);
            rep.holonomy_membership_glues = glued == p.matrix;
        } catch (const error&) {
            rep.holonomy_membership_glues = false;
        }
    }

    // --- Galaev-span membership.
    {
        LieSubalgebra hol_gal = galaev_algebra(model, spec);
        GMatrix seed = gmatrix_zero(model.bundle(), ctx);
        if (hol_gal.dim() > 0) {
            seed = hol_gal.basis().front();
            auto p = seed.parity();
            Mask tmask = detail::t_mask_upto(patch, cover.base_dim);
            // dress with a T-monomial of matching parity to get an even section
            for (Mask m : family_monomials(ctx, tmask)) {
                if (p && ((*p + mask_parity(m)) & 1u) != 0) continue;
                GMatrix dressed = seed.scaled_right(GrassmannElement::monomial(ctx, m));
                if (!dressed.is_zero()) {
                    seed = dressed;
                    break;
                }
            }
        }

        auto member = [&](const GMatrix& a, unsigned target_dim) {
            if (a.is_zero()) return true;
            SpanBasis span = module_span(
                hol_gal.basis(), ctx,
                patch->s_mask() | detail::t_mask_upto(patch, target_dim), -1);
            return span.contains(flatten(a, ctx));
        };

        std::vector<GMatrix> sections;
        for (const auto& pm : cover.elements) {
            GrassmannMorphism phi = pm.endo(patch);
            GMatrix a = gmatrix_zero(seed.shape(), ctx);
            for (unsigned r = 0; r < a.dim(); ++r)
                for (unsigned c = 0; c < a.dim(); ++c) a.at(r, c) = phi.apply(seed.at(r, c));
            sections.push_back(std::move(a));
        }
        try {
            GMatrix glued = glue_sections(cover, sections, member);
            rep.galaev_span_glues = glued == seed;
        } catch (const error&) {
            rep.galaev_span_glues = false;
        }
    }

    // --- Negative control: perturb one section by a fibre term.
    {
        GMatrix seed = gmatrix_identity(model.bundle(), ctx);
        std::vector<GMatrix> sections;
        for (const auto& pm : cover.elements) {
            GrassmannMorphism phi = pm.endo(patch);
            GMatrix a = gmatrix_zero(seed.shape(), ctx);
            for (unsigned r = 0; r < a.dim(); ++r)
                for (unsigned c = 0; c < a.dim(); ++c) a.at(r, c) = phi.apply(seed.at(r, c));
            sections.push_back(std::move(a));
        }
        bool corrupted_ok = false;
        const PointedMorphism& pm0 = cover.elements.front();
        if (pm0.target_dim > cover.base_dim) {
            // genuine fibre dependence
            unsigned g = ctx->index_of("etaT", pm0.target_dim);
            sections.front().at(0, 0) += GrassmannElement::generator(ctx, g) *
                                         GrassmannElement::generator(ctx, "etaS", 1);
            try {
                glue_sections(cover, sections, [](const GMatrix&, unsigned) { return true; });
            } catch (const error& e) {
                corrupted_ok = e.code() == errc::no_descent || e.code() == errc::incompatible;
            }
        } else if (cover.elements.size() > 1) {
            sections.front().at(0, 0) +=
                GrassmannElement::generator(ctx, "etaS", 1) *
                GrassmannElement::generator(ctx, "etaS", 2);
            try {
                glue_sections(cover, sections, [](const GMatrix&, unsigned) { return true; });
            } catch (const error& e) {
                corrupted_ok = e.code() == errc::incompatible;
            }
        }
        rep.corrupted_family_rejected = corrupted_ok;
    }
    return rep;
}

} // namespace shol
