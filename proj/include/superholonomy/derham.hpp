#pragma once

#include <string>

#include "superholonomy/holonomy.hpp"

namespace shol {

/// Joint kernel { w : h w = 0 for all h } over O_S, as a real span of
/// component vectors (it is an O_S-submodule).
inline std::vector<GVector> joint_kernel(const LieSubalgebra& alg, const PatchPtr& patch) {
    const ContextPtr& ctx = patch->context();
    const Shape shape = alg.shape();
    const unsigned dim = shape.dim();
    std::vector<Mask> monos = family_monomials(ctx, patch->s_mask());
    const std::size_t nvars = std::size_t(dim) * monos.size();

    auto var_index = [&](unsigned c, std::size_t mi) { return std::size_t(c) * monos.size() + mi; };

    // rows: (basis element, output row, output mask)
    std::map<std::tuple<std::size_t, unsigned, Mask>, std::map<std::size_t, Rational>> rows;
    auto basis = alg.basis();
    for (std::size_t h = 0; h < basis.size(); ++h)
        for (unsigned r = 0; r < dim; ++r)
            for (unsigned c = 0; c < dim; ++c)
                for (const auto& [p, coeff] : basis[h].at(r, c).terms())
                    for (std::size_t mi = 0; mi < monos.size(); ++mi) {
                        if (p & monos[mi]) continue;
                        Rational v = coeff;
                        if (merge_sign(p, monos[mi]) < 0) v = -v;
                        rows[{h, r, p | monos[mi]}][var_index(c, mi)] += v;
                    }

    DenseMatrix m;
    for (const auto& [key, entries] : rows) {
        std::vector<Rational> row(nvars, 0);
        for (const auto& [var, v] : entries) row[var] = v;
        m.push_back(std::move(row));
    }

    // the kernel is graded (the basis elements are homogeneous): emit the
    // parity parts of each solution separately
    std::vector<GVector> out;
    for (const auto& sol : SpanBasis::nullspace_dense(m, nvars)) {
        for (unsigned parity : {0u, 1u}) {
            GVector v(shape, parity, ctx);
            bool nonzero = false;
            for (unsigned c = 0; c < dim; ++c)
                for (std::size_t mi = 0; mi < monos.size(); ++mi) {
                    if (sol[var_index(c, mi)] == 0) continue;
                    if (((mask_parity(monos[mi]) + shape.index_parity(c)) & 1u) != parity)
                        continue;
                    v.comps[c].add_term(monos[mi], sol[var_index(c, mi)]);
                    nonzero = true;
                }
            if (nonzero) out.push_back(std::move(v));
        }
    }
    return out;
}

/// Body-independent O_S-generating set extracted from a real span of vectors;
/// empty optional when the span is not a free module over the chosen set.
inline std::optional<std::vector<GVector>> free_module_basis(const std::vector<GVector>& span,
                                                             const PatchPtr& patch) {
    const ContextPtr& ctx = patch->context();
    std::vector<GVector> picked;
    DenseMatrix bodies;
    for (const auto& v : span) {
        DenseMatrix trial = bodies;
        trial.push_back(body_vector(v));
        if (rank_dense(trial) > bodies.size()) {
            bodies = std::move(trial);
            picked.push_back(v);
        }
    }
    SpanBasis module;
    for (const auto& v : picked)
        for (Mask m : family_monomials(ctx, patch->s_mask())) {
            GVector dressed = scale_vector(v, GrassmannElement::monomial(ctx, m));
            if (!dressed.is_zero()) module.insert(flatten(dressed, ctx));
        }
    for (const auto& v : span)
        if (!module.contains(flatten(v, ctx))) return std::nullopt;
    return picked;
}

struct DeRhamWuBlock {
    std::vector<GVector> basis;
    bool invariant = false;
    bool nondegenerate = false;
    bool flat = false;                  // restricted algebra vanishes
    std::string irreducibility;         // verdict with its proxy label
};

struct DeRhamWuReport {
    std::size_t holonomy_dim = 0;
    std::vector<GVector> kernel_basis;  // O_S-basis of the joint kernel
    bool kernel_free = false;
    bool kernel_matches_candidate = false;
    bool block_diagonal = false;
    std::vector<DeRhamWuBlock> blocks;

    bool verdict() const {
        if (!block_diagonal) return false;
        for (const auto& b : blocks)
            if (!b.invariant || !b.nondegenerate) return false;
        return true;
    }
};

namespace detail {

/// Finite lattice of subspaces generated by kernels and images of the
/// coefficient matrices of the (restricted) algebra, closed under + and cap.
inline std::vector<DenseMatrix> body_subspace_lattice(const std::vector<GMatrix>& basis,
                                                      unsigned dim) {
    auto echelon = [&](DenseMatrix rows) {
        SpanBasis b;
        for (auto& r : rows) {
            SparseRow sr;
            for (unsigned i = 0; i < dim; ++i)
                if (r[i] != 0) sr.emplace_back(i, r[i]);
            b.insert(std::move(sr));
        }
        DenseMatrix out;
        for (const auto& row : b.rows()) {
            std::vector<Rational> r(dim, 0);
            for (const auto& [k, v] : row) r[k] = v;
            out.push_back(std::move(r));
        }
        return out;
    };

    std::vector<DenseMatrix> lattice;
    auto add = [&](DenseMatrix m) {
        DenseMatrix e = echelon(std::move(m));
        for (const auto& x : lattice)
            if (x == e) return false;
        lattice.push_back(std::move(e));
        return true;
    };

    for (const auto& h : basis) {
        std::map<Mask, DenseMatrix> coeff_mats;
        for (unsigned r = 0; r < dim; ++r)
            for (unsigned c = 0; c < dim; ++c)
                for (const auto& [m, v] : h.at(r, c).terms()) {
                    auto& cm = coeff_mats[m];
                    if (cm.empty()) cm.assign(dim, std::vector<Rational>(dim, 0));
                    cm[r][c] = v;
                }
        for (const auto& [m, cm] : coeff_mats) {
            // image: column span
            DenseMatrix img;
            for (unsigned c = 0; c < dim; ++c) {
                std::vector<Rational> col(dim);
                for (unsigned r = 0; r < dim; ++r) col[r] = cm[r][c];
                img.push_back(std::move(col));
            }
            add(img);
            // kernel
            DenseMatrix ker;
            for (const auto& sol : SpanBasis::nullspace_dense(cm, dim)) ker.push_back(sol);
            add(ker);
        }
    }

    // close under sum and intersection (bounded: subspaces of a small space)
    for (bool grew = true; grew;) {
        grew = false;
        const std::size_t upto = lattice.size();
        for (std::size_t i = 0; i < upto && lattice.size() < 64; ++i)
            for (std::size_t j = 0; j < i && lattice.size() < 64; ++j) {
                DenseMatrix sum = lattice[i];
                sum.insert(sum.end(), lattice[j].begin(), lattice[j].end());
                grew |= add(sum);
                // intersection via the kernel of the stacked dual description
                // dim(U cap V) basis: solve x in U, x in V
                DenseMatrix stacked;  // rows span U and V; intersection by rank
                // represent: x = a . U = b . V  ->  [U^T | -V^T] nullspace
                const std::size_t nu = lattice[i].size(), nv = lattice[j].size();
                if (nu == 0 || nv == 0) continue;
                DenseMatrix sys(dim, std::vector<Rational>(nu + nv, 0));
                for (std::size_t a = 0; a < nu; ++a)
                    for (unsigned d = 0; d < dim; ++d) sys[d][a] = lattice[i][a][d];
                for (std::size_t b2 = 0; b2 < nv; ++b2)
                    for (unsigned d = 0; d < dim; ++d) sys[d][nu + b2] = -lattice[j][b2][d];
                DenseMatrix inter;
                for (const auto& sol : SpanBasis::nullspace_dense(sys, nu + nv)) {
                    std::vector<Rational> x(dim, 0);
                    for (std::size_t a = 0; a < nu; ++a)
                        for (unsigned d = 0; d < dim; ++d) x[d] += sol[a] * lattice[i][a][d];
                    bool nonzero = false;
                    for (const auto& v : x) nonzero |= (v != 0);
                    if (nonzero) inter.push_back(std::move(x));
                }
                grew |= add(inter);
            }
    }
    return lattice;
}

} // namespace detail

/// Algebraic de Rham-Wu split at the base point: the joint kernel of the
/// holonomy algebra against a declared or kernel-derived candidate,
/// orthogonal complement, block-diagonality of the algebra, and a
/// weak-irreducibility verdict per block (body-coefficient-lattice proxy).
inline DeRhamWuReport derham_wu_split(const MetricModel& metric, const HolonomyModel& model,
                                      const SampleSpec& spec,
                                      const std::vector<GVector>& declared_candidate = {}) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    DeRhamWuReport rep;

    StabilizationReport stab = stabilization_threshold(model, spec);
    const unsigned l = std::max(stab.threshold, std::min(spec.lprime_max, patch->t_capacity()));
    LieSubalgebra hol = coefficient_algebra(model, spec, l);
    rep.holonomy_dim = hol.dim();

    auto kernel_span = joint_kernel(hol, patch);
    auto kernel_basis = free_module_basis(kernel_span, patch);
    rep.kernel_free = kernel_basis.has_value();
    if (kernel_basis) rep.kernel_basis = *kernel_basis;

    std::vector<GVector> w = declared_candidate;
    if (w.empty() && kernel_basis) w = *kernel_basis;
    if (w.empty() || w.size() == patch->tangent_shape().dim()) {
        // nothing to split against: a single block
        DeRhamWuBlock whole;
        for (unsigned i = 0; i < patch->tangent_shape().dim(); ++i)
            whole.basis.push_back(frame_vector(patch->tangent_shape(), i, ctx));
        whole.invariant = true;
        whole.nondegenerate = true;
        whole.flat = hol.dim() == 0;
        whole.irreducibility = whole.flat ? "flat" : "unsplit";
        rep.blocks.push_back(std::move(whole));
        rep.block_diagonal = true;
        rep.kernel_matches_candidate = !declared_candidate.empty() || rep.kernel_free;
        return rep;
    }

    SuperBilinearForm gx{pull_back(metric.gram, model.base), ctx};
    std::vector<GVector> comp = orthogonal_complement(gx, w);  // throws if degenerate

    if (!declared_candidate.empty() && kernel_basis) {
        // the kernel equals the O_S-span of the declared candidate?
        SpanBasis declared;
        for (const auto& v : declared_candidate)
            for (Mask m : family_monomials(ctx, patch->s_mask())) {
                GVector dressed = scale_vector(v, GrassmannElement::monomial(ctx, m));
                if (!dressed.is_zero()) declared.insert(flatten(dressed, ctx));
            }
        rep.kernel_matches_candidate = true;
        for (const auto& v : kernel_span)
            if (!declared.contains(flatten(v, ctx))) rep.kernel_matches_candidate = false;
        for (const auto& v : declared_candidate)
            if (!kernel_span.empty()) {
                SpanBasis kspan;
                for (const auto& kv : kernel_span) kspan.insert(flatten(kv, ctx));
                if (!kspan.contains(flatten(v, ctx))) rep.kernel_matches_candidate = false;
            }
    } else {
        rep.kernel_matches_candidate = rep.kernel_free;
    }

    // adapted basis and block diagonality
    const unsigned dim = patch->tangent_shape().dim();
    GMatrix cmat = gmatrix_zero(Shape{dim, 0}, ctx);
    std::vector<GVector> adapted = w;
    adapted.insert(adapted.end(), comp.begin(), comp.end());
    require(adapted.size() == dim, errc::degenerate_restriction, "candidate does not split");
    for (unsigned c = 0; c < dim; ++c)
        for (unsigned r = 0; r < dim; ++r) cmat.at(r, c) = adapted[c].comps[r];
    GMatrix cinv = invert(cmat, ctx);

    std::vector<GMatrix> adapted_basis;
    rep.block_diagonal = true;
    for (const auto& h : hol.basis()) {
        GMatrix hb = cinv * h * cmat;
        adapted_basis.push_back(hb);
        for (unsigned r = 0; r < dim; ++r)
            for (unsigned c = 0; c < dim; ++c)
                if ((r < w.size()) != (c < w.size()) && !hb.at(r, c).is_zero())
                    rep.block_diagonal = false;
    }

    // transports around sampled loops preserve the decomposition as well
    for (const auto& path : sample_paths(model, spec, l, model.base)) {
        if (!(path.end() == model.base)) continue;
        GMatrix pb = cinv * parallel_transport(model.conn, path).matrix * cmat;
        for (unsigned r = 0; r < dim; ++r)
            for (unsigned c = 0; c < dim; ++c)
                if ((r < w.size()) != (c < w.size()) && !pb.at(r, c).is_zero())
                    rep.block_diagonal = false;
    }

    auto make_block = [&](unsigned lo, unsigned hi) {
        DeRhamWuBlock block;
        for (unsigned i = lo; i < hi; ++i) block.basis.push_back(adapted[i]);
        block.invariant = rep.block_diagonal;
        // restricted metric nondegeneracy
        GMatrix sub = gmatrix_zero(Shape{hi - lo, 0}, ctx);
        for (unsigned a = lo; a < hi; ++a)
            for (unsigned b = lo; b < hi; ++b)
                sub.at(a - lo, b - lo) = gx.eval(adapted[a], adapted[b]);
        block.nondegenerate = rank_dense(body_matrix(sub)) == hi - lo;

        // restricted algebra
        std::vector<GMatrix> restricted;
        bool all_zero = true;
        for (const auto& hb : adapted_basis) {
            GMatrix r = gmatrix_zero(Shape{hi - lo, 0}, ctx);
            bool nonzero = false;
            for (unsigned a = lo; a < hi; ++a)
                for (unsigned b = lo; b < hi; ++b) {
                    r.at(a - lo, b - lo) = hb.at(a, b);
                    nonzero |= !hb.at(a, b).is_zero();
                }
            if (nonzero) {
                restricted.push_back(r);
                all_zero = false;
            }
        }
        block.flat = all_zero;
        if (all_zero) {
            block.irreducibility = "flat";
            return block;
        }

        // weak irreducibility over the body-coefficient subspace lattice
        bool witness = false;
        for (const auto& u0 : detail::body_subspace_lattice(restricted, hi - lo)) {
            if (u0.empty() || u0.size() >= hi - lo) continue;
            // trivial O_S-lift of the body subspace
            std::vector<GVector> lift;
            for (const auto& rowv : u0) {
                GVector v(Shape{hi - lo, 0}, 0, ctx);
                for (unsigned d = 0; d < hi - lo; ++d)
                    v.comps[d] = GrassmannElement(ctx, rowv[d]);
                lift.push_back(std::move(v));
            }
            // nondegenerate?
            GMatrix gsub = gmatrix_zero(Shape{unsigned(lift.size()), 0}, ctx);
            SuperBilinearForm gblock{gmatrix_zero(Shape{hi - lo, 0}, ctx), ctx};
            for (unsigned a = lo; a < hi; ++a)
                for (unsigned b = lo; b < hi; ++b)
                    gblock.gram.at(a - lo, b - lo) = gx.eval(adapted[a], adapted[b]);
            for (std::size_t a = 0; a < lift.size(); ++a)
                for (std::size_t b = 0; b < lift.size(); ++b)
                    gsub.at(unsigned(a), unsigned(b)) = gblock.eval(lift[a], lift[b]);
            if (rank_dense(body_matrix(gsub)) != lift.size()) continue;
            // invariant?
            SpanBasis span;
            for (const auto& v : lift)
                for (Mask m : family_monomials(ctx, patch->s_mask())) {
                    GVector dressed = scale_vector(v, GrassmannElement::monomial(ctx, m));
                    if (!dressed.is_zero()) span.insert(flatten(dressed, ctx));
                }
            bool inv = true;
            for (const auto& r : restricted)
                for (const auto& v : lift)
                    if (!span.contains(flatten(matvec(r, v), ctx))) inv = false;
            if (inv) {
                witness = true;
                break;
            }
        }
        block.irreducibility = witness ? "strongly reducible (invariant witness found)"
                                       : "weakly irreducible (body-lattice proxy)";
        return block;
    };

    rep.blocks.push_back(make_block(0, unsigned(w.size())));
    rep.blocks.push_back(make_block(unsigned(w.size()), dim));
    return rep;
}

} // namespace shol
