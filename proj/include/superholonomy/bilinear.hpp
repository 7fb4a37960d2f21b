#pragma once

#include <vector>

#include "superholonomy/supermatrix.hpp"

namespace shol {

/// Square root with perfect-square rational body, exact via the binomial
/// series on the nilpotent part.
inline GrassmannElement element_sqrt(const GrassmannElement& a) {
    Rational b = a.body();
    require(b > 0, errc::non_square_normalization, "body must be positive");
    auto rb = rational_sqrt(b);
    require(rb.has_value(), errc::non_square_normalization,
            "body is not a perfect rational square");
    const ContextPtr& ctx = a.context();
    GrassmannElement x = a.soul() * (Rational(1) / b);
    GrassmannElement acc(ctx, Rational(1));
    GrassmannElement pow(ctx, Rational(1));
    Rational coeff(1);
    for (unsigned k = 1;; ++k) {
        pow = pow * x;
        if (pow.is_zero()) break;
        coeff *= Rational(3 - 2 * int(k), 2 * int(k));  // binomial(1/2, k) recursion
        acc += pow * coeff;
    }
    return acc * (*rb);
}

/// Even supersymmetric bilinear form with nondegenerate body, given by its
/// Gram matrix in the frame: g(e_A, e_B) = G_{AB}.
struct SuperBilinearForm {
    GMatrix gram;
    ContextPtr ctx;

    const Shape& shape() const { return gram.shape(); }

    void validate() const {
        auto p = gram.parity();
        require(p && *p == 0, errc::parity_error, "form must be even");
        for (unsigned a = 0; a < gram.dim(); ++a)
            for (unsigned b = 0; b < gram.dim(); ++b) {
                bool flip = gram.shape().index_parity(a) && gram.shape().index_parity(b);
                GrassmannElement rhs = flip ? -gram.at(b, a) : gram.at(b, a);
                require(gram.at(a, b) == rhs, errc::parity_error, "form must be supersymmetric");
            }
        require(rank_dense(body_matrix(gram)) == gram.dim(), errc::degenerate_restriction,
                "form body is degenerate");
    }

    /// g(u, v) with right components: sum (-1)^{|u^A||B|} G_AB u^A v^B.
    GrassmannElement eval(const GVector& u, const GVector& v) const {
        GrassmannElement out(ctx);
        for (unsigned a = 0; a < gram.dim(); ++a) {
            if (u.comps[a].is_zero()) continue;
            unsigned pu = (u.parity + gram.shape().index_parity(a)) & 1u;
            for (unsigned b = 0; b < gram.dim(); ++b) {
                if (v.comps[b].is_zero() || gram.at(a, b).is_zero()) continue;
                GrassmannElement term = gram.at(a, b) * u.comps[a] * v.comps[b];
                if (pu && gram.shape().index_parity(b)) term = -term;
                out += term;
            }
        }
        return out;
    }
};

inline GVector scale_vector(const GVector& v, const GrassmannElement& c) {
    GVector out = v;
    auto cp = c.parity();
    out.parity = (v.parity + (cp ? *cp : 0)) & 1u;
    for (auto& comp : out.comps) comp = comp * c;
    return out;
}

inline GVector add_vectors(const GVector& a, const GVector& b) {
    GVector out = a;
    for (unsigned i = 0; i < out.comps.size(); ++i) out.comps[i] += b.comps[i];
    return out;
}

inline GVector sub_vectors(const GVector& a, const GVector& b) {
    GVector out = a;
    for (unsigned i = 0; i < out.comps.size(); ++i) out.comps[i] -= b.comps[i];
    return out;
}

inline GVector frame_vector(Shape shape, unsigned index, const ContextPtr& ctx) {
    GVector v(shape, shape.index_parity(index), ctx);
    v.comps[index] = GrassmannElement(ctx, Rational(1));
    return v;
}

inline std::vector<Rational> body_vector(const GVector& v) {
    std::vector<Rational> out;
    out.reserve(v.comps.size());
    for (const auto& c : v.comps) out.push_back(c.body());
    return out;
}

/// Basis in OSp normal form: even vectors carry diagonal +-1, odd vectors come
/// in symplectic pairs f_{2k-1}, f_{2k} with g(f_{2k-1}, f_{2k}) = 1.
struct OspBasis {
    std::vector<GVector> vectors;   // W part first, then the completion
    std::vector<int> kind;          // +1 / -1 for even vectors, 0 for odd ones
    std::size_t w_count = 0;        // vectors spanning W
    GMatrix gram;                   // recomputed Gram in this basis
};

namespace detail {

struct OspState {
    const SuperBilinearForm* g = nullptr;
    std::vector<GVector> evens;   // normalized, g(u,u) = +-1
    std::vector<int> signs;
    std::vector<GVector> odds;    // symplectic pairs, flat list
};

inline GVector osp_project(const OspState& st, GVector w) {
    for (std::size_t i = 0; i < st.evens.size(); ++i) {
        GrassmannElement c = st.g->eval(st.evens[i], w);
        if (st.signs[i] < 0) c = -c;
        w = sub_vectors(w, scale_vector(st.evens[i], c));
    }
    for (std::size_t i = 0; i + 1 < st.odds.size(); i += 2) {
        GrassmannElement b = st.g->eval(st.odds[i], w);
        GrassmannElement a = -st.g->eval(st.odds[i + 1], w);
        w = sub_vectors(w, scale_vector(st.odds[i], a));
        w = sub_vectors(w, scale_vector(st.odds[i + 1], b));
    }
    return w;
}

/// Runs super Gram-Schmidt over the pool; processed vectors are appended to
/// the state.  With strict=true a pool that cannot be fully consumed is an
/// error (used for W, whose restricted form must be nondegenerate).
inline std::size_t osp_consume(OspState& st, std::vector<GVector> pool, bool strict) {
    std::size_t consumed = 0;
    for (;;) {
        std::vector<GVector> reduced;
        for (auto& w : pool) {
            GVector r = osp_project(st, w);
            bool body_zero = true;
            for (const auto& c : r.comps)
                if (c.body() != 0) { body_zero = false; break; }
            if (!body_zero) reduced.push_back(std::move(r));
            else
                require(!strict, errc::degenerate_restriction,
                        "restriction of the form is degenerate");
        }
        if (reduced.empty()) return consumed;

        const std::size_t before = st.evens.size() + st.odds.size();
        bool step = false;

        // even vector with invertible self-pairing
        for (std::size_t i = 0; i < reduced.size() && !step; ++i) {
            if (reduced[i].parity != 0) continue;
            GrassmannElement n = st.g->eval(reduced[i], reduced[i]);
            if (n.body() == 0) continue;
            int sg = n.body() > 0 ? 1 : -1;
            GrassmannElement norm = sg > 0 ? n : -n;
            st.evens.push_back(scale_vector(reduced[i], element_sqrt(norm).invert()));
            st.signs.push_back(sg);
            pool = reduced;
            pool.erase(pool.begin() + i);
            step = true;
        }
        // two even null vectors with invertible cross pairing: merge them
        for (std::size_t i = 0; i < reduced.size() && !step; ++i) {
            if (reduced[i].parity != 0) continue;
            for (std::size_t j = i + 1; j < reduced.size() && !step; ++j) {
                if (reduced[j].parity != 0) continue;
                if (st.g->eval(reduced[i], reduced[j]).body() == 0) continue;
                pool = reduced;
                pool[i] = add_vectors(reduced[i], reduced[j]);
                step = true;
            }
        }
        // symplectic pair of odd vectors
        for (std::size_t i = 0; i < reduced.size() && !step; ++i) {
            if (reduced[i].parity != 1) continue;
            for (std::size_t j = i + 1; j < reduced.size() && !step; ++j) {
                if (reduced[j].parity != 1) continue;
                GrassmannElement p = st.g->eval(reduced[i], reduced[j]);
                if (p.body() == 0) continue;
                st.odds.push_back(reduced[i]);
                st.odds.push_back(scale_vector(reduced[j], p.invert()));
                pool = reduced;
                pool.erase(pool.begin() + j);
                pool.erase(pool.begin() + i);
                step = true;
            }
        }
        require(step || !strict, errc::degenerate_restriction,
                "restriction of the form is degenerate");
        if (!step) return consumed;
        consumed += st.evens.size() + st.odds.size() - before;
    }
}

} // namespace detail

/// OSp basis of the ambient module extending the free nondegenerate W.
inline OspBasis osp_complete(const SuperBilinearForm& g, const std::vector<GVector>& w) {
    g.validate();
    const Shape shape = g.shape();

    for (const auto& v : w)
        require(v.parity_consistent(), errc::parity_error, "W vectors must be homogeneous");
    {
        DenseMatrix bodies;
        for (const auto& v : w) bodies.push_back(body_vector(v));
        require(rank_dense(bodies) == w.size(), errc::not_free,
                "W must have body-independent vectors");
    }

    detail::OspState st;
    st.g = &g;
    std::size_t got = detail::osp_consume(st, w, true);
    require(got == w.size(), errc::degenerate_restriction, "restriction of the form is degenerate");

    auto snapshot_w_evens = st.evens.size();
    auto snapshot_w_odds = st.odds.size();

    std::vector<GVector> frame;
    for (unsigned i = 0; i < shape.dim(); ++i) frame.push_back(frame_vector(shape, i, g.ctx));
    detail::osp_consume(st, frame, false);
    require(st.evens.size() + st.odds.size() == shape.dim(), errc::degenerate_restriction,
            "form does not complete to an OSp basis");

    OspBasis out;
    auto emit = [&](std::size_t elo, std::size_t ehi, std::size_t olo, std::size_t ohi) {
        // + before - within the segment, then the symplectic pairs
        for (int want : {1, -1})
            for (std::size_t i = elo; i < ehi; ++i)
                if (st.signs[i] == want) {
                    out.vectors.push_back(st.evens[i]);
                    out.kind.push_back(want);
                }
        for (std::size_t i = olo; i < ohi; ++i) {
            out.vectors.push_back(st.odds[i]);
            out.kind.push_back(0);
        }
    };
    emit(0, snapshot_w_evens, 0, snapshot_w_odds);
    out.w_count = out.vectors.size();
    emit(snapshot_w_evens, st.evens.size(), snapshot_w_odds, st.odds.size());

    const std::size_t n = out.vectors.size();
    out.gram = gmatrix_zero(Shape{unsigned(n), 0}, g.ctx);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            out.gram.at(unsigned(a), unsigned(b)) = g.eval(out.vectors[a], out.vectors[b]);
    return out;
}

/// Orthogonal complement of a free nondegenerate submodule: the completion
/// part of the OSp basis.
inline std::vector<GVector> orthogonal_complement(const SuperBilinearForm& g,
                                                  const std::vector<GVector>& w) {
    OspBasis basis = osp_complete(g, w);
    std::vector<GVector> out(basis.vectors.begin() + basis.w_count, basis.vectors.end());
    return out;
}

/// Exact solve A x = b by body solve plus nilpotent correction sweeps.
inline GVector solve_over_grassmann(const GMatrix& a, const GVector& b, const ContextPtr& ctx) {
    DenseMatrix a0 = body_matrix(a);
    const unsigned n = a.dim();

    // least-squares style normal matrix keeps this usable for full-column-rank bodies
    DenseMatrix ata(n, std::vector<Rational>(n, 0));
    for (unsigned i = 0; i < n; ++i)
        for (unsigned j = 0; j < n; ++j)
            for (unsigned k = 0; k < n; ++k) ata[i][j] += a0[k][i] * a0[k][j];
    auto inv = invert_dense(ata);
    require(inv.has_value(), errc::no_solution, "matrix body lacks full column rank");

    auto body_solve = [&](const GVector& rhs) {
        GVector x(a.shape(), rhs.parity, ctx);
        // project per monomial: x = (A0^T A0)^{-1} A0^T rhs
        for (unsigned i = 0; i < n; ++i) {
            GrassmannElement acc(ctx);
            for (unsigned j = 0; j < n; ++j) {
                GrassmannElement aty(ctx);
                for (unsigned k = 0; k < n; ++k)
                    if (a0[k][j] != 0) aty += rhs.comps[k] * a0[k][j];
                acc += aty * (*inv)[i][j];
            }
            x.comps[i] = acc;
        }
        return x;
    };

    GMatrix nil = a;
    for (unsigned r = 0; r < n; ++r)
        for (unsigned c = 0; c < n; ++c)
            nil.at(r, c) = nil.at(r, c).soul();

    GVector x = body_solve(b);
    for (unsigned round = 0; round <= ctx->total() + 1; ++round) {
        GVector residual = sub_vectors(b, matvec(a, x));
        if (residual.is_zero()) return x;
        x = add_vectors(x, body_solve(residual));
    }
    require(sub_vectors(b, matvec(a, x)).is_zero(), errc::no_solution,
            "no exact solution");
    return x;
}

} // namespace shol
