#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "superholonomy/paths.hpp"

namespace shol {

// ---------------------------------------------------------------------------
// Pullbacks along paths and points.
// ---------------------------------------------------------------------------

inline SuperFunction path_pullback(const SuperFunction& f, const PathSegment& seg,
                                   const PatchPtr& patch) {
    std::vector<SuperFunction> even_images, odd_images;
    for (unsigned a = 0; a < patch->coord_count(); ++a) {
        if (patch->coord_parity(a) == 0) even_images.push_back(seg.coords[a]);
        else odd_images.push_back(seg.coords[a]);
    }
    return substitute(f, even_images, odd_images, patch, 1);
}

inline FMatrix path_pullback(const FMatrix& m, const PathSegment& seg, const PatchPtr& patch) {
    FMatrix out(m.shape(), SuperFunction(patch->context(), 1));
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c) out.at(r, c) = path_pullback(m.at(r, c), seg, patch);
    return out;
}

/// Pullback connection coefficient along the direction X on the source of the
/// map with coordinate images `images` and X(images) = `ximages`:
///   W[X]^C_B = sum_c (-1)^{|C|(|X|+|c|)} X(xi^c) * (W[c]^C_B pulled back).
template <class Fn>
FMatrix pullback_coefficient(const ConnectionModel& conn, const std::vector<SuperFunction>& ximages,
                             unsigned x_parity, Fn&& pull_entry, unsigned param_vars) {
    const PatchPtr& patch = conn.patch;
    FMatrix out(conn.bundle, SuperFunction(patch->context(), param_vars));
    for (unsigned c = 0; c < patch->coord_count(); ++c) {
        if (ximages[c].is_zero()) continue;
        const unsigned pc = patch->coord_parity(c);
        for (unsigned r = 0; r < conn.bundle.dim(); ++r) {
            const bool flip = conn.bundle.index_parity(r) && (((x_parity + pc) & 1u) != 0);
            for (unsigned b = 0; b < conn.bundle.dim(); ++b) {
                const SuperFunction& w = conn.w[c].at(r, b);
                if (w.is_zero()) continue;
                SuperFunction term = ximages[c] * pull_entry(w);
                out.at(r, b) += flip ? -term : term;
            }
        }
    }
    return out;
}

/// A(t) with P'(t) = -A(t) P(t) along a segment.
inline FMatrix transport_coefficient(const ConnectionModel& conn, const PathSegment& seg) {
    const PatchPtr& patch = conn.patch;
    std::vector<SuperFunction> vel;
    for (unsigned a = 0; a < patch->coord_count(); ++a) vel.push_back(seg.velocity(a));
    return pullback_coefficient(conn, vel, 0,
                                [&](const SuperFunction& w) { return path_pullback(w, seg, patch); },
                                1);
}

/// B(t): pullback coefficient along d_eta for a T- or S-generator direction.
inline FMatrix eta_coefficient(const ConnectionModel& conn, const PathSegment& seg, unsigned gen) {
    const PatchPtr& patch = conn.patch;
    std::vector<SuperFunction> der;
    for (unsigned a = 0; a < patch->coord_count(); ++a) der.push_back(seg.coords[a].d_odd(gen));
    return pullback_coefficient(conn, der, 1,
                                [&](const SuperFunction& w) { return path_pullback(w, seg, patch); },
                                1);
}

/// Pullback coefficient at a point (constant images).
inline GMatrix point_eta_coefficient(const ConnectionModel& conn, const SPoint& y, unsigned gen) {
    const PatchPtr& patch = conn.patch;
    std::vector<SuperFunction> der;
    for (unsigned a = 0; a < patch->coord_count(); ++a)
        der.push_back(SuperFunction::constant(y.images[a].left_partial(gen), 0));
    FMatrix m = pullback_coefficient(conn, der, 1,
                                     [&](const SuperFunction& w) {
                                         return SuperFunction::constant(pull_back(w, y), 0);
                                     },
                                     0);
    GMatrix out = gmatrix_zero(m.shape(), patch->context());
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c) out.at(r, c) = m.at(r, c).constant_coefficient();
    return out;
}

// ---------------------------------------------------------------------------
// Exact transport.
// ---------------------------------------------------------------------------

inline GMatrix eval_matrix(const FMatrix& m, const Rational& t, const ContextPtr& ctx) {
    GMatrix out = gmatrix_zero(m.shape(), ctx);
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            out.at(r, c) = m.at(r, c).eval_even(0, t).constant_coefficient();
    return out;
}

inline FMatrix integrate_matrix(const FMatrix& m, const PatchPtr& patch) {
    FMatrix out(m.shape(), SuperFunction(patch->context(), 1));
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c) out.at(r, c) = m.at(r, c).integrate_even(0);
    return out;
}

inline bool fmatrix_body_zero(const FMatrix& m) {
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            for (const auto& [deg, g] : m.at(r, c).terms())
                if (g.body() != 0) return false;
    return true;
}

struct SegmentSolution {
    FMatrix p;     // P(t), transport from 0 to t
    FMatrix pinv;  // P(t)^{-1}
    unsigned iterations = 0;
};

/// Picard iteration, exact and terminating for soul-valued A.
inline SegmentSolution solve_segment_exact(const FMatrix& a, const PatchPtr& patch) {
    require(fmatrix_body_zero(a), errc::precondition, "exact mode needs a soul-valued A(t)");
    const unsigned bound = patch->context()->total() + 1;
    FMatrix id = FMatrix::identity(a.shape(), SuperFunction(patch->context(), 1),
                                   SuperFunction::constant(
                                       GrassmannElement(patch->context(), Rational(1)), 1));
    SegmentSolution sol{id, id, 0};
    for (;;) {
        FMatrix next = id - integrate_matrix(a * sol.p, patch);
        ++sol.iterations;
        if (next == sol.p) break;
        sol.p = next;
        require(sol.iterations <= bound, errc::precondition, "Picard iteration did not settle");
    }
    for (unsigned it = 0;; ++it) {
        FMatrix next = id + integrate_matrix(sol.pinv * a, patch);
        if (next == sol.pinv) break;
        sol.pinv = next;
        require(it <= bound, errc::precondition, "Picard iteration did not settle");
    }
    return sol;
}

/// Invertible transport operator in the fixed global frame.
struct TransportOperator {
    GMatrix matrix;
    bool exact = true;
    unsigned picard_iterations = 0;  // max over segments (exact mode)
    std::vector<double> body_numeric;  // hybrid mode: row-major body of P(1)
    std::map<Mask, std::vector<double>> soul_numeric;  // hybrid: per-monomial matrices
};

struct HybridOptions {
    unsigned steps = 256;  // RK4 grid (even)
};

namespace detail {
TransportOperator transport_hybrid(const ConnectionModel& conn, const PathModel& path,
                                   const HybridOptions& opts);
}

/// Force the numeric path even when exact mode would apply.
inline TransportOperator parallel_transport_hybrid(const ConnectionModel& conn,
                                                   const PathModel& path,
                                                   const HybridOptions& opts = {}) {
    path.validate();
    return detail::transport_hybrid(conn, path, opts);
}

inline TransportOperator parallel_transport(const ConnectionModel& conn, const PathModel& path,
                                            const HybridOptions& opts = {}) {
    path.validate();
    const PatchPtr& patch = conn.patch;
    std::vector<FMatrix> as;
    bool exact = true;
    for (const auto& seg : path.segments) {
        as.push_back(transport_coefficient(conn, seg));
        exact = exact && fmatrix_body_zero(as.back());
    }
    if (!exact) return detail::transport_hybrid(conn, path, opts);

    TransportOperator out;
    out.exact = true;
    out.matrix = gmatrix_identity(conn.bundle, patch->context());
    for (const auto& a : as) {
        SegmentSolution sol = solve_segment_exact(a, patch);
        out.picard_iterations = std::max(out.picard_iterations, sol.iterations);
        out.matrix = eval_matrix(sol.p, 1, patch->context()) * out.matrix;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pulled-back curvature-type tensors and their eta-derivatives.
// ---------------------------------------------------------------------------

struct PulledTensor {
    unsigned tensor_parity = 0;
    std::map<std::pair<unsigned, unsigned>, GMatrix> comp;

    const GMatrix& at(unsigned a, unsigned b) const { return comp.at({a, b}); }
};

inline PulledTensor pullback_tensor(const TensorTable& f, const SPoint& y) {
    PulledTensor out;
    out.tensor_parity = f.tensor_parity;
    for (const auto& [ab, m] : f.comp) out.comp.emplace(ab, pull_back(m, y));
    return out;
}

/// F_y(u, v) = sum (-1)^{|u^a||b|} F_y(d_a, d_b) * u^a v^b, scalars right.
inline GMatrix eval_tensor(const PulledTensor& f, const GVector& u, const GVector& v,
                           const PatchPtr& patch) {
    GMatrix out;
    bool first = true;
    for (const auto& [ab, m] : f.comp) {
        const auto [a, b] = ab;
        if (first) {
            out = gmatrix_zero(m.shape(), patch->context());
            first = false;
        }
        if (u.comps[a].is_zero() || v.comps[b].is_zero()) continue;
        GrassmannElement s = u.comps[a] * v.comps[b];
        if (((u.parity + patch->coord_parity(a)) & patch->coord_parity(b)) != 0) s = -s;
        out += m.scaled_right(s);
    }
    return out;
}

/// (y*nabla)_{d_eta} u on a pulled-back tangent vector.
inline GVector pullback_direction_derivative(const GVector& u, unsigned gen, const GMatrix& ay,
                                             const PatchPtr& patch) {
    GVector out(u.shape, (u.parity + 1) & 1u, patch->context());
    for (unsigned d = 0; d < u.comps.size(); ++d) {
        GrassmannElement v = u.comps[d].left_partial(gen);
        out.comps[d] = (u.shape.index_parity(d) != 0) ? -v : v;
    }
    GVector conn_part = matvec(ay, u);
    for (unsigned d = 0; d < u.comps.size(); ++d) out.comps[d] += conn_part.comps[d];
    return out;
}

/// Four-term pullback covariant derivative of a pulled tensor along d_eta^gen.
inline PulledTensor pullback_cov_deriv(const PulledTensor& f, unsigned gen, const GMatrix& wy,
                                       const GMatrix& ay, const PatchPtr& patch) {
    const ContextPtr& ctx = patch->context();
    PulledTensor out;
    out.tensor_parity = (f.tensor_parity + 1) & 1u;
    const unsigned n = patch->coord_count();
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) {
            const unsigned pa = patch->coord_parity(a), pb = patch->coord_parity(b);
            const unsigned pm = (f.tensor_parity + pa + pb) & 1u;
            const GMatrix& m = f.at(a, b);
            GMatrix r = matrix_partial(m, gen, ctx);
            r += wy * m;
            if (pm) r += m * wy;
            else r -= m * wy;
            for (unsigned d = 0; d < n; ++d) {
                const unsigned pd = patch->coord_parity(d);
                const GrassmannElement& gda = ay.at(d, a);
                if (!gda.is_zero()) {
                    GMatrix term = f.at(d, b).scaled_right(gda);
                    if ((((1 + pd + pa) & 1u) & pb) != 0) r += term;
                    else r -= term;
                }
                const GrassmannElement& gdb = ay.at(d, b);
                if (!gdb.is_zero()) {
                    GMatrix term = f.at(a, d).scaled_right(gdb);
                    if (pa) r += term;
                    else r -= term;
                }
            }
            out.comp.emplace(std::make_pair(a, b), r);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Eta-derivative of transport and of conjugated tensors (exact mode only).
// ---------------------------------------------------------------------------

struct TransportAnalysis {
    GMatrix p;                        // whole-path transport
    GMatrix j;                        // int_0^1 P_t R_t[eta] P_t^{-1} dt
    GMatrix j_conjugated;             // P^{-1} J P
    GMatrix boundary_start, boundary_end;  // B(0), B(1)
    unsigned picard_iterations = 0;
};

/// Solves the path and assembles the curvature integral of the eta-derivative
/// formula for one odd direction `gen`.
inline TransportAnalysis analyze_transport(const ConnectionModel& conn, const PathModel& path,
                                           unsigned gen) {
    path.validate();
    const PatchPtr& patch = conn.patch;
    const ContextPtr& ctx = patch->context();

    GMatrix prefix = gmatrix_identity(conn.bundle, ctx);  // T_{i-1}
    GMatrix jconj = gmatrix_zero(conn.bundle, ctx);       // sum T^-1 K T
    TransportAnalysis out;
    out.boundary_start = gmatrix_zero(conn.bundle, ctx);
    out.boundary_end = gmatrix_zero(conn.bundle, ctx);

    for (std::size_t i = 0; i < path.segments.size(); ++i) {
        const PathSegment& seg = path.segments[i];
        FMatrix a = transport_coefficient(conn, seg);
        require(fmatrix_body_zero(a), errc::hybrid_mode_unsupported,
                "eta-derivative identities need exact mode");
        SegmentSolution sol = solve_segment_exact(a, patch);
        out.picard_iterations = std::max(out.picard_iterations, sol.iterations);

        FMatrix b = eta_coefficient(conn, seg, gen);
        // R(d_t, d_eta) = d_t B - dhat_eta A + [A, B]
        FMatrix rmat(conn.bundle, SuperFunction(ctx, 1));
        for (unsigned r = 0; r < rmat.dim(); ++r)
            for (unsigned c = 0; c < rmat.dim(); ++c) {
                SuperFunction v = b.at(r, c).d_even(0);
                SuperFunction da = a.at(r, c).d_odd(gen);
                if (conn.bundle.index_parity(r) != 0) v += da;
                else v -= da;
                rmat.at(r, c) = v;
            }
        rmat += a * b - b * a;

        FMatrix integrand = sol.pinv * rmat * sol.p;
        GMatrix k = eval_matrix(integrate_matrix(integrand, patch), 1, ctx);

        GMatrix prefix_inv = invert(prefix, ctx);
        jconj += prefix_inv * k * prefix;

        if (i == 0) out.boundary_start = eval_matrix(b, 0, ctx);
        if (i + 1 == path.segments.size()) out.boundary_end = eval_matrix(b, 1, ctx);

        prefix = eval_matrix(sol.p, 1, ctx) * prefix;
    }
    out.p = prefix;
    out.j_conjugated = jconj;
    out.j = out.p * jconj * invert(out.p, ctx);
    return out;
}

struct IdentityReport {
    GMatrix lhs, rhs;
    bool holds() const { return lhs == rhs; }
};

/// dhat_eta P = (int R_t[eta]) P + P B(0) - B(1) P, both sides evaluated
/// independently.
inline IdentityReport eta_derivative_of_transport(const ConnectionModel& conn,
                                                  const PathModel& path, unsigned gen) {
    const ContextPtr& ctx = conn.patch->context();
    TransportAnalysis an = analyze_transport(conn, path, gen);
    IdentityReport rep;
    rep.lhs = matrix_partial(an.p, gen, ctx);
    rep.rhs = an.j * an.p + an.p * an.boundary_start - an.boundary_end * an.p;
    return rep;
}

/// dhat_eta (P^-1 F_y(u,v) P) against the four-term derivative, the two vector
/// corrections and the bracket with the conjugated curvature integral.
inline IdentityReport conjugated_curvature_derivative(const ConnectionModel& conn,
                                                      const ConnectionModel& aux,
                                                      const PathModel& path, const TensorTable& f,
                                                      const GVector& u, const GVector& v,
                                                      unsigned gen) {
    const PatchPtr& patch = conn.patch;
    const ContextPtr& ctx = patch->context();
    const SPoint x = path.start();
    for (const auto& g : x.images)
        require(g.left_partial(gen).is_zero(), errc::precondition,
                "start point must be independent of the derivative direction");

    TransportAnalysis an = analyze_transport(conn, path, gen);
    const SPoint y = path.end();
    GMatrix pinv = invert(an.p, ctx);

    PulledTensor fy = pullback_tensor(f, y);
    GMatrix m = eval_tensor(fy, u, v, patch);
    GMatrix conj = pinv * m * an.p;

    IdentityReport rep;
    rep.lhs = matrix_partial(conj, gen, ctx);

    GMatrix wy = point_eta_coefficient(conn, y, gen);
    GMatrix ay = point_eta_coefficient(aux, y, gen);

    PulledTensor df = pullback_cov_deriv(fy, gen, wy, ay, patch);
    GMatrix rhs = pinv * eval_tensor(df, u, v, patch) * an.p;
    GVector du = pullback_direction_derivative(u, gen, ay, patch);
    rhs += pinv * eval_tensor(fy, du, v, patch) * an.p;
    GVector dv = pullback_direction_derivative(v, gen, ay, patch);
    GMatrix t3 = pinv * eval_tensor(fy, u, dv, patch) * an.p;
    if (u.parity) rhs -= t3;
    else rhs += t3;
    rhs -= supercommutator(an.j_conjugated, conj);
    rep.rhs = rhs;
    return rep;
}

// ---------------------------------------------------------------------------
// Hybrid mode: RK4 body plus a variation-of-parameters hierarchy over the
// soul monomials.
// ---------------------------------------------------------------------------

namespace detail {

struct NElem {
    std::map<Mask, double> t;

    void add(Mask m, double v) {
        if (v == 0.0) return;
        t[m] += v;
    }

    NElem operator*(const NElem& o) const {
        NElem r;
        for (const auto& [ma, ca] : t)
            for (const auto& [mb, cb] : o.t) {
                if (ma & mb) continue;
                r.add(ma | mb, merge_sign(ma, mb) * ca * cb);
            }
        return r;
    }
};

struct NMatrix {
    unsigned n = 0;
    std::vector<NElem> e;

    explicit NMatrix(unsigned dim = 0) : n(dim), e(std::size_t(dim) * dim) {}

    NElem& at(unsigned r, unsigned c) { return e[std::size_t(r) * n + c]; }
    const NElem& at(unsigned r, unsigned c) const { return e[std::size_t(r) * n + c]; }

    static NMatrix id(unsigned dim) {
        NMatrix m(dim);
        for (unsigned i = 0; i < dim; ++i) m.at(i, i).add(0, 1.0);
        return m;
    }

    NMatrix operator*(const NMatrix& o) const {
        NMatrix r(n);
        for (unsigned i = 0; i < n; ++i)
            for (unsigned k = 0; k < n; ++k) {
                if (at(i, k).t.empty()) continue;
                for (unsigned j = 0; j < n; ++j) {
                    NElem prod = at(i, k) * o.at(k, j);
                    for (const auto& [m, c] : prod.t) r.at(i, j).add(m, c);
                }
            }
        return r;
    }

    void accumulate(const NMatrix& o, double w) {
        for (std::size_t i = 0; i < e.size(); ++i)
            for (const auto& [m, c] : o.e[i].t) e[i].add(m, c * w);
    }

    NMatrix keep_degree(unsigned d) const {
        NMatrix r(n);
        for (std::size_t i = 0; i < e.size(); ++i)
            for (const auto& [m, c] : e[i].t)
                if (mask_degree(m) == d) r.e[i].add(m, c);
        return r;
    }
};

inline NMatrix eval_numeric(const FMatrix& a, double t) {
    NMatrix out(a.dim());
    for (unsigned r = 0; r < a.dim(); ++r)
        for (unsigned c = 0; c < a.dim(); ++c)
            for (const auto& [deg, g] : a.at(r, c).terms()) {
                double pw = std::pow(t, double(deg[0]));
                for (const auto& [mask, q] : g.terms())
                    out.at(r, c).add(mask, pw * static_cast<double>(q));
            }
    return out;
}

inline std::vector<std::vector<double>> body_of(const NMatrix& m) {
    std::vector<std::vector<double>> out(m.n, std::vector<double>(m.n, 0.0));
    for (unsigned r = 0; r < m.n; ++r)
        for (unsigned c = 0; c < m.n; ++c) {
            auto it = m.at(r, c).t.find(0);
            if (it != m.at(r, c).t.end()) out[r][c] = it->second;
        }
    return out;
}

inline TransportOperator transport_hybrid(const ConnectionModel& conn, const PathModel& path,
                                          const HybridOptions& opts) {
    const PatchPtr& patch = conn.patch;
    const unsigned dim = conn.bundle.dim();
    const unsigned maxdeg = patch->context()->total();
    unsigned steps = opts.steps + (opts.steps & 1u);  // even

    using DMat = std::vector<std::vector<double>>;
    auto dmat_id = [&] {
        DMat m(dim, std::vector<double>(dim, 0.0));
        for (unsigned i = 0; i < dim; ++i) m[i][i] = 1.0;
        return m;
    };
    auto dmul = [&](const DMat& a, const DMat& b) {
        DMat r(dim, std::vector<double>(dim, 0.0));
        for (unsigned i = 0; i < dim; ++i)
            for (unsigned k = 0; k < dim; ++k)
                for (unsigned j = 0; j < dim; ++j) r[i][j] += a[i][k] * b[k][j];
        return r;
    };

    NMatrix total = NMatrix::id(dim);
    for (const auto& seg : path.segments) {
        FMatrix a = transport_coefficient(conn, seg);
        const double h = 1.0 / steps;

        // grid values of A, split into body and soul
        std::vector<DMat> a0(steps + 1, DMat(dim, std::vector<double>(dim, 0.0)));
        std::vector<NMatrix> soul(steps + 1, NMatrix(dim));
        for (unsigned k = 0; k <= steps; ++k) {
            NMatrix ak = eval_numeric(a, k * h);
            a0[k] = body_of(ak);
            for (unsigned r = 0; r < dim; ++r)
                for (unsigned c = 0; c < dim; ++c)
                    for (const auto& [m, v] : ak.at(r, c).t)
                        if (m != 0) soul[k].at(r, c).add(m, v);
        }
        auto a0_mid = [&](unsigned k) {  // A is polynomial: evaluate the body at the midpoint
            return body_of(eval_numeric(a, (k + 0.5) * h));
        };

        // RK4 for the body transport and its inverse
        std::vector<DMat> p0(steps + 1), p0inv(steps + 1);
        p0[0] = dmat_id();
        p0inv[0] = dmat_id();
        auto scale_add = [&](const DMat& base, const DMat& d, double w) {
            DMat r = base;
            for (unsigned i = 0; i < dim; ++i)
                for (unsigned j = 0; j < dim; ++j) r[i][j] += w * d[i][j];
            return r;
        };
        for (unsigned k = 0; k < steps; ++k) {
            DMat am = a0_mid(k);
            auto f = [&](const DMat& A, const DMat& P) {
                DMat r = dmul(A, P);
                for (auto& row : r)
                    for (auto& x : row) x = -x;
                return r;
            };
            DMat k1 = f(a0[k], p0[k]);
            DMat k2 = f(am, scale_add(p0[k], k1, h / 2));
            DMat k3 = f(am, scale_add(p0[k], k2, h / 2));
            DMat k4 = f(a0[k + 1], scale_add(p0[k], k3, h));
            p0[k + 1] = p0[k];
            for (unsigned i = 0; i < dim; ++i)
                for (unsigned j = 0; j < dim; ++j)
                    p0[k + 1][i][j] += h / 6 * (k1[i][j] + 2 * k2[i][j] + 2 * k3[i][j] + k4[i][j]);

            auto fi = [&](const DMat& A, const DMat& Q) { return dmul(Q, A); };
            DMat q1 = fi(a0[k], p0inv[k]);
            DMat q2 = fi(am, scale_add(p0inv[k], q1, h / 2));
            DMat q3 = fi(am, scale_add(p0inv[k], q2, h / 2));
            DMat q4 = fi(a0[k + 1], scale_add(p0inv[k], q3, h));
            p0inv[k + 1] = p0inv[k];
            for (unsigned i = 0; i < dim; ++i)
                for (unsigned j = 0; j < dim; ++j)
                    p0inv[k + 1][i][j] +=
                        h / 6 * (q1[i][j] + 2 * q2[i][j] + 2 * q3[i][j] + q4[i][j]);
        }

        // conjugated soul coefficient on the grid
        std::vector<NMatrix> ntil(steps + 1, NMatrix(dim));
        for (unsigned k = 0; k <= steps; ++k) {
            NMatrix pm(dim), qm(dim);
            for (unsigned r = 0; r < dim; ++r)
                for (unsigned c = 0; c < dim; ++c) {
                    pm.at(r, c).add(0, p0[k][r][c]);
                    qm.at(r, c).add(0, p0inv[k][r][c]);
                }
            ntil[k] = qm * soul[k] * pm;
        }

        // hierarchy over soul degree: Q' = -Ntilde Q, solved degree by degree
        std::vector<NMatrix> q(steps + 1, NMatrix::id(dim));
        for (unsigned d = 1; d <= maxdeg; ++d) {
            // integrand values restricted to degree d
            std::vector<NMatrix> rhs(steps + 1, NMatrix(dim));
            for (unsigned k = 0; k <= steps; ++k)
                rhs[k] = (ntil[k] * q[k]).keep_degree(d);
            // cumulative Simpson prefix integral
            std::vector<NMatrix> integral(steps + 1, NMatrix(dim));
            for (unsigned k = 1; k <= steps; ++k) {
                if (k % 2 == 0) {
                    integral[k] = integral[k - 2];
                    integral[k].accumulate(rhs[k - 2], h / 3);
                    integral[k].accumulate(rhs[k - 1], 4 * h / 3);
                    integral[k].accumulate(rhs[k], h / 3);
                } else {
                    integral[k] = integral[k - 1];
                    integral[k].accumulate(rhs[k - 1], 5 * h / 12);
                    integral[k].accumulate(rhs[k], 8 * h / 12);
                    integral[k].accumulate(rhs[k + 1 <= steps ? k + 1 : k], -h / 12);
                }
            }
            for (unsigned k = 0; k <= steps; ++k) {
                NMatrix upd = integral[k].keep_degree(d);
                q[k].accumulate(upd, -1.0);
            }
        }

        NMatrix pend(dim);
        for (unsigned r = 0; r < dim; ++r)
            for (unsigned c = 0; c < dim; ++c) pend.at(r, c).add(0, p0[steps][r][c]);
        total = (pend * q[steps]) * total;
    }

    TransportOperator out;
    out.exact = false;
    out.body_numeric.assign(std::size_t(dim) * dim, 0.0);
    for (unsigned r = 0; r < dim; ++r)
        for (unsigned c = 0; c < dim; ++c)
            for (const auto& [m, v] : total.at(r, c).t) {
                if (m == 0) out.body_numeric[std::size_t(r) * dim + c] = v;
                auto& slot = out.soul_numeric[m];
                if (slot.empty()) slot.assign(std::size_t(dim) * dim, 0.0);
                slot[std::size_t(r) * dim + c] = v;
            }
    return out;
}

} // namespace detail

} // namespace shol
