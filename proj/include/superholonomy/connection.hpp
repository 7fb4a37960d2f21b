#pragma once

#include <map>
#include <vector>

#include "superholonomy/patch.hpp"

namespace shol {

/// Connection on a free bundle over one patch, stored in right-component form:
/// nabla_{d_a} e_B = sum_C e_C * w[a]^C_B.  The classical Christoffel table
/// Gamma[a][B][C] (coefficients left of e_C) enters through set_christoffel.
struct ConnectionModel {
    PatchPtr patch;
    Shape bundle;
    std::vector<FMatrix> w;  // one matrix per coordinate direction

    ConnectionModel() = default;

    ConnectionModel(PatchPtr p, Shape b) : patch(std::move(p)), bundle(b) {
        w.assign(patch->coord_count(), fmatrix_zero(bundle, patch));
    }

    static ConnectionModel flat(PatchPtr p, Shape b) { return ConnectionModel(std::move(p), b); }

    /// Gamma[a][B][C] with the meaning nabla_{d_a} e_B = sum_C Gamma * e_C.
    void set_christoffel(unsigned a, unsigned B, unsigned C, const SuperFunction& gamma) {
        const unsigned want =
            (patch->coord_parity(a) + bundle.index_parity(B) + bundle.index_parity(C)) & 1u;
        require(gamma.homogeneous(want), errc::parity_error,
                "Christoffel entry has parity " + std::to_string(want ^ 1) + ", expected " +
                    std::to_string(want));
        // move the coefficient to the right of e_C
        bool flip = (want & 1u) && bundle.index_parity(C);
        w[a].at(C, B) += flip ? -gamma : gamma;
    }

    SuperFunction christoffel(unsigned a, unsigned B, unsigned C) const {
        bool flip = ((patch->coord_parity(a) + bundle.index_parity(B) + bundle.index_parity(C)) &
                     1u) &&
                    bundle.index_parity(C);
        return flip ? -w[a].at(C, B) : w[a].at(C, B);
    }

    bool is_flat_table() const {
        for (const auto& m : w)
            if (!m.is_zero()) return false;
        return true;
    }
};

/// Super commutator of the covariant derivative along coordinate a with a
/// matrix of structural parity m_parity: dhat_a M + W[a] M -+ M W[a].
inline FMatrix cov_op_bracket(const ConnectionModel& conn, unsigned a, const FMatrix& m,
                              unsigned m_parity) {
    FMatrix out = matrix_partial_fn(m, a, conn.patch);
    out += conn.w[a] * m;
    FMatrix mw = m * conn.w[a];
    if ((conn.patch->coord_parity(a) & m_parity) != 0) out += mw;
    else out -= mw;
    return out;
}

/// Tensor of curvature type evaluated on coordinate directions, plus the
/// parities of covariant-derivative slots already applied.
struct TensorTable {
    unsigned tensor_parity = 0;
    std::map<std::pair<unsigned, unsigned>, FMatrix> comp;

    const FMatrix& at(unsigned a, unsigned b) const { return comp.at({a, b}); }
};

/// R(d_a, d_b) = [D_a, D_b] as endomorphism components; antisupersymmetric in
/// (a, b) by construction.
inline TensorTable curvature(const ConnectionModel& conn) {
    const PatchPtr& patch = conn.patch;
    TensorTable R;
    R.tensor_parity = 0;
    const unsigned n = patch->coord_count();
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) {
            FMatrix m = matrix_partial_fn(conn.w[b], a, patch);
            FMatrix n2 = matrix_partial_fn(conn.w[a], b, patch);
            FMatrix wab = conn.w[a] * conn.w[b];
            FMatrix wba = conn.w[b] * conn.w[a];
            bool flip = patch->coord_parity(a) && patch->coord_parity(b);
            if (flip) {
                m += n2;
                wab += wba;
            } else {
                m -= n2;
                wab -= wba;
            }
            R.comp.emplace(std::make_pair(a, b), m + wab);
        }
    return R;
}

/// T(d_a, d_b) components in the coordinate frame.
inline std::vector<SuperFunction> torsion_component(const ConnectionModel& conn, unsigned a,
                                                    unsigned b) {
    const unsigned n = conn.patch->coord_count();
    std::vector<SuperFunction> t(n, conn.patch->fzero());
    bool flip = conn.patch->coord_parity(a) && conn.patch->coord_parity(b);
    for (unsigned d = 0; d < n; ++d) {
        t[d] = conn.w[a].at(d, b);
        if (flip) t[d] += conn.w[b].at(d, a);
        else t[d] -= conn.w[b].at(d, a);
    }
    return t;
}

inline bool torsion_free(const ConnectionModel& conn) {
    const unsigned n = conn.patch->coord_count();
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b)
            for (const auto& f : torsion_component(conn, a, b))
                if (!f.is_zero()) return false;
    return true;
}

/// First-order covariant derivative of a curvature-type tensor along d_c,
/// with `aux` differentiating the two tangent arguments.
inline TensorTable cov_derivative_once(const ConnectionModel& conn, const ConnectionModel& aux,
                                       const TensorTable& f, unsigned c) {
    const PatchPtr& patch = conn.patch;
    const unsigned n = patch->coord_count();
    const unsigned pc = patch->coord_parity(c);
    TensorTable out;
    out.tensor_parity = (f.tensor_parity + pc) & 1u;
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) {
            const unsigned pa = patch->coord_parity(a), pb = patch->coord_parity(b);
            FMatrix m = cov_op_bracket(conn, c, f.at(a, b),
                                       (f.tensor_parity + pa + pb) & 1u);
            for (unsigned d = 0; d < n; ++d) {
                const unsigned pd = patch->coord_parity(d);
                const SuperFunction& gda = aux.w[c].at(d, a);
                if (!gda.is_zero()) {
                    FMatrix term = f.at(d, b).scaled_right(gda);
                    if ((((pc + pd + pa) & 1u) & pb) != 0) m += term;
                    else m -= term;
                }
                const SuperFunction& gdb = aux.w[c].at(d, b);
                if (!gdb.is_zero()) {
                    FMatrix term = f.at(a, d).scaled_right(gdb);
                    if ((pc & pa) != 0) m += term;
                    else m -= term;
                }
            }
            out.comp.emplace(std::make_pair(a, b), m);
        }
    return out;
}

/// nabla^k_{Y_k..Y_1} F for coordinate directions dirs = [c_k, ..., c_1]
/// (dirs.front() is the outermost derivative).  The recursion subtracts the
/// auxiliary-connection corrections in each lower slot.
inline TensorTable higher_covariant_derivative(const ConnectionModel& conn,
                                               const ConnectionModel& aux, const TensorTable& f,
                                               const std::vector<unsigned>& dirs) {
    if (dirs.empty()) return f;
    const PatchPtr& patch = conn.patch;
    const unsigned n = patch->coord_count();
    const unsigned c = dirs.front();
    std::vector<unsigned> rest(dirs.begin() + 1, dirs.end());

    TensorTable base = higher_covariant_derivative(conn, aux, f, rest);
    TensorTable out = cov_derivative_once(conn, aux, base, c);
    if (rest.empty() || aux.is_flat_table()) return out;

    unsigned total = 0;
    for (unsigned r : rest) total += patch->coord_parity(r);
    const unsigned pc = patch->coord_parity(c);

    unsigned before = 0;  // parities of the slots outside (already passed)
    for (std::size_t m = 0; m < rest.size(); ++m) {
        const unsigned slot = rest[m];
        for (unsigned d = 0; d < n; ++d) {
            const SuperFunction& g = aux.w[c].at(d, slot);
            if (g.is_zero()) continue;
            std::vector<unsigned> dirs2 = rest;
            dirs2[m] = d;
            TensorTable t = higher_covariant_derivative(conn, aux, f, dirs2);
            const unsigned pg = (pc + patch->coord_parity(d) + patch->coord_parity(slot)) & 1u;
            const bool neg = (((pc & 1u) * total) + pg * before) & 1u;
            for (auto& [ab, mat] : out.comp) {
                FMatrix corr = t.at(ab.first, ab.second).scaled_left(g);
                if (neg) mat += corr;  // overall minus times the move sign
                else mat -= corr;
            }
        }
        before = (before + patch->coord_parity(slot)) & 1u;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics and Levi-Civita.
// ---------------------------------------------------------------------------

/// Even supersymmetric metric on the tangent bundle, g(d_a, d_b) = gram(a,b).
struct MetricModel {
    PatchPtr patch;
    FMatrix gram;

    void validate() const {
        const unsigned n = patch->coord_count();
        for (unsigned a = 0; a < n; ++a)
            for (unsigned b = 0; b < n; ++b) {
                unsigned want = (patch->coord_parity(a) + patch->coord_parity(b)) & 1u;
                require(gram.at(a, b).homogeneous(want), errc::parity_error,
                        "metric entry parity");
                bool flip = patch->coord_parity(a) && patch->coord_parity(b);
                SuperFunction rhs = flip ? -gram.at(b, a) : gram.at(b, a);
                require(gram.at(a, b) == rhs, errc::parity_error, "metric must be supersymmetric");
            }
    }
};

/// Exact inverse of a function-valued matrix whose body is x-constant and
/// whose remainder is nilpotent; otherwise NonInvertibleMetric.
inline FMatrix fmatrix_invert(const FMatrix& g, const PatchPtr& patch) {
    const unsigned n = g.dim();
    DenseMatrix g0(n, std::vector<Rational>(n, 0));
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) g0[a][b] = g.at(a, b).constant_coefficient().body();
    auto inv0 = invert_dense(g0);
    require(inv0.has_value(), errc::non_invertible_metric, "metric body is singular");

    FMatrix b_inv = fmatrix_zero(g.shape(), patch);
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b) b_inv.at(a, b) = patch->fconst((*inv0)[a][b]);

    FMatrix id = fmatrix_identity(g.shape(), patch);
    FMatrix nil = id - b_inv * g;
    FMatrix acc = id;
    FMatrix pow = id;
    for (unsigned k = 0; k <= patch->context()->total() + 1; ++k) {
        pow = pow * nil;
        if (pow.is_zero()) break;
        acc += pow;
        require(k < patch->context()->total() + 1, errc::non_invertible_metric,
                "matrix inverse series does not terminate (x-dependent body)");
    }
    return acc * b_inv;
}

/// Unique torsion-free metric connection, assembled from the Koszul data
/// K_abc = (1/2)(d_a g_bc + (-1)^{|a|(|b|+|c|)} d_b g_ca
///              - (-1)^{|c|(|a|+|b|)} d_c g_ab).
inline ConnectionModel levi_civita(const MetricModel& metric) {
    metric.validate();
    const PatchPtr& patch = metric.patch;
    const unsigned n = patch->coord_count();
    FMatrix ginv = fmatrix_invert(metric.gram, patch);

    ConnectionModel conn(patch, patch->tangent_shape());
    for (unsigned a = 0; a < n; ++a) {
        const unsigned pa = patch->coord_parity(a);
        FMatrix ktilde = fmatrix_zero(patch->tangent_shape(), patch);
        for (unsigned b = 0; b < n; ++b) {
            const unsigned pb = patch->coord_parity(b);
            for (unsigned cc = 0; cc < n; ++cc) {
                const unsigned pcc = patch->coord_parity(cc);
                SuperFunction k = patch->d_coord(a, metric.gram.at(b, cc));
                SuperFunction t2 = patch->d_coord(b, metric.gram.at(cc, a));
                if ((pa * ((pb + pcc) & 1u)) & 1u) k -= t2;
                else k += t2;
                SuperFunction t3 = patch->d_coord(cc, metric.gram.at(a, b));
                if ((pcc * ((pa + pb) & 1u)) & 1u) k += t3;
                else k -= t3;
                k = k * Rational(1, 2);
                // K~[a]_{c,b} = (-1)^{(|a|+|b|)|c|} K_abc
                if ((((pa + pb) & 1u) * pcc) & 1u) k = -k;
                ktilde.at(cc, b) += k;
            }
        }
        conn.w[a] = ginv * ktilde;
    }
    return conn;
}

/// Residual of the metric identity d_a g(Y,Z) = g(nabla_a Y, Z)
/// + (-1)^{|a||Y|} g(Y, nabla_a Z) on frame fields; zero iff metric.
inline SuperFunction metric_identity_residual(const ConnectionModel& conn,
                                              const MetricModel& metric, unsigned a, unsigned b,
                                              unsigned cc) {
    const PatchPtr& patch = conn.patch;
    const unsigned n = patch->coord_count();
    const unsigned pa = patch->coord_parity(a), pb = patch->coord_parity(b),
                   pcc = patch->coord_parity(cc);
    SuperFunction res = patch->d_coord(a, metric.gram.at(b, cc));
    for (unsigned d = 0; d < n; ++d) {
        const unsigned pd = patch->coord_parity(d);
        const SuperFunction& wdb = conn.w[a].at(d, b);
        if (!wdb.is_zero()) {
            SuperFunction term = metric.gram.at(d, cc) * wdb;
            if (((pa + pd + pb) * pcc) & 1u) res += term;
            else res -= term;
        }
        const SuperFunction& wdc = conn.w[a].at(d, cc);
        if (!wdc.is_zero()) {
            SuperFunction term = metric.gram.at(b, d) * wdc;
            if ((pa * pb) & 1u) res += term;
            else res -= term;
        }
    }
    return res;
}

inline bool metric_compatible(const ConnectionModel& conn, const MetricModel& metric) {
    const unsigned n = conn.patch->coord_count();
    for (unsigned a = 0; a < n; ++a)
        for (unsigned b = 0; b < n; ++b)
            for (unsigned cc = 0; cc < n; ++cc)
                if (!metric_identity_residual(conn, metric, a, b, cc).is_zero()) return false;
    return true;
}

} // namespace shol
