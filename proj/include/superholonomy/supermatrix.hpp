#pragma once

#include <vector>

#include "superholonomy/grassmann.hpp"
#include "superholonomy/linalg.hpp"

namespace shol {

/// Block structure (r|s): the first `even` indices are even, the rest odd.
struct Shape {
    unsigned even = 0;
    unsigned odd = 0;

    unsigned dim() const { return even + odd; }
    unsigned index_parity(unsigned i) const { return i < even ? 0u : 1u; }
    bool operator==(const Shape& o) const { return even == o.even && odd == o.odd; }
};

/// Square supermatrix over a supercommutative ring R (Grassmann elements or
/// superfunctions).  Multiplication is the plain matrix product; all grading
/// bookkeeping lives in the parities of the entries: a homogeneous matrix of
/// parity p has entry (k,n) of ring parity p + |k| + |n|.
template <class R>
class SuperMatrix {
public:
    SuperMatrix() = default;

    SuperMatrix(Shape shape, R zero) : shape_(shape), zero_(zero),
        entries_(std::size_t(shape.dim()) * shape.dim(), zero) {}

    static SuperMatrix identity(Shape shape, const R& zero, const R& one) {
        SuperMatrix m(shape, zero);
        for (unsigned i = 0; i < shape.dim(); ++i) m.at(i, i) = one;
        return m;
    }

    const Shape& shape() const { return shape_; }
    unsigned dim() const { return shape_.dim(); }
    const R& zero_element() const { return zero_; }

    R& at(unsigned r, unsigned c) { return entries_[std::size_t(r) * dim() + c]; }
    const R& at(unsigned r, unsigned c) const { return entries_[std::size_t(r) * dim() + c]; }

    bool is_zero() const {
        for (const auto& e : entries_)
            if (!e.is_zero()) return false;
        return true;
    }

    /// 0/1 for homogeneous, nullopt for inhomogeneous (zero counts as even).
    std::optional<unsigned> parity() const {
        std::optional<unsigned> p;
        for (unsigned r = 0; r < dim(); ++r)
            for (unsigned c = 0; c < dim(); ++c) {
                const R& e = at(r, c);
                if (e.is_zero()) continue;
                auto ep = e.parity();
                if (!ep) return std::nullopt;
                unsigned q = (*ep + shape_.index_parity(r) + shape_.index_parity(c)) & 1u;
                if (!p) p = q;
                else if (*p != q) return std::nullopt;
            }
        return p ? p : std::optional<unsigned>(0);
    }

    SuperMatrix parity_part(unsigned p) const {
        SuperMatrix out(shape_, zero_);
        for (unsigned r = 0; r < dim(); ++r)
            for (unsigned c = 0; c < dim(); ++c)
                out.at(r, c) =
                    at(r, c).parity_part((p + shape_.index_parity(r) + shape_.index_parity(c)) & 1u);
        return out;
    }

    friend SuperMatrix operator+(SuperMatrix a, const SuperMatrix& b) {
        for (std::size_t i = 0; i < a.entries_.size(); ++i) a.entries_[i] += b.entries_[i];
        return a;
    }
    friend SuperMatrix operator-(SuperMatrix a, const SuperMatrix& b) {
        for (std::size_t i = 0; i < a.entries_.size(); ++i) a.entries_[i] -= b.entries_[i];
        return a;
    }
    SuperMatrix operator-() const {
        SuperMatrix out = *this;
        for (auto& e : out.entries_) e = -e;
        return out;
    }
    SuperMatrix& operator+=(const SuperMatrix& o) { return *this = *this + o; }
    SuperMatrix& operator-=(const SuperMatrix& o) { return *this = *this - o; }

    friend SuperMatrix operator*(const SuperMatrix& a, const SuperMatrix& b) {
        SuperMatrix out(a.shape_, a.zero_);
        for (unsigned r = 0; r < a.dim(); ++r)
            for (unsigned k = 0; k < a.dim(); ++k) {
                const R& ark = a.at(r, k);
                if (ark.is_zero()) continue;
                for (unsigned c = 0; c < a.dim(); ++c) {
                    const R& bkc = b.at(k, c);
                    if (bkc.is_zero()) continue;
                    out.at(r, c) += ark * bkc;
                }
            }
        return out;
    }

    /// Entrywise right multiplication by a scalar.
    SuperMatrix scaled_right(const R& f) const {
        SuperMatrix out(shape_, zero_);
        for (std::size_t i = 0; i < entries_.size(); ++i) out.entries_[i] = entries_[i] * f;
        return out;
    }

    /// Left multiplication by a scalar picks up the row-parity sign.
    SuperMatrix scaled_left(const R& f) const {
        SuperMatrix out(shape_, zero_);
        for (unsigned p : {0u, 1u}) {
            R fp = f.parity_part(p);
            if (fp.is_zero()) continue;
            for (unsigned r = 0; r < dim(); ++r) {
                bool flip = p && shape_.index_parity(r);
                for (unsigned c = 0; c < dim(); ++c) {
                    R v = fp * at(r, c);
                    out.at(r, c) += flip ? -v : v;
                }
            }
        }
        return out;
    }

    SuperMatrix scaled(const Rational& q) const {
        SuperMatrix out = *this;
        for (auto& e : out.entries_) e = e * q;
        return out;
    }

    bool operator==(const SuperMatrix& o) const {
        return shape_ == o.shape_ && entries_ == o.entries_;
    }
    bool operator!=(const SuperMatrix& o) const { return !(*this == o); }

private:
    Shape shape_;
    R zero_;
    std::vector<R> entries_;
};

/// [X,Y] = XY - (-1)^{|X||Y|} YX for homogeneous X, Y.
template <class R>
SuperMatrix<R> supercommutator(const SuperMatrix<R>& x, const SuperMatrix<R>& y) {
    auto px = x.parity(), py = y.parity();
    require(px && py, errc::inhomogeneous, "supercommutator needs homogeneous arguments");
    SuperMatrix<R> xy = x * y;
    SuperMatrix<R> yx = y * x;
    return (*px && *py) ? xy + yx : xy - yx;
}

// ---------------------------------------------------------------------------
// Grassmann-entry specifics.
// ---------------------------------------------------------------------------

using GMatrix = SuperMatrix<GrassmannElement>;

inline GMatrix gmatrix_zero(Shape shape, const ContextPtr& ctx) {
    return GMatrix(shape, GrassmannElement(ctx));
}

inline GMatrix gmatrix_identity(Shape shape, const ContextPtr& ctx) {
    return GMatrix::identity(shape, GrassmannElement(ctx), GrassmannElement(ctx, Rational(1)));
}

inline DenseMatrix body_matrix(const GMatrix& m) {
    DenseMatrix out(m.dim(), std::vector<Rational>(m.dim(), 0));
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c) out[r][c] = m.at(r, c).body();
    return out;
}

inline bool body_is_zero(const GMatrix& m) {
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            if (m.at(r, c).body() != 0) return false;
    return true;
}

/// Exact inverse: invert the body, then run the terminating geometric series
/// on the nilpotent remainder.
inline GMatrix invert(const GMatrix& m, const ContextPtr& ctx) {
    auto b = invert_dense(body_matrix(m));
    require(b.has_value(), errc::not_invertible, "matrix body is singular");
    GMatrix b_inv = gmatrix_zero(m.shape(), ctx);
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            b_inv.at(r, c) = GrassmannElement(ctx, (*b)[r][c]);
    GMatrix id = gmatrix_identity(m.shape(), ctx);
    GMatrix n = id - b_inv * m;  // nilpotent
    GMatrix acc = id;
    GMatrix pow = id;
    for (;;) {
        pow = pow * n;
        if (pow.is_zero()) break;
        acc += pow;
    }
    return acc * b_inv;
}

/// exp of a nilpotent matrix (zero body), summed exactly.
inline GMatrix exp_nilpotent(const GMatrix& m, const ContextPtr& ctx) {
    require(body_is_zero(m), errc::precondition, "exp requires a nilpotent (soul-valued) matrix");
    GMatrix acc = gmatrix_identity(m.shape(), ctx);
    GMatrix pow = acc;
    Rational factorial(1);
    for (unsigned k = 1;; ++k) {
        pow = pow * m;
        if (pow.is_zero()) break;
        factorial *= k;
        acc += pow.scaled(Rational(1) / factorial);
    }
    return acc;
}

/// Row-parity-signed entrywise derivative: the derivative of supermatrices
/// satisfying d(MN) = dM N + (-1)^{|M|} M dN for odd generators.
inline GMatrix matrix_partial(const GMatrix& m, unsigned gen, const ContextPtr& ctx) {
    GMatrix out = gmatrix_zero(m.shape(), ctx);
    for (unsigned r = 0; r < m.dim(); ++r) {
        bool flip = m.shape().index_parity(r) != 0;
        for (unsigned c = 0; c < m.dim(); ++c) {
            GrassmannElement d = m.at(r, c).left_partial(gen);
            out.at(r, c) = flip ? -d : d;
        }
    }
    return out;
}

/// Flatten to a sparse Q-vector indexed by (cell, monomial).
inline SparseRow flatten(const GMatrix& m, const ContextPtr& ctx) {
    const unsigned shift = ctx->total();
    SparseRow row;
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            for (const auto& [mask, coeff] : m.at(r, c).terms())
                row.emplace_back((std::uint64_t(r) * m.dim() + c) << shift | mask, coeff);
    row_normalize(row);
    return row;
}

inline GMatrix unflatten(const SparseRow& row, Shape shape, const ContextPtr& ctx) {
    const unsigned shift = ctx->total();
    const Mask mask_bits = (shift >= 64) ? ~Mask(0) : ((Mask(1) << shift) - 1);
    GMatrix m = gmatrix_zero(shape, ctx);
    for (const auto& [label, coeff] : row) {
        std::uint64_t cell = label >> shift;
        unsigned r = unsigned(cell / shape.dim());
        unsigned c = unsigned(cell % shape.dim());
        m.at(r, c).add_term(label & mask_bits, coeff);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Vectors with declared parity.
// ---------------------------------------------------------------------------

/// Component column vector of a free supermodule, components on the right of
/// the frame: Z = sum_B e_B Z^B.  A homogeneous vector of parity p has
/// |Z^B| = p + |B|.
struct GVector {
    Shape shape;
    unsigned parity = 0;  // declared parity
    std::vector<GrassmannElement> comps;

    GVector() = default;
    GVector(Shape s, unsigned p, const ContextPtr& ctx)
        : shape(s), parity(p), comps(s.dim(), GrassmannElement(ctx)) {}

    bool parity_consistent() const {
        for (unsigned i = 0; i < comps.size(); ++i)
            if (!comps[i].homogeneous((parity + shape.index_parity(i)) & 1u)) return false;
        return true;
    }

    bool is_zero() const {
        for (const auto& c : comps)
            if (!c.is_zero()) return false;
        return true;
    }

    bool operator==(const GVector& o) const {
        return shape == o.shape && comps == o.comps;
    }
};

inline GVector matvec(const GMatrix& m, const GVector& v) {
    GVector out(m.shape(), 0, ContextPtr{});
    out.comps.assign(m.dim(), m.zero_element());
    auto mp = m.parity();
    out.parity = ((mp ? *mp : 0) + v.parity) & 1u;
    for (unsigned r = 0; r < m.dim(); ++r)
        for (unsigned c = 0; c < m.dim(); ++c)
            out.comps[r] += m.at(r, c) * v.comps[c];
    return out;
}

inline SparseRow flatten(const GVector& v, const ContextPtr& ctx) {
    const unsigned shift = ctx->total();
    SparseRow row;
    for (unsigned i = 0; i < v.comps.size(); ++i)
        for (const auto& [mask, coeff] : v.comps[i].terms())
            row.emplace_back(std::uint64_t(i) << shift | mask, coeff);
    row_normalize(row);
    return row;
}

} // namespace shol
