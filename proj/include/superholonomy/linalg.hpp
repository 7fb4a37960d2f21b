#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "superholonomy/rational.hpp"

namespace shol {

/// Sparse vector over Q with 64-bit coordinate labels, kept sorted by label.
using SparseRow = std::vector<std::pair<std::uint64_t, Rational>>;

inline void row_normalize(SparseRow& r) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseRow out;
    out.reserve(r.size());
    for (auto& [k, v] : r) {
        if (!out.empty() && out.back().first == k) out.back().second += v;
        else out.emplace_back(k, v);
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const auto& kv) { return kv.second == 0; }),
              out.end());
    r = std::move(out);
}

/// r += c * s (both sorted).
inline void row_axpy(SparseRow& r, const Rational& c, const SparseRow& s) {
    if (c == 0 || s.empty()) return;
    SparseRow out;
    out.reserve(r.size() + s.size());
    std::size_t i = 0, j = 0;
    while (i < r.size() || j < s.size()) {
        if (j == s.size() || (i < r.size() && r[i].first < s[j].first)) {
            out.push_back(r[i++]);
        } else if (i == r.size() || s[j].first < r[i].first) {
            Rational v = c * s[j].second;
            if (v != 0) out.emplace_back(s[j].first, v);
            ++j;
        } else {
            Rational v = r[i].second + c * s[j].second;
            if (v != 0) out.emplace_back(r[i].first, v);
            ++i;
            ++j;
        }
    }
    r = std::move(out);
}

inline void row_scale(SparseRow& r, const Rational& c) {
    for (auto& [k, v] : r) v *= c;
}

/// Exact row space in reduced echelon form.  The basis after any sequence of
/// insertions is the canonical RREF of the span, independent of input order.
class SpanBasis {
public:
    /// Reduce `row` against the basis; returns the residual.
    SparseRow reduce(SparseRow row) const {
        for (const auto& b : rows_) {
            if (row.empty()) break;
            const std::uint64_t piv = b.front().first;
            auto it = std::lower_bound(row.begin(), row.end(), piv,
                                       [](const auto& kv, std::uint64_t k) { return kv.first < k; });
            if (it != row.end() && it->first == piv) row_axpy(row, -it->second, b);
        }
        return row;
    }

    bool contains(const SparseRow& row) const { return reduce(row).empty(); }

    /// Insert a vector; returns true if the dimension grew.
    bool insert(SparseRow row) {
        row_normalize(row);
        row = reduce(std::move(row));
        if (row.empty()) return false;
        row_scale(row, Rational(1) / row.front().second);
        // eliminate the new pivot from existing rows, keep rows sorted by pivot
        const std::uint64_t piv = row.front().first;
        for (auto& b : rows_) {
            auto it = std::lower_bound(b.begin(), b.end(), piv,
                                       [](const auto& kv, std::uint64_t k) { return kv.first < k; });
            if (it != b.end() && it->first == piv) row_axpy(b, -it->second, row);
        }
        auto pos = std::lower_bound(rows_.begin(), rows_.end(), piv,
                                    [](const SparseRow& r, std::uint64_t k) {
                                        return r.front().first < k;
                                    });
        rows_.insert(pos, std::move(row));
        return true;
    }

    std::size_t dim() const { return rows_.size(); }
    const std::vector<SparseRow>& rows() const { return rows_; }

    bool operator==(const SpanBasis& o) const { return rows_ == o.rows_; }
    bool operator!=(const SpanBasis& o) const { return !(*this == o); }

    /// Basis of the subspace { v in span : v has zero entries on all labels
    /// with drop(label) true }.
    SpanBasis subspan_vanishing_on(const std::function<bool(std::uint64_t)>& drop) const {
        // Solve for combinations of the basis rows whose "dropped" block is 0.
        const std::size_t n = rows_.size();
        std::vector<std::uint64_t> cols;
        for (const auto& r : rows_)
            for (const auto& [k, v] : r)
                if (drop(k)) cols.push_back(k);
        std::sort(cols.begin(), cols.end());
        cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
        std::vector<std::vector<Rational>> m(cols.size(), std::vector<Rational>(n, 0));
        for (std::size_t j = 0; j < n; ++j)
            for (const auto& [k, v] : rows_[j]) {
                auto it = std::lower_bound(cols.begin(), cols.end(), k);
                if (it != cols.end() && *it == k) m[it - cols.begin()][j] = v;
            }
        SpanBasis out;
        for (const auto& combo : nullspace_dense(m, n)) {
            SparseRow v;
            for (std::size_t j = 0; j < n; ++j)
                if (combo[j] != 0) row_axpy(v, combo[j], rows_[j]);
            out.insert(std::move(v));
        }
        return out;
    }

    /// Dense helper: nullspace of an (rows x ncols) matrix.
    static std::vector<std::vector<Rational>> nullspace_dense(std::vector<std::vector<Rational>> a,
                                                              std::size_t ncols) {
        const std::size_t nrows = a.size();
        std::vector<std::size_t> pivot_col;
        std::size_t row = 0;
        for (std::size_t col = 0; col < ncols && row < nrows; ++col) {
            std::size_t sel = nrows;
            for (std::size_t r = row; r < nrows; ++r)
                if (a[r][col] != 0) { sel = r; break; }
            if (sel == nrows) continue;
            std::swap(a[row], a[sel]);
            Rational inv = Rational(1) / a[row][col];
            for (auto& x : a[row]) x *= inv;
            for (std::size_t r = 0; r < nrows; ++r) {
                if (r == row || a[r][col] == 0) continue;
                Rational f = a[r][col];
                for (std::size_t c2 = 0; c2 < ncols; ++c2) a[r][c2] -= f * a[row][c2];
            }
            pivot_col.push_back(col);
            ++row;
        }
        std::vector<bool> is_pivot(ncols, false);
        for (auto c : pivot_col) is_pivot[c] = true;
        std::vector<std::vector<Rational>> basis;
        for (std::size_t free = 0; free < ncols; ++free) {
            if (is_pivot[free]) continue;
            std::vector<Rational> v(ncols, 0);
            v[free] = 1;
            for (std::size_t r = 0; r < pivot_col.size(); ++r)
                v[pivot_col[r]] = -a[r][free];
            basis.push_back(std::move(v));
        }
        return basis;
    }

private:
    std::vector<SparseRow> rows_;
};

// ---------------------------------------------------------------------------
// Small dense exact solvers.
// ---------------------------------------------------------------------------

using DenseMatrix = std::vector<std::vector<Rational>>;

inline std::size_t rank_dense(DenseMatrix a) {
    if (a.empty()) return 0;
    const std::size_t nrows = a.size(), ncols = a[0].size();
    std::size_t row = 0;
    for (std::size_t col = 0; col < ncols && row < nrows; ++col) {
        std::size_t sel = nrows;
        for (std::size_t r = row; r < nrows; ++r)
            if (a[r][col] != 0) { sel = r; break; }
        if (sel == nrows) continue;
        std::swap(a[row], a[sel]);
        for (std::size_t r = row + 1; r < nrows; ++r) {
            if (a[r][col] == 0) continue;
            Rational f = a[r][col] / a[row][col];
            for (std::size_t c2 = col; c2 < ncols; ++c2) a[r][c2] -= f * a[row][c2];
        }
        ++row;
    }
    return row;
}

/// Solve A x = b exactly; nullopt when inconsistent.  When the system is
/// underdetermined an arbitrary solution (free variables = 0) is returned.
inline std::optional<std::vector<Rational>> solve_dense(DenseMatrix a,
                                                        std::vector<Rational> b) {
    const std::size_t nrows = a.size();
    const std::size_t ncols = nrows ? a[0].size() : 0;
    std::vector<std::size_t> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < ncols && row < nrows; ++col) {
        std::size_t sel = nrows;
        for (std::size_t r = row; r < nrows; ++r)
            if (a[r][col] != 0) { sel = r; break; }
        if (sel == nrows) continue;
        std::swap(a[row], a[sel]);
        std::swap(b[row], b[sel]);
        Rational inv = Rational(1) / a[row][col];
        for (auto& x : a[row]) x *= inv;
        b[row] *= inv;
        for (std::size_t r = 0; r < nrows; ++r) {
            if (r == row || a[r][col] == 0) continue;
            Rational f = a[r][col];
            for (std::size_t c2 = 0; c2 < ncols; ++c2) a[r][c2] -= f * a[row][c2];
            b[r] -= f * b[row];
        }
        pivot_col.push_back(col);
        ++row;
    }
    for (std::size_t r = row; r < nrows; ++r)
        if (b[r] != 0) return std::nullopt;
    std::vector<Rational> x(ncols, 0);
    for (std::size_t r = 0; r < pivot_col.size(); ++r) x[pivot_col[r]] = b[r];
    return x;
}

inline std::optional<DenseMatrix> invert_dense(const DenseMatrix& a) {
    const std::size_t n = a.size();
    DenseMatrix work(n, std::vector<Rational>(2 * n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) work[i][j] = a[i][j];
        work[i][n + i] = 1;
    }
    std::size_t row = 0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t sel = n;
        for (std::size_t r = row; r < n; ++r)
            if (work[r][col] != 0) { sel = r; break; }
        if (sel == n) return std::nullopt;
        std::swap(work[row], work[sel]);
        Rational inv = Rational(1) / work[row][col];
        for (auto& x : work[row]) x *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == row || work[r][col] == 0) continue;
            Rational f = work[r][col];
            for (std::size_t c2 = 0; c2 < 2 * n; ++c2) work[r][c2] -= f * work[row][c2];
        }
        ++row;
    }
    DenseMatrix out(n, std::vector<Rational>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i][j] = work[i][n + j];
    return out;
}

} // namespace shol
