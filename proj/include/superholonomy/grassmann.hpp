#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "superholonomy/errors.hpp"
#include "superholonomy/rational.hpp"

namespace shol {

using Mask = std::uint64_t;

inline unsigned mask_degree(Mask m) { return static_cast<unsigned>(std::popcount(m)); }
inline unsigned mask_parity(Mask m) { return mask_degree(m) & 1u; }

/// Sign picked up when reordering the concatenation of two sorted index sets
/// into one sorted set: (-1)^{#inversions}.  Disjointness is the caller's
/// business.
inline int merge_sign(Mask a, Mask b) {
    unsigned inv = 0;
    Mask rest = b;
    while (rest) {
        unsigned pos = static_cast<unsigned>(std::countr_zero(rest));
        rest &= rest - 1;
        Mask above = (pos >= 63) ? 0 : (a >> (pos + 1));
        inv += mask_degree(above);
    }
    return (inv & 1u) ? -1 : 1;
}

/// Ordered generator families of one finite Grassmann algebra.  Generators get
/// consecutive global indices (0-based internally, 1-based within a family for
/// display), and monomials are encoded as 64-bit masks.
class GeneratorContext {
public:
    struct Family {
        std::string name;
        unsigned offset = 0;
        unsigned count = 0;
    };

    GeneratorContext() = default;

    explicit GeneratorContext(std::vector<std::pair<std::string, unsigned>> families) {
        unsigned off = 0;
        for (auto& [name, count] : families) {
            for (const auto& f : families_)
                require(f.name != name, errc::precondition, "duplicate family " + name);
            families_.push_back({name, off, count});
            off += count;
        }
        require(off <= 64, errc::precondition, "generator cap is 64");
        total_ = off;
    }

    unsigned total() const { return total_; }

    const Family& family(const std::string& name) const {
        for (const auto& f : families_)
            if (f.name == name) return f;
        fail(errc::unknown_symbol, "no generator family " + name);
    }

    bool has_family(const std::string& name) const {
        for (const auto& f : families_)
            if (f.name == name) return true;
        return false;
    }

    const std::vector<Family>& families() const { return families_; }

    Mask family_mask(const std::string& name) const {
        const Family& f = family(name);
        if (f.count == 0) return 0;
        Mask ones = (f.count >= 64) ? ~Mask(0) : ((Mask(1) << f.count) - 1);
        return ones << f.offset;
    }

    /// Global 0-based index of the j-th generator (1-based) of a family.
    unsigned index_of(const std::string& name, unsigned j) const {
        const Family& f = family(name);
        require(j >= 1 && j <= f.count, errc::unknown_symbol,
                name + std::to_string(j) + " out of range");
        return f.offset + (j - 1);
    }

    std::string gen_name(unsigned global) const {
        for (const auto& f : families_)
            if (global >= f.offset && global < f.offset + f.count)
                return f.name + std::to_string(global - f.offset + 1);
        return "g" + std::to_string(global);
    }

    bool operator==(const GeneratorContext& o) const {
        if (total_ != o.total_ || families_.size() != o.families_.size()) return false;
        for (std::size_t i = 0; i < families_.size(); ++i)
            if (families_[i].name != o.families_[i].name ||
                families_[i].offset != o.families_[i].offset ||
                families_[i].count != o.families_[i].count)
                return false;
        return true;
    }

private:
    std::vector<Family> families_;
    unsigned total_ = 0;
};

using ContextPtr = std::shared_ptr<const GeneratorContext>;

inline ContextPtr make_context(std::vector<std::pair<std::string, unsigned>> families) {
    return std::make_shared<const GeneratorContext>(std::move(families));
}

inline ContextPtr single_family_context(unsigned n, const std::string& name = "eta") {
    return make_context({{name, n}});
}

/// Element of the Grassmann algebra over a GeneratorContext, exact over Q.
/// Terms map sorted generator subsets (bitmasks) to nonzero coefficients.
class GrassmannElement {
public:
    GrassmannElement() = default;

    explicit GrassmannElement(ContextPtr ctx) : ctx_(std::move(ctx)) {}

    GrassmannElement(ContextPtr ctx, const Rational& scalar) : ctx_(std::move(ctx)) {
        if (scalar != 0) terms_[0] = scalar;
    }

    static GrassmannElement monomial(ContextPtr ctx, Mask m, const Rational& coeff = 1) {
        GrassmannElement e(std::move(ctx));
        if (coeff != 0) e.terms_[m] = coeff;
        return e;
    }

    static GrassmannElement generator(ContextPtr ctx, unsigned global_index) {
        require(global_index < ctx->total(), errc::unknown_symbol, "generator index");
        return monomial(std::move(ctx), Mask(1) << global_index);
    }

    static GrassmannElement generator(const ContextPtr& ctx, const std::string& family,
                                      unsigned j) {
        return generator(ctx, ctx->index_of(family, j));
    }

    const ContextPtr& context() const { return ctx_; }
    const std::map<Mask, Rational>& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }

    bool compatible(const GrassmannElement& o) const {
        if (ctx_ == o.ctx_) return true;
        return ctx_ && o.ctx_ && *ctx_ == *o.ctx_;
    }

    Rational coeff(Mask m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? Rational(0) : it->second;
    }

    Rational body() const { return coeff(0); }

    GrassmannElement soul() const {
        GrassmannElement s(ctx_);
        for (const auto& [m, c] : terms_)
            if (m != 0) s.terms_[m] = c;
        return s;
    }

    /// 0 = even, 1 = odd, nullopt = inhomogeneous.  Zero counts as even.
    std::optional<unsigned> parity() const {
        std::optional<unsigned> p;
        for (const auto& [m, c] : terms_) {
            unsigned q = mask_parity(m);
            if (!p) p = q;
            else if (*p != q) return std::nullopt;
        }
        return p ? p : std::optional<unsigned>(0);
    }

    bool homogeneous(unsigned p) const {
        for (const auto& [m, c] : terms_)
            if (mask_parity(m) != (p & 1u)) return false;
        return true;
    }

    GrassmannElement parity_part(unsigned p) const {
        GrassmannElement r(ctx_);
        for (const auto& [m, c] : terms_)
            if (mask_parity(m) == (p & 1u)) r.terms_[m] = c;
        return r;
    }

    unsigned max_degree() const {
        unsigned d = 0;
        for (const auto& [m, c] : terms_) d = std::max(d, mask_degree(m));
        return d;
    }

    GrassmannElement& operator+=(const GrassmannElement& o) {
        check(o);
        if (!ctx_) ctx_ = o.ctx_;
        for (const auto& [m, c] : o.terms_) add_term(m, c);
        return *this;
    }

    GrassmannElement& operator-=(const GrassmannElement& o) {
        check(o);
        if (!ctx_) ctx_ = o.ctx_;
        for (const auto& [m, c] : o.terms_) add_term(m, -c);
        return *this;
    }

    friend GrassmannElement operator+(GrassmannElement a, const GrassmannElement& b) {
        a += b;
        return a;
    }
    friend GrassmannElement operator-(GrassmannElement a, const GrassmannElement& b) {
        a -= b;
        return a;
    }

    GrassmannElement operator-() const {
        GrassmannElement r(ctx_);
        for (const auto& [m, c] : terms_) r.terms_[m] = -c;
        return r;
    }

    friend GrassmannElement operator*(const GrassmannElement& a, const GrassmannElement& b) {
        a.check(b);
        GrassmannElement r(a.ctx_ ? a.ctx_ : b.ctx_);
        for (const auto& [ma, ca] : a.terms_) {
            for (const auto& [mb, cb] : b.terms_) {
                if (ma & mb) continue;
                Rational c = ca * cb;
                if (merge_sign(ma, mb) < 0) c = -c;
                r.add_term(ma | mb, c);
            }
        }
        return r;
    }

    GrassmannElement& operator*=(const GrassmannElement& o) { return *this = *this * o; }

    friend GrassmannElement operator*(const GrassmannElement& a, const Rational& s) {
        GrassmannElement r(a.ctx_);
        if (s != 0)
            for (const auto& [m, c] : a.terms_) r.terms_[m] = c * s;
        return r;
    }
    friend GrassmannElement operator*(const Rational& s, const GrassmannElement& a) {
        return a * s;
    }

    bool operator==(const GrassmannElement& o) const {
        if (!compatible(o)) return false;
        return terms_ == o.terms_;
    }
    bool operator!=(const GrassmannElement& o) const { return !(*this == o); }

    /// Total order for canonical containers; compares term maps.
    bool operator<(const GrassmannElement& o) const { return terms_ < o.terms_; }

    /// Exact inverse via the terminating geometric series in soul/body.
    GrassmannElement invert() const {
        Rational b = body();
        require(b != 0, errc::not_invertible, "zero body");
        GrassmannElement n = soul() * (Rational(-1) / b);
        GrassmannElement acc(ctx_, Rational(1));
        GrassmannElement pow(ctx_, Rational(1));
        while (true) {
            pow = pow * n;
            if (pow.is_zero()) break;
            acc += pow;
        }
        return acc * (Rational(1) / b);
    }

    /// Left odd derivation by generator `i` (global index).
    GrassmannElement left_partial(unsigned i) const {
        require(ctx_ && i < ctx_->total(), errc::unknown_symbol, "generator index");
        GrassmannElement r(ctx_);
        Mask bit = Mask(1) << i;
        Mask below = bit - 1;
        for (const auto& [m, c] : terms_) {
            if (!(m & bit)) continue;
            int sg = (mask_degree(m & below) & 1u) ? -1 : 1;
            r.add_term(m & ~bit, sg > 0 ? c : -c);
        }
        return r;
    }

    /// Expansion a = sum_I result[I] * eta^I over the named family, with each
    /// result[I] free of that family and multiplying eta^I from the left.
    std::map<Mask, GrassmannElement> coefficient_split(const std::string& family) const {
        Mask fam = ctx_->family_mask(family);
        std::map<Mask, GrassmannElement> out;
        for (const auto& [m, c] : terms_) {
            Mask I = m & fam;
            Mask R = m & ~fam;
            auto it = out.find(I);
            if (it == out.end()) it = out.emplace(I, GrassmannElement(ctx_)).first;
            int sg = merge_sign(R, I);
            it->second.add_term(R, sg > 0 ? c : -c);
        }
        return out;
    }

    /// Keep only terms whose intersection with `fam` has degree <= bound.
    GrassmannElement truncate_family_degree(Mask fam, unsigned bound, bool keep_low) const {
        GrassmannElement r(ctx_);
        for (const auto& [m, c] : terms_) {
            bool low = mask_degree(m & fam) <= bound;
            if (low == keep_low) r.terms_[m] = c;
        }
        return r;
    }

    /// Substitute zero for every generator in `fam`.
    GrassmannElement project_away(Mask fam) const {
        GrassmannElement r(ctx_);
        for (const auto& [m, c] : terms_)
            if (!(m & fam)) r.terms_[m] = c;
        return r;
    }

    bool involves(Mask fam) const {
        for (const auto& [m, c] : terms_)
            if (m & fam) return true;
        return false;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [m, c] : terms_) {
            Rational a = c;
            if (first) {
                if (a < 0) { os << "-"; a = -a; }
            } else {
                os << (a < 0 ? " - " : " + ");
                if (a < 0) a = -a;
            }
            first = false;
            bool unit = (a == 1) && m != 0;
            if (!unit) os << to_string(a);
            Mask rest = m;
            bool firstgen = unit;
            while (rest) {
                unsigned pos = static_cast<unsigned>(std::countr_zero(rest));
                rest &= rest - 1;
                if (!firstgen) os << "*";
                else if (!unit) os << "*";
                os << ctx_->gen_name(pos);
                firstgen = false;
            }
        }
        return os.str();
    }

    void add_term(Mask m, const Rational& c) {
        if (c == 0) return;
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_.emplace(m, c);
        } else {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

private:
    void check(const GrassmannElement& o) const {
        require(!ctx_ || !o.ctx_ || compatible(o), errc::context_mismatch,
                "operands live in different generator contexts");
    }

    ContextPtr ctx_;
    std::map<Mask, Rational> terms_;
};

inline GrassmannElement reassemble_split(const ContextPtr& ctx,
                                         const std::map<Mask, GrassmannElement>& split) {
    GrassmannElement out(ctx);
    for (const auto& [I, coeff] : split)
        out += coeff * GrassmannElement::monomial(ctx, I);
    return out;
}

} // namespace shol
