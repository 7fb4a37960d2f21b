#pragma once

#include <vector>

#include "superholonomy/grassmann.hpp"

namespace shol {

/// Algebra morphism between Grassmann algebras, given by odd images of the
/// source generators and extended multiplicatively.
class GrassmannMorphism {
public:
    GrassmannMorphism() = default;

    GrassmannMorphism(ContextPtr source, ContextPtr target, std::vector<GrassmannElement> images)
        : source_(std::move(source)), target_(std::move(target)), images_(std::move(images)) {
        require(images_.size() == source_->total(), errc::precondition,
                "one image per source generator");
        for (const auto& im : images_)
            require(im.homogeneous(1), errc::parity_error, "generator images must be odd");
    }

    static GrassmannMorphism identity(const ContextPtr& ctx) {
        std::vector<GrassmannElement> images;
        images.reserve(ctx->total());
        for (unsigned i = 0; i < ctx->total(); ++i)
            images.push_back(GrassmannElement::generator(ctx, i));
        return GrassmannMorphism(ctx, ctx, std::move(images));
    }

    const ContextPtr& source() const { return source_; }
    const ContextPtr& target() const { return target_; }
    const std::vector<GrassmannElement>& images() const { return images_; }
    const GrassmannElement& image(unsigned i) const { return images_.at(i); }

    GrassmannElement apply(const GrassmannElement& a) const {
        require(a.context() && (a.context() == source_ || *a.context() == *source_),
                errc::context_mismatch, "element not in morphism source");
        GrassmannElement out(target_);
        for (const auto& [m, c] : a.terms()) {
            GrassmannElement prod(target_, c);
            Mask rest = m;
            while (rest && !prod.is_zero()) {
                unsigned pos = static_cast<unsigned>(std::countr_zero(rest));
                rest &= rest - 1;
                prod = prod * images_[pos];
            }
            out += prod;
        }
        return out;
    }

    GrassmannMorphism then(const GrassmannMorphism& next) const {
        require(next.source_ && (*next.source_ == *target_), errc::context_mismatch,
                "composition mismatch");
        std::vector<GrassmannElement> images;
        images.reserve(images_.size());
        for (const auto& im : images_) images.push_back(next.apply(im));
        return GrassmannMorphism(source_, next.target_, std::move(images));
    }

    /// Matrix of degree-1 coefficients: entry (j, i) = coefficient of target
    /// generator j in the image of source generator i.
    std::vector<std::vector<Rational>> linear_part() const {
        std::vector<std::vector<Rational>> m(target_->total(),
                                             std::vector<Rational>(source_->total(), 0));
        for (unsigned i = 0; i < source_->total(); ++i)
            for (const auto& [mask, c] : images_[i].terms())
                if (mask_degree(mask) == 1)
                    m[static_cast<unsigned>(std::countr_zero(mask))][i] = c;
        return m;
    }

private:
    ContextPtr source_;
    ContextPtr target_;
    std::vector<GrassmannElement> images_;
};

} // namespace shol
