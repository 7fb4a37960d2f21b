#include <catch_amalgamated.hpp>

#include "superholonomy/derham.hpp"
#include "test_models.hpp"

using namespace shol;

namespace {

/// Product metric on R^{0|4}: symplectic blocks (1 + l1 th1 th2) and
/// (1 + l2 th3 th4); a zero coefficient leaves the block flat.
struct ProductMetric {
    PatchPtr patch;
    MetricModel metric;
    ConnectionModel conn;
    HolonomyModel model;

    ProductMetric(const Rational& l1, const Rational& l2, unsigned L = 2, unsigned cap = 4)
        : patch(make_patch(0, 4, L, cap)), metric{patch, fmatrix_zero(Shape{0, 4}, patch)} {
        auto ctx = patch->context();
        auto th = [&](unsigned j) { return GrassmannElement::generator(ctx, "th", j); };
        SuperFunction g12 = patch->fconst(Rational(1)) + patch->fconst(th(1) * th(2) * l1);
        SuperFunction g34 = patch->fconst(Rational(1)) + patch->fconst(th(3) * th(4) * l2);
        metric.gram.at(0, 1) = g12;
        metric.gram.at(1, 0) = -g12;
        metric.gram.at(2, 3) = g34;
        metric.gram.at(3, 2) = -g34;
        conn = levi_civita(metric);
        model = HolonomyModel{conn, ConnectionModel::flat(patch, patch->tangent_shape()),
                              SPoint::origin(patch)};
    }
};

SampleSpec quick_spec() {
    SampleSpec spec;
    spec.k_max = 1;
    spec.lprime_max = 2;
    return spec;
}

SpanBasis module_span_of(const std::vector<GVector>& vs, const PatchPtr& patch) {
    SpanBasis span;
    for (const auto& v : vs)
        for (Mask m : family_monomials(patch->context(), patch->s_mask())) {
            GVector dressed =
                scale_vector(v, GrassmannElement::monomial(patch->context(), m));
            if (!dressed.is_zero()) span.insert(flatten(dressed, patch->context()));
        }
    return span;
}

} // namespace

TEST_CASE("flat metric: one flat factor") {
    auto patch = make_patch(0, 2, 2, 4);
    MetricModel g{patch, fmatrix_zero(Shape{0, 2}, patch)};
    g.gram.at(0, 1) = patch->fconst(Rational(1));
    g.gram.at(1, 0) = patch->fconst(Rational(-1));
    HolonomyModel model{levi_civita(g), ConnectionModel::flat(patch, patch->tangent_shape()),
                        SPoint::origin(patch)};
    auto rep = derham_wu_split(g, model, quick_spec());
    CHECK(rep.holonomy_dim == 0);
    REQUIRE(rep.blocks.size() == 1);
    CHECK(rep.blocks[0].flat);
    CHECK(rep.verdict());
}

TEST_CASE("nonflat times flat: kernel recovers the flat block") {
    ProductMetric pm(1, 0);
    auto rep = derham_wu_split(pm.metric, pm.model, quick_spec());

    // sl2-type body directions times the four O_S monomials (the coefficient
    // algebra is an O_S-supermodule)
    CHECK(rep.holonomy_dim == 12);
    REQUIRE(rep.kernel_free);
    REQUIRE(rep.kernel_basis.size() == 2);

    // the kernel module equals the O_S-span of the flat frame directions
    std::vector<GVector> flat_frame{frame_vector(Shape{0, 4}, 2, pm.patch->context()),
                                    frame_vector(Shape{0, 4}, 3, pm.patch->context())};
    CHECK(module_span_of(rep.kernel_basis, pm.patch) == module_span_of(flat_frame, pm.patch));

    CHECK(rep.block_diagonal);
    REQUIRE(rep.blocks.size() == 2);
    CHECK(rep.blocks[0].flat);                       // the kernel block
    CHECK(rep.blocks[0].nondegenerate);
    CHECK(!rep.blocks[1].flat);
    CHECK(rep.blocks[1].nondegenerate);
    CHECK(rep.blocks[1].irreducibility == "weakly irreducible (body-lattice proxy)");
    CHECK(rep.verdict());
}

TEST_CASE("declared candidates") {
    ProductMetric pm(1, 0);
    auto ctx = pm.patch->context();

    SECTION("flat frame declared explicitly matches the kernel") {
        std::vector<GVector> declared{frame_vector(Shape{0, 4}, 2, ctx),
                                      frame_vector(Shape{0, 4}, 3, ctx)};
        auto rep = derham_wu_split(pm.metric, pm.model, quick_spec(), declared);
        CHECK(rep.kernel_matches_candidate);
        CHECK(rep.block_diagonal);
    }

    SECTION("an isotropic candidate is rejected") {
        std::vector<GVector> bad{frame_vector(Shape{0, 4}, 0, ctx)};
        CHECK_THROWS_AS(derham_wu_split(pm.metric, pm.model, quick_spec(), bad), error);
    }
}

TEST_CASE("holonomy of a product is the direct sum of the factors") {
    ProductMetric both(1, 2);
    ProductMetric first(1, 0);
    ProductMetric second(0, 2);
    auto spec = quick_spec();

    auto hol = coefficient_algebra(both.model, spec, 2);
    auto hol1 = coefficient_algebra(first.model, spec, 2);
    auto hol2 = coefficient_algebra(second.model, spec, 2);

    CHECK(hol.dim() == hol1.dim() + hol2.dim());
    SpanBasis sum;
    auto ctx = both.patch->context();
    for (const auto& b : hol1.basis()) sum.insert(flatten(b, ctx));
    for (const auto& b : hol2.basis()) sum.insert(flatten(b, ctx));
    CHECK(sum == hol.span());

    // factor generators stay block diagonal in the product
    for (const auto& b : hol.basis())
        for (unsigned r = 0; r < 4; ++r)
            for (unsigned c = 0; c < 4; ++c)
                if ((r < 2) != (c < 2)) CHECK(b.at(r, c).is_zero());
}
