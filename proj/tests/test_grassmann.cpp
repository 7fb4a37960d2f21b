#include <catch_amalgamated.hpp>

#include "superholonomy/grassmann.hpp"
#include "superholonomy/ideals.hpp"
#include "superholonomy/morphism.hpp"
#include "test_support.hpp"

using namespace shol;
using shol::testing::Rng;

namespace {

GrassmannElement gen(const ContextPtr& c, unsigned i) {
    return GrassmannElement::generator(c, i);
}

GrassmannElement scalar(const ContextPtr& c, const Rational& r) {
    return GrassmannElement(c, r);
}

} // namespace

TEST_CASE("multiplication: anticommutation, units, nilpotency") {
    auto c = single_family_context(3);
    auto e1 = gen(c, 0), e2 = gen(c, 1), e3 = gen(c, 2);

    CHECK(e1 * e2 == GrassmannElement::monomial(c, 0b011));
    CHECK(e2 * e1 == -(e1 * e2));

    auto one = scalar(c, 1);
    CHECK((one + e1) * (one - e1) == one);

    CHECK(((e1 * e2) * (e1 * e3)).is_zero());
}

TEST_CASE("multiplication is associative and supercommutative (randomized)") {
    auto c = single_family_context(5);
    Rng rng(11);
    for (int rep = 0; rep < 60; ++rep) {
        auto a = testing::random_element(rng, c);
        auto b = testing::random_element(rng, c);
        auto d = testing::random_element(rng, c);
        CHECK((a * b) * d == a * (b * d));
    }
    for (int rep = 0; rep < 60; ++rep) {
        unsigned pa = rng.uniform(0, 1), pb = rng.uniform(0, 1);
        auto a = testing::random_homogeneous(rng, c, pa);
        auto b = testing::random_homogeneous(rng, c, pb);
        auto ba = b * a;
        if ((pa & pb) != 0) ba = -ba;
        CHECK(a * b == ba);
    }
}

TEST_CASE("invert") {
    auto c = single_family_context(4);
    CHECK(scalar(c, 2).invert() == scalar(c, Rational(1, 2)));

    auto one = scalar(c, 1);
    auto x = one + gen(c, 0) * gen(c, 1);
    CHECK(x.invert() == one - gen(c, 0) * gen(c, 1));

    CHECK_THROWS_AS(gen(c, 0).invert(), error);

    Rng rng(5);
    auto c6 = single_family_context(6);
    for (int rep = 0; rep < 40; ++rep) {
        auto a = testing::random_element(rng, c6) + scalar(c6, rng.nonzero_rational());
        if (a.body() == 0) continue;
        CHECK(a * a.invert() == GrassmannElement(c6, Rational(1)));
    }
}

TEST_CASE("left partial derivative") {
    auto c = single_family_context(3);
    auto e1 = gen(c, 0), e2 = gen(c, 1);

    CHECK((e1 * e2).left_partial(0) == e2);
    CHECK(e2.left_partial(0).is_zero());
    CHECK((e1 * e2).left_partial(1) == -e1);

    // graded Leibniz on homogeneous left factors
    Rng rng(17);
    auto c5 = single_family_context(5);
    for (int rep = 0; rep < 60; ++rep) {
        unsigned pa = rng.uniform(0, 1);
        auto a = testing::random_homogeneous(rng, c5, pa);
        auto b = testing::random_element(rng, c5);
        unsigned i = rng.uniform(0, 4);
        auto lhs = (a * b).left_partial(i);
        auto rhs = a.left_partial(i) * b +
                   (pa ? -(a * b.left_partial(i)) : a * b.left_partial(i));
        CHECK(lhs == rhs);
    }
}

TEST_CASE("coefficient split over a family") {
    auto c = make_context({{"etaS", 2}, {"etaT", 2}});
    auto s1 = GrassmannElement::generator(c, "etaS", 1);
    auto t1 = GrassmannElement::generator(c, "etaT", 1);
    auto t2 = GrassmannElement::generator(c, "etaT", 2);

    SECTION("expansion with scalar coefficients") {
        auto h0 = scalar(c, 3);
        auto h1 = s1 * Rational(2);
        auto h2 = scalar(c, Rational(1, 2));
        auto a = h0 + h1 * t1 + h2 * (t1 * t2);
        auto split = a.coefficient_split("etaT");
        REQUIRE(split.size() == 3);
        CHECK(split.at(0) == h0);
        CHECK(split.at(t1.terms().begin()->first) == h1);
        CHECK(split.at((t1 * t2).terms().begin()->first) == h2);
    }

    SECTION("free of the family") {
        auto a = scalar(c, 1) + s1;
        auto split = a.coefficient_split("etaT");
        REQUIRE(split.size() == 1);
        CHECK(split.at(0) == a);
    }

    SECTION("etaS1*etaT2 has coefficient etaS1 at {2}") {
        auto a = s1 * t2;
        auto split = a.coefficient_split("etaT");
        REQUIRE(split.size() == 1);
        CHECK(split.at(t2.terms().begin()->first) == s1);
    }

    SECTION("round trip reassembles bit-exactly") {
        Rng rng(23);
        for (int rep = 0; rep < 50; ++rep) {
            auto a = testing::random_element(rng, c, -1, 6);
            CHECK(reassemble_split(c, a.coefficient_split("etaT")) == a);
            CHECK(reassemble_split(c, a.coefficient_split("etaS")) == a);
        }
    }
}

TEST_CASE("morphism application") {
    SECTION("identity") {
        auto c = single_family_context(4);
        auto phi = GrassmannMorphism::identity(c);
        Rng rng(3);
        for (int rep = 0; rep < 20; ++rep) {
            auto a = testing::random_element(rng, c);
            CHECK(phi.apply(a) == a);
        }
    }

    SECTION("linear substitution eta3 -> eta3 - eta1") {
        auto c = single_family_context(3);
        std::vector<GrassmannElement> images{gen(c, 0), gen(c, 1), gen(c, 2) - gen(c, 0)};
        GrassmannMorphism phi(c, c, images);
        CHECK(phi.apply(gen(c, 0) + gen(c, 2)) == gen(c, 2));
    }

    SECTION("generator image") {
        auto src = single_family_context(1, "th");
        auto dst = single_family_context(3);
        auto img = gen(dst, 0) + gen(dst, 0) * gen(dst, 1) * gen(dst, 2);
        GrassmannMorphism phi(src, dst, {img});
        CHECK(phi.apply(GrassmannElement::generator(src, 0)) == img);
    }

    SECTION("even image is rejected") {
        auto src = single_family_context(1, "th");
        auto dst = single_family_context(3);
        CHECK_THROWS_AS(GrassmannMorphism(src, dst, {gen(dst, 0) * gen(dst, 1)}), error);
    }

    SECTION("parity preserved") {
        auto c = single_family_context(4);
        Rng rng(9);
        for (int rep = 0; rep < 20; ++rep) {
            auto phi = testing::random_automorphism(rng, c);
            unsigned p = rng.uniform(0, 1);
            auto a = testing::random_homogeneous(rng, c, p);
            CHECK(phi.apply(a).homogeneous(p));
        }
    }
}

TEST_CASE("ideal dimension") {
    auto c = single_family_context(3);
    CHECK(ideal_dimension(gen(c, 0)) == 4);
    CHECK(ideal_dimension(gen(c, 0) * gen(c, 1) * gen(c, 2)) == 1);
    CHECK(ideal_dimension(GrassmannElement(c)) == 0);
}

TEST_CASE("Esin-Koc dimension formula") {
    auto c3 = single_family_context(3);
    CHECK(esin_koc_dimension(gen(c3, 0)) == 4);
    CHECK(esin_koc_dimension(gen(c3, 0) * gen(c3, 1) * gen(c3, 2)) == 1);

    auto c4 = single_family_context(4);
    auto mu = gen(c4, 0) * gen(c4, 1) + gen(c4, 2) * gen(c4, 3);
    CHECK(esin_koc_dimension(mu) == 6);
    CHECK(ideal_dimension(mu) == 6);

    SECTION("shared generator violates the precondition") {
        auto bad = gen(c4, 0) + gen(c4, 0) * gen(c4, 1) * gen(c4, 2);
        CHECK_THROWS_AS(esin_koc_dimension(bad), error);
    }

    SECTION("agrees with brute force for disjoint odd elements, L <= 5") {
        // enumerate collections of pairwise disjoint odd-size blocks with
        // coefficients +-1 (the acceptance suite runs the full L = 6 sweep)
        for (unsigned L = 1; L <= 5; ++L) {
            auto c = single_family_context(L);
            std::vector<Mask> odd_masks;
            for (Mask m = 1; m < (Mask(1) << L); ++m)
                if (mask_parity(m) == 1) odd_masks.push_back(m);
            // depth-first over disjoint subsets with sign choices
            std::vector<std::pair<Mask, int>> stack;
            std::function<void(std::size_t, Mask)> walk = [&](std::size_t from, Mask used) {
                if (!stack.empty()) {
                    GrassmannElement mu2(c);
                    for (auto& [m, s] : stack) mu2.add_term(m, s);
                    CHECK(esin_koc_dimension(mu2) == ideal_dimension(mu2));
                }
                for (std::size_t i = from; i < odd_masks.size(); ++i) {
                    if (odd_masks[i] & used) continue;
                    for (int s : {1, -1}) {
                        stack.emplace_back(odd_masks[i], s);
                        walk(i + 1, used | odd_masks[i]);
                        stack.pop_back();
                    }
                }
            };
            walk(0, 0);
        }
    }
}

TEST_CASE("replacement algorithm") {
    SECTION("reference trace: eta1 + eta1 eta2 eta3") {
        auto c = single_family_context(3);
        auto mu = gen(c, 0) + gen(c, 0) * gen(c, 1) * gen(c, 2);
        auto res = replacement_algorithm(mu);
        REQUIRE(res.context->total() == 4);
        auto d = res.context;
        auto expect = GrassmannElement::generator(d, 0) +
                      GrassmannElement::generator(d, 1) * GrassmannElement::generator(d, 2) *
                          GrassmannElement::generator(d, 3);
        CHECK(res.mu_prime == expect);
        CHECK(res.index_bijection.at(0b001) == 0b0001);
        CHECK(res.index_bijection.at(0b111) == 0b1110);
    }

    SECTION("disjoint input is returned unchanged") {
        auto c = single_family_context(4);
        auto mu = gen(c, 0) + gen(c, 1) * gen(c, 2) * gen(c, 3);
        auto res = replacement_algorithm(mu);
        CHECK(res.steps == 0);
        CHECK(res.mu_prime == mu);
    }

    SECTION("single generator") {
        auto c = single_family_context(1);
        auto res = replacement_algorithm(gen(c, 0));
        CHECK(res.steps == 0);
        CHECK(res.mu_prime == gen(c, 0));
    }

    SECTION("precondition is enforced") {
        auto c = single_family_context(3);
        CHECK_THROWS_AS(replacement_algorithm(gen(c, 0) * gen(c, 1) * gen(c, 2)), error);
    }

    SECTION("postconditions on random admissible inputs") {
        Rng rng(41);
        int done = 0;
        while (done < 25) {
            unsigned L = rng.uniform(2, 4);
            auto c = single_family_context(L);
            auto mu = testing::random_homogeneous(rng, c, 1, 3);
            if (mu.is_zero()) continue;
            if (ideal_dimension(mu) < (std::size_t(1) << (L - 1))) continue;
            ++done;
            auto res = replacement_algorithm(mu);
            const unsigned Lp = res.context->total();
            // bijection is length-preserving and hits exactly the terms
            REQUIRE(res.index_bijection.size() == mu.terms().size());
            Mask used = 0;
            for (const auto& [from, to] : res.index_bijection) {
                CHECK(mask_degree(from) == mask_degree(to));
                CHECK(res.mu_prime.coeff(to) != 0);
                CHECK((used & to) == 0);
                used |= to;
            }
            CHECK(res.mu_prime.terms().size() == mu.terms().size());
            // brute-force dimension bound in the enlarged algebra
            CHECK(ideal_dimension(res.mu_prime) >= (std::size_t(1) << (Lp - 1)));
        }
    }
}

TEST_CASE("ideal growth under a fresh generator (inductive step)") {
    Rng rng(59);
    int done = 0;
    while (done < 25) {
        unsigned L = rng.uniform(1, 4);
        auto c = single_family_context(L);
        auto mu = testing::random_homogeneous(rng, c, 1, 3);
        if (mu.is_zero() || ideal_dimension(mu) < (std::size_t(1) << (L - 1))) continue;
        ++done;
        auto r = testing::random_element(rng, c, 0, 3);
        auto big = single_family_context(L + 1);
        GrassmannElement mu_hat(big), r_big(big);
        for (const auto& [m, co] : mu.terms()) mu_hat.add_term(m, co);
        for (const auto& [m, co] : r.terms()) r_big.add_term(m, co);
        mu_hat += GrassmannElement::generator(big, L) * r_big;
        CHECK(ideal_dimension(mu_hat) >= (std::size_t(1) << L));
    }
}

TEST_CASE("automorphisms preserve the half-dimension bound") {
    Rng rng(61);
    int done = 0;
    while (done < 20) {
        unsigned L = rng.uniform(2, 4);
        auto c = single_family_context(L);
        auto mu = testing::random_homogeneous(rng, c, 1, 3);
        if (mu.is_zero() || ideal_dimension(mu) < (std::size_t(1) << (L - 1))) continue;
        ++done;
        auto phi = testing::random_automorphism(rng, c);
        CHECK(ideal_dimension(phi.apply(mu)) >= (std::size_t(1) << (L - 1)));
    }
}
