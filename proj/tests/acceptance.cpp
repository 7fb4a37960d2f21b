// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.  Exit code = failure count.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>

#include "superholonomy/superholonomy.hpp"

#ifndef MODELS_DIR
#define MODELS_DIR "models"
#endif

using namespace shol;

namespace {

struct Harness {
    int failures = 0;

    void run(const std::string& name, double budget_ms, const std::function<bool()>& body) {
        auto start = std::chrono::steady_clock::now();
        bool ok = false;
        std::string note;
        try {
            ok = body();
        } catch (const std::exception& e) {
            note = std::string(" (") + e.what() + ")";
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();
        if (budget_ms > 0 && ms > budget_ms) {
            ok = false;
            note += " (over time budget)";
        }
        std::printf("%s - %s [%.0f ms]%s\n", ok ? "PASS" : "FAIL", name.c_str(), ms,
                    note.c_str());
        if (!ok) ++failures;
    }
};

ModelFile load(const std::string& name) {
    return load_model(std::string(MODELS_DIR) + "/" + name);
}

GrassmannElement etaS(const ContextPtr& ctx, unsigned j) {
    return GrassmannElement::generator(ctx, "etaS", j);
}
GrassmannElement etaT(const ContextPtr& ctx, unsigned j) {
    return GrassmannElement::generator(ctx, "etaT", j);
}

// --- 1. the golden example -------------------------------------------------

bool golden_example() {
    ModelFile model = load("example.model");
    HolonomyModel hm = model.holonomy_model();
    const PatchPtr& patch = hm.patch();
    const ContextPtr& ctx = patch->context();
    TensorTable r = curvature(hm.conn);

    std::vector<PathModel> loops{constant_path(hm.base), model.paths.at("loop")};
    std::vector<GrassmannElement> thetas{etaT(ctx, 1), etaT(ctx, 2), etaS(ctx, 1),
                                         etaT(ctx, 1) + etaS(ctx, 2)};
    GVector frame = frame_vector(hm.bundle(), 0, ctx);
    std::vector<GVector> ws{frame, scale_vector(frame, etaS(ctx, 1)),
                            scale_vector(frame, etaT(ctx, 3))};

    for (const auto& loop : loops) {
        TransportOperator p = parallel_transport(hm.conn, loop);
        if (!p.exact) return false;
        GMatrix pinv = invert(p.matrix, ctx);
        PulledTensor ry = pullback_tensor(r, loop.end());
        for (const auto& ut : thetas)
            for (const auto& vt : thetas) {
                GVector u = scale_vector(frame, ut);
                GVector v = scale_vector(frame, vt);
                GMatrix conj = pinv * eval_tensor(ry, u, v, patch) * p.matrix;
                GMatrix expect = gmatrix_identity(hm.bundle(), ctx)
                                     .scaled_right(etaS(ctx, 1) * etaS(ctx, 2) * ut * vt *
                                                   Rational(-2));
                if (!(conj == expect)) return false;
                for (const auto& w : ws)
                    if (!(matvec(conj, w) == matvec(expect, w))) return false;
            }
    }

    SampleSpec spec = model.spec;
    LieSubalgebra gal = galaev_algebra(hm, spec);
    LieSubalgebra coeff = coefficient_algebra(hm, spec, 2);
    if (gal.dim() != 1 || coeff.dim() != 1) return false;
    GMatrix direction =
        gmatrix_identity(hm.bundle(), ctx).scaled_right(etaS(ctx, 1) * etaS(ctx, 2));
    return gal.contains(direction) && coeff.contains(direction) && span_equal(gal, coeff);
}

// --- 2. comparison theorem on three models ---------------------------------

bool comparison_three_models() {
    for (const char* name : {"example.model", "product.model", "rank11.model"}) {
        ModelFile model = load(name);
        model.spec.k_max = 3;
        ComparisonReport rep = comparison_check(model.holonomy_model(), model.spec);
        if (!rep.verdict()) {
            std::fprintf(stderr, "  comparison failed on %s\n", name);
            return false;
        }
    }
    return true;
}

// --- 3. Esin-Koc cross-check ------------------------------------------------

bool esin_koc_sweep() {
    for (unsigned L = 1; L <= 6; ++L) {
        auto c = single_family_context(L);
        std::vector<Mask> odd_masks;
        for (Mask m = 1; m < (Mask(1) << L); ++m)
            if (mask_parity(m) == 1) odd_masks.push_back(m);
        std::vector<std::pair<Mask, int>> stack;
        bool ok = true;
        std::function<void(std::size_t, Mask)> walk = [&](std::size_t from, Mask used) {
            if (!ok) return;
            if (!stack.empty()) {
                GrassmannElement mu(c);
                for (auto& [m, s] : stack) mu.add_term(m, s);
                if (esin_koc_dimension(mu) != ideal_dimension(mu)) ok = false;
            }
            for (std::size_t i = from; i < odd_masks.size() && ok; ++i) {
                if (odd_masks[i] & used) continue;
                for (int s : {1, -1}) {
                    stack.emplace_back(odd_masks[i], s);
                    walk(i + 1, used | odd_masks[i]);
                    stack.pop_back();
                }
            }
        };
        walk(0, 0);
        if (!ok) return false;
    }
    return true;
}

// --- 4. replacement algorithm, randomized ----------------------------------

bool replacement_randomized() {
    std::mt19937_64 eng(20240801);
    auto uniform = [&](int lo, int hi) {
        return int(std::uniform_int_distribution<int>(lo, hi)(eng));
    };
    int done = 0;
    int guard = 0;
    while (done < 100 && ++guard < 20000) {
        unsigned L = unsigned(uniform(2, 5));
        auto c = single_family_context(L);
        GrassmannElement mu(c);
        int terms = uniform(1, 3);
        for (int i = 0; i < terms; ++i) {
            Mask m = 0;
            while (mask_parity(m) != 1) {
                m = 0;
                for (unsigned g = 0; g < L; ++g)
                    if (uniform(0, 1)) m |= Mask(1) << g;
            }
            int coeff = uniform(-3, 3);
            if (coeff) mu.add_term(m, coeff);
        }
        if (mu.is_zero()) continue;
        if (ideal_dimension(mu) < (std::size_t(1) << (L - 1))) continue;
        ++done;

        auto res = replacement_algorithm(mu);
        const unsigned Lp = res.context->total();
        if (res.index_bijection.size() != mu.terms().size()) return false;
        Mask used = 0;
        for (const auto& [from, to] : res.index_bijection) {
            if (mask_degree(from) != mask_degree(to)) return false;   // length preserved
            if (res.mu_prime.coeff(to) == 0) return false;            // bijection onto terms
            if (used & to) return false;                              // product nonzero
            used |= to;
        }
        if (res.mu_prime.terms().size() != mu.terms().size()) return false;
        if (ideal_dimension(res.mu_prime) < (std::size_t(1) << (Lp - 1))) return false;
    }
    return done == 100;
}

// --- 5. flat iff submersion -------------------------------------------------

bool flat_iff_submersion() {
    auto src = single_family_context(1, "th");
    for (unsigned L = 1; L <= 4; ++L) {
        auto c = single_family_context(L);
        std::vector<Mask> odd_masks;
        for (Mask m = 1; m < (Mask(1) << L); ++m)
            if (mask_parity(m) == 1) odd_masks.push_back(m);
        std::vector<int> coeffs(odd_masks.size(), -1);
        for (;;) {
            GrassmannElement mu(c);
            for (std::size_t i = 0; i < odd_masks.size(); ++i)
                if (coeffs[i]) mu.add_term(odd_masks[i], coeffs[i]);
            GrassmannMorphism phi(src, c, {mu});
            if (is_submersion(phi) != is_free_rank1(phi)) return false;
            std::size_t i = 0;
            while (i < coeffs.size() && coeffs[i] == 1) coeffs[i++] = -1;
            if (i == coeffs.size()) break;
            ++coeffs[i];
        }
    }
    std::mt19937_64 eng(5);
    auto c5 = single_family_context(5);
    std::vector<Mask> odd_masks;
    for (Mask m = 1; m < (Mask(1) << 5); ++m)
        if (mask_parity(m) == 1) odd_masks.push_back(m);
    for (int rep = 0; rep < 1000; ++rep) {
        GrassmannElement mu(c5);
        std::uniform_int_distribution<int> num(-4, 4), den(1, 3), pick(0, 3);
        for (Mask m : odd_masks)
            if (pick(eng) == 0) mu.add_term(m, Rational(num(eng), den(eng)));
        GrassmannMorphism phi(src, c5, {mu});
        if (is_submersion(phi) != is_free_rank1(phi)) return false;
    }
    return true;
}

// --- 6. transport identities -------------------------------------------------

bool transport_identities() {
    ModelFile model = load("example.model");
    HolonomyModel hm = model.holonomy_model();
    const ContextPtr& ctx = hm.patch()->context();
    const PathModel line = model.paths.at("line");
    const PathModel loop = model.paths.at("loop");

    // cocycle and inversion, exact
    auto [first, second] = split_halves(line);
    TransportOperator whole = parallel_transport(hm.conn, line);
    if (!whole.exact) return false;
    if (!(parallel_transport(hm.conn, second).matrix *
              parallel_transport(hm.conn, first).matrix ==
          whole.matrix))
        return false;
    if (!(parallel_transport(hm.conn, line.reversed()).matrix == invert(whole.matrix, ctx)))
        return false;
    if (whole.picard_iterations > ctx->total() + 1) return false;

    // the eta-derivative identities, bit-exact
    for (unsigned j : {1u, 2u}) {
        if (!eta_derivative_of_transport(hm.conn, line, ctx->index_of("etaT", j)).holds())
            return false;
        if (!eta_derivative_of_transport(hm.conn, loop, ctx->index_of("etaS", j)).holds())
            return false;
    }
    TensorTable r = curvature(hm.conn);
    GVector e = frame_vector(hm.bundle(), 0, ctx);
    GVector u = scale_vector(e, etaT(ctx, 3));
    for (unsigned j : {1u, 2u}) {
        auto rep = conjugated_curvature_derivative(hm.conn, hm.aux, line, r, u, e,
                                                   ctx->index_of("etaT", j));
        if (!rep.holds()) return false;
    }

    // a second model class: the perturbed symplectic metric
    ModelFile mp = load("metric_product.model");
    HolonomyModel mh = mp.holonomy_model();
    const ContextPtr& mctx = mh.patch()->context();
    PathModel path{mh.patch(), {PathSegment{}}};
    SuperFunction t = SuperFunction::coordinate(mctx, 1, 0);
    for (unsigned a = 0; a < mh.patch()->coord_count(); ++a)
        path.segments[0].coords.push_back(SuperFunction(mctx, 1));
    path.segments[0].coords[0] =
        t * GrassmannElement::generator(mctx, "etaT", 1);
    path.segments[0].coords[1] =
        t * t * GrassmannElement::generator(mctx, "etaT", 2);
    if (!eta_derivative_of_transport(mh.conn, path, mctx->index_of("etaT", 1)).holds())
        return false;
    TensorTable mr = curvature(mh.conn);
    GVector mu = frame_vector(mh.bundle(), 0, mctx);
    GVector mv = frame_vector(mh.bundle(), 1, mctx);
    if (!conjugated_curvature_derivative(mh.conn, mh.aux, path, mr, mu, mv,
                                         mctx->index_of("etaT", 1))
             .holds())
        return false;

    // hybrid mode: body entries stable under step halving
    ModelFile hybrid = parse_model(R"(
manifold p=1 q=1
base L=2
functor lmax=2 kmax=1
bundle tangent
connection
  Gamma x1 x1 x1 = x1
  Gamma th1 th1 x1 = etaS1*etaS2
point x
  x1 = 0
  th1 = 0
path move from x
  segment
    x1 = t
    th1 = t*etaT1
)");
    const PathModel& mv_path = hybrid.paths.at("move");
    TransportOperator h1 = parallel_transport(hybrid.conn, mv_path, {128});
    TransportOperator h2 = parallel_transport(hybrid.conn, mv_path, {256});
    if (h1.exact || h2.exact) return false;
    for (std::size_t i = 0; i < h1.body_numeric.size(); ++i)
        if (std::abs(h1.body_numeric[i] - h2.body_numeric[i]) >= 1e-8) return false;
    return true;
}

// --- 7. twofold theorem -----------------------------------------------------

bool twofold_everywhere() {
    int cases = 0;
    int invariant_cases = 0, noninvariant_cases = 0, nilpotent_cases = 0;
    for (const char* name :
         {"example.model", "flat.model", "product.model", "metric_product.model"}) {
        ModelFile model = load(name);
        RunOptions opts;
        opts.kmax = 1;
        opts.lprime = 2;
        RunResult res = run_command(model, "twofold", opts);
        if (!res.report["verdicts"]["conditions_agree"].get<bool>()) return false;
        for (const auto& [key, value] : res.report["cases"].items()) {
            ++cases;
            if (!value["agree"].get<bool>()) return false;
            bool a = value["condition_a"].get<bool>();
            if (a) ++invariant_cases;
            else ++noninvariant_cases;
            if (key.find("annihilated") != std::string::npos && a) ++nilpotent_cases;
        }
    }
    return cases >= 10 && invariant_cases > 0 && noninvariant_cases > 0 && nilpotent_cases > 0;
}

// --- 8. de Rham-Wu, algebraic level ------------------------------------------

bool derham_wu_product() {
    ModelFile model = load("metric_product.model");
    HolonomyModel hm = model.holonomy_model();
    auto rep = derham_wu_split(*model.metric, hm, model.spec);
    if (!rep.kernel_free || !rep.block_diagonal || !rep.verdict()) return false;

    // kernel equals the declared flat block as an O_S module
    const PatchPtr& patch = hm.patch();
    auto module_of = [&](const std::vector<GVector>& vs) {
        SpanBasis span;
        for (const auto& v : vs)
            for (Mask m : family_monomials(patch->context(), patch->s_mask())) {
                GVector d = scale_vector(v, GrassmannElement::monomial(patch->context(), m));
                if (!d.is_zero()) span.insert(flatten(d, patch->context()));
            }
        return span;
    };
    if (!(module_of(rep.kernel_basis) == module_of(model.submodules.at("flat_block"))))
        return false;

    // factor holonomies sum to the product holonomy
    ModelFile first = parse_model(R"(
manifold p=0 q=4
base L=2
functor lmax=2 kmax=1
metric
  g th1 th2 = 1 + th1*th2
  g th3 th4 = 1
point x
  th1 = 0
)");
    ModelFile second = parse_model(R"(
manifold p=0 q=4
base L=2
functor lmax=2 kmax=1
metric
  g th1 th2 = 1
  g th3 th4 = 1 + 2*th3*th4
point x
  th1 = 0
)");
    ModelFile both = parse_model(R"(
manifold p=0 q=4
base L=2
functor lmax=2 kmax=1
metric
  g th1 th2 = 1 + th1*th2
  g th3 th4 = 1 + 2*th3*th4
point x
  th1 = 0
)");
    SampleSpec spec = both.spec;
    LieSubalgebra hol = coefficient_algebra(both.holonomy_model(), spec, 2);
    LieSubalgebra h1 = coefficient_algebra(first.holonomy_model(), spec, 2);
    LieSubalgebra h2 = coefficient_algebra(second.holonomy_model(), spec, 2);
    if (hol.dim() != h1.dim() + h2.dim()) return false;
    SpanBasis sum;
    for (const auto& b : h1.basis()) sum.insert(flatten(b, both.patch->context()));
    for (const auto& b : h2.basis()) sum.insert(flatten(b, both.patch->context()));
    return sum == hol.span();
}

// --- 9. sheaf property --------------------------------------------------------

bool sheaf_property() {
    ModelFile model = load("fppf.model");
    HolonomyModel hm = model.holonomy_model();
    SheafCover cover = model.covers.at("C");

    SheafAuditReport rep = sheaf_audit_holonomy(hm, model.spec, cover);
    if (!rep.verdict()) return false;

    // three-element cover with targets up to L = 4
    SheafCover three = cover;
    const ContextPtr& ctx = model.patch->context();
    three.elements.push_back(PointedMorphism{
        1, 4,
        {GrassmannElement::generator(ctx, "etaT", 1) +
         GrassmannElement::generator(ctx, "etaT", 2) *
             GrassmannElement::generator(ctx, "etaT", 3) *
             GrassmannElement::generator(ctx, "etaT", 4)}});
    SheafAuditReport rep3 = sheaf_audit_holonomy(hm, model.spec, three);
    if (!rep3.holonomy_membership_glues || !rep3.galaev_span_glues ||
        !rep3.corrupted_family_rejected)
        return false;

    // glue uniqueness: two runs on the same compatible family coincide
    GMatrix b = gmatrix_identity(hm.bundle(), ctx);
    b.at(0, 0) += GrassmannElement::generator(ctx, "etaT", 1) *
                  GrassmannElement::generator(ctx, "etaS", 1);
    std::vector<GMatrix> sections;
    for (const auto& pm : three.elements) {
        GrassmannMorphism phi = pm.endo(model.patch);
        GMatrix a = gmatrix_zero(b.shape(), ctx);
        for (unsigned r = 0; r < a.dim(); ++r)
            for (unsigned c = 0; c < a.dim(); ++c) a.at(r, c) = phi.apply(b.at(r, c));
        sections.push_back(a);
    }
    auto always = [](const GMatrix&, unsigned) { return true; };
    if (!(glue_sections(three, sections, always) == b)) return false;
    if (!(glue_sections(three, sections, always) == glue_sections(three, sections, always)))
        return false;
    return true;
}

// --- 10. degree decomposition and stabilization -------------------------------

bool degree_and_stabilization() {
    for (const char* name : {"example.model", "product.model"}) {
        ModelFile model = load(name);
        model.spec.k_max = 2;
        HolonomyModel hm = model.holonomy_model();
        StabilizationReport stab = stabilization_threshold(hm, model.spec);
        if (stab.threshold > 4) return false;
        unsigned n = stab.threshold;
        unsigned l = stab.threshold + 2;
        if (l > hm.patch()->t_capacity()) return false;
        auto rep = degree_decomposition_check(hm, model.spec, n, l);
        if (!rep.verdict()) return false;
    }
    return true;
}

} // namespace

int main() {
    Harness h;
    h.run("1. golden example: conjugated curvature and 1-dim holonomy", 1000, golden_example);
    h.run("2. comparison theorem on three models", 60000, comparison_three_models);
    h.run("3. Esin-Koc dimension cross-check, L <= 6", 10000, esin_koc_sweep);
    h.run("4. replacement algorithm, 100 randomized inputs", 0, replacement_randomized);
    h.run("5. flat iff submersion, exhaustive + 1000 random", 0, flat_iff_submersion);
    h.run("6. transport identities: cocycle, Picard bound, eta-derivatives, hybrid", 0,
          transport_identities);
    h.run("7. twofold theorem: conditions agree on every case", 0, twofold_everywhere);
    h.run("8. de Rham-Wu: kernel, blocks and direct sum", 0, derham_wu_product);
    h.run("9. sheaf property: descent over submersion covers", 0, sheaf_property);
    h.run("10. degree decomposition at the stabilization threshold", 0,
          degree_and_stabilization);
    if (h.failures == 0) std::printf("all acceptance criteria passed\n");
    else std::printf("%d acceptance criteria FAILED\n", h.failures);
    return h.failures;
}
