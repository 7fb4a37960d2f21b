#pragma once

#include <optional>
#include <vector>

#include "superholonomy/bilinear.hpp"
#include "superholonomy/lie.hpp"
#include "superholonomy/transport.hpp"

namespace shol {

/// Bundle with S-connection, auxiliary tangent connection and base point.
struct HolonomyModel {
    ConnectionModel conn;
    ConnectionModel aux;
    SPoint base;

    const PatchPtr& patch() const { return conn.patch; }
    Shape bundle() const { return conn.bundle; }
};

/// Deterministic sampling bounds for the holonomy generators.  The paper
/// quantifies over all points, paths and vectors; desk scale uses the special
/// points up to k_max plus systematic polynomial loops and lines.
struct SampleSpec {
    unsigned k_max = 3;
    unsigned lprime_max = 4;
    std::uint64_t seed = 1;
    bool include_special_points = true;
};

namespace detail {

inline Mask t_mask_upto(const PatchPtr& patch, unsigned lprime) {
    Mask m = 0;
    for (unsigned i = 1; i <= lprime; ++i)
        m |= Mask(1) << patch->context()->index_of("etaT", i);
    return m;
}

inline Mask scalar_mask(const PatchPtr& patch, unsigned lprime) {
    return patch->s_mask() | t_mask_upto(patch, lprime);
}

/// Odd generators available for dressing: etaS then etaT up to lprime.
inline std::vector<GrassmannElement> dressing_generators(const PatchPtr& patch,
                                                         unsigned lprime) {
    std::vector<GrassmannElement> out;
    for (unsigned j = 1; j <= patch->s_dim(); ++j)
        out.push_back(GrassmannElement::generator(patch->context(), "etaS", j));
    for (unsigned i = 1; i <= lprime; ++i)
        out.push_back(GrassmannElement::generator(patch->context(), "etaT", i));
    return out;
}

/// All tuples over {0..alphabet-1} of length <= max_len (outermost first).
inline std::vector<std::vector<unsigned>> direction_tuples(unsigned alphabet, unsigned max_len) {
    std::vector<std::vector<unsigned>> tuples{{}};
    std::size_t level_start = 0;
    for (unsigned k = 1; k <= max_len; ++k) {
        const std::size_t level_end = tuples.size();
        for (std::size_t i = level_start; i < level_end; ++i)
            for (unsigned c = 0; c < alphabet; ++c) {
                auto t = tuples[i];
                t.insert(t.begin(), c);
                tuples.push_back(std::move(t));
            }
        level_start = level_end;
    }
    return tuples;
}

} // namespace detail

/// Systematic path sample at `at`: the constant loop, twisted loops and open
/// lines in every coordinate, using odd generators up to etaT_lprime (lprime =
/// 0 gives pure S-paths), plus straight lines to the special points.
inline std::vector<PathModel> sample_paths(const HolonomyModel& model, const SampleSpec& spec,
                                           unsigned lprime, const SPoint& at) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    std::vector<GrassmannElement> gens = detail::dressing_generators(patch, lprime);

    std::vector<PathModel> out;
    out.push_back(constant_path(at));

    SuperFunction t = SuperFunction::coordinate(ctx, 1, 0);
    SuperFunction one = SuperFunction::constant(GrassmannElement(ctx, Rational(1)), 1);
    SuperFunction bump = t * (one - t);
    SuperFunction bump2 = t * t * (one - t);

    for (unsigned a = 0; a < patch->coord_count(); ++a) {
        for (std::size_t i = 0; i < gens.size(); ++i) {
            for (std::size_t j = i + 1; j < gens.size(); ++j) {
                PathModel loop = constant_path(at);
                PathModel line = constant_path(at);
                if (patch->coord_parity(a) == 1) {
                    loop.segments[0].coords[a] += bump * gens[i] + bump2 * gens[j];
                    line.segments[0].coords[a] += t * gens[i] + t * t * gens[j];
                } else {
                    loop.segments[0].coords[a] += bump * (gens[i] * gens[j]);
                    line.segments[0].coords[a] += t * (gens[i] * gens[j]);
                }
                out.push_back(loop);
                out.push_back(line);
            }
        }
    }

    if (spec.include_special_points) {
        const unsigned d0 = patch->even_dim(), d1 = patch->odd_dim();
        for (unsigned k = 0; k <= spec.k_max; ++k) {
            const unsigned need = d1 + 2 * k * d0;
            if (need > lprime || need > patch->t_capacity()) continue;
            out.push_back(line_path(at, special_point(at, k)));
        }
    }
    return out;
}

/// Frame vectors dressed by single odd generators; parity -1 keeps all
/// homogeneous samples, 0/1 filters.
inline std::vector<GVector> sample_vectors(const HolonomyModel& model, unsigned lprime,
                                           int parity) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    Shape ts = patch->tangent_shape();
    std::vector<GVector> out;
    auto keep = [&](const GVector& v) {
        if (parity < 0 || v.parity == unsigned(parity)) out.push_back(v);
    };
    for (unsigned a = 0; a < ts.dim(); ++a) {
        GVector e = frame_vector(ts, a, ctx);
        keep(e);
        for (const auto& g : detail::dressing_generators(patch, lprime)) keep(scale_vector(e, g));
    }
    return out;
}

/// Ambrose-Singer generators P^{-1} R_y(u,v) P over the path sample, with
/// even u, v (the defining restriction of hol_x(T)).
inline std::vector<GMatrix> functorial_generators(const HolonomyModel& model,
                                                  const SampleSpec& spec, unsigned lprime) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    TensorTable r = curvature(model.conn);
    std::vector<GVector> evens = sample_vectors(model, lprime, 0);
    std::vector<GMatrix> out;
    for (const auto& path : sample_paths(model, spec, lprime, model.base)) {
        TransportOperator p = parallel_transport(model.conn, path);
        require(p.exact, errc::hybrid_mode_unsupported, "holonomy needs exact transports");
        GMatrix pinv = invert(p.matrix, ctx);
        PulledTensor ry = pullback_tensor(r, path.end());
        for (const auto& u : evens)
            for (const auto& v : evens) {
                GMatrix g = pinv * eval_tensor(ry, u, v, patch) * p.matrix;
                if (!g.is_zero()) out.push_back(g);
            }
    }
    return out;
}

namespace detail {

/// Lie closure of the O-span of the generators (monomials within `within`,
/// optionally restricted to even products), iterated to a fixpoint.  Raw
/// generators are echelonized first so only the basis gets dressed.
inline LieSubalgebra dressed_closure(Shape shape, const ContextPtr& ctx,
                                     const std::vector<GMatrix>& gens, Mask within,
                                     bool even_products_only) {
    LieSubalgebra alg(shape, ctx);
    for (const auto& g : gens) alg.insert(g);
    std::vector<Mask> monos = family_monomials(ctx, within);
    for (;;) {
        const std::size_t before = alg.dim();
        for (const auto& g : alg.basis()) {
            auto gp = g.parity();
            for (Mask m : monos) {
                if (m == 0) continue;
                if (even_products_only && gp && ((*gp + mask_parity(m)) & 1u) != 0) continue;
                GMatrix dressed = g.scaled_right(GrassmannElement::monomial(ctx, m));
                if (!dressed.is_zero()) alg.insert(dressed);
            }
        }
        alg.close();
        if (alg.dim() == before) break;
    }
    return alg;
}

} // namespace detail

/// hol_x(T) for T = R^{0|lprime}: the Lie algebra generated by the sampled
/// Ambrose-Singer operators, an O_{SxT}-even module by construction.
inline LieSubalgebra holonomy_algebra_T(const HolonomyModel& model, const SampleSpec& spec,
                                        unsigned lprime) {
    const PatchPtr& patch = model.patch();
    auto gens = functorial_generators(model, spec, lprime);
    return detail::dressed_closure(model.bundle(), patch->context(), gens,
                                   detail::scalar_mask(patch, lprime), true);
}

/// Coefficient algebra hol^C at level lprime: T-coefficients of hol_x(T),
/// closed as a super Lie algebra in gl(O_S).
inline LieSubalgebra coefficient_algebra(const HolonomyModel& model, const SampleSpec& spec,
                                         unsigned lprime) {
    const PatchPtr& patch = model.patch();
    LieSubalgebra hol_t = holonomy_algebra_T(model, spec, lprime);
    std::vector<GMatrix> coeffs;
    for (const auto& a : hol_t.basis()) {
        // entrywise split A = sum_I A^I eta^I
        std::map<Mask, GMatrix> split;
        for (unsigned r = 0; r < a.dim(); ++r)
            for (unsigned c = 0; c < a.dim(); ++c)
                for (auto& [mask_i, coeff] : a.at(r, c).coefficient_split("etaT")) {
                    auto it = split.find(mask_i);
                    if (it == split.end())
                        it = split.emplace(mask_i, gmatrix_zero(a.shape(), patch->context()))
                                 .first;
                    it->second.at(r, c) += coeff;
                }
        for (auto& [mask_i, m] : split) coeffs.push_back(m);
    }
    LieSubalgebra alg(model.bundle(), patch->context());
    for (const auto& m : coeffs) alg.insert(m);
    alg.close();
    return alg;
}

/// O_S-module span of an algebra (dressing by all etaS monomials), re-closed.
inline LieSubalgebra os_module_closure(const HolonomyModel& model, const LieSubalgebra& alg) {
    return detail::dressed_closure(alg.shape(), alg.context(), alg.basis(),
                                   model.patch()->s_mask(), false);
}

/// Galaev generators: S-paths, higher covariant derivatives up to k_max in
/// all coordinate directions, all parities of u and v.
inline std::vector<GMatrix> galaev_generators(const HolonomyModel& model,
                                              const SampleSpec& spec) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();

    TensorTable r = curvature(model.conn);
    std::vector<TensorTable> tables;
    for (const auto& dirs : detail::direction_tuples(patch->coord_count(), spec.k_max))
        tables.push_back(higher_covariant_derivative(model.conn, model.aux, r, dirs));

    std::vector<GVector> vectors = sample_vectors(model, 0, -1);
    std::vector<GMatrix> out;
    for (const auto& path : sample_paths(model, spec, 0, model.base)) {
        TransportOperator p = parallel_transport(model.conn, path);
        require(p.exact, errc::hybrid_mode_unsupported, "holonomy needs exact transports");
        GMatrix pinv = invert(p.matrix, ctx);
        const SPoint y = path.end();
        for (const auto& table : tables) {
            PulledTensor ty = pullback_tensor(table, y);
            for (const auto& u : vectors)
                for (const auto& v : vectors) {
                    GMatrix g = pinv * eval_tensor(ty, u, v, patch) * p.matrix;
                    if (!g.is_zero()) out.push_back(g);
                }
        }
    }
    return out;
}

/// hol^Gal: the real super Lie algebra generated by the conjugated higher
/// covariant derivatives of the curvature (an O_S module by vector dressing).
inline LieSubalgebra galaev_algebra(const HolonomyModel& model, const SampleSpec& spec) {
    return detail::dressed_closure(model.bundle(), model.patch()->context(),
                                   galaev_generators(model, spec), model.patch()->s_mask(),
                                   false);
}

/// Generators of hol_x(T)^{(k)}: iterated eta-direction pullback derivatives
/// of the pulled curvature, conjugated; all parities of u, v.  Intermediate
/// path-curvature conjugates (the integrands of the transport formula) are
/// included as l = 0 generators.
inline std::vector<GMatrix> holk_generators(const HolonomyModel& model, const SampleSpec& spec,
                                            unsigned lprime, unsigned k) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    TensorTable r = curvature(model.conn);
    std::vector<GVector> vectors = sample_vectors(model, lprime, -1);
    std::vector<std::vector<unsigned>> tuples = detail::direction_tuples(lprime, k);
    for (auto& t : tuples)
        for (auto& idx : t) ++idx;  // 1-based etaT indices

    std::vector<GMatrix> out;
    for (const auto& path : sample_paths(model, spec, lprime, model.base)) {
        TransportOperator p = parallel_transport(model.conn, path);
        require(p.exact, errc::hybrid_mode_unsupported, "holonomy needs exact transports");
        GMatrix pinv = invert(p.matrix, ctx);
        const SPoint y = path.end();
        PulledTensor ry = pullback_tensor(r, y);
        for (const auto& tuple : tuples) {
            PulledTensor cur = ry;
            for (auto it = tuple.rbegin(); it != tuple.rend(); ++it) {
                unsigned gen = ctx->index_of("etaT", *it);
                cur = pullback_cov_deriv(cur, gen, point_eta_coefficient(model.conn, y, gen),
                                         point_eta_coefficient(model.aux, y, gen), patch);
            }
            for (const auto& u : vectors)
                for (const auto& v : vectors) {
                    GMatrix g = pinv * eval_tensor(cur, u, v, patch) * p.matrix;
                    if (!g.is_zero()) out.push_back(g);
                }
        }
        // path-curvature integrand samples: P_{<=s}^{-1} R_gamma(d_t, d_eta)|_s P_{<=s}
        if (path.segments.size() == 1) {
            const PathSegment& seg = path.segments[0];
            FMatrix a = transport_coefficient(model.conn, seg);
            SegmentSolution sol = solve_segment_exact(a, patch);
            for (unsigned i = 1; i <= lprime; ++i) {
                unsigned gen = ctx->index_of("etaT", i);
                FMatrix b = eta_coefficient(model.conn, seg, gen);
                FMatrix rmat(model.bundle(), SuperFunction(ctx, 1));
                for (unsigned rr = 0; rr < rmat.dim(); ++rr)
                    for (unsigned cc = 0; cc < rmat.dim(); ++cc) {
                        SuperFunction v = b.at(rr, cc).d_even(0);
                        SuperFunction da = a.at(rr, cc).d_odd(gen);
                        if (model.bundle().index_parity(rr) != 0) v += da;
                        else v -= da;
                        rmat.at(rr, cc) = v;
                    }
                rmat += a * b - b * a;
                FMatrix conj = sol.pinv * rmat * sol.p;
                unsigned maxdeg = 0;
                for (unsigned rr = 0; rr < conj.dim(); ++rr)
                    for (unsigned cc = 0; cc < conj.dim(); ++cc)
                        for (const auto& [deg, gg] : conj.at(rr, cc).terms())
                            maxdeg = std::max(maxdeg, deg[0]);
                for (unsigned s = 0; s <= maxdeg; ++s) {
                    GMatrix g = eval_matrix(conj, Rational(s, maxdeg ? maxdeg : 1), ctx);
                    if (!g.is_zero()) out.push_back(g);
                }
            }
        }
    }
    return out;
}

inline LieSubalgebra holk_algebra(const HolonomyModel& model, const SampleSpec& spec,
                                  unsigned lprime, unsigned k) {
    return detail::dressed_closure(model.bundle(), model.patch()->context(),
                                   holk_generators(model, spec, lprime, k),
                                   detail::scalar_mask(model.patch(), lprime), false);
}

// ---------------------------------------------------------------------------
// Stabilization and comparison.
// ---------------------------------------------------------------------------

struct StabilizationReport {
    unsigned threshold = 0;
    std::vector<std::size_t> dims;  // coefficient-algebra dimension per lprime
};

/// Smallest lprime whose coefficient algebra dimension agrees with the next
/// two levels (guard +2).  Dimensions are nondecreasing by functoriality.
inline StabilizationReport stabilization_threshold(const HolonomyModel& model,
                                                   const SampleSpec& spec) {
    StabilizationReport rep;
    const unsigned top = std::min(spec.lprime_max + 2, model.patch()->t_capacity());
    for (unsigned l = 0; l <= top; ++l)
        rep.dims.push_back(coefficient_algebra(model, spec, l).dim());
    for (std::size_t i = 0; i + 1 < rep.dims.size(); ++i)
        require(rep.dims[i] <= rep.dims[i + 1], errc::precondition,
                "coefficient dimensions must be nondecreasing");
    rep.threshold = unsigned(rep.dims.size()) - 1;
    for (unsigned l = 0; l + 2 < rep.dims.size(); ++l)
        if (rep.dims[l] == rep.dims[l + 1] && rep.dims[l] == rep.dims[l + 2]) {
            rep.threshold = l;
            break;
        }
    return rep;
}

struct ComparisonReport {
    unsigned stabilized_lprime = 0;
    std::size_t coefficient_dim = 0;
    std::size_t galaev_dim = 0;
    std::size_t galaev_os_dim = 0;
    bool spans_equal = false;
    bool eta_generators_in_galaev_span = false;  // containment mechanism
    bool special_point_conversion = false;       // converse mechanism
    bool os_span_matches = false;

    bool verdict() const {
        return spans_equal && eta_generators_in_galaev_span && special_point_conversion;
    }
};

namespace detail {

/// Deterministic small path sample for the proof-mechanism checks.
inline std::vector<PathModel> mechanism_paths(const HolonomyModel& model,
                                              const SampleSpec& spec, unsigned lprime) {
    std::vector<PathModel> all = sample_paths(model, spec, lprime, model.base);
    std::vector<PathModel> out;
    out.push_back(all.front());  // constant
    if (all.size() > 2) {
        out.push_back(all[1]);
        out.push_back(all[2]);
    }
    const unsigned d1 = model.patch()->odd_dim();
    for (unsigned k = 0; k <= spec.k_max; ++k) {
        const unsigned need = d1 + 2 * k * model.patch()->even_dim();
        if (need > lprime || need > model.patch()->t_capacity()) continue;
        out.push_back(line_path(model.base, special_point(model.base, k)));
    }
    return out;
}

inline std::vector<GVector> frame_vectors(const PatchPtr& patch) {
    std::vector<GVector> out;
    for (unsigned a = 0; a < patch->tangent_shape().dim(); ++a)
        out.push_back(frame_vector(patch->tangent_shape(), a, patch->context()));
    return out;
}

} // namespace detail

/// The comparison: hol^C = hol^Gal at a stabilized T, plus both proof
/// mechanisms checked as span memberships (frame vectors suffice there since
/// the evaluations are O-bilinear in u and v).
inline ComparisonReport comparison_check(const HolonomyModel& model, const SampleSpec& spec) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    require(spec.include_special_points, errc::spec_insufficient,
            "comparison needs the special points in the sample");
    require(patch->odd_dim() + 2 * spec.k_max * patch->even_dim() <= patch->t_capacity(),
            errc::spec_insufficient, "T capacity too small for the special points");

    ComparisonReport rep;
    StabilizationReport stab = stabilization_threshold(model, spec);
    rep.stabilized_lprime = stab.threshold;
    const unsigned l = std::max(stab.threshold,
                                std::min(spec.lprime_max, patch->t_capacity()));

    LieSubalgebra hol_c = coefficient_algebra(model, spec, l);
    LieSubalgebra hol_gal = galaev_algebra(model, spec);
    rep.coefficient_dim = hol_c.dim();
    rep.galaev_dim = hol_gal.dim();
    rep.spans_equal = span_equal(hol_c, hol_gal);

    LieSubalgebra hol_gal_os = os_module_closure(model, hol_gal);
    rep.galaev_os_dim = hol_gal_os.dim();
    rep.os_span_matches = span_equal(hol_gal_os, hol_gal) ||
                          span_equal(os_module_closure(model, hol_c), hol_gal_os);

    const std::vector<PathModel> paths = detail::mechanism_paths(model, spec, l);
    const std::vector<GVector> frames = detail::frame_vectors(patch);
    TensorTable r = curvature(model.conn);
    std::vector<TensorTable> nabla_tables;
    for (const auto& dirs : detail::direction_tuples(patch->coord_count(), spec.k_max))
        nabla_tables.push_back(higher_covariant_derivative(model.conn, model.aux, r, dirs));

    // containment mechanism (Lem 3.1 data): every eta-derivative generator is
    // an O_{SxT}-combination of conjugated nabla^l R at the same path
    rep.eta_generators_in_galaev_span = true;
    const auto eta_tuples = detail::direction_tuples(l, spec.k_max);
    for (const auto& path : paths) {
        TransportOperator p = parallel_transport(model.conn, path);
        require(p.exact, errc::hybrid_mode_unsupported, "holonomy needs exact transports");
        GMatrix pinv = invert(p.matrix, ctx);
        const SPoint y = path.end();

        std::vector<GMatrix> nabla_gens;
        for (const auto& table : nabla_tables) {
            PulledTensor ty = pullback_tensor(table, y);
            for (const auto& u : frames)
                for (const auto& v : frames) {
                    GMatrix g = pinv * eval_tensor(ty, u, v, patch) * p.matrix;
                    if (!g.is_zero()) nabla_gens.push_back(g);
                }
        }
        SpanBasis nabla_span = module_span(nabla_gens, ctx, detail::scalar_mask(patch, l), -1);

        PulledTensor ry = pullback_tensor(r, y);
        for (const auto& tuple : eta_tuples) {
            PulledTensor cur = ry;
            for (auto it = tuple.rbegin(); it != tuple.rend(); ++it) {
                unsigned gen = ctx->index_of("etaT", *it + 1);
                cur = pullback_cov_deriv(cur, gen, point_eta_coefficient(model.conn, y, gen),
                                         point_eta_coefficient(model.aux, y, gen), patch);
            }
            for (const auto& u : frames)
                for (const auto& v : frames) {
                    GMatrix g = pinv * eval_tensor(cur, u, v, patch) * p.matrix;
                    if (!g.is_zero() && !nabla_span.contains(flatten(g, ctx)))
                        rep.eta_generators_in_galaev_span = false;
                }
        }
    }

    // converse mechanism (Lem 3.2): at the special point of order k, the
    // eta-pair cofactor times a conjugated nabla^k R generator lies in the
    // span of eta-derivative generators over the same point
    rep.special_point_conversion = true;
    for (unsigned k = 0; k <= spec.k_max; ++k) {
        const unsigned need = patch->odd_dim() + 2 * k * patch->even_dim();
        if (need > l) continue;
        SPoint y = special_point(model.base, k);
        PathModel path = line_path(model.base, y);
        TransportOperator p = parallel_transport(model.conn, path);
        GMatrix pinv = invert(p.matrix, ctx);
        GrassmannElement cof = special_point_cofactor(patch, k);
        PulledTensor ry = pullback_tensor(r, y);

        std::vector<GMatrix> holk_gens;
        for (const auto& tuple : detail::direction_tuples(need, spec.k_max)) {
            PulledTensor cur = ry;
            for (auto it = tuple.rbegin(); it != tuple.rend(); ++it) {
                unsigned gen = ctx->index_of("etaT", *it + 1);
                cur = pullback_cov_deriv(cur, gen, point_eta_coefficient(model.conn, y, gen),
                                         point_eta_coefficient(model.aux, y, gen), patch);
            }
            for (const auto& u : frames)
                for (const auto& v : frames) {
                    GMatrix g = pinv * eval_tensor(cur, u, v, patch) * p.matrix;
                    if (!g.is_zero()) holk_gens.push_back(g);
                }
        }
        SpanBasis holk_span = module_span(holk_gens, ctx, detail::scalar_mask(patch, l), -1);

        for (const auto& dirs : detail::direction_tuples(patch->coord_count(), k)) {
            if (dirs.size() != k) continue;
            TensorTable table = higher_covariant_derivative(model.conn, model.aux, r, dirs);
            PulledTensor ty = pullback_tensor(table, y);
            for (const auto& u : frames)
                for (const auto& v : frames) {
                    GMatrix g = pinv * eval_tensor(ty, u, v, patch) * p.matrix;
                    GMatrix dressed = g.scaled_left(cof);
                    if (!dressed.is_zero() && !holk_span.contains(flatten(dressed, ctx)))
                        rep.special_point_conversion = false;
                }
        }
    }
    return rep;
}

/// Prp: hol_x(T) = (hol_x(T))_{deg<=N} + (hol^Gal (x) (O_T)_{deg>N})_even,
/// as an internal direct sum.
struct DegreeDecompositionReport {
    bool second_summand_inside = false;
    bool sum_spans = false;
    bool direct = false;
    bool verdict() const { return second_summand_inside && sum_spans && direct; }
};

inline DegreeDecompositionReport degree_decomposition_check(const HolonomyModel& model,
                                                            const SampleSpec& spec, unsigned n,
                                                            unsigned lprime) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    const Mask tmask = detail::t_mask_upto(patch, lprime);
    const unsigned shift = ctx->total();

    LieSubalgebra hol_t = holonomy_algebra_T(model, spec, lprime);
    LieSubalgebra hol_gal = galaev_algebra(model, spec);

    auto high_degree = [&](std::uint64_t label) {
        Mask m = label & ((shift >= 64) ? ~Mask(0) : ((Mask(1) << shift) - 1));
        return mask_degree(m & tmask) > n;
    };
    SpanBasis low_part = hol_t.span().subspan_vanishing_on(high_degree);

    DegreeDecompositionReport rep;
    SpanBasis sum = low_part;
    SpanBasis high_part;
    rep.second_summand_inside = true;
    for (const auto& h : hol_gal.basis()) {
        auto hp = h.parity();
        for (Mask k : family_monomials(ctx, tmask)) {
            if (mask_degree(k) <= n) continue;
            if (hp && ((*hp + mask_parity(k)) & 1u) != 0) continue;
            GMatrix dressed = h.scaled_right(GrassmannElement::monomial(ctx, k));
            if (dressed.is_zero()) continue;
            SparseRow row = flatten(dressed, ctx);
            if (!hol_t.span().contains(row)) rep.second_summand_inside = false;
            high_part.insert(row);
            sum.insert(std::move(row));
        }
    }
    rep.direct = sum.dim() == low_part.dim() + high_part.dim();
    rep.sum_spans = sum == hol_t.span();
    return rep;
}

// ---------------------------------------------------------------------------
// Twofold invariance checks.
// ---------------------------------------------------------------------------

struct TwofoldReport {
    bool a_group = false, a_algebra = false;
    bool b_group = false, b_algebra = false;
    bool condition_a() const { return a_group && a_algebra; }
    bool condition_b() const { return b_group && b_algebra; }
    bool agree() const { return condition_a() == condition_b(); }
};

namespace detail {

/// Sampled group elements: transports around loops plus exponentials of the
/// (nilpotent, in exact mode) algebra basis.
inline std::vector<GMatrix> sampled_group(const HolonomyModel& model, const SampleSpec& spec,
                                          unsigned lprime, const LieSubalgebra& algebra) {
    const ContextPtr& ctx = model.patch()->context();
    std::vector<GMatrix> out;
    for (const auto& path : sample_paths(model, spec, lprime, model.base)) {
        if (!(path.end() == model.base)) continue;  // loops only
        TransportOperator p = parallel_transport(model.conn, path);
        out.push_back(p.matrix);
    }
    for (const auto& h : algebra.basis()) {
        auto hp = h.parity();
        if (hp && *hp == 0 && body_is_zero(h)) out.push_back(exp_nilpotent(h, ctx));
    }
    return out;
}

inline bool fixes_vector(const std::vector<GMatrix>& group, const GVector& x) {
    for (const auto& p : group)
        if (!(matvec(p, x) == x)) return false;
    return true;
}

inline bool annihilates_vector(const std::vector<GMatrix>& basis, const GVector& x) {
    for (const auto& h : basis)
        if (!matvec(h, x).is_zero()) return false;
    return true;
}

} // namespace detail

/// Thm (i): [ (Hol_x)_0 fixes X and hol^Gal X = 0 ]  vs  [ Hol_x(T) fixes X
/// and hol_x(T) X = 0 ], both sides sampled.
inline TwofoldReport invariance_vector(const HolonomyModel& model, const SampleSpec& spec,
                                       const GVector& x, unsigned lprime) {
    TwofoldReport rep;
    LieSubalgebra hol_gal = galaev_algebra(model, spec);
    LieSubalgebra hol_s = holonomy_algebra_T(model, spec, 0);
    LieSubalgebra hol_t = holonomy_algebra_T(model, spec, lprime);

    rep.a_group = detail::fixes_vector(detail::sampled_group(model, spec, 0, hol_s), x);
    rep.a_algebra = detail::annihilates_vector(hol_gal.basis(), x);
    rep.b_group = detail::fixes_vector(detail::sampled_group(model, spec, lprime, hol_t), x);
    rep.b_algebra = detail::annihilates_vector(hol_t.basis(), x);
    return rep;
}

/// Thm (ii) for a free O_S-submodule given by a body-independent basis.
inline TwofoldReport invariance_submodule(const HolonomyModel& model, const SampleSpec& spec,
                                          const std::vector<GVector>& basis, unsigned lprime) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    {
        DenseMatrix bodies;
        for (const auto& v : basis) bodies.push_back(body_vector(v));
        require(basis.empty() || rank_dense(bodies) == basis.size(), errc::not_free,
                "submodule basis must be body-independent");
    }
    // membership in the module span; over S for the Galaev side, over SxT for
    // the functor side (the group acts on x*E tensored with O_T)
    auto module_of = [&](Mask scalars) {
        SpanBasis span;
        for (const auto& v : basis)
            for (Mask m : family_monomials(ctx, scalars)) {
                GVector dressed = scale_vector(v, GrassmannElement::monomial(ctx, m));
                if (!dressed.is_zero()) span.insert(flatten(dressed, ctx));
            }
        return span;
    };
    SpanBasis span_s = module_of(patch->s_mask());
    SpanBasis span_st = module_of(detail::scalar_mask(patch, lprime));
    auto maps_into = [&](const std::vector<GMatrix>& ops, const SpanBasis& span) {
        for (const auto& p : ops)
            for (const auto& v : basis)
                if (!span.contains(flatten(matvec(p, v), ctx))) return false;
        return true;
    };

    TwofoldReport rep;
    LieSubalgebra hol_gal = galaev_algebra(model, spec);
    LieSubalgebra hol_s = holonomy_algebra_T(model, spec, 0);
    LieSubalgebra hol_t = holonomy_algebra_T(model, spec, lprime);
    rep.a_group = maps_into(detail::sampled_group(model, spec, 0, hol_s), span_s);
    rep.a_algebra = maps_into(hol_gal.basis(), span_s);
    rep.b_group = maps_into(detail::sampled_group(model, spec, lprime, hol_t), span_st);
    rep.b_algebra = maps_into(hol_t.basis(), span_st);
    return rep;
}

// ---------------------------------------------------------------------------
// Inclusions, functoriality, conjugation, Cor 3.6.
// ---------------------------------------------------------------------------

/// hol_x(T) lies in (hol^Gal (x) O_T)_even, and every sampled loop transport
/// factors through the underlying S-loop times an element homotopic to the
/// identity (checked along the soul-scaling homotopy).
inline bool inclusion_check(const HolonomyModel& model, const SampleSpec& spec,
                            unsigned lprime) {
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    LieSubalgebra hol_t = holonomy_algebra_T(model, spec, lprime);
    LieSubalgebra hol_gal = galaev_algebra(model, spec);
    SpanBasis gal_t = module_span(hol_gal.basis(), ctx, detail::scalar_mask(patch, lprime), 0);
    for (const auto& b : hol_t.basis())
        if (!gal_t.contains(flatten(b, ctx))) return false;

    for (const auto& path : sample_paths(model, spec, lprime, model.base)) {
        if (!(path.end() == model.base)) continue;
        TransportOperator whole = parallel_transport(model.conn, path);
        TransportOperator underlying =
            parallel_transport(model.conn, path.t_soul_scaled(0));
        // the homotopy stays inside the group: sample s = 1/2 as well
        TransportOperator mid = parallel_transport(model.conn, path.t_soul_scaled(Rational(1, 2)));
        GMatrix factor = whole.matrix * invert(underlying.matrix, ctx);
        if (!(factor * underlying.matrix == whole.matrix)) return false;
        if (rank_dense(body_matrix(mid.matrix)) != mid.matrix.dim()) return false;
        // the underlying transport is T-free
        for (unsigned r = 0; r < underlying.matrix.dim(); ++r)
            for (unsigned c = 0; c < underlying.matrix.dim(); ++c)
                if (underlying.matrix.at(r, c).involves(patch->t_mask())) return false;
    }
    return true;
}

/// A in hol_x(T) implies A in hol_x(T') for the next superpoint.
inline bool functoriality_check(const HolonomyModel& model, const SampleSpec& spec,
                                unsigned lprime) {
    LieSubalgebra small = holonomy_algebra_T(model, spec, lprime);
    LieSubalgebra big = holonomy_algebra_T(model, spec, lprime + 1);
    return big.contains_span(small);
}

/// hol at x equals the transport conjugate of hol at y.
inline bool conjugation_check(const HolonomyModel& model, const SampleSpec& spec,
                              const PathModel& to_y, unsigned lprime) {
    const ContextPtr& ctx = model.patch()->context();
    LieSubalgebra at_x = holonomy_algebra_T(model, spec, lprime);
    HolonomyModel shifted = model;
    shifted.base = to_y.end();
    LieSubalgebra at_y = holonomy_algebra_T(shifted, spec, lprime);
    TransportOperator p = parallel_transport(model.conn, to_y);
    GMatrix pinv = invert(p.matrix, ctx);
    LieSubalgebra conjugated(at_y.shape(), ctx);
    for (const auto& h : at_y.basis()) conjugated.insert(pinv * h * p.matrix);
    return span_equal(at_x, conjugated);
}

/// Cor: iterated eta-derivatives of a conjugated curvature differ from the
/// conjugated iterated pullback derivative by an element of hol_x(T)^{(k-1)}.
inline bool cor36_check(const HolonomyModel& model, const SampleSpec& spec, unsigned lprime,
                        unsigned k, const PathModel& path, const std::vector<unsigned>& etas,
                        const GVector& u, const GVector& v) {
    require(etas.size() == k && k >= 1, errc::precondition, "direction count");
    const PatchPtr& patch = model.patch();
    const ContextPtr& ctx = patch->context();
    TensorTable r = curvature(model.conn);
    TransportOperator p = parallel_transport(model.conn, path);
    GMatrix pinv = invert(p.matrix, ctx);
    const SPoint y = path.end();
    PulledTensor ry = pullback_tensor(r, y);

    GMatrix conj = pinv * eval_tensor(ry, u, v, patch) * p.matrix;
    GMatrix lhs = conj;
    for (auto it = etas.rbegin(); it != etas.rend(); ++it)
        lhs = matrix_partial(lhs, ctx->index_of("etaT", *it), ctx);

    PulledTensor cur = ry;
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
        unsigned gen = ctx->index_of("etaT", *it);
        cur = pullback_cov_deriv(cur, gen, point_eta_coefficient(model.conn, y, gen),
                                 point_eta_coefficient(model.aux, y, gen), patch);
    }
    GMatrix rhs = pinv * eval_tensor(cur, u, v, patch) * p.matrix;

    LieSubalgebra low = holk_algebra(model, spec, lprime, k - 1);
    SpanBasis low_span =
        module_span(low.basis(), ctx, detail::scalar_mask(patch, lprime), -1);
    return low_span.contains(flatten(lhs - rhs, ctx));
}

} // namespace shol
