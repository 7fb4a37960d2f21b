#pragma once

#include <chrono>
#include <json.hpp>

#include "superholonomy/derham.hpp"
#include "superholonomy/model.hpp"

namespace shol {

using Json = nlohmann::json;

inline Json json_of(const Rational& r) { return to_string(r); }

inline Json json_of(const GrassmannElement& g) {
    Json terms = Json::array();
    for (const auto& [mask, coeff] : g.terms()) {
        Json indices = Json::array();
        Mask rest = mask;
        while (rest) {
            unsigned pos = static_cast<unsigned>(std::countr_zero(rest));
            rest &= rest - 1;
            indices.push_back(g.context()->gen_name(pos));
        }
        terms.push_back(Json{{"coeff", json_of(coeff)}, {"indices", indices}});
    }
    return terms;
}

inline Json json_of(const GMatrix& m) {
    Json rows = Json::array();
    for (unsigned r = 0; r < m.dim(); ++r) {
        Json row = Json::array();
        for (unsigned c = 0; c < m.dim(); ++c) row.push_back(json_of(m.at(r, c)));
        rows.push_back(row);
    }
    return rows;
}

inline Json json_of(const SuperFunction& f, const PatchPtr& patch) {
    Json terms = Json::array();
    for (const auto& [deg, g] : f.terms()) {
        Json monomial = Json::array();
        for (std::size_t j = 0; j < deg.size(); ++j)
            if (deg[j]) monomial.push_back(Json{{"power", deg[j]}, {"var", j + 1}});
        terms.push_back(Json{{"coeff", json_of(g)}, {"even", monomial}});
    }
    (void)patch;
    return terms;
}

inline Json json_of(const GVector& v) {
    Json comps = Json::array();
    for (const auto& c : v.comps) comps.push_back(json_of(c));
    return Json{{"components", comps}, {"parity", v.parity}};
}

/// Options shared by all CLI commands.
struct RunOptions {
    std::optional<unsigned> kmax;
    std::optional<unsigned> lprime;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> path_name;       // transport
    std::optional<std::string> candidate_name;  // derham-wu
    std::optional<std::string> cover_name;      // fppf glue
    bool timings = false;
};

struct RunResult {
    Json report;
    bool all_passed = true;
};

namespace detail {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start)
            .count();
    }
};

inline void note_verdict(RunResult& out, Json& verdicts, const std::string& name, bool ok) {
    verdicts[name] = ok;
    out.all_passed = out.all_passed && ok;
}

} // namespace detail

/// Dispatch a CLI command against a parsed model.  Reports are deterministic:
/// the optional timing block is the only run-dependent content.
inline RunResult run_command(const ModelFile& model_in, const std::string& command,
                             const RunOptions& opts = {}) {
    ModelFile model = model_in;
    if (opts.kmax) model.spec.k_max = *opts.kmax;
    if (opts.lprime) model.spec.lprime_max = *opts.lprime;
    if (opts.seed) model.spec.seed = *opts.seed;

    detail::Timer timer;
    RunResult out;
    Json& rep = out.report;
    Json verdicts = Json::object();
    rep["command"] = command;
    rep["mode"] = "exact";
    rep["spec"] = Json{{"kmax", model.spec.k_max},
                       {"lmax", model.spec.lprime_max},
                       {"seed", model.spec.seed}};

    const PatchPtr& patch = model.patch;
    const ContextPtr& ctx = patch->context();

    if (command == "curvature") {
        TensorTable r = curvature(model.conn);
        Json comps = Json::object();
        bool antisym = true;
        for (const auto& [ab, m] : r.comp) {
            const auto [a, b] = ab;
            Json entry = Json::array();
            for (unsigned rr = 0; rr < m.dim(); ++rr) {
                Json row = Json::array();
                for (unsigned cc = 0; cc < m.dim(); ++cc)
                    row.push_back(json_of(m.at(rr, cc), patch));
                entry.push_back(row);
            }
            comps[patch->coord_name(a) + "," + patch->coord_name(b)] = entry;
            FMatrix other = r.at(b, a);
            if (!(patch->coord_parity(a) && patch->coord_parity(b))) other = -other;
            antisym = antisym && (m == other);
        }
        rep["curvature"] = comps;
        detail::note_verdict(out, verdicts, "antisupersymmetry", antisym);
    } else if (command == "transport") {
        std::string name = opts.path_name.value_or(
            model.paths.empty() ? "" : model.paths.begin()->first);
        auto it = model.paths.find(name);
        require(it != model.paths.end(), errc::unknown_symbol,
                "transport needs a declared path");
        TransportOperator p = parallel_transport(model.conn, it->second);
        rep["path"] = name;
        rep["mode"] = p.exact ? "exact" : "hybrid";
        if (p.exact) {
            rep["matrix"] = json_of(p.matrix);
            rep["picard_iterations"] = p.picard_iterations;
            detail::note_verdict(out, verdicts, "picard_bound",
                                 p.picard_iterations <= ctx->total() + 1);
            TransportOperator back = parallel_transport(model.conn, it->second.reversed());
            detail::note_verdict(out, verdicts, "inversion",
                                 back.matrix == invert(p.matrix, ctx));
        } else {
            Json body = Json::array();
            for (double v : p.body_numeric) body.push_back(v);
            rep["body"] = body;
        }
    } else if (command == "holonomy") {
        HolonomyModel hm = model.holonomy_model();
        StabilizationReport stab = stabilization_threshold(hm, model.spec);
        const unsigned l = std::max(stab.threshold, model.spec.lprime_max);
        LieSubalgebra hol_t = holonomy_algebra_T(hm, model.spec, l);
        LieSubalgebra hol_c = coefficient_algebra(hm, model.spec, l);
        LieSubalgebra hol_gal = galaev_algebra(hm, model.spec);
        LieSubalgebra hol_gal_os = os_module_closure(hm, hol_gal);

        Json dims = Json::array();
        for (std::size_t d : stab.dims) dims.push_back(d);
        rep["coefficient_dims_per_lprime"] = dims;
        rep["stabilization_threshold"] = stab.threshold;
        rep["hol_T_dim"] = hol_t.dim();
        rep["hol_C_dim"] = hol_c.dim();
        rep["hol_Gal_dim"] = hol_gal.dim();
        rep["hol_Gal_OS_dim"] = hol_gal_os.dim();
        Json basis = Json::array();
        for (const auto& b : hol_c.basis()) basis.push_back(json_of(b));
        rep["hol_C_basis"] = basis;
        auto graded = hol_c.graded_dims();
        rep["hol_C_graded"] = Json{{"even", graded.first}, {"odd", graded.second}};
        detail::note_verdict(out, verdicts, "comparison", span_equal(hol_c, hol_gal));
        detail::note_verdict(out, verdicts, "dims_nondecreasing", [&] {
            for (std::size_t i = 0; i + 1 < stab.dims.size(); ++i)
                if (stab.dims[i] > stab.dims[i + 1]) return false;
            return true;
        }());
    } else if (command == "compare") {
        HolonomyModel hm = model.holonomy_model();
        ComparisonReport cr = comparison_check(hm, model.spec);
        rep["stabilized_lprime"] = cr.stabilized_lprime;
        rep["hol_C_dim"] = cr.coefficient_dim;
        rep["hol_Gal_dim"] = cr.galaev_dim;
        rep["hol_Gal_OS_dim"] = cr.galaev_os_dim;
        detail::note_verdict(out, verdicts, "spans_equal", cr.spans_equal);
        detail::note_verdict(out, verdicts, "eta_generators_in_nabla_span",
                             cr.eta_generators_in_galaev_span);
        detail::note_verdict(out, verdicts, "special_point_conversion",
                             cr.special_point_conversion);
        detail::note_verdict(out, verdicts, "os_span_matches", cr.os_span_matches);
    } else if (command == "twofold") {
        HolonomyModel hm = model.holonomy_model();
        const unsigned l = std::max(stabilization_threshold(hm, model.spec).threshold,
                                    std::min(model.spec.lprime_max, patch->t_capacity()));
        rep["lprime"] = l;
        Json cases = Json::object();
        bool agree_all = true;
        for (const auto& [name, v] : model.vectors) {
            TwofoldReport tr = invariance_vector(hm, model.spec, v, l);
            cases["vector:" + name] =
                Json{{"a_group", tr.a_group},
                     {"a_algebra", tr.a_algebra},
                     {"b_group", tr.b_group},
                     {"b_algebra", tr.b_algebra},
                     {"condition_a", tr.condition_a()},
                     {"condition_b", tr.condition_b()},
                     {"agree", tr.agree()}};
            agree_all = agree_all && tr.agree();
        }
        for (const auto& [name, basis] : model.submodules) {
            TwofoldReport tr = invariance_submodule(hm, model.spec, basis, l);
            cases["submodule:" + name] =
                Json{{"a_group", tr.a_group},
                     {"a_algebra", tr.a_algebra},
                     {"b_group", tr.b_group},
                     {"b_algebra", tr.b_algebra},
                     {"condition_a", tr.condition_a()},
                     {"condition_b", tr.condition_b()},
                     {"agree", tr.agree()}};
            agree_all = agree_all && tr.agree();
        }
        rep["cases"] = cases;
        detail::note_verdict(out, verdicts, "conditions_agree", agree_all);
    } else if (command == "derham-wu") {
        require(model.metric.has_value(), errc::precondition, "derham-wu needs a metric");
        HolonomyModel hm = model.holonomy_model();
        std::vector<GVector> candidate;
        if (opts.candidate_name) {
            auto it = model.submodules.find(*opts.candidate_name);
            require(it != model.submodules.end(), errc::unknown_symbol,
                    "unknown submodule '" + *opts.candidate_name + "'");
            candidate = it->second;
        }
        DeRhamWuReport dr = derham_wu_split(*model.metric, hm, model.spec, candidate);
        rep["holonomy_dim"] = dr.holonomy_dim;
        Json kernel = Json::array();
        for (const auto& v : dr.kernel_basis) kernel.push_back(json_of(v));
        rep["kernel_basis"] = kernel;
        Json blocks = Json::array();
        for (const auto& b : dr.blocks) {
            Json jb;
            jb["rank"] = b.basis.size();
            jb["flat"] = b.flat;
            jb["invariant"] = b.invariant;
            jb["nondegenerate"] = b.nondegenerate;
            jb["irreducibility"] = b.irreducibility;
            blocks.push_back(jb);
        }
        rep["blocks"] = blocks;
        detail::note_verdict(out, verdicts, "kernel_free", dr.kernel_free);
        detail::note_verdict(out, verdicts, "block_diagonal", dr.block_diagonal);
        detail::note_verdict(out, verdicts, "split", dr.verdict());
    } else if (command == "fppf-audit") {
        require(!model.morphisms.empty(), errc::precondition, "fppf audit needs morphisms");
        Json table = Json::object();
        bool ok = true;
        for (const auto& [name, pm] : model.morphisms) {
            EquivalenceAudit audit = equivalence_audit(pm.standalone(patch));
            Json restrictions = Json::array();
            for (bool f : audit.restrictions_free) restrictions.push_back(f);
            table[name] = Json{{"submersion", audit.submersion},
                               {"free", audit.free_module},
                               {"rank1_restrictions_free", restrictions},
                               {"consistent", audit.consistent()}};
            ok = ok && audit.consistent();
        }
        rep["morphisms"] = table;
        detail::note_verdict(out, verdicts, "equivalences_consistent", ok);
    } else if (command == "fppf-glue") {
        require(!model.covers.empty(), errc::precondition, "fppf glue needs a cover");
        std::string name = opts.cover_name.value_or(model.covers.begin()->first);
        auto it = model.covers.find(name);
        require(it != model.covers.end(), errc::unknown_symbol,
                "unknown cover '" + name + "'");
        HolonomyModel hm = model.holonomy_model();
        SheafAuditReport sr = sheaf_audit_holonomy(hm, model.spec, it->second);
        rep["cover"] = name;
        detail::note_verdict(out, verdicts, "holonomy_membership_glues",
                             sr.holonomy_membership_glues);
        detail::note_verdict(out, verdicts, "galaev_span_glues", sr.galaev_span_glues);
        detail::note_verdict(out, verdicts, "corrupted_family_rejected",
                             sr.corrupted_family_rejected);
    } else {
        fail(errc::syntax_error, "unknown command '" + command + "'");
    }

    rep["verdicts"] = verdicts;
    rep["passed"] = out.all_passed;
    if (opts.timings) rep["timings_ms"] = Json{{"total", timer.ms()}};
    return out;
}

inline std::string render_report(const RunResult& result) { return result.report.dump(2) + "\n"; }

} // namespace shol
