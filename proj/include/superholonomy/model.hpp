#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "superholonomy/fppf.hpp"
#include "superholonomy/parse.hpp"

namespace shol {

/// Parsed model file: one patch, a connection (possibly Levi-Civita of a
/// metric), named points, paths, vectors, submodules, morphisms and a cover.
struct ModelFile {
    PatchPtr patch;
    Shape bundle;
    bool bundle_is_tangent = true;
    ConnectionModel conn;
    ConnectionModel aux;
    std::optional<MetricModel> metric;
    std::map<std::string, SPoint> points;
    std::map<std::string, PathModel> paths;
    std::map<std::string, GVector> vectors;
    std::map<std::string, std::vector<GVector>> submodules;
    std::map<std::string, PointedMorphism> morphisms;
    std::map<std::string, SheafCover> covers;
    SampleSpec spec;
    std::string base_point = "x";

    HolonomyModel holonomy_model() const {
        auto it = points.find(base_point);
        require(it != points.end(), errc::precondition,
                "base point '" + base_point + "' is not declared");
        return HolonomyModel{conn, aux, it->second};
    }
};

namespace detail {

struct LineReader {
    std::vector<std::string> lines;
    std::size_t next = 0;

    bool done() const { return next >= lines.size(); }
    const std::string& peek() const { return lines[next]; }
    unsigned lineno() const { return unsigned(next + 1); }
};

inline std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

inline unsigned parse_kv(const std::string& word, const std::string& key, unsigned fallback,
                         bool* found = nullptr) {
    if (word.rfind(key + "=", 0) != 0) {
        if (found) *found = false;
        return fallback;
    }
    if (found) *found = true;
    return unsigned(std::stoul(word.substr(key.size() + 1)));
}

/// Coordinate index from its name (x<j> or th<j>).
inline unsigned coord_index(const PatchPtr& patch, const std::string& name, unsigned line) {
    auto bad = [&]() -> unsigned {
        fail(errc::unknown_symbol, "unknown coordinate '" + name + "' on line " +
                                       std::to_string(line));
    };
    if (name.size() >= 2 && name[0] == 'x') {
        unsigned j = unsigned(std::stoul(name.substr(1)));
        if (j < 1 || j > patch->even_dim()) return bad();
        return j - 1;
    }
    if (name.size() >= 3 && name.rfind("th", 0) == 0) {
        unsigned j = unsigned(std::stoul(name.substr(2)));
        if (j < 1 || j > patch->odd_dim()) return bad();
        return patch->even_dim() + j - 1;
    }
    return bad();
}

/// Bundle index: coordinate names for the tangent bundle, e<j> otherwise.
inline unsigned bundle_index(const ModelFile& model, const std::string& name, unsigned line) {
    if (model.bundle_is_tangent) return coord_index(model.patch, name, line);
    if (name.size() >= 2 && name[0] == 'e') {
        unsigned j = unsigned(std::stoul(name.substr(1)));
        require(j >= 1 && j <= model.bundle.dim(), errc::unknown_symbol,
                "bundle index '" + name + "' on line " + std::to_string(line));
        return j - 1;
    }
    fail(errc::unknown_symbol, "bundle index '" + name + "' on line " + std::to_string(line));
}

inline unsigned max_index_of(const std::string& text, const std::string& prefix) {
    unsigned best = 0;
    std::size_t pos = 0;
    while ((pos = text.find(prefix, pos)) != std::string::npos) {
        // reject when the prefix continues an identifier (e.g. etaS inside x_etaS)
        if (pos > 0 && (std::isalnum(static_cast<unsigned char>(text[pos - 1])) ||
                        text[pos - 1] == '_')) {
            pos += prefix.size();
            continue;
        }
        std::size_t p = pos + prefix.size();
        unsigned idx = 0;
        bool any = false;
        while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
            idx = idx * 10 + unsigned(text[p] - '0');
            ++p;
            any = true;
        }
        // "etaS" must not swallow "etaT..." etc.
        if (any && (p >= text.size() || !std::isalpha(static_cast<unsigned char>(text[p]))))
            best = std::max(best, idx);
        pos = p;
    }
    return best;
}

} // namespace detail

/// Parse a model file (see the README for the format).
inline ModelFile parse_model(const std::string& text) {
    using namespace detail;
    ModelFile model;

    LineReader reader;
    {
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            reader.lines.push_back(line);
        }
    }

    // ---- pass 1: header values and the required etaT capacity
    unsigned p = 0, q = 0, L = 0, lmax = 4, kmax = 3, tcap = 0;
    std::uint64_t seed = 1;
    unsigned max_eta = 0;
    std::vector<std::pair<unsigned, unsigned>> morphism_dims;
    for (const auto& raw : reader.lines) {
        std::string line = strip(raw);
        if (line.empty()) continue;
        auto ws = words(line);
        if (ws[0] == "manifold") {
            for (const auto& w : ws) {
                p = parse_kv(w, "p", p);
                q = parse_kv(w, "q", q);
            }
        } else if (ws[0] == "base") {
            for (const auto& w : ws) L = parse_kv(w, "L", L);
        } else if (ws[0] == "functor") {
            for (const auto& w : ws) {
                lmax = parse_kv(w, "lmax", lmax);
                kmax = parse_kv(w, "kmax", kmax);
                tcap = parse_kv(w, "tcap", tcap);
                bool found = false;
                unsigned s = parse_kv(w, "seed", 0, &found);
                if (found) seed = s;
            }
        } else if (ws[0] == "morphism" && ws.size() >= 6) {
            // morphism NAME from L into M
            morphism_dims.emplace_back(unsigned(std::stoul(ws[3])),
                                       unsigned(std::stoul(ws[5])));
        }
        max_eta = std::max(max_eta, max_index_of(line, "etaT"));
        max_eta = std::max(max_eta, max_index_of(line, "eta"));
    }
    unsigned capacity = std::max({tcap, lmax + 2, q + 2 * kmax * p, max_eta});
    for (const auto& [src, dst] : morphism_dims) {
        capacity = std::max(capacity, dst);
        for (const auto& [src2, dst2] : morphism_dims)
            if (src == src2) capacity = std::max(capacity, dst + dst2 - src);
    }
    require(L + capacity + q <= 64, errc::precondition, "generator budget exceeded");

    model.patch = make_patch(p, q, L, capacity);
    model.spec.k_max = kmax;
    model.spec.lprime_max = lmax;
    model.spec.seed = seed;
    model.bundle = model.patch->tangent_shape();
    model.conn = ConnectionModel(model.patch, model.bundle);
    model.aux = ConnectionModel::flat(model.patch, model.patch->tangent_shape());

    // ---- pass 2: sections
    const PatchPtr& patch = model.patch;
    bool conn_given = false, aux_given = false;

    auto parse_field = [&](const std::string& expr, unsigned line) {
        return parse_expression(expr, patch_resolver(patch, field_mode(patch)),
                                SourcePos{line, 1});
    };
    auto parse_const = [&](const std::string& expr, unsigned line, bool theta = false,
                           bool alias = false) {
        SuperFunction f = parse_expression(
            expr, patch_resolver(patch, constant_mode(theta, alias)), SourcePos{line, 1});
        return f.constant_coefficient();
    };

    auto parse_vector_literal = [&](const std::string& body, unsigned line) {
        // [ expr, expr, ... ] with bundle-many components
        std::string s = strip(body);
        require(!s.empty() && s.front() == '[' && s.back() == ']', errc::syntax_error,
                "expected [ ... ] on line " + std::to_string(line));
        s = s.substr(1, s.size() - 2);
        std::vector<GrassmannElement> comps;
        std::size_t start = 0;
        int depth = 0;
        for (std::size_t i = 0; i <= s.size(); ++i) {
            if (i < s.size() && s[i] == '(') ++depth;
            if (i < s.size() && s[i] == ')') --depth;
            if (i == s.size() || (s[i] == ',' && depth == 0)) {
                comps.push_back(parse_const(s.substr(start, i - start), line, true));
                start = i + 1;
            }
        }
        require(comps.size() == model.bundle.dim(), errc::precondition,
                "vector needs " + std::to_string(model.bundle.dim()) + " components (line " +
                    std::to_string(line) + ")");
        GVector v(model.bundle, 0, patch->context());
        v.comps = comps;
        for (unsigned par : {0u, 1u}) {
            v.parity = par;
            if (v.parity_consistent()) return v;
        }
        fail(errc::parity_error, "vector components must be parity-homogeneous (line " +
                                     std::to_string(line) + ")");
    };

    while (!reader.done()) {
        std::string line = strip(reader.peek());
        ++reader.next;
        if (line.empty()) continue;
        auto ws = words(line);
        const unsigned here = reader.lineno() - 1;

        if (ws[0] == "manifold" || ws[0] == "base" || ws[0] == "functor") continue;

        if (ws[0] == "basepoint") {
            require(ws.size() == 2, errc::syntax_error, "basepoint NAME");
            model.base_point = ws[1];
            continue;
        }

        if (ws[0] == "bundle") {
            require(ws.size() >= 2, errc::syntax_error, "bundle tangent | bundle r=R s=S");
            if (ws[1] == "tangent") {
                model.bundle_is_tangent = true;
                model.bundle = patch->tangent_shape();
            } else {
                unsigned r = 0, s = 0;
                for (const auto& w : ws) {
                    r = parse_kv(w, "r", r);
                    s = parse_kv(w, "s", s);
                }
                model.bundle_is_tangent = false;
                model.bundle = Shape{r, s};
            }
            model.conn = ConnectionModel(patch, model.bundle);
            continue;
        }

        if (ws[0] == "connection" || ws[0] == "aux_connection") {
            bool is_aux = ws[0] == "aux_connection";
            ConnectionModel target(patch, is_aux ? patch->tangent_shape() : model.bundle);
            while (!reader.done()) {
                std::string inner = strip(reader.peek());
                if (inner.empty()) {
                    ++reader.next;
                    continue;
                }
                auto iw = words(inner);
                if (iw[0] != "Gamma") break;
                ++reader.next;
                auto eq = inner.find('=');
                require(eq != std::string::npos && iw.size() >= 4, errc::syntax_error,
                        "Gamma <dir> <B> <C> = expr (line " + std::to_string(reader.lineno()) +
                            ")");
                unsigned a = coord_index(patch, iw[1], reader.lineno());
                unsigned B = is_aux ? coord_index(patch, iw[2], reader.lineno())
                                    : bundle_index(model, iw[2], reader.lineno());
                unsigned C = is_aux ? coord_index(patch, iw[3], reader.lineno())
                                    : bundle_index(model, iw[3], reader.lineno());
                target.set_christoffel(a, B, C, parse_field(inner.substr(eq + 1),
                                                            reader.lineno()));
            }
            if (is_aux) {
                model.aux = std::move(target);
                aux_given = true;
            } else {
                model.conn = std::move(target);
                conn_given = true;
            }
            continue;
        }

        if (ws[0] == "metric") {
            MetricModel metric{patch, fmatrix_zero(patch->tangent_shape(), patch)};
            std::vector<std::vector<bool>> given(patch->coord_count(),
                                                 std::vector<bool>(patch->coord_count(), false));
            while (!reader.done()) {
                std::string inner = strip(reader.peek());
                if (inner.empty()) {
                    ++reader.next;
                    continue;
                }
                auto iw = words(inner);
                if (iw[0] != "g") break;
                ++reader.next;
                auto eq = inner.find('=');
                require(eq != std::string::npos && iw.size() >= 3, errc::syntax_error,
                        "g <a> <b> = expr (line " + std::to_string(reader.lineno()) + ")");
                unsigned a = coord_index(patch, iw[1], reader.lineno());
                unsigned b = coord_index(patch, iw[2], reader.lineno());
                SuperFunction f = parse_field(inner.substr(eq + 1), reader.lineno());
                metric.gram.at(a, b) = f;
                given[a][b] = true;
            }
            // fill the supersymmetric partners that were not written out
            for (unsigned a = 0; a < patch->coord_count(); ++a)
                for (unsigned b = 0; b < patch->coord_count(); ++b)
                    if (given[a][b] && !given[b][a]) {
                        bool flip = patch->coord_parity(a) && patch->coord_parity(b);
                        metric.gram.at(b, a) =
                            flip ? -metric.gram.at(a, b) : metric.gram.at(a, b);
                    }
            metric.validate();
            model.metric = std::move(metric);
            continue;
        }

        if (ws[0] == "point") {
            require(ws.size() == 2, errc::syntax_error, "point NAME");
            SPoint pt(patch);
            while (!reader.done()) {
                std::string inner = strip(reader.peek());
                if (inner.empty()) {
                    ++reader.next;
                    continue;
                }
                auto eq = inner.find('=');
                auto iw = words(inner);
                if (eq == std::string::npos || iw.empty()) break;
                bool is_coord = true;
                unsigned ci = 0;
                try {
                    ci = coord_index(patch, iw[0], reader.lineno());
                } catch (const error&) {
                    is_coord = false;
                }
                if (!is_coord) break;
                ++reader.next;
                pt.images[ci] = parse_const(inner.substr(eq + 1), reader.lineno());
            }
            pt.validate();
            model.points.emplace(ws[1], std::move(pt));
            continue;
        }

        if (ws[0] == "path") {
            require(ws.size() >= 4 && ws[2] == "from", errc::syntax_error,
                    "path NAME from POINT");
            auto from = model.points.find(ws[3]);
            require(from != model.points.end(), errc::unknown_symbol,
                    "unknown point '" + ws[3] + "' on line " + std::to_string(here + 1));
            PathModel path{patch, {}};
            SPoint cursor = from->second;
            while (!reader.done()) {
                std::string inner = strip(reader.peek());
                if (inner.empty()) {
                    ++reader.next;
                    continue;
                }
                if (words(inner)[0] != "segment") break;
                ++reader.next;
                PathSegment seg;
                for (unsigned a = 0; a < patch->coord_count(); ++a)
                    seg.coords.push_back(SuperFunction::constant(cursor.images[a], 1));
                while (!reader.done()) {
                    std::string body = strip(reader.peek());
                    if (body.empty()) {
                        ++reader.next;
                        continue;
                    }
                    auto eq = body.find('=');
                    auto iw = words(body);
                    if (eq == std::string::npos || iw.empty() || iw[0] == "segment") break;
                    bool is_coord = true;
                    unsigned ci = 0;
                    try {
                        ci = coord_index(patch, iw[0], reader.lineno());
                    } catch (const error&) {
                        is_coord = false;
                    }
                    if (!is_coord) break;
                    ++reader.next;
                    seg.coords[ci] = parse_expression(
                        body.substr(eq + 1), patch_resolver(patch, path_mode()),
                        SourcePos{reader.lineno(), 1});
                }
                path.segments.push_back(seg);
                for (unsigned a = 0; a < patch->coord_count(); ++a)
                    cursor.images[a] =
                        seg.coords[a].eval_even(0, 1).constant_coefficient();
            }
            path.validate();
            require(path.start() == from->second, errc::precondition,
                    "path '" + ws[1] + "' does not start at " + ws[3]);
            model.paths.emplace(ws[1], std::move(path));
            continue;
        }

        if (ws[0] == "vector") {
            auto eq = line.find('=');
            require(ws.size() >= 3 && eq != std::string::npos, errc::syntax_error,
                    "vector NAME = [ ... ]");
            model.vectors.emplace(ws[1], parse_vector_literal(line.substr(eq + 1), here + 1));
            continue;
        }

        if (ws[0] == "submodule") {
            auto eq = line.find('=');
            require(ws.size() >= 3 && eq != std::string::npos, errc::syntax_error,
                    "submodule NAME = { [..], [..] }");
            std::string body = strip(line.substr(eq + 1));
            require(!body.empty() && body.front() == '{' && body.back() == '}',
                    errc::syntax_error, "expected { ... } on line " + std::to_string(here + 1));
            body = body.substr(1, body.size() - 2);
            std::vector<GVector> vs;
            std::size_t start = 0;
            int depth = 0;
            for (std::size_t i = 0; i <= body.size(); ++i) {
                if (i < body.size() && body[i] == '[') ++depth;
                if (i < body.size() && body[i] == ']') --depth;
                if (i == body.size() || (body[i] == ',' && depth == 0)) {
                    std::string piece = strip(body.substr(start, i - start));
                    if (!piece.empty()) vs.push_back(parse_vector_literal(piece, here + 1));
                    start = i + 1;
                }
            }
            model.submodules.emplace(ws[1], std::move(vs));
            continue;
        }

        if (ws[0] == "morphism") {
            require(ws.size() >= 6 && ws[2] == "from" && ws[4] == "into", errc::syntax_error,
                    "morphism NAME from L into M");
            PointedMorphism pm;
            pm.source_dim = unsigned(std::stoul(ws[3]));
            pm.target_dim = unsigned(std::stoul(ws[5]));
            pm.images.assign(pm.source_dim, GrassmannElement(patch->context()));
            while (!reader.done()) {
                std::string inner = strip(reader.peek());
                if (inner.empty()) {
                    ++reader.next;
                    continue;
                }
                auto arrow = inner.find("->");
                if (arrow == std::string::npos) break;
                auto iw = words(inner);
                require(iw[0].rfind("th", 0) == 0, errc::syntax_error,
                        "morphism lines look like th<j> -> expr");
                ++reader.next;
                unsigned j = unsigned(std::stoul(iw[0].substr(2)));
                require(j >= 1 && j <= pm.source_dim, errc::unknown_symbol,
                        "source generator out of range on line " + std::to_string(reader.lineno()));
                pm.images[j - 1] =
                    parse_const(inner.substr(arrow + 2), reader.lineno(), false, true);
            }
            pm.validate(patch);
            model.morphisms.emplace(ws[1], std::move(pm));
            continue;
        }

        if (ws[0] == "cover") {
            auto eq = line.find('=');
            require(ws.size() >= 3 && eq != std::string::npos, errc::syntax_error,
                    "cover NAME = phi psi ...");
            SheafCover cover;
            cover.patch = patch;
            for (const auto& name : words(line.substr(eq + 1))) {
                auto it = model.morphisms.find(name);
                require(it != model.morphisms.end(), errc::unknown_symbol,
                        "unknown morphism '" + name + "' on line " + std::to_string(here + 1));
                cover.elements.push_back(it->second);
            }
            require(!cover.elements.empty(), errc::precondition, "empty cover");
            cover.base_dim = cover.elements.front().source_dim;
            cover.validate();
            model.covers.emplace(ws[1], std::move(cover));
            continue;
        }

        fail(errc::syntax_error, "unknown directive '" + ws[0] + "' on line " +
                                     std::to_string(here + 1));
    }

    if (!conn_given && model.metric) {
        model.conn = levi_civita(*model.metric);
        model.bundle = patch->tangent_shape();
        model.bundle_is_tangent = true;
    }
    if (!aux_given) model.aux = ConnectionModel::flat(patch, patch->tangent_shape());
    if (model.points.find(model.base_point) == model.points.end())
        model.points.emplace(model.base_point, SPoint::origin(patch));
    return model;
}

inline ModelFile load_model(const std::string& filename) {
    std::ifstream in(filename);
    require(in.good(), errc::io_error, "cannot open " + filename);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

} // namespace shol
