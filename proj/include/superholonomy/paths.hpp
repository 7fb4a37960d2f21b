#pragma once

#include <vector>

#include "superholonomy/points.hpp"

namespace shol {

/// One polynomial piece of a path, parametrized on [0,1]: a SuperFunction in
/// the single even variable t per coordinate.
struct PathSegment {
    std::vector<SuperFunction> coords;

    SuperFunction velocity(unsigned a) const { return coords[a].d_even(0); }
};

/// Piecewise polynomial path on the patch; segments join exactly.
struct PathModel {
    PatchPtr patch;
    std::vector<PathSegment> segments;

    SPoint point_at(std::size_t seg, const Rational& t) const {
        SPoint p(patch);
        for (unsigned a = 0; a < patch->coord_count(); ++a)
            p.images[a] = segments[seg].coords[a].eval_even(0, t).constant_coefficient();
        return p;
    }

    SPoint start() const { return point_at(0, 0); }
    SPoint end() const { return point_at(segments.size() - 1, 1); }

    void validate() const {
        require(!segments.empty(), errc::precondition, "path needs at least one segment");
        for (const auto& seg : segments) {
            require(seg.coords.size() == patch->coord_count(), errc::precondition,
                    "segment coordinate count");
            for (unsigned a = 0; a < patch->coord_count(); ++a)
                require(seg.coords[a].homogeneous(patch->coord_parity(a)), errc::parity_error,
                        "path coordinate parity at " + patch->coord_name(a));
        }
        for (std::size_t i = 0; i + 1 < segments.size(); ++i)
            require(point_at(i, 1) == point_at(i + 1, 0), errc::precondition,
                    "segments must join continuously");
        start().validate();
        end().validate();
    }

    PathModel reversed() const {
        PathModel out{patch, {}};
        for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
            PathSegment seg;
            for (const auto& f : it->coords)
                seg.coords.push_back(f.affine_substitute(0, 1, -1));  // t -> 1 - t
            out.segments.push_back(std::move(seg));
        }
        return out;
    }

    PathModel then(const PathModel& next) const {
        require(end() == next.start(), errc::precondition, "paths do not concatenate");
        PathModel out = *this;
        out.segments.insert(out.segments.end(), next.segments.begin(), next.segments.end());
        return out;
    }

    /// Scale every etaT-soul term of the coordinates by s (the homotopy from
    /// the underlying S-path at s = 0 to the full path at s = 1).
    PathModel t_soul_scaled(const Rational& s) const {
        PathModel out{patch, {}};
        const Mask t = patch->t_mask();
        for (const auto& seg : segments) {
            PathSegment sc;
            for (const auto& f : seg.coords) {
                SuperFunction g(patch->context(), 1);
                for (const auto& [deg, coeff] : f.terms()) {
                    GrassmannElement scaled(patch->context());
                    for (const auto& [mask, c] : coeff.terms()) {
                        Rational factor(1);
                        for (unsigned k = 0; k < mask_degree(mask & t); ++k) factor *= s;
                        scaled.add_term(mask, c * factor);
                    }
                    g.add_term(deg, scaled);
                }
                sc.coords.push_back(g);
            }
            out.segments.push_back(std::move(sc));
        }
        return out;
    }
};

inline PathModel constant_path(const SPoint& x) {
    PathModel out{x.patch, {PathSegment{}}};
    for (unsigned a = 0; a < x.patch->coord_count(); ++a)
        out.segments[0].coords.push_back(SuperFunction::constant(x.images[a], 1));
    return out;
}

/// Straight segment x + t (y - x).
inline PathModel line_path(const SPoint& x, const SPoint& y) {
    PathModel out{x.patch, {PathSegment{}}};
    const ContextPtr& ctx = x.patch->context();
    for (unsigned a = 0; a < x.patch->coord_count(); ++a) {
        SuperFunction f = SuperFunction::constant(x.images[a], 1);
        f += SuperFunction::coordinate(ctx, 1, 0) * (y.images[a] - x.images[a]);
        out.segments[0].coords.push_back(f);
    }
    return out;
}

/// Loop at x bulging by t (1 - t) * displacement per coordinate.
inline PathModel bump_loop(const SPoint& x, const std::vector<GrassmannElement>& displacement) {
    PathModel out{x.patch, {PathSegment{}}};
    const ContextPtr& ctx = x.patch->context();
    SuperFunction bump = SuperFunction::coordinate(ctx, 1, 0) -
                         SuperFunction::coordinate(ctx, 1, 0) *
                             SuperFunction::coordinate(ctx, 1, 0);
    for (unsigned a = 0; a < x.patch->coord_count(); ++a) {
        SuperFunction f = SuperFunction::constant(x.images[a], 1);
        f += bump * displacement[a];
        out.segments[0].coords.push_back(f);
    }
    return out;
}

/// Split one whole-interval path into two reparametrized halves.
inline std::pair<PathModel, PathModel> split_halves(const PathModel& path) {
    require(path.segments.size() == 1, errc::precondition, "split expects a single segment");
    PathModel first{path.patch, {PathSegment{}}}, second{path.patch, {PathSegment{}}};
    for (const auto& f : path.segments[0].coords) {
        first.segments[0].coords.push_back(f.affine_substitute(0, 0, Rational(1, 2)));
        second.segments[0].coords.push_back(
            f.affine_substitute(0, Rational(1, 2), Rational(1, 2)));
    }
    return {first, second};
}

} // namespace shol
