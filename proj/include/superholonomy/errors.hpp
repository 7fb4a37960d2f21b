#pragma once

#include <stdexcept>
#include <string>

namespace shol {

enum class errc {
    context_mismatch,
    not_invertible,
    inhomogeneous,
    parity_error,
    precondition,
    degenerate_restriction,
    non_square_normalization,
    no_solution,
    not_free,
    t_too_small,
    hybrid_mode_unsupported,
    non_invertible_metric,
    not_submersion,
    incompatible,
    no_descent,
    spec_insufficient,
    syntax_error,
    unknown_symbol,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::context_mismatch: return "ContextMismatch";
        case errc::not_invertible: return "NotInvertible";
        case errc::inhomogeneous: return "Inhomogeneous";
        case errc::parity_error: return "ParityError";
        case errc::precondition: return "Precondition";
        case errc::degenerate_restriction: return "DegenerateRestriction";
        case errc::non_square_normalization: return "NonSquareNormalization";
        case errc::no_solution: return "NoSolution";
        case errc::not_free: return "NotFree";
        case errc::t_too_small: return "TTooSmall";
        case errc::hybrid_mode_unsupported: return "HybridModeUnsupported";
        case errc::non_invertible_metric: return "NonInvertibleMetric";
        case errc::not_submersion: return "NotSubmersion";
        case errc::incompatible: return "Incompatible";
        case errc::no_descent: return "NoDescent";
        case errc::spec_insufficient: return "SpecInsufficient";
        case errc::syntax_error: return "SyntaxError";
        case errc::unknown_symbol: return "UnknownSymbol";
        case errc::io_error: return "IoError";
    }
    return "Unknown";
}

/// Library-wide exception; `code` carries a machine-readable tag that the CLI
/// forwards into reports.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

} // namespace shol
