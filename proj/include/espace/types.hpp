#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "espace/error.hpp"

namespace espace {

// The six constructions of the projection matrix. Integer codes are part of
// the on-disk sidecar format and must stay stable.
enum class CandidateKind : std::uint32_t {
    Mse = 0,
    Nmse = 1,
    Go = 2,
    GoNorm = 3,
    Nl = 4,
    NlNorm = 5,
};

inline constexpr std::array<CandidateKind, 6> kAllCandidateKinds = {
    CandidateKind::Mse,    CandidateKind::Nmse, CandidateKind::Go,
    CandidateKind::GoNorm, CandidateKind::Nl,   CandidateKind::NlNorm,
};

inline const char* kind_name(CandidateKind k) {
    switch (k) {
        case CandidateKind::Mse: return "mse";
        case CandidateKind::Nmse: return "nmse";
        case CandidateKind::Go: return "go";
        case CandidateKind::GoNorm: return "go_norm";
        case CandidateKind::Nl: return "nl";
        case CandidateKind::NlNorm: return "nl_norm";
    }
    throw DataError("invalid CandidateKind");
}

inline CandidateKind kind_from_code(std::uint32_t code) {
    if (code > 5) throw DataError("candidate kind code out of range: " + std::to_string(code));
    return static_cast<CandidateKind>(code);
}

inline CandidateKind kind_from_name(const std::string& name) {
    for (CandidateKind k : kAllCandidateKinds)
        if (name == kind_name(k)) return k;
    throw DataError("unknown candidate kind: " + name);
}

// Eigenvalue ordering used when truncating an eigenbasis. Algebraic descending
// maximizes the Rayleigh sum; absolute-value descending reproduces the
// originally published treatment of indefinite matrices.
enum class OrderingMode : std::uint32_t {
    Algebraic = 0,
    AbsoluteValue = 1,
};

inline const char* ordering_name(OrderingMode m) {
    return m == OrderingMode::Algebraic ? "algebraic" : "absolute";
}

inline OrderingMode ordering_from_name(const std::string& name) {
    if (name == "algebraic") return OrderingMode::Algebraic;
    if (name == "absolute") return OrderingMode::AbsoluteValue;
    throw DataError("unknown ordering mode: " + name);
}

}  // namespace espace
