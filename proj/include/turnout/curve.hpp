#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "turnout/error.hpp"

namespace turnout {

/// Power drawn by the switch machine during one switch operation, sampled at
/// a fixed rate. Every curve of a corpus has the same number of samples.
struct PowerCurve {
    std::vector<double> samples;  // watts
    std::int64_t op_index = 0;
    double timestamp = 0.0;       // seconds since epoch

    std::size_t size() const noexcept { return samples.size(); }

    bool operator==(const PowerCurve&) const = default;
};

enum class CurveKind {
    EarlyLifeNormal,
    Aging,
    ProgressivePreFault,
    MinorAnomaly,
    SuddenFailure,
    EndOfLife
};

inline constexpr CurveKind kAllCurveKinds[] = {
    CurveKind::EarlyLifeNormal, CurveKind::Aging,         CurveKind::ProgressivePreFault,
    CurveKind::MinorAnomaly,    CurveKind::SuddenFailure, CurveKind::EndOfLife};

inline std::string_view to_string(CurveKind kind) {
    switch (kind) {
    case CurveKind::EarlyLifeNormal: return "EarlyLifeNormal";
    case CurveKind::Aging: return "Aging";
    case CurveKind::ProgressivePreFault: return "ProgressivePreFault";
    case CurveKind::MinorAnomaly: return "MinorAnomaly";
    case CurveKind::SuddenFailure: return "SuddenFailure";
    case CurveKind::EndOfLife: return "EndOfLife";
    }
    return "?";
}

inline CurveKind curve_kind_from_string(std::string_view name) {
    for (CurveKind kind : kAllCurveKinds) {
        if (to_string(kind) == name) return kind;
    }
    throw Error(ErrorKind::Schema, "unknown curve kind '" + std::string(name) + "'");
}

/// Kinds whose shape follows a severity-driven deformation.
inline bool is_progressive(CurveKind kind) {
    return kind == CurveKind::ProgressivePreFault || kind == CurveKind::Aging ||
           kind == CurveKind::EndOfLife;
}

struct CurveLabel {
    CurveKind kind = CurveKind::EarlyLifeNormal;
    double severity = 0.0;  // in [0, 1]; nonzero only for progressive kinds

    bool operator==(const CurveLabel&) const = default;
};

/// One corpus entry: the curve, what it depicts, and whether it was substituted
/// by an attacker (ground truth, only known for synthetic data).
struct CurveRecord {
    PowerCurve curve;
    CurveLabel label;
    bool tampered = false;

    bool operator==(const CurveRecord&) const = default;
};

using Corpus = std::vector<CurveRecord>;

inline std::vector<PowerCurve> curves_of(const Corpus& corpus) {
    std::vector<PowerCurve> out;
    out.reserve(corpus.size());
    for (const auto& record : corpus) out.push_back(record.curve);
    return out;
}

inline bool all_finite(const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

} // namespace turnout
