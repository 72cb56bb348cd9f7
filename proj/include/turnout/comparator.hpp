#pragma once

// Curve distances and the validated / non-validated decision. All distances
// are in watts: field curves never pass through the model's normalizer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/curve.hpp"
#include "turnout/dataio.hpp"
#include "turnout/error.hpp"
#include "turnout/lstm.hpp"

namespace turnout {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Dimension, "euclidean distance needs equal lengths, got " +
                                              std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sum);
}

inline double euclidean(const PowerCurve& a, const PowerCurve& b) { return euclidean(a.samples, b.samples); }

/// Dynamic time warping with cost |a_i - b_j| and steps (i-1, j), (i, j-1),
/// (i-1, j-1). `band` restricts cells to |i - j| <= band (widened to the length
/// difference so a path always exists). Two rows over the shorter series.
inline double dtw(std::span<const double> a, std::span<const double> b, std::optional<std::size_t> band = {}) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidArgument, "dtw needs non-empty series");
    if (a.size() < b.size()) std::swap(a, b);
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    const std::size_t radius = band ? std::max(*band, n - m) : n;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), curr(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(curr.begin(), curr.end(), inf);
        const std::size_t lo = i > radius ? i - radius : 1;
        const std::size_t hi = std::min(m, i + radius);
        for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
            const double best = std::min({prev[j], curr[j - 1], prev[j - 1]});
            curr[j] = std::abs(a[i - 1] - b[j - 1]) + best;
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

inline double dtw(const PowerCurve& a, const PowerCurve& b, std::optional<std::size_t> band = {}) {
    return dtw(a.samples, b.samples, band);
}

struct DistancePair {
    double euclidean = 0;
    double dtw = 0;

    bool operator==(const DistancePair&) const = default;
};

inline DistancePair distances(const PowerCurve& field, const PowerCurve& predicted,
                              std::optional<std::size_t> band = {}) {
    return {euclidean(field, predicted), dtw(field, predicted, band)};
}

struct CalibrationOptions {
    double percentile = 100.0;  // 100 = max of the test residual distances
    double safety_factor = 1.0;
    std::optional<std::size_t> band;  // DTW Sakoe-Chiba radius

    bool operator==(const CalibrationOptions&) const = default;
};

struct Thresholds {
    double tau_euclidean = 0;
    double tau_dtw = 0;
    std::size_t test_pairs = 0;
    double percentile = 100.0;
    double safety_factor = 1.0;
    std::optional<std::size_t> band;
    std::vector<std::string> warnings;

    bool operator==(const Thresholds&) const = default;
};

/// Nearest-rank percentile, p in (0, 100].
inline double percentile_of(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorKind::InsufficientData, "percentile of an empty set");
    if (!(p > 0 && p <= 100)) throw Error(ErrorKind::InvalidArgument, "percentile must lie in (0, 100]");
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

/// Forecasts every test window and sets each threshold to the configured
/// percentile (default: the max) of the residual distances times the safety factor.
inline Thresholds calibrate(const ForecastModel& model, std::span<const SupervisedPair> test_pairs,
                            const CalibrationOptions& options = {}) {
    if (test_pairs.empty()) throw Error(ErrorKind::InsufficientData, "calibration needs a non-empty test set");
    if (!(options.safety_factor > 0)) throw Error(ErrorKind::InvalidArgument, "safety_factor must be > 0");
    std::vector<double> euc, dtws;
    euc.reserve(test_pairs.size());
    dtws.reserve(test_pairs.size());
    for (const auto& pair : test_pairs) {
        const PowerCurve predicted = forward(model, pair.inputs);
        const DistancePair d = distances(*pair.target, predicted, options.band);
        euc.push_back(d.euclidean);
        dtws.push_back(d.dtw);
    }
    Thresholds th;
    th.tau_euclidean = percentile_of(euc, options.percentile) * options.safety_factor;
    th.tau_dtw = percentile_of(dtws, options.percentile) * options.safety_factor;
    th.test_pairs = test_pairs.size();
    th.percentile = options.percentile;
    th.safety_factor = options.safety_factor;
    th.band = options.band;
    if (th.tau_euclidean <= 0) th.warnings.push_back("euclidean threshold is zero: only exact matches will validate");
    if (th.tau_dtw <= 0) th.warnings.push_back("dtw threshold is zero: only exact matches will validate");
    return th;
}

struct ValidationOutcome {
    bool validated = false;
    DistancePair distances;
};

/// Validated iff both distances are within their thresholds.
inline ValidationOutcome validate(const PowerCurve& field, const PowerCurve& predicted, const Thresholds& th) {
    if (field.size() != predicted.size()) {
        throw Error(ErrorKind::Dimension, "field curve has " + std::to_string(field.size()) +
                                              " samples, prediction has " + std::to_string(predicted.size()));
    }
    const DistancePair d = distances(field, predicted, th.band);
    return {d.euclidean <= th.tau_euclidean && d.dtw <= th.tau_dtw, d};
}

inline void to_json(nlohmann::json& j, const DistancePair& d) { j = {{"euclidean", d.euclidean}, {"dtw", d.dtw}}; }
inline void from_json(const nlohmann::json& j, DistancePair& d) {
    d.euclidean = j.at("euclidean").get<double>();
    d.dtw = j.at("dtw").get<double>();
}

inline void to_json(nlohmann::json& j, const Thresholds& t) {
    j = {{"tau_euclidean", t.tau_euclidean},
         {"tau_dtw", t.tau_dtw},
         {"test_pairs", t.test_pairs},
         {"percentile", t.percentile},
         {"safety_factor", t.safety_factor},
         {"band", t.band ? nlohmann::json(*t.band) : nlohmann::json(nullptr)},
         {"warnings", t.warnings}};
}

inline void from_json(const nlohmann::json& j, Thresholds& t) {
    t.tau_euclidean = j.at("tau_euclidean").get<double>();
    t.tau_dtw = j.at("tau_dtw").get<double>();
    if (!(t.tau_euclidean >= 0) || !(t.tau_dtw >= 0)) throw Error(ErrorKind::Schema, "thresholds must be >= 0");
    t.test_pairs = j.value("test_pairs", std::size_t{0});
    t.percentile = j.value("percentile", 100.0);
    t.safety_factor = j.value("safety_factor", 1.0);
    t.band.reset();
    if (j.contains("band") && !j.at("band").is_null()) t.band = j.at("band").get<std::size_t>();
    t.warnings = j.value("warnings", std::vector<std::string>{});
}

} // namespace turnout
