#pragma once

// Rule-based curve classifier. Features are read from fixed regions of the
// curve: inrush = first 20% of samples, plateau = middle 60%, locking = last 20%.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/curve.hpp"
#include "turnout/error.hpp"

namespace turnout {

struct CurveFeatures {
    double peak_amplitude = 0;  // W, max of the inrush region
    double peak_position = 0;   // fraction of L
    double plateau_mean = 0;    // W
    double plateau_slope = 0;   // W per sample, least squares
    double bump_amplitude = 0;  // W above the plateau median, locking region
    bool truncated = false;     // tail far below the plateau
    double bump_width = 0;      // samples above half the bump amplitude
    double plateau_excess = 0;  // W, plateau max above the plateau median
    double max_jump = 0;        // W, largest sample-to-sample step after the inrush

    bool operator==(const CurveFeatures&) const = default;
};

struct FeatureRegions {
    std::size_t plateau_begin;
    std::size_t plateau_end;
    std::size_t tail_begin;
};

inline FeatureRegions feature_regions(std::size_t length) {
    return {length / 5, (4 * length) / 5, length - std::max<std::size_t>(1, length / 20)};
}

inline CurveFeatures extract_features(const PowerCurve& curve) {
    const auto& x = curve.samples;
    const std::size_t n = x.size();
    if (n < 5) throw Error(ErrorKind::Dimension, "curve too short for feature extraction");
    const auto [p0, p1, t0] = feature_regions(n);
    CurveFeatures f;

    const auto peak = std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p0));
    f.peak_amplitude = *peak;
    f.peak_position = (static_cast<double>(peak - x.begin()) + 0.5) / static_cast<double>(n);

    const std::span<const double> plateau(x.data() + p0, p1 - p0);
    double sum = 0;
    for (double v : plateau) sum += v;
    f.plateau_mean = sum / static_cast<double>(plateau.size());
    const double xm = 0.5 * static_cast<double>(plateau.size() - 1);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < plateau.size(); ++i) {
        const double dx = static_cast<double>(i) - xm;
        sxy += dx * (plateau[i] - f.plateau_mean);
        sxx += dx * dx;
    }
    f.plateau_slope = sxx > 0 ? sxy / sxx : 0.0;
    std::vector<double> sorted(plateau.begin(), plateau.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    f.plateau_excess = *std::max_element(plateau.begin(), plateau.end()) - median;

    const double locking_max = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(p1), x.end());
    f.bump_amplitude = std::max(0.0, locking_max - median);
    if (f.bump_amplitude > 0) {
        const double half = median + 0.5 * f.bump_amplitude;
        f.bump_width = static_cast<double>(std::count_if(x.begin() + static_cast<std::ptrdiff_t>(p1), x.end(),
                                                         [half](double v) { return v > half; }));
    }

    double tail = 0;
    for (std::size_t i = t0; i < n; ++i) tail += x[i];
    tail /= static_cast<double>(n - t0);
    f.truncated = tail <= 0.25 * f.plateau_mean;

    for (std::size_t i = p0; i + 1 < n; ++i) f.max_jump = std::max(f.max_jump, std::abs(x[i + 1] - x[i]));
    return f;
}

struct FeatureBand {
    double mean = 0;
    double std = 0;

    /// Upper edge of the +/- k sigma band. The spread is floored so that a
    /// noise-free baseline still yields a usable (tight) band.
    double upper(double sigmas) const {
        return mean + sigmas * std::max(std, 1e-6 * std::abs(mean) + 1e-9);
    }

    bool operator==(const FeatureBand&) const = default;
};

/// Feature statistics of healthy reference curves.
struct BaselineStats {
    std::size_t count = 0;
    FeatureBand plateau_mean;
    FeatureBand plateau_excess;
    FeatureBand bump_width;
    FeatureBand max_jump;
    FeatureBand peak_amplitude;

    bool operator==(const BaselineStats&) const = default;
};

struct ClassifierConfig {
    double band_sigmas = 3.0;
    double minor_excess_fraction = 0.2;  // of the baseline plateau: smallest transient bump
    double jump_fraction = 0.5;          // of the baseline plateau: smallest discontinuity
    double corridor_max_elevation = 0.5; // plateau rise beyond this is not a progression

    bool operator==(const ClassifierConfig&) const = default;
};

inline BaselineStats fit_baseline(std::span<const PowerCurve> reference) {
    if (reference.empty()) throw Error(ErrorKind::InsufficientData, "no reference curves for the classifier baseline");
    std::vector<CurveFeatures> feats;
    feats.reserve(reference.size());
    for (const auto& c : reference) feats.push_back(extract_features(c));
    const auto band = [&](double CurveFeatures::*field) {
        double m = 0;
        for (const auto& f : feats) m += f.*field;
        m /= static_cast<double>(feats.size());
        double v = 0;
        for (const auto& f : feats) v += (f.*field - m) * (f.*field - m);
        return FeatureBand{m, std::sqrt(v / static_cast<double>(feats.size()))};
    };
    return {reference.size(),
            band(&CurveFeatures::plateau_mean),
            band(&CurveFeatures::plateau_excess),
            band(&CurveFeatures::bump_width),
            band(&CurveFeatures::max_jump),
            band(&CurveFeatures::peak_amplitude)};
}

/// Kind as seen by the investigation: progressive kinds collapse onto
/// ProgressivePreFault.
inline CurveKind investigation_kind(CurveKind kind) {
    return is_progressive(kind) ? CurveKind::ProgressivePreFault : kind;
}

/// Returns one of EarlyLifeNormal, ProgressivePreFault, MinorAnomaly, SuddenFailure.
inline CurveKind classify(const CurveFeatures& f, const BaselineStats& ref, const ClassifierConfig& cfg = {}) {
    const double plateau = ref.plateau_mean.mean;
    if (f.truncated || f.max_jump > std::max(ref.max_jump.upper(cfg.band_sigmas), cfg.jump_fraction * plateau)) {
        return CurveKind::SuddenFailure;
    }
    if (f.plateau_excess > std::max(ref.plateau_excess.upper(cfg.band_sigmas), cfg.minor_excess_fraction * plateau)) {
        return CurveKind::MinorAnomaly;
    }
    if (f.plateau_mean > ref.plateau_mean.upper(cfg.band_sigmas)) {
        return f.plateau_mean > plateau * (1.0 + cfg.corridor_max_elevation) ? CurveKind::SuddenFailure
                                                                            : CurveKind::ProgressivePreFault;
    }
    if (f.plateau_mean < plateau * (1.0 - cfg.corridor_max_elevation)) return CurveKind::SuddenFailure;
    return CurveKind::EarlyLifeNormal;
}

inline CurveKind classify(const PowerCurve& curve, const BaselineStats& ref, const ClassifierConfig& cfg = {}) {
    return classify(extract_features(curve), ref, cfg);
}

inline void to_json(nlohmann::json& j, const FeatureBand& b) { j = {{"mean", b.mean}, {"std", b.std}}; }
inline void from_json(const nlohmann::json& j, FeatureBand& b) {
    b.mean = j.at("mean").get<double>();
    b.std = j.at("std").get<double>();
}

inline void to_json(nlohmann::json& j, const BaselineStats& s) {
    j = {{"count", s.count},
         {"plateau_mean", s.plateau_mean},
         {"plateau_excess", s.plateau_excess},
         {"bump_width", s.bump_width},
         {"max_jump", s.max_jump},
         {"peak_amplitude", s.peak_amplitude}};
}

inline void from_json(const nlohmann::json& j, BaselineStats& s) {
    s.count = j.at("count").get<std::size_t>();
    s.plateau_mean = j.at("plateau_mean").get<FeatureBand>();
    s.plateau_excess = j.at("plateau_excess").get<FeatureBand>();
    s.bump_width = j.at("bump_width").get<FeatureBand>();
    s.max_jump = j.at("max_jump").get<FeatureBand>();
    s.peak_amplitude = j.at("peak_amplitude").get<FeatureBand>();
}

inline void to_json(nlohmann::json& j, const ClassifierConfig& c) {
    j = {{"band_sigmas", c.band_sigmas},
         {"minor_excess_fraction", c.minor_excess_fraction},
         {"jump_fraction", c.jump_fraction},
         {"corridor_max_elevation", c.corridor_max_elevation}};
}

inline void from_json(const nlohmann::json& j, ClassifierConfig& c) {
    const ClassifierConfig d;
    c.band_sigmas = j.value("band_sigmas", d.band_sigmas);
    c.minor_excess_fraction = j.value("minor_excess_fraction", d.minor_excess_fraction);
    c.jump_fraction = j.value("jump_fraction", d.jump_fraction);
    c.corridor_max_elevation = j.value("corridor_max_elevation", d.corridor_max_elevation);
}

} // namespace turnout
