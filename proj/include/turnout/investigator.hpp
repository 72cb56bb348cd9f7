#pragma once

// Investigation of non-validated field curves.
//
//   field kind            window progressing?   verdict
//   EarlyLifeNormal       any                   Suspicious        FIG4_1
//   ProgressivePreFault   no                    Suspicious        FIG4_2_1
//   ProgressivePreFault   yes                   Suspicious if both distances exceed
//                                               escalation_factor x threshold,
//                                               else NoSuspicion  FIG4_2_1B (extension)
//   MinorAnomaly          any                   NoSuspicion       FIG4_2_2
//   SuddenFailure         any                   EscalateToExpert  FIG4_2_3

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/classifier.hpp"
#include "turnout/comparator.hpp"
#include "turnout/curve.hpp"
#include "turnout/error.hpp"

namespace turnout {

enum class VerdictKind { Validated, Suspicious, NoSuspicion, EscalateToExpert };

enum class ReasonCode { Validated, Fig4_1, Fig4_2_1, Fig4_2_1B, Fig4_2_2, Fig4_2_3 };

inline std::string_view to_string(VerdictKind k) {
    switch (k) {
    case VerdictKind::Validated: return "Validated";
    case VerdictKind::Suspicious: return "Suspicious";
    case VerdictKind::NoSuspicion: return "NoSuspicion";
    case VerdictKind::EscalateToExpert: return "EscalateToExpert";
    }
    return "?";
}

inline std::string_view to_string(ReasonCode r) {
    switch (r) {
    case ReasonCode::Validated: return "VALIDATED";
    case ReasonCode::Fig4_1: return "FIG4_1";
    case ReasonCode::Fig4_2_1: return "FIG4_2_1";
    case ReasonCode::Fig4_2_1B: return "FIG4_2_1B";
    case ReasonCode::Fig4_2_2: return "FIG4_2_2";
    case ReasonCode::Fig4_2_3: return "FIG4_2_3";
    }
    return "?";
}

inline VerdictKind verdict_kind_from_string(std::string_view s) {
    for (auto k : {VerdictKind::Validated, VerdictKind::Suspicious, VerdictKind::NoSuspicion,
                   VerdictKind::EscalateToExpert}) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorKind::Schema, "unknown verdict '" + std::string(s) + "'");
}

inline ReasonCode reason_code_from_string(std::string_view s) {
    for (auto r : {ReasonCode::Validated, ReasonCode::Fig4_1, ReasonCode::Fig4_2_1, ReasonCode::Fig4_2_1B,
                   ReasonCode::Fig4_2_2, ReasonCode::Fig4_2_3}) {
        if (to_string(r) == s) return r;
    }
    throw Error(ErrorKind::Schema, "unknown reason code '" + std::string(s) + "'");
}

struct Verdict {
    VerdictKind kind = VerdictKind::Validated;
    ReasonCode reason = ReasonCode::Validated;
    std::string rationale;

    bool operator==(const Verdict&) const = default;
};

struct InvestigationConfig {
    std::size_t recent_curves = 10;      // K
    double progression_fraction = 0.3;   // P
    double escalation_factor = 2.0;

    bool operator==(const InvestigationConfig&) const = default;
};

/// True when at least P of the window's last K curves classify as
/// ProgressivePreFault.
inline bool window_shows_progression(std::span<const PowerCurve> window, const BaselineStats& baseline,
                                     const ClassifierConfig& classifier = {},
                                     const InvestigationConfig& config = {}) {
    const std::size_t k = std::min(config.recent_curves, window.size());
    if (k == 0) return false;
    std::size_t progressive = 0;
    for (const auto& curve : window.last(k)) {
        if (classify(curve, baseline, classifier) == CurveKind::ProgressivePreFault) ++progressive;
    }
    return static_cast<double>(progressive) >= config.progression_fraction * static_cast<double>(k) - 1e-12;
}

/// Decision for a non-validated curve.
inline Verdict investigate(CurveKind field_kind, CurveKind predicted_kind, bool window_progressing,
                           const DistancePair& d, const Thresholds& th, const InvestigationConfig& config = {}) {
    switch (investigation_kind(field_kind)) {
    case CurveKind::EarlyLifeNormal:
        return {VerdictKind::Suspicious, ReasonCode::Fig4_1,
                "field curve shows early-life behaviour although the forecast (" +
                    std::string(to_string(predicted_kind)) +
                    ") follows the window's evolution; the behaviour is unexpected and suspicious"};
    case CurveKind::ProgressivePreFault:
        if (!window_progressing) {
            return {VerdictKind::Suspicious, ReasonCode::Fig4_2_1,
                    "progressive pre-fault curve without any prior indication of a progressive anomaly"};
        }
        if (d.euclidean > config.escalation_factor * th.tau_euclidean &&
            d.dtw > config.escalation_factor * th.tau_dtw) {
            return {VerdictKind::Suspicious, ReasonCode::Fig4_2_1B,
                    "pre-fault curve in a progressing window, but grossly off the forecast"};
        }
        return {VerdictKind::NoSuspicion, ReasonCode::Fig4_2_1B,
                "pre-fault curve consistent with the progression already under way"};
    case CurveKind::MinorAnomaly:
        return {VerdictKind::NoSuspicion, ReasonCode::Fig4_2_2,
                "minor anomaly that resolves without maintenance; no suspicion raised"};
    case CurveKind::SuddenFailure:
    default:
        return {VerdictKind::EscalateToExpert, ReasonCode::Fig4_2_3,
                window_progressing
                    ? "sudden failure; the forecaster cannot anticipate it, additional expertise is required"
                    : "sudden failure that should have been preceded by a progressive evolution, which is "
                      "absent; additional expertise is required"};
    }
}

struct InvestigationReport {
    std::int64_t op_index = 0;
    DistancePair distances;
    double tau_euclidean = 0;
    double tau_dtw = 0;
    CurveKind predicted_kind = CurveKind::EarlyLifeNormal;
    CurveKind field_kind = CurveKind::EarlyLifeNormal;
    bool window_progressive = false;
    Verdict verdict;
    std::optional<bool> tampered;          // ground truth, scoring only
    std::size_t consecutive_rejections = 0;
    bool alert = false;                    // sustained divergence from the forecast

    bool operator==(const InvestigationReport&) const = default;
};

inline nlohmann::json report_to_json(const InvestigationReport& r) {
    nlohmann::json j = {{"op_index", r.op_index},
                        {"distances", r.distances},
                        {"thresholds", {{"tau_euclidean", r.tau_euclidean}, {"tau_dtw", r.tau_dtw}}},
                        {"predicted_kind", to_string(r.predicted_kind)},
                        {"field_kind", to_string(r.field_kind)},
                        {"sequence_context", {{"window_progressive", r.window_progressive}}},
                        {"verdict",
                         {{"kind", to_string(r.verdict.kind)},
                          {"reason", to_string(r.verdict.reason)},
                          {"rationale", r.verdict.rationale}}},
                        {"tampered", r.tampered ? nlohmann::json(*r.tampered) : nlohmann::json(nullptr)},
                        {"consecutive_rejections", r.consecutive_rejections},
                        {"alert", r.alert}};
    return j;
}

inline InvestigationReport report_from_json(const nlohmann::json& j) {
    InvestigationReport r;
    r.op_index = j.at("op_index").get<std::int64_t>();
    r.distances = j.at("distances").get<DistancePair>();
    r.tau_euclidean = j.at("thresholds").at("tau_euclidean").get<double>();
    r.tau_dtw = j.at("thresholds").at("tau_dtw").get<double>();
    r.predicted_kind = curve_kind_from_string(j.at("predicted_kind").get<std::string>());
    r.field_kind = curve_kind_from_string(j.at("field_kind").get<std::string>());
    r.window_progressive = j.at("sequence_context").at("window_progressive").get<bool>();
    const auto& v = j.at("verdict");
    r.verdict = {verdict_kind_from_string(v.at("kind").get<std::string>()),
                 reason_code_from_string(v.at("reason").get<std::string>()), v.value("rationale", "")};
    if (j.contains("tampered") && !j.at("tampered").is_null()) r.tampered = j.at("tampered").get<bool>();
    r.consecutive_rejections = j.value("consecutive_rejections", std::size_t{0});
    r.alert = j.value("alert", false);
    return r;
}

struct RunScore {
    std::size_t reports = 0;
    std::size_t scored = 0;  // reports carrying ground truth
    std::size_t tampered = 0;
    std::size_t untampered = 0;
    std::size_t suspicious_tampered = 0;
    std::size_t suspicious_untampered = 0;
    std::size_t escalations = 0;
    std::optional<double> detection_rate;    // undefined without tampered ops
    std::optional<double> false_alarm_rate;  // undefined without untampered ops
    std::optional<double> escalation_rate;   // over all reports

    bool operator==(const RunScore&) const = default;
};

inline RunScore score_run(std::span<const InvestigationReport> reports) {
    RunScore s;
    s.reports = reports.size();
    for (const auto& r : reports) {
        if (r.verdict.kind == VerdictKind::EscalateToExpert) ++s.escalations;
        if (!r.tampered) continue;
        ++s.scored;
        const bool suspicious = r.verdict.kind == VerdictKind::Suspicious;
        if (*r.tampered) {
            ++s.tampered;
            if (suspicious) ++s.suspicious_tampered;
        } else {
            ++s.untampered;
            if (suspicious) ++s.suspicious_untampered;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    s.detection_rate = ratio(s.suspicious_tampered, s.tampered);
    s.false_alarm_rate = ratio(s.suspicious_untampered, s.untampered);
    s.escalation_rate = ratio(s.escalations, s.reports);
    return s;
}

inline nlohmann::json score_to_json(const RunScore& s) {
    const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"reports", s.reports},
            {"scored", s.scored},
            {"tampered", s.tampered},
            {"untampered", s.untampered},
            {"suspicious_tampered", s.suspicious_tampered},
            {"suspicious_untampered", s.suspicious_untampered},
            {"escalations", s.escalations},
            {"detection_rate", opt(s.detection_rate)},
            {"false_alarm_rate", opt(s.false_alarm_rate)},
            {"escalation_rate", opt(s.escalation_rate)}};
}

inline void to_json(nlohmann::json& j, const InvestigationConfig& c) {
    j = {{"recent_curves", c.recent_curves},
         {"progression_fraction", c.progression_fraction},
         {"escalation_factor", c.escalation_factor}};
}

inline void from_json(const nlohmann::json& j, InvestigationConfig& c) {
    const InvestigationConfig d;
    c.recent_curves = j.value("recent_curves", d.recent_curves);
    c.progression_fraction = j.value("progression_fraction", d.progression_fraction);
    c.escalation_factor = j.value("escalation_factor", d.escalation_factor);
}

} // namespace turnout
