#pragma once

// Synthetic turnout life cycles and attack injection.
//
// A nominal curve has three phases laid out on the normalized time axis
// x = (i + 0.5) / L:
//   unlocking inrush  - raised-cosine peak inside the first 15% of samples
//   translation       - flat plateau
//   locking           - raised-cosine bump inside the last 15% of samples
// Progressive kinds deform it with a severity s in [0, 1]: the plateau is
// scaled by (1 + plateau_gain * s) and the locking bump is widened by
// (1 + bump_widening * s).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/curve.hpp"
#include "turnout/error.hpp"

namespace turnout {

struct ShapeParams {
    double peak_amplitude = 1500.0;  // W, height of the inrush peak at zero severity
    double peak_position = 0.05;     // fraction of L
    double peak_half_width = 0.05;   // fraction of L
    double plateau_level = 500.0;    // W
    double bump_amplitude = 300.0;   // W above the plateau
    double bump_center = 0.925;      // fraction of L
    double bump_half_width = 0.05;   // fraction of L, at zero severity

    bool operator==(const ShapeParams&) const = default;
};

struct DeformationParams {
    double plateau_gain = 0.3;   // relative plateau rise at severity 1
    double bump_widening = 0.5;  // relative locking-bump widening at severity 1

    bool operator==(const DeformationParams&) const = default;
};

/// Shapes used for MinorAnomaly and SuddenFailure curves. Amplitudes are
/// fractions of the plateau level, positions and widths fractions of L.
struct AnomalyParams {
    double minor_amplitude = 0.6;
    double minor_half_width = 0.05;
    double minor_center_min = 0.3;
    double minor_center_max = 0.7;
    double truncation_min = 0.4;  // sample fraction where a stalled operation drops to zero
    double truncation_max = 0.8;
    double spike_amplitude = 1.2;
    double spike_width = 0.1;
    double spike_start_min = 0.3;
    double spike_start_max = 0.6;

    bool operator==(const AnomalyParams&) const = default;
};

struct Phase {
    CurveKind kind = CurveKind::EarlyLifeNormal;
    std::int64_t start = 0;  // inclusive op index
    std::int64_t end = 0;    // exclusive op index
    double severity_start = 0.0;
    double severity_end = 0.0;

    bool operator==(const Phase&) const = default;
};

struct GeneratorConfig {
    std::size_t length = 200;       // L, samples per curve
    std::int64_t operations = 1000; // M
    std::uint64_t seed = 42;
    double noise_sigma = 10.0;      // W, 2% of the default plateau
    std::vector<Phase> phase_plan;  // empty means default_phase_plan(operations)
    ShapeParams shape;
    DeformationParams deformation;
    AnomalyParams anomaly;
    double start_time = 1.7e9;
    double op_interval = 3600.0;

    bool operator==(const GeneratorConfig&) const = default;
};

/// Early life, a pre-fault progression ending in maintenance, a second healthy
/// period, then slow aging. Boundaries scale with the number of operations.
inline std::vector<Phase> default_phase_plan(std::int64_t operations) {
    const auto at = [operations](double fraction) {
        return static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(operations)));
    };
    return {
        {CurveKind::EarlyLifeNormal, 0, at(0.3), 0.0, 0.0},
        {CurveKind::ProgressivePreFault, at(0.3), at(0.5), 0.0, 1.0},
        {CurveKind::EarlyLifeNormal, at(0.5), at(0.8), 0.0, 0.0},
        {CurveKind::Aging, at(0.8), operations, 0.0, 0.3},
    };
}

inline std::vector<Phase> effective_phase_plan(const GeneratorConfig& config) {
    return config.phase_plan.empty() ? default_phase_plan(config.operations) : config.phase_plan;
}

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

inline double raised_cosine(double x, double center, double half_width) {
    const double d = std::abs(x - center);
    if (d >= half_width) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * d / half_width));
}

inline double position(std::size_t i, std::size_t length) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(length);
}

// Independent stream per (seed, op, purpose) so curves do not depend on
// generation order.
inline std::mt19937_64 op_rng(std::uint64_t seed, std::int64_t op, std::uint32_t purpose) {
    const auto uop = static_cast<std::uint64_t>(op);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(uop), static_cast<std::uint32_t>(uop >> 32),
                      purpose};
    return std::mt19937_64(seq);
}

inline constexpr std::uint32_t kLifecycleStream = 0x11fec7c1;
inline constexpr std::uint32_t kAttackStream = 0xa77ac4;

inline void add_noise(std::vector<double>& samples, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& s : samples) s = std::max(0.0, s + noise(rng));
}

} // namespace detail

inline void validate_config(const GeneratorConfig& config) {
    using detail::require;
    require(config.length >= 16, "curve length must be at least 16 samples");
    require(config.operations > 0, "number of operations must be positive");
    require(config.noise_sigma >= 0.0 && std::isfinite(config.noise_sigma),
            "noise_sigma must be finite and >= 0");
    const ShapeParams& s = config.shape;
    require(s.peak_amplitude > 0 && s.plateau_level > 0 && s.bump_amplitude > 0 &&
                s.peak_half_width > 0 && s.bump_half_width > 0,
            "shape amplitudes and widths must be > 0");
    require(s.peak_amplitude > s.plateau_level, "peak_amplitude must exceed plateau_level");
    require(s.peak_position - s.peak_half_width >= 0.0 &&
                s.peak_position + s.peak_half_width <= 0.15 + 1e-12,
            "inrush peak must lie within the first 15% of the curve");
    const double widest = s.bump_half_width * (1.0 + config.deformation.bump_widening);
    require(s.bump_center - widest >= 0.85 - 1e-12 && s.bump_center + widest <= 1.0 + 1e-12,
            "locking bump (at full widening) must lie within the last 15% of the curve");
    require(config.deformation.plateau_gain >= 0 && config.deformation.bump_widening >= 0,
            "deformation gains must be >= 0");
    require(config.op_interval > 0, "op_interval must be > 0");

    auto plan = effective_phase_plan(config);
    std::sort(plan.begin(), plan.end(),
              [](const Phase& a, const Phase& b) { return a.start < b.start; });
    std::int64_t cursor = 0;
    for (const Phase& p : plan) {
        require(p.start < p.end, "phase " + std::string(to_string(p.kind)) + " is empty");
        require(p.start >= cursor, "phases overlap at op " + std::to_string(p.start));
        require(p.start == cursor, "phases leave a gap at op " + std::to_string(cursor));
        require(p.severity_start >= 0 && p.severity_start <= 1 && p.severity_end >= 0 &&
                    p.severity_end <= 1,
                "severity must lie in [0, 1]");
        if (!is_progressive(p.kind)) {
            require(p.severity_start == 0 && p.severity_end == 0,
                    std::string(to_string(p.kind)) + " phases cannot carry a severity");
        }
        if (p.kind == CurveKind::ProgressivePreFault) {
            require(p.severity_start <= p.severity_end,
                    "ProgressivePreFault severity must be non-decreasing");
        }
        cursor = p.end;
    }
    require(cursor == config.operations, "phases must cover [0, operations)");
}

/// Noise-free nominal curve at the given deformation severity.
inline std::vector<double> nominal_curve(const GeneratorConfig& config, double severity) {
    const ShapeParams& s = config.shape;
    const double plateau = s.plateau_level * (1.0 + config.deformation.plateau_gain * severity);
    const double bump_half_width =
        s.bump_half_width * (1.0 + config.deformation.bump_widening * severity);
    std::vector<double> out(config.length);
    for (std::size_t i = 0; i < config.length; ++i) {
        const double x = detail::position(i, config.length);
        out[i] = plateau +
                 (s.peak_amplitude - s.plateau_level) *
                     detail::raised_cosine(x, s.peak_position, s.peak_half_width) +
                 s.bump_amplitude * detail::raised_cosine(x, s.bump_center, bump_half_width);
    }
    return out;
}

/// Nominal curve with a smooth transient bump somewhere in the translation phase.
inline std::vector<double> minor_anomaly_curve(const GeneratorConfig& config, std::mt19937_64& rng) {
    const AnomalyParams& a = config.anomaly;
    std::uniform_real_distribution<double> center_dist(a.minor_center_min, a.minor_center_max);
    const double center = center_dist(rng);
    auto out = nominal_curve(config, 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += a.minor_amplitude * config.shape.plateau_level *
                  detail::raised_cosine(detail::position(i, out.size()), center, a.minor_half_width);
    }
    return out;
}

/// Discontinuous failure: either the operation stalls and power drops to zero,
/// or the translation phase carries a rectangular overload spike.
inline std::vector<double> sudden_failure_curve(const GeneratorConfig& config, std::mt19937_64& rng) {
    const AnomalyParams& a = config.anomaly;
    auto out = nominal_curve(config, 0.0);
    const auto length = static_cast<double>(out.size());
    std::bernoulli_distribution truncate(0.5);
    if (truncate(rng)) {
        std::uniform_real_distribution<double> cut_dist(a.truncation_min, a.truncation_max);
        const auto cut = static_cast<std::size_t>(cut_dist(rng) * length);
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(std::min(cut, out.size())), out.end(), 0.0);
    } else {
        std::uniform_real_distribution<double> start_dist(a.spike_start_min, a.spike_start_max);
        const auto first = static_cast<std::size_t>(start_dist(rng) * length);
        const auto width = std::max<std::size_t>(1, static_cast<std::size_t>(a.spike_width * length));
        const std::size_t last = std::min(out.size(), first + width);
        for (std::size_t i = first; i < last; ++i) {
            out[i] += a.spike_amplitude * config.shape.plateau_level;
        }
    }
    return out;
}

/// Noisy curve of the requested label, drawn from `rng`.
inline std::vector<double> render_curve(const GeneratorConfig& config, const CurveLabel& label,
                                        std::mt19937_64& rng) {
    std::vector<double> samples;
    switch (label.kind) {
    case CurveKind::EarlyLifeNormal: samples = nominal_curve(config, 0.0); break;
    case CurveKind::Aging:
    case CurveKind::ProgressivePreFault:
    case CurveKind::EndOfLife: samples = nominal_curve(config, label.severity); break;
    case CurveKind::MinorAnomaly: samples = minor_anomaly_curve(config, rng); break;
    case CurveKind::SuddenFailure: samples = sudden_failure_curve(config, rng); break;
    }
    detail::add_noise(samples, config.noise_sigma, rng);
    return samples;
}

inline double phase_severity(const Phase& phase, std::int64_t op) {
    if (phase.end - phase.start <= 1) return phase.severity_start;
    const double t = static_cast<double>(op - phase.start) / static_cast<double>(phase.end - 1 - phase.start);
    return phase.severity_start + (phase.severity_end - phase.severity_start) * t;
}

inline Corpus generate_lifecycle(const GeneratorConfig& config) {
    validate_config(config);
    Corpus corpus;
    corpus.reserve(static_cast<std::size_t>(config.operations));
    for (const Phase& phase : effective_phase_plan(config)) {
        for (std::int64_t op = phase.start; op < phase.end; ++op) {
            CurveLabel label{phase.kind, is_progressive(phase.kind) ? phase_severity(phase, op) : 0.0};
            auto rng = detail::op_rng(config.seed, op, detail::kLifecycleStream);
            CurveRecord record;
            record.curve.samples = render_curve(config, label, rng);
            record.curve.op_index = op;
            record.curve.timestamp = config.start_time + config.op_interval * static_cast<double>(op);
            record.label = label;
            corpus.push_back(std::move(record));
        }
    }
    std::sort(corpus.begin(), corpus.end(), [](const CurveRecord& a, const CurveRecord& b) {
        return a.curve.op_index < b.curve.op_index;
    });
    return corpus;
}

// ---------------------------------------------------------------------------
// Attacks

enum class AttackKind { ReplayConceal, SpuriousFailure, SpuriousPreFault };

inline std::string_view to_string(AttackKind kind) {
    switch (kind) {
    case AttackKind::ReplayConceal: return "ReplayConceal";
    case AttackKind::SpuriousFailure: return "SpuriousFailure";
    case AttackKind::SpuriousPreFault: return "SpuriousPreFault";
    }
    return "?";
}

inline AttackKind attack_kind_from_string(std::string_view name) {
    for (AttackKind kind :
         {AttackKind::ReplayConceal, AttackKind::SpuriousFailure, AttackKind::SpuriousPreFault}) {
        if (to_string(kind) == name) return kind;
    }
    throw Error(ErrorKind::Schema, "unknown attack kind '" + std::string(name) + "'");
}

struct AttackScenario {
    AttackKind kind = AttackKind::ReplayConceal;
    std::int64_t start = 0;  // corpus positions, [start, end)
    std::int64_t end = 0;
    // ReplayConceal: first healthy position to replay from. Unset replays the
    // most recent healthy curves before `start`.
    std::optional<std::int64_t> source_index;
    double severity = 0.7;  // SpuriousPreFault deformation
    std::uint64_t seed = 7;

    bool operator==(const AttackScenario&) const = default;
};

/// Substitutes curves in `scenario`'s range. Op indices and timestamps are kept
/// (the attacker rewrites the signal, not the bookkeeping); labels describe the
/// substituted shape; `tampered` marks exactly the substituted positions.
/// `shapes` supplies the waveform and noise model for generated substitutes.
inline Corpus inject_attack(const Corpus& corpus, const AttackScenario& scenario,
                            const GeneratorConfig& shapes) {
    const auto size = static_cast<std::int64_t>(corpus.size());
    detail::require(scenario.start >= 0 && scenario.start <= scenario.end && scenario.end <= size,
                    "attack range [" + std::to_string(scenario.start) + ", " +
                        std::to_string(scenario.end) + ") is outside the corpus [0, " +
                        std::to_string(size) + ")");
    Corpus out = corpus;
    if (scenario.start == scenario.end) return out;

    if (scenario.kind == AttackKind::ReplayConceal) {
        std::vector<std::int64_t> healthy;
        const std::int64_t first = scenario.source_index.value_or(0);
        for (std::int64_t i = std::max<std::int64_t>(0, first); i < scenario.start; ++i) {
            const auto& r = corpus[static_cast<std::size_t>(i)];
            if (r.label.kind == CurveKind::EarlyLifeNormal && !r.tampered) healthy.push_back(i);
        }
        if (healthy.empty()) {
            throw Error(ErrorKind::InvalidArgument,
                        "ReplayConceal needs a healthy curve before position " +
                            std::to_string(scenario.start));
        }
        const auto needed = static_cast<std::size_t>(scenario.end - scenario.start);
        if (!scenario.source_index && healthy.size() > needed) {
            healthy.erase(healthy.begin(), healthy.end() - static_cast<std::ptrdiff_t>(needed));
        }
        for (std::int64_t i = scenario.start; i < scenario.end; ++i) {
            const auto k = static_cast<std::size_t>(i - scenario.start) % healthy.size();
            const auto& source = corpus[static_cast<std::size_t>(healthy[k])];
            auto& target = out[static_cast<std::size_t>(i)];
            target.curve.samples = source.curve.samples;
            target.label = source.label;
            target.tampered = true;
        }
        return out;
    }

    validate_config(shapes);
    detail::require(corpus.front().curve.size() == shapes.length,
                    "generator curve length does not match the corpus");
    detail::require(scenario.severity >= 0 && scenario.severity <= 1,
                    "attack severity must lie in [0, 1]");
    const CurveLabel label = scenario.kind == AttackKind::SpuriousFailure
                                 ? CurveLabel{CurveKind::SuddenFailure, 0.0}
                                 : CurveLabel{CurveKind::ProgressivePreFault, scenario.severity};
    for (std::int64_t i = scenario.start; i < scenario.end; ++i) {
        auto rng = detail::op_rng(scenario.seed, i, detail::kAttackStream);
        auto& target = out[static_cast<std::size_t>(i)];
        target.curve.samples = render_curve(shapes, label, rng);
        target.label = label;
        target.tampered = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Phase& p) {
    j = {{"kind", to_string(p.kind)},
         {"start", p.start},
         {"end", p.end},
         {"severity_start", p.severity_start},
         {"severity_end", p.severity_end}};
}

inline void from_json(const nlohmann::json& j, Phase& p) {
    p.kind = curve_kind_from_string(j.at("kind").get<std::string>());
    p.start = j.at("start").get<std::int64_t>();
    p.end = j.at("end").get<std::int64_t>();
    p.severity_start = j.value("severity_start", 0.0);
    p.severity_end = j.value("severity_end", p.severity_start);
}

inline void to_json(nlohmann::json& j, const ShapeParams& s) {
    j = {{"peak_amplitude", s.peak_amplitude}, {"peak_position", s.peak_position},
         {"peak_half_width", s.peak_half_width}, {"plateau_level", s.plateau_level},
         {"bump_amplitude", s.bump_amplitude},   {"bump_center", s.bump_center},
         {"bump_half_width", s.bump_half_width}};
}

inline void from_json(const nlohmann::json& j, ShapeParams& s) {
    const ShapeParams d;
    s.peak_amplitude = j.value("peak_amplitude", d.peak_amplitude);
    s.peak_position = j.value("peak_position", d.peak_position);
    s.peak_half_width = j.value("peak_half_width", d.peak_half_width);
    s.plateau_level = j.value("plateau_level", d.plateau_level);
    s.bump_amplitude = j.value("bump_amplitude", d.bump_amplitude);
    s.bump_center = j.value("bump_center", d.bump_center);
    s.bump_half_width = j.value("bump_half_width", d.bump_half_width);
}

inline void to_json(nlohmann::json& j, const DeformationParams& d) {
    j = {{"plateau_gain", d.plateau_gain}, {"bump_widening", d.bump_widening}};
}

inline void from_json(const nlohmann::json& j, DeformationParams& d) {
    const DeformationParams def;
    d.plateau_gain = j.value("plateau_gain", def.plateau_gain);
    d.bump_widening = j.value("bump_widening", def.bump_widening);
}

inline void to_json(nlohmann::json& j, const AnomalyParams& a) {
    j = {{"minor_amplitude", a.minor_amplitude},   {"minor_half_width", a.minor_half_width},
         {"minor_center_min", a.minor_center_min}, {"minor_center_max", a.minor_center_max},
         {"truncation_min", a.truncation_min},     {"truncation_max", a.truncation_max},
         {"spike_amplitude", a.spike_amplitude},   {"spike_width", a.spike_width},
         {"spike_start_min", a.spike_start_min},   {"spike_start_max", a.spike_start_max}};
}

inline void from_json(const nlohmann::json& j, AnomalyParams& a) {
    const AnomalyParams d;
    a.minor_amplitude = j.value("minor_amplitude", d.minor_amplitude);
    a.minor_half_width = j.value("minor_half_width", d.minor_half_width);
    a.minor_center_min = j.value("minor_center_min", d.minor_center_min);
    a.minor_center_max = j.value("minor_center_max", d.minor_center_max);
    a.truncation_min = j.value("truncation_min", d.truncation_min);
    a.truncation_max = j.value("truncation_max", d.truncation_max);
    a.spike_amplitude = j.value("spike_amplitude", d.spike_amplitude);
    a.spike_width = j.value("spike_width", d.spike_width);
    a.spike_start_min = j.value("spike_start_min", d.spike_start_min);
    a.spike_start_max = j.value("spike_start_max", d.spike_start_max);
}

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"length", c.length},
         {"operations", c.operations},
         {"seed", c.seed},
         {"noise_sigma", c.noise_sigma},
         {"phase_plan", effective_phase_plan(c)},
         {"shape", c.shape},
         {"deformation", c.deformation},
         {"anomaly", c.anomaly},
         {"start_time", c.start_time},
         {"op_interval", c.op_interval}};
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    const GeneratorConfig d;
    c.length = j.value("length", d.length);
    c.operations = j.value("operations", d.operations);
    c.seed = j.value("seed", d.seed);
    c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
    c.phase_plan = j.value("phase_plan", std::vector<Phase>{});
    c.shape = j.value("shape", d.shape);
    c.deformation = j.value("deformation", d.deformation);
    c.anomaly = j.value("anomaly", d.anomaly);
    c.start_time = j.value("start_time", d.start_time);
    c.op_interval = j.value("op_interval", d.op_interval);
}

inline void to_json(nlohmann::json& j, const AttackScenario& s) {
    j = {{"kind", to_string(s.kind)}, {"start", s.start},       {"end", s.end},
         {"severity", s.severity},    {"seed", s.seed}};
    if (s.source_index) j["source_index"] = *s.source_index;
}

inline void from_json(const nlohmann::json& j, AttackScenario& s) {
    const AttackScenario d;
    s.kind = attack_kind_from_string(j.at("kind").get<std::string>());
    s.start = j.at("start").get<std::int64_t>();
    s.end = j.at("end").get<std::int64_t>();
    s.severity = j.value("severity", d.severity);
    s.seed = j.value("seed", d.seed);
    if (j.contains("source_index")) s.source_index = j.at("source_index").get<std::int64_t>();
}

} // namespace turnout
