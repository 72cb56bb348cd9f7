#pragma once

// Development phase on a recorded life cycle: chronological split, training on
// the older part, calibration and classifier baseline from the split. Shared
// by the command-line tool and the scenario tests.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "turnout/classifier.hpp"
#include "turnout/comparator.hpp"
#include "turnout/curvegen.hpp"
#include "turnout/dataio.hpp"
#include "turnout/investigator.hpp"
#include "turnout/pipeline.hpp"
#include "turnout/thresholds_io.hpp"
#include "turnout/training.hpp"

namespace turnout {

struct RunPaths {
    std::string corpus = "corpus.ndjson";
    std::string model = "model.json";
    std::string thresholds = "thresholds.json";
    std::string reports = "reports.ndjson";

    bool operator==(const RunPaths&) const = default;
};

struct RunConfig {
    GeneratorConfig generator;
    TrainHyper training;
    double split = 0.8;                // training fraction of the corpus, rest is the test segment
    CalibrationOptions calibration;
    std::size_t baseline_curves = 100; // oldest training curves taken as healthy references
    ClassifierConfig classifier;
    InvestigationConfig investigation;
    WindowPolicy policy = WindowPolicy::ExcludeRejected;
    std::size_t alarm_after = 5;
    AttackScenario attack;
    RunPaths paths;
};

inline std::size_t split_point(std::size_t size, double fraction) {
    if (!(fraction > 0 && fraction < 1)) throw Error(ErrorKind::InvalidArgument, "split must lie in (0, 1)");
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(size)));
}

inline std::pair<ForecastModel, TrainReport> train_on_corpus(std::span<const PowerCurve> curves,
                                                             const RunConfig& cfg) {
    const std::size_t cut = split_point(curves.size(), cfg.split);
    const auto pairs = make_dataset(curves.first(cut), cfg.training.window);
    return train(pairs, cfg.training);
}

/// Thresholds from the test segment, baseline from the oldest training curves.
inline CalibrationBundle calibrate_on_corpus(const ForecastModel& model, std::span<const PowerCurve> curves,
                                             const RunConfig& cfg) {
    const std::size_t cut = split_point(curves.size(), cfg.split);
    if (cfg.baseline_curves == 0) throw Error(ErrorKind::InvalidArgument, "baseline_curves must be > 0");
    const auto test_pairs = make_dataset(curves.subspan(cut), model.window);
    CalibrationBundle bundle;
    bundle.thresholds = calibrate(model, test_pairs, cfg.calibration);
    bundle.baseline = fit_baseline(curves.first(std::min(cfg.baseline_curves, cut)));
    bundle.classifier = cfg.classifier;
    bundle.model_digest = model_digest(model);
    return bundle;
}

inline PipelineConfig pipeline_config(const RunConfig& cfg, const ClassifierConfig& classifier) {
    return {cfg.policy, cfg.alarm_after, classifier, cfg.investigation};
}

inline void to_json(nlohmann::json& j, const CalibrationOptions& c) {
    j = {{"percentile", c.percentile},
         {"safety_factor", c.safety_factor},
         {"band", c.band ? nlohmann::json(*c.band) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, CalibrationOptions& c) {
    const CalibrationOptions d;
    c.percentile = j.value("percentile", d.percentile);
    c.safety_factor = j.value("safety_factor", d.safety_factor);
    c.band.reset();
    if (j.contains("band") && !j.at("band").is_null()) c.band = j.at("band").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"generator", c.generator},
         {"training", c.training},
         {"split", c.split},
         {"calibration", c.calibration},
         {"baseline_curves", c.baseline_curves},
         {"classifier", c.classifier},
         {"investigation", c.investigation},
         {"pipeline", {{"policy", to_string(c.policy)}, {"alarm_after", c.alarm_after}}},
         {"attack", c.attack},
         {"paths",
          {{"corpus", c.paths.corpus},
           {"model", c.paths.model},
           {"thresholds", c.paths.thresholds},
           {"reports", c.paths.reports}}}};
}

/// Missing sections and fields keep their defaults; unknown top-level keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    static const char* const known[] = {"generator",     "training",   "split",    "calibration", "baseline_curves",
                                        "classifier",    "investigation", "pipeline", "attack",   "paths"};
    if (!j.is_object()) throw Error(ErrorKind::Schema, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw Error(ErrorKind::Schema, "unknown config key '" + key + "'");
        }
    }
    try {
        RunConfig c;
        if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorConfig>();
        if (j.contains("training")) c.training = j.at("training").get<TrainHyper>();
        c.split = j.value("split", c.split);
        if (j.contains("calibration")) c.calibration = j.at("calibration").get<CalibrationOptions>();
        c.baseline_curves = j.value("baseline_curves", c.baseline_curves);
        if (j.contains("classifier")) c.classifier = j.at("classifier").get<ClassifierConfig>();
        if (j.contains("investigation")) c.investigation = j.at("investigation").get<InvestigationConfig>();
        if (j.contains("pipeline")) {
            const auto& p = j.at("pipeline");
            if (p.contains("policy")) c.policy = window_policy_from_string(p.at("policy").get<std::string>());
            c.alarm_after = p.value("alarm_after", c.alarm_after);
        }
        if (j.contains("attack")) c.attack = j.at("attack").get<AttackScenario>();
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            c.paths.corpus = p.value("corpus", c.paths.corpus);
            c.paths.model = p.value("model", c.paths.model);
            c.paths.thresholds = p.value("thresholds", c.paths.thresholds);
            c.paths.reports = p.value("reports", c.paths.reports);
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("malformed config: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorKind::Schema, std::string("invalid config: ") + e.what());
    }
}

} // namespace turnout
