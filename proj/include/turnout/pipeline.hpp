#pragma once

// Operation phase: predict, validate, then store or investigate each incoming
// field curve. Strictly sequential; one owner mutates the state.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/classifier.hpp"
#include "turnout/comparator.hpp"
#include "turnout/dataio.hpp"
#include "turnout/investigator.hpp"
#include "turnout/lstm.hpp"

namespace turnout {

enum class WindowPolicy {
    ExcludeRejected,      // a rejected curve never enters the window
    SubstitutePrediction  // the forecast stands in for a rejected curve
};

struct PipelineConfig {
    WindowPolicy policy = WindowPolicy::ExcludeRejected;
    std::size_t alarm_after = 5;  // consecutive rejections raising the report alert
    ClassifierConfig classifier;
    InvestigationConfig investigation;
};

struct StepResult {
    InvestigationReport report;
    PowerCurve predicted;
};

class Pipeline {
public:
    Pipeline(std::shared_ptr<const ForecastModel> model, Thresholds thresholds, BaselineStats baseline,
             PipelineConfig config = {})
        : model_(std::move(model)),
          thresholds_(std::move(thresholds)),
          baseline_(std::move(baseline)),
          config_(std::move(config)),
          window_(model_ ? model_->window : 1) {
        if (!model_) throw Error(ErrorKind::InvalidArgument, "pipeline needs a model");
    }

    /// Seeds the window with the last N curves of `test_corpus` and clears the
    /// store and report log.
    void bootstrap(std::span<const PowerCurve> test_corpus) {
        const std::size_t n = model_->window;
        if (test_corpus.size() < n) {
            throw Error(ErrorKind::InsufficientData, "bootstrap needs at least N = " + std::to_string(n) +
                                                         " test curves, got " + std::to_string(test_corpus.size()));
        }
        window_ = CurveWindow(test_corpus.last(n), n);
        store_.clear();
        reports_.clear();
        rejections_ = 0;
    }

    StepResult step_detailed(const PowerCurve& field, std::optional<bool> tampered = std::nullopt) {
        if (!window_.full()) throw Error(ErrorKind::InvalidArgument, "pipeline is not bootstrapped");
        if (static_cast<Index>(field.size()) != model_->input()) {
            throw Error(ErrorKind::Dimension, "field curve op " + std::to_string(field.op_index) + " has " +
                                                  std::to_string(field.size()) + " samples, expected " +
                                                  std::to_string(model_->input()));
        }
        if (!reports_.empty() && field.op_index <= reports_.back().op_index) {
            throw Error(ErrorKind::InvalidArgument, "field op_index " + std::to_string(field.op_index) +
                                                        " does not follow op " +
                                                        std::to_string(reports_.back().op_index));
        }
        PowerCurve predicted = forward(*model_, window_);
        const ValidationOutcome outcome = validate(field, predicted, thresholds_);

        InvestigationReport report;
        report.op_index = field.op_index;
        report.distances = outcome.distances;
        report.tau_euclidean = thresholds_.tau_euclidean;
        report.tau_dtw = thresholds_.tau_dtw;
        report.predicted_kind = classify(predicted, baseline_, config_.classifier);
        report.field_kind = classify(field, baseline_, config_.classifier);
        report.window_progressive =
            window_shows_progression(window_.curves(), baseline_, config_.classifier, config_.investigation);
        report.tampered = tampered;

        if (outcome.validated) {
            report.verdict = {VerdictKind::Validated, ReasonCode::Validated, "within both thresholds"};
            rejections_ = 0;
            window_.push(field);
            store_.push_back(field);
        } else {
            report.verdict = investigate(report.field_kind, report.predicted_kind, report.window_progressive,
                                         outcome.distances, thresholds_, config_.investigation);
            ++rejections_;
            if (config_.policy == WindowPolicy::SubstitutePrediction) window_.push(predicted);
        }
        report.consecutive_rejections = rejections_;
        report.alert = config_.alarm_after > 0 && rejections_ >= config_.alarm_after;
        reports_.push_back(report);
        return {std::move(report), std::move(predicted)};
    }

    InvestigationReport step(const PowerCurve& field, std::optional<bool> tampered = std::nullopt) {
        return step_detailed(field, tampered).report;
    }

    /// Steps through `stream` in order; one report per curve. Ground-truth
    /// tamper flags are copied into the reports.
    std::vector<InvestigationReport> run(std::span<const CurveRecord> stream) {
        std::vector<InvestigationReport> out;
        out.reserve(stream.size());
        for (const auto& record : stream) out.push_back(step(record.curve, record.tampered));
        return out;
    }

    const CurveWindow& window() const noexcept { return window_; }
    const std::vector<PowerCurve>& store() const noexcept { return store_; }
    const std::vector<InvestigationReport>& reports() const noexcept { return reports_; }
    const Thresholds& thresholds() const noexcept { return thresholds_; }
    const BaselineStats& baseline() const noexcept { return baseline_; }
    const ForecastModel& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const ForecastModel> model_;
    Thresholds thresholds_;
    BaselineStats baseline_;
    PipelineConfig config_;
    CurveWindow window_;
    std::vector<PowerCurve> store_;
    std::vector<InvestigationReport> reports_;
    std::size_t rejections_ = 0;
};

inline std::string_view to_string(WindowPolicy p) {
    return p == WindowPolicy::ExcludeRejected ? "exclude" : "predict";
}

inline WindowPolicy window_policy_from_string(std::string_view s) {
    if (s == "exclude") return WindowPolicy::ExcludeRejected;
    if (s == "predict") return WindowPolicy::SubstitutePrediction;
    throw Error(ErrorKind::InvalidArgument, "unknown window policy '" + std::string(s) + "' (exclude|predict)");
}

} // namespace turnout
