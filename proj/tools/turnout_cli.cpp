#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "turnout/turnout.hpp"

using namespace turnout;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSuspicion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& seed_help, const std::string& out_help) {
    cmd->add_option("--config", c.config, "JSON run configuration; flags override its values")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, seed_help);
    cmd->add_option("--out", c.out, out_help);
}

RunConfig load_config(const Common& c) {
    if (c.config.empty()) return {};
    return run_config_from_json(read_json_file(c.config));
}

void require_file(const std::string& path, const std::string& what, const std::string& hint) {
    if (!fs::is_regular_file(path)) {
        throw Error(ErrorKind::Io, what + " '" + path + "' not found" + (hint.empty() ? "" : ": " + hint));
    }
}

template <class T>
void override_with(T& target, const std::optional<T>& flag) {
    if (flag) target = *flag;
}

std::string train_report_path(const std::string& model_path) {
    fs::path p(model_path);
    p.replace_extension(".train.json");
    return p.string();
}

std::string op_ranges(const std::vector<std::int64_t>& ops) {
    std::string out;
    for (std::size_t i = 0; i < ops.size();) {
        std::size_t j = i;
        while (j + 1 < ops.size() && ops[j + 1] == ops[j] + 1) ++j;
        if (!out.empty()) out += ",";
        out += std::to_string(ops[i]);
        if (j > i) out += "-" + std::to_string(ops[j]);
        i = j + 1;
    }
    return out;
}

nlohmann::json summarize(const std::vector<InvestigationReport>& reports) {
    std::map<std::string, std::size_t> verdicts, reasons;
    std::vector<std::int64_t> suspicious, escalated;
    std::size_t alerts = 0;
    std::optional<std::int64_t> first_alert;
    for (const auto& r : reports) {
        ++verdicts[std::string(to_string(r.verdict.kind))];
        ++reasons[std::string(to_string(r.verdict.reason))];
        if (r.verdict.kind == VerdictKind::Suspicious) suspicious.push_back(r.op_index);
        if (r.verdict.kind == VerdictKind::EscalateToExpert) escalated.push_back(r.op_index);
        if (r.alert) {
            ++alerts;
            if (!first_alert) first_alert = r.op_index;
        }
    }
    const auto validated = verdicts.count("Validated") ? verdicts.at("Validated") : 0;
    return {{"reports", reports.size()},
            {"validation_rate",
             reports.empty() ? nlohmann::json(nullptr)
                             : nlohmann::json(static_cast<double>(validated) / static_cast<double>(reports.size()))},
            {"verdicts", verdicts},
            {"reasons", reasons},
            {"suspicious_ops", suspicious},
            {"escalated_ops", escalated},
            {"alert_reports", alerts},
            {"first_alert_op", first_alert ? nlohmann::json(*first_alert) : nlohmann::json(nullptr)},
            {"score", score_to_json(score_run(reports))}};
}

void print_summary(const nlohmann::json& s) {
    std::printf("reports: %zu\n", s.at("reports").get<std::size_t>());
    for (const auto& [k, v] : s.at("verdicts").items()) std::printf("  %-17s %zu\n", k.c_str(), v.get<std::size_t>());
    std::printf("reasons:");
    for (const auto& [k, v] : s.at("reasons").items()) std::printf(" %s=%zu", k.c_str(), v.get<std::size_t>());
    std::printf("\n");
    const auto suspicious = s.at("suspicious_ops").get<std::vector<std::int64_t>>();
    std::printf("suspicious ops: %s\n", suspicious.empty() ? "none" : op_ranges(suspicious).c_str());
    const auto escalated = s.at("escalated_ops").get<std::vector<std::int64_t>>();
    if (!escalated.empty()) std::printf("escalated ops: %s\n", op_ranges(escalated).c_str());
    if (s.at("alert_reports").get<std::size_t>() > 0) {
        std::printf("sustained-divergence alert from op %lld\n", s.at("first_alert_op").get<long long>());
    }
    const auto& score = s.at("score");
    if (!score.at("detection_rate").is_null()) {
        std::printf("detection rate: %.4f (%zu/%zu tampered ops)\n", score.at("detection_rate").get<double>(),
                    score.at("suspicious_tampered").get<std::size_t>(), score.at("tampered").get<std::size_t>());
    }
    if (!score.at("false_alarm_rate").is_null()) {
        std::printf("false-alarm rate: %.4f (%zu/%zu clean ops)\n", score.at("false_alarm_rate").get<double>(),
                    score.at("suspicious_untampered").get<std::size_t>(), score.at("untampered").get<std::size_t>());
    }
}

// ---------------------------------------------------------------------------

struct GenerateOpts {
    Common common;
    std::optional<std::int64_t> operations;
    std::optional<std::size_t> length;
    std::optional<double> noise;
};

int cmd_generate(const GenerateOpts& o) {
    RunConfig cfg = load_config(o.common);
    override_with(cfg.generator.seed, o.common.seed);
    override_with(cfg.generator.operations, o.operations);
    override_with(cfg.generator.length, o.length);
    override_with(cfg.generator.noise_sigma, o.noise);
    override_with(cfg.paths.corpus, o.common.out);
    if (o.operations && !o.common.config.empty() && cfg.generator.phase_plan.size() > 0 &&
        cfg.generator.phase_plan.back().end != *o.operations) {
        throw Error(ErrorKind::InvalidArgument, "--operations conflicts with the phase plan in the config");
    }
    const Corpus corpus = generate_lifecycle(cfg.generator);
    write_corpus(cfg.paths.corpus, corpus);
    std::printf("wrote %zu curves of %zu samples to %s\n", corpus.size(), cfg.generator.length,
                cfg.paths.corpus.c_str());
    return kExitOk;
}

struct TrainOpts {
    Common common;
    std::optional<std::string> corpus;
    std::optional<std::string> report;
    std::optional<std::size_t> window;
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size;
    std::optional<double> split;
    bool shuffle = false;
};

int cmd_train(const TrainOpts& o) {
    RunConfig cfg = load_config(o.common);
    override_with(cfg.training.seed, o.common.seed);
    override_with(cfg.paths.corpus, o.corpus);
    override_with(cfg.paths.model, o.common.out);
    override_with(cfg.training.window, o.window);
    override_with(cfg.training.hidden, o.hidden);
    override_with(cfg.training.epochs, o.epochs);
    override_with(cfg.training.learning_rate, o.lr);
    override_with(cfg.training.batch_size, o.batch_size);
    override_with(cfg.split, o.split);
    if (o.shuffle) cfg.training.shuffle = true;
    require_file(cfg.paths.corpus, "corpus", "run generate first");
    const std::string report_path = o.report.value_or(train_report_path(cfg.paths.model));

    const auto curves = curves_of(read_corpus(cfg.paths.corpus));
    const auto [model, report] = train_on_corpus(curves, cfg);
    save_model(model, cfg.paths.model);
    nlohmann::json doc = train_report_to_json(report);
    doc["hyper"] = cfg.training;
    doc["split"] = cfg.split;
    write_json_file(report_path, doc);

    std::printf("trained N=%zu H=%zu L=%lld on %zu pairs (%zu held out) for %zu epochs in %.1f s\n",
                cfg.training.window, cfg.training.hidden, static_cast<long long>(model.input()), report.train_pairs,
                report.validation_pairs, cfg.training.epochs, report.wall_seconds);
    std::printf("loss (normalized MSE): initial %.6g, final train %.6g", report.initial_train_loss,
                report.train_loss.empty() ? report.initial_train_loss : report.train_loss.back());
    if (report.validation_pairs > 0 && !report.validation_loss.empty()) {
        std::printf(", final validation %.6g", report.validation_loss.back());
    }
    std::printf("\nweights: %s\nreport: %s\n", cfg.paths.model.c_str(), report_path.c_str());
    return kExitOk;
}

struct CalibrateOpts {
    Common common;
    std::optional<std::string> corpus;
    std::optional<std::string> model;
    std::optional<double> percentile;
    std::optional<double> safety_factor;
    std::optional<std::size_t> band;
    std::optional<std::size_t> baseline_curves;
    std::optional<double> split;
};

int cmd_calibrate(const CalibrateOpts& o) {
    RunConfig cfg = load_config(o.common);
    override_with(cfg.paths.corpus, o.corpus);
    override_with(cfg.paths.model, o.model);
    override_with(cfg.paths.thresholds, o.common.out);
    override_with(cfg.calibration.percentile, o.percentile);
    override_with(cfg.calibration.safety_factor, o.safety_factor);
    if (o.band) cfg.calibration.band = *o.band;
    override_with(cfg.baseline_curves, o.baseline_curves);
    override_with(cfg.split, o.split);
    require_file(cfg.paths.corpus, "corpus", "run generate first");
    require_file(cfg.paths.model, "weights file", "train first");

    const auto model = load_model(cfg.paths.model);
    const auto curves = curves_of(read_corpus(cfg.paths.corpus, static_cast<std::size_t>(model.input())));
    const auto bundle = calibrate_on_corpus(model, curves, cfg);
    save_bundle(bundle, cfg.paths.thresholds);
    for (const auto& w : bundle.thresholds.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("tau_euclidean %.6g W, tau_dtw %.6g W from %zu test pairs (percentile %g, safety factor %g)\n",
                bundle.thresholds.tau_euclidean, bundle.thresholds.tau_dtw, bundle.thresholds.test_pairs,
                bundle.thresholds.percentile, bundle.thresholds.safety_factor);
    std::printf("baseline plateau %.6g +/- %.3g W over %zu reference curves\nthresholds: %s\n",
                bundle.baseline.plateau_mean.mean, bundle.baseline.plateau_mean.std, bundle.baseline.count,
                cfg.paths.thresholds.c_str());
    return kExitOk;
}

struct InjectOpts {
    Common common;
    std::optional<std::string> corpus;
    std::optional<std::string> attack;
    std::optional<std::int64_t> start;
    std::optional<std::int64_t> end;
    std::optional<std::int64_t> source_index;
    std::optional<double> severity;
};

int cmd_inject(const InjectOpts& o) {
    RunConfig cfg = load_config(o.common);
    override_with(cfg.paths.corpus, o.corpus);
    if (o.attack) cfg.attack.kind = attack_kind_from_string(*o.attack);
    override_with(cfg.attack.start, o.start);
    override_with(cfg.attack.end, o.end);
    if (o.source_index) cfg.attack.source_index = *o.source_index;
    override_with(cfg.attack.severity, o.severity);
    override_with(cfg.attack.seed, o.common.seed);
    if (!o.common.out) throw Error(ErrorKind::InvalidArgument, "inject needs --out for the tampered corpus");
    if (fs::exists(*o.common.out) && fs::exists(cfg.paths.corpus) &&
        fs::equivalent(*o.common.out, cfg.paths.corpus)) {
        throw Error(ErrorKind::InvalidArgument, "--out must differ from the input corpus");
    }
    require_file(cfg.paths.corpus, "corpus", "run generate first");

    const Corpus corpus = read_corpus(cfg.paths.corpus);
    GeneratorConfig shapes = cfg.generator;
    if (!corpus.empty()) shapes.length = corpus.front().curve.size();
    const Corpus tampered = inject_attack(corpus, cfg.attack, shapes);
    write_corpus(*o.common.out, tampered);
    std::printf("%s over positions [%lld, %lld): %lld curves substituted, wrote %s\n",
                std::string(to_string(cfg.attack.kind)).c_str(), static_cast<long long>(cfg.attack.start),
                static_cast<long long>(cfg.attack.end), static_cast<long long>(cfg.attack.end - cfg.attack.start),
                o.common.out->c_str());
    return kExitOk;
}

struct RunOpts {
    Common common;
    std::optional<std::string> corpus;
    std::optional<std::string> model;
    std::optional<std::string> thresholds;
    std::optional<std::size_t> start;
    std::optional<std::size_t> end;
    std::optional<std::string> policy;
    std::optional<std::size_t> alarm_after;
    std::optional<std::string> plot;
    std::optional<std::string> summary;
};

void write_plot(const std::string& path, const std::vector<StepResult>& steps,
                std::span<const CurveRecord> stream) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out.precision(17);
    out << "op_index,sample,predicted_w,field_w,verdict,reason\n";
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& field = stream[k].curve.samples;
        const auto& pred = steps[k].predicted.samples;
        const auto& r = steps[k].report;
        for (std::size_t i = 0; i < field.size(); ++i) {
            out << r.op_index << ',' << i << ',' << pred[i] << ',' << field[i] << ',' << to_string(r.verdict.kind)
                << ',' << to_string(r.verdict.reason) << '\n';
        }
    }
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write error on '" + path + "'");
}

int cmd_run(const RunOpts& o) {
    RunConfig cfg = load_config(o.common);
    override_with(cfg.paths.corpus, o.corpus);
    override_with(cfg.paths.model, o.model);
    override_with(cfg.paths.thresholds, o.thresholds);
    override_with(cfg.paths.reports, o.common.out);
    if (o.policy) cfg.policy = window_policy_from_string(*o.policy);
    override_with(cfg.alarm_after, o.alarm_after);
    require_file(cfg.paths.corpus, "field stream", "");
    require_file(cfg.paths.model, "weights file", "train first");
    require_file(cfg.paths.thresholds, "thresholds file", "calibrate first");

    auto model = std::make_shared<const ForecastModel>(load_model(cfg.paths.model));
    const CalibrationBundle bundle = load_bundle(cfg.paths.thresholds);
    if (bundle.model_digest != model_digest(*model)) {
        throw Error(ErrorKind::Schema, "thresholds in '" + cfg.paths.thresholds +
                                           "' were calibrated against a different model: calibrate first");
    }
    const Corpus stream = read_corpus(cfg.paths.corpus, static_cast<std::size_t>(model->input()));
    const std::size_t start = o.start.value_or(split_point(stream.size(), cfg.split));
    if (start < model->window || start > stream.size()) {
        throw Error(ErrorKind::InvalidArgument, "--start " + std::to_string(start) + " leaves no room for the N = " +
                                                    std::to_string(model->window) +
                                                    " bootstrap curves in a stream of " +
                                                    std::to_string(stream.size()));
    }

    const std::size_t end = o.end.value_or(stream.size());
    if (end < start || end > stream.size()) {
        throw Error(ErrorKind::InvalidArgument, "--end " + std::to_string(end) + " must lie in [--start, " +
                                                    std::to_string(stream.size()) + "]");
    }

    const auto curves = curves_of(stream);
    Pipeline pipeline(model, bundle.thresholds, bundle.baseline, pipeline_config(cfg, bundle.classifier));
    pipeline.bootstrap(std::span<const PowerCurve>(curves).first(start));
    const auto operated = std::span<const CurveRecord>(stream).subspan(start, end - start);
    std::vector<StepResult> steps;
    steps.reserve(operated.size());
    for (const auto& rec : operated) {
        steps.push_back(pipeline.step_detailed(rec.curve, rec.tampered));
    }

    std::vector<nlohmann::json> docs;
    docs.reserve(steps.size());
    for (const auto& s : steps) docs.push_back(report_to_json(s.report));
    write_ndjson(cfg.paths.reports, docs);
    if (o.plot) write_plot(*o.plot, steps, operated);

    const auto summary = summarize(pipeline.reports());
    if (o.summary) write_json_file(*o.summary, summary);
    std::printf("operation phase from position %zu (bootstrap ops %lld-%lld)\n", start,
                static_cast<long long>(curves[start - model->window].op_index),
                static_cast<long long>(curves[start - 1].op_index));
    print_summary(summary);
    std::printf("reports: %s\n", cfg.paths.reports.c_str());
    return summary.at("suspicious_ops").empty() ? kExitOk : kExitSuspicion;
}

struct ReportOpts {
    Common common;
    std::vector<std::string> reports;
};

int cmd_report(const ReportOpts& o) {
    RunConfig cfg = load_config(o.common);
    std::vector<std::string> files = o.reports;
    if (files.empty()) files.push_back(cfg.paths.reports);
    for (const auto& f : files) require_file(f, "report file", "run first");

    nlohmann::json per_file = nlohmann::json::object();
    std::vector<InvestigationReport> all;
    for (const auto& f : files) {
        std::vector<InvestigationReport> reports;
        read_ndjson(f, [&](std::size_t, const nlohmann::json& doc) { reports.push_back(report_from_json(doc)); });
        per_file[f] = summarize(reports);
        all.insert(all.end(), reports.begin(), reports.end());
    }
    for (const auto& f : files) {
        std::printf("== %s\n", f.c_str());
        print_summary(per_file.at(f));
    }
    nlohmann::json doc = {{"files", per_file}};
    if (files.size() > 1) {
        const auto total = summarize(all);
        doc["total"] = total;
        std::printf("== total\n");
        print_summary(total);
    }
    if (o.common.out) write_json_file(*o.common.out, doc);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turnout power-curve forecaster and data-integrity investigator"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    const std::string no_seed = "Accepted for uniformity; this command draws no random numbers";

    GenerateOpts gen;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic turnout life-cycle corpus (NDJSON)");
    add_common(generate, gen.common, "Generator seed (generator.seed)", "Corpus path (paths.corpus)");
    generate->add_option("--operations", gen.operations, "Number of operations M (generator.operations)")
        ->check(CLI::PositiveNumber);
    generate->add_option("--length", gen.length, "Samples per curve L (generator.length)")->check(CLI::Range(16, 100000));
    generate->add_option("--noise", gen.noise, "Gaussian noise sigma in W (generator.noise_sigma)")
        ->check(CLI::NonNegativeNumber);

    TrainOpts tr;
    auto* train_cmd = app.add_subcommand("train", "Train the LSTM forecaster on the older part of a corpus");
    add_common(train_cmd, tr.common, "Weight-initialization seed (training.seed)", "Weights file (paths.model)");
    train_cmd->add_option("--corpus", tr.corpus, "Training corpus (paths.corpus)");
    train_cmd->add_option("--report", tr.report, "Training report JSON (default: <weights>.train.json)");
    train_cmd->add_option("--window", tr.window, "Window length N (training.window)")->check(CLI::PositiveNumber);
    train_cmd->add_option("--hidden", tr.hidden, "Hidden units H (training.hidden)")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", tr.epochs, "Training epochs (training.epochs)");
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate (training.learning_rate)")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size, 0 = full batch (training.batch_size)");
    train_cmd->add_option("--split", tr.split, "Training fraction of the corpus (split)")->check(CLI::Range(0.0, 1.0));
    train_cmd->add_flag("--shuffle", tr.shuffle, "Seeded shuffle of mini-batch order (training.shuffle)");

    CalibrateOpts cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Derive validation thresholds from the test segment");
    add_common(calibrate_cmd, cal.common, no_seed, "Thresholds file (paths.thresholds)");
    calibrate_cmd->add_option("--corpus", cal.corpus, "Corpus the model was trained on (paths.corpus)");
    calibrate_cmd->add_option("--model", cal.model, "Weights file (paths.model)");
    calibrate_cmd->add_option("--percentile", cal.percentile, "Residual percentile, 100 = max (calibration.percentile)")
        ->check(CLI::Range(0.0, 100.0));
    calibrate_cmd->add_option("--safety-factor", cal.safety_factor, "Threshold multiplier (calibration.safety_factor)")
        ->check(CLI::PositiveNumber);
    calibrate_cmd->add_option("--band", cal.band, "DTW Sakoe-Chiba radius in samples (calibration.band)");
    calibrate_cmd->add_option("--baseline-curves", cal.baseline_curves,
                              "Oldest training curves used as classifier references (baseline_curves)")
        ->check(CLI::PositiveNumber);
    calibrate_cmd->add_option("--split", cal.split, "Training fraction of the corpus (split)")->check(CLI::Range(0.0, 1.0));

    InjectOpts inj;
    auto* inject = app.add_subcommand("inject", "Substitute curves in a corpus to simulate an integrity attack");
    add_common(inject, inj.common, "Attack noise seed (attack.seed)", "Tampered corpus path (required)");
    inject->add_option("--corpus", inj.corpus, "Corpus to tamper with (paths.corpus)");
    inject->add_option("--attack", inj.attack, "ReplayConceal | SpuriousFailure | SpuriousPreFault (attack.kind)")
        ->check(CLI::IsMember({"ReplayConceal", "SpuriousFailure", "SpuriousPreFault"}));
    inject->add_option("--start", inj.start, "First tampered corpus position (attack.start)");
    inject->add_option("--end", inj.end, "One past the last tampered position (attack.end)");
    inject->add_option("--source-index", inj.source_index,
                       "ReplayConceal: first position replayed from (attack.source_index)");
    inject->add_option("--severity", inj.severity, "SpuriousPreFault severity in [0, 1] (attack.severity)")
        ->check(CLI::Range(0.0, 1.0));

    RunOpts run;
    auto* run_cmd = app.add_subcommand("run", "Operation phase: predict, validate and investigate a field stream");
    add_common(run_cmd, run.common, no_seed, "Report NDJSON (paths.reports)");
    run_cmd->add_option("--corpus", run.corpus, "Field stream NDJSON (paths.corpus)");
    run_cmd->add_option("--model", run.model, "Weights file (paths.model)");
    run_cmd->add_option("--thresholds", run.thresholds, "Thresholds file from calibrate (paths.thresholds)");
    run_cmd->add_option("--start", run.start,
                        "Stream position where operation starts; the N curves before it seed the window "
                        "(default: the split point)");
    run_cmd->add_option("--end", run.end, "Stream position where operation stops, exclusive (default: end of stream)");
    run_cmd->add_option("--policy", run.policy, "Window update after a rejection: exclude | predict (pipeline.policy)")
        ->check(CLI::IsMember({"exclude", "predict"}));
    run_cmd->add_option("--alarm-after", run.alarm_after,
                        "Consecutive rejections raising the alert, 0 disables (pipeline.alarm_after)");
    run_cmd->add_option("--plot", run.plot, "CSV of predicted vs field samples per operation");
    run_cmd->add_option("--summary", run.summary, "Summary JSON");

    ReportOpts rep;
    auto* report = app.add_subcommand("report", "Aggregate existing report files");
    add_common(report, rep.common, no_seed, "Aggregated summary JSON");
    report->add_option("--reports", rep.reports, "Report NDJSON files (default: paths.reports)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(gen);
        if (*train_cmd) return cmd_train(tr);
        if (*calibrate_cmd) return cmd_calibrate(cal);
        if (*inject) return cmd_inject(inj);
        if (*run_cmd) return cmd_run(run);
        if (*report) return cmd_report(rep);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::InvalidArgument ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
