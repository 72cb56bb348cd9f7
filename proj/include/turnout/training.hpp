#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "turnout/adam.hpp"
#include "turnout/dataio.hpp"
#include "turnout/error.hpp"
#include "turnout/lstm.hpp"

namespace turnout {

struct TrainHyper {
    std::size_t window = 50;  // N
    std::size_t hidden = 64;  // H
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;
    std::size_t batch_size = 0;        // 0 = full batch
    bool shuffle = false;              // seeded permutation of mini-batch order per epoch
    double validation_fraction = 0.1;  // chronological tail of the pairs held out
    double clip_norm = 5.0;            // global gradient norm; <= 0 disables
};

struct TrainReport {
    double initial_train_loss = 0.0;
    std::vector<double> train_loss;       // per epoch, mean over training pairs
    std::vector<double> validation_loss;  // per epoch, after the epoch's updates
    std::size_t train_pairs = 0;
    std::size_t validation_pairs = 0;
    double wall_seconds = 0.0;
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) weights; zero biases except the forget gate at 1.
inline void initialize(LstmParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const auto fill = [&](auto&& block) {
        for (Index j = 0; j < block.cols(); ++j)
            for (Index i = 0; i < block.rows(); ++i) block(i, j) = dist(rng);
    };
    fill(p.W());
    fill(p.U());
    fill(p.V());
    p.b().setZero();
    p.b().segment(p.hidden(), p.hidden()).setOnes();
    p.c().setZero();
}

namespace detail {

inline void check_pairs(std::span<const SupervisedPair> pairs, std::size_t window) {
    if (pairs.empty()) throw Error(ErrorKind::InsufficientData, "no training pairs");
    const std::size_t length = pairs.front().target->size();
    for (const auto& pair : pairs) {
        if (pair.inputs.size() != window) {
            throw Error(ErrorKind::Dimension, "training pair window has " + std::to_string(pair.inputs.size()) +
                                                  " curves, expected N = " + std::to_string(window));
        }
        if (pair.target->size() != length) throw Error(ErrorKind::Dimension, "inconsistent curve length");
        if (!all_finite(pair.target->samples)) throw Error(ErrorKind::Numeric, "non-finite training sample");
        for (const auto& c : pair.inputs) {
            if (c.size() != length) throw Error(ErrorKind::Dimension, "inconsistent curve length");
            if (!all_finite(c.samples)) throw Error(ErrorKind::Numeric, "non-finite training sample");
        }
    }
}

// Every distinct curve (by op index) referenced by the pairs.
inline std::vector<const PowerCurve*> distinct_curves(std::span<const SupervisedPair> pairs) {
    std::map<std::int64_t, const PowerCurve*> seen;
    for (const auto& pair : pairs) {
        for (const auto& c : pair.inputs) seen.emplace(c.op_index, &c);
        seen.emplace(pair.target->op_index, pair.target);
    }
    std::vector<const PowerCurve*> out;
    out.reserve(seen.size());
    for (const auto& [op, curve] : seen) out.push_back(curve);
    return out;
}

inline void check_finite(const LstmParams& p, std::size_t epoch) {
    if (p.flat().allFinite()) return;
    Index bad = 0;
    while (std::isfinite(p.flat()[bad])) ++bad;
    throw Error(ErrorKind::Numeric, "non-finite parameter in block " + std::string(p.block_of(bad)) +
                                        " during epoch " + std::to_string(epoch));
}

} // namespace detail

/// Fits a forecaster on consecutive-window pairs with MSE, full BPTT and Adam.
/// Deterministic for a fixed seed: initialization, batch order and reduction
/// order are all fixed.
inline std::pair<ForecastModel, TrainReport> train(std::span<const SupervisedPair> pairs, const TrainHyper& hyper) {
    const auto started = std::chrono::steady_clock::now();
    if (hyper.window == 0 || hyper.hidden == 0) throw Error(ErrorKind::InvalidArgument, "N and H must be > 0");
    if (!(hyper.validation_fraction >= 0 && hyper.validation_fraction < 1)) {
        throw Error(ErrorKind::InvalidArgument, "validation_fraction must lie in [0, 1)");
    }
    detail::check_pairs(pairs, hyper.window);

    std::size_t n_valid = static_cast<std::size_t>(std::ceil(hyper.validation_fraction * static_cast<double>(pairs.size())));
    if (n_valid >= pairs.size()) n_valid = pairs.size() - 1;
    const auto train_pairs = pairs.first(pairs.size() - n_valid);
    const auto valid_pairs = pairs.last(n_valid);

    ForecastModel model(hyper.window, static_cast<Index>(pairs.front().target->size()),
                        static_cast<Index>(hyper.hidden));
    model.normalization = Normalization::fit(detail::distinct_curves(train_pairs));
    initialize(model.params, hyper.seed);
    model.metadata = {hyper.epochs, hyper.seed, 1};

    Adam adam(model.params.flat().size(),
              {hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.epsilon});
    const std::size_t batch = hyper.batch_size == 0 ? train_pairs.size() : std::min(hyper.batch_size, train_pairs.size());
    const std::size_t n_batches = (train_pairs.size() + batch - 1) / batch;
    std::vector<std::size_t> order(n_batches);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(hyper.seed ^ 0x5eedba7c4ULL);

    TrainReport report;
    report.train_pairs = train_pairs.size();
    report.validation_pairs = valid_pairs.size();
    report.initial_train_loss = evaluate_loss(model, train_pairs);

    LstmParams grad(model.input(), model.hidden());
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (hyper.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t k : order) {
            const auto chunk = train_pairs.subspan(k * batch, std::min(batch, train_pairs.size() - k * batch));
            grad.flat().setZero();
            epoch_loss += accumulate_gradient(model, chunk, grad);
            grad.flat() /= static_cast<double>(chunk.size());
            if (!grad.flat().allFinite()) {
                Index bad = 0;
                while (std::isfinite(grad.flat()[bad])) ++bad;
                throw Error(ErrorKind::Numeric, "non-finite gradient in block " +
                                                    std::string(grad.block_of(bad)) + " during epoch " +
                                                    std::to_string(epoch));
            }
            const double norm = grad.flat().norm();
            if (hyper.clip_norm > 0 && norm > hyper.clip_norm) grad.flat() *= hyper.clip_norm / norm;
            adam.step(model.params.flat(), grad.flat());
            detail::check_finite(model.params, epoch);
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(train_pairs.size()));
        report.validation_loss.push_back(valid_pairs.empty() ? 0.0 : evaluate_loss(model, valid_pairs));
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradientCheckResult {
    double max_relative_error = 0.0;
    Eigen::Index worst_index = -1;
    std::string worst_block;
    double analytic = 0.0;   // at worst_index
    double numeric = 0.0;    // at worst_index
};

/// Loss of a single pair, used as the objective for finite differences.
inline double pair_loss(const ForecastModel& model, const SupervisedPair& pair) {
    return evaluate_loss(model, std::span<const SupervisedPair>(&pair, 1));
}

/// Analytic gradient of pair_loss.
inline LstmParams pair_gradient(const ForecastModel& model, const SupervisedPair& pair) {
    LstmParams grad(model.input(), model.hidden());
    accumulate_gradient(model, std::span<const SupervisedPair>(&pair, 1), grad);
    return grad;
}

/// Compares the BPTT gradient with central differences over every parameter:
/// error_k = |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
inline GradientCheckResult gradient_check(const ForecastModel& model, const SupervisedPair& pair, double step = 1e-5) {
    const LstmParams analytic = pair_gradient(model, pair);
    ForecastModel probe = model;
    GradientCheckResult result;
    auto& theta = probe.params.flat();
    for (Index k = 0; k < theta.size(); ++k) {
        const double saved = theta[k];
        theta[k] = saved + step;
        const double up = pair_loss(probe, pair);
        theta[k] = saved - step;
        const double down = pair_loss(probe, pair);
        theta[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic.flat()[k];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        if (err > result.max_relative_error || result.worst_index < 0) {
            result = {err, k, analytic.block_of(k), a, numeric};
        }
    }
    return result;
}

inline nlohmann::json train_report_to_json(const TrainReport& r, bool include_timing = false) {
    nlohmann::json j = {{"initial_train_loss", r.initial_train_loss},
                        {"train_loss", r.train_loss},
                        {"validation_loss", r.validation_loss},
                        {"train_pairs", r.train_pairs},
                        {"validation_pairs", r.validation_pairs}};
    if (include_timing) j["wall_seconds"] = r.wall_seconds;
    return j;
}

inline void to_json(nlohmann::json& j, const TrainHyper& h) {
    j = {{"window", h.window},
         {"hidden", h.hidden},
         {"epochs", h.epochs},
         {"learning_rate", h.learning_rate},
         {"beta1", h.beta1},
         {"beta2", h.beta2},
         {"epsilon", h.epsilon},
         {"seed", h.seed},
         {"batch_size", h.batch_size},
         {"shuffle", h.shuffle},
         {"validation_fraction", h.validation_fraction},
         {"clip_norm", h.clip_norm}};
}

inline void from_json(const nlohmann::json& j, TrainHyper& h) {
    const TrainHyper d;
    h.window = j.value("window", d.window);
    h.hidden = j.value("hidden", d.hidden);
    h.epochs = j.value("epochs", d.epochs);
    h.learning_rate = j.value("learning_rate", d.learning_rate);
    h.beta1 = j.value("beta1", d.beta1);
    h.beta2 = j.value("beta2", d.beta2);
    h.epsilon = j.value("epsilon", d.epsilon);
    h.seed = j.value("seed", d.seed);
    h.batch_size = j.value("batch_size", d.batch_size);
    h.shuffle = j.value("shuffle", d.shuffle);
    h.validation_fraction = j.value("validation_fraction", d.validation_fraction);
    h.clip_norm = j.value("clip_norm", d.clip_norm);
}

} // namespace turnout
