#pragma once

// Single-layer LSTM sequence-to-one forecaster.
//
// Each timestep consumes one whole normalized curve (L features); the window
// is fed oldest first. With gates stacked in the order i, f, o, g:
//
//   z_t = W x_t + U h_{t-1} + b                  (4H)
//   i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
//   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t),   h_0 = c_0 = 0
//   y   = V h_N + c                              (L, normalized units)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "turnout/curve.hpp"
#include "turnout/dataio.hpp"
#include "turnout/error.hpp"

namespace turnout {

using Eigen::Index;

/// Per-sample-position z-score, fitted on training curves.
struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Normalization identity(Index length) {
        return {Eigen::VectorXd::Zero(length), Eigen::VectorXd::Ones(length)};
    }

    /// Positions with (near) zero spread get scale 1 so the transform stays invertible.
    static Normalization fit(std::span<const PowerCurve* const> curves) {
        if (curves.empty()) throw Error(ErrorKind::InsufficientData, "no curves to fit normalization on");
        const auto length = static_cast<Index>(curves.front()->size());
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(length);
        for (const PowerCurve* c : curves) sum += Eigen::Map<const Eigen::VectorXd>(c->samples.data(), length);
        const Eigen::VectorXd mean = sum / static_cast<double>(curves.size());
        Eigen::VectorXd sq = Eigen::VectorXd::Zero(length);
        for (const PowerCurve* c : curves) {
            sq += (Eigen::Map<const Eigen::VectorXd>(c->samples.data(), length) - mean).array().square().matrix();
        }
        Eigen::VectorXd scale = (sq / static_cast<double>(curves.size())).array().sqrt();
        for (Index i = 0; i < length; ++i) {
            if (!(scale[i] > 1e-9 * std::max(1.0, std::abs(mean[i])))) scale[i] = 1.0;
        }
        return {mean, scale};
    }

    Eigen::VectorXd normalize(std::span<const double> samples) const {
        const Eigen::Map<const Eigen::VectorXd> x(samples.data(), static_cast<Index>(samples.size()));
        return ((x - mean).array() / scale.array()).matrix();
    }

    std::vector<double> denormalize(const Eigen::Ref<const Eigen::VectorXd>& y) const {
        const Eigen::VectorXd x = (y.array() * scale.array()).matrix() + mean;
        return {x.data(), x.data() + x.size()};
    }

    bool operator==(const Normalization&) const = default;
};

/// All trainable parameters in one flat vector, with typed views onto the
/// blocks. Gradients and optimizer moments use the same layout.
class LstmParams {
public:
    using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
    using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
    using VectorMap = Eigen::Map<Eigen::VectorXd>;
    using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

    struct Block {
        const char* name;
        Index offset;
        Index rows;
        Index cols;
    };

    LstmParams() = default;
    LstmParams(Index input, Index hidden)
        : input_(input), hidden_(hidden), flat_(Eigen::VectorXd::Zero(count(input, hidden))) {}

    static Index count(Index input, Index hidden) {
        return 4 * hidden * input + 4 * hidden * hidden + 4 * hidden + input * hidden + input;
    }

    Index input() const noexcept { return input_; }
    Index hidden() const noexcept { return hidden_; }

    // Stacked gate blocks, rows [0,H) i, [H,2H) f, [2H,3H) o, [3H,4H) g.
    MatrixMap W() { return {flat_.data() + off_W(), 4 * hidden_, input_}; }
    MatrixMap U() { return {flat_.data() + off_U(), 4 * hidden_, hidden_}; }
    VectorMap b() { return {flat_.data() + off_b(), 4 * hidden_}; }
    MatrixMap V() { return {flat_.data() + off_V(), input_, hidden_}; }
    VectorMap c() { return {flat_.data() + off_c(), input_}; }
    ConstMatrixMap W() const { return {flat_.data() + off_W(), 4 * hidden_, input_}; }
    ConstMatrixMap U() const { return {flat_.data() + off_U(), 4 * hidden_, hidden_}; }
    ConstVectorMap b() const { return {flat_.data() + off_b(), 4 * hidden_}; }
    ConstMatrixMap V() const { return {flat_.data() + off_V(), input_, hidden_}; }
    ConstVectorMap c() const { return {flat_.data() + off_c(), input_}; }

    Eigen::VectorXd& flat() noexcept { return flat_; }
    const Eigen::VectorXd& flat() const noexcept { return flat_; }

    std::vector<Block> blocks() const {
        return {{"W", off_W(), 4 * hidden_, input_},
                {"U", off_U(), 4 * hidden_, hidden_},
                {"b", off_b(), 4 * hidden_, 1},
                {"V", off_V(), input_, hidden_},
                {"c", off_c(), input_, 1}};
    }

    /// Name of the block holding flat index `i`.
    const char* block_of(Index i) const {
        const char* name = "?";
        for (const auto& blk : blocks()) {
            if (i >= blk.offset) name = blk.name;
        }
        return name;
    }

    bool operator==(const LstmParams&) const = default;

private:
    Index off_W() const { return 0; }
    Index off_U() const { return off_W() + 4 * hidden_ * input_; }
    Index off_b() const { return off_U() + 4 * hidden_ * hidden_; }
    Index off_V() const { return off_b() + 4 * hidden_; }
    Index off_c() const { return off_V() + input_ * hidden_; }

    Index input_ = 0;
    Index hidden_ = 0;
    Eigen::VectorXd flat_;
};

struct ModelMetadata {
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    int format_version = 1;

    bool operator==(const ModelMetadata&) const = default;
};

struct ForecastModel {
    std::size_t window = 0;  // N
    LstmParams params;
    Normalization normalization;
    ModelMetadata metadata;

    ForecastModel() = default;
    ForecastModel(std::size_t window_length, Index input, Index hidden)
        : window(window_length), params(input, hidden), normalization(Normalization::identity(input)) {}

    Index input() const noexcept { return params.input(); }
    Index hidden() const noexcept { return params.hidden(); }

    bool operator==(const ForecastModel&) const = default;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Activations of one batched forward pass, kept for backpropagation.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> gates;  // per step, 4H x B, activated (i, f, o sigmoid; g tanh)
    std::vector<Eigen::MatrixXd> cell;   // per step, H x B
    std::vector<Eigen::MatrixXd> hidden; // per step, H x B
};

namespace detail {

inline void check_window(const ForecastModel& model, std::span<const PowerCurve> window) {
    if (window.size() != model.window) {
        throw Error(ErrorKind::Dimension, "model expects a window of N = " + std::to_string(model.window) +
                                              " curves, got " + std::to_string(window.size()));
    }
    for (const auto& curve : window) {
        if (static_cast<Index>(curve.size()) != model.input()) {
            throw Error(ErrorKind::Dimension, "model expects curves of L = " + std::to_string(model.input()) +
                                                  " samples, got " + std::to_string(curve.size()));
        }
        if (!all_finite(curve.samples)) {
            throw Error(ErrorKind::Numeric, "non-finite sample in window curve op " +
                                                std::to_string(curve.op_index));
        }
    }
}

} // namespace detail

/// Runs the recurrence over `inputs` (one L x B matrix per timestep, normalized)
/// and returns the L x B normalized outputs.
inline Eigen::MatrixXd forward_batch(const LstmParams& p, const std::vector<Eigen::MatrixXd>& inputs,
                                     ForwardTrace* trace = nullptr) {
    const Index H = p.hidden();
    const Index B = inputs.empty() ? 0 : inputs.front().cols();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, B);
    Eigen::MatrixXd z(4 * H, B);
    if (trace) {
        trace->gates.clear();
        trace->cell.clear();
        trace->hidden.clear();
    }
    for (const auto& x : inputs) {
        z.noalias() = p.W() * x;
        z.noalias() += p.U() * h;
        z.colwise() += p.b();
        z.topRows(3 * H) = z.topRows(3 * H).unaryExpr([](double v) { return sigmoid(v); });
        z.bottomRows(H) = z.bottomRows(H).array().tanh();
        c = (z.middleRows(H, H).array() * c.array() + z.topRows(H).array() * z.bottomRows(H).array()).matrix();
        h = (z.middleRows(2 * H, H).array() * c.array().tanh()).matrix();
        if (trace) {
            trace->gates.push_back(z);
            trace->cell.push_back(c);
            trace->hidden.push_back(h);
        }
    }
    Eigen::MatrixXd y = p.V() * h;
    y.colwise() += p.c();
    return y;
}

/// Normalized timestep inputs for a batch of windows (column b = window b).
inline std::vector<Eigen::MatrixXd> encode_windows(const ForecastModel& model,
                                                   std::span<const SupervisedPair> pairs) {
    const Index L = model.input();
    const auto B = static_cast<Index>(pairs.size());
    std::vector<Eigen::MatrixXd> xs(model.window, Eigen::MatrixXd(L, B));
    for (Index b = 0; b < B; ++b) {
        const auto& pair = pairs[static_cast<std::size_t>(b)];
        for (std::size_t t = 0; t < model.window; ++t) {
            xs[t].col(b) = model.normalization.normalize(pair.inputs[t].samples);
        }
    }
    return xs;
}

/// Mean squared error over samples, in the model's normalized units.
inline double loss(const Eigen::Ref<const Eigen::VectorXd>& predicted, const Eigen::Ref<const Eigen::VectorXd>& target) {
    if (predicted.size() != target.size()) {
        throw Error(ErrorKind::Dimension, "loss needs equal lengths, got " + std::to_string(predicted.size()) +
                                              " and " + std::to_string(target.size()));
    }
    if (predicted.size() == 0) return 0.0;
    return (predicted - target).squaredNorm() / static_cast<double>(predicted.size());
}

/// MSE between two curves after applying `norm` to both.
inline double loss(const PowerCurve& predicted, const PowerCurve& target, const Normalization& norm) {
    if (predicted.size() != target.size()) {
        throw Error(ErrorKind::Dimension, "loss needs equal lengths, got " + std::to_string(predicted.size()) +
                                              " and " + std::to_string(target.size()));
    }
    return loss(norm.normalize(predicted.samples), norm.normalize(target.samples));
}

/// Predicts the curve following `window` (oldest first), in watts.
inline PowerCurve forward(const ForecastModel& model, std::span<const PowerCurve> window,
                          ForwardTrace* trace = nullptr) {
    detail::check_window(model, window);
    std::vector<Eigen::MatrixXd> xs;
    xs.reserve(window.size());
    for (const auto& curve : window) xs.emplace_back(model.normalization.normalize(curve.samples));
    const Eigen::MatrixXd y = forward_batch(model.params, xs, trace);
    PowerCurve out;
    out.samples = model.normalization.denormalize(y.col(0));
    out.op_index = window.back().op_index + 1;
    const double step = window.size() > 1 ? window.back().timestamp - window[window.size() - 2].timestamp : 0.0;
    out.timestamp = window.back().timestamp + step;
    return out;
}

inline PowerCurve forward(const ForecastModel& model, const CurveWindow& window, ForwardTrace* trace = nullptr) {
    return forward(model, window.curves(), trace);
}

/// Sum over `pairs` of the per-pair loss; the matching gradient sum is added to
/// `grad`. Batches are processed in fixed-size chunks in order, so the result
/// does not depend on anything but the inputs.
inline double accumulate_gradient(const ForecastModel& model, std::span<const SupervisedPair> pairs,
                                  LstmParams& grad) {
    constexpr std::size_t kChunk = 128;
    const Index H = model.hidden();
    const auto L = static_cast<double>(model.input());
    const LstmParams& p = model.params;
    double total = 0.0;
    ForwardTrace trace;
    for (std::size_t first = 0; first < pairs.size(); first += kChunk) {
        const auto chunk = pairs.subspan(first, std::min(kChunk, pairs.size() - first));
        const auto xs = encode_windows(model, chunk);
        const auto B = static_cast<Index>(chunk.size());
        Eigen::MatrixXd target(model.input(), B);
        for (Index b = 0; b < B; ++b) {
            target.col(b) = model.normalization.normalize(chunk[static_cast<std::size_t>(b)].target->samples);
        }
        const Eigen::MatrixXd y = forward_batch(p, xs, &trace);
        const Eigen::MatrixXd diff = y - target;
        total += diff.squaredNorm() / L;

        // d(sum of per-pair MSE)/dy
        const Eigen::MatrixXd dy = diff * (2.0 / L);
        const std::size_t steps = xs.size();
        grad.V().noalias() += dy * trace.hidden.back().transpose();
        grad.c() += dy.rowwise().sum();
        Eigen::MatrixXd dh = p.V().transpose() * dy;
        Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(H, B);
        Eigen::MatrixXd dz(4 * H, B);
        for (std::size_t s = steps; s-- > 0;) {
            const auto& gates = trace.gates[s];
            const auto i = gates.topRows(H).array();
            const auto f = gates.middleRows(H, H).array();
            const auto o = gates.middleRows(2 * H, H).array();
            const auto g = gates.bottomRows(H).array();
            const Eigen::ArrayXXd tanh_c = trace.cell[s].array().tanh();
            const Eigen::ArrayXXd c_prev =
                s > 0 ? Eigen::ArrayXXd(trace.cell[s - 1].array()) : Eigen::ArrayXXd::Zero(H, B);
            const Eigen::ArrayXXd dc = dc_next.array() + dh.array() * o * (1.0 - tanh_c.square());
            dz.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
            dz.middleRows(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
            dz.middleRows(2 * H, H) = (dh.array() * tanh_c * o * (1.0 - o)).matrix();
            dz.bottomRows(H) = (dc * i * (1.0 - g.square())).matrix();
            dc_next = (dc * f).matrix();

            grad.W().noalias() += dz * xs[s].transpose();
            if (s > 0) grad.U().noalias() += dz * trace.hidden[s - 1].transpose();
            grad.b() += dz.rowwise().sum();
            dh.noalias() = p.U().transpose() * dz;
        }
    }
    return total;
}

/// Mean per-pair loss of `model` over `pairs`, without gradients.
inline double evaluate_loss(const ForecastModel& model, std::span<const SupervisedPair> pairs) {
    constexpr std::size_t kChunk = 256;
    if (pairs.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t first = 0; first < pairs.size(); first += kChunk) {
        const auto chunk = pairs.subspan(first, std::min(kChunk, pairs.size() - first));
        const Eigen::MatrixXd y = forward_batch(model.params, encode_windows(model, chunk));
        for (Index b = 0; b < y.cols(); ++b) {
            total += loss(y.col(b), model.normalization.normalize(chunk[static_cast<std::size_t>(b)].target->samples));
        }
    }
    return total / static_cast<double>(pairs.size());
}

} // namespace turnout
