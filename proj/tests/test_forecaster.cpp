#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "turnout/adam.hpp"
#include "turnout/curvegen.hpp"
#include "turnout/lstm.hpp"
#include "turnout/model_io.hpp"
#include "turnout/training.hpp"

using namespace turnout;
namespace fs = std::filesystem;

namespace {

std::vector<PowerCurve> random_curves(std::size_t count, std::size_t length, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<PowerCurve> out(count);
    for (std::size_t t = 0; t < count; ++t) {
        out[t].op_index = static_cast<std::int64_t>(t);
        out[t].timestamp = static_cast<double>(t);
        out[t].samples.resize(length);
        for (double& s : out[t].samples) s = nd(rng);
    }
    return out;
}

ForecastModel random_model(std::size_t n, Index l, Index h, std::mt19937_64& rng, double sd = 0.5) {
    ForecastModel m(n, l, h);
    std::normal_distribution<double> nd(0.0, sd);
    for (Index k = 0; k < m.params.flat().size(); ++k) m.params.flat()[k] = nd(rng);
    return m;
}

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "turnout_forecaster_test";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(Forward, ZeroWeightsPredictTheDenormalizedOutputBias) {
    ForecastModel m(3, 4, 5);
    m.params.c() << 0.5, -1.0, 2.0, 0.0;
    m.normalization.mean = Eigen::Vector4d(100, 200, 300, 400);
    m.normalization.scale = Eigen::Vector4d(10, 20, 30, 40);
    std::mt19937_64 rng(1);
    const auto window = random_curves(3, 4, rng, 50.0);
    const auto y = forward(m, window);
    const std::vector<double> expected{105, 180, 360, 400};
    ASSERT_EQ(y.samples.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.samples[i], expected[i], 1e-12);
    EXPECT_EQ(y.op_index, window.back().op_index + 1);
}

TEST(Forward, MatchesScalarHandComputation) {
    // H = 2, L = 3, N = 2 with hand-set weights; the oracle below evaluates
    // each gate with plain scalar loops.
    constexpr int H = 2, L = 3;
    ForecastModel m(2, L, H);
    const double W[4][H][L] = {{{0.1, -0.2, 0.3}, {0.0, 0.4, -0.1}},
                               {{0.2, 0.1, 0.0}, {-0.3, 0.2, 0.1}},
                               {{-0.1, 0.3, 0.2}, {0.1, -0.1, 0.4}},
                               {{0.5, -0.4, 0.1}, {0.2, 0.3, -0.2}}};
    const double U[4][H][H] = {{{0.1, 0.2}, {-0.1, 0.3}},
                               {{0.0, -0.2}, {0.4, 0.1}},
                               {{0.3, 0.1}, {0.2, -0.3}},
                               {{-0.2, 0.4}, {0.1, 0.2}}};
    const double b[4][H] = {{0.05, -0.05}, {1.0, 1.0}, {0.1, 0.0}, {-0.1, 0.2}};
    const double V[L][H] = {{0.7, -0.3}, {0.2, 0.5}, {-0.6, 0.1}};
    const double c[L] = {0.01, -0.02, 0.03};
    for (int g = 0; g < 4; ++g)
        for (int r = 0; r < H; ++r) {
            for (int k = 0; k < L; ++k) m.params.W()(g * H + r, k) = W[g][r][k];
            for (int k = 0; k < H; ++k) m.params.U()(g * H + r, k) = U[g][r][k];
            m.params.b()(g * H + r) = b[g][r];
        }
    for (int r = 0; r < L; ++r) {
        for (int k = 0; k < H; ++k) m.params.V()(r, k) = V[r][k];
        m.params.c()(r) = c[r];
    }
    const double x[2][L] = {{1.0, 0.5, -0.5}, {0.2, -1.0, 0.8}};
    std::vector<PowerCurve> window(2);
    for (int t = 0; t < 2; ++t) window[t] = {{x[t][0], x[t][1], x[t][2]}, t, static_cast<double>(t)};

    double h[H] = {0, 0}, cell[H] = {0, 0};
    for (int t = 0; t < 2; ++t) {
        double pre[4][H];
        for (int g = 0; g < 4; ++g)
            for (int r = 0; r < H; ++r) {
                pre[g][r] = b[g][r];
                for (int k = 0; k < L; ++k) pre[g][r] += W[g][r][k] * x[t][k];
                for (int k = 0; k < H; ++k) pre[g][r] += U[g][r][k] * h[k];
            }
        double hn[H];
        for (int r = 0; r < H; ++r) {
            const double ig = sig(pre[0][r]), fg = sig(pre[1][r]), og = sig(pre[2][r]), gg = std::tanh(pre[3][r]);
            cell[r] = fg * cell[r] + ig * gg;
            hn[r] = og * std::tanh(cell[r]);
        }
        h[0] = hn[0];
        h[1] = hn[1];
    }
    const auto y = forward(m, window);
    for (int r = 0; r < L; ++r) {
        const double expected = c[r] + V[r][0] * h[0] + V[r][1] * h[1];
        EXPECT_NEAR(y.samples[static_cast<std::size_t>(r)], expected, 1e-14);
    }
}

TEST(Forward, GatesStayInTheirRanges) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = random_model(6, 7, 5, rng, 2.0);
        const auto window = random_curves(6, 7, rng, 3.0);
        ForwardTrace trace;
        forward(m, window, &trace);
        ASSERT_EQ(trace.gates.size(), 6u);
        for (std::size_t t = 0; t < trace.gates.size(); ++t) {
            const auto& z = trace.gates[t];
            EXPECT_TRUE((z.topRows(15).array() >= 0.0).all() && (z.topRows(15).array() <= 1.0).all());
            EXPECT_TRUE((z.bottomRows(5).array().abs() <= 1.0).all());
            EXPECT_TRUE((trace.hidden[t].array().abs() <= 1.0).all());
        }
    }
}

TEST(Forward, RejectsBadWindows) {
    ForecastModel m(4, 3, 2);
    std::mt19937_64 rng(2);
    auto window = random_curves(3, 3, rng);
    try {
        forward(m, window);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Dimension);
        EXPECT_NE(std::string(e.what()).find("N = 4"), std::string::npos);
    }
    window = random_curves(4, 5, rng);
    EXPECT_THROW(forward(m, window), Error);
    window = random_curves(4, 3, rng);
    window[1].samples[0] = std::nan("");
    try {
        forward(m, window);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    }
}

TEST(Loss, Examples) {
    const auto id = Normalization::identity(3);
    const PowerCurve a{{1, 2, 3}, 0, 0};
    EXPECT_EQ(loss(a, a, id), 0.0);
    const PowerCurve b{{2, 3, 4}, 0, 0};
    EXPECT_DOUBLE_EQ(loss(b, a, id), 1.0);
    const auto id2 = Normalization::identity(2);
    EXPECT_DOUBLE_EQ(loss(PowerCurve{{1, -3}, 0, 0}, PowerCurve{{0, 0}, 0, 0}, id2), 5.0);
    EXPECT_THROW(loss(a, PowerCurve{{1, 2}, 0, 0}, id), Error);
}

TEST(Normalization, InverseWithinRelativeTolerance) {
    GeneratorConfig cfg;
    cfg.operations = 200;
    const auto corpus = curves_of(generate_lifecycle(cfg));
    std::vector<const PowerCurve*> ptrs;
    for (const auto& c : corpus) ptrs.push_back(&c);
    const auto norm = Normalization::fit(ptrs);
    EXPECT_TRUE((norm.scale.array() > 0).all());
    for (const auto& c : corpus) {
        const auto back = norm.denormalize(norm.normalize(c.samples));
        for (std::size_t i = 0; i < back.size(); ++i) {
            ASSERT_LE(std::abs(back[i] - c.samples[i]), 1e-12 * std::max(1.0, std::abs(c.samples[i])));
        }
    }
}

TEST(Normalization, ConstantPositionsGetUnitScale) {
    std::vector<PowerCurve> curves(3, PowerCurve{{5.0, 1.0}, 0, 0});
    curves[1].samples[1] = 3.0;
    std::vector<const PowerCurve*> ptrs{&curves[0], &curves[1], &curves[2]};
    const auto norm = Normalization::fit(ptrs);
    EXPECT_EQ(norm.scale[0], 1.0);
    EXPECT_GT(norm.scale[1], 0.0);
}

// ---------------------------------------------------------------------------

TEST(Adam, SingleStepOnASquare) {
    // f(theta) = theta^2 at theta = 1: g = 2, m_hat = 2, v_hat = 4,
    // step = 0.1 * 2 / (2 + 1e-8).
    Adam adam(1, {0.1, 0.9, 0.999, 1e-8});
    Eigen::VectorXd theta(1);
    theta << 1.0;
    Eigen::VectorXd grad(1);
    grad << 2.0 * theta[0];
    adam.step(theta, grad);
    EXPECT_NEAR(theta[0], 0.9, 1e-6);
    EXPECT_NEAR(theta[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
    EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, StateInvariantsAndConvergence) {
    Adam adam(3, {0.05, 0.9, 0.999, 1e-8});
    Eigen::VectorXd theta(3);
    theta << 3.0, -2.0, 0.5;
    for (int t = 1; t <= 2000; ++t) {
        const Eigen::VectorXd grad = 2.0 * theta;
        adam.step(theta, grad);
        ASSERT_EQ(adam.steps(), t);
        ASSERT_TRUE((adam.second_moment().array() >= 0).all());
    }
    EXPECT_LT(theta.norm(), 1e-2);
}

TEST(Adam, RejectsBadHyperparameters) {
    EXPECT_THROW(Adam(2, {0.0, 0.9, 0.999, 1e-8}), Error);
    EXPECT_THROW(Adam(2, {0.1, 1.0, 0.999, 1e-8}), Error);
    Adam ok(2, {});
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
    EXPECT_THROW(ok.step(theta, theta), Error);
}

// ---------------------------------------------------------------------------

TEST(GradientCheck, RandomSmallInstances) {
    // Components below 1e-6 are compared absolutely: there the central
    // difference is dominated by round-off in the loss.
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dl(2, 8), dh(1, 8), dn(1, 4);
    const double step = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const int l = dl(rng), h = dh(rng), n = dn(rng);
        const auto m = random_model(static_cast<std::size_t>(n), l, h, rng);
        const auto curves = random_curves(static_cast<std::size_t>(n) + 1, static_cast<std::size_t>(l), rng, 2.0);
        const auto pairs = make_dataset(curves, static_cast<std::size_t>(n));
        const auto grad = pair_gradient(m, pairs[0]);
        auto probe = m;
        for (Index k = 0; k < m.params.flat().size(); ++k) {
            const double saved = probe.params.flat()[k];
            probe.params.flat()[k] = saved + step;
            const double up = pair_loss(probe, pairs[0]);
            probe.params.flat()[k] = saved - step;
            const double down = pair_loss(probe, pairs[0]);
            probe.params.flat()[k] = saved;
            const double numeric = (up - down) / (2 * step);
            const double analytic = grad.flat()[k];
            const double scale = std::max(std::abs(analytic), std::abs(numeric));
            if (scale > 1e-6) {
                EXPECT_LT(std::abs(analytic - numeric) / scale, 1e-4)
                    << "L=" << l << " H=" << h << " N=" << n << " " << m.params.block_of(k) << "[" << k << "]";
            } else {
                EXPECT_LT(std::abs(analytic - numeric), 1e-9) << m.params.block_of(k) << "[" << k << "]";
            }
        }
    }
}

TEST(GradientCheck, ZeroWeightOutputBlocksMatchExactly) {
    std::mt19937_64 rng(9);
    ForecastModel m(3, 5, 4);
    const auto curves = random_curves(4, 5, rng);
    const auto pairs = make_dataset(curves, 3);
    const auto grad = pair_gradient(m, pairs[0]);
    auto probe = m;
    const double step = 1e-5;
    for (const auto& blk : m.params.blocks()) {
        const std::string name = blk.name;
        if (name != "V" && name != "c") continue;
        for (Index k = blk.offset; k < blk.offset + blk.rows * blk.cols; ++k) {
            probe.params.flat()[k] = step;
            const double up = pair_loss(probe, pairs[0]);
            probe.params.flat()[k] = -step;
            const double down = pair_loss(probe, pairs[0]);
            probe.params.flat()[k] = 0.0;
            EXPECT_NEAR(grad.flat()[k], (up - down) / (2 * step), 1e-6) << name << "[" << k << "]";
        }
    }
    // With V = 0 the recurrent blocks cannot influence the loss.
    EXPECT_EQ(grad.W().norm(), 0.0);
    EXPECT_EQ(grad.U().norm(), 0.0);
}

TEST(GradientCheck, FirstOrderTaylor) {
    std::mt19937_64 rng(21);
    auto m = random_model(3, 6, 4, rng);
    const auto curves = random_curves(4, 6, rng, 2.0);
    const auto pairs = make_dataset(curves, 3);
    const auto grad = pair_gradient(m, pairs[0]);
    const double base = pair_loss(m, pairs[0]);
    const double step = 1e-5;
    for (Index k : {Index{0}, Index{37}, m.params.flat().size() / 2, m.params.flat().size() - 1}) {
        auto probe = m;
        probe.params.flat()[k] += step;
        const double change = pair_loss(probe, pairs[0]) - base;
        EXPECT_NEAR(change, grad.flat()[k] * step, 1e-8 + 1e-3 * std::abs(grad.flat()[k] * step)) << "k=" << k;
    }
}

// ---------------------------------------------------------------------------

namespace {

TrainHyper small_hyper() {
    TrainHyper h;
    h.window = 5;
    h.hidden = 8;
    h.epochs = 30;
    h.learning_rate = 5e-3;
    h.seed = 4;
    return h;
}

std::vector<PowerCurve> small_corpus(double noise) {
    GeneratorConfig cfg;
    cfg.length = 24;
    cfg.operations = 120;
    cfg.noise_sigma = noise;
    cfg.phase_plan = {{CurveKind::EarlyLifeNormal, 0, 40, 0, 0},
                      {CurveKind::ProgressivePreFault, 40, 120, 0.0, 1.0}};
    return curves_of(generate_lifecycle(cfg));
}

} // namespace

TEST(Train, LossDecreasesAndStaysFinite) {
    const auto corpus = small_corpus(10.0);
    const auto pairs = make_dataset(corpus, 5);
    const auto [model, report] = train(pairs, small_hyper());
    ASSERT_EQ(report.train_loss.size(), 30u);
    for (double l : report.train_loss) EXPECT_TRUE(std::isfinite(l) && l >= 0);
    for (double l : report.validation_loss) EXPECT_TRUE(std::isfinite(l) && l >= 0);
    EXPECT_LT(report.train_loss.back(), report.train_loss.front());
    EXPECT_LT(report.train_loss.back(), report.initial_train_loss);
    EXPECT_TRUE(model.params.flat().allFinite());
    EXPECT_EQ(model.metadata.epochs, 30u);
}

TEST(Train, IsDeterministic) {
    const auto corpus = small_corpus(10.0);
    const auto pairs = make_dataset(corpus, 5);
    auto hyper = small_hyper();
    hyper.epochs = 5;
    const auto [m1, r1] = train(pairs, hyper);
    const auto [m2, r2] = train(pairs, hyper);
    EXPECT_EQ(m1, m2);
    EXPECT_EQ(r1.train_loss, r2.train_loss);
    EXPECT_EQ(r1.validation_loss, r2.validation_loss);

    hyper.batch_size = 16;
    hyper.shuffle = true;
    const auto [m3, r3] = train(pairs, hyper);
    const auto [m4, r4] = train(pairs, hyper);
    EXPECT_EQ(m3, m4);
    EXPECT_NE(m1, m3);
}

TEST(Train, LearnsAZeroNoiseProgression) {
    const auto corpus = small_corpus(0.0);
    const auto pairs = make_dataset(corpus, 5);
    auto hyper = small_hyper();
    hyper.epochs = 150;
    const auto [model, report] = train(pairs, hyper);
    EXPECT_LT(report.train_loss.back(), 0.05 * report.initial_train_loss);
    EXPECT_LT(report.validation_loss.back(), 0.5 * report.validation_loss.front());
}

TEST(Train, ConstantCorpusIsLearnedToTheFloor) {
    GeneratorConfig cfg;
    cfg.length = 24;
    cfg.operations = 40;
    cfg.noise_sigma = 0.0;
    cfg.phase_plan = {{CurveKind::EarlyLifeNormal, 0, 40, 0, 0}};
    const auto corpus = curves_of(generate_lifecycle(cfg));
    const auto pairs = make_dataset(corpus, 5);
    auto hyper = small_hyper();
    hyper.epochs = 200;
    const auto [model, report] = train(pairs, hyper);
    EXPECT_LT(report.validation_loss.back(), 1e-4);
    const auto y = forward(model, std::span<const PowerCurve>(corpus).first(5));
    EXPECT_LT(loss(y, corpus[5], model.normalization), 1e-4);
}

TEST(Train, DivergenceAbortsWithDiagnostic) {
    const auto corpus = small_corpus(10.0);
    const auto pairs = make_dataset(corpus, 5);
    auto hyper = small_hyper();
    hyper.learning_rate = 1e308;
    hyper.epochs = 3;
    try {
        train(pairs, hyper);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("block"), std::string::npos) << e.what();
    }
}

TEST(Train, RejectsBadInputs) {
    const auto corpus = small_corpus(10.0);
    const auto pairs = make_dataset(corpus, 5);
    EXPECT_THROW(train(std::span<const SupervisedPair>{}, small_hyper()), Error);
    auto hyper = small_hyper();
    hyper.window = 6;
    EXPECT_THROW(train(pairs, hyper), Error);
}

// ---------------------------------------------------------------------------

TEST(ModelIo, RoundTripGivesIdenticalPredictions) {
    std::mt19937_64 rng(8);
    auto m = random_model(4, 6, 3, rng);
    m.normalization.mean = Eigen::VectorXd::LinSpaced(6, 100, 600);
    m.normalization.scale = Eigen::VectorXd::LinSpaced(6, 0.1, 7.3);
    m.metadata = {12, 77, 1};
    const auto path = temp_file("model.json");
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back, m);
    const auto window = random_curves(4, 6, rng, 100.0);
    EXPECT_EQ(forward(back, window).samples, forward(m, window).samples);
}

TEST(ModelIo, TruncatedFileFailsCleanly) {
    std::mt19937_64 rng(8);
    const auto m = random_model(2, 3, 2, rng);
    const auto path = temp_file("truncated.json");
    save_model(m, path);
    const auto full = fs::file_size(path);
    fs::resize_file(path, full / 2);
    try {
        load_model(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Schema);
    }
}

TEST(ModelIo, VersionMismatchFailsCleanly) {
    std::mt19937_64 rng(8);
    auto doc = model_to_json(random_model(2, 3, 2, rng));
    doc["format_version"] = 99;
    try {
        model_from_json(doc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Schema);
        EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos);
    }
    auto bad_shape = model_to_json(random_model(2, 3, 2, rng));
    bad_shape["parameters"]["V"]["shape"] = {2, 2};
    EXPECT_THROW(model_from_json(bad_shape), Error);
}

TEST(ModelIo, LoadedModelReportsExpectedWindowLength) {
    std::mt19937_64 rng(8);
    const auto path = temp_file("window.json");
    save_model(random_model(50, 3, 2, rng), path);
    const auto m = load_model(path);
    const auto window = random_curves(10, 3, rng);
    try {
        forward(m, window);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("N = 50"), std::string::npos);
    }
}
