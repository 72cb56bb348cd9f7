#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "turnout/comparator.hpp"
#include "turnout/curvegen.hpp"

using namespace turnout;

namespace {

std::vector<double> random_series(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 5.0);
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

// Model whose forecast is always `target`: zero recurrent weights, identity
// normalization and the output bias set to the curve.
ForecastModel constant_model(const std::vector<double>& target, std::size_t window) {
    ForecastModel m(window, static_cast<Index>(target.size()), 2);
    for (std::size_t i = 0; i < target.size(); ++i) m.params.c()[static_cast<Index>(i)] = target[i];
    return m;
}

} // namespace

TEST(Euclidean, Examples) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(euclidean(a, a), 0.0);
    EXPECT_DOUBLE_EQ(euclidean(std::vector<double>{0, 0}, std::vector<double>{3, 4}), 5.0);
    EXPECT_THROW(euclidean(a, std::vector<double>{1, 2}), Error);
}

TEST(Euclidean, EqualsRootOfLengthTimesMse) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto a = random_series(37, rng), b = random_series(37, rng);
        double mse = 0;
        for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
        mse /= 37.0;
        EXPECT_NEAR(euclidean(a, b), std::sqrt(37.0 * mse), 1e-10);
    }
}

TEST(Euclidean, TriangleInequality) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_series(20, rng), b = random_series(20, rng), c = random_series(20, rng);
        EXPECT_LE(euclidean(a, c), euclidean(a, b) + euclidean(b, c) + 1e-12);
    }
}

TEST(Dtw, Examples) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(dtw(a, a), 0.0);
    EXPECT_EQ(dtw(a, std::vector<double>{1, 2, 2, 3}), 0.0);
    EXPECT_DOUBLE_EQ(dtw(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 2.0);
    // a shifted step: warping absorbs the shift
    EXPECT_EQ(dtw(std::vector<double>{0, 0, 1, 1}, std::vector<double>{0, 1, 1, 1}), 0.0);
    EXPECT_THROW(dtw(std::vector<double>{}, a), Error);
}

TEST(Dtw, Properties) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 30);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_series(len(rng), rng), b = random_series(len(rng), rng);
        const double d = dtw(a, b);
        EXPECT_GE(d, 0.0);
        EXPECT_NEAR(d, dtw(b, a), 1e-9);
        EXPECT_EQ(dtw(a, a), 0.0);
    }
    for (int t = 0; t < 200; ++t) {
        const auto a = random_series(25, rng), b = random_series(25, rng);
        double l1 = 0;
        for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
        EXPECT_LE(dtw(a, b), l1 + 1e-9);
    }
}

TEST(Dtw, BandConstrainsWarping) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto a = random_series(30, rng), b = random_series(30, rng);
        double l1 = 0;
        for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
        // band 0 forces the diagonal
        EXPECT_NEAR(dtw(a, b, std::size_t{0}), l1, 1e-9);
        const double wide = dtw(a, b);
        const double narrow = dtw(a, b, std::size_t{3});
        EXPECT_LE(wide, narrow + 1e-9);
        EXPECT_NEAR(dtw(a, b, std::size_t{30}), wide, 1e-9);
    }
    // unequal lengths still have a path under band 0
    EXPECT_TRUE(std::isfinite(dtw(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1, 5}, std::size_t{0})));
}

TEST(Percentile, NearestRank) {
    const std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_EQ(percentile_of(v, 100), 5.0);
    EXPECT_EQ(percentile_of(v, 50), 3.0);
    EXPECT_EQ(percentile_of(v, 20), 1.0);
    EXPECT_EQ(percentile_of(v, 21), 2.0);
    EXPECT_THROW(percentile_of({}, 50), Error);
    EXPECT_THROW(percentile_of(v, 0), Error);
    EXPECT_THROW(percentile_of(v, 101), Error);
}

TEST(Calibrate, SinglePairGivesItsDistances) {
    const std::vector<double> forecast{10, 20, 30, 40};
    const auto model = constant_model(forecast, 2);
    std::vector<PowerCurve> curves{{{1, 1, 1, 1}, 0, 0}, {{1, 1, 1, 1}, 1, 1}, {{13, 24, 30, 40}, 2, 2}};
    const auto pairs = make_dataset(curves, 2);
    ASSERT_EQ(pairs.size(), 1u);
    const auto th = calibrate(model, pairs);
    EXPECT_DOUBLE_EQ(th.tau_euclidean, 5.0);
    EXPECT_DOUBLE_EQ(th.tau_dtw, dtw(curves[2].samples, forecast));
    EXPECT_EQ(th.test_pairs, 1u);
    EXPECT_TRUE(th.warnings.empty());

    const auto scaled = calibrate(model, pairs, {100, 1.5, std::nullopt});
    EXPECT_DOUBLE_EQ(scaled.tau_euclidean, 7.5);
}

TEST(Calibrate, PerfectModelWarnsAboutZeroThresholds) {
    const std::vector<double> forecast{10, 20, 30};
    const auto model = constant_model(forecast, 1);
    std::vector<PowerCurve> curves(5);
    for (std::size_t t = 0; t < 5; ++t) curves[t] = {forecast, static_cast<std::int64_t>(t), static_cast<double>(t)};
    const auto pairs = make_dataset(curves, 1);
    const auto th = calibrate(model, pairs);
    EXPECT_EQ(th.tau_euclidean, 0.0);
    EXPECT_EQ(th.tau_dtw, 0.0);
    EXPECT_EQ(th.warnings.size(), 2u);
    EXPECT_TRUE(validate(curves[0], PowerCurve{forecast, 0, 0}, th).validated);
}

TEST(Calibrate, RejectsEmptyTestSet) {
    const auto model = constant_model({1, 2, 3}, 1);
    try {
        calibrate(model, std::span<const SupervisedPair>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
    }
}

TEST(Validate, Decisions) {
    GeneratorConfig cfg;
    cfg.noise_sigma = 0.0;
    const PowerCurve nominal{nominal_curve(cfg, 0.0), 0, 0};
    Thresholds th;
    th.tau_euclidean = 50;
    th.tau_dtw = 400;
    EXPECT_TRUE(validate(nominal, nominal, th).validated);

    PowerCurve shifted = nominal;
    std::rotate(shifted.samples.begin(), shifted.samples.begin() + cfg.length / 10, shifted.samples.end());
    EXPECT_FALSE(validate(shifted, nominal, th).validated);

    PowerCurve spike = nominal;
    spike.samples[100] += 10 * th.tau_euclidean;
    const auto out = validate(spike, nominal, th);
    EXPECT_FALSE(out.validated);
    EXPECT_DOUBLE_EQ(out.distances.euclidean, 500.0);

    // both distances must be within their thresholds
    Thresholds tight_dtw = th;
    tight_dtw.tau_euclidean = 1e9;
    tight_dtw.tau_dtw = 0.0;
    EXPECT_FALSE(validate(spike, nominal, tight_dtw).validated);

    EXPECT_THROW(validate(nominal, PowerCurve{{1, 2}, 0, 0}, th), Error);
}

TEST(Validate, MonotoneInThresholds) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const PowerCurve a{random_series(40, rng), 0, 0}, b{random_series(40, rng), 0, 0};
        Thresholds lo;
        lo.tau_euclidean = 30;
        lo.tau_dtw = 150;
        Thresholds hi = lo;
        hi.tau_euclidean *= 2;
        hi.tau_dtw *= 2;
        if (validate(a, b, lo).validated) {
            EXPECT_TRUE(validate(a, b, hi).validated);
        }
    }
}

TEST(Thresholds, JsonRoundTrip) {
    Thresholds th;
    th.tau_euclidean = 0.1 + 0.2;
    th.tau_dtw = 1234.5678;
    th.test_pairs = 150;
    th.percentile = 99;
    th.safety_factor = 1.2;
    th.band = 10;
    th.warnings = {"x"};
    const nlohmann::json j = th;
    EXPECT_EQ(nlohmann::json::parse(j.dump()).get<Thresholds>(), th);
    auto bad = j;
    bad["tau_dtw"] = -1;
    EXPECT_THROW(bad.get<Thresholds>(), Error);
}
