#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "collo/collocative.hpp"
#include "collo/error.hpp"

using namespace collo;

namespace {

SegmentSeries series_of(std::vector<std::vector<double>> segments) {
    SegmentSeries s;
    s.record_id = "t";
    s.window = segments.front().size();
    s.segments = std::move(segments);
    return s;
}

SegmentSeries random_series(std::size_t n, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<std::vector<double>> segs(n, std::vector<double>(w));
    for (auto& s : segs)
        for (double& v : s) v = d(rng);
    return series_of(std::move(segs));
}

}  // namespace

TEST(Metric, Euclidean) {
    const std::vector<double> a{0, 0}, b{3, 4};
    EXPECT_DOUBLE_EQ(metric_eval(a, b, {Metric::euclidean, FeatureKind::mean}), 5.0);
    EXPECT_DOUBLE_EQ(metric_eval(a, b, {Metric::manhattan, FeatureKind::mean}), 7.0);
}

TEST(Metric, CosineSelfSimilarity) {
    const std::vector<double> v{1.5, -2.0, 0.25};
    EXPECT_NEAR(metric_eval(v, v, {Metric::cosine, FeatureKind::mean}), 1.0, 1e-12);
}

TEST(Metric, IdentityMahalanobisIsEuclidean) {
    const auto cov = inverse_covariance_from(Eigen::MatrixXd::Identity(4, 4));
    const std::vector<double> a{1, 2, 3, 4}, b{-1, 0.5, 2, 7};
    EXPECT_NEAR(metric_eval(a, b, {Metric::mahalanobis, FeatureKind::mean}, &cov),
                metric_eval(a, b, {Metric::euclidean, FeatureKind::mean}), 1e-12);
}

TEST(Metric, SummaryMetricsUseFeatureValues) {
    const std::vector<double> a{1, 3}, b{10, 20};
    EXPECT_DOUBLE_EQ(metric_eval(a, b, {Metric::max, FeatureKind::mean}), 15.0);
    EXPECT_DOUBLE_EQ(metric_eval(a, b, {Metric::min, FeatureKind::mean}), 2.0);
    EXPECT_DOUBLE_EQ(metric_eval(a, b, {Metric::avg, FeatureKind::mean}), 8.5);
}

TEST(Metric, Errors) {
    const std::vector<double> a{1, 2}, b{1, 2, 3};
    try {
        metric_eval(a, b, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
    try {
        metric_eval(a, a, {Metric::mahalanobis, FeatureKind::mean});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingCovariance);
    }
}

TEST(Relation, ConstantSignal) {
    const auto s = series_of({{2, 2}, {2, 2}, {2, 2}});
    const auto r = relation_matrix(s, {Metric::euclidean, FeatureKind::mean});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_EQ(r.values(i, j), i == j ? 2.0 : 0.0);
}

TEST(Relation, ThreeSegmentExample) {
    const auto s = series_of({{0, 0}, {3, 4}, {0, 0}});
    const auto r = relation_matrix(s, {Metric::euclidean, FeatureKind::mean});
    Eigen::Matrix3d expected;
    expected << 0, 5, 0, 5, 3.5, 5, 0, 5, 0;
    EXPECT_EQ(r.values, Eigen::MatrixXd(expected));
}

TEST(Relation, SymmetryAndDiagonal) {
    const auto s = random_series(12, 9, 4);
    std::vector<SegmentSeries> pool{s, random_series(12, 9, 5)};
    const auto cov = estimate_inverse_covariance(pool);
    for (const ViewSpec& v : default_views()) {
        const auto r = relation_matrix(s, v, &cov);
        for (int i = 0; i < 12; ++i) {
            EXPECT_EQ(r.values(i, i), extract_feature(s.segments[static_cast<std::size_t>(i)], v.feature));
            for (int j = 0; j < 12; ++j)
                if (i != j && is_symmetric(v.metric)) EXPECT_EQ(r.values(i, j), r.values(j, i));
        }
    }
}

TEST(Relation, MatchesPairwiseOracle) {
    const auto s = random_series(10, 6, 8);
    for (const ViewSpec& v : default_views()) {
        if (v.metric == Metric::mahalanobis) continue;
        const auto r = relation_matrix(s, v);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = 0; j < 10; ++j) {
                if (i == j) continue;
                const auto& a = s.segments[i];
                const auto& b = s.segments[j];
                double want = 0.0;
                switch (v.metric) {
                    case Metric::euclidean:
                        for (std::size_t k = 0; k < 6; ++k) want += (a[k] - b[k]) * (a[k] - b[k]);
                        want = std::sqrt(want);
                        break;
                    case Metric::manhattan:
                        for (std::size_t k = 0; k < 6; ++k) want += std::abs(a[k] - b[k]);
                        break;
                    case Metric::cosine: {
                        double ab = 0, aa = 0, bb = 0;
                        for (std::size_t k = 0; k < 6; ++k) ab += a[k] * b[k], aa += a[k] * a[k], bb += b[k] * b[k];
                        want = ab / std::sqrt(aa * bb);
                        break;
                    }
                    default: {
                        const double fa = extract_feature(a, v.feature), fb = extract_feature(b, v.feature);
                        want = v.metric == Metric::max ? std::max(fa, fb)
                             : v.metric == Metric::min ? std::min(fa, fb)
                                                       : 0.5 * (fa + fb);
                    }
                }
                EXPECT_NEAR(r.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), want, 1e-12);
            }
    }
}

TEST(Relation, PeriodicSignalRepeats) {
    constexpr std::size_t period = 8, n = 64, w = 5;
    std::vector<std::vector<double>> segs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(w);
        for (std::size_t k = 0; k < w; ++k)
            s[k] = std::sin(2.0 * std::numbers::pi * static_cast<double>((i % period) * w + k) / static_cast<double>(period * w)) +
                   0.1 * static_cast<double>(k);
        segs.push_back(s);
    }
    const auto s = series_of(segs);
    std::vector<SegmentSeries> pool{s};
    const auto cov = estimate_inverse_covariance(pool);
    const auto t = build_tensor(s, default_views(), &cov);
    for (const auto& ch : t.channels)
        for (Eigen::Index i = 0; i + static_cast<Eigen::Index>(period) < 64; ++i)
            for (Eigen::Index j = 0; j + static_cast<Eigen::Index>(period) < 64; ++j)
                EXPECT_LE(std::abs(ch.values(i + period, j + period) - ch.values(i, j)), 1e-6);
}

TEST(Tensor, ComposeAndSplit) {
    const auto s = random_series(64, 4, 2);
    std::vector<SegmentSeries> pool{s};
    const auto cov = estimate_inverse_covariance(pool);
    const auto views = default_views();
    ASSERT_EQ(views.size(), 7u);
    EXPECT_EQ(to_string(views), "euclidean:mean,manhattan:std,cosine:mean,mahalanobis:mean,max:mean,avg:std,min:mean");
    const auto t = build_tensor(s, views, &cov);
    EXPECT_EQ(t.n(), 64u);
    EXPECT_EQ(t.views(), 7u);
    const auto parts = split(t);
    const auto again = compose_tensor(parts);
    for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_EQ(again.channels[c].values, t.channels[c].values);
        EXPECT_EQ(again.channels[c].view, views[c]);
    }
    const auto single = compose_tensor({parts[2]});
    EXPECT_EQ(single.views(), 1u);
    EXPECT_EQ(single.channels[0].values, parts[2].values);
}

TEST(Tensor, ComposeErrors) {
    try {
        compose_tensor({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyViewList);
    }
    RelationMatrix a{Eigen::MatrixXd::Zero(3, 3), {}}, b{Eigen::MatrixXd::Zero(4, 4), {}};
    try {
        compose_tensor({a, b});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(Scaler, MapsTrainingRangeToUnitInterval) {
    std::vector<CollocativeTensor> ts;
    for (std::uint64_t seed = 0; seed < 5; ++seed) ts.push_back(build_tensor(random_series(8, 4, seed), std::vector<ViewSpec>{{Metric::euclidean, FeatureKind::mean}, {Metric::cosine, FeatureKind::mean}}));
    const auto scaler = ChannelScaler::fit(ts);
    double lo = 1, hi = 0;
    for (const auto& t : ts)
        for (double v : scaler.transform(t)) lo = std::min(lo, v), hi = std::max(hi, v);
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
}

TEST(Tensor, DumpRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "collo_tensor.cten";
    const auto t = build_tensor(random_series(6, 3, 1), std::vector<ViewSpec>{{Metric::euclidean, FeatureKind::mean}, {Metric::max, FeatureKind::std}});
    write_tensor_dump(path, t);
    const auto back = read_tensor_dump(path);
    ASSERT_EQ(back.views(), 2u);
    ASSERT_EQ(back.n(), 6u);
    for (std::size_t c = 0; c < 2; ++c)
        EXPECT_EQ(back.channels[c].values, Eigen::MatrixXd(t.channels[c].values.cast<float>().cast<double>()));
    std::filesystem::remove(path);
}
