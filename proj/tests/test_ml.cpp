#include "cdrx/ml.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cdrx;
using namespace cdrx::ml;

namespace {

std::vector<WeightedPoint<2>> blobs(std::uint64_t seed, int per = 60) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<WeightedPoint<2>> pts;
    for (auto c : {Vec<2>{0, 0}, Vec<2>{5, 0}, Vec<2>{0, 5}})
        for (int i = 0; i < per; ++i) pts.push_back({{c[0] + n(rng), c[1] + n(rng)}, 1.0});
    return pts;
}

} // namespace

TEST(Em, TraceNeverDecreases) {
    auto pts = blobs(1);
    EmOptions opt;
    opt.k = 3;
    auto m = em_cluster<2>(pts, opt);
    ASSERT_GE(m.trace.size(), 2u);
    for (std::size_t i = 1; i < m.trace.size(); ++i) EXPECT_GE(m.trace[i], m.trace[i - 1] - 1e-9);
    EXPECT_EQ(m.k(), 3u);
    double w = 0;
    for (const auto& c : m.clusters) w += c.weight;
    EXPECT_NEAR(w, 1.0, 1e-9);
}

TEST(Em, BicFindsThree) {
    auto m = em_cluster_bic<2>(blobs(2), 6, EmOptions{});
    EXPECT_EQ(m.k(), 3u);
}

TEST(Em, WeightsActAsMultiplicity) {
    std::vector<WeightedPoint<2>> heavy{{{0, 0}, 3.0}, {{1, 1}, 1.0}};
    std::vector<WeightedPoint<2>> repeated{{{0, 0}, 1.0}, {{0, 0}, 1.0}, {{0, 0}, 1.0}, {{1, 1}, 1.0}};
    EmOptions opt;
    auto a = em_cluster<2>(heavy, opt);
    auto b = em_cluster<2>(repeated, opt);
    EXPECT_NEAR(a.clusters[0].centroid[0], 0.25, 1e-9);
    EXPECT_NEAR(b.clusters[0].centroid[0], 0.25, 1e-9);
}

TEST(Em, RejectsBadInput) {
    std::vector<WeightedPoint<2>> none;
    EXPECT_THROW(em_cluster<2>(none, EmOptions{}), Error);
}

TEST(Xmeans, FindsThreeBlobs) {
    auto m = xmeans_cluster<2>(blobs(3), XmeansOptions{});
    EXPECT_EQ(m.k(), 3u);
    XmeansOptions bad;
    bad.k_min = 4;
    bad.k_max = 2;
    EXPECT_THROW(xmeans_cluster<2>(blobs(3), bad), ConfigError);
}

TEST(Xmeans, SeedDeterministic) {
    auto pts = blobs(4);
    auto a = xmeans_cluster<2>(pts, XmeansOptions{});
    auto b = xmeans_cluster<2>(pts, XmeansOptions{});
    EXPECT_EQ(a.assignment, b.assignment);
}

TEST(Kmeans, AssignsEveryPoint) {
    auto pts = blobs(5);
    auto m = kmeans_cluster<2>(pts, 3, 9);
    ASSERT_EQ(m.assignment.size(), pts.size());
    std::size_t members = 0;
    for (const auto& c : m.clusters) members += c.members;
    EXPECT_EQ(members, pts.size());
}

TEST(Linear, SeparatesSeparableData) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 0.5);
    std::vector<Sample<int>> samples;
    for (int i = 0; i < 200; ++i) {
        int y = i % 2;
        samples.push_back({{(y ? 3.0 : -3.0) + n(rng), n(rng)}, y});
    }
    auto m = train_linear<int>(samples);
    EXPECT_EQ(m.classes, (std::pair{0, 1}));
    EXPECT_GE(training_accuracy<int>(m, samples), 0.99);
    EXPECT_GT(m.weights[0], 0.0);
}

TEST(Linear, NeedsTwoClasses) {
    std::vector<Sample<int>> one{{{1.0}, 0}, {{2.0}, 0}};
    EXPECT_THROW(train_linear<int>(one), DataError);
    std::vector<Sample<int>> three{{{1.0}, 0}, {{2.0}, 1}, {{3.0}, 2}};
    EXPECT_THROW(train_linear<int>(three), DataError);
}

TEST(Linear, DimensionMismatch) {
    LinearModel<int> m{{1.0, 2.0}, 0.0, {0, 1}};
    std::vector<double> x{1.0};
    EXPECT_THROW(m.decision(x), DataError);
}

TEST(Standardizer, ZeroMeanUnitScale) {
    auto s = Standardizer::fit({{1, 5}, {3, 5}});
    auto z = s.apply(std::vector<double>{3, 5});
    EXPECT_DOUBLE_EQ(z[0], 1.0);
    EXPECT_DOUBLE_EQ(z[1], 0.0);
}
