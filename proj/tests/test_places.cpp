#include "cdrx/places.hpp"

#include <gtest/gtest.h>

using namespace cdrx;

namespace {

const Date day0 = *Date::from_ymd(2012, 6, 19); // Tuesday
const GeoPoint home{23.75, 90.38};
const GeoPoint work{23.80, 90.42};

/// A commuter: nights at home, office hours at work, one call en route each way.
UserLog commuter(int days = 20) {
    UserLog log;
    log.user = "w";
    for (int d = 0; d < days; ++d) {
        Date date = day0 + d;
        auto at = [&](int h, int m, GeoPoint p) { log.entries.push_back({Instant{date, *TimeOfDay::hms(h, m)}, 90, p}); };
        at(7, 0, home);
        if (date.weekday() != Weekday::friday) {
            at(8, 20, {23.775, 90.40});
            at(10, 0, work);
            at(14, 0, work);
            at(16, 30, work);
            at(17, 30, {23.775, 90.40});
        }
        at(19, 0, home);
        at(22, 0, home);
    }
    std::sort(log.entries.begin(), log.entries.end());
    for (const auto& e : log.entries) {
        auto& t = log.tallies[e.loc];
        t.calls += 1;
        t.duration += e.duration;
    }
    return log;
}

} // namespace

TEST(Places, CommuterHomeAndWork) {
    auto periods = CityPeriods::defaults(Weekday::friday);
    for (auto method : {ClusterMethod::em, ClusterMethod::xmeans}) {
        PlaceOptions opt;
        opt.method = method;
        auto up = user_places(commuter(), periods, {}, opt);
        EXPECT_EQ(up.home, home) << to_string(method);
        ASSERT_TRUE(up.workplace) << to_string(method);
        EXPECT_EQ(*up.workplace, work);
    }
}

TEST(Places, WorkplaceNearHomeMerges) {
    Poi a, b;
    a.centroid = home;
    a.mu_off = 10;
    a.members = {{home, 10, 1, 11, 5}};
    b.centroid = {home.lat + 0.001, home.lon};
    b.mu_work = 8;
    b.members = {{b.centroid, 0, 8, 8, 4}};
    auto hw = infer_home_work({a, b}, 1.0);
    EXPECT_EQ(hw.home, home);
    EXPECT_FALSE(hw.workplace);
    EXPECT_TRUE(infer_home_work({a, b}, 0.05).workplace);
    EXPECT_THROW(infer_home_work({}), DataError);
}

TEST(Places, HomeArgmaxIgnoresWeightScale) {
    auto periods = CityPeriods::defaults(Weekday::friday);
    auto log = commuter();
    PlaceOptions opt;
    auto base = user_places(log, periods, {}, opt);
    UsageScoreParams scaled{3.0, 3.0, 60.0};
    auto other = user_places(log, periods, scaled, opt);
    EXPECT_EQ(base.home, other.home);
    EXPECT_EQ(base.workplace, other.workplace);
}

TEST(Worker, RegularCommuterFeatures) {
    auto periods = CityPeriods::defaults(Weekday::friday);
    auto log = commuter();
    auto up = user_places(log, periods, {}, PlaceOptions{});
    auto f = worker_features(log, up, periods, {});
    EXPECT_DOUBLE_EQ(f.has_workplace, 1.0);
    EXPECT_DOUBLE_EQ(f.regularity, 1.0);
    EXPECT_EQ(bootstrap_worker_kind(f, 0.5), WorkerKind::regular);
    EXPECT_EQ(bootstrap_worker_kind(WorkerFeatures{}, 0.5), WorkerKind::irregular);
}

TEST(Worker, ModelFallsBackToBootstrap) {
    std::vector<WorkerFeatures> same(5, WorkerFeatures{1.0, 0.9, 0.4});
    auto m = train_worker_model(same, 0.5);
    EXPECT_FALSE(m.model);
    UserPlaces up{"x", {}, home, work};
    auto wc = classify_worker(up, same[0], m);
    EXPECT_EQ(wc.kind, WorkerKind::regular);
    ASSERT_TRUE(wc.commute_km);
    EXPECT_EQ(*wc.bucket, "5-10");
}

TEST(Worker, DistanceBuckets) {
    EXPECT_EQ(*distance_bucket(0.0), "0-2");
    EXPECT_EQ(*distance_bucket(2.0), "2-5");
    EXPECT_EQ(*distance_bucket(19.99), "10-20");
    EXPECT_EQ(*distance_bucket(99.9), "20-100");
    EXPECT_FALSE(distance_bucket(100.0));
    EXPECT_FALSE(distance_bucket(-1.0));
}

TEST(Commute, TripsAndRoute) {
    auto log = commuter(7);
    auto trips = commute_trips(log, home, work);
    ASSERT_EQ(trips.size(), 12u);
    EXPECT_EQ(trips[0].leg, Leg::to_work);
    EXPECT_EQ(trips[1].leg, Leg::to_home);
    ASSERT_EQ(trips[0].en_route.size(), 1u);
    auto r = predict_route(home, work, trips);
    EXPECT_EQ(r.points.size(), 3u);
    EXPECT_DOUBLE_EQ(route_overlap({{23.775, 90.40}}, r.points), 1.0);
    EXPECT_DOUBLE_EQ(route_overlap({{24.5, 91.0}}, r.points), 0.0);
    EXPECT_TRUE(commute_trips(log, home, work, 60).empty());
}

TEST(Busy, MonotoneInActivity) {
    std::vector<ZoneProfile> zones;
    for (int i = 0; i < 50; ++i) zones.push_back({{0, i * 0.01}, {SlotCount{i * 10, i}}});
    auto m = train_busy_model(zones, 0);
    ASSERT_FALSE(m.degenerate);
    bool seen_busy = false;
    for (int i = 0; i < 50; ++i) {
        bool busy = classify_zone_busyness(m, {i * 10, i}) == BusyClass::busy;
        if (seen_busy) {
            EXPECT_TRUE(busy) << i;
        }
        seen_busy |= busy;
    }
    EXPECT_TRUE(seen_busy);
    EXPECT_EQ(classify_zone_busyness(m, {0, 0}), BusyClass::idle);
}

TEST(Busy, UniformZonesAreIdle) {
    std::vector<ZoneProfile> zones(10, ZoneProfile{{0, 0}, {SlotCount{5, 2}}});
    auto m = train_busy_model(zones, 0);
    EXPECT_TRUE(m.degenerate);
    EXPECT_EQ(classify_zone_busyness(m, {1000, 100}), BusyClass::idle);
}

TEST(ZoneType, BootstrapRules) {
    EXPECT_EQ(bootstrap_zone_type({{}, 0, 0, 0}), ZoneType::miscellaneous);
    EXPECT_EQ(bootstrap_zone_type({{}, 5, 0, 0}), ZoneType::residential);
    EXPECT_EQ(bootstrap_zone_type({{}, 1, 5, 0}), ZoneType::commercial);
    EXPECT_EQ(bootstrap_zone_type({{}, 2, 2, 0}), ZoneType::miscellaneous);
    ZoneTypeModel untrained;
    EXPECT_THROW(classify_zone_type({}, untrained), DependencyError);
}
