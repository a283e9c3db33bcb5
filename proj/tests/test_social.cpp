#include "cdrx/social.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cdrx;

namespace {

const Date day0 = *Date::from_ymd(2012, 6, 19);

Trip trip_with(std::vector<std::pair<int, GeoPoint>> calls) {
    Trip t;
    t.date = day0;
    for (auto [s, p] : calls) t.en_route.push_back({Instant{day0, TimeOfDay{s}}, p});
    return t;
}

} // namespace

TEST(Groups, SingleLinkChains) {
    std::vector<std::pair<std::string, GeoPoint>> items{
        {"a", {23.7000, 90.4}}, {"b", {23.7020, 90.4}}, {"c", {23.7040, 90.4}}, {"d", {23.80, 90.4}}};
    auto g = single_link_groups(items, 0.3);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0], (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_TRUE(single_link_groups(items, 0.1).empty());
    EXPECT_THROW(single_link_groups(items, -1), ConfigError);
}

TEST(Groups, ColleaguesNeedRegularWorkers) {
    std::vector<UserPlaces> places{{"a", {}, {0, 0}, GeoPoint{1, 1}},
                                   {"b", {}, {0, 1}, GeoPoint{1, 1}},
                                   {"c", {}, {0, 2}, GeoPoint{1, 1}}};
    std::map<std::string, WorkerKind> kinds{{"a", WorkerKind::regular}, {"b", WorkerKind::regular},
                                            {"c", WorkerKind::irregular}};
    auto g = colleague_groups(places, kinds, 0.3);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0], (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(neighbor_groups(places, 0.3).empty());
}

TEST(Transport, SpeedsSkipZeroIntervals) {
    auto t = trip_with({{0, {0, 0}}, {0, {0, 0.001}}, {3600, {0, 0.1}}});
    auto s = trip_speeds({t});
    ASSERT_TRUE(s);
    EXPECT_EQ(s->samples, 1u);
    EXPECT_NEAR(s->avg_kmh, haversine_km({0, 0.001}, {0, 0.1}), 1e-9);
    EXPECT_FALSE(trip_speeds({trip_with({{0, {0, 0}}})}));
}

TEST(Transport, BootstrapAndModel) {
    EXPECT_EQ(bootstrap_transport({5, 6, 1}), Transport::walking);
    EXPECT_EQ(bootstrap_transport({10, 12, 1}), Transport::non_motorized);
    EXPECT_EQ(bootstrap_transport({30, 40, 1}), Transport::motorized);
    std::vector<SpeedSummary> users;
    for (double v : {3.0, 4.0, 5.0, 9.0, 10.0, 12.0, 25.0, 30.0, 40.0}) users.push_back({v, v * 1.2, 3});
    auto m = train_transport_model(users);
    EXPECT_EQ(*classify_transport(SpeedSummary{3.5, 4.2, 2}, m), Transport::walking);
    EXPECT_EQ(*classify_transport(SpeedSummary{35, 42, 2}, m), Transport::motorized);
    EXPECT_FALSE(classify_transport(std::nullopt, m));
    EXPECT_EQ(parse_transport("NON_MOTORIZED"), Transport::non_motorized);
}

TEST(WorkingDays, OffDayIsLeastPresent) {
    std::vector<std::pair<Date, bool>> presence;
    for (int d = 0; d < 28; ++d) presence.push_back({day0 + d, (day0 + d).weekday() != Weekday::friday});
    auto w = detect_working_days(presence);
    EXPECT_EQ(w.off_day, Weekday::friday);
    EXPECT_FALSE(w.ambiguous);
    EXPECT_EQ(w.working.size(), 6u);
    presence.resize(10);
    EXPECT_THROW(detect_working_days(presence), DataError);
}

TEST(WorkingDays, HoursFromCallTimes) {
    std::vector<TimeOfDay> t;
    for (int m = 9 * 60 + 10; m < 16 * 60 + 50; m += 5) t.push_back(TimeOfDay{m * 60});
    auto w = estimate_working_hours(t);
    ASSERT_TRUE(w);
    EXPECT_EQ(w->span_str(), "09:00-17:00");
    EXPECT_FALSE(estimate_working_hours({}));
}

TEST(Special, Labels) {
    std::vector<UserSignals> users;
    for (int i = 0; i < 20; ++i) users.push_back({"u" + std::to_string(i), 10, 1, 5.0 + i, 2.0, true});
    users[0].mu_late_night = 6;
    users[1].towers_per_day = 9;
    auto g = special_groups(users);
    EXPECT_EQ(g["u0"], std::vector<std::string>{std::string(label_late_night)});
    EXPECT_EQ(g["u1"], std::vector<std::string>{std::string(label_traveler)});
    EXPECT_EQ(g["u19"], std::vector<std::string>{std::string(label_professional)});
    EXPECT_TRUE(g["u5"].empty());
}

TEST(Strength, RanksByCallStatistics) {
    CallGraph g;
    Instant t{day0, TimeOfDay::hour(20)};
    g.edges[make_pair_key("a", "b")] = {{t, 60}, {t + 86400, 60}, {t + 2 * 86400, 60}};
    g.edges[make_pair_key("a", "c")] = {{t, 60}};
    auto off = Period::of(TimeWindow::hours(WindowLabel::off_hours, 19, 7));
    auto stats = edge_stats(g, off);
    auto s = call_strengths(stats);
    EXPECT_DOUBLE_EQ(s[make_pair_key("a", "b")], 1.0);
    EXPECT_DOUBLE_EQ(s[make_pair_key("a", "c")], 0.0);
    auto cs = call_strength(stats, s, "b", "a");
    EXPECT_DOUBLE_EQ(cs.off_hours_fraction, 1.0);
    EXPECT_DOUBLE_EQ(call_strength(stats, s, "b", "c").strength, 0.0);
}

TEST(Closeness, BoundedAndMonotone) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        ClosenessComponents c{u(rng), u(rng) < 0.5, u(rng) < 0.5, static_cast<int>(u(rng) * 5), u(rng)};
        double v = closeness(c);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        auto more = c;
        more.call_strength = std::min(1.0, c.call_strength + 0.1);
        EXPECT_GE(closeness(more), v);
        more = c;
        more.co_poi_count += 1;
        EXPECT_GE(closeness(more), v);
    }
}

TEST(FamilyFriends, Thresholds) {
    std::vector<ClosenessScore> scores{
        {make_pair_key("a", "b"), {0.8, true, false, 0, 0.2}, 0},
        {make_pair_key("b", "c"), {0.6, true, false, 0, 0.9}, 0},
        {make_pair_key("d", "e"), {0.7, false, true, 0, 0.5}, 0},
        {make_pair_key("f", "g"), {0.7, false, true, 0, 0.1}, 0},
        {make_pair_key("h", "i"), {0.3, true, false, 0, 0.9}, 0}};
    auto groups = detect_family_friends(scores);
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0], (LabeledGroup{"FAMILY", {"a", "b", "c"}}));
    EXPECT_EQ(groups[1], (LabeledGroup{"FRIEND", {"d", "e"}}));
}

TEST(Profile, OccupationalLabel) {
    EXPECT_EQ(occupational_label(WorkerKind::regular, true, 0.2), label_service_holder);
    EXPECT_EQ(occupational_label(WorkerKind::irregular, false, 0.7), label_homemaker);
    EXPECT_FALSE(occupational_label(WorkerKind::irregular, false, 0.3));
}
