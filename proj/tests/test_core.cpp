#include "cdrx/core.hpp"
#include "cdrx/table.hpp"
#include "cdrx/time.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cdrx;

TEST(Date, RoundTripsAndWeekday) {
    auto d = Date::parse("2012-06-19");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->str(), "2012-06-19");
    EXPECT_EQ(d->weekday(), Weekday::tuesday);
    EXPECT_EQ((*d + 3).weekday(), Weekday::friday);
    EXPECT_EQ(*Date::parse("2012-07-18") - *d, 29);
    EXPECT_FALSE(Date::parse("2012-02-30"));
    EXPECT_FALSE(Date::parse("2012-6-19"));
}

TEST(Weekday, ParseIgnoresCase) {
    EXPECT_EQ(parse_weekday("Friday"), Weekday::friday);
    EXPECT_EQ(parse_weekday("friday"), Weekday::friday);
    EXPECT_FALSE(parse_weekday("fri"));
}

TEST(TimeOfDay, StrictParse) {
    EXPECT_EQ(TimeOfDay::parse("23:59:59")->seconds(), 86399);
    EXPECT_FALSE(TimeOfDay::parse("24:00:00"));
    EXPECT_FALSE(TimeOfDay::parse("7:00:00"));
    EXPECT_EQ(TimeOfDay::hms(9, 30)->str(), "09:30:00");
}

TEST(Instant, SplitsIntoDateAndTime) {
    Instant t{*Date::from_ymd(2012, 6, 19), *TimeOfDay::hms(13, 5, 7)};
    EXPECT_EQ(t.date().str(), "2012-06-19");
    EXPECT_EQ(t.time().str(), "13:05:07");
    EXPECT_EQ((t + 86400).date().str(), "2012-06-20");
    EXPECT_EQ(t.str(), "2012-06-19T13:05:07");
}

TEST(TimeWindow, WrapAroundCoversBothSides) {
    auto off = TimeWindow::hours(WindowLabel::off_hours, 19, 7);
    EXPECT_TRUE(off.wraps());
    EXPECT_TRUE(off.contains(*TimeOfDay::hms(23)));
    EXPECT_TRUE(off.contains(*TimeOfDay::hms(0)));
    EXPECT_TRUE(off.contains(*TimeOfDay::hms(6, 59, 59)));
    EXPECT_FALSE(off.contains(*TimeOfDay::hms(7)));
    EXPECT_FALSE(off.contains(*TimeOfDay::hms(12)));

    auto work = TimeWindow::hours(WindowLabel::working_hours, 9, 17);
    EXPECT_TRUE(work.contains(*TimeOfDay::hms(9)));
    EXPECT_FALSE(work.contains(*TimeOfDay::hms(17)));
}

TEST(TimeWindow, SpanRoundTrip) {
    auto w = TimeWindow::parse_span(WindowLabel::custom, "19:00-07:00");
    ASSERT_TRUE(w);
    EXPECT_EQ(w->span_str(), "19:00-07:00");
    EXPECT_FALSE(TimeWindow::parse_span(WindowLabel::custom, "09:00-09:00"));
    EXPECT_FALSE(TimeWindow::parse_span(WindowLabel::custom, "nine-five"));
}

TEST(Period, WeekendRules) {
    auto fri = *Date::from_ymd(2012, 6, 22);
    ASSERT_EQ(fri.weekday(), Weekday::friday);
    auto work = Period{TimeWindow::hours(WindowLabel::working_hours, 9, 17), std::nullopt, Weekday::friday,
                       WeekendRule::exclude};
    auto off = Period{TimeWindow::hours(WindowLabel::off_hours, 19, 7), std::nullopt, Weekday::friday,
                      WeekendRule::whole_day};
    Instant noon_fri{fri, TimeOfDay::hour(12)};
    Instant noon_sat{fri + 1, TimeOfDay::hour(12)};
    EXPECT_FALSE(work.contains(noon_fri));
    EXPECT_TRUE(off.contains(noon_fri));
    EXPECT_TRUE(work.contains(noon_sat));
    EXPECT_FALSE(off.contains(noon_sat));
}

TEST(DaySlots, PartitionTheDay) {
    auto slots = default_day_slots();
    for (int s = 0; s < 86400; s += 60) {
        int hits = 0;
        for (const auto& w : slots) hits += w.contains(TimeOfDay{s});
        ASSERT_EQ(hits, 1) << s;
    }
}

TEST(Format, ExactDoublesRoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-180.0, 180.0);
    for (int i = 0; i < 1000; ++i) {
        double v = u(rng);
        EXPECT_EQ(*parse_double(format_exact(v)), v);
    }
    EXPECT_EQ(format_fixed(-0.0, 1), "0.0");
    EXPECT_FALSE(parse_double("1e999"));
    EXPECT_FALSE(parse_double("abc"));
    EXPECT_FALSE(parse_double("1.5x"));
}

TEST(Format, PointLists) {
    std::vector<GeoPoint> pts{{23.878599, 90.390602}, {24.025, 90.244202}};
    auto s = format_point_list(pts);
    EXPECT_EQ(s, "23.878599:90.390602|24.025:90.244202");
    EXPECT_EQ(*parse_point_list(s), pts);
    EXPECT_TRUE(parse_point_list("")->empty());
    EXPECT_FALSE(parse_point_list("1:2|x"));
}

TEST(Record, Validation) {
    auto window = ObservationWindow::days_from(*Date::from_ymd(2012, 6, 19), 30);
    CdrRecord r{"u1", *Date::from_ymd(2012, 6, 20), *TimeOfDay::hms(10), 0, 23.7, 90.4};
    EXPECT_TRUE(validate_record(r, window).valid());
    r.date = *Date::from_ymd(2012, 7, 20);
    EXPECT_EQ(*validate_record(r, window).rejection, "instant outside window");
    r.date = *Date::from_ymd(2012, 7, 18);
    EXPECT_TRUE(validate_record(r, window).valid());
    r.duration = -1;
    EXPECT_EQ(*validate_record(r, window).rejection, "duration out of range");
    r.duration = 10;
    r.lat = 91;
    EXPECT_EQ(*validate_record(r, window).rejection, "latitude out of range");
}

TEST(Dataset, CanonicalOrderAndTowers) {
    auto window = ObservationWindow::days_from(*Date::from_ymd(2012, 6, 19), 30);
    Date d = *Date::from_ymd(2012, 6, 19);
    std::vector<CdrRecord> recs{{"b", d, TimeOfDay::hour(10), 5, 1, 1},
                                {"a", d, TimeOfDay::hour(10), 5, 2, 2},
                                {"a", d, TimeOfDay::hour(9), 5, 1, 1}};
    CdrDataset ds(recs, window);
    EXPECT_EQ(ds.records()[0].time, TimeOfDay::hour(9));
    EXPECT_EQ(ds.records()[1].user, "a");
    EXPECT_EQ(ds.records()[2].user, "b");
    ASSERT_EQ(ds.towers().size(), 2u);
}

TEST(Csv, QuotingRoundTrip) {
    Table t{{"a", "b"}};
    t.add({"plain", "with,comma"});
    t.add({"quote\"d", "line\nbreak"});
    t.add({"", "x"});
    auto bytes = csv::serialize(t);
    EXPECT_EQ(csv::parse(bytes), t);
    EXPECT_THROW(t.add({"one"}), DataError);
    EXPECT_THROW((void)t.column("missing"), DataError);
}
