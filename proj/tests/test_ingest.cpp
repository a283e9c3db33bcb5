#include "cdrx/ingest.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace cdrx;

namespace {

ObservationWindow paper_window() { return ObservationWindow::days_from(*Date::from_ymd(2012, 6, 19), 30); }

ParseResult parse(const std::string& body, ParseOptions opt = {}) {
    std::istringstream in("user_id,date,time,duration,lat,lon\n" + body);
    return parse_cdr_stream(in, paper_window(), opt);
}

} // namespace

TEST(Ingest, AcceptsWellFormedLines) {
    auto r = parse("u1,2012-06-19,08:00:00,60,23.7,90.4\nu2,2012-07-18,23:59:59,0,23.8,90.41\n");
    EXPECT_TRUE(r.rejected.empty());
    ASSERT_EQ(r.dataset.size(), 2u);
    EXPECT_EQ(r.dataset.towers().size(), 2u);
}

TEST(Ingest, ReportsEveryBadLineWithItsNumber) {
    auto r = parse("u1,2012-06-19,08:00:00,60,23.7,90.4\n"
                   "u1,2012-07-20,08:00:00,60,23.7,90.4\n"
                   "u1,2012-06-19,25:00:00,60,23.7,90.4\n"
                   "u1,2012-06-19,08:00:00,abc,23.7,90.4\n"
                   "u1,2012-06-19,08:00:00,60,23.7\n"
                   ",2012-06-19,08:00:00,60,23.7,90.4\n"
                   "\n"
                   "u1,2012-06-19,08:00:00,60,23.7,190\n");
    ASSERT_EQ(r.rejected.size(), 6u);
    EXPECT_EQ(r.rejected[0], (Rejection{3, "instant outside window"}));
    EXPECT_EQ(r.rejected[1], (Rejection{4, "invalid time"}));
    EXPECT_EQ(r.rejected[2], (Rejection{5, "invalid duration"}));
    EXPECT_EQ(r.rejected[3].line, 6u);
    EXPECT_EQ(r.rejected[4], (Rejection{7, "empty user id"}));
    EXPECT_EQ(r.rejected[5], (Rejection{9, "longitude out of range"}));
    EXPECT_EQ(r.dataset.size(), 1u);
}

TEST(Ingest, DuplicatesKeptUnlessDedup) {
    std::string line = "u1,2012-06-19,08:00:00,60,23.7,90.4\n";
    EXPECT_EQ(parse(line + line).dataset.size(), 2u);
    ParseOptions opt;
    opt.dedup = true;
    EXPECT_EQ(parse(line + line, opt).dataset.size(), 1u);
}

TEST(Ingest, HeaderIsRequired) {
    std::istringstream empty("");
    EXPECT_THROW(parse_cdr_stream(empty, paper_window()), DataError);
    std::istringstream wrong("user,date\nu1,2012-06-19\n");
    EXPECT_THROW(parse_cdr_stream(wrong, paper_window()), DataError);
    std::istringstream bom("\xEF\xBB\xBFuser_id,date,time,duration,lat,lon\r\nu1,2012-06-19,08:00:00,1,1,1\r\n");
    EXPECT_EQ(parse_cdr_stream(bom, paper_window()).dataset.size(), 1u);
}

TEST(Ingest, MissingFileIsDataError) {
    EXPECT_THROW(parse_cdr_file("/nonexistent/cdr.csv", paper_window()), DataError);
}

TEST(Ingest, DatasetTableRoundTrip) {
    auto r = parse("u2,2012-06-20,10:00:00,5,23.7,90.4\nu1,2012-06-19,08:00:00,60,23.712345,90.400001\n");
    auto t = dataset_table(r.dataset);
    EXPECT_EQ(t.columns, cdr_columns());
    EXPECT_EQ(dataset_from_table(t, paper_window()), r.dataset);
}

TEST(UserLogs, GroupAndTally) {
    auto r = parse("u1,2012-06-19,09:00:00,60,1,1\n"
                   "u1,2012-06-19,08:00:00,30,1,1\n"
                   "u1,2012-06-19,10:00:00,10,2,2\n"
                   "u2,2012-06-19,10:00:00,10,2,2\n");
    auto logs = build_user_logs(r.dataset);
    ASSERT_EQ(logs.size(), 2u);
    EXPECT_EQ(logs[0].user, "u1");
    ASSERT_EQ(logs[0].entries.size(), 3u);
    EXPECT_EQ(logs[0].entries[0].duration, 30);
    EXPECT_EQ(logs[0].tallies.at(GeoPoint{1, 1}), (LocationTally{2, 90}));
    EXPECT_EQ(user_logs_table(logs).size(), 3u);
}
