#include "poolgaze/error.hpp"
#include "poolgaze/panoramic.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace poolgaze;
using namespace poolgaze::testing;

namespace {

std::vector<std::string> names(const PanoramicResult& r) {
    std::vector<std::string> out;
    for (const auto& m : r.machines) {
        out.push_back(m.status->info.machine);
    }
    return out;
}

PoolSnapshot small_pool() {
    const auto t = at("2014-06-02T10:00:00Z");
    PoolSnapshot snap;
    snap.taken_at = t;
    MachineStatus a{machine_info("a", 2, 4000), {job_obs("a", 1, t, JobPhase::Running, "1.0", "alice"), idle_obs("a", 2, t)}, {600, 0}};
    MachineStatus b{machine_info("b", 2, 9000), {job_obs("b", 1, t, JobPhase::Running, "2.0", "bob"), job_obs("b", 2, t, JobPhase::Suspended, "3.0", "alice")}, {0, 300}};
    MachineStatus c{machine_info("c", 1, 100), {}, {}};
    c.info.reachable = false;
    b.info.load_avg_total = Load::from_hundredths(300);
    b.info.load_avg_condor = Load::from_hundredths(200);
    snap.machines = {a, b, c};
    return snap;
}

} // namespace

TEST(Query, DefaultsShowEverything) {
    const PanoramicQuery q;
    EXPECT_TRUE(q.show_machines && q.show_queue && q.show_charts);
    EXPECT_EQ(q.fields.size(), 10U);
    EXPECT_EQ(q.charts.size(), kChartCount);
    EXPECT_EQ(q.refresh_s, 30);
    const auto snap = small_pool();
    const auto r = apply_query(snap, q);
    EXPECT_EQ(r.machines.size(), r.machines_total);
    EXPECT_EQ(r.slots_shown, r.slots_total);
    EXPECT_EQ(names(r), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Query, ParseRejectsUnknownAndBadValues) {
    EXPECT_THROW(PanoramicQuery::parse({{"colour", "red"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"memory_mb", "10:5"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"memory_mb", "abc"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"memory_mb", "5"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"state", "Claimed,Bogus"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"sort", "colour"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"charts", "pie-of-pies"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"refresh_s", "0"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"owner", "a"}, {"owner", "b"}}), InvalidValue);
    EXPECT_THROW(PanoramicQuery::parse({{"show", "machines,maps"}}), InvalidValue);
}

TEST(Query, ParseOpenRanges) {
    const auto q = PanoramicQuery::parse({{"memory_mb", "1024:"}, {"load_avg_total", ":1.5"}, {"slot_count", "2:4"}});
    EXPECT_EQ(q.memory_mb, (Range{1024.0, std::nullopt}));
    EXPECT_EQ(q.load_avg_total, (Range{std::nullopt, 1.5}));
    EXPECT_EQ(q.slot_count, (Range{2.0, 4.0}));
}

TEST(Query, ShowFlagsSelectGroups) {
    const auto q = PanoramicQuery::parse({{"show", "machines"}});
    EXPECT_TRUE(q.show_machines);
    EXPECT_FALSE(q.show_queue);
    EXPECT_FALSE(q.show_charts);
}

TEST(Filters, ClaimedByAlice) {
    const auto snap = small_pool();
    const auto r = apply_query(snap, PanoramicQuery::parse({{"state", "Claimed"}, {"owner", "alice"}}));
    EXPECT_EQ(names(r), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(r.slots_shown, 2U);
    ASSERT_EQ(r.machines[1].slots.size(), 1U);
    EXPECT_EQ(r.machines[1].slots[0], 1U);
}

TEST(Filters, DownMachinesFailAttributeFilters) {
    const auto snap = small_pool();
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"reachable", "down"}}))), std::vector<std::string>{"c"});
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"disk_mb_free", ":100000"}}))),
              (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"slot_count", "1:1"}}))), std::vector<std::string>{"c"});
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"time_in_state_s", "300:"}}))),
              (std::vector<std::string>{"a", "b"}));
}

TEST(Filters, DiskAlertThreshold) {
    const auto snap = small_pool();
    const auto r = apply_query(snap, PanoramicQuery::parse({{"disk_alert_mb", "5000"}}));
    EXPECT_TRUE(r.machines[0].disk_alert);  // 4000 MB free
    EXPECT_FALSE(r.machines[1].disk_alert); // 9000 MB free
    EXPECT_FALSE(r.machines[2].disk_alert); // down, nothing reported
}

TEST(Sorting, MissingValuesLastTiesByName) {
    const auto snap = small_pool();
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"sort", "load"}, {"order", "desc"}}))),
              (std::vector<std::string>{"b", "a", "c"}));
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"sort", "free-disk"}}))),
              (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"sort", "slot-count"}}))),
              (std::vector<std::string>{"c", "a", "b"}));
    EXPECT_EQ(names(apply_query(snap, PanoramicQuery::parse({{"sort", "name"}, {"order", "desc"}}))),
              (std::vector<std::string>{"c", "b", "a"}));
}

TEST(Filters, AgreeWithBruteForceOnRandomSnapshots) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 3000; ++i) {
        const auto snap = random_snapshot(rng, at("2014-06-02T10:00:00Z"));
        const auto params = random_query(rng, snap);
        const auto r = apply_query(snap, PanoramicQuery::parse(params));
        auto got = names(r);
        std::sort(got.begin(), got.end());
        const auto expected = filter_oracle(snap, params);
        ASSERT_EQ(got, expected.machines) << i;
        ASSERT_EQ(r.slots_shown, expected.slots_shown) << i;
        ASSERT_EQ(r.machines_total, snap.machines.size());
    }
}

TEST(Charts, CatalogHasFifteenStableIds) {
    const auto& catalog = chart_catalog();
    std::set<std::string_view> ids;
    for (const auto& c : catalog) {
        ids.insert(c.id);
        EXPECT_TRUE(is_chart_id(c.id));
    }
    EXPECT_EQ(ids.size(), 15U);
    EXPECT_EQ(catalog.front().id, "slots-by-state");
    EXPECT_EQ(catalog.back().id, "last-execution-age-histogram");
}

TEST(Charts, EveryChartComputesOverSelection) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        const auto snap = random_snapshot(rng, at("2014-06-02T10:00:00Z"));
        const auto r = apply_query(snap, PanoramicQuery{});
        for (const auto& c : chart_catalog()) {
            const auto data = compute_chart(c.id, snap, r);
            EXPECT_EQ(data.spec.id, c.id);
            for (const auto& p : data.points) {
                EXPECT_GE(p.value, 0.0);
            }
        }
        const auto by_state = compute_chart("slots-by-state", snap, r);
        double total = 0;
        for (const auto& p : by_state.points) {
            total += p.value;
        }
        EXPECT_EQ(total, static_cast<double>(r.slots_shown));
        const auto up_down = compute_chart("machines-up-down", snap, r);
        EXPECT_EQ(up_down.points[0].value + up_down.points[1].value, static_cast<double>(r.machines.size()));
    }
    EXPECT_THROW(compute_chart("nope", PoolSnapshot{}, PanoramicResult{}), InvalidValue);
}
