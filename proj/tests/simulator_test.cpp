#include "poolgaze/error.hpp"
#include "poolgaze/record_format.hpp"
#include "poolgaze/simulator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <map>
#include <random>

using namespace poolgaze;
using namespace poolgaze::testing;
using namespace std::chrono;

namespace {

Scenario busy_scenario(std::uint64_t seed) {
    Scenario sc;
    sc.seed = seed;
    sc.machines = 5;
    sc.slots_per_machine = {4};
    sc.duration_s = 2 * kSecondsPerDay;
    sc.owner_rate_per_hour = 0.3;
    sc.restricted_fraction = 0.4;
    return sc;
}

} // namespace

TEST(Scenario, ParseRenderRoundTrip) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto sc = random_scenario(rng, 3);
        const auto again = parse_scenario(render_scenario(sc));
        EXPECT_EQ(render_scenario(again), render_scenario(sc));
        EXPECT_EQ(simulate(again), simulate(sc));
    }
}

TEST(Scenario, RejectsBadInput) {
    EXPECT_THROW(parse_scenario("color=blue\n"), InvalidScenario);
    EXPECT_THROW(parse_scenario("machines=0\n"), InvalidScenario);
    EXPECT_THROW(parse_scenario("job_rate_per_slot_hour=-1\n"), InvalidScenario);
    EXPECT_THROW(parse_scenario("interval_s=10\n"), InvalidScenario);
    EXPECT_THROW(parse_scenario("machines=3\nslots_per_machine=1,2\n"), InvalidScenario);
    EXPECT_NO_THROW(parse_scenario("# only a comment\n\nseed=5\n"));
}

TEST(Simulate, ZeroRatesLeaveEverySlotIdle) {
    Scenario sc;
    sc.job_rate_per_slot_hour = 0;
    sc.owner_rate_per_hour = 0;
    const auto gt = simulate(sc);
    EXPECT_TRUE(gt.jobs.empty());
    for (const auto& m : gt.machines) {
        EXPECT_TRUE(m.owner_sessions.empty());
        for (const auto& spans : m.slots) {
            ASSERT_EQ(spans.size(), 1U);
            EXPECT_EQ(spans[0].kind, SpanKind::Idle);
            EXPECT_EQ(spans[0].start, gt.start);
            EXPECT_EQ(spans[0].end, gt.end);
        }
    }
    const auto snap = parse_status_output(status_at(gt, gt.start + hours{5}).status_text, gt.start);
    for (const auto& m : snap.machines) {
        for (const auto& s : m.slots) {
            EXPECT_EQ(s.state, SlotState::Unclaimed);
            EXPECT_EQ(s.activity, SlotActivity::Idle);
        }
    }
}

TEST(Simulate, SameSeedSameTruthDifferentSeedDiffers) {
    EXPECT_EQ(simulate(busy_scenario(9)), simulate(busy_scenario(9)));
    EXPECT_EQ(render_ground_truth_json(simulate(busy_scenario(9))), render_ground_truth_json(simulate(busy_scenario(9))));
    EXPECT_FALSE(simulate(busy_scenario(9)) == simulate(busy_scenario(10)));
}

TEST(Simulate, FixedSeedIsStableAcrossBuilds) {
    // Pinned output of the documented generator for one small scenario.
    std::mt19937_64 reference;
    reference.discard(9999);
    ASSERT_EQ(reference(), 9981545732273789042ULL);

    Scenario sc;
    sc.seed = 1;
    sc.machines = 1;
    sc.slots_per_machine = {1};
    sc.duration_s = kSecondsPerDay;
    const auto gt = simulate(sc);
    const auto& info = gt.machines.at(0).info;
    EXPECT_EQ(info.os_name, "CentOS");
    EXPECT_EQ(info.os_version, "6.5");
    EXPECT_EQ(info.memory_mb_total, 1024);
    EXPECT_EQ(info.disk_mb_free_total, 127675);
    EXPECT_EQ(gt.machines[0].owner_sessions.size(), 4U);
    ASSERT_EQ(gt.jobs.size(), 6U);
    EXPECT_EQ(gt.jobs[0].job_id, "1000.0");
    EXPECT_EQ(gt.jobs[0].owner, "bob");
    EXPECT_EQ(format_instant(gt.jobs[0].start), "2014-06-02T00:01:14Z");
    EXPECT_EQ(format_instant(gt.jobs[0].end), "2014-06-02T01:06:56Z");
    EXPECT_EQ(gt.jobs[3].job_id, "1003.0");
    EXPECT_EQ(gt.jobs[3].owner, "alice");
    EXPECT_EQ(format_instant(gt.jobs[3].start), "2014-06-02T09:50:35Z");
    EXPECT_EQ(format_instant(gt.jobs[3].end), "2014-06-02T13:03:42Z");
    EXPECT_EQ(gt.jobs[3].segments.size(), 3U);
    EXPECT_EQ(format_instant(gt.jobs[5].end), "2014-06-03T00:00:00Z");
}

TEST(Simulate, WeekendOnlyMachineGetsNoWeekdayJobs) {
    Scenario sc;
    sc.machines = 3;
    sc.restricted_fraction = 1.0;
    sc.restriction = *ScheduleWindows::parse_spec("5:00:00-23:59;6:00:00-23:59");
    sc.start = date("2014-06-02"); // Monday
    sc.duration_s = 5 * kSecondsPerDay;
    sc.job_rate_per_slot_hour = 3.0;
    const auto gt = simulate(sc);
    EXPECT_TRUE(gt.jobs.empty());
    for (const auto& m : gt.machines) {
        EXPECT_EQ(m.info.restriction, sc.restriction);
    }
    sc.duration_s = 7 * kSecondsPerDay;
    const auto week = simulate(sc);
    EXPECT_FALSE(week.jobs.empty());
    for (const auto& j : week.jobs) {
        EXPECT_TRUE(schedule_allows(sc.restriction, j.start)) << format_instant(j.start);
    }
}

TEST(Simulate, SpansTileTheRunAndJobsAreValid) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto gt = simulate(busy_scenario(seed));
        for (const auto& m : gt.machines) {
            ASSERT_EQ(m.slots.size(), static_cast<std::size_t>(m.info.slot_count));
            for (const auto& spans : m.slots) {
                ASSERT_FALSE(spans.empty());
                EXPECT_EQ(spans.front().start, gt.start);
                EXPECT_EQ(spans.back().end, gt.end);
                for (std::size_t i = 0; i < spans.size(); ++i) {
                    EXPECT_LT(spans[i].start, spans[i].end);
                    if (i > 0) {
                        EXPECT_EQ(spans[i - 1].end, spans[i].start);
                    }
                    if (spans[i].kind == SpanKind::Job) {
                        const auto& job = gt.jobs.at(static_cast<std::size_t>(spans[i].job));
                        EXPECT_EQ(job.start, spans[i].start);
                        EXPECT_EQ(job.end, spans[i].end);
                        EXPECT_EQ(job.machine, m.info.machine);
                    }
                }
            }
        }
        for (std::size_t i = 0; i < gt.jobs.size(); ++i) {
            EXPECT_NO_THROW(gt.jobs[i].validate());
            EXPECT_EQ(gt.jobs[i].job_id, std::to_string(1000 + i) + ".0");
        }
    }
}

TEST(Simulate, OwnerSessionsPutSlotOneInOwnerState) {
    const auto gt = simulate(busy_scenario(3));
    int owner_spans = 0;
    for (const auto& m : gt.machines) {
        for (std::size_t k = 0; k < m.slots.size(); ++k) {
            for (const auto& s : m.slots[k]) {
                if (s.kind == SpanKind::Owner) {
                    ++owner_spans;
                    EXPECT_EQ(k, 0U);
                    const bool inside = std::any_of(m.owner_sessions.begin(), m.owner_sessions.end(), [&](const TimeSpan& o) {
                        return o.start <= s.start && s.end <= o.end;
                    });
                    EXPECT_TRUE(inside);
                }
            }
        }
    }
    EXPECT_GT(owner_spans, 0);
}

TEST(StatusAt, StartOfRunIsAllIdleWhenNoJobYet) {
    Scenario sc;
    sc.job_rate_per_slot_hour = 0.0001;
    sc.owner_rate_per_hour = 0;
    const auto gt = simulate(sc);
    const auto snap = parse_status_output(status_at(gt, gt.start).status_text, gt.start);
    ASSERT_EQ(snap.machines.size(), 4U);
    for (const auto& m : snap.machines) {
        for (const auto& s : m.slots) {
            EXPECT_EQ(s.state, SlotState::Unclaimed);
        }
    }
}

TEST(StatusAt, ParsedStatusEqualsTruthAtRandomInstants) {
    const auto gt = simulate(busy_scenario(21));
    std::mt19937_64 rng(21);
    for (int i = 0; i < 1000; ++i) {
        const auto t = gt.start + seconds{static_cast<Seconds>(rng() % static_cast<std::uint64_t>((gt.end - gt.start).count()))};
        const auto snap = parse_status_output(status_at(gt, t).status_text, t);
        ASSERT_EQ(snap.machines.size(), gt.machines.size());
        for (std::size_t m = 0; m < gt.machines.size(); ++m) {
            const auto& sim = gt.machines[m];
            const auto& got = snap.machines[m];
            ASSERT_EQ(got.info.machine, sim.info.machine);
            ASSERT_EQ(got.slots.size(), sim.slots.size());
            const auto expected = sample_truth(GroundTruth{gt.scenario, t, t + seconds{1}, {}, gt.jobs}, sim, 1);
            for (std::size_t k = 0; k < got.slots.size(); ++k) {
                EXPECT_EQ(got.slots[k].state, expected[k].state);
                EXPECT_EQ(got.slots[k].activity, expected[k].activity);
                EXPECT_EQ(got.slots[k].job_id, expected[k].job_id);
                EXPECT_EQ(got.slots[k].owner, expected[k].owner);
            }
        }
    }
}

TEST(StatusAt, QueueRunningCountsMatchInFlightJobs) {
    const auto gt = simulate(busy_scenario(4));
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto t = gt.start + seconds{static_cast<Seconds>(rng() % 172800)};
        const auto st = status_at(gt, t);
        const auto q = parse_queue_output(st.queue_text);
        const auto snap = parse_status_output(st.status_text, t);
        std::map<std::string, std::int64_t> in_flight;
        for (const auto& m : snap.machines) {
            for (const auto& s : m.slots) {
                if (s.owner) {
                    ++in_flight[*s.owner];
                }
            }
        }
        std::int64_t running = 0;
        for (const auto& row : q.rows) {
            EXPECT_EQ(row.running, in_flight[row.user]) << row.user;
            EXPECT_GE(row.idle, 0);
            EXPECT_LE(row.idle, 2 * gt.scenario.backlog_per_user);
            running += row.running;
        }
        EXPECT_EQ(q.totals.running, running);
        EXPECT_EQ(q.rows.size(), gt.scenario.users.size());
    }
}

TEST(StatusAt, MachineLineReflectsStaticAttributes) {
    const auto gt = simulate(busy_scenario(2));
    const auto t = gt.start + hours{7};
    const auto snap = parse_status_output(status_at(gt, t).status_text, t);
    for (std::size_t m = 0; m < gt.machines.size(); ++m) {
        const auto& a = gt.machines[m].info;
        const auto& b = snap.machines[m].info;
        EXPECT_EQ(a.os_name, b.os_name);
        EXPECT_EQ(a.memory_mb_total, b.memory_mb_total);
        EXPECT_EQ(a.disk_mb_free_total, b.disk_mb_free_total);
        EXPECT_LE(b.load_avg_condor.hundredths(), b.load_avg_total.hundredths() + 1);
    }
}

TEST(GroundTruthJson, ListsEveryJob) {
    const auto gt = simulate(busy_scenario(6));
    const auto doc = nlohmann::json::parse(render_ground_truth_json(gt));
    ASSERT_EQ(doc.at("jobs").size(), gt.jobs.size());
    EXPECT_EQ(doc.at("machines").size(), gt.machines.size());
    if (!gt.jobs.empty()) {
        EXPECT_EQ(doc["jobs"][0]["job_id"], gt.jobs[0].job_id);
        EXPECT_EQ(doc["jobs"][0]["start"], format_instant(gt.jobs[0].start));
    }
}
