#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mob/ingest.hpp"
#include "mob/rng.hpp"
#include "oracles.hpp"

using namespace mob;

namespace {

Stay mk(const std::string& user, int64_t t0, int64_t t1, double lat, double lon,
        const std::string& zone) {
    Stay s;
    s.user_id = user;
    s.t_start = t0;
    s.t_end = t1;
    s.lat = lat;
    s.lon = lon;
    s.zone_id = zone;
    return s;
}

// Five stays spread over one day, spaced well apart, gaps under an hour.
std::vector<Stay> five_clean_stays(const std::string& user, int64_t day0 = 0) {
    std::vector<Stay> v;
    for (int i = 0; i < 5; ++i)
        v.push_back(mk(user, day0 + 3600 * i, day0 + 3600 * i + 600, 42.0 + 0.01 * i, -71.0,
                       "Z" + std::to_string(i)));
    return v;
}

}  // namespace

TEST_CASE("user with fewer than five stays is dropped") {
    IngestConfig cfg;
    IngestReport rep;
    std::vector<Stay> stays(five_clean_stays("keep"));
    auto four = five_clean_stays("drop");
    four.pop_back();
    stays.insert(stays.end(), four.begin(), four.end());
    auto trajs = build_trajectories(stays, cfg, rep);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].user_id == "keep");
    CHECK(rep.users_in == 2);
    CHECK(rep.users_kept == 1);
}

TEST_CASE("consecutive stays 10 m apart merge into one token") {
    IngestConfig cfg;
    IngestReport rep;
    auto stays = five_clean_stays("u");
    // Append a sixth stay 10 m from the fifth (1e-4 deg lat ~ 11 m).
    Stay close = stays.back();
    close.t_start = stays.back().t_end + 60;
    close.t_end = close.t_start + 600;
    close.lat += 0.9e-4;
    close.zone_id = "Zother";
    stays.push_back(close);
    auto trajs = build_trajectories(stays, cfg, rep);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].tokens.size() == 5);
    const Token& merged = trajs[0].tokens.back();
    CHECK(merged.n_stays == 2);
    CHECK(merged.zone_id == "Z4");  // first stay's zone wins
    CHECK(merged.t_end == close.t_end);
}

TEST_CASE("empty input gives empty output and a zero-count report") {
    IngestConfig cfg;
    IngestReport rep;
    auto trajs = build_trajectories({}, cfg, rep);
    CHECK(trajs.empty());
    CHECK(rep.input_records == 0);
    CHECK(rep.rejected_total() == 0);
    CHECK(rep.stays_kept == 0);
    CHECK(rep.stays_pruned == 0);
}

TEST_CASE("day segment with a gap above one hour is dropped whole") {
    IngestConfig cfg;
    IngestReport rep;
    auto stays = five_clean_stays("u");                  // day 0, kept
    auto gappy = five_clean_stays("u", 86400);           // day 1
    gappy[3].t_start += 3000;                            // gap 3600+3000-600 > 3600
    gappy[3].t_end += 3000;
    gappy[4].t_start += 3000;
    gappy[4].t_end += 3000;
    stays.insert(stays.end(), gappy.begin(), gappy.end());
    auto trajs = build_trajectories(stays, cfg, rep);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].segments.size() == 1);
    CHECK(trajs[0].tokens.size() == 5);
    CHECK(rep.stays_pruned == 5);
}

TEST_CASE("days with a single stay are dropped") {
    IngestConfig cfg;
    IngestReport rep;
    auto stays = five_clean_stays("u");
    stays.push_back(mk("u", 86400 + 100, 86400 + 700, 42.5, -71.5, "Z9"));  // lone stay next day
    auto trajs = build_trajectories(stays, cfg, rep);
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].tokens.size() == 5);
    CHECK(rep.stays_pruned == 1);
}

TEST_CASE("malformed records are rejected with reasons and counts reconcile") {
    IngestConfig cfg;
    IngestReport rep;
    auto stays = five_clean_stays("u");
    Stay bad_time = stays[0];
    bad_time.t_end = bad_time.t_start - 1;
    Stay bad_coord = stays[0];
    bad_coord.lat = 2000.0;
    Stay no_zone = stays[0];
    no_zone.zone_id.clear();
    stays.push_back(bad_time);
    stays.push_back(bad_coord);
    stays.push_back(no_zone);
    auto trajs = build_trajectories(stays, cfg, rep);
    CHECK(rep.rejected_bad_time == 1);
    CHECK(rep.rejected_bad_coord == 1);
    CHECK(rep.rejected_no_zone == 1);
    CHECK(rep.stays_kept + rep.stays_pruned + rep.rejected_total() == rep.input_records);
    REQUIRE(trajs.size() == 1);
}

TEST_CASE("build_trajectories is idempotent on its own output") {
    Rng rng(99);
    std::vector<Stay> stays;
    for (int u = 0; u < 30; ++u) {
        int64_t t = static_cast<int64_t>(rng.next_below(3600));
        for (int day = 0; day < 4; ++day) {
            int64_t tick = day * 86400 + t;
            const int n = 1 + static_cast<int>(rng.next_below(8));
            for (int k = 0; k < n; ++k) {
                const double lat = 42.0 + rng.uniform(0, 0.05);
                const double lon = -71.0 + rng.uniform(0, 0.05);
                const int64_t dur = 300 + static_cast<int64_t>(rng.next_below(1200));
                // Occasional oversized gap to exercise the gap rule.
                tick += 60 + static_cast<int64_t>(rng.next_below(rng.next_double() < 0.15 ? 7000 : 3000));
                stays.push_back(mk("u" + std::to_string(u), tick, tick + dur, lat, lon,
                                   "Z" + std::to_string(rng.next_below(6))));
                tick += dur;
            }
        }
    }
    IngestConfig cfg;
    IngestReport rep1, rep2;
    auto pass1 = build_trajectories(stays, cfg, rep1);
    auto pass2 = build_trajectories(trajectories_to_stays(pass1), cfg, rep2);
    REQUIRE(pass1.size() == pass2.size());
    for (size_t i = 0; i < pass1.size(); ++i) {
        CHECK(pass1[i].user_id == pass2[i].user_id);
        REQUIRE(pass1[i].tokens.size() == pass2[i].tokens.size());
        CHECK(pass1[i].segments == pass2[i].segments);
        for (size_t k = 0; k < pass1[i].tokens.size(); ++k) {
            CHECK(pass1[i].tokens[k].zone_id == pass2[i].tokens[k].zone_id);
            CHECK(pass1[i].tokens[k].t_start == pass2[i].tokens[k].t_start);
            CHECK(pass1[i].tokens[k].t_end == pass2[i].tokens[k].t_end);
        }
    }
    CHECK(rep2.stays_pruned == 0);  // nothing left to remove on the second pass
    CHECK(oracle::audit_trajectories(pass1, cfg).empty());
}

TEST_CASE("prune_flows removes the dominant airport pair and records it") {
    IngestConfig cfg;
    cfg.flow_quantile_lo = 0.0;  // prune only the top tail here
    cfg.flow_quantile_hi = 0.8;
    IngestReport rep;
    std::vector<Stay> stays;
    // 30 users shuttle airport<->hub all day; 10 users walk distinct paths.
    for (int u = 0; u < 30; ++u)
        for (int k = 0; k < 6; ++k)
            stays.push_back(mk("a" + std::to_string(u), 1000 * k, 1000 * k + 500, 42.0 + 0.01 * (k % 2),
                               -71.0, k % 2 ? "AIR" : "HUB"));
    const char* zones[] = {"Z1", "Z2", "Z3", "Z4", "Z5", "Z6"};
    for (int u = 0; u < 10; ++u)
        for (int k = 0; k < 6; ++k)
            stays.push_back(mk("w" + std::to_string(u), 1000 * k, 1000 * k + 500,
                               42.0 + 0.01 * ((k + u) % 6), -71.0, zones[(k + u) % 6]));
    auto trajs = build_trajectories(stays, cfg, rep);
    auto pruned = prune_flows(std::move(trajs), cfg, rep);
    CHECK(pruned.excluded_pairs.count(ZonePairKey("AIR", "HUB")) == 1);
    for (const auto& t : pruned.trajectories)
        for (const auto& tok : t.tokens) CHECK(tok.zone_id != "AIR");
}

TEST_CASE("uniform flows prune nothing") {
    IngestConfig cfg;
    IngestReport rep;
    std::vector<Stay> stays;
    for (int u = 0; u < 8; ++u)
        for (int k = 0; k < 6; ++k)
            stays.push_back(mk("u" + std::to_string(u), 1000 * k, 1000 * k + 500,
                               42.0 + 0.01 * (k % 2), -71.0 + 0.01 * u, k % 2 ? "B" + std::to_string(u) : "A" + std::to_string(u)));
    auto trajs = build_trajectories(stays, cfg, rep);
    const int64_t tokens_before = rep.stays_kept;
    auto pruned = prune_flows(std::move(trajs), cfg, rep);
    CHECK(pruned.excluded_pairs.empty());
    CHECK(rep.flow_segments_removed == 0);
    CHECK(rep.stays_kept == tokens_before);
}

TEST_CASE("pruned mass equals the histogram mass outside the band") {
    // Corpus with a known flow histogram: pair P_k appears with flow k+1.
    IngestConfig cfg;
    cfg.flow_quantile_lo = 0.25;
    cfg.flow_quantile_hi = 0.75;
    IngestReport rep;
    std::vector<Stay> stays;
    int uid = 0;
    for (int k = 0; k < 12; ++k) {
        // Each user contributes one transition on pair k (2 stays, same day),
        // so pair k's flow equals k+1.
        for (int rep_i = 0; rep_i <= k; ++rep_i) {
            const std::string user = "u" + std::to_string(uid++);
            // Five stays so the user survives; three dummies in a private zone
            // pair plus the two stays forming the measured transition.
            for (int d = 0; d < 5; ++d) {
                const bool measured = d >= 3;
                std::string zone = measured ? (d == 3 ? "K" + std::to_string(k) : "L" + std::to_string(k))
                                            : "OWN" + std::to_string(uid);
                stays.push_back(mk(user, 86400LL * (d >= 3) + 1000 * d, 86400LL * (d >= 3) + 1000 * d + 400,
                                   42.0 + 0.01 * d + 0.05 * (d >= 3 ? k : uid), -71.0, zone));
            }
        }
    }
    auto trajs = build_trajectories(stays, cfg, rep);
    const auto flows = oracle::flow_histogram(trajs);

    // Nearest-rank band over the multiset of per-pair flows.
    std::vector<int64_t> counts;
    for (const auto& [_, c] : flows) counts.push_back(c);
    std::sort(counts.begin(), counts.end());
    auto rank_val = [&](double q) {
        size_t r = static_cast<size_t>(std::ceil(q * counts.size()));
        if (r < 1) r = 1;
        return counts[std::min(r, counts.size()) - 1];
    };
    const int64_t lo = rank_val(cfg.flow_quantile_lo), hi = rank_val(cfg.flow_quantile_hi);

    int64_t expect_excluded = 0;
    for (const auto& [pair, c] : flows)
        if (c < lo || c > hi) ++expect_excluded;

    auto pruned = prune_flows(std::move(trajs), cfg, rep);
    CHECK(static_cast<int64_t>(pruned.excluded_pairs.size()) == expect_excluded);
    CHECK(rep.flow_lo == static_cast<double>(lo));
    CHECK(rep.flow_hi == static_cast<double>(hi));
    // Removal-only: every surviving transition existed before.
    const auto flows_after = oracle::flow_histogram(pruned.trajectories);
    for (const auto& [pair, c] : flows_after) {
        REQUIRE(flows.count(pair) == 1);
        CHECK(c <= flows.at(pair));
    }
}

TEST_CASE("prune_flows with a degenerate corpus is a configuration error") {
    IngestConfig cfg;
    IngestReport rep;
    auto stays = five_clean_stays("u");
    for (auto& s : stays) s.zone_id = "SAME";
    auto trajs = build_trajectories(stays, cfg, rep);
    CHECK_THROWS_AS(prune_flows(std::move(trajs), cfg, rep), ConfigError);
}

TEST_CASE("attribute_stays picks the nearer poi under the cap") {
    std::vector<Poi> pois = {{"near", {42.0002, -71.0}, "Food"},     // ~22 m north
                             {"far", {42.0007, -71.0}, "Food"},      // ~78 m north
                             {"outside", {42.01, -71.0}, "Food"}};
    std::vector<Stay> stays = {mk("u", 0, 1, 42.0, -71.0, "Z")};
    auto hits = attribute_stays(stays, pois, 100.0);
    REQUIRE(hits[0].has_value());
    CHECK(pois[*hits[0]].poi_id == "near");

    stays[0].lat = 42.1;  // over 100 m from everything
    hits = attribute_stays(stays, pois, 100.0);
    CHECK_FALSE(hits[0].has_value());

    // Coincident point attaches at distance zero; ties break by lowest id.
    std::vector<Poi> tied = {{"b", {42.0, -71.0}, "Food"}, {"a", {42.0, -71.0}, "Food"}};
    stays[0].lat = 42.0;
    hits = attribute_stays(stays, tied, 100.0);
    REQUIRE(hits[0].has_value());
    CHECK(tied[*hits[0]].poi_id == "a");
}

TEST_CASE("assign_zones locates stays by point in polygon") {
    ZoneMap zm;
    ZoneShape z1, z2;
    z1.parts.push_back(Ring{{40.0, -75.0}, {40.0, -74.99}, {40.01, -74.99}, {40.01, -75.0}});
    z1.centroid = polygon_centroid(z1.parts);
    z2.parts.push_back(Ring{{40.0, -74.99}, {40.0, -74.98}, {40.01, -74.98}, {40.01, -74.99}});
    z2.centroid = polygon_centroid(z2.parts);
    zm.zones.emplace("west", std::move(z1));
    zm.zones.emplace("east", std::move(z2));

    std::vector<Stay> stays = {mk("u", 0, 1, 40.005, -74.995, ""),
                               mk("u", 2, 3, 40.005, -74.985, ""),
                               mk("u", 4, 5, 41.0, -74.995, "")};
    assign_zones(stays, zm);
    CHECK(stays[0].zone_id == "west");
    CHECK(stays[1].zone_id == "east");
    CHECK(stays[2].zone_id.empty());
}
