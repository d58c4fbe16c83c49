#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mob/geom.hpp"
#include "mob/io.hpp"

namespace mob {

struct IngestConfig {
    int min_stays_total = 5;      // drop users below this many kept tokens
    int min_stays_per_day = 2;    // drop day segments below this
    int64_t max_gap_s = 3600;     // drop day segments containing larger gaps
    double merge_radius_m = 50.0; // merge consecutive stays closer than this
    double flow_quantile_lo = 0.95;
    double flow_quantile_hi = 0.995;
    double poi_attach_max_m = 100.0;
    int64_t day_offset_s = 0;     // day boundaries are UTC unless offset set

    void validate() const;
};

// One corpus token: a (possibly merged) visit. Carries enough state to
// re-expand into stays, which keeps the pipeline auditable.
struct Token {
    std::string zone_id;
    int64_t t_start = 0;
    int64_t t_end = 0;
    double lat = 0.0;
    double lon = 0.0;
    int32_t n_stays = 1;  // raw stays merged into this token
    std::optional<int32_t> utc_offset_s;  // present only when the input carried it
};

struct Trajectory {
    std::string user_id;
    std::string home_zone;  // most frequent home assignment; may be empty
    std::vector<Token> tokens;
    // Day segments as half-open [begin, end) index ranges, chronological.
    std::vector<std::pair<uint32_t, uint32_t>> segments;
};

struct IngestReport {
    int64_t input_records = 0;
    int64_t rejected_bad_time = 0;
    int64_t rejected_bad_coord = 0;
    int64_t rejected_no_zone = 0;
    int64_t stays_kept = 0;    // constituents of surviving tokens
    int64_t stays_pruned = 0;  // dropped by day rules, user threshold, or flow band
    int64_t users_in = 0;
    int64_t users_kept = 0;
    // Flow-pruning stage:
    int64_t flow_segments_removed = 0;
    int64_t flow_stays_removed = 0;
    double flow_lo = 0.0;
    double flow_hi = 0.0;

    int64_t rejected_total() const {
        return rejected_bad_time + rejected_bad_coord + rejected_no_zone;
    }
    std::string to_json() const;
};

// Undirected zone pair with a canonical (sorted) order.
struct ZonePairKey {
    std::string a, b;
    ZonePairKey() = default;
    ZonePairKey(std::string x, std::string y) {
        if (x <= y) { a = std::move(x); b = std::move(y); }
        else        { a = std::move(y); b = std::move(x); }
    }
    bool operator==(const ZonePairKey& o) const { return a == o.a && b == o.b; }
    bool operator<(const ZonePairKey& o) const { return a < o.a || (a == o.a && b < o.b); }
};

struct ZonePairKeyHash {
    size_t operator()(const ZonePairKey& k) const {
        std::hash<std::string> h;
        return h(k.a) * 1000003u ^ h(k.b);
    }
};

using ExcludedPairSet = std::unordered_set<ZonePairKey, ZonePairKeyHash>;

// Assigns zone_id by point-in-polygon for stays lacking one. Stays outside
// every zone keep an empty zone_id (rejected later as NO_ZONE).
void assign_zones(std::vector<Stay>& stays, const ZoneMap& zones);

// Applies the four trajectory rules: spatial merging (within a day), gap and
// per-day-count filtering of day segments, and the per-user total threshold.
std::vector<Trajectory> build_trajectories(const std::vector<Stay>& stays,
                                           const IngestConfig& cfg, IngestReport& report);

struct PruneResult {
    std::vector<Trajectory> trajectories;
    ExcludedPairSet excluded_pairs;
};

// Removes whole day segments containing a transition whose undirected pair
// flow falls outside the [lo, hi] quantile band; records the out-of-band
// pairs for exclusion from barrier detection downstream.
PruneResult prune_flows(std::vector<Trajectory> trajs, const IngestConfig& cfg,
                        IngestReport& report);

// Nearest-POI index (or nullopt) per stay, constrained to max great-circle
// distance; ties broken by lowest poi_id.
std::vector<std::optional<size_t>> attribute_stays(const std::vector<Stay>& stays,
                                                   const std::vector<Poi>& pois,
                                                   double max_distance_m);

// Token-level variant used after merging.
std::vector<std::optional<size_t>> attribute_tokens(const std::vector<const Token*>& tokens,
                                                    const std::vector<Poi>& pois,
                                                    double max_distance_m);

// Re-expands trajectories into stay records (one per token). Used by the
// idempotence audit and to persist the cleaned corpus.
std::vector<Stay> trajectories_to_stays(const std::vector<Trajectory>& trajs);

void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

void write_excluded_pairs(const std::filesystem::path& path, const ExcludedPairSet& set);
ExcludedPairSet read_excluded_pairs(const std::filesystem::path& path);

}  // namespace mob
