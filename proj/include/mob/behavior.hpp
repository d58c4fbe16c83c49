#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mob/barriers.hpp"
#include "mob/ingest.hpp"

namespace mob {

struct Movement {
    std::string user_id;
    std::string origin_zone, dest_zone;
    int64_t depart_t = 0;  // end of the origin visit
    int64_t arrive_t = 0;  // start of the destination visit
    std::optional<int32_t> utc_offset_s;
    std::optional<std::string> dest_poi;
    std::optional<std::string> dest_category;
    bool cross = false;
};

struct UserCbr {
    std::string user_id;
    std::string home_zone;
    int64_t n_cross = 0;
    int64_t n_within = 0;
    double ratio = 0.0;  // n_cross / (n_cross + n_within)
};

// Optional destination attribution for a token, keyed (trajectory index,
// token index).
struct TokenAttribution {
    std::map<std::pair<size_t, size_t>, std::pair<std::string, std::string>> by_token;
};

// Attributes every token to its nearest POI within max_distance_m.
TokenAttribution attribute_trajectories(const std::vector<Trajectory>& trajs,
                                        const std::vector<Poi>& pois, double max_distance_m);

// Each consecutive distinct-zone token pair inside a day segment becomes a
// movement; cross = unordered pair in the soft barrier set.
std::vector<Movement> classify_movements(const std::vector<Trajectory>& trajs,
                                         const BarrierSet& soft_barriers,
                                         const TokenAttribution& attribution);

// Per-user cross-barrier ratios; users without movements are omitted.
std::vector<UserCbr> cbr(const std::vector<Movement>& movements,
                         const std::map<std::string, std::string>& home_zones);

struct ActivitySummaries {
    // Hour-of-day histograms (local time) for cross and within movements.
    std::array<int64_t, 24> hourly_cross{};
    std::array<int64_t, 24> hourly_within{};
    // Per-category visit shares and percentage difference
    // 100 * (share_cross - share_within) / share_within.
    struct CategoryRow {
        std::string category;
        double share_cross = 0.0;
        double share_within = 0.0;
        std::optional<double> pct_difference;  // empty when share_within == 0
    };
    std::vector<CategoryRow> categories;
    int64_t movements_without_category = 0;
    // Share of movements landing on a POI the user had never visited before.
    double exploration_rate_cross = 0.0;
    double exploration_rate_within = 0.0;
    int64_t explored_denominator_cross = 0;
    int64_t explored_denominator_within = 0;
};

// Movements must carry a real UTC offset (the hourly histogram refuses to
// guess time zones); category/exploration parts use attributed movements.
ActivitySummaries activity_summaries(const std::vector<Movement>& movements);

void write_movements_csv(const std::filesystem::path& path, const std::vector<Movement>& moves);
void write_cbr_csv(const std::filesystem::path& path, const std::vector<UserCbr>& rows);
std::vector<UserCbr> read_cbr_csv(const std::filesystem::path& path);
void write_summaries(const std::filesystem::path& hourly_path,
                     const std::filesystem::path& categories_path,
                     const std::filesystem::path& exploration_path,
                     const ActivitySummaries& s);

}  // namespace mob
