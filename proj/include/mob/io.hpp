#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mob/geom.hpp"

namespace mob {

// Error taxonomy mapped onto CLI exit codes.
struct ConfigError : std::runtime_error {  // exit 2
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {  // exit 3
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {  // exit 4
    using std::runtime_error::runtime_error;
};

// The fixed 20-name venue taxonomy used by the POI inputs. "City / Outdoors"
// is the category excluded from intervening-opportunity counts.
inline constexpr std::array<std::string_view, 20> kPoiCategories = {
    "Arts / Museum", "Automotive", "Beauty / Wellness", "City / Outdoors",
    "College",       "Entertainment", "Finance",        "Food",
    "Government",    "Grocery",       "Health",         "Hotel / Lodging",
    "Industry",      "Nightlife",     "Office",         "Religion",
    "Service",       "Shopping",      "Sports",         "Transportation"};

inline constexpr std::string_view kExcludedPoiCategory = "City / Outdoors";

bool is_known_poi_category(const std::string& name);

// Minimal CSV support: comma-separated, double-quote escaping for fields
// containing commas/quotes/newlines. All project files use a header row.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;          // -1 when absent
    int require_col(const std::string& name) const;  // DataError when absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Raw stay record as parsed from the stays CSV; zone/home/offset columns
// are optional on input.
struct Stay {
    std::string user_id;
    int64_t t_start = 0;
    int64_t t_end = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::string zone_id;    // empty until zoned
    std::string home_zone;  // optional input column
    std::optional<int32_t> utc_offset_s;
};

struct StayParseResult {
    std::vector<Stay> stays;
    int64_t bad_time = 0;   // malformed or inverted timestamps
    int64_t bad_coord = 0;  // coordinates outside valid ranges
};

// Parses `user_id,t_start,t_end,lat,lon[,zone_id][,home_zone][,utc_offset_s]`.
// Malformed records are counted, not fatal.
StayParseResult read_stays_csv(const std::filesystem::path& path);
void write_stays_csv(const std::filesystem::path& path, const std::vector<Stay>& stays);

// `poi_id,lat,lon,category`; unknown category names are an ingest error.
std::vector<Poi> read_pois_csv(const std::filesystem::path& path);
void write_pois_csv(const std::filesystem::path& path, const std::vector<Poi>& pois);

struct DemographicProfile {
    std::string zone_id;
    std::vector<double> race_dist;
    double median_housing_value = 0.0;
    double transit_share = 0.0;
    double employed_ratio = 0.0;
    double poverty_ratio = 0.0;
    double racial_diversity = 0.0;
    double population = 0.0;
    std::string county_id;
};

// `zone_id,race_cat_1..race_cat_K,median_housing_value,transit_share,
//  employed_ratio,poverty_ratio,racial_diversity,population,county_id`
std::vector<DemographicProfile> read_demographics_csv(const std::filesystem::path& path);
void write_demographics_csv(const std::filesystem::path& path,
                            const std::vector<DemographicProfile>& rows);

// GeoJSON FeatureCollection loaders. Zones require a `zone_id` property
// (plus `county_id` when present); barrier layers require `kind`.
ZoneMap read_zones_geojson(const std::filesystem::path& path);
void write_zones_geojson(const std::filesystem::path& path, const ZoneMap& zones,
                         const std::vector<std::string>& order);
std::vector<BarrierLayer> read_barrier_layers_geojson(const std::filesystem::path& path);
void write_barrier_layers_geojson(const std::filesystem::path& path,
                                  const std::vector<BarrierLayer>& layers);

// SHA-256 hex digest of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const void* data, size_t len);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string format_double(double v);

}  // namespace mob
