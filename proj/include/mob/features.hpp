#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mob/barriers.hpp"
#include "mob/geom.hpp"
#include "mob/io.hpp"

namespace mob {

inline constexpr double kMaxPairKm = 20.0;

// Square root of the Jensen-Shannon divergence with base-2 logarithms, so
// values live in [0, 1]. Inputs must be equal-length normalized probability
// vectors.
double js_distance(const std::vector<double>& p, const std::vector<double>& q);

// Normalized category histogram of the POIs falling inside the zone polygon,
// over the fixed 20-name taxonomy. Zero-POI zones yield the uniform vector.
std::vector<double> poi_category_profile(const std::string& zone_id,
                                         const std::vector<Poi>& pois, const ZoneMap& zones);

// The regression unit: every predictor is symmetric under pair swap.
struct PairFeatureRow {
    std::string zone_i, zone_j;  // canonical order
    double d_phys_km = 0.0;
    double d_embed = 0.0;
    int bin_index = 0;
    int64_t poi_interv = 0;                          // hull count, excluded category removed
    std::vector<int64_t> poi_interv_by_cat;          // aligned with feature_categories()
    double poi_js = 0.0;
    std::array<int, 4> crossings{};                  // highway, railway, park, waterway
    double race_dist_js = 0.0;
    double income_diff = 0.0;
    double transit_diff = 0.0;
    int cross_county = 0;
    std::optional<int> label;
};

// Taxonomy minus the excluded category, in canonical order; these are the
// disaggregated intervening-opportunity columns.
const std::vector<std::string>& feature_categories();

struct AssembleResult {
    std::vector<PairFeatureRow> rows;
    int64_t dropped_missing_demo = 0;
};

// One row per unordered pair with d_phys <= 20 km. Pairs whose zones lack a
// demographic row are dropped and counted.
AssembleResult assemble_pair_features(const ZoneMap& zones, const std::vector<Poi>& pois,
                                      const std::vector<BarrierLayer>& layers,
                                      const std::vector<DemographicProfile>& demo,
                                      const std::vector<PairDistance>& pairs);

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<PairFeatureRow>& rows);
std::vector<PairFeatureRow> read_features_csv(const std::filesystem::path& path);

}  // namespace mob
