#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mob/barriers.hpp"
#include "mob/geom.hpp"
#include "mob/ingest.hpp"
#include "mob/io.hpp"

namespace mob {

struct SynthConfig {
    int grid_side = 20;              // zones = grid_side^2 square cells
    double spacing_km = 1.0;
    double gravity_exponent = 1.8;   // decay of the planted flows
    double barrier_fraction = 0.02;  // share of eligible pairs planted as barriers
    double suppression = 0.1;        // multiplier on planted-pair flows, in (0,1)
    int users = 2000;
    int tokens_per_user = 1000;
    int tokens_per_day = 8;
    double stay_prob = 0.55;  // chance the next stay repeats the current zone
    double mass_sigma = 0.25;        // iid lognormal spread of zone masses
    int mass_centers = 3;            // Gaussian activity centers in the mass field
    double mass_center_amp = 2.0;    // log-amplitude of the strongest center
    double poi_mean_per_zone_cat = 1.0;
    int counties_x = 2;
    int counties_y = 2;
    int race_categories = 5;
    double physical_alignment = 0.5;  // walls that also get a physical layer
    double plant_max_km = 20.0;
    double wall_length_km = 5.0;  // barriers are wall segments; pairs crossing one are planted
    uint64_t seed = 12345;
    double base_lat = 40.0;
    double base_lon = -75.0;
    int32_t utc_offset_s = -18000;
    int64_t start_epoch = 1570233600;  // 2019-10-05 00:00 UTC

    void validate() const;
};

struct PlantedTruth {
    std::vector<std::string> zone_ids;  // row-major grid order
    std::vector<LatLon> centroids;
    std::vector<double> masses;
    std::vector<ZonePairKey> barrier_pairs;
    // Wall segments whose crossing pairs were planted (lat/lon endpoints).
    std::vector<std::array<LatLon, 2>> walls;
    double gravity_exponent = 0.0;
    double suppression = 0.0;

    bool planted(const std::string& a, const std::string& b) const;

    // T_ij = m_i m_j d_ij^-gamma * (s if planted), C = 1, i != j.
    double true_flow(size_t i, size_t j) const;
};

struct SynthCity {
    ZoneMap zones;
    std::vector<std::string> zone_order;
    std::vector<Poi> pois;
    std::vector<DemographicProfile> demographics;
    std::vector<BarrierLayer> layers;
    PlantedTruth truth;
};

// Square-cell grid city with county tiling, seeded POIs, demographics,
// planted barrier pairs, and physical layers aligned with a share of them.
SynthCity generate_city(const SynthConfig& cfg);

// First-order random walk per user with transition probabilities
// proportional to the planted flow rows; emits ingest-compatible stays.
std::vector<Stay> generate_trajectories(const SynthConfig& cfg, const SynthCity& city);

struct RecoveryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    int64_t flagged = 0;
    int64_t truth_eligible = 0;
    int64_t hits = 0;
};

// Precision/recall of the flagged set against the planted pairs, both
// restricted to the pairs that were eligible for flagging.
RecoveryMetrics evaluate_recovery(const BarrierSet& flagged, const PlantedTruth& truth,
                                  const ExcludedPairSet& eligible_pairs);

void write_truth_json(const std::filesystem::path& path, const PlantedTruth& truth);
PlantedTruth read_truth_json(const std::filesystem::path& path);

// Emits every pipeline input file plus truth.json and a manifest linking them.
void write_city(const std::filesystem::path& dir, const SynthConfig& cfg,
                const SynthCity& city, const std::vector<Stay>& stays);

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

}  // namespace mob
