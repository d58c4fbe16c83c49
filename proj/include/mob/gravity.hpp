#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mob/ingest.hpp"

namespace mob {

struct FlowMatrix {
    // Directed transition counts T_ij, keyed (origin, destination).
    std::map<std::pair<std::string, std::string>, int64_t> counts;
    // m_i: distinct users observed at least once in zone i.
    std::map<std::string, int64_t> masses;

    int64_t directed(const std::string& from, const std::string& to) const {
        auto it = counts.find({from, to});
        return it == counts.end() ? 0 : it->second;
    }
    int64_t symmetric(const std::string& a, const std::string& b) const {
        return directed(a, b) + directed(b, a);
    }
    int64_t mass(const std::string& zone) const {
        auto it = masses.find(zone);
        return it == masses.end() ? 0 : it->second;
    }
};

enum class GravityPredictor { log_geo, embed_cosine };

const char* to_string(GravityPredictor k);

struct GravityFit {
    GravityPredictor predictor_kind = GravityPredictor::log_geo;
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    int64_t n = 0;
};

// T_ij from consecutive distinct-zone transitions inside day segments;
// m_i = distinct users with at least one token in zone i.
FlowMatrix aggregate_flows(const std::vector<Trajectory>& trajs);

struct GravitySample {
    std::string zone_i, zone_j;  // canonical order (zone_i < zone_j)
    double predictor = 0.0;      // log10 d_p (log_geo) or cosine distance (embed)
    int64_t flow_sym = 0;        // T_ij + T_ji
    double mass_product = 0.0;   // m_i * m_j
};

// OLS of log10(flow_sym / mass_product) on the predictor over nonzero-flow
// pairs. Zero predictor variance or n < 3 is a fit error.
GravityFit fit_normalized_flux(const std::vector<GravitySample>& samples,
                               GravityPredictor kind);

// r2_a - r2_b; requires fits over the same sample count.
double r2_gap(const GravityFit& a, const GravityFit& b);

// flows: `zone_i,zone_j,count` (directed); masses: `zone_id,mass`.
void write_flow_matrix(const std::filesystem::path& flows_path,
                       const std::filesystem::path& masses_path, const FlowMatrix& flows);
FlowMatrix read_flow_matrix(const std::filesystem::path& flows_path,
                            const std::filesystem::path& masses_path);
std::string gravity_fit_to_json(const GravityFit& fit);

}  // namespace mob
