#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mob/ingest.hpp"

namespace mob {

// One zone pair entering barrier detection. d_embed comes from the in-vector
// cosine distance; d_phys from centroid great-circle distance.
struct PairDistance {
    std::string zone_i, zone_j;  // canonical order (zone_i < zone_j)
    double d_phys_km = 0.0;
    double d_embed = 0.0;
};

struct ResidualModel {
    double beta = 0.0;       // slope on ln d_phys
    double intercept = 0.0;
    std::vector<double> residuals;  // aligned with the fitted pair list
};

enum class BarrierMode { main, soft };

struct BarrierFlag {
    std::string zone_i, zone_j;
    double d_phys_km = 0.0;
    double d_embed = 0.0;
    double residual = 0.0;
    int bin_index = 0;  // 1..20, bin b covers (b-1, b] km
    int rank = 0;       // 1 = largest residual within the bin
};

struct BarrierSet {
    BarrierMode mode = BarrierMode::main;
    double q = 0.05;
    std::vector<BarrierFlag> flags;
    std::vector<int> skipped_bins;  // empty bins noted, not fatal

    bool contains(const std::string& a, const std::string& b) const;

    // Hash-set view for bulk membership tests.
    ExcludedPairSet pair_set() const;
};

// OLS of d_embed on ln(d_phys) with intercept. Residuals are
// observed - predicted, aligned with the input order.
ResidualModel fit_residual_model(const std::vector<PairDistance>& pairs);

// Per 1 km bin, flags the top ceil(q * n_bin) residuals (ties broken by
// lexicographic pair id). Excluded pairs are removed before ranking. In soft
// mode the caller restricts `pairs` to nonzero-flow pairs and the model is
// refit on that subset here.
BarrierSet detect_barriers(std::vector<PairDistance> pairs, const ExcludedPairSet& excluded,
                           double q, BarrierMode mode);

int bin_of_distance(double d_phys_km);

void write_barriers_csv(const std::filesystem::path& path, const BarrierSet& set);
BarrierSet read_barriers_csv(const std::filesystem::path& path);

}  // namespace mob
