#include "mob/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace mob {

bool BarrierSet::contains(const std::string& a, const std::string& b) const {
    const ZonePairKey key(a, b);
    for (const auto& f : flags)
        if (f.zone_i == key.a && f.zone_j == key.b) return true;
    return false;
}

ExcludedPairSet BarrierSet::pair_set() const {
    ExcludedPairSet out;
    out.reserve(flags.size() * 2);
    for (const auto& f : flags) out.insert(ZonePairKey(f.zone_i, f.zone_j));
    return out;
}

int bin_of_distance(double d_phys_km) {
    return static_cast<int>(std::ceil(d_phys_km));
}

ResidualModel fit_residual_model(const std::vector<PairDistance>& pairs) {
    const size_t n = pairs.size();
    if (n < 3) throw NumericError("residual model needs >= 3 pairs, got " + std::to_string(n));
    double mx = 0.0, my = 0.0;
    for (const auto& p : pairs) {
        if (!(p.d_phys_km > 0.0))
            throw NumericError("residual model requires d_phys > 0 (pair " + p.zone_i + "," +
                               p.zone_j + ")");
        mx += std::log(p.d_phys_km);
        my += p.d_embed;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pairs) {
        const double dx = std::log(p.d_phys_km) - mx;
        sxx += dx * dx;
        sxy += dx * (p.d_embed - my);
    }
    if (sxx <= 0.0) throw NumericError("residual model: zero variance in log distance");

    ResidualModel m;
    m.beta = sxy / sxx;
    m.intercept = my - m.beta * mx;
    m.residuals.resize(n);
    for (size_t i = 0; i < n; ++i)
        m.residuals[i] =
            pairs[i].d_embed - (m.intercept + m.beta * std::log(pairs[i].d_phys_km));
    return m;
}

BarrierSet detect_barriers(std::vector<PairDistance> pairs, const ExcludedPairSet& excluded,
                           double q, BarrierMode mode) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("flag fraction q must be in (0, 1]");

    // Pruned pairs never enter the fit or the ranking.
    std::erase_if(pairs, [&](const PairDistance& p) {
        return excluded.count(ZonePairKey(p.zone_i, p.zone_j)) > 0;
    });
    const ResidualModel model = fit_residual_model(pairs);

    struct Entry {
        const PairDistance* pair;
        double residual;
    };
    std::map<int, std::vector<Entry>> bins;
    for (size_t i = 0; i < pairs.size(); ++i)
        bins[bin_of_distance(pairs[i].d_phys_km)].push_back({&pairs[i], model.residuals[i]});

    BarrierSet out;
    out.mode = mode;
    out.q = q;
    for (auto& [bin, entries] : bins) {
        if (entries.empty()) {
            out.skipped_bins.push_back(bin);
            continue;
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.residual != b.residual) return a.residual > b.residual;
            if (a.pair->zone_i != b.pair->zone_i) return a.pair->zone_i < b.pair->zone_i;
            return a.pair->zone_j < b.pair->zone_j;
        });
        const size_t take = static_cast<size_t>(
            std::ceil(q * static_cast<double>(entries.size())));
        for (size_t r = 0; r < take && r < entries.size(); ++r) {
            BarrierFlag f;
            f.zone_i = entries[r].pair->zone_i;
            f.zone_j = entries[r].pair->zone_j;
            f.d_phys_km = entries[r].pair->d_phys_km;
            f.d_embed = entries[r].pair->d_embed;
            f.residual = entries[r].residual;
            f.bin_index = bin;
            f.rank = static_cast<int>(r + 1);
            out.flags.push_back(std::move(f));
        }
    }
    return out;
}

void write_barriers_csv(const std::filesystem::path& path, const BarrierSet& set) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(set.flags.size());
    const char* mode = set.mode == BarrierMode::main ? "main" : "soft";
    for (const auto& f : set.flags)
        rows.push_back({f.zone_i, f.zone_j, format_double(f.d_phys_km), format_double(f.d_embed),
                        format_double(f.residual), std::to_string(f.bin_index),
                        std::to_string(f.rank), mode});
    write_csv(path, {"zone_i", "zone_j", "d_phys_km", "d_embed", "residual", "bin", "rank",
                     "mode"},
              rows);
}

BarrierSet read_barriers_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int ci = t.require_col("zone_i"), cj = t.require_col("zone_j");
    const int cd = t.require_col("d_phys_km"), ce = t.require_col("d_embed");
    const int cr = t.require_col("residual"), cb = t.require_col("bin");
    const int ck = t.require_col("rank"), cm = t.require_col("mode");
    BarrierSet out;
    for (const auto& r : t.rows) {
        BarrierFlag f;
        f.zone_i = r[ci];
        f.zone_j = r[cj];
        f.d_phys_km = std::stod(r[cd]);
        f.d_embed = std::stod(r[ce]);
        f.residual = std::stod(r[cr]);
        f.bin_index = std::stoi(r[cb]);
        f.rank = std::stoi(r[ck]);
        out.flags.push_back(std::move(f));
        out.mode = r[cm] == "soft" ? BarrierMode::soft : BarrierMode::main;
    }
    return out;
}

}  // namespace mob
