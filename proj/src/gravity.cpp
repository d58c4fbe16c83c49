#include "mob/gravity.hpp"

#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace mob {

const char* to_string(GravityPredictor k) {
    return k == GravityPredictor::log_geo ? "log_geo" : "embed_cosine";
}

FlowMatrix aggregate_flows(const std::vector<Trajectory>& trajs) {
    FlowMatrix fm;
    std::map<std::string, std::set<std::string>> users_by_zone;
    for (const auto& traj : trajs) {
        for (const auto& [b, e] : traj.segments) {
            for (uint32_t i = b; i < e; ++i) {
                users_by_zone[traj.tokens[i].zone_id].insert(traj.user_id);
                if (i + 1 < e) {
                    const auto& za = traj.tokens[i].zone_id;
                    const auto& zb = traj.tokens[i + 1].zone_id;
                    if (za != zb) ++fm.counts[{za, zb}];
                }
            }
        }
    }
    for (const auto& [zone, users] : users_by_zone)
        fm.masses[zone] = static_cast<int64_t>(users.size());
    return fm;
}

GravityFit fit_normalized_flux(const std::vector<GravitySample>& samples,
                               GravityPredictor kind) {
    std::vector<double> x, y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.flow_sym <= 0) continue;
        if (s.mass_product <= 0.0)
            throw NumericError("nonpositive mass product for pair " + s.zone_i + "," + s.zone_j);
        x.push_back(s.predictor);
        y.push_back(std::log10(static_cast<double>(s.flow_sym) / s.mass_product));
    }
    const size_t n = x.size();
    if (n < 3) throw NumericError("gravity fit needs >= 3 nonzero-flow pairs, got " +
                                  std::to_string(n));
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw NumericError("gravity fit: zero variance in predictor");

    GravityFit fit;
    fit.predictor_kind = kind;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ssr += r * r;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    fit.n = static_cast<int64_t>(n);
    return fit;
}

double r2_gap(const GravityFit& a, const GravityFit& b) {
    if (a.n != b.n)
        throw NumericError("r2_gap on fits with different sample counts: " +
                           std::to_string(a.n) + " vs " + std::to_string(b.n));
    return a.r2 - b.r2;
}

void write_flow_matrix(const std::filesystem::path& flows_path,
                       const std::filesystem::path& masses_path, const FlowMatrix& flows) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(flows.counts.size());
    for (const auto& [key, c] : flows.counts)
        rows.push_back({key.first, key.second, std::to_string(c)});
    write_csv(flows_path, {"zone_i", "zone_j", "count"}, rows);

    std::vector<std::vector<std::string>> mrows;
    mrows.reserve(flows.masses.size());
    for (const auto& [zone, m] : flows.masses) mrows.push_back({zone, std::to_string(m)});
    write_csv(masses_path, {"zone_id", "mass"}, mrows);
}

FlowMatrix read_flow_matrix(const std::filesystem::path& flows_path,
                            const std::filesystem::path& masses_path) {
    FlowMatrix fm;
    CsvTable t = read_csv(flows_path);
    const int ci = t.require_col("zone_i"), cj = t.require_col("zone_j"),
              cc = t.require_col("count");
    for (const auto& r : t.rows) fm.counts[{r[ci], r[cj]}] = std::stoll(r[cc]);
    CsvTable m = read_csv(masses_path);
    const int cz = m.require_col("zone_id"), cm = m.require_col("mass");
    for (const auto& r : m.rows) fm.masses[r[cz]] = std::stoll(r[cm]);
    return fm;
}

std::string gravity_fit_to_json(const GravityFit& fit) {
    json j = {{"kind", to_string(fit.predictor_kind)},
              {"slope", fit.slope},
              {"intercept", fit.intercept},
              {"r2", fit.r2},
              {"n", fit.n}};
    return j.dump(2);
}

}  // namespace mob
