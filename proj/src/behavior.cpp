#include "mob/behavior.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace mob {

TokenAttribution attribute_trajectories(const std::vector<Trajectory>& trajs,
                                        const std::vector<Poi>& pois, double max_distance_m) {
    std::vector<const Token*> flat;
    std::vector<std::pair<size_t, size_t>> keys;
    for (size_t ti = 0; ti < trajs.size(); ++ti)
        for (size_t k = 0; k < trajs[ti].tokens.size(); ++k) {
            flat.push_back(&trajs[ti].tokens[k]);
            keys.emplace_back(ti, k);
        }
    const auto hits = attribute_tokens(flat, pois, max_distance_m);
    TokenAttribution out;
    for (size_t i = 0; i < hits.size(); ++i)
        if (hits[i])
            out.by_token[keys[i]] = {pois[*hits[i]].poi_id, pois[*hits[i]].category};
    return out;
}

std::vector<Movement> classify_movements(const std::vector<Trajectory>& trajs,
                                         const BarrierSet& soft_barriers,
                                         const TokenAttribution& attribution) {
    const ExcludedPairSet barrier_pairs = soft_barriers.pair_set();
    std::vector<Movement> out;
    for (size_t ti = 0; ti < trajs.size(); ++ti) {
        const auto& traj = trajs[ti];
        for (const auto& [b, e] : traj.segments) {
            for (uint32_t i = b; i + 1 < e; ++i) {
                const Token& from = traj.tokens[i];
                const Token& to = traj.tokens[i + 1];
                if (from.zone_id == to.zone_id) continue;
                Movement m;
                m.user_id = traj.user_id;
                m.origin_zone = from.zone_id;
                m.dest_zone = to.zone_id;
                m.depart_t = from.t_end;
                m.arrive_t = to.t_start;
                m.utc_offset_s = to.utc_offset_s;
                auto it = attribution.by_token.find({ti, i + 1});
                if (it != attribution.by_token.end()) {
                    m.dest_poi = it->second.first;
                    m.dest_category = it->second.second;
                }
                m.cross = barrier_pairs.count(ZonePairKey(from.zone_id, to.zone_id)) > 0;
                out.push_back(std::move(m));
            }
        }
    }
    return out;
}

std::vector<UserCbr> cbr(const std::vector<Movement>& movements,
                         const std::map<std::string, std::string>& home_zones) {
    std::map<std::string, UserCbr> by_user;
    for (const auto& m : movements) {
        auto& u = by_user[m.user_id];
        u.user_id = m.user_id;
        if (m.cross) ++u.n_cross;
        else ++u.n_within;
    }
    std::vector<UserCbr> out;
    out.reserve(by_user.size());
    for (auto& [uid, u] : by_user) {
        auto it = home_zones.find(uid);
        if (it != home_zones.end()) u.home_zone = it->second;
        u.ratio = static_cast<double>(u.n_cross) /
                  static_cast<double>(u.n_cross + u.n_within);
        out.push_back(std::move(u));
    }
    return out;
}

ActivitySummaries activity_summaries(const std::vector<Movement>& movements) {
    ActivitySummaries s;
    for (const auto& m : movements) {
        if (!m.utc_offset_s)
            throw DataError("hourly summaries need an explicit utc_offset_s column; none for user " +
                            m.user_id);
        int64_t local = (m.arrive_t + *m.utc_offset_s) % 86400;
        if (local < 0) local += 86400;
        const auto hour = static_cast<size_t>(local / 3600);
        if (m.cross) ++s.hourly_cross[hour];
        else ++s.hourly_within[hour];
    }

    // Category shares over attributed movements only.
    std::map<std::string, std::pair<int64_t, int64_t>> counts;  // category -> (cross, within)
    int64_t total_cross = 0, total_within = 0;
    for (const auto& m : movements) {
        if (!m.dest_category) {
            ++s.movements_without_category;
            continue;
        }
        auto& c = counts[*m.dest_category];
        if (m.cross) {
            ++c.first;
            ++total_cross;
        } else {
            ++c.second;
            ++total_within;
        }
    }
    for (const auto& [cat, c] : counts) {
        ActivitySummaries::CategoryRow row;
        row.category = cat;
        row.share_cross = total_cross > 0 ? static_cast<double>(c.first) / total_cross : 0.0;
        row.share_within = total_within > 0 ? static_cast<double>(c.second) / total_within : 0.0;
        if (row.share_within > 0.0)
            row.pct_difference = 100.0 * (row.share_cross - row.share_within) / row.share_within;
        s.categories.push_back(std::move(row));
    }

    // Exploration: first visit of (user, dest_poi) in the user's ordered list.
    std::unordered_map<std::string, std::unordered_set<std::string>> seen;
    int64_t explored_cross = 0, explored_within = 0;
    for (const auto& m : movements) {
        if (!m.dest_poi) continue;
        const bool first_visit = seen[m.user_id].insert(*m.dest_poi).second;
        if (m.cross) {
            ++s.explored_denominator_cross;
            if (first_visit) ++explored_cross;
        } else {
            ++s.explored_denominator_within;
            if (first_visit) ++explored_within;
        }
    }
    s.exploration_rate_cross =
        s.explored_denominator_cross > 0
            ? static_cast<double>(explored_cross) / s.explored_denominator_cross
            : 0.0;
    s.exploration_rate_within =
        s.explored_denominator_within > 0
            ? static_cast<double>(explored_within) / s.explored_denominator_within
            : 0.0;
    return s;
}

void write_movements_csv(const std::filesystem::path& path,
                         const std::vector<Movement>& moves) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(moves.size());
    for (const auto& m : moves)
        rows.push_back({m.user_id, m.origin_zone, m.dest_zone, std::to_string(m.depart_t),
                        std::to_string(m.arrive_t),
                        m.utc_offset_s ? std::to_string(*m.utc_offset_s) : "",
                        m.dest_poi.value_or(""), m.dest_category.value_or(""),
                        m.cross ? "1" : "0"});
    write_csv(path,
              {"user_id", "origin_zone", "dest_zone", "depart_t", "arrive_t", "utc_offset_s",
               "dest_poi", "dest_category", "cross"},
              rows);
}

void write_cbr_csv(const std::filesystem::path& path, const std::vector<UserCbr>& rows) {
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& u : rows)
        body.push_back({u.user_id, u.home_zone, std::to_string(u.n_cross),
                        std::to_string(u.n_within), format_double(u.ratio)});
    write_csv(path, {"user_id", "home_zone", "n_cross", "n_within", "ratio"}, body);
}

std::vector<UserCbr> read_cbr_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int cu = t.require_col("user_id"), ch = t.require_col("home_zone");
    const int cc = t.require_col("n_cross"), cw = t.require_col("n_within");
    const int cr = t.require_col("ratio");
    std::vector<UserCbr> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        UserCbr u;
        u.user_id = r[cu];
        u.home_zone = r[ch];
        u.n_cross = std::stoll(r[cc]);
        u.n_within = std::stoll(r[cw]);
        u.ratio = std::stod(r[cr]);
        out.push_back(std::move(u));
    }
    return out;
}

void write_summaries(const std::filesystem::path& hourly_path,
                     const std::filesystem::path& categories_path,
                     const std::filesystem::path& exploration_path,
                     const ActivitySummaries& s) {
    std::vector<std::vector<std::string>> hourly;
    for (size_t h = 0; h < 24; ++h)
        hourly.push_back({std::to_string(h), std::to_string(s.hourly_cross[h]),
                          std::to_string(s.hourly_within[h])});
    write_csv(hourly_path, {"hour", "cross", "within"}, hourly);

    std::vector<std::vector<std::string>> cats;
    for (const auto& c : s.categories)
        cats.push_back({c.category, format_double(c.share_cross), format_double(c.share_within),
                        c.pct_difference ? format_double(*c.pct_difference) : ""});
    write_csv(categories_path, {"category", "share_cross", "share_within", "pct_difference"},
              cats);

    std::vector<std::vector<std::string>> expl = {
        {"cross", format_double(s.exploration_rate_cross),
         std::to_string(s.explored_denominator_cross)},
        {"within", format_double(s.exploration_rate_within),
         std::to_string(s.explored_denominator_within)}};
    write_csv(exploration_path, {"class", "exploration_rate", "n_attributed"}, expl);
}

}  // namespace mob
