#include "mob/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace mob {

void IngestConfig::validate() const {
    if (!(flow_quantile_lo >= 0.0 && flow_quantile_lo < flow_quantile_hi &&
          flow_quantile_hi <= 1.0))
        throw ConfigError("flow quantiles must satisfy 0 <= lo < hi <= 1");
    if (min_stays_total <= 0 || min_stays_per_day <= 0 || max_gap_s <= 0 ||
        merge_radius_m <= 0.0 || poi_attach_max_m <= 0.0)
        throw ConfigError("ingest thresholds must be positive");
}

std::string IngestReport::to_json() const {
    json j = {{"input_records", input_records},
              {"rejected", {{"BAD_TIME", rejected_bad_time},
                            {"BAD_COORD", rejected_bad_coord},
                            {"NO_ZONE", rejected_no_zone}}},
              {"stays_kept", stays_kept},
              {"stays_pruned", stays_pruned},
              {"users_in", users_in},
              {"users_kept", users_kept},
              {"flow_segments_removed", flow_segments_removed},
              {"flow_stays_removed", flow_stays_removed},
              {"flow_band", {{"lo", flow_lo}, {"hi", flow_hi}}}};
    return j.dump(2);
}

namespace {

struct ZoneBBox {
    double lat_lo, lat_hi, lon_lo, lon_hi;
    const std::string* id;
    const ZoneShape* shape;
};

}  // namespace

void assign_zones(std::vector<Stay>& stays, const ZoneMap& zones) {
    std::vector<ZoneBBox> boxes;
    boxes.reserve(zones.zones.size());
    for (const auto& [id, z] : zones.zones) {
        ZoneBBox b{90.0, -90.0, 180.0, -180.0, &id, &z};
        for (const auto& ring : z.parts)
            for (const auto& v : ring) {
                b.lat_lo = std::min(b.lat_lo, v.lat);
                b.lat_hi = std::max(b.lat_hi, v.lat);
                b.lon_lo = std::min(b.lon_lo, v.lon);
                b.lon_hi = std::max(b.lon_hi, v.lon);
            }
        boxes.push_back(b);
    }
    // Cell size tuned to typical zone extents; correctness does not depend on it.
    const double cell = 0.02;
    std::unordered_map<int64_t, std::vector<size_t>> grid;
    auto key = [&](int i, int j) {
        return (static_cast<int64_t>(i) << 32) ^ static_cast<uint32_t>(j);
    };
    for (size_t bi = 0; bi < boxes.size(); ++bi) {
        const auto& b = boxes[bi];
        for (int i = static_cast<int>(std::floor(b.lat_lo / cell));
             i <= static_cast<int>(std::floor(b.lat_hi / cell)); ++i)
            for (int j = static_cast<int>(std::floor(b.lon_lo / cell));
                 j <= static_cast<int>(std::floor(b.lon_hi / cell)); ++j)
                grid[key(i, j)].push_back(bi);
    }
    for (auto& s : stays) {
        if (!s.zone_id.empty()) continue;
        const int i = static_cast<int>(std::floor(s.lat / cell));
        const int j = static_cast<int>(std::floor(s.lon / cell));
        auto it = grid.find(key(i, j));
        if (it == grid.end()) continue;
        const std::string* best = nullptr;
        for (size_t bi : it->second) {
            const auto& b = boxes[bi];
            if (s.lat < b.lat_lo || s.lat > b.lat_hi || s.lon < b.lon_lo || s.lon > b.lon_hi)
                continue;
            if (point_in_shape({s.lat, s.lon}, b.shape->parts)) {
                // Boundary points can fall in two zones; lowest id wins.
                if (!best || *b.id < *best) best = b.id;
            }
        }
        if (best) s.zone_id = *best;
    }
}

namespace {

int64_t day_index(int64_t t, int64_t day_offset_s) {
    const int64_t shifted = t + day_offset_s;
    // Floor division for times before the epoch.
    return shifted >= 0 ? shifted / 86400 : -((-shifted + 86399) / 86400);
}

struct DaySegment {
    std::vector<Token> tokens;
    int64_t stays_total = 0;
};

}  // namespace

std::vector<Trajectory> build_trajectories(const std::vector<Stay>& stays,
                                           const IngestConfig& cfg, IngestReport& report) {
    cfg.validate();
    report.input_records += static_cast<int64_t>(stays.size());

    std::unordered_map<std::string, std::vector<const Stay*>> by_user;
    for (const auto& s : stays) {
        if (s.t_end < s.t_start) {
            ++report.rejected_bad_time;
            continue;
        }
        if (s.lat < -90.0 || s.lat > 90.0 || s.lon < -180.0 || s.lon > 180.0 ||
            !std::isfinite(s.lat) || !std::isfinite(s.lon)) {
            ++report.rejected_bad_coord;
            continue;
        }
        if (s.zone_id.empty()) {
            ++report.rejected_no_zone;
            continue;
        }
        by_user[s.user_id].push_back(&s);
    }
    report.users_in += static_cast<int64_t>(by_user.size());

    std::vector<std::string> user_ids;
    user_ids.reserve(by_user.size());
    for (const auto& [uid, _] : by_user) user_ids.push_back(uid);
    std::sort(user_ids.begin(), user_ids.end());

    std::vector<Trajectory> out;
    for (const auto& uid : user_ids) {
        auto& recs = by_user[uid];
        std::sort(recs.begin(), recs.end(), [](const Stay* a, const Stay* b) {
            if (a->t_start != b->t_start) return a->t_start < b->t_start;
            if (a->t_end != b->t_end) return a->t_end < b->t_end;
            if (a->lat != b->lat) return a->lat < b->lat;
            if (a->lon != b->lon) return a->lon < b->lon;
            return a->zone_id < b->zone_id;
        });

        // Split into calendar days, then merge, then filter.
        std::map<int64_t, std::vector<const Stay*>> days;
        for (const Stay* s : recs) days[day_index(s->t_start, cfg.day_offset_s)].push_back(s);

        std::vector<DaySegment> kept_segments;
        int64_t user_pruned_stays = 0;
        for (auto& [day, day_stays] : days) {
            DaySegment seg;
            seg.stays_total = static_cast<int64_t>(day_stays.size());
            for (const Stay* s : day_stays) {
                if (!seg.tokens.empty()) {
                    Token& cur = seg.tokens.back();
                    // Merge against the token anchor (its first stay), so the
                    // merged result is stable under re-ingestion.
                    const double d_m =
                        great_circle_km({cur.lat, cur.lon}, {s->lat, s->lon}) * 1000.0;
                    if (d_m <= cfg.merge_radius_m) {
                        cur.t_end = std::max(cur.t_end, s->t_end);
                        cur.n_stays += 1;
                        continue;
                    }
                }
                Token t;
                t.zone_id = s->zone_id;
                t.t_start = s->t_start;
                t.t_end = s->t_end;
                t.lat = s->lat;
                t.lon = s->lon;
                t.n_stays = 1;
                t.utc_offset_s = s->utc_offset_s;
                seg.tokens.push_back(std::move(t));
            }
            bool drop = static_cast<int>(seg.tokens.size()) < cfg.min_stays_per_day;
            for (size_t i = 0; !drop && i + 1 < seg.tokens.size(); ++i)
                if (seg.tokens[i + 1].t_start - seg.tokens[i].t_end > cfg.max_gap_s) drop = true;
            if (drop) {
                user_pruned_stays += seg.stays_total;
            } else {
                kept_segments.push_back(std::move(seg));
            }
        }

        int64_t kept_tokens = 0, kept_stays = 0;
        for (const auto& seg : kept_segments) {
            kept_tokens += static_cast<int64_t>(seg.tokens.size());
            kept_stays += seg.stays_total;
        }
        if (kept_tokens < cfg.min_stays_total) {
            report.stays_pruned += user_pruned_stays + kept_stays;
            continue;
        }
        report.stays_pruned += user_pruned_stays;
        report.stays_kept += kept_stays;

        Trajectory traj;
        traj.user_id = uid;
        // Most frequent home assignment across raw stays; lexicographic tie-break.
        std::map<std::string, int> home_counts;
        for (const Stay* s : recs)
            if (!s->home_zone.empty()) ++home_counts[s->home_zone];
        int best = 0;
        for (const auto& [home, n] : home_counts)
            if (n > best) {
                best = n;
                traj.home_zone = home;
            }
        for (auto& seg : kept_segments) {
            const uint32_t begin = static_cast<uint32_t>(traj.tokens.size());
            for (auto& t : seg.tokens) traj.tokens.push_back(std::move(t));
            traj.segments.emplace_back(begin, static_cast<uint32_t>(traj.tokens.size()));
        }
        ++report.users_kept;
        out.push_back(std::move(traj));
    }
    return out;
}

namespace {

int64_t nearest_rank_value(const std::vector<int64_t>& sorted, double q) {
    const size_t n = sorted.size();
    size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

}  // namespace

PruneResult prune_flows(std::vector<Trajectory> trajs, const IngestConfig& cfg,
                        IngestReport& report) {
    cfg.validate();
    std::unordered_map<ZonePairKey, int64_t, ZonePairKeyHash> flows;
    for (const auto& traj : trajs)
        for (const auto& [b, e] : traj.segments)
            for (uint32_t i = b; i + 1 < e; ++i) {
                const auto& za = traj.tokens[i].zone_id;
                const auto& zb = traj.tokens[i + 1].zone_id;
                if (za != zb) ++flows[ZonePairKey(za, zb)];
            }
    if (flows.size() < 2)
        throw ConfigError("flow pruning needs at least 2 distinct zone pairs, got " +
                          std::to_string(flows.size()));

    std::vector<int64_t> counts;
    counts.reserve(flows.size());
    for (const auto& [_, c] : flows) counts.push_back(c);
    std::sort(counts.begin(), counts.end());
    const int64_t lo = nearest_rank_value(counts, cfg.flow_quantile_lo);
    const int64_t hi = nearest_rank_value(counts, cfg.flow_quantile_hi);
    report.flow_lo = static_cast<double>(lo);
    report.flow_hi = static_cast<double>(hi);

    PruneResult res;
    for (const auto& [pair, c] : flows)
        if (c < lo || c > hi) res.excluded_pairs.insert(pair);

    for (auto& traj : trajs) {
        Trajectory kept;
        kept.user_id = traj.user_id;
        kept.home_zone = traj.home_zone;
        for (const auto& [b, e] : traj.segments) {
            bool drop = false;
            for (uint32_t i = b; i + 1 < e && !drop; ++i) {
                const auto& za = traj.tokens[i].zone_id;
                const auto& zb = traj.tokens[i + 1].zone_id;
                if (za == zb) continue;
                if (res.excluded_pairs.count(ZonePairKey(za, zb))) drop = true;
            }
            if (drop) {
                ++report.flow_segments_removed;
                for (uint32_t i = b; i < e; ++i) {
                    report.flow_stays_removed += traj.tokens[i].n_stays;
                    report.stays_pruned += traj.tokens[i].n_stays;
                    report.stays_kept -= traj.tokens[i].n_stays;
                }
            } else {
                const uint32_t begin = static_cast<uint32_t>(kept.tokens.size());
                for (uint32_t i = b; i < e; ++i) kept.tokens.push_back(std::move(traj.tokens[i]));
                kept.segments.emplace_back(begin, static_cast<uint32_t>(kept.tokens.size()));
            }
        }
        if (!kept.tokens.empty()) res.trajectories.push_back(std::move(kept));
    }
    return res;
}

std::vector<std::optional<size_t>> attribute_stays(const std::vector<Stay>& stays,
                                                   const std::vector<Poi>& pois,
                                                   double max_distance_m) {
    std::vector<LatLon> pts;
    pts.reserve(pois.size());
    for (const auto& p : pois) pts.push_back(p.pos);
    PointGrid grid(pts, std::max(1e-4, max_distance_m / 111000.0 * 2.0));
    std::vector<std::optional<size_t>> out(stays.size());
    for (size_t i = 0; i < stays.size(); ++i) {
        auto cand = grid.query_radius_km({stays[i].lat, stays[i].lon}, max_distance_m / 1000.0);
        std::optional<size_t> best;
        double best_d = 0.0;
        for (size_t idx : cand) {
            const double d = great_circle_km({stays[i].lat, stays[i].lon}, pois[idx].pos);
            if (!best || d < best_d - 1e-12 ||
                (std::abs(d - best_d) <= 1e-12 && pois[idx].poi_id < pois[*best].poi_id)) {
                best = idx;
                best_d = d;
            }
        }
        out[i] = best;
    }
    return out;
}

std::vector<std::optional<size_t>> attribute_tokens(const std::vector<const Token*>& tokens,
                                                    const std::vector<Poi>& pois,
                                                    double max_distance_m) {
    std::vector<Stay> tmp(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        tmp[i].lat = tokens[i]->lat;
        tmp[i].lon = tokens[i]->lon;
    }
    return attribute_stays(tmp, pois, max_distance_m);
}

std::vector<Stay> trajectories_to_stays(const std::vector<Trajectory>& trajs) {
    std::vector<Stay> out;
    for (const auto& traj : trajs)
        for (const auto& t : traj.tokens) {
            Stay s;
            s.user_id = traj.user_id;
            s.t_start = t.t_start;
            s.t_end = t.t_end;
            s.lat = t.lat;
            s.lon = t.lon;
            s.zone_id = t.zone_id;
            s.home_zone = traj.home_zone;
            if (t.utc_offset_s) s.utc_offset_s = t.utc_offset_s;
            out.push_back(std::move(s));
        }
    return out;
}

void write_trajectories(const std::filesystem::path& path,
                        const std::vector<Trajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "user_id,home_zone,segment,zone_id,t_start,t_end,lat,lon,n_stays,utc_offset_s\n";
    char buf[512];
    for (const auto& traj : trajs) {
        for (size_t si = 0; si < traj.segments.size(); ++si) {
            const auto& [b, e] = traj.segments[si];
            for (uint32_t i = b; i < e; ++i) {
                const Token& t = traj.tokens[i];
                char off[16] = "";
                if (t.utc_offset_s) snprintf(off, sizeof(off), "%d", *t.utc_offset_s);
                snprintf(buf, sizeof(buf), "%s,%s,%zu,%s,%lld,%lld,%.9f,%.9f,%d,%s\n",
                         traj.user_id.c_str(), traj.home_zone.c_str(), si, t.zone_id.c_str(),
                         static_cast<long long>(t.t_start), static_cast<long long>(t.t_end),
                         t.lat, t.lon, t.n_stays, off);
                out << buf;
            }
        }
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int c_user = t.require_col("user_id");
    const int c_home = t.require_col("home_zone");
    const int c_seg = t.require_col("segment");
    const int c_zone = t.require_col("zone_id");
    const int c_ts = t.require_col("t_start");
    const int c_te = t.require_col("t_end");
    const int c_lat = t.require_col("lat");
    const int c_lon = t.require_col("lon");
    const int c_n = t.require_col("n_stays");
    const int c_off = t.require_col("utc_offset_s");

    std::vector<Trajectory> out;
    Trajectory* cur = nullptr;
    int64_t cur_seg = -1;
    for (const auto& r : t.rows) {
        if (!cur || cur->user_id != r[c_user]) {
            out.emplace_back();
            cur = &out.back();
            cur->user_id = r[c_user];
            cur->home_zone = r[c_home];
            cur_seg = -1;
        }
        const int64_t seg = std::stoll(r[c_seg]);
        if (seg != cur_seg) {
            cur->segments.emplace_back(static_cast<uint32_t>(cur->tokens.size()),
                                       static_cast<uint32_t>(cur->tokens.size()));
            cur_seg = seg;
        }
        Token tok;
        tok.zone_id = r[c_zone];
        tok.t_start = std::stoll(r[c_ts]);
        tok.t_end = std::stoll(r[c_te]);
        tok.lat = std::stod(r[c_lat]);
        tok.lon = std::stod(r[c_lon]);
        tok.n_stays = static_cast<int32_t>(std::stol(r[c_n]));
        if (!r[c_off].empty()) tok.utc_offset_s = static_cast<int32_t>(std::stol(r[c_off]));
        cur->tokens.push_back(std::move(tok));
        cur->segments.back().second = static_cast<uint32_t>(cur->tokens.size());
    }
    return out;
}

void write_excluded_pairs(const std::filesystem::path& path, const ExcludedPairSet& set) {
    std::vector<ZonePairKey> sorted(set.begin(), set.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(sorted.size());
    for (const auto& p : sorted) rows.push_back({p.a, p.b});
    write_csv(path, {"zone_i", "zone_j"}, rows);
}

ExcludedPairSet read_excluded_pairs(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int ci = t.require_col("zone_i");
    const int cj = t.require_col("zone_j");
    ExcludedPairSet out;
    for (const auto& r : t.rows) out.insert(ZonePairKey(r[ci], r[cj]));
    return out;
}

}  // namespace mob
