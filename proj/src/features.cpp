#include "mob/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace mob {

double js_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw NumericError("js_distance: length mismatch " + std::to_string(p.size()) + " vs " +
                           std::to_string(q.size()));
    double sp = 0.0, sq = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw NumericError("js_distance: negative probability");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw NumericError("js_distance: inputs not normalized");

    // 0 log 0 == 0; m > 0 wherever p or q is positive, so KL terms are finite.
    const double inv_ln2 = 1.0 / std::log(2.0);
    double div = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) div += 0.5 * p[i] * std::log(p[i] / m) * inv_ln2;
        if (q[i] > 0.0) div += 0.5 * q[i] * std::log(q[i] / m) * inv_ln2;
    }
    if (div < 0.0) div = 0.0;  // guard tiny negative rounding
    if (div > 1.0) div = 1.0;
    return std::sqrt(div);
}

const std::vector<std::string>& feature_categories() {
    static const std::vector<std::string> cats = [] {
        std::vector<std::string> v;
        for (auto c : kPoiCategories)
            if (c != kExcludedPoiCategory) v.emplace_back(c);
        return v;
    }();
    return cats;
}

std::vector<double> poi_category_profile(const std::string& zone_id,
                                         const std::vector<Poi>& pois, const ZoneMap& zones) {
    const ZoneShape& z = zones.at(zone_id);
    std::vector<double> hist(kPoiCategories.size(), 0.0);
    double total = 0.0;
    for (const auto& p : pois) {
        if (!point_in_shape(p.pos, z.parts)) continue;
        const auto it = std::find(kPoiCategories.begin(), kPoiCategories.end(), p.category);
        if (it == kPoiCategories.end())
            throw DataError("unknown POI category '" + p.category + "'");
        hist[static_cast<size_t>(it - kPoiCategories.begin())] += 1.0;
        total += 1.0;
    }
    if (total == 0.0) {
        std::fill(hist.begin(), hist.end(), 1.0 / static_cast<double>(hist.size()));
        return hist;
    }
    for (double& h : hist) h /= total;
    return hist;
}

namespace {

struct BBox {
    double lat_lo = 90.0, lat_hi = -90.0, lon_lo = 180.0, lon_hi = -180.0;
    void add(const LatLon& p) {
        lat_lo = std::min(lat_lo, p.lat);
        lat_hi = std::max(lat_hi, p.lat);
        lon_lo = std::min(lon_lo, p.lon);
        lon_hi = std::max(lon_hi, p.lon);
    }
    void add(const BBox& o) {
        lat_lo = std::min(lat_lo, o.lat_lo);
        lat_hi = std::max(lat_hi, o.lat_hi);
        lon_lo = std::min(lon_lo, o.lon_lo);
        lon_hi = std::max(lon_hi, o.lon_hi);
    }
    bool overlaps(const BBox& o) const {
        return !(o.lat_lo > lat_hi || o.lat_hi < lat_lo || o.lon_lo > lon_hi ||
                 o.lon_hi < lon_lo);
    }
};

BBox shape_bbox(const std::vector<Ring>& parts) {
    BBox b;
    for (const auto& ring : parts)
        for (const auto& v : ring) b.add(v);
    return b;
}

}  // namespace

AssembleResult assemble_pair_features(const ZoneMap& zones, const std::vector<Poi>& pois,
                                      const std::vector<BarrierLayer>& layers,
                                      const std::vector<DemographicProfile>& demo,
                                      const std::vector<PairDistance>& pairs) {
    std::unordered_map<std::string, const DemographicProfile*> demo_by_zone;
    for (const auto& d : demo) demo_by_zone[d.zone_id] = &d;

    // Per-zone POI category profiles (zone polygons are disjoint in practice;
    // each zone scans only POIs in its bounding box).
    std::vector<LatLon> poi_pts;
    poi_pts.reserve(pois.size());
    for (const auto& p : pois) poi_pts.push_back(p.pos);
    PointGrid poi_grid(poi_pts, 0.01);

    std::unordered_map<std::string, std::vector<double>> profiles;
    std::unordered_map<std::string, BBox> zone_boxes;
    for (const auto& [id, z] : zones.zones) zone_boxes[id] = shape_bbox(z.parts);
    auto profile_of = [&](const std::string& id) -> const std::vector<double>& {
        auto it = profiles.find(id);
        if (it != profiles.end()) return it->second;
        const ZoneShape& z = zones.at(id);
        const BBox& bb = zone_boxes[id];
        std::vector<double> hist(kPoiCategories.size(), 0.0);
        double total = 0.0;
        for (size_t pi : poi_grid.query_box(bb.lat_lo, bb.lat_hi, bb.lon_lo, bb.lon_hi)) {
            if (!point_in_shape(pois[pi].pos, z.parts)) continue;
            const auto cit =
                std::find(kPoiCategories.begin(), kPoiCategories.end(), pois[pi].category);
            if (cit == kPoiCategories.end())
                throw DataError("unknown POI category '" + pois[pi].category + "'");
            hist[static_cast<size_t>(cit - kPoiCategories.begin())] += 1.0;
            total += 1.0;
        }
        if (total == 0.0)
            std::fill(hist.begin(), hist.end(), 1.0 / static_cast<double>(hist.size()));
        else
            for (double& h : hist) h /= total;
        return profiles.emplace(id, std::move(hist)).first->second;
    };

    // Category index (excluded category mapped to -1).
    std::unordered_map<std::string, int> cat_index;
    {
        int k = 0;
        for (const auto& c : feature_categories()) cat_index[c] = k++;
    }
    const size_t n_cats = feature_categories().size();

    // Layer geometry boxes for the crossing prefilter.
    struct GeomRef {
        const Geometry* g;
        BBox box;
    };
    std::array<std::vector<GeomRef>, 4> layer_geoms;
    for (const auto& layer : layers) {
        auto& dst = layer_geoms[static_cast<size_t>(layer.kind)];
        for (const auto& g : layer.geometries) {
            BBox b;
            for (const auto& part : g.parts)
                for (const auto& v : part) b.add(v);
            dst.push_back({&g, b});
        }
    }

    AssembleResult res;
    res.rows.reserve(pairs.size());
    for (const auto& pd_in : pairs) {
        PairDistance pd = pd_in;
        if (pd.zone_j < pd.zone_i) std::swap(pd.zone_i, pd.zone_j);
        if (pd.d_phys_km > kMaxPairKm) continue;
        const auto di = demo_by_zone.find(pd.zone_i);
        const auto dj = demo_by_zone.find(pd.zone_j);
        if (di == demo_by_zone.end() || dj == demo_by_zone.end()) {
            ++res.dropped_missing_demo;
            continue;
        }
        const ZoneShape& za = zones.at(pd.zone_i);
        const ZoneShape& zb = zones.at(pd.zone_j);

        PairFeatureRow row;
        row.zone_i = pd.zone_i;
        row.zone_j = pd.zone_j;
        row.d_phys_km = pd.d_phys_km;
        row.d_embed = pd.d_embed;
        row.bin_index = bin_of_distance(pd.d_phys_km);

        const LatLon mid{(za.centroid.lat + zb.centroid.lat) / 2.0,
                         (za.centroid.lon + zb.centroid.lon) / 2.0};
        LocalProjection proj(mid);

        // Intervening opportunities over the pair hull, per category.
        const auto hull = zone_pair_hull(za, zb, proj);
        BBox hull_box = zone_boxes[pd.zone_i];
        hull_box.add(zone_boxes[pd.zone_j]);
        row.poi_interv_by_cat.assign(n_cats, 0);
        for (size_t pi : poi_grid.query_box(hull_box.lat_lo, hull_box.lat_hi, hull_box.lon_lo,
                                            hull_box.lon_hi)) {
            const auto cit = cat_index.find(pois[pi].category);
            if (cit == cat_index.end()) continue;  // excluded category
            if (point_in_convex_hull(proj.to_xy(pois[pi].pos), hull)) {
                ++row.poi_interv_by_cat[cit->second];
                ++row.poi_interv;
            }
        }

        row.poi_js = js_distance(profile_of(pd.zone_i), profile_of(pd.zone_j));

        // Physical crossings of the centroid segment, per layer kind.
        const XY s0 = proj.to_xy(za.centroid);
        const XY s1 = proj.to_xy(zb.centroid);
        BBox seg_box;
        seg_box.add(za.centroid);
        seg_box.add(zb.centroid);
        for (size_t k = 0; k < 4; ++k) {
            int hits = 0;
            for (const auto& gr : layer_geoms[k]) {
                if (!gr.box.overlaps(seg_box)) continue;
                if (segment_hits_geometry(s0, s1, *gr.g, proj)) ++hits;
            }
            row.crossings[k] = hits;
        }

        row.race_dist_js = js_distance(di->second->race_dist, dj->second->race_dist);
        row.income_diff =
            std::abs(di->second->median_housing_value - dj->second->median_housing_value);
        row.transit_diff = std::abs(di->second->transit_share - dj->second->transit_share);
        row.cross_county = za.county_id != zb.county_id ? 1 : 0;
        res.rows.push_back(std::move(row));
    }
    return res;
}

namespace {

std::string category_slug(const std::string& name) {
    std::string s;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!s.empty() && s.back() != '_')
            s.push_back('_');
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

}  // namespace

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<PairFeatureRow>& rows) {
    std::vector<std::string> header = {"zone_i",    "zone_j",     "d_phys_km",
                                       "d_embed",   "bin",        "poi_interv",
                                       "poi_js",    "cross_highway", "cross_railway",
                                       "cross_park", "cross_waterway", "race_dist_js",
                                       "income_diff", "transit_diff", "cross_county",
                                       "label"};
    for (const auto& c : feature_categories()) header.push_back("poi_cat_" + category_slug(c));
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& r : rows) {
        std::vector<std::string> rec = {r.zone_i,
                                        r.zone_j,
                                        format_double(r.d_phys_km),
                                        format_double(r.d_embed),
                                        std::to_string(r.bin_index),
                                        std::to_string(r.poi_interv),
                                        format_double(r.poi_js),
                                        std::to_string(r.crossings[0]),
                                        std::to_string(r.crossings[1]),
                                        std::to_string(r.crossings[2]),
                                        std::to_string(r.crossings[3]),
                                        format_double(r.race_dist_js),
                                        format_double(r.income_diff),
                                        format_double(r.transit_diff),
                                        std::to_string(r.cross_county),
                                        r.label ? std::to_string(*r.label) : ""};
        for (int64_t c : r.poi_interv_by_cat) rec.push_back(std::to_string(c));
        body.push_back(std::move(rec));
    }
    write_csv(path, header, body);
}

std::vector<PairFeatureRow> read_features_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int ci = t.require_col("zone_i"), cj = t.require_col("zone_j");
    const int cd = t.require_col("d_phys_km"), ce = t.require_col("d_embed");
    const int cb = t.require_col("bin"), cp = t.require_col("poi_interv");
    const int cpj = t.require_col("poi_js");
    const int ch = t.require_col("cross_highway"), cr = t.require_col("cross_railway");
    const int cpk = t.require_col("cross_park"), cw = t.require_col("cross_waterway");
    const int crj = t.require_col("race_dist_js"), cin = t.require_col("income_diff");
    const int ctr = t.require_col("transit_diff"), cc = t.require_col("cross_county");
    const int cl = t.require_col("label");
    std::vector<int> cat_cols;
    for (const auto& c : feature_categories())
        cat_cols.push_back(t.require_col("poi_cat_" + category_slug(c)));

    std::vector<PairFeatureRow> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        PairFeatureRow f;
        f.zone_i = r[ci];
        f.zone_j = r[cj];
        f.d_phys_km = std::stod(r[cd]);
        f.d_embed = std::stod(r[ce]);
        f.bin_index = std::stoi(r[cb]);
        f.poi_interv = std::stoll(r[cp]);
        f.poi_js = std::stod(r[cpj]);
        f.crossings = {std::stoi(r[ch]), std::stoi(r[cr]), std::stoi(r[cpk]), std::stoi(r[cw])};
        f.race_dist_js = std::stod(r[crj]);
        f.income_diff = std::stod(r[cin]);
        f.transit_diff = std::stod(r[ctr]);
        f.cross_county = std::stoi(r[cc]);
        if (!r[cl].empty()) f.label = std::stoi(r[cl]);
        for (int cat_col : cat_cols) f.poi_interv_by_cat.push_back(std::stoll(r[cat_col]));
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace mob
