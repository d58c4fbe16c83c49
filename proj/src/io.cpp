#include "mob/io.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace mob {

bool is_known_poi_category(const std::string& name) {
    return std::find(kPoiCategories.begin(), kPoiCategories.end(), name) !=
           kPoiCategories.end();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::require_col(const std::string& name) const {
    int c = col(name);
    if (c < 0) throw DataError("missing column '" + name + "'");
    return c;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        t.rows.push_back(split_csv_line(line));
    }
    return t;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << csv_escape(header[i]);
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << csv_escape(row[i]);
        out << "\n";
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

bool parse_i64(const std::string& s, int64_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_f64(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

double parse_f64_or_throw(const std::string& s, const std::string& what) {
    double v;
    if (!parse_f64(s, v)) throw DataError("bad numeric field '" + s + "' in " + what);
    return v;
}

}  // namespace

StayParseResult read_stays_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv_line(line);
    auto find = [&](const char* name) {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_user = find("user_id"), c_ts = find("t_start"), c_te = find("t_end");
    const int c_lat = find("lat"), c_lon = find("lon");
    const int c_zone = find("zone_id"), c_home = find("home_zone");
    const int c_off = find("utc_offset_s");
    if (c_user < 0 || c_ts < 0 || c_te < 0 || c_lat < 0 || c_lon < 0)
        throw DataError("stays CSV needs user_id,t_start,t_end,lat,lon: " + path.string());

    StayParseResult res;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        auto get = [&](int c) -> const std::string& {
            static const std::string empty;
            return (c >= 0 && c < static_cast<int>(f.size())) ? f[c] : empty;
        };
        Stay s;
        s.user_id = get(c_user);
        int64_t ts, te;
        if (!parse_i64(get(c_ts), ts) || !parse_i64(get(c_te), te) || te < ts || s.user_id.empty()) {
            ++res.bad_time;
            continue;
        }
        double lat, lon;
        if (!parse_f64(get(c_lat), lat) || !parse_f64(get(c_lon), lon) ||
            lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0) {
            ++res.bad_coord;
            continue;
        }
        s.t_start = ts;
        s.t_end = te;
        s.lat = lat;
        s.lon = lon;
        s.zone_id = get(c_zone);
        s.home_zone = get(c_home);
        if (c_off >= 0) {
            int64_t off;
            if (parse_i64(get(c_off), off)) s.utc_offset_s = static_cast<int32_t>(off);
        }
        res.stays.push_back(std::move(s));
    }
    return res;
}

void write_stays_csv(const std::filesystem::path& path, const std::vector<Stay>& stays) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "user_id,t_start,t_end,lat,lon,zone_id,home_zone,utc_offset_s\n";
    char buf[512];
    for (const auto& s : stays) {
        snprintf(buf, sizeof(buf), "%s,%lld,%lld,%.9f,%.9f,%s,%s,%d\n", s.user_id.c_str(),
                 static_cast<long long>(s.t_start), static_cast<long long>(s.t_end), s.lat,
                 s.lon, s.zone_id.c_str(), s.home_zone.c_str(),
                 s.utc_offset_s ? *s.utc_offset_s : 0);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Poi> read_pois_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const int c_id = t.require_col("poi_id");
    const int c_lat = t.require_col("lat");
    const int c_lon = t.require_col("lon");
    const int c_cat = t.require_col("category");
    std::vector<Poi> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        Poi p;
        p.poi_id = r[c_id];
        p.pos.lat = parse_f64_or_throw(r[c_lat], "pois");
        p.pos.lon = parse_f64_or_throw(r[c_lon], "pois");
        p.category = r[c_cat];
        if (!is_known_poi_category(p.category))
            throw DataError("unknown POI category '" + p.category + "'");
        out.push_back(std::move(p));
    }
    return out;
}

void write_pois_csv(const std::filesystem::path& path, const std::vector<Poi>& pois) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(pois.size());
    for (const auto& p : pois)
        rows.push_back({p.poi_id, format_double(p.pos.lat), format_double(p.pos.lon), p.category});
    write_csv(path, {"poi_id", "lat", "lon", "category"}, rows);
}

std::vector<DemographicProfile> read_demographics_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    std::vector<int> race_cols;
    for (size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i].rfind("race_cat_", 0) == 0) race_cols.push_back(static_cast<int>(i));
    if (race_cols.empty()) throw DataError("demographics CSV needs race_cat_* columns");
    const int c_zone = t.require_col("zone_id");
    const int c_mhv = t.require_col("median_housing_value");
    const int c_transit = t.require_col("transit_share");
    const int c_emp = t.require_col("employed_ratio");
    const int c_pov = t.require_col("poverty_ratio");
    const int c_div = t.require_col("racial_diversity");
    const int c_pop = t.require_col("population");
    const int c_cty = t.require_col("county_id");
    std::vector<DemographicProfile> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        DemographicProfile d;
        d.zone_id = r[c_zone];
        for (int c : race_cols) d.race_dist.push_back(parse_f64_or_throw(r[c], "demographics"));
        double sum = 0.0;
        for (double v : d.race_dist) {
            if (v < 0.0) throw DataError("negative race share for zone " + d.zone_id);
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw DataError("race distribution of zone " + d.zone_id + " does not sum to 1");
        d.median_housing_value = parse_f64_or_throw(r[c_mhv], "demographics");
        d.transit_share = parse_f64_or_throw(r[c_transit], "demographics");
        d.employed_ratio = parse_f64_or_throw(r[c_emp], "demographics");
        d.poverty_ratio = parse_f64_or_throw(r[c_pov], "demographics");
        d.racial_diversity = parse_f64_or_throw(r[c_div], "demographics");
        d.population = parse_f64_or_throw(r[c_pop], "demographics");
        d.county_id = r[c_cty];
        out.push_back(std::move(d));
    }
    return out;
}

void write_demographics_csv(const std::filesystem::path& path,
                            const std::vector<DemographicProfile>& rows) {
    if (rows.empty()) throw DataError("no demographic rows to write");
    const size_t k = rows[0].race_dist.size();
    std::vector<std::string> header{"zone_id"};
    for (size_t i = 1; i <= k; ++i) header.push_back("race_cat_" + std::to_string(i));
    for (const char* c : {"median_housing_value", "transit_share", "employed_ratio",
                          "poverty_ratio", "racial_diversity", "population", "county_id"})
        header.push_back(c);
    std::vector<std::vector<std::string>> body;
    body.reserve(rows.size());
    for (const auto& d : rows) {
        std::vector<std::string> r{d.zone_id};
        for (double v : d.race_dist) r.push_back(format_double(v));
        r.push_back(format_double(d.median_housing_value));
        r.push_back(format_double(d.transit_share));
        r.push_back(format_double(d.employed_ratio));
        r.push_back(format_double(d.poverty_ratio));
        r.push_back(format_double(d.racial_diversity));
        r.push_back(format_double(d.population));
        r.push_back(d.county_id);
        body.push_back(std::move(r));
    }
    write_csv(path, header, body);
}

namespace {

Ring ring_from_json(const json& coords) {
    Ring r;
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2) throw DataError("bad GeoJSON coordinate");
        r.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    // GeoJSON repeats the first vertex at the end; rings here stay open.
    if (r.size() >= 2 && r.front().lat == r.back().lat && r.front().lon == r.back().lon)
        r.pop_back();
    return r;
}

std::vector<Ring> polygon_parts_from_json(const json& geom) {
    std::vector<Ring> parts;
    const std::string type = geom.at("type").get<std::string>();
    if (type == "Polygon") {
        // Outer ring only; holes are outside this artifact's contracts.
        if (!geom.at("coordinates").empty())
            parts.push_back(ring_from_json(geom.at("coordinates")[0]));
    } else if (type == "MultiPolygon") {
        for (const auto& poly : geom.at("coordinates"))
            if (!poly.empty()) parts.push_back(ring_from_json(poly[0]));
    } else {
        throw DataError("unsupported zone geometry type: " + type);
    }
    return parts;
}

json ring_to_json(const Ring& r) {
    json coords = json::array();
    for (const auto& v : r) coords.push_back({v.lon, v.lat});
    if (!r.empty()) coords.push_back({r.front().lon, r.front().lat});
    return coords;
}

}  // namespace

ZoneMap read_zones_geojson(const std::filesystem::path& path) {
    json doc = json::parse(read_text_file(path));
    if (doc.value("type", "") != "FeatureCollection")
        throw DataError("zones file is not a FeatureCollection: " + path.string());
    ZoneMap zm;
    for (const auto& f : doc.at("features")) {
        const auto& props = f.at("properties");
        if (!props.contains("zone_id")) throw DataError("zone feature missing zone_id");
        ZoneShape z;
        z.parts = polygon_parts_from_json(f.at("geometry"));
        if (z.parts.empty()) throw DataError("zone with empty geometry");
        z.centroid = polygon_centroid(z.parts);
        z.county_id = props.value("county_id", std::string("C0"));
        zm.zones.emplace(props.at("zone_id").get<std::string>(), std::move(z));
    }
    if (zm.zones.empty()) throw DataError("no zones in " + path.string());
    return zm;
}

void write_zones_geojson(const std::filesystem::path& path, const ZoneMap& zones,
                         const std::vector<std::string>& order) {
    json features = json::array();
    for (const auto& id : order) {
        const ZoneShape& z = zones.at(id);
        json geom;
        if (z.parts.size() == 1) {
            geom = {{"type", "Polygon"}, {"coordinates", json::array({ring_to_json(z.parts[0])})}};
        } else {
            json mp = json::array();
            for (const auto& part : z.parts) mp.push_back(json::array({ring_to_json(part)}));
            geom = {{"type", "MultiPolygon"}, {"coordinates", mp}};
        }
        features.push_back({{"type", "Feature"},
                            {"properties", {{"zone_id", id}, {"county_id", z.county_id}}},
                            {"geometry", geom}});
    }
    json doc = {{"type", "FeatureCollection"}, {"features", features}};
    write_text_file(path, doc.dump());
}

std::vector<BarrierLayer> read_barrier_layers_geojson(const std::filesystem::path& path) {
    json doc = json::parse(read_text_file(path));
    if (doc.value("type", "") != "FeatureCollection")
        throw DataError("barrier file is not a FeatureCollection: " + path.string());
    std::map<BarrierKind, BarrierLayer> by_kind;
    for (const auto& f : doc.at("features")) {
        const auto& props = f.at("properties");
        if (!props.contains("kind")) throw DataError("barrier feature missing kind");
        BarrierKind kind = barrier_kind_from_string(props.at("kind").get<std::string>());
        const auto& geom = f.at("geometry");
        const std::string type = geom.at("type").get<std::string>();
        Geometry g;
        if (type == "LineString") {
            g.kind = Geometry::Kind::polyline;
            Ring r;
            for (const auto& pt : geom.at("coordinates"))
                r.push_back({pt[1].get<double>(), pt[0].get<double>()});
            g.parts.push_back(std::move(r));
        } else if (type == "MultiLineString") {
            g.kind = Geometry::Kind::polyline;
            for (const auto& line : geom.at("coordinates")) {
                Ring r;
                for (const auto& pt : line) r.push_back({pt[1].get<double>(), pt[0].get<double>()});
                g.parts.push_back(std::move(r));
            }
        } else {
            g.kind = Geometry::Kind::polygon;
            g.parts = polygon_parts_from_json(geom);
        }
        auto& layer = by_kind[kind];
        layer.kind = kind;
        layer.geometries.push_back(std::move(g));
    }
    std::vector<BarrierLayer> out;
    for (auto& [k, layer] : by_kind) out.push_back(std::move(layer));
    return out;
}

void write_barrier_layers_geojson(const std::filesystem::path& path,
                                  const std::vector<BarrierLayer>& layers) {
    json features = json::array();
    for (const auto& layer : layers) {
        for (const auto& g : layer.geometries) {
            json geom;
            if (g.kind == Geometry::Kind::polyline) {
                if (g.parts.size() == 1) {
                    json coords = json::array();
                    for (const auto& v : g.parts[0]) coords.push_back({v.lon, v.lat});
                    geom = {{"type", "LineString"}, {"coordinates", coords}};
                } else {
                    json lines = json::array();
                    for (const auto& part : g.parts) {
                        json coords = json::array();
                        for (const auto& v : part) coords.push_back({v.lon, v.lat});
                        lines.push_back(coords);
                    }
                    geom = {{"type", "MultiLineString"}, {"coordinates", lines}};
                }
            } else {
                if (g.parts.size() == 1) {
                    geom = {{"type", "Polygon"},
                            {"coordinates", json::array({ring_to_json(g.parts[0])})}};
                } else {
                    json mp = json::array();
                    for (const auto& part : g.parts) mp.push_back(json::array({ring_to_json(part)}));
                    geom = {{"type", "MultiPolygon"}, {"coordinates", mp}};
                }
            }
            features.push_back({{"type", "Feature"},
                                {"properties", {{"kind", to_string(layer.kind)}}},
                                {"geometry", geom}});
        }
    }
    json doc = {{"type", "FeatureCollection"}, {"features", features}};
    write_text_file(path, doc.dump());
}

namespace {

std::string hex_digest(const unsigned char* md, unsigned len) {
    static const char* hex = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = hex[md[i] >> 4];
        out[2 * i + 1] = hex[md[i] & 0xf];
    }
    return out;
}

}  // namespace

std::string sha256_bytes(const void* data, size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    if (!EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr))
        throw NumericError("sha256 digest failed");
    return hex_digest(md, md_len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    EVP_DigestFinal_ex(ctx, md, &md_len);
    EVP_MD_CTX_free(ctx);
    return hex_digest(md, md_len);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace mob
