#include "mob/geom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace mob {

double great_circle_km(const LatLon& a, const LatLon& b) {
    const double deg = kPi / 180.0;
    const double phi1 = a.lat * deg, phi2 = b.lat * deg;
    const double dphi = (b.lat - a.lat) * deg;
    const double dlam = (b.lon - a.lon) * deg;
    const double sp = std::sin(dphi / 2.0), sl = std::sin(dlam / 2.0);
    const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalProjection::LocalProjection(const LatLon& origin)
    : lat0_rad(origin.lat * kPi / 180.0),
      lon0_rad(origin.lon * kPi / 180.0),
      cos_lat0(std::cos(origin.lat * kPi / 180.0)) {}

XY LocalProjection::to_xy(const LatLon& p) const {
    const double deg = kPi / 180.0;
    return {kEarthRadiusKm * (p.lon * deg - lon0_rad) * cos_lat0,
            kEarthRadiusKm * (p.lat * deg - lat0_rad)};
}

LatLon LocalProjection::to_latlon(const XY& p) const {
    const double rad = 180.0 / kPi;
    return {(p.y / kEarthRadiusKm + lat0_rad) * rad,
            (p.x / (kEarthRadiusKm * cos_lat0) + lon0_rad) * rad};
}

const char* to_string(BarrierKind k) {
    switch (k) {
        case BarrierKind::highway: return "highway";
        case BarrierKind::railway: return "railway";
        case BarrierKind::park: return "park";
        case BarrierKind::waterway: return "waterway";
    }
    return "?";
}

BarrierKind barrier_kind_from_string(const std::string& s) {
    if (s == "highway") return BarrierKind::highway;
    if (s == "railway") return BarrierKind::railway;
    if (s == "park") return BarrierKind::park;
    if (s == "waterway") return BarrierKind::waterway;
    throw std::invalid_argument("unknown barrier kind: " + s);
}

LatLon polygon_centroid(const std::vector<Ring>& parts) {
    if (parts.empty()) throw std::invalid_argument("centroid of empty polygon");
    double mlat = 0.0, mlon = 0.0;
    size_t n = 0;
    for (const auto& ring : parts)
        for (const auto& v : ring) {
            mlat += v.lat;
            mlon += v.lon;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("centroid of empty polygon");
    LocalProjection proj({mlat / n, mlon / n});

    double area2 = 0.0, cx = 0.0, cy = 0.0;
    for (const auto& ring : parts) {
        if (ring.size() < 3) continue;
        for (size_t i = 0; i < ring.size(); ++i) {
            XY p = proj.to_xy(ring[i]);
            XY q = proj.to_xy(ring[(i + 1) % ring.size()]);
            const double cross = p.x * q.y - q.x * p.y;
            area2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
    }
    if (std::abs(area2) < 1e-14) {
        // Degenerate shape: fall back to the vertex mean.
        return {mlat / n, mlon / n};
    }
    return proj.to_latlon({cx / (3.0 * area2), cy / (3.0 * area2)});
}

namespace {

bool point_in_ring(const LatLon& p, const Ring& ring) {
    const size_t n = ring.size();
    if (n < 3) return false;
    // Boundary check first so edge points count as inside.
    for (size_t i = 0; i < n; ++i) {
        const LatLon& a = ring[i];
        const LatLon& b = ring[(i + 1) % n];
        const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
        if (std::abs(cross) < 1e-15 &&
            p.lon >= std::min(a.lon, b.lon) - 1e-15 && p.lon <= std::max(a.lon, b.lon) + 1e-15 &&
            p.lat >= std::min(a.lat, b.lat) - 1e-15 && p.lat <= std::max(a.lat, b.lat) + 1e-15)
            return true;
    }
    bool inside = false;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const LatLon& a = ring[i];
        const LatLon& b = ring[j];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double xint = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if (p.lon < xint) inside = !inside;
        }
    }
    return inside;
}

double cross(const XY& o, const XY& a, const XY& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

int sgn(double v, double eps = 1e-12) { return v > eps ? 1 : (v < -eps ? -1 : 0); }

bool on_segment(const XY& a, const XY& b, const XY& p) {
    return p.x >= std::min(a.x, b.x) - 1e-12 && p.x <= std::max(a.x, b.x) + 1e-12 &&
           p.y >= std::min(a.y, b.y) - 1e-12 && p.y <= std::max(a.y, b.y) + 1e-12;
}

}  // namespace

bool point_in_shape(const LatLon& p, const std::vector<Ring>& parts) {
    for (const auto& ring : parts)
        if (point_in_ring(p, ring)) return true;
    return false;
}

std::vector<XY> convex_hull(std::vector<XY> pts) {
    std::sort(pts.begin(), pts.end(), [](const XY& a, const XY& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const XY& a, const XY& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<XY> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

bool point_in_convex_hull(const XY& p, const std::vector<XY>& hull, double eps) {
    const size_t n = hull.size();
    if (n == 0) return false;
    if (n == 1) return std::abs(p.x - hull[0].x) <= eps && std::abs(p.y - hull[0].y) <= eps;
    if (n == 2) {
        if (std::abs(cross(hull[0], hull[1], p)) > eps) return false;
        return on_segment(hull[0], hull[1], p);
    }
    for (size_t i = 0; i < n; ++i) {
        if (cross(hull[i], hull[(i + 1) % n], p) < -eps) return false;
    }
    return true;
}

bool segments_intersect(const XY& a, const XY& b, const XY& c, const XY& d) {
    const int d1 = sgn(cross(c, d, a));
    const int d2 = sgn(cross(c, d, b));
    const int d3 = sgn(cross(a, b, c));
    const int d4 = sgn(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

// Segment vs. one geometry in the projected plane. Polygons intersect when
// the segment crosses the boundary or lies inside; polylines when any edge
// is crossed.
bool segment_hits_geometry(const XY& s0, const XY& s1, const Geometry& g,
                           const LocalProjection& proj) {
    for (const auto& part : g.parts) {
        const size_t n = part.size();
        if (n == 0) continue;
        std::vector<XY> v(n);
        for (size_t i = 0; i < n; ++i) v[i] = proj.to_xy(part[i]);
        const size_t edges = (g.kind == Geometry::Kind::polygon) ? n : n - 1;
        for (size_t i = 0; i < edges; ++i) {
            if (segments_intersect(s0, s1, v[i], v[(i + 1) % n])) return true;
        }
        if (g.kind == Geometry::Kind::polygon && n >= 3) {
            // No boundary crossing: still a hit if the segment sits inside.
            LatLon mid = proj.to_latlon({(s0.x + s1.x) / 2.0, (s0.y + s1.y) / 2.0});
            if (point_in_ring(mid, part)) return true;
        }
    }
    return false;
}

int count_crossings(const std::string& a, const std::string& b,
                    const BarrierLayer& layer, const ZoneMap& zones) {
    const ZoneShape& za = zones.at(a);
    const ZoneShape& zb = zones.at(b);
    const LatLon mid{(za.centroid.lat + zb.centroid.lat) / 2.0,
                     (za.centroid.lon + zb.centroid.lon) / 2.0};
    LocalProjection proj(mid);
    const XY s0 = proj.to_xy(za.centroid);
    const XY s1 = proj.to_xy(zb.centroid);
    int hits = 0;
    for (const auto& g : layer.geometries)
        if (segment_hits_geometry(s0, s1, g, proj)) ++hits;
    return hits;
}

std::vector<XY> zone_pair_hull(const ZoneShape& za, const ZoneShape& zb,
                               const LocalProjection& proj) {
    std::vector<XY> pts;
    for (const auto* z : {&za, &zb})
        for (const auto& ring : z->parts)
            for (const auto& v : ring) pts.push_back(proj.to_xy(v));
    return convex_hull(std::move(pts));
}

int hull_poi_count(const std::string& a, const std::string& b,
                   const std::vector<Poi>& pois, const ZoneMap& zones,
                   const std::string& excluded_category) {
    const ZoneShape& za = zones.at(a);
    const ZoneShape& zb = zones.at(b);
    const LatLon mid{(za.centroid.lat + zb.centroid.lat) / 2.0,
                     (za.centroid.lon + zb.centroid.lon) / 2.0};
    LocalProjection proj(mid);
    const auto hull = zone_pair_hull(za, zb, proj);
    int count = 0;
    for (const auto& p : pois) {
        if (p.category == excluded_category) continue;
        if (point_in_convex_hull(proj.to_xy(p.pos), hull)) ++count;
    }
    return count;
}

std::map<std::string, int> hull_poi_count_by_category(
    const std::string& a, const std::string& b, const std::vector<Poi>& pois,
    const ZoneMap& zones, const std::string& excluded_category) {
    const ZoneShape& za = zones.at(a);
    const ZoneShape& zb = zones.at(b);
    const LatLon mid{(za.centroid.lat + zb.centroid.lat) / 2.0,
                     (za.centroid.lon + zb.centroid.lon) / 2.0};
    LocalProjection proj(mid);
    const auto hull = zone_pair_hull(za, zb, proj);
    std::map<std::string, int> out;
    for (const auto& p : pois) {
        if (p.category == excluded_category) continue;
        if (point_in_convex_hull(proj.to_xy(p.pos), hull)) ++out[p.category];
    }
    return out;
}

PointGrid::PointGrid(const std::vector<LatLon>& pts, double cell_deg)
    : pts_(pts), cell_deg_(cell_deg) {
    for (size_t i = 0; i < pts_.size(); ++i) {
        int ci = static_cast<int>(std::floor(pts_[i].lat / cell_deg_));
        int cj = static_cast<int>(std::floor(pts_[i].lon / cell_deg_));
        cells_[key(ci, cj)].push_back(i);
    }
}

std::vector<size_t> PointGrid::query_box(double lat_lo, double lat_hi,
                                         double lon_lo, double lon_hi) const {
    std::vector<size_t> out;
    int i0 = static_cast<int>(std::floor(lat_lo / cell_deg_));
    int i1 = static_cast<int>(std::floor(lat_hi / cell_deg_));
    int j0 = static_cast<int>(std::floor(lon_lo / cell_deg_));
    int j1 = static_cast<int>(std::floor(lon_hi / cell_deg_));
    for (int ci = i0; ci <= i1; ++ci)
        for (int cj = j0; cj <= j1; ++cj) {
            auto it = cells_.find(key(ci, cj));
            if (it == cells_.end()) continue;
            for (size_t idx : it->second) {
                const LatLon& p = pts_[idx];
                if (p.lat >= lat_lo && p.lat <= lat_hi && p.lon >= lon_lo && p.lon <= lon_hi)
                    out.push_back(idx);
            }
        }
    return out;
}

std::vector<size_t> PointGrid::query_radius_km(const LatLon& p, double max_km) const {
    const double dlat = max_km / 111.0;
    const double coslat = std::max(0.05, std::cos(p.lat * kPi / 180.0));
    const double dlon = max_km / (111.0 * coslat);
    auto cand = query_box(p.lat - dlat, p.lat + dlat, p.lon - dlon, p.lon + dlon);
    std::vector<size_t> out;
    for (size_t idx : cand)
        if (great_circle_km(p, pts_[idx]) <= max_km) out.push_back(idx);
    return out;
}

}  // namespace mob
