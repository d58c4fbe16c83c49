#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mob {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kPi = 3.14159265358979323846;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

// Planar point in a local equirectangular projection (km).
struct XY {
    double x = 0.0;
    double y = 0.0;
};

// Great-circle (haversine) distance in km.
double great_circle_km(const LatLon& a, const LatLon& b);

// Equirectangular projection about a reference point. Adequate for spans
// up to a few tens of km; projected-vs-spherical error < 0.5% at 20 km.
struct LocalProjection {
    double lat0_rad;
    double lon0_rad;
    double cos_lat0;

    explicit LocalProjection(const LatLon& origin);
    XY to_xy(const LatLon& p) const;
    LatLon to_latlon(const XY& p) const;
};

// A polygon ring, implicitly closed (first vertex not repeated at the end).
using Ring = std::vector<LatLon>;

// One geometry out of a barrier layer: either a polyline or a polygon
// (outer rings only; holes are not relevant to crossing counts).
struct Geometry {
    enum class Kind { polyline, polygon } kind = Kind::polygon;
    std::vector<Ring> parts;  // polylines hold one part per line string
};

enum class BarrierKind { highway, railway, park, waterway };

const char* to_string(BarrierKind k);
BarrierKind barrier_kind_from_string(const std::string& s);

struct BarrierLayer {
    BarrierKind kind = BarrierKind::highway;
    std::vector<Geometry> geometries;
};

struct ZoneShape {
    std::vector<Ring> parts;  // outer rings of a possibly multi-part polygon
    LatLon centroid;
    std::string county_id;
};

struct ZoneMap {
    std::unordered_map<std::string, ZoneShape> zones;

    const ZoneShape& at(const std::string& zone_id) const {
        auto it = zones.find(zone_id);
        if (it == zones.end()) throw std::out_of_range("unknown zone: " + zone_id);
        return it->second;
    }
    bool contains(const std::string& zone_id) const { return zones.count(zone_id) > 0; }
};

// Area-weighted centroid of a (multi-part) polygon, computed in a local
// planar projection about the shape's vertex mean.
LatLon polygon_centroid(const std::vector<Ring>& parts);

// Point-in-polygon (any part), boundary-inclusive, in planar lon/lat space.
// Zones here are small enough that the planar test is exact for our inputs.
bool point_in_shape(const LatLon& p, const std::vector<Ring>& parts);

// Monotone-chain convex hull of planar points; returns CCW hull without the
// closing vertex. Collinear inputs yield a 2-point (or 1-point) hull.
std::vector<XY> convex_hull(std::vector<XY> pts);

// Inclusive point-in-convex-polygon test; hull vertices/edges count as inside.
// Degenerate hulls (segment/point) admit only points on the boundary.
bool point_in_convex_hull(const XY& p, const std::vector<XY>& hull, double eps = 1e-9);

// Proper/improper segment intersection test, boundary-inclusive.
bool segments_intersect(const XY& a, const XY& b, const XY& c, const XY& d);

// Convex hull of the pooled vertex sets of two zone shapes, in `proj`.
std::vector<XY> zone_pair_hull(const ZoneShape& za, const ZoneShape& zb,
                               const LocalProjection& proj);

// Whether segment s0-s1 intersects geometry g (boundary crossing, or lying
// inside a polygon part).
bool segment_hits_geometry(const XY& s0, const XY& s1, const Geometry& g,
                           const LocalProjection& proj);

// Number of layer geometries intersecting the centroid-to-centroid segment
// of zones a and b. Each geometry counts at most once. Symmetric in (a, b).
int count_crossings(const std::string& a, const std::string& b,
                    const BarrierLayer& layer, const ZoneMap& zones);

struct Poi {
    std::string poi_id;
    LatLon pos;
    std::string category;
};

// POIs inside (or on) the convex hull of the pooled vertex sets of the two
// zones' polygons, excluding POIs whose category equals excluded_category.
int hull_poi_count(const std::string& a, const std::string& b,
                   const std::vector<Poi>& pois, const ZoneMap& zones,
                   const std::string& excluded_category);

// Per-category variant over the same hull; excluded_category is omitted
// from the result map.
std::map<std::string, int> hull_poi_count_by_category(
    const std::string& a, const std::string& b, const std::vector<Poi>& pois,
    const ZoneMap& zones, const std::string& excluded_category);

// Uniform lat/lon grid bucketing for nearest-neighbour and range queries.
class PointGrid {
public:
    PointGrid(const std::vector<LatLon>& pts, double cell_deg);

    // Indices of stored points within the lat/lon box, unordered.
    std::vector<size_t> query_box(double lat_lo, double lat_hi, double lon_lo,
                                  double lon_hi) const;

    // Nearest stored point to p within max_km (great-circle); ties broken by
    // the caller. Returns all candidates within max_km.
    std::vector<size_t> query_radius_km(const LatLon& p, double max_km) const;

private:
    std::vector<LatLon> pts_;
    double cell_deg_;
    std::unordered_map<uint64_t, std::vector<size_t>> cells_;

    uint64_t key(int ci, int cj) const {
        return (static_cast<uint64_t>(static_cast<uint32_t>(ci)) << 32) |
               static_cast<uint32_t>(cj);
    }
};

}  // namespace mob
