#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mob/geom.hpp"
#include "mob/rng.hpp"
#include "oracles.hpp"

using namespace mob;

TEST_CASE("great circle basics") {
    CHECK(great_circle_km({42.36, -71.06}, {42.36, -71.06}) == 0.0);
    // One degree of longitude on the equator: R * pi / 180.
    CHECK(great_circle_km({0.0, 0.0}, {0.0, 1.0}) == doctest::Approx(111.195).epsilon(1e-5));
    const double ab = great_circle_km({42.36, -71.06}, {40.71, -74.0});
    const double ba = great_circle_km({40.71, -74.0}, {42.36, -71.06});
    CHECK(ab == ba);
}

TEST_CASE("great circle triangle inequality on random triples") {
    Rng rng(7);
    for (int t = 0; t < 500; ++t) {
        LatLon a{rng.uniform(-60, 60), rng.uniform(-180, 180)};
        LatLon b{rng.uniform(-60, 60), rng.uniform(-180, 180)};
        LatLon c{rng.uniform(-60, 60), rng.uniform(-180, 180)};
        CHECK(great_circle_km(a, c) <= great_circle_km(a, b) + great_circle_km(b, c) + 1e-9);
    }
}

TEST_CASE("local projection error below 0.5% within 20 km") {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        const double lat = rng.uniform(-55.0, 55.0);
        const double lon = rng.uniform(-179.0, 179.0);
        LatLon a{lat + rng.uniform(-0.08, 0.08), lon + rng.uniform(-0.08, 0.08)};
        LatLon b{lat + rng.uniform(-0.08, 0.08), lon + rng.uniform(-0.08, 0.08)};
        const double spherical = great_circle_km(a, b);
        if (spherical < 0.05 || spherical > 20.0) continue;
        LocalProjection proj({(a.lat + b.lat) / 2, (a.lon + b.lon) / 2});
        const XY pa = proj.to_xy(a), pb = proj.to_xy(b);
        const double planar = std::hypot(pb.x - pa.x, pb.y - pa.y);
        CHECK(std::abs(planar - spherical) / spherical < 0.005);
    }
}

TEST_CASE("polygon centroid of a square is its center") {
    std::vector<Ring> sq{{{0.0, 0.0}, {0.0, 0.01}, {0.01, 0.01}, {0.01, 0.0}}};
    LatLon c = polygon_centroid(sq);
    CHECK(c.lat == doctest::Approx(0.005).epsilon(1e-9));
    CHECK(c.lon == doctest::Approx(0.005).epsilon(1e-9));
}

namespace {

ZoneMap two_squares(double gap_deg) {
    ZoneMap zm;
    auto square = [](double lat0, double lon0, double side) {
        ZoneShape z;
        z.parts.push_back(
            Ring{{lat0, lon0}, {lat0, lon0 + side}, {lat0 + side, lon0 + side}, {lat0 + side, lon0}});
        z.centroid = polygon_centroid(z.parts);
        z.county_id = "C0";
        return z;
    };
    zm.zones.emplace("A", square(40.0, -75.0, 0.009));
    zm.zones.emplace("B", square(40.0, -75.0 + 0.009 + gap_deg, 0.009));
    return zm;
}

}  // namespace

TEST_CASE("count_crossings containment and disjoint cases") {
    ZoneMap zm = two_squares(0.02);
    BarrierLayer park{BarrierKind::park, {}};
    Geometry big;
    big.kind = Geometry::Kind::polygon;
    big.parts.push_back(Ring{{39.9, -75.2}, {39.9, -74.8}, {40.1, -74.8}, {40.1, -75.2}});
    park.geometries.push_back(big);
    CHECK(count_crossings("A", "B", park, zm) == 1);

    BarrierLayer far_park{BarrierKind::park, {}};
    Geometry small;
    small.kind = Geometry::Kind::polygon;
    small.parts.push_back(Ring{{41.0, -75.0}, {41.0, -74.99}, {41.01, -74.99}, {41.01, -75.0}});
    far_park.geometries.push_back(small);
    CHECK(count_crossings("A", "B", far_park, zm) == 0);
    CHECK(count_crossings("B", "A", park, zm) == count_crossings("A", "B", park, zm));
    CHECK_THROWS(count_crossings("A", "nope", park, zm));
}

TEST_CASE("count_crossings equals exhaustive oracle on random scenes") {
    Rng rng(23);
    for (int scene = 0; scene < 1000; ++scene) {
        ZoneMap zm = two_squares(rng.uniform(0.005, 0.05));
        BarrierLayer layer{BarrierKind::waterway, {}};
        const int n_geoms = 1 + static_cast<int>(rng.next_below(5));
        for (int gi = 0; gi < n_geoms; ++gi) {
            Geometry g;
            const bool poly = rng.next_double() < 0.5;
            g.kind = poly ? Geometry::Kind::polygon : Geometry::Kind::polyline;
            Ring r;
            const double clat = 40.0 + rng.uniform(-0.02, 0.03);
            const double clon = -75.0 + rng.uniform(-0.02, 0.08);
            const int verts = poly ? 3 + static_cast<int>(rng.next_below(3))
                                   : 2 + static_cast<int>(rng.next_below(4));
            if (poly) {
                // Star-shaped polygon to keep it simple (not necessarily convex).
                for (int v = 0; v < verts; ++v) {
                    const double ang = 2 * kPi * v / verts;
                    const double rad = rng.uniform(0.004, 0.03);
                    r.push_back({clat + rad * std::sin(ang), clon + rad * std::cos(ang)});
                }
            } else {
                for (int v = 0; v < verts; ++v)
                    r.push_back({clat + rng.uniform(-0.03, 0.03), clon + rng.uniform(-0.03, 0.03)});
            }
            g.parts.push_back(std::move(r));
            layer.geometries.push_back(std::move(g));
        }

        const int got = count_crossings("A", "B", layer, zm);

        // Oracle: same scene, independently projected and tested.
        const LatLon ca = zm.at("A").centroid, cb = zm.at("B").centroid;
        LocalProjection proj({(ca.lat + cb.lat) / 2, (ca.lon + cb.lon) / 2});
        std::vector<oracle::PlanarGeometry> geoms;
        for (const auto& g : layer.geometries) {
            oracle::PlanarGeometry pg;
            pg.polygon = g.kind == Geometry::Kind::polygon;
            for (const auto& part : g.parts) {
                std::vector<XY> pts;
                for (const auto& v : part) pts.push_back(proj.to_xy(v));
                pg.parts.push_back(std::move(pts));
            }
            geoms.push_back(std::move(pg));
        }
        const int want = oracle::count_hits(proj.to_xy(ca), proj.to_xy(cb), geoms);
        CHECK(got == want);

        const int swapped = count_crossings("B", "A", layer, zm);
        CHECK(swapped == got);
    }
}

TEST_CASE("hull_poi_count inclusive vertices and category exclusion") {
    ZoneMap zm = two_squares(0.02);
    std::vector<Poi> pois;
    // A hull vertex of zone A.
    pois.push_back({"P1", {40.0, -75.0}, "Food"});
    // Between the zones (inside the hull).
    pois.push_back({"P2", {40.0045, -74.985}, "Food"});
    pois.push_back({"P3", {40.0045, -74.985}, "City / Outdoors"});
    // Far away.
    pois.push_back({"P4", {41.0, -75.0}, "Food"});
    CHECK(hull_poi_count("A", "B", pois, zm, "City / Outdoors") == 2);
    auto by_cat = hull_poi_count_by_category("A", "B", pois, zm, "City / Outdoors");
    CHECK(by_cat["Food"] == 2);
    CHECK(by_cat.count("City / Outdoors") == 0);
}

TEST_CASE("hull_poi_count equals exhaustive oracle on random clouds") {
    Rng rng(31);
    for (int scene = 0; scene < 1000; ++scene) {
        ZoneMap zm = two_squares(rng.uniform(0.002, 0.04));
        std::vector<Poi> pois;
        const int n = 30 + static_cast<int>(rng.next_below(40));
        for (int i = 0; i < n; ++i) {
            Poi p;
            p.poi_id = "P" + std::to_string(i);
            p.pos = {40.0 + rng.uniform(-0.01, 0.02), -75.0 + rng.uniform(-0.01, 0.06)};
            p.category = rng.next_double() < 0.2 ? "City / Outdoors" : "Shopping";
            pois.push_back(std::move(p));
        }
        const int got = hull_poi_count("A", "B", pois, zm, "City / Outdoors");

        const LatLon ca = zm.at("A").centroid, cb = zm.at("B").centroid;
        LocalProjection proj({(ca.lat + cb.lat) / 2, (ca.lon + cb.lon) / 2});
        std::vector<XY> verts;
        for (const auto* zid : {"A", "B"})
            for (const auto& ring : zm.at(zid).parts)
                for (const auto& v : ring) verts.push_back(proj.to_xy(v));
        int want = 0;
        for (const auto& p : pois) {
            if (p.category == "City / Outdoors") continue;
            if (oracle::point_in_convex_set(verts, proj.to_xy(p.pos))) ++want;
        }
        CHECK(got == want);
        CHECK(hull_poi_count("B", "A", pois, zm, "City / Outdoors") == got);
    }
}

TEST_CASE("degenerate collinear hull admits only boundary points") {
    std::vector<XY> hull = convex_hull({{0, 0}, {1, 0}, {2, 0}});
    REQUIRE(hull.size() == 2);
    CHECK(point_in_convex_hull({1.0, 0.0}, hull));
    CHECK(point_in_convex_hull({2.0, 0.0}, hull));
    CHECK_FALSE(point_in_convex_hull({1.0, 0.01}, hull));
    CHECK_FALSE(point_in_convex_hull({2.1, 0.0}, hull));
}

TEST_CASE("point_in_shape includes boundary") {
    std::vector<Ring> sq{{{0.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, 0.0}}};
    CHECK(point_in_shape({0.5, 0.5}, sq));
    CHECK(point_in_shape({0.0, 0.5}, sq));   // edge
    CHECK(point_in_shape({0.0, 0.0}, sq));   // vertex
    CHECK_FALSE(point_in_shape({1.5, 0.5}, sq));
}
