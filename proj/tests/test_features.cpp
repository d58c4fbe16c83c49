#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mob/features.hpp"
#include "mob/rng.hpp"
#include "oracles.hpp"

using namespace mob;

namespace {

std::vector<double> random_dist(Rng& rng, size_t k) {
    std::vector<double> p(k);
    double sum = 0.0;
    for (double& v : p) {
        v = -std::log(std::max(1e-12, rng.next_double()));
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

// A small city: two adjacent square zones plus one far zone in another county.
struct Fixture {
    ZoneMap zones;
    std::vector<Poi> pois;
    std::vector<DemographicProfile> demo;
    std::vector<BarrierLayer> layers;

    Fixture() {
        auto square = [](double lat0, double lon0, double side, const char* county) {
            ZoneShape z;
            z.parts.push_back(Ring{{lat0, lon0},
                                   {lat0, lon0 + side},
                                   {lat0 + side, lon0 + side},
                                   {lat0 + side, lon0}});
            z.centroid = polygon_centroid(z.parts);
            z.county_id = county;
            return z;
        };
        zones.zones.emplace("A", square(40.00, -75.00, 0.009, "C0"));
        zones.zones.emplace("B", square(40.00, -74.97, 0.009, "C0"));
        zones.zones.emplace("FAR", square(40.30, -75.00, 0.009, "C1"));

        pois.push_back({"p0", {40.0045, -74.9955}, "Food"});       // inside A
        pois.push_back({"p1", {40.0045, -74.9655}, "Shopping"});   // inside B
        pois.push_back({"p2", {40.0045, -74.9855}, "Grocery"});    // between A and B
        pois.push_back({"p3", {40.0045, -74.9850}, "City / Outdoors"});
        pois.push_back({"p4", {40.2, -74.5}, "Food"});             // far away

        auto mkdemo = [](const std::string& id, std::vector<double> race, double mhv,
                         double transit, const std::string& county) {
            DemographicProfile d;
            d.zone_id = id;
            d.race_dist = std::move(race);
            d.median_housing_value = mhv;
            d.transit_share = transit;
            d.employed_ratio = 0.9;
            d.poverty_ratio = 0.1;
            d.racial_diversity = 0.5;
            d.population = 1000;
            d.county_id = county;
            return d;
        };
        demo.push_back(mkdemo("A", {0.5, 0.5}, 300000, 0.30, "C0"));
        demo.push_back(mkdemo("B", {0.9, 0.1}, 450000, 0.10, "C0"));
        demo.push_back(mkdemo("FAR", {0.2, 0.8}, 200000, 0.05, "C1"));

        BarrierLayer water{BarrierKind::waterway, {}};
        Geometry river;
        river.kind = Geometry::Kind::polyline;
        river.parts.push_back(Ring{{39.99, -74.9805}, {40.02, -74.9805}});
        water.geometries.push_back(river);
        layers.push_back(std::move(water));
    }
};

}  // namespace

TEST_CASE("js distance endpoints and validation") {
    std::vector<double> p = {0.5, 0.5}, q = {0.9, 0.1};
    CHECK(js_distance(p, p) == 0.0);
    CHECK(js_distance({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(js_distance({1.0}, {0.5, 0.5}), NumericError);
    CHECK_THROWS_AS(js_distance({0.7, 0.7}, {0.5, 0.5}), NumericError);
    CHECK(js_distance(p, q) == doctest::Approx(oracle::js_direct(p, q)).epsilon(1e-12));
}

TEST_CASE("js distance equals direct evaluation on random pairs") {
    Rng rng(2024);
    for (int t = 0; t < 1000; ++t) {
        const size_t k = 2 + rng.next_below(6);
        auto p = random_dist(rng, k);
        auto q = random_dist(rng, k);
        CHECK(std::abs(js_distance(p, q) - oracle::js_direct(p, q)) < 1e-12);
    }
}

TEST_CASE("js distance satisfies the triangle inequality") {
    Rng rng(77);
    for (int t = 0; t < 1000; ++t) {
        const size_t k = 2 + rng.next_below(5);
        auto p = random_dist(rng, k);
        auto q = random_dist(rng, k);
        auto r = random_dist(rng, k);
        CHECK(js_distance(p, r) <= js_distance(p, q) + js_distance(q, r) + 1e-9);
    }
}

TEST_CASE("poi category profile: one-hot, uniform fallback, hand count") {
    Fixture f;
    auto pa = poi_category_profile("A", f.pois, f.zones);
    const auto food_idx = static_cast<size_t>(
        std::find(kPoiCategories.begin(), kPoiCategories.end(), "Food") - kPoiCategories.begin());
    CHECK(pa[food_idx] == 1.0);  // only one POI inside A

    // A zone with no POIs gets the uniform profile.
    auto far = poi_category_profile("FAR", f.pois, f.zones);
    for (double v : far) CHECK(v == doctest::Approx(1.0 / 20.0).epsilon(1e-12));

    // Mixed zone: hand-computed histogram.
    std::vector<Poi> extra = f.pois;
    extra.push_back({"p5", {40.004, -74.996}, "Shopping"});
    extra.push_back({"p6", {40.003, -74.996}, "Shopping"});
    auto mixed = poi_category_profile("A", extra, f.zones);
    const auto shop_idx = static_cast<size_t>(
        std::find(kPoiCategories.begin(), kPoiCategories.end(), "Shopping") -
        kPoiCategories.begin());
    CHECK(mixed[food_idx] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mixed[shop_idx] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("assemble produces symmetric rows matching single-pair recomputation") {
    Fixture f;
    std::vector<PairDistance> pairs;
    PairDistance ab;
    ab.zone_i = "A";
    ab.zone_j = "B";
    ab.d_phys_km = great_circle_km(f.zones.at("A").centroid, f.zones.at("B").centroid);
    ab.d_embed = 0.42;
    pairs.push_back(ab);

    AssembleResult res = assemble_pair_features(f.zones, f.pois, f.layers, f.demo, pairs);
    REQUIRE(res.rows.size() == 1);
    const PairFeatureRow& row = res.rows[0];

    CHECK(row.bin_index == static_cast<int>(std::ceil(row.d_phys_km)));
    CHECK(row.cross_county == 0);
    CHECK(row.income_diff == doctest::Approx(150000.0));
    CHECK(row.transit_diff == doctest::Approx(0.2).epsilon(1e-12));

    // Independent recomputation through the public geometry operations.
    CHECK(row.poi_interv ==
          hull_poi_count("A", "B", f.pois, f.zones, std::string(kExcludedPoiCategory)));
    auto by_cat = hull_poi_count_by_category("A", "B", f.pois, f.zones,
                                             std::string(kExcludedPoiCategory));
    const auto& cats = feature_categories();
    for (size_t k = 0; k < cats.size(); ++k) {
        const auto it = by_cat.find(cats[k]);
        CHECK(row.poi_interv_by_cat[k] == (it == by_cat.end() ? 0 : it->second));
    }
    CHECK(row.crossings[3] == count_crossings("A", "B", f.layers[0], f.zones));
    CHECK(row.crossings[3] == 1);  // the river bisects the A-B segment
    CHECK(row.poi_js == doctest::Approx(js_distance(poi_category_profile("A", f.pois, f.zones),
                                                    poi_category_profile("B", f.pois, f.zones)))
                            .epsilon(1e-12));
    CHECK(row.race_dist_js ==
          doctest::Approx(js_distance(f.demo[0].race_dist, f.demo[1].race_dist)).epsilon(1e-12));

    // Swapping the input pair changes nothing (canonical zone order).
    std::vector<PairDistance> swapped = pairs;
    std::swap(swapped[0].zone_i, swapped[0].zone_j);
    AssembleResult res2 = assemble_pair_features(f.zones, f.pois, f.layers, f.demo, swapped);
    REQUIRE(res2.rows.size() == 1);
    CHECK(res2.rows[0].zone_i == row.zone_i);
    CHECK(res2.rows[0].poi_interv == row.poi_interv);
    CHECK(res2.rows[0].race_dist_js == row.race_dist_js);
}

TEST_CASE("pairs beyond 20 km are absent and missing demographics drop pairs") {
    Fixture f;
    std::vector<PairDistance> pairs;
    PairDistance far;
    far.zone_i = "A";
    far.zone_j = "FAR";
    far.d_phys_km = great_circle_km(f.zones.at("A").centroid, f.zones.at("FAR").centroid);
    REQUIRE(far.d_phys_km > 20.0);
    pairs.push_back(far);
    AssembleResult res = assemble_pair_features(f.zones, f.pois, f.layers, f.demo, pairs);
    CHECK(res.rows.empty());
    CHECK(res.dropped_missing_demo == 0);

    PairDistance ab;
    ab.zone_i = "A";
    ab.zone_j = "B";
    ab.d_phys_km = 2.5;
    std::vector<DemographicProfile> partial = {f.demo[0]};  // B missing
    res = assemble_pair_features(f.zones, f.pois, f.layers, partial, {ab});
    CHECK(res.rows.empty());
    CHECK(res.dropped_missing_demo == 1);
}

TEST_CASE("features csv round trip") {
    Fixture f;
    PairDistance ab;
    ab.zone_i = "A";
    ab.zone_j = "B";
    ab.d_phys_km = great_circle_km(f.zones.at("A").centroid, f.zones.at("B").centroid);
    ab.d_embed = 0.11;
    AssembleResult res = assemble_pair_features(f.zones, f.pois, f.layers, f.demo, {ab});
    res.rows[0].label = 1;
    const auto p = std::filesystem::temp_directory_path() / "mob_features_test.csv";
    write_features_csv(p, res.rows);
    auto back = read_features_csv(p);
    REQUIRE(back.size() == 1);
    CHECK(back[0].zone_i == "A");
    CHECK(back[0].poi_interv == res.rows[0].poi_interv);
    CHECK(back[0].poi_interv_by_cat == res.rows[0].poi_interv_by_cat);
    CHECK(back[0].crossings == res.rows[0].crossings);
    CHECK(back[0].race_dist_js == doctest::Approx(res.rows[0].race_dist_js).epsilon(1e-15));
    REQUIRE(back[0].label.has_value());
    CHECK(*back[0].label == 1);
}
